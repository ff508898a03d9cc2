#include "roadlearn/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace roadlearn::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment, ignoring '#' inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

bool parse_double(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

Value parse_value(const std::string& raw, const std::string& where) {
    const std::string v = trim(raw);
    if (v.empty()) {
        throw ConfigError(where + ": missing value");
    }
    if (v == "true" || v == "false") {
        return v == "true";
    }
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') {
            throw ConfigError(where + ": unterminated string");
        }
        return v.substr(1, v.size() - 2);
    }
    if (v.front() == '[') {
        if (v.back() != ']') {
            throw ConfigError(where + ": unterminated array");
        }
        std::vector<double> items;
        std::stringstream ss(v.substr(1, v.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) {
                continue;  // tolerates a trailing comma
            }
            double x = 0.0;
            if (!parse_double(item, x)) {
                throw ConfigError(where + ": array items must be numbers, got '" + item + "'");
            }
            items.push_back(x);
        }
        return items;
    }
    double x = 0.0;
    if (!parse_double(v, x)) {
        throw ConfigError(where + ": cannot parse value '" + v + "'");
    }
    return Number{x, v};
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".en") == std::string::npos) {
        s += ".0";
    }
    return s;
}

std::string format_array(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + format_double(v[i]);
    }
    return s + "]";
}

const Number& as_number(const Value& v, const std::string& path) {
    if (const auto* n = std::get_if<Number>(&v)) {
        return *n;
    }
    throw ConfigError(path + ": expected a number");
}

double get_double(const Value& v, const std::string& path) { return as_number(v, path).value; }

template <class Int>
Int get_integer(const Value& v, const std::string& path) {
    const std::string& text = as_number(v, path).text;
    Int out{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(path + ": expected an integer, got '" + text + "'");
    }
    return out;
}

bool get_bool(const Value& v, const std::string& path) {
    if (const auto* b = std::get_if<bool>(&v)) {
        return *b;
    }
    throw ConfigError(path + ": expected true or false");
}

std::string get_string(const Value& v, const std::string& path) {
    if (const auto* s = std::get_if<std::string>(&v)) {
        return *s;
    }
    throw ConfigError(path + ": expected a quoted string");
}

std::vector<double> get_array(const Value& v, const std::string& path) {
    if (const auto* a = std::get_if<std::vector<double>>(&v)) {
        return *a;
    }
    throw ConfigError(path + ": expected an array of numbers");
}

std::vector<double> diagonal(const lti::Matrix& M) {
    std::vector<double> d;
    for (int i = 0; i < M.rows(); ++i) {
        d.push_back(M(i, i));
    }
    return d;
}

lti::Matrix diag_matrix(const std::vector<double>& d) {
    lti::Matrix M = lti::Matrix::Zero(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) {
        M(static_cast<int>(i), static_cast<int>(i)) = d[i];
    }
    return M;
}

// One configurable field: how to read it from a parsed value and how to
// print it back.
struct Field {
    const char* section;
    const char* key;
    std::function<void(Config&, const Value&, const std::string&)> set;
    std::function<std::string(const Config&)> show;
};

template <class Get>
Field real_field(const char* sec, const char* key, Get get) {
    return {sec, key,
            [get](Config& c, const Value& v, const std::string& p) { get(c) = get_double(v, p); },
            [get](const Config& c) { return format_double(get(c)); }};
}

template <class Get>
Field int_field(const char* sec, const char* key, Get get) {
    return {sec, key,
            [get](Config& c, const Value& v, const std::string& p) { get(c) = get_integer<int>(v, p); },
            [get](const Config& c) { return std::to_string(get(c)); }};
}

template <class Get>
Field bool_field(const char* sec, const char* key, Get get) {
    return {sec, key,
            [get](Config& c, const Value& v, const std::string& p) { get(c) = get_bool(v, p); },
            [get](const Config& c) { return std::string(get(c) ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> all = [] {
        std::vector<Field> f;
        // fleet
        f.push_back(int_field("fleet", "vehicles", [](auto& c) -> auto& { return c.fleet.vehicles; }));
        f.push_back(real_field("fleet", "rel_sigma_fleet", [](auto& c) -> auto& { return c.fleet.rel_sigma_fleet; }));
        f.push_back(real_field("fleet", "rel_sigma_model", [](auto& c) -> auto& { return c.fleet.rel_sigma_model; }));
        f.push_back(real_field("fleet", "m_b", [](auto& c) -> auto& { return c.fleet.nominal.m_b; }));
        f.push_back(real_field("fleet", "I_x", [](auto& c) -> auto& { return c.fleet.nominal.I_x; }));
        f.push_back(real_field("fleet", "k_s", [](auto& c) -> auto& { return c.fleet.nominal.k_s; }));
        f.push_back(real_field("fleet", "c_s", [](auto& c) -> auto& { return c.fleet.nominal.c_s; }));
        f.push_back(real_field("fleet", "L1", [](auto& c) -> auto& { return c.fleet.nominal.L1; }));
        f.push_back(real_field("fleet", "L2", [](auto& c) -> auto& { return c.fleet.nominal.L2; }));
        // road
        f.push_back(real_field("road", "horizon", [](auto& c) -> auto& { return c.road.horizon; }));
        f.push_back(real_field("road", "dt", [](auto& c) -> auto& { return c.road.dt; }));
        f.push_back(real_field("road", "lambda", [](auto& c) -> auto& { return c.road.jdp.lambda; }));
        f.push_back({"road", "mu_eta",
                     [](Config& c, const Value& v, const std::string& p) {
                         const auto a = get_array(v, p);
                         c.road.jdp.mu_eta = Eigen::Map<const lti::Vector>(a.data(), static_cast<int>(a.size()));
                     },
                     [](const Config& c) {
                         const auto& m = c.road.jdp.mu_eta;
                         return format_array(std::vector<double>(m.data(), m.data() + m.size()));
                     }});
        f.push_back({"road", "eta_variance",
                     [](Config& c, const Value& v, const std::string& p) {
                         c.road.jdp.sigma_eta = diag_matrix(get_array(v, p));
                     },
                     [](const Config& c) { return format_array(diagonal(c.road.jdp.sigma_eta)); }});
        f.push_back({"road", "zeta_scale",
                     [](Config& c, const Value& v, const std::string& p) {
                         c.road.jdp.sigma_zeta = diag_matrix(get_array(v, p));
                     },
                     [](const Config& c) { return format_array(diagonal(c.road.jdp.sigma_zeta)); }});
        // estimator
        f.push_back(real_field("estimator", "gamma", [](auto& c) -> auto& { return c.estimator.gamma; }));
        f.push_back(real_field("estimator", "noise_std", [](auto& c) -> auto& { return c.estimator.noise_std; }));
        f.push_back(real_field("estimator", "t_trim", [](auto& c) -> auto& { return c.estimator.t_trim; }));
        // privacy
        f.push_back(bool_field("privacy", "enabled", [](auto& c) -> auto& { return c.privacy.enabled; }));
        f.push_back(bool_field("privacy", "compare", [](auto& c) -> auto& { return c.privacy.compare; }));
        f.push_back(int_field("privacy", "n1", [](auto& c) -> auto& { return c.privacy.n1; }));
        f.push_back(int_field("privacy", "n2", [](auto& c) -> auto& { return c.privacy.n2; }));
        f.push_back(real_field("privacy", "pole_re_min", [](auto& c) -> auto& { return c.privacy.obfuscator.pole_band.re_min; }));
        f.push_back(real_field("privacy", "pole_re_max", [](auto& c) -> auto& { return c.privacy.obfuscator.pole_band.re_max; }));
        f.push_back(real_field("privacy", "pole_im_max", [](auto& c) -> auto& { return c.privacy.obfuscator.pole_band.im_max; }));
        f.push_back(real_field("privacy", "zero_re_min", [](auto& c) -> auto& { return c.privacy.obfuscator.zero_band.re_min; }));
        f.push_back(real_field("privacy", "zero_re_max", [](auto& c) -> auto& { return c.privacy.obfuscator.zero_band.re_max; }));
        f.push_back(real_field("privacy", "zero_im_max", [](auto& c) -> auto& { return c.privacy.obfuscator.zero_band.im_max; }));
        f.push_back(real_field("privacy", "gain_min", [](auto& c) -> auto& { return c.privacy.obfuscator.gain_min; }));
        f.push_back(real_field("privacy", "gain_max", [](auto& c) -> auto& { return c.privacy.obfuscator.gain_max; }));
        f.push_back(real_field("privacy", "max_condition", [](auto& c) -> auto& { return c.privacy.obfuscator.max_condition; }));
        f.push_back(int_field("privacy", "max_attempts", [](auto& c) -> auto& { return c.privacy.obfuscator.max_attempts; }));
        // attacker
        f.push_back(bool_field("attacker", "enabled", [](auto& c) -> auto& { return c.attacker.enabled; }));
        f.push_back(int_field("attacker", "assumed_order", [](auto& c) -> auto& { return c.attacker.assumed_order; }));
        f.push_back(real_field("attacker", "threshold", [](auto& c) -> auto& { return c.attacker.threshold; }));
        // run
        f.push_back(int_field("run", "trials", [](auto& c) -> auto& { return c.run.trials; }));
        f.push_back({"run", "seed",
                     [](Config& c, const Value& v, const std::string& p) {
                         c.run.seed = get_integer<std::uint64_t>(v, p);
                     },
                     [](const Config& c) { return std::to_string(c.run.seed); }});
        f.push_back({"run", "output_dir",
                     [](Config& c, const Value& v, const std::string& p) { c.run.output_dir = get_string(v, p); },
                     [](const Config& c) { return "\"" + c.run.output_dir + "\""; }});
        f.push_back({"run", "mse_space",
                     [](Config& c, const Value& v, const std::string& p) {
                         const std::string s = get_string(v, p);
                         if (s == "profile") {
                             c.run.mse_space = collab::Space::profile;
                         } else if (s == "velocity") {
                             c.run.mse_space = collab::Space::velocity;
                         } else {
                             throw ConfigError(p + ": must be \"profile\" or \"velocity\", got \"" + s + "\"");
                         }
                     },
                     [](const Config& c) {
                         return std::string(c.run.mse_space == collab::Space::profile ? "\"profile\"" : "\"velocity\"");
                     }});
        f.push_back(int_field("run", "signal_trials", [](auto& c) -> auto& { return c.run.signal_trials; }));
        f.push_back(int_field("run", "signal_stride", [](auto& c) -> auto& { return c.run.signal_stride; }));
        return f;
    }();
    return all;
}

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) {
        throw ConfigError(path + ": " + what);
    }
}

void check_band(const privacy::RootBand& b, const std::string& prefix) {
    require(b.re_min < b.re_max, "privacy." + prefix + "_re_min", prefix + "_re_min must be below " + prefix + "_re_max");
    require(b.re_max < 0.0, "privacy." + prefix + "_re_max", prefix + "_re_max must be negative");
    require(b.im_max >= 0.0, "privacy." + prefix + "_im_max", prefix + "_im_max must be non-negative");
}

}  // namespace

Table parse_table(const std::string& text) {
    Table t;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = "line " + std::to_string(lineno);
        line = trim(strip_comment(line));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(where + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError(where + ": empty section name");
            }
            t[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected key = value");
        }
        if (section.empty()) {
            throw ConfigError(where + ": key outside of any section");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ConfigError(where + ": empty key");
        }
        const std::string path = section + "." + key;
        if (t[section].count(key) != 0) {
            throw ConfigError(path + ": duplicate key");
        }
        t[section][key] = parse_value(line.substr(eq + 1), path);
    }
    return t;
}

Config config_from_table(const Table& t) {
    Config c;
    std::vector<std::string> unknown;
    for (const auto& [section, entries] : t) {
        for (const auto& [key, value] : entries) {
            const std::string path = section + "." + key;
            bool found = false;
            for (const auto& f : fields()) {
                if (section == f.section && key == f.key) {
                    f.set(c, value, path);
                    found = true;
                    break;
                }
            }
            if (!found) {
                unknown.push_back(path);
            }
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown key";
        msg += unknown.size() > 1 ? "s: " : ": ";
        for (std::size_t i = 0; i < unknown.size(); ++i) {
            msg += (i ? ", " : "") + unknown[i];
        }
        throw ConfigError(msg);
    }
    validate(c);
    return c;
}

Config parse_config(const std::string& text) { return config_from_table(parse_table(text)); }

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open config file");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void validate(const Config& c) {
    require(c.fleet.vehicles >= 1, "fleet.vehicles", "vehicles must be at least 1");
    require(c.fleet.rel_sigma_fleet >= 0.0, "fleet.rel_sigma_fleet", "rel_sigma_fleet must be non-negative");
    require(c.fleet.rel_sigma_model >= 0.0, "fleet.rel_sigma_model", "rel_sigma_model must be non-negative");
    // Three-sigma truncation keeps perturbed parameters positive; perturb_params caps the spread at 0.3.
    require(c.fleet.rel_sigma_fleet < 0.3, "fleet.rel_sigma_fleet", "rel_sigma_fleet must be below 0.3");
    require(c.fleet.rel_sigma_model < 0.3, "fleet.rel_sigma_model", "rel_sigma_model must be below 0.3");
    const auto& p = c.fleet.nominal;
    const std::pair<const char*, double> params[] = {{"m_b", p.m_b}, {"I_x", p.I_x}, {"k_s", p.k_s},
                                                     {"c_s", p.c_s}, {"L1", p.L1},   {"L2", p.L2}};
    for (const auto& [name, v] : params) {
        require(v > 0.0 && std::isfinite(v), std::string("fleet.") + name, std::string(name) + " must be positive");
    }

    require(c.road.horizon > 0.0, "road.horizon", "horizon must be positive");
    require(c.road.dt > 0.0, "road.dt", "dt must be positive");
    require(c.road.dt < c.road.horizon, "road.dt", "dt must be below horizon");
    require(c.road.jdp.lambda >= 0.0, "road.lambda", "lambda must be non-negative");
    require(c.road.jdp.mu_eta.size() == 2, "road.mu_eta", "mu_eta must have 2 entries (left, right)");
    require(c.road.jdp.sigma_eta.rows() == 2, "road.eta_variance", "eta_variance must have 2 entries");
    require(c.road.jdp.sigma_zeta.rows() == 2, "road.zeta_scale", "zeta_scale must have 2 entries");
    for (double v : diagonal(c.road.jdp.sigma_eta)) {
        require(v >= 0.0, "road.eta_variance", "variances must be non-negative");
    }
    for (double v : diagonal(c.road.jdp.sigma_zeta)) {
        require(v >= 0.0, "road.zeta_scale", "diffusion scales must be non-negative");
    }

    require(c.estimator.gamma > 0.5, "estimator.gamma", "gamma must exceed 0.5");
    require(c.estimator.noise_std >= 0.0, "estimator.noise_std", "noise_std must be non-negative");
    require(c.estimator.t_trim >= 0.0, "estimator.t_trim", "t_trim must be non-negative");
    require(c.estimator.t_trim < c.road.horizon, "estimator.t_trim", "t_trim must be below road.horizon");

    require(c.privacy.n1 >= 1, "privacy.n1", "n1 must be at least 1");
    require(c.privacy.n2 >= 1, "privacy.n2", "n2 must be at least 1");
    check_band(c.privacy.obfuscator.pole_band, "pole");
    check_band(c.privacy.obfuscator.zero_band, "zero");
    const auto& o = c.privacy.obfuscator;
    require(o.gain_min > 0.0, "privacy.gain_min", "gain_min must be positive");
    require(o.gain_min <= o.gain_max, "privacy.gain_max", "gain_max must be at least gain_min");
    require(o.max_condition > 1.0, "privacy.max_condition", "max_condition must exceed 1");
    require(o.max_attempts >= 1, "privacy.max_attempts", "max_attempts must be at least 1");

    require(c.attacker.assumed_order >= 1, "attacker.assumed_order", "assumed_order must be at least 1");
    require(c.attacker.threshold > 0.0, "attacker.threshold", "threshold must be positive");

    require(c.run.trials >= 1, "run.trials", "trials must be at least 1");
    require(!c.run.output_dir.empty(), "run.output_dir", "output_dir must not be empty");
    require(c.run.signal_trials >= 0, "run.signal_trials", "signal_trials must be non-negative");
    require(c.run.signal_stride >= 1, "run.signal_stride", "signal_stride must be at least 1");
}

std::string to_text(const Config& c) {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        if (section != f.section) {
            section = f.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += std::string(f.key) + " = " + f.show(c) + "\n";
    }
    return out;
}

}  // namespace roadlearn::cli
