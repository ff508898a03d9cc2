#include "roadlearn/cli/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace roadlearn::cli {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

// Step of roughly (hi - lo) / n rounded to 1, 2 or 5 times a power of ten.
std::vector<double> nice_ticks(double lo, double hi, int n = 5) {
    const double raw = (hi - lo) / n;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
        t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return t;
}

// Plot area inside a document, mapping data coordinates to pixels.
struct Frame {
    double left, top, width, height;
    double xmin, xmax, ymin, ymax;
    bool log_y = false;

    double px(double x) const { return left + (x - xmin) / (xmax - xmin) * width; }
    double py(double y) const {
        const double f = log_y ? (std::log10(y) - std::log10(ymin)) / (std::log10(ymax) - std::log10(ymin))
                               : (y - ymin) / (ymax - ymin);
        return top + (1.0 - f) * height;
    }
};

class Svg {
public:
    Svg(int w, int h) : w_(w), h_(h) {}

    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
              const std::string& extra = "") {
        os_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
            << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"" << extra
            << "/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none") {
        os_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
            << num(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
    }
    void circle(double x, double y, double r, const std::string& stroke, const std::string& fill = "none") {
        os_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" stroke=\""
            << stroke << "\" fill=\"" << fill << "\" stroke-width=\"1.5\"/>\n";
    }
    void cross(double x, double y, double r, const std::string& stroke) {
        line(x - r, y - r, x + r, y + r, stroke, 1.5);
        line(x - r, y + r, x + r, y - r, stroke, 1.5);
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width,
                  const std::string& extra = "") {
        os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"" << extra
            << " points=\"";
        for (const auto& [x, y] : pts) {
            os_ << num(x) << "," << num(y) << " ";
        }
        os_ << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& anchor = "middle", int size = 12,
              const std::string& extra = "") {
        os_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
            << "\" text-anchor=\"" << anchor << "\"" << extra << ">" << escape(s) << "</text>\n";
    }

    // Border, grid lines, tick labels and axis titles.
    void axes(const Frame& f, const std::string& xlabel, const std::string& ylabel, bool x_ticks = true) {
        rect(f.left, f.top, f.width, f.height, "none", "#444");
        if (x_ticks) {
            for (double t : nice_ticks(f.xmin, f.xmax)) {
                const double x = f.px(t);
                line(x, f.top, x, f.top + f.height, "#ddd", 0.8);
                text(x, f.top + f.height + 16, label(t));
            }
        }
        if (f.log_y) {
            for (int e = static_cast<int>(std::ceil(std::log10(f.ymin))); e <= std::log10(f.ymax); ++e) {
                const double y = f.py(std::pow(10.0, e));
                line(f.left, y, f.left + f.width, y, "#ddd", 0.8);
                text(f.left - 6, y + 4, "1e" + std::to_string(e), "end");
            }
        } else {
            for (double t : nice_ticks(f.ymin, f.ymax)) {
                const double y = f.py(t);
                line(f.left, y, f.left + f.width, y, "#ddd", 0.8);
                text(f.left - 6, y + 4, label(t), "end");
            }
        }
        text(f.left + f.width / 2, f.top + f.height + 36, xlabel);
        const double yc = f.top + f.height / 2;
        text(f.left - 52, yc, ylabel, "middle", 12,
             " transform=\"rotate(-90 " + num(f.left - 52) + " " + num(yc) + ")\"");
    }

    std::string str() const {
        std::ostringstream out;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
            << "\" viewBox=\"0 0 " << w_ << " " << h_ << "\" font-family=\"sans-serif\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << os_.str() << "</svg>\n";
        return out.str();
    }

private:
    int w_, h_;
    std::ostringstream os_;
};

void legend(Svg& svg, double x, double y, const std::vector<std::pair<std::string, std::string>>& items,
            const std::string& kind = "line") {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double yy = y + 16.0 * static_cast<double>(i);
        if (kind == "line") {
            svg.line(x, yy - 4, x + 20, yy - 4, items[i].second, 2.0);
        } else {
            svg.rect(x, yy - 10, 20, 10, items[i].second);
        }
        svg.text(x + 26, yy, items[i].first, "start", 11);
    }
}

}  // namespace

std::string mse_bar_chart(const std::vector<AggregateRow>& rows, bool with_plain, const std::string& space) {
    Svg svg(720, 420);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : rows) {
        const double means[] = {r.mean, r.mean_plain};
        const double stds[] = {r.std, r.std_plain};
        for (int b = 0; b < (with_plain ? 2 : 1); ++b) {
            if (means[b] > 0.0) {
                lo = std::min(lo, means[b] - stds[b] > 0.0 ? means[b] - stds[b] : means[b] / 2.0);
                hi = std::max(hi, means[b] + stds[b]);
            }
        }
    }
    if (!(hi > 0.0)) {
        lo = 1e-6;
        hi = 1.0;
    }
    Frame f{80, 40, 600, 300, 0.5, rows.size() + 0.5, std::pow(10.0, std::floor(std::log10(lo))),
            std::pow(10.0, std::ceil(std::log10(hi))), true};
    if (f.ymax <= f.ymin) {
        f.ymax = f.ymin * 10.0;
    }
    svg.text(380, 22, "Mean estimation MSE per vehicle (" + space + ")", "middle", 14);
    svg.axes(f, "vehicle index", "MSE", false);
    const double slot = f.width / static_cast<double>(rows.size());
    const int bars = with_plain ? 2 : 1;
    const double bw = slot * 0.7 / bars;
    const char* colors[] = {"#4c72b0", "#dd8452"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double cx = f.px(static_cast<double>(i + 1));
        svg.text(cx, f.top + f.height + 16, std::to_string(r.vehicle));
        const double means[] = {r.mean, r.mean_plain};
        const double stds[] = {r.std, r.std_plain};
        for (int b = 0; b < bars; ++b) {
            if (!(means[b] > 0.0)) {
                continue;
            }
            const double x = cx - bars * bw / 2 + b * bw;
            const double y = f.py(means[b]);
            svg.rect(x, y, bw * 0.92, f.top + f.height - y, colors[b]);
            const double ylo = f.py(std::max(means[b] - stds[b], f.ymin));
            const double yhi = f.py(std::min(means[b] + stds[b], f.ymax));
            const double xm = x + bw * 0.46;
            svg.line(xm, ylo, xm, yhi, "#222", 1.2);
            svg.line(xm - 4, ylo, xm + 4, ylo, "#222", 1.2);
            svg.line(xm - 4, yhi, xm + 4, yhi, "#222", 1.2);
        }
    }
    if (with_plain) {
        legend(svg, f.left + f.width - 150, f.top + 16, {{"obfuscated", colors[0]}, {"plaintext", colors[1]}}, "box");
    }
    return svg.str();
}

std::string road_overlay(const TrialTraces& tr, int trial) {
    const int n = static_cast<int>(tr.estimates.size());
    std::vector<int> shown;
    for (int j : {0, 2, n - 1}) {
        if (j >= 0 && j < n && std::find(shown.begin(), shown.end(), j) == shown.end()) {
            shown.push_back(j);
        }
    }
    const int K = static_cast<int>(tr.truth.cols());
    const char* names[] = {"left", "right"};
    Svg svg(760, 600);
    svg.text(380, 22, "Road profile, trial " + std::to_string(trial) + ": truth vs estimates", "middle", 14);
    for (int ch = 0; ch < std::min<int>(2, static_cast<int>(tr.truth.rows())); ++ch) {
        double lo = tr.truth.row(ch).minCoeff(), hi = tr.truth.row(ch).maxCoeff();
        for (int j : shown) {
            lo = std::min(lo, tr.estimates[static_cast<std::size_t>(j)].row(ch).minCoeff());
            hi = std::max(hi, tr.estimates[static_cast<std::size_t>(j)].row(ch).maxCoeff());
        }
        const double pad = 0.05 * (hi - lo + 1e-9);
        const Frame f{80, 48.0 + ch * 270.0, 520, 200, 0.0, tr.dt * (K - 1), lo - pad, hi + pad, false};
        svg.axes(f, "time [s]", std::string(names[ch]) + " profile [m]");
        auto trace = [&](const lti::Matrix& M) {
            std::vector<std::pair<double, double>> pts;
            for (int k = 0; k < K; ++k) {
                pts.emplace_back(f.px(k * tr.dt), f.py(M(ch, k)));
            }
            return pts;
        };
        svg.polyline(trace(tr.truth), "#000", 2.0);
        std::vector<std::pair<std::string, std::string>> items{{"truth", "#000"}};
        for (std::size_t i = 0; i < shown.size(); ++i) {
            const int j = shown[i];
            svg.polyline(trace(tr.estimates[static_cast<std::size_t>(j)]), kPalette[i], 1.2);
            items.emplace_back("vehicle " + std::to_string(j + 1), kPalette[i]);
            if (!tr.plain.empty()) {
                svg.polyline(trace(tr.plain[static_cast<std::size_t>(j)]), kPalette[i], 1.0,
                             " stroke-dasharray=\"4 3\"");
            }
        }
        if (!tr.plain.empty()) {
            items.emplace_back("dashed: plaintext", "#999");
        }
        legend(svg, f.left + f.width + 14, f.top + 14, items);
    }
    return svg.str();
}

std::string pole_scatter(const std::vector<attacker::AttackRecord>& records, bool obfuscated, double threshold) {
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    for (const auto& r : records) {
        for (const auto* set : {&r.true_poles, &r.inferred_poles}) {
            for (const auto& z : *set) {
                xmin = std::min(xmin, z.real());
                xmax = std::max(xmax, z.real());
                ymin = std::min(ymin, z.imag());
                ymax = std::max(ymax, z.imag());
            }
        }
    }
    const double padx = 0.06 * (xmax - xmin + 1.0), pady = 0.06 * (ymax - ymin + 1.0);
    const Frame f{80, 48, 520, 420, xmin - padx, xmax + padx, ymin - pady, ymax + pady, false};
    Svg svg(780, 540);
    int above = 0;
    for (const auto& r : records) {
        above += r.distance >= threshold ? 1 : 0;
    }
    const int trial = records.empty() ? 0 : records.front().trial;
    svg.text(340, 22,
             std::string("Pole inference, trial ") + std::to_string(trial) +
                 (obfuscated ? " (obfuscated messages)" : " (plaintext messages)"),
             "middle", 14);
    svg.axes(f, "Re(s)", "Im(s)");
    svg.line(f.px(0.0), f.top, f.px(0.0), f.top + f.height, "#888", 1.0, " stroke-dasharray=\"3 3\"");
    std::vector<std::pair<std::string, std::string>> items;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const char* c = kPalette[i % 10];
        for (const auto& z : records[i].true_poles) {
            svg.circle(f.px(z.real()), f.py(z.imag()), 5.0, c);
        }
        for (const auto& z : records[i].inferred_poles) {
            svg.cross(f.px(z.real()), f.py(z.imag()), 4.0, c);
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "vehicle %d  d=%.3g", records[i].vehicle, records[i].distance);
        items.emplace_back(buf, c);
    }
    legend(svg, f.left + f.width + 14, f.top + 14, items);
    const double ly = f.top + 14 + 16.0 * static_cast<double>(items.size()) + 16;
    svg.circle(f.left + f.width + 24, ly - 4, 5.0, "#333");
    svg.text(f.left + f.width + 40, ly, "true pole", "start", 11);
    svg.cross(f.left + f.width + 24, ly + 12, 4.0, "#333");
    svg.text(f.left + f.width + 40, ly + 16, "inferred pole", "start", 11);
    svg.text(f.left + f.width + 14, ly + 40,
             std::to_string(above) + "/" + std::to_string(records.size()) + " with d >= " + label(threshold), "start",
             11);
    return svg.str();
}

}  // namespace roadlearn::cli
