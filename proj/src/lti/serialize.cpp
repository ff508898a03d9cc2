#include "roadlearn/lti/serialize.hpp"

namespace roadlearn::lti {

using nlohmann::json;

json to_json(const Matrix& M) {
    json rows = json::array();
    for (int i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < M.cols(); ++j) {
            row.push_back(M(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

json to_json(const Roots& r) {
    json out = json::array();
    for (const auto& z : r) {
        out.push_back(to_json(z));
    }
    return out;
}

json to_json(const StateSpace& sys) {
    return json{{"n", sys.n()},         {"m", sys.m()},         {"p", sys.p()},
                {"A", to_json(sys.A())}, {"B", to_json(sys.B())}, {"C", to_json(sys.C())},
                {"D", to_json(sys.D())}};
}

json to_json(const RationalEntry& e) {
    return json{{"zeros", to_json(e.zeros)}, {"poles", to_json(e.poles)}, {"gain", e.gain}};
}

json to_json(const TransferMatrix& G) {
    json rows = json::array();
    for (int i = 0; i < G.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < G.cols(); ++j) {
            row.push_back(to_json(G(i, j)));
        }
        rows.push_back(std::move(row));
    }
    return json{{"p", G.rows()}, {"m", G.cols()}, {"entries", std::move(rows)}};
}

json to_json(const Signal& s) {
    return json{{"channels", s.channels()}, {"N", s.samples()}, {"dt", s.dt()},
                {"t0", s.t0()},             {"data", to_json(s.data())}};
}

json to_json(const FrequencyResponse& fr) {
    json values = json::array();
    for (const auto& V : fr.values) {
        json rows = json::array();
        for (int i = 0; i < V.rows(); ++i) {
            json row = json::array();
            for (int j = 0; j < V.cols(); ++j) {
                row.push_back(to_json(V(i, j)));
            }
            rows.push_back(std::move(row));
        }
        values.push_back(std::move(rows));
    }
    return json{{"omegas", fr.omegas}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array()) {
        throw std::invalid_argument("matrix: expected array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols) {
            throw std::invalid_argument("matrix: ragged rows");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            M(i, k) = j[i][k].get<double>();
        }
    }
    return M;
}

Complex complex_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw std::invalid_argument("complex: expected [re, im]");
    }
    return Complex(j[0].get<double>(), j[1].get<double>());
}

Roots roots_from_json(const json& j) {
    Roots r;
    for (const auto& z : j) {
        r.push_back(complex_from_json(z));
    }
    return r;
}

StateSpace state_space_from_json(const json& j) {
    const int n = j.at("n").get<int>(), m = j.at("m").get<int>(), p = j.at("p").get<int>();
    Matrix A = matrix_from_json(j.at("A"));
    Matrix B = matrix_from_json(j.at("B"));
    Matrix C = matrix_from_json(j.at("C"));
    Matrix D = matrix_from_json(j.at("D"));
    // Empty JSON arrays lose their column count.
    if (n == 0) {
        A.resize(0, 0);
        B.resize(0, m);
        C.resize(p, 0);
    }
    StateSpace sys(std::move(A), std::move(B), std::move(C), std::move(D));
    if (sys.n() != n || sys.m() != m || sys.p() != p) {
        throw std::invalid_argument("StateSpace: dimensions disagree with n/m/p");
    }
    return sys;
}

RationalEntry entry_from_json(const json& j) {
    return RationalEntry(roots_from_json(j.at("zeros")), roots_from_json(j.at("poles")),
                         j.at("gain").get<double>());
}

TransferMatrix transfer_matrix_from_json(const json& j) {
    const int p = j.at("p").get<int>(), m = j.at("m").get<int>();
    const json& rows = j.at("entries");
    if (static_cast<int>(rows.size()) != p) {
        throw std::invalid_argument("TransferMatrix: row count disagrees with p");
    }
    TransferMatrix G(p, m);
    for (int i = 0; i < p; ++i) {
        if (static_cast<int>(rows[i].size()) != m) {
            throw std::invalid_argument("TransferMatrix: column count disagrees with m");
        }
        for (int k = 0; k < m; ++k) {
            G(i, k) = entry_from_json(rows[i][k]);
        }
    }
    return G;
}

Signal signal_from_json(const json& j) {
    Signal s(matrix_from_json(j.at("data")), j.at("dt").get<double>(), j.at("t0").get<double>());
    if (s.channels() != j.at("channels").get<int>() || s.samples() != j.at("N").get<int>()) {
        throw std::invalid_argument("Signal: dimensions disagree with channels/N");
    }
    return s;
}

FrequencyResponse frequency_response_from_json(const json& j) {
    FrequencyResponse fr;
    fr.omegas = j.at("omegas").get<std::vector<double>>();
    for (const auto& V : j.at("values")) {
        const auto rows = static_cast<Eigen::Index>(V.size());
        const auto cols = rows > 0 ? static_cast<Eigen::Index>(V[0].size()) : 0;
        CMatrix M(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                M(r, c) = complex_from_json(V[r][c]);
            }
        }
        fr.values.push_back(std::move(M));
    }
    if (fr.values.size() != fr.omegas.size()) {
        throw std::invalid_argument("FrequencyResponse: value count disagrees with omegas");
    }
    return fr;
}

json document(const std::string& type, json payload) {
    return json{{"schema", kSchema}, {"type", type}, {"value", std::move(payload)}};
}

const json& document_payload(const json& doc, const std::string& type) {
    if (!doc.is_object() || doc.value("schema", "") != kSchema) {
        throw std::invalid_argument("document: unsupported or missing schema tag");
    }
    if (doc.value("type", "") != type) {
        throw std::invalid_argument("document: expected type " + type);
    }
    return doc.at("value");
}

}  // namespace roadlearn::lti
