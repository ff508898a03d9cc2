#include "roadlearn/lti/types.hpp"

#include <algorithm>
#include <cmath>

namespace roadlearn::lti {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

bool root_less(const Complex& a, const Complex& b) {
    if (a.real() != b.real()) {
        return a.real() < b.real();
    }
    return a.imag() < b.imag();
}

}  // namespace

StateSpace::StateSpace(Matrix A, Matrix B, Matrix C, Matrix D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
    const auto n = A_.rows();
    if (A_.cols() != n) {
        throw std::invalid_argument("StateSpace: A must be square");
    }
    if (B_.rows() != n || C_.cols() != n) {
        throw std::invalid_argument("StateSpace: rows(B) and cols(C) must equal rows(A)");
    }
    if (D_.rows() != C_.rows() || D_.cols() != B_.cols()) {
        throw std::invalid_argument("StateSpace: D must be rows(C) x cols(B)");
    }
    if (!all_finite(A_) || !all_finite(B_) || !all_finite(C_) || !all_finite(D_)) {
        throw std::invalid_argument("StateSpace: non-finite entry");
    }
}

StateSpace StateSpace::gain(const Matrix& D) {
    return StateSpace(Matrix(0, 0), Matrix(0, D.cols()), Matrix(D.rows(), 0), D);
}

CMatrix StateSpace::eval(Complex s) const {
    CMatrix out = D_.cast<Complex>();
    if (n() == 0) {
        return out;
    }
    CMatrix M = -A_.cast<Complex>();
    M.diagonal().array() += s;
    out += C_.cast<Complex>() * M.partialPivLu().solve(B_.cast<Complex>());
    return out;
}

Roots normalize_roots(Roots roots, double tol) {
    Roots reals, upper, lower;
    for (const auto& r : roots) {
        if (!std::isfinite(r.real()) || !std::isfinite(r.imag())) {
            throw std::invalid_argument("non-finite root");
        }
        const double scale = std::max(1.0, std::abs(r));
        if (std::abs(r.imag()) <= tol * scale) {
            reals.emplace_back(r.real(), 0.0);
        } else if (r.imag() > 0) {
            upper.push_back(r);
        } else {
            lower.push_back(r);
        }
    }
    if (upper.size() != lower.size()) {
        throw std::invalid_argument("complex roots must appear in conjugate pairs");
    }
    Roots out = reals;
    std::vector<bool> used(lower.size(), false);
    for (const auto& u : upper) {
        std::size_t best = lower.size();
        double best_dist = 0.0;
        for (std::size_t k = 0; k < lower.size(); ++k) {
            if (used[k]) {
                continue;
            }
            const double d = std::abs(u - std::conj(lower[k]));
            if (best == lower.size() || d < best_dist) {
                best = k;
                best_dist = d;
            }
        }
        if (best_dist > 1e-6 * std::max(1.0, std::abs(u))) {
            throw std::invalid_argument("complex roots must appear in conjugate pairs");
        }
        used[best] = true;
        const Complex avg = 0.5 * (u + std::conj(lower[best]));
        out.push_back(avg);
        out.push_back(std::conj(avg));
    }
    std::sort(out.begin(), out.end(), root_less);
    return out;
}

RationalEntry::RationalEntry(Roots z, Roots p, double k)
    : zeros(normalize_roots(std::move(z))), poles(normalize_roots(std::move(p))), gain(k) {
    if (!std::isfinite(gain)) {
        throw std::invalid_argument("RationalEntry: non-finite gain");
    }
    if (gain == 0.0) {
        zeros.clear();
        poles.clear();
    }
}

bool RationalEntry::is_stable(double margin) const {
    return std::all_of(poles.begin(), poles.end(),
                       [margin](const Complex& p) { return p.real() < -margin; });
}

Complex RationalEntry::eval(Complex s) const {
    Complex v(gain, 0.0);
    const std::size_t common = std::min(zeros.size(), poles.size());
    for (std::size_t i = 0; i < common; ++i) {
        v *= (s - zeros[i]) / (s - poles[i]);
    }
    for (std::size_t i = common; i < zeros.size(); ++i) {
        v *= (s - zeros[i]);
    }
    for (std::size_t i = common; i < poles.size(); ++i) {
        v /= (s - poles[i]);
    }
    return v;
}

double RationalEntry::at_infinity() const {
    if (is_zero() || zeros.size() < poles.size()) {
        return 0.0;
    }
    if (zeros.size() == poles.size()) {
        return gain;
    }
    throw LtiError("improper entry has no finite value at infinity");
}

RationalEntry RationalEntry::simplified(double tol) const {
    if (is_zero()) {
        return *this;
    }
    Roots z = zeros;
    Roots p = poles;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < z.size() && !changed; ++i) {
            if (z[i].imag() < 0) {
                continue;
            }
            const bool complex_zero = z[i].imag() > 0;
            std::size_t best = p.size();
            double best_dist = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) {
                if ((p[k].imag() > 0) != complex_zero || p[k].imag() < 0) {
                    continue;
                }
                const double d = std::abs(z[i] - p[k]);
                if (best == p.size() || d < best_dist) {
                    best = k;
                    best_dist = d;
                }
            }
            if (best == p.size() || best_dist > tol * std::max(1.0, std::abs(p[best]))) {
                continue;
            }
            const Complex zi = z[i];
            const Complex pk = p[best];
            auto erase_one = [](Roots& r, Complex v) {
                auto it = std::find(r.begin(), r.end(), v);
                if (it != r.end()) {
                    r.erase(it);
                }
            };
            erase_one(z, zi);
            erase_one(p, pk);
            if (complex_zero) {
                erase_one(z, std::conj(zi));
                erase_one(p, std::conj(pk));
            }
            changed = true;
        }
    }
    return RationalEntry(std::move(z), std::move(p), gain);
}

TransferMatrix::TransferMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), entries_(static_cast<std::size_t>(rows * cols)) {
    if (rows < 0 || cols < 0) {
        throw std::invalid_argument("TransferMatrix: negative dimension");
    }
}

TransferMatrix::TransferMatrix(int rows, int cols, std::vector<RationalEntry> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows < 0 || cols < 0 || entries_.size() != static_cast<std::size_t>(rows * cols)) {
        throw std::invalid_argument("TransferMatrix: entry count does not match dimensions");
    }
}

TransferMatrix TransferMatrix::identity(int n) {
    TransferMatrix I(n, n);
    for (int i = 0; i < n; ++i) {
        I(i, i) = RationalEntry::constant(1.0);
    }
    return I;
}

TransferMatrix TransferMatrix::constant(const Matrix& K) {
    TransferMatrix G(static_cast<int>(K.rows()), static_cast<int>(K.cols()));
    for (int i = 0; i < G.rows(); ++i) {
        for (int j = 0; j < G.cols(); ++j) {
            G(i, j) = RationalEntry::constant(K(i, j));
        }
    }
    return G;
}

std::size_t TransferMatrix::index(int i, int j) const {
    if (i < 0 || j < 0 || i >= rows_ || j >= cols_) {
        throw std::out_of_range("TransferMatrix index");
    }
    return static_cast<std::size_t>(i * cols_ + j);
}

CMatrix TransferMatrix::eval(Complex s) const {
    CMatrix out(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
        for (int j = 0; j < cols_; ++j) {
            out(i, j) = (*this)(i, j).eval(s);
        }
    }
    return out;
}

Matrix TransferMatrix::at_infinity() const {
    Matrix out(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
        for (int j = 0; j < cols_; ++j) {
            out(i, j) = (*this)(i, j).at_infinity();
        }
    }
    return out;
}

bool TransferMatrix::is_proper() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const RationalEntry& e) { return e.is_proper(); });
}

bool TransferMatrix::is_biproper() const {
    if (!is_square() || !is_proper()) {
        return false;
    }
    const Matrix Dinf = at_infinity();
    Eigen::JacobiSVD<Matrix> svd(Dinf);
    const auto& sv = svd.singularValues();
    return sv.size() > 0 && sv(sv.size() - 1) > 1e-12 * sv(0);
}

bool TransferMatrix::is_stable(double margin) const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [margin](const RationalEntry& e) { return e.is_stable(margin); });
}

bool TransferMatrix::is_diagonal() const {
    for (int i = 0; i < rows_; ++i) {
        for (int j = 0; j < cols_; ++j) {
            if (i != j && !(*this)(i, j).is_zero()) {
                return false;
            }
        }
    }
    return true;
}

TransferMatrix TransferMatrix::operator-() const { return scaled(-1.0); }

TransferMatrix TransferMatrix::scaled(double k) const {
    std::vector<RationalEntry> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
        out.emplace_back(e.zeros, e.poles, e.gain * k);
    }
    return TransferMatrix(rows_, cols_, std::move(out));
}

TransferMatrix TransferMatrix::simplified(double tol) const {
    std::vector<RationalEntry> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
        out.push_back(e.simplified(tol));
    }
    return TransferMatrix(rows_, cols_, std::move(out));
}

Signal::Signal(Matrix data, double dt, double t0) : data_(std::move(data)), dt_(dt), t0_(t0) {
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
        throw std::invalid_argument("Signal: dt must be positive");
    }
    if (data_.cols() < 1) {
        throw std::invalid_argument("Signal: at least one sample required");
    }
    if (!data_.allFinite()) {
        throw std::invalid_argument("Signal: non-finite sample");
    }
}

Signal Signal::zeros(int channels, int samples, double dt, double t0) {
    return Signal(Matrix::Zero(channels, samples), dt, t0);
}

bool Signal::composable_with(const Signal& other) const {
    return channels() == other.channels() && samples() == other.samples() &&
           std::abs(dt_ - other.dt_) <= 1e-12 * dt_;
}

Signal Signal::operator+(const Signal& other) const {
    if (!composable_with(other)) {
        throw std::invalid_argument("Signal: operands are not composable");
    }
    return Signal(data_ + other.data_, dt_, t0_);
}

Signal Signal::operator-(const Signal& other) const {
    if (!composable_with(other)) {
        throw std::invalid_argument("Signal: operands are not composable");
    }
    return Signal(data_ - other.data_, dt_, t0_);
}

Signal Signal::scaled(double k) const { return Signal(data_ * k, dt_, t0_); }

Signal Signal::tail_from(double t_from) const {
    int first = static_cast<int>(std::ceil((t_from - t0_) / dt_ - 1e-9));
    first = std::clamp(first, 0, samples() - 1);
    return Signal(data_.rightCols(samples() - first), dt_, time(first));
}

double relative_l2(const Signal& a, const Signal& b) {
    if (!a.composable_with(b)) {
        throw std::invalid_argument("relative_l2: signals are not composable");
    }
    const double nb = b.data().norm();
    const double nd = (a.data() - b.data()).norm();
    return nb > 0.0 ? nd / nb : nd;
}

std::vector<double> log_grid(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) {
        throw std::invalid_argument("log_grid: need 0 < lo < hi and count >= 2");
    }
    std::vector<double> w(static_cast<std::size_t>(count));
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int k = 0; k < count; ++k) {
        w[static_cast<std::size_t>(k)] = std::pow(10.0, a + (b - a) * k / (count - 1));
    }
    return w;
}

const std::vector<double>& analysis_grid() {
    static const std::vector<double> grid = log_grid(1e-2, 1e3, 512);
    return grid;
}

FrequencyResponse frequency_response(const TransferMatrix& G, const std::vector<double>& omegas) {
    FrequencyResponse fr;
    fr.omegas = omegas;
    fr.values.reserve(omegas.size());
    for (double w : omegas) {
        fr.values.push_back(G.eval(Complex(0.0, w)));
    }
    return fr;
}

FrequencyResponse frequency_response(const StateSpace& sys, const std::vector<double>& omegas) {
    FrequencyResponse fr;
    fr.omegas = omegas;
    fr.values.reserve(omegas.size());
    for (double w : omegas) {
        fr.values.push_back(sys.eval(Complex(0.0, w)));
    }
    return fr;
}

}  // namespace roadlearn::lti
