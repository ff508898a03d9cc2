#include "roadlearn/lti/simulate.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>

namespace roadlearn::lti {

Trajectory simulate_trajectory(const StateSpace& sys, const Signal& u, const Vector& x0,
                               const SimOptions& opts) {
    if (u.channels() != sys.m()) {
        throw std::invalid_argument("simulate: input channel count must equal system inputs");
    }
    const int n = sys.n();
    if (x0.size() != n) {
        throw std::invalid_argument("simulate: x0 has wrong dimension");
    }
    const int N = u.samples();
    const double h = u.dt();
    Matrix X(n, N);
    if (n > 0) {
        const Matrix I = Matrix::Identity(n, n);
        Eigen::PartialPivLU<Matrix> lu(I - 0.5 * h * sys.A());
        const Matrix Ad = lu.solve(I + 0.5 * h * sys.A());
        const Matrix Bd = lu.solve(0.5 * h * sys.B());
        X.col(0) = x0;
        for (int k = 0; k + 1 < N; ++k) {
            X.col(k + 1) = Ad * X.col(k) + Bd * (u.data().col(k) + u.data().col(k + 1));
            if (X.col(k + 1).cwiseAbs().maxCoeff() > opts.overflow_guard ||
                !X.col(k + 1).allFinite()) {
                throw DivergenceError("simulate: state exceeded overflow guard at t=" +
                                      std::to_string(u.time(k + 1)));
            }
        }
    }
    Matrix Y = sys.D() * u.data();
    if (n > 0) {
        Y += sys.C() * X;
    }
    return Trajectory{Signal(std::move(X), h, u.t0()), Signal(std::move(Y), h, u.t0())};
}

Signal simulate(const StateSpace& sys, const Signal& u, const Vector& x0, const SimOptions& opts) {
    return simulate_trajectory(sys, u, x0, opts).y;
}

std::size_t fft_size(std::size_t n) {
    for (std::size_t m = std::max<std::size_t>(n, 2);; ++m) {
        std::size_t r = m;
        for (std::size_t f : {2u, 3u, 5u}) {
            while (r % f == 0) {
                r /= f;
            }
        }
        if (r == 1 && m % 2 == 0) {
            return m;
        }
    }
}

namespace {

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

// Owns the FFTW buffers and plans for one transform length.
class RealFft {
public:
    explicit RealFft(std::size_t M) : M_(M) {
        real_ = fftw_alloc_real(M);
        spec_ = fftw_alloc_complex(M / 2 + 1);
        std::lock_guard<std::mutex> lock(plan_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(M), real_, spec_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(M), spec_, real_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        {
            std::lock_guard<std::mutex> lock(plan_mutex());
            fftw_destroy_plan(fwd_);
            fftw_destroy_plan(inv_);
        }
        fftw_free(real_);
        fftw_free(spec_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::vector<Complex> forward(const double* x, std::size_t N) {
        std::fill(real_, real_ + M_, 0.0);
        std::copy(x, x + N, real_);
        fftw_execute(fwd_);
        std::vector<Complex> out(M_ / 2 + 1);
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] = Complex(spec_[k][0], spec_[k][1]);
        }
        return out;
    }

    // Writes the first N samples of the inverse transform (normalised).
    void inverse(const std::vector<Complex>& X, double* y, std::size_t N) {
        for (std::size_t k = 0; k < X.size(); ++k) {
            spec_[k][0] = X[k].real();
            spec_[k][1] = X[k].imag();
        }
        fftw_execute(inv_);
        const double scale = 1.0 / static_cast<double>(M_);
        for (std::size_t n = 0; n < N; ++n) {
            y[n] = real_[n] * scale;
        }
    }

private:
    std::size_t M_;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan inv_ = nullptr;
};

inline Complex cdiv(Complex a, Complex b) {
    const double den = b.real() * b.real() + b.imag() * b.imag();
    return Complex((a.real() * b.real() + a.imag() * b.imag()) / den,
                   (a.imag() * b.real() - a.real() * b.imag()) / den);
}

// Largest pole multiplicity at the origin that apply_filter expands.
constexpr int kMaxOriginOrder = 3;

// Entry prepared for fast repeated evaluation. A pole of order k at the origin
// is split off as sum_i laurent[i] / s^(i+1); regular() returns the rest.
struct PreparedEntry {
    double gain = 0.0;
    Roots zeros;
    Roots poles;  // excluding the origin poles
    int origin_order = 0;
    std::array<double, kMaxOriginOrder> laurent{};
    Complex dc;           // regular part at s = 0
    double at_inf = 0.0;  // regular part at s = infinity
    bool improper = false;

    Complex full(Complex s) const {
        Complex v(gain, 0.0);
        const std::size_t common = std::min(zeros.size(), poles.size());
        for (std::size_t i = 0; i < common; ++i) {
            v *= cdiv(s - zeros[i], s - poles[i]);
        }
        for (std::size_t i = common; i < zeros.size(); ++i) {
            v *= (s - zeros[i]);
        }
        for (std::size_t i = common; i < poles.size(); ++i) {
            v = cdiv(v, s - poles[i]);
        }
        for (int k = 0; k < origin_order; ++k) {
            v = cdiv(v, s);
        }
        return v;
    }

    Complex regular(Complex s) const {
        if (gain == 0.0) {
            return 0.0;
        }
        if (s == Complex(0.0, 0.0)) {
            return dc;
        }
        if (std::isinf(s.real())) {
            return at_inf;
        }
        Complex v = full(s);
        Complex inv = 1.0;
        for (int k = 0; k < origin_order; ++k) {
            inv = cdiv(inv, s);
            v -= laurent[static_cast<std::size_t>(k)] * inv;
        }
        return v;
    }
};

PreparedEntry prepare(const RationalEntry& e, const FilterOptions& opts) {
    PreparedEntry p;
    p.gain = e.gain;
    if (e.is_zero()) {
        return p;
    }
    int origin_poles = 0, origin_zeros = 0;
    for (const auto& z : e.zeros) {
        if (std::abs(z) <= opts.origin_tol) {
            ++origin_zeros;
        } else {
            p.zeros.push_back(z);
        }
    }
    for (const auto& q : e.poles) {
        if (std::abs(q) <= opts.origin_tol) {
            ++origin_poles;
        } else {
            p.poles.push_back(q);
        }
    }
    const int net = origin_poles - origin_zeros;
    if (net > kMaxOriginOrder) {
        throw ConditioningError("apply_filter: pole of order " + std::to_string(net) +
                                    " at the origin",
                                0.0);
    }
    // Re-insert any surplus origin zeros exactly at zero.
    for (int k = 0; k < -net; ++k) {
        p.zeros.emplace_back(0.0, 0.0);
    }
    p.origin_order = std::max(net, 0);

    // Taylor coefficients of h(s) = s^k G(s) at 0 from its log-derivative:
    // log h = log h(0) + sum_n a_n s^n, a_n = (sum_p p^-n - sum_z z^-n) / n.
    Complex h0(p.gain, 0.0);
    for (const auto& z : p.zeros) {
        h0 *= -z;
    }
    for (const auto& q : p.poles) {
        h0 /= -q;
    }
    const int k = p.origin_order;
    std::array<Complex, kMaxOriginOrder + 1> a{}, b{};
    for (int n = 1; n <= k; ++n) {
        Complex acc(0.0, 0.0);
        for (const auto& q : p.poles) {
            acc += std::pow(q, -n);
        }
        for (const auto& z : p.zeros) {
            if (z != Complex(0.0, 0.0)) {
                acc -= std::pow(z, -n);
            }
        }
        a[static_cast<std::size_t>(n)] = acc / static_cast<double>(n);
    }
    b[0] = 1.0;
    for (int n = 1; n <= k; ++n) {
        Complex acc(0.0, 0.0);
        for (int j = 1; j <= n; ++j) {
            acc += static_cast<double>(j) * a[static_cast<std::size_t>(j)] *
                   b[static_cast<std::size_t>(n - j)];
        }
        b[static_cast<std::size_t>(n)] = acc / static_cast<double>(n);
    }
    // G = sum_{i=1..k} h_{k-i} / s^i + h_k + O(s).
    for (int i = 1; i <= k; ++i) {
        p.laurent[static_cast<std::size_t>(i - 1)] = (h0 * b[static_cast<std::size_t>(k - i)]).real();
    }
    p.dc = h0 * b[static_cast<std::size_t>(k)];
    if (k == 0 && net < 0) {
        p.dc = 0.0;
    }

    const std::size_t num = p.zeros.size(), den = p.poles.size() + static_cast<std::size_t>(k);
    if (num > den) {
        p.at_inf = std::numeric_limits<double>::infinity();
        p.improper = true;
    } else if (num == den) {
        p.at_inf = p.gain;
    } else {
        p.at_inf = 0.0;
    }
    return p;
}

double slowest_time_constant(const TransferMatrix& G, const FilterOptions& opts, bool& unstable) {
    double slow = 0.0;
    unstable = false;
    for (const auto& e : G.entries()) {
        if (e.is_zero()) {
            continue;
        }
        for (const auto& q : e.poles) {
            if (std::abs(q) <= opts.origin_tol) {
                continue;
            }
            if (q.real() >= 0.0) {
                unstable = true;
                continue;
            }
            slow = std::max(slow, 1.0 / -q.real());
        }
    }
    return slow;
}

// Shared DFT filtering core. reg(k, s, w, out) fills the regular part at bin k;
// s is the bilinear image of the bin (0 and infinity at the ends) and w the
// true bin frequency.
// laurent[i] multiplies 1/s^(i+1); its time-domain image is i+1 nested
// trapezoidal accumulations from rest, the bilinear image of 1/s^(i+1).
template <class Eval>
Signal dft_filter(int rows, const Eval& reg, const std::vector<Matrix>& laurent, const Signal& u,
                  double pad_time, const FilterOptions& opts) {
    const int m = u.channels();
    const std::size_t N = static_cast<std::size_t>(u.samples());
    const double dt = u.dt();
    const std::size_t pad = static_cast<std::size_t>(std::ceil(pad_time / dt));
    const std::size_t M = fft_size(N + pad);
    const std::size_t K = M / 2 + 1;

    RealFft fft(M);
    std::vector<std::vector<Complex>> U(static_cast<std::size_t>(m));
    // Row-major copy so each channel is contiguous.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> ud = u.data();
    for (int j = 0; j < m; ++j) {
        U[static_cast<std::size_t>(j)] = fft.forward(ud.row(j).data(), N);
    }
    std::vector<std::vector<Complex>> Y(static_cast<std::size_t>(rows), std::vector<Complex>(K));
    CMatrix Gk(rows, m);
    for (std::size_t k = 0; k < K; ++k) {
        Complex s;
        if (k == 0) {
            s = Complex(0.0, 0.0);
        } else if (2 * k == M) {
            s = Complex(std::numeric_limits<double>::infinity(), 0.0);
        } else {
            s = Complex(0.0, 2.0 / dt * std::tan(M_PI * static_cast<double>(k) / static_cast<double>(M)));
        }
        const double w = 2.0 * M_PI * static_cast<double>(k) / (static_cast<double>(M) * dt);
        reg(k, s, w, Gk);
        const double gmax = Gk.cwiseAbs().maxCoeff();
        if (!(gmax <= opts.amplification_guard)) {
            throw ConditioningError("apply_filter: response exceeds amplification guard at omega=" +
                                        std::to_string(w),
                                    w);
        }
        for (int i = 0; i < rows; ++i) {
            Complex acc(0.0, 0.0);
            for (int j = 0; j < m; ++j) {
                acc += Gk(i, j) * U[static_cast<std::size_t>(j)][k];
            }
            Y[static_cast<std::size_t>(i)][k] = acc;
        }
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(rows, static_cast<Eigen::Index>(N));
    for (int i = 0; i < rows; ++i) {
        fft.inverse(Y[static_cast<std::size_t>(i)], out.row(i).data(), N);
    }
    Matrix y = out;

    if (!laurent.empty()) {
        for (int j = 0; j < m; ++j) {
            Vector v = u.data().row(j).transpose();
            for (const Matrix& coeff : laurent) {
                double prev = 0.0, acc = 0.0;
                for (Eigen::Index n = 0; n < v.size(); ++n) {
                    const double cur = v(n);
                    acc += 0.5 * dt * (cur + prev);
                    prev = cur;
                    v(n) = acc;
                }
                if (coeff.col(j).cwiseAbs().maxCoeff() > 0.0) {
                    y += coeff.col(j) * v.transpose();
                }
            }
        }
    }
    return Signal(std::move(y), dt, u.t0());
}

}  // namespace

Signal apply_filter(const TransferMatrix& G, const Signal& u, const FilterOptions& opts) {
    if (G.cols() != u.channels()) {
        throw std::invalid_argument("apply_filter: cols(G) must equal channels(u)");
    }
    const int p = G.rows(), m = G.cols();
    std::vector<PreparedEntry> prepared;
    prepared.reserve(G.entries().size());
    int order = 0;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < m; ++j) {
            prepared.push_back(prepare(G(i, j), opts));
            order = std::max(order, prepared.back().origin_order);
        }
    }
    std::vector<Matrix> laurent(static_cast<std::size_t>(order), Matrix::Zero(p, m));
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < m; ++j) {
            const PreparedEntry& e = prepared[static_cast<std::size_t>(i * m + j)];
            for (int k = 0; k < e.origin_order; ++k) {
                laurent[static_cast<std::size_t>(k)](i, j) = e.laurent[static_cast<std::size_t>(k)];
            }
        }
    }
    bool unstable = false;
    const double tau = slowest_time_constant(G, opts, unstable);
    double pad_time = unstable ? opts.max_pad_time : opts.pad_time_constants * tau;
    pad_time = std::clamp(pad_time, opts.min_pad_time, opts.max_pad_time);

    // Proper entries use the bilinear image, which matches the trapezoidal
    // simulator sample for sample. Improper entries would explode near the
    // warped Nyquist frequency, so they are evaluated at the true bin frequency
    // and the Nyquist bin keeps only its real part.
    auto reg = [&](std::size_t k, Complex s, double w, CMatrix& out) {
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j < m; ++j) {
                const PreparedEntry& e = prepared[static_cast<std::size_t>(i * m + j)];
                if (!e.improper || k == 0) {
                    out(i, j) = e.regular(s);
                } else {
                    const Complex v = e.regular(Complex(0.0, w));
                    out(i, j) = std::isinf(s.real()) ? Complex(v.real(), 0.0) : v;
                }
            }
        }
    };
    return dft_filter(p, reg, laurent, u, pad_time, opts);
}

Signal apply_response(const ResponseFunction& fn, const Matrix& residue, const Signal& u,
                      double pad_time, const FilterOptions& opts) {
    const CMatrix probe = fn(Complex(0.0, 1.0));
    if (probe.cols() != u.channels()) {
        throw std::invalid_argument("apply_response: response columns must equal channels(u)");
    }
    const int rows = static_cast<int>(probe.rows());
    if (residue.size() > 0 && (residue.rows() != rows || residue.cols() != u.channels())) {
        throw std::invalid_argument("apply_response: residue has wrong dimensions");
    }
    auto reg = [&](std::size_t, Complex s, double, CMatrix& out) { out = fn(s); };
    std::vector<Matrix> laurent;
    if (residue.size() > 0) {
        laurent.push_back(residue);
    }
    return dft_filter(rows, reg, laurent, u,
                      std::clamp(pad_time, opts.min_pad_time, opts.max_pad_time), opts);
}

}  // namespace roadlearn::lti
