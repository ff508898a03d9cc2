#include "roadlearn/lti/algebra.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace roadlearn::lti {

// ---------------------------------------------------------------------------
// State-space interconnections

StateSpace ss_series(const StateSpace& L, const StateSpace& R) {
    if (L.m() != R.p()) {
        throw std::invalid_argument("ss_series: inputs of L must match outputs of R");
    }
    const int nl = L.n(), nr = R.n();
    Matrix A = Matrix::Zero(nl + nr, nl + nr);
    A.topLeftCorner(nr, nr) = R.A();
    A.bottomLeftCorner(nl, nr) = L.B() * R.C();
    A.bottomRightCorner(nl, nl) = L.A();
    Matrix B(nl + nr, R.m());
    B << R.B(), L.B() * R.D();
    Matrix C(L.p(), nl + nr);
    C << L.D() * R.C(), L.C();
    return StateSpace(std::move(A), std::move(B), std::move(C), L.D() * R.D());
}

StateSpace ss_add(const StateSpace& G, const StateSpace& H) {
    if (G.m() != H.m() || G.p() != H.p()) {
        throw std::invalid_argument("ss_add: dimension mismatch");
    }
    const int ng = G.n(), nh = H.n();
    Matrix A = Matrix::Zero(ng + nh, ng + nh);
    A.topLeftCorner(ng, ng) = G.A();
    A.bottomRightCorner(nh, nh) = H.A();
    Matrix B(ng + nh, G.m());
    B << G.B(), H.B();
    Matrix C(G.p(), ng + nh);
    C << G.C(), H.C();
    return StateSpace(std::move(A), std::move(B), std::move(C), G.D() + H.D());
}

StateSpace ss_negate(const StateSpace& G) { return StateSpace(G.A(), G.B(), -G.C(), -G.D()); }

StateSpace ss_inverse(const StateSpace& G) {
    if (G.m() != G.p()) {
        throw std::invalid_argument("ss_inverse: system must be square");
    }
    Eigen::FullPivLU<Matrix> lu(G.D());
    if (!lu.isInvertible()) {
        throw LtiError("ss_inverse: feedthrough matrix is singular");
    }
    const Matrix Di = lu.inverse();
    return StateSpace(G.A() - G.B() * Di * G.C(), G.B() * Di, -Di * G.C(), Di);
}

// ---------------------------------------------------------------------------
// Realization of zpk entries

namespace {

StateSpace first_order(double p, const double* zero) {
    Matrix A(1, 1), B(1, 1), C(1, 1), D(1, 1);
    A(0, 0) = p;
    B(0, 0) = 1.0;
    if (zero) {
        C(0, 0) = p - *zero;
        D(0, 0) = 1.0;
    } else {
        C(0, 0) = 1.0;
        D(0, 0) = 0.0;
    }
    return StateSpace(A, B, C, D);
}

// Poles sigma +- j omega in real modal form; numerator given by the number of
// zeros (0, 1 or 2) and, for two zeros, the monic quadratic s^2 + n1 s + n0.
StateSpace complex_section(Complex pole, int nzeros, double z1, double n1, double n0) {
    const double sg = pole.real();
    const double om = pole.imag();
    Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1);
    A << sg, om, -om, sg;
    B << 0.0, 1.0;
    D(0, 0) = 0.0;
    if (nzeros == 0) {
        C << 1.0 / om, 0.0;
    } else if (nzeros == 1) {
        C << (sg - z1) / om, 1.0;
    } else {
        const double a1 = -2.0 * sg;
        const double a0 = sg * sg + om * om;
        const double c2 = n1 - a1;
        C << (n0 - a0 + c2 * sg) / om, c2;
        D(0, 0) = 1.0;
    }
    return StateSpace(A, B, C, D);
}

// Two real poles carrying a complex zero pair, in controllable canonical form.
StateSpace real_pair_section(double p1, double p2, double n1, double n0) {
    const double a1 = -(p1 + p2);
    const double a0 = p1 * p2;
    Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1);
    A << 0.0, 1.0, -a0, -a1;
    B << 0.0, 1.0;
    C << n0 - a0, n1 - a1;
    D(0, 0) = 1.0;
    return StateSpace(A, B, C, D);
}

}  // namespace

StateSpace ss_balance(const StateSpace& G) {
    const int n = G.n();
    if (n == 0) {
        return G;
    }
    Matrix A = G.A(), B = G.B(), C = G.C();
    // Osborne iteration on [A B; C 0] with power-of-two state scalings, which
    // are exact in binary floating point.
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            double r = B.row(i).squaredNorm(), c = C.col(i).squaredNorm();
            for (int k = 0; k < n; ++k) {
                if (k != i) {
                    r += A(i, k) * A(i, k);
                    c += A(k, i) * A(k, i);
                }
            }
            if (r == 0.0 || c == 0.0) {
                continue;
            }
            const double f = std::exp2(std::round(0.25 * std::log2(r / c)));
            if (f != 1.0 && (c * f * f + r / (f * f)) < 0.95 * (c + r)) {
                // x_i -> x_i / f: row i scales by 1/f, column i by f.
                A.row(i) /= f;
                B.row(i) /= f;
                A.col(i) *= f;
                C.col(i) *= f;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
    }
    return StateSpace(std::move(A), std::move(B), std::move(C), G.D());
}

StateSpace realize(const RationalEntry& g) {
    if (!g.is_proper()) {
        throw std::invalid_argument("realize: improper entry has no state-space realization");
    }
    if (g.is_zero() || g.poles.empty()) {
        return StateSpace::gain(Matrix::Constant(1, 1, g.gain));
    }
    std::vector<Complex> pc, zc;
    std::vector<double> pr, zr;
    for (const auto& p : g.poles) {
        if (p.imag() > 0) {
            pc.push_back(p);
        } else if (p.imag() == 0) {
            pr.push_back(p.real());
        }
    }
    for (const auto& z : g.zeros) {
        if (z.imag() > 0) {
            zc.push_back(z);
        } else if (z.imag() == 0) {
            zr.push_back(z.real());
        }
    }

    // Each section takes the zeros nearest to its poles, which keeps section
    // gains close to one.
    auto take_nearest = [](auto& pool, Complex target) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < pool.size(); ++k) {
            if (std::abs(Complex(pool[k]) - target) < std::abs(Complex(pool[best]) - target)) {
                best = k;
            }
        }
        auto v = pool[best];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
        return v;
    };
    std::vector<StateSpace> sections;
    // Complex zero pairs go to complex pole pairs, then to pairs of real poles.
    while (!zc.empty() && !pc.empty()) {
        const Complex p = pc.back();
        pc.pop_back();
        const Complex z = take_nearest(zc, p);
        sections.push_back(complex_section(p, 2, 0.0, -2.0 * z.real(), std::norm(z)));
    }
    while (!zc.empty()) {
        const Complex z = zc.back();
        zc.pop_back();
        const double p1 = take_nearest(pr, z);
        const double p2 = take_nearest(pr, z);
        sections.push_back(real_pair_section(p1, p2, -2.0 * z.real(), std::norm(z)));
    }
    for (const auto& p : pc) {
        if (zr.size() >= 2) {
            const double z1 = take_nearest(zr, p);
            const double z2 = take_nearest(zr, p);
            sections.push_back(complex_section(p, 2, 0.0, -(z1 + z2), z1 * z2));
        } else if (zr.size() == 1) {
            sections.push_back(complex_section(p, 1, zr.back(), 0.0, 0.0));
            zr.pop_back();
        } else {
            sections.push_back(complex_section(p, 0, 0.0, 0.0, 0.0));
        }
    }
    for (double p : pr) {
        if (!zr.empty()) {
            const double z = take_nearest(zr, Complex(p, 0.0));
            sections.push_back(first_order(p, &z));
        } else {
            sections.push_back(first_order(p, nullptr));
        }
    }

    StateSpace acc = sections.front();
    for (std::size_t k = 1; k < sections.size(); ++k) {
        acc = ss_series(sections[k], acc);
    }
    return ss_balance(StateSpace(acc.A(), acc.B(), g.gain * acc.C(), g.gain * acc.D()));
}

StateSpace realize(const TransferMatrix& G) {
    const int p = G.rows(), m = G.cols();
    std::vector<StateSpace> parts;
    int n = 0;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < m; ++j) {
            parts.push_back(realize(G(i, j)));
            n += parts.back().n();
        }
    }
    Matrix A = Matrix::Zero(n, n), B = Matrix::Zero(n, m), C = Matrix::Zero(p, n), D(p, m);
    int off = 0;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < m; ++j) {
            const StateSpace& s = parts[static_cast<std::size_t>(i * m + j)];
            const int k = s.n();
            A.block(off, off, k, k) = s.A();
            B.block(off, j, k, 1) = s.B();
            C.block(i, off, 1, k) = s.C();
            D(i, j) = s.D()(0, 0);
            off += k;
        }
    }
    return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D));
}

StateSpace minimal_realization(const TransferMatrix& G, double tol) {
    return ss_minreal(realize(G), tol);
}

// ---------------------------------------------------------------------------
// Products with exact origin factors

int origin_zero_order(const TransferMatrix& G) {
    int order = -1;
    for (const auto& e : G.entries()) {
        if (e.is_zero()) {
            continue;
        }
        int k = 0;
        for (const auto& z : e.zeros) {
            k += z == Complex(0.0, 0.0) ? 1 : 0;
        }
        for (const auto& p : e.poles) {
            k -= p == Complex(0.0, 0.0) ? 1 : 0;
        }
        order = order < 0 ? k : std::min(order, k);
    }
    return std::max(order, 0);
}

namespace {

// Removes pairs of identical roots at `at` from zeros and poles.
void cancel_exact(Roots& zeros, Roots& poles, Complex at) {
    for (;;) {
        auto z = std::find(zeros.begin(), zeros.end(), at);
        auto p = std::find(poles.begin(), poles.end(), at);
        if (z == zeros.end() || p == poles.end()) {
            return;
        }
        zeros.erase(z);
        poles.erase(p);
    }
}

}  // namespace

TransferMatrix scale_origin_order(const TransferMatrix& G, int k, double a) {
    if (k == 0) {
        return G;
    }
    if (!(a > 0.0)) {
        throw std::invalid_argument("scale_origin_order: a must be positive");
    }
    const Complex origin(0.0, 0.0), shift(-a, 0.0);
    std::vector<RationalEntry> out;
    out.reserve(G.entries().size());
    for (const auto& e : G.entries()) {
        if (e.is_zero()) {
            out.push_back(e);
            continue;
        }
        Roots z = e.zeros, p = e.poles;
        for (int i = 0; i < std::abs(k); ++i) {
            (k > 0 ? z : p).push_back(origin);
            (k > 0 ? p : z).push_back(shift);
        }
        cancel_exact(z, p, origin);
        cancel_exact(z, p, shift);
        out.emplace_back(std::move(z), std::move(p), e.gain);
    }
    return TransferMatrix(G.rows(), G.cols(), std::move(out));
}

TransferMatrix tf_chain(const std::vector<ChainFactor>& factors) {
    if (factors.empty()) {
        throw std::invalid_argument("tf_chain: no factors");
    }
    std::vector<TransferMatrix> reduced;
    reduced.reserve(factors.size());
    int net = 0;
    for (const auto& f : factors) {
        if (f.G == nullptr) {
            throw std::invalid_argument("tf_chain: null factor");
        }
        const int k = origin_zero_order(*f.G);
        reduced.push_back(scale_origin_order(*f.G, -k));
        net += f.inverted ? -k : k;
    }
    TransferMatrix product;
    const bool proper = std::all_of(reduced.begin(), reduced.end(),
                                    [](const TransferMatrix& x) { return x.is_proper(); });
    try {
        if (!proper) {
            throw LtiError("tf_chain: improper factor");
        }
        StateSpace acc;
        for (std::size_t i = 0; i < factors.size(); ++i) {
            StateSpace x = minimal_realization(reduced[i]);
            if (factors[i].inverted) {
                x = ss_inverse(x);
            }
            acc = i == 0 ? x : ss_minreal(ss_series(acc, x));
        }
        product = ss_to_tf(acc);
    } catch (const LtiError&) {
        // Singular feedthrough or failed factorisation: multiply in zpk form.
        for (std::size_t i = 0; i < factors.size(); ++i) {
            TransferMatrix x = factors[i].inverted ? tf_inverse(reduced[i]) : reduced[i];
            product = i == 0 ? x : tf_multiply(product, x);
        }
    }
    return scale_origin_order(product, net);
}

// ---------------------------------------------------------------------------
// State space -> zpk

Roots eigenvalues(const Matrix& A) {
    if (A.rows() == 0) {
        return {};
    }
    Eigen::EigenSolver<Matrix> es(A, false);
    if (es.info() != Eigen::Success) {
        throw DiagnosticsError("eigenvalue iteration did not converge");
    }
    const auto& ev = es.eigenvalues();
    return Roots(ev.data(), ev.data() + ev.size());
}

namespace {

struct Siso {
    Matrix A;
    Vector b;
    Vector c;
    double d = 0.0;
};

Complex siso_eval(const Siso& s, Complex z) {
    Complex v(s.d, 0.0);
    if (s.A.rows() == 0) {
        return v;
    }
    CMatrix M = -s.A.cast<Complex>();
    M.diagonal().array() += z;
    const CVector x = M.partialPivLu().solve(s.b.cast<Complex>());
    return v + s.c.cast<Complex>().dot(x);
}

// States lying on some path from the input to the output in the graph of A.
std::vector<int> structural_support(const Matrix& A, const Vector& b, const Vector& c) {
    const int n = static_cast<int>(A.rows());
    std::vector<char> fwd(n, 0), bwd(n, 0);
    std::vector<int> stack;
    for (int k = 0; k < n; ++k) {
        if (b(k) != 0.0) {
            fwd[k] = 1;
            stack.push_back(k);
        }
    }
    while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        for (int l = 0; l < n; ++l) {
            if (!fwd[l] && A(l, k) != 0.0) {
                fwd[l] = 1;
                stack.push_back(l);
            }
        }
    }
    for (int k = 0; k < n; ++k) {
        if (c(k) != 0.0) {
            bwd[k] = 1;
            stack.push_back(k);
        }
    }
    while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        for (int l = 0; l < n; ++l) {
            if (!bwd[l] && A(k, l) != 0.0) {
                bwd[l] = 1;
                stack.push_back(l);
            }
        }
    }
    std::vector<int> keep;
    for (int k = 0; k < n; ++k) {
        if (fwd[k] && bwd[k]) {
            keep.push_back(k);
        }
    }
    return keep;
}

// Orthonormal basis of the Krylov space span{b, Ab, ...} (Arnoldi with
// re-orthogonalisation); stops when the new direction is numerically dependent.
Matrix krylov_basis(const Matrix& A, const Vector& b, double tol) {
    const int n = static_cast<int>(A.rows());
    const double nb = b.norm();
    if (nb == 0.0 || n == 0) {
        return Matrix(n, 0);
    }
    const double scale = std::max(A.norm(), 1e-300);
    Matrix V(n, n);
    V.col(0) = b / nb;
    int r = 1;
    while (r < n) {
        Vector w = A * V.col(r - 1);
        for (int pass = 0; pass < 2; ++pass) {
            w -= V.leftCols(r) * (V.leftCols(r).transpose() * w);
        }
        const double h = w.norm();
        if (h <= tol * scale) {
            break;
        }
        V.col(r) = w / h;
        ++r;
    }
    return V.leftCols(r);
}

Siso minimal_siso(const Siso& s, double tol) {
    const Matrix Vc = krylov_basis(s.A, s.b, tol);
    Siso c{Vc.transpose() * s.A * Vc, Vc.transpose() * s.b, Vc.transpose() * s.c, s.d};
    const Matrix Vo = krylov_basis(c.A.transpose(), c.c, tol);
    return Siso{Vo.transpose() * c.A * Vo, Vo.transpose() * c.b, Vo.transpose() * c.c, s.d};
}

Roots finite_zeros(const Siso& s, double rho) {
    const int n = static_cast<int>(s.A.rows());
    const double big = 1e8 * rho;
    Roots out;
    const Complex sref(0.0, rho);
    Siso sp = s;
    sp.d = 0.0;
    const double dyn = std::abs(siso_eval(sp, sref));
    if (std::abs(s.d) > 1e-13 * dyn && s.d != 0.0) {
        const Matrix Az = s.A - s.b * s.c.transpose() / s.d;
        for (const auto& z : eigenvalues(Az)) {
            if (std::abs(z) <= big) {
                out.push_back(z);
            }
        }
        return out;
    }
    Matrix M = Matrix::Zero(n + 1, n + 1), N = Matrix::Zero(n + 1, n + 1);
    M.topLeftCorner(n, n) = s.A;
    M.topRightCorner(n, 1) = s.b;
    M.bottomLeftCorner(1, n) = s.c.transpose();
    M(n, n) = s.d;
    N.topLeftCorner(n, n).setIdentity();
    Eigen::GeneralizedEigenSolver<Matrix> ges(M, N, false);
    if (ges.info() != Eigen::Success) {
        throw DiagnosticsError("QZ iteration did not converge");
    }
    const auto alphas = ges.alphas();
    const auto betas = ges.betas();
    for (int k = 0; k < alphas.size(); ++k) {
        const double beta = betas(k);
        if (beta == 0.0) {
            continue;
        }
        const Complex z = alphas(k) / beta;
        if (std::isfinite(z.real()) && std::isfinite(z.imag()) && std::abs(z) <= big) {
            out.push_back(z);
        }
    }
    return out;
}

Complex zpk_shape(const Roots& zeros, const Roots& poles, Complex s) {
    const RationalEntry unit(zeros, poles, 1.0);
    return unit.eval(s);
}

// scale is a response magnitude of the whole system; channels that are pure
// rounding noise relative to it come back as exact zeros.
// Multiple roots at the origin come back from the eigensolver spread over a
// small circle whose radius grows like eps^(1/m). The m smallest roots are
// moved to exactly zero when every elementary symmetric function e_k of the
// group stays below eta * rho^k, which genuine small roots do not satisfy.
Roots snap_origin_cluster(Roots roots, double rho, double eta) {
    if (eta <= 0.0 || roots.empty()) {
        return roots;
    }
    std::stable_sort(roots.begin(), roots.end(),
                     [](const Complex& a, const Complex& b) { return std::abs(a) < std::abs(b); });
    const int limit = std::min<int>(4, static_cast<int>(roots.size()));
    int best = 0;
    std::vector<Complex> e(static_cast<std::size_t>(limit) + 1, Complex(0.0, 0.0));
    e[0] = 1.0;
    for (int m = 1; m <= limit; ++m) {
        const Complex z = roots[static_cast<std::size_t>(m - 1)];
        for (int k = m; k >= 1; --k) {
            e[static_cast<std::size_t>(k)] += z * e[static_cast<std::size_t>(k - 1)];
        }
        bool small = true;
        for (int k = 1; k <= m && small; ++k) {
            small = std::abs(e[static_cast<std::size_t>(k)]) <= eta * std::pow(rho, k);
        }
        if (!small) {
            break;
        }
        // Do not split a conjugate pair.
        const bool splits = m < static_cast<int>(roots.size()) && z.imag() != 0.0 &&
                            roots[static_cast<std::size_t>(m)] == std::conj(z);
        if (!splits) {
            best = m;
        }
    }
    for (int k = 0; k < best; ++k) {
        roots[static_cast<std::size_t>(k)] = Complex(0.0, 0.0);
    }
    return roots;
}

// Replaces every group of roots closer than tol * max(1, |z|) to a neighbour
// by the group mean. A root of multiplicity m comes back from the
// eigensolver spread by about eps^(1/m); the group mean is accurate to eps.
Roots merge_clusters(Roots roots, double tol) {
    const std::size_t n = roots.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    const auto find = [&](std::size_t i) {
        while (parent[i] != i) {
            i = parent[i] = parent[parent[i]];
        }
        return i;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(roots[i] - roots[j]) <= tol * std::max(1.0, std::abs(roots[i]))) {
                parent[find(i)] = find(j);
            }
        }
    }
    std::vector<Complex> sum(n, Complex(0.0, 0.0));
    std::vector<int> count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        sum[find(i)] += roots[i];
        ++count[find(i)];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        Complex mean = sum[r] / static_cast<double>(count[r]);
        // A group straddling the real axis is a multiple real root.
        if (std::abs(mean.imag()) <= tol * std::max(1.0, std::abs(mean))) {
            mean = Complex(mean.real(), 0.0);
        }
        roots[i] = mean;
    }
    return roots;
}

RationalEntry siso_to_entry(const Siso& full, double scale, const TfOptions& opts) {
    const Siso s = minimal_siso(full, 1e-11);
    if (s.A.rows() == 0) {
        return RationalEntry::constant(s.d);
    }
    if (s.c.norm() == 0.0 || s.b.norm() == 0.0) {
        return RationalEntry::constant(s.d);
    }
    const Roots raw_poles = normalize_roots(eigenvalues(s.A), 1e-10);
    double rho = 1.0;
    for (const auto& p : raw_poles) {
        rho = std::max(rho, std::abs(p));
    }
    const Roots raw_zeros = normalize_roots(finite_zeros(s, rho), 1e-10);

    const auto candidate = [&](double merge_tol) {
        Roots poles = merge_tol > 0.0 ? merge_clusters(raw_poles, merge_tol) : raw_poles;
        Roots zeros = merge_tol > 0.0 ? merge_clusters(raw_zeros, merge_tol) : raw_zeros;
        poles = normalize_roots(snap_origin_cluster(poles, rho, opts.origin_snap), 1e-10);
        zeros = normalize_roots(snap_origin_cluster(zeros, rho, opts.origin_snap), 1e-10);
        if (zeros.size() > poles.size()) {
            throw DiagnosticsError("ss_to_tf: more finite zeros than poles");
        }
        double big = rho;
        for (const auto& z : zeros) {
            big = std::max(big, std::abs(z));
        }
        const Complex refs[2] = {std::polar(2.0 * big + 1.0, 1.2), std::polar(2.0 * big + 1.0, 0.7)};
        double gain = 0.0;
        for (const auto& r : refs) {
            gain += (siso_eval(s, r) / zpk_shape(zeros, poles, r)).real();
        }
        gain *= 0.5;
        return RationalEntry(zeros, poles, gain).simplified(opts.cancel_tol);
    };

    // Self-check against the structurally reduced channel.
    double ref = 0.0;
    std::vector<std::pair<Complex, Complex>> probes;
    const double mid = std::sqrt(rho);
    for (const Complex pt : {Complex(0.0, 0.1 * mid), Complex(0.0, mid), Complex(0.0, 10.0 * mid),
                             Complex(1.0, 1.0)}) {
        const Complex g = siso_eval(full, pt);
        probes.emplace_back(pt, g);
        ref = std::max(ref, std::abs(g));
    }
    const auto mismatch = [&](const RationalEntry& e) {
        double worst = 0.0;
        for (const auto& [pt, g] : probes) {
            const double denom = std::max(std::abs(g), 1e-6 * std::max(ref, scale));
            if (denom > 0.0) {
                worst = std::max(worst, std::abs(g - e.eval(pt)) / denom);
            }
        }
        return worst;
    };

    // Repeated modes (the same observer or plant pole in several factors of a
    // chain) leave clusters of nearly equal roots. Merged candidates are tried
    // as well and the best fitting one is kept.
    RationalEntry best = candidate(0.0);
    double best_err = mismatch(best);
    for (double merge_tol : {1e-7, 1e-5, 1e-3}) {
        if (best_err <= 1e-12) {
            break;
        }
        const RationalEntry e = candidate(merge_tol);
        const double err = mismatch(e);
        if (err < best_err) {
            best = e;
            best_err = err;
        }
    }
    if (best_err > opts.check_tol) {
        // A channel that is rounding noise next to the rest of the system
        // cannot be factored reliably; it is returned as an exact zero.
        if (ref <= opts.zero_tol * scale) {
            return RationalEntry::constant(0.0);
        }
        throw DiagnosticsError("ss_to_tf: zpk conversion mismatch " + std::to_string(best_err));
    }
    return best;
}

}  // namespace

namespace {

// Orthonormal basis of span{X, AX, A^2 X, ...}. New directions are accepted
// column by column after two Gram-Schmidt passes.
Matrix block_krylov(const Matrix& A, const Matrix& X, double tol) {
    const int n = static_cast<int>(A.rows());
    Matrix V(n, n);
    int r = 0;
    auto absorb = [&](const Matrix& W, double ref) {
        std::vector<Vector> added;
        for (int k = 0; k < W.cols() && r < n; ++k) {
            Vector w = W.col(k);
            for (int pass = 0; pass < 2; ++pass) {
                if (r > 0) {
                    w -= V.leftCols(r) * (V.leftCols(r).transpose() * w);
                }
            }
            const double h = w.norm();
            if (h > tol * ref) {
                V.col(r++) = w / h;
                added.push_back(V.col(r - 1));
            }
        }
        Matrix out(n, static_cast<Eigen::Index>(added.size()));
        for (std::size_t k = 0; k < added.size(); ++k) {
            out.col(static_cast<Eigen::Index>(k)) = added[k];
        }
        return out;
    };
    Matrix fresh = absorb(X, std::max(X.norm(), 1e-300));
    const double ascale = std::max(A.norm(), 1e-300);
    while (fresh.cols() > 0 && r < n) {
        fresh = absorb(A * fresh, ascale);
    }
    // Restore exact orthonormality so the projection is a true similarity on
    // the kept subspace.
    Eigen::HouseholderQR<Matrix> qr(V.leftCols(r));
    return qr.householderQ() * Matrix::Identity(n, r);
}

}  // namespace

StateSpace ss_minreal(const StateSpace& G, double tol) {
    if (G.n() == 0) {
        return G;
    }
    const Matrix Vc = block_krylov(G.A(), G.B(), tol);
    const Matrix Ac = Vc.transpose() * G.A() * Vc;
    const Matrix Bc = Vc.transpose() * G.B();
    const Matrix Cc = G.C() * Vc;
    if (Ac.rows() == 0) {
        return StateSpace::gain(G.D());
    }
    const Matrix Vo = block_krylov(Ac.transpose(), Cc.transpose(), tol);
    if (Vo.cols() == 0) {
        return StateSpace::gain(G.D());
    }
    return StateSpace(Vo.transpose() * Ac * Vo, Vo.transpose() * Bc, Cc * Vo, G.D());
}

TransferMatrix ss_to_tf(const StateSpace& sys, const TfOptions& opts) {
    TransferMatrix G(sys.p(), sys.m());
    double scale = sys.D().norm();
    {
        double rho = 1.0;
        if (sys.n() > 0) {
            for (const auto& p : eigenvalues(sys.A())) {
                rho = std::max(rho, std::abs(p));
            }
        }
        const double mid = std::sqrt(rho);
        for (double w : {0.1 * mid, mid, 10.0 * mid}) {
            scale = std::max(scale, sys.eval(Complex(0.0, w)).norm());
        }
    }
    for (int i = 0; i < sys.p(); ++i) {
        for (int j = 0; j < sys.m(); ++j) {
            const Vector b = sys.B().col(j);
            const Vector c = sys.C().row(i).transpose();
            const std::vector<int> keep = structural_support(sys.A(), b, c);
            const int k = static_cast<int>(keep.size());
            Siso s;
            s.A.resize(k, k);
            s.b.resize(k);
            s.c.resize(k);
            s.d = sys.D()(i, j);
            for (int r = 0; r < k; ++r) {
                s.b(r) = b(keep[r]);
                s.c(r) = c(keep[r]);
                for (int q = 0; q < k; ++q) {
                    s.A(r, q) = sys.A()(keep[r], keep[q]);
                }
            }
            G(i, j) = siso_to_entry(s, scale, opts);
        }
    }
    return G;
}

// ---------------------------------------------------------------------------
// Polynomial helpers (used only for improper operands)

Eigen::VectorXd poly_from_roots(const Roots& roots) {
    CVector c = CVector::Ones(1);
    for (const auto& r : roots) {
        CVector next = CVector::Zero(c.size() + 1);
        next.head(c.size()) += c;
        next.tail(c.size()) -= r * c;
        c = next;
    }
    return c.real();
}

Roots poly_roots(const Eigen::VectorXd& coeffs) {
    const double cmax = coeffs.cwiseAbs().maxCoeff();
    int lead = 0;
    while (lead < coeffs.size() && std::abs(coeffs(lead)) <= 1e-14 * cmax) {
        ++lead;
    }
    const int deg = static_cast<int>(coeffs.size()) - lead - 1;
    if (deg <= 0) {
        return {};
    }
    Matrix comp = Matrix::Zero(deg, deg);
    for (int k = 0; k < deg; ++k) {
        comp(0, k) = -coeffs(lead + 1 + k) / coeffs(lead);
    }
    comp.bottomLeftCorner(deg - 1, deg - 1).setIdentity();
    return eigenvalues(comp);
}

namespace {

Eigen::VectorXd poly_mul(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(a.size() + b.size() - 1);
    for (int i = 0; i < a.size(); ++i) {
        for (int j = 0; j < b.size(); ++j) {
            c(i + j) += a(i) * b(j);
        }
    }
    return c;
}

Eigen::VectorXd poly_add(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const auto n = std::max(a.size(), b.size());
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    c.tail(a.size()) += a;
    c.tail(b.size()) += b;
    return c;
}

RationalEntry entry_multiply(const RationalEntry& a, const RationalEntry& b, double tol) {
    if (a.is_zero() || b.is_zero()) {
        return RationalEntry::constant(0.0);
    }
    Roots z = a.zeros, p = a.poles;
    z.insert(z.end(), b.zeros.begin(), b.zeros.end());
    p.insert(p.end(), b.poles.begin(), b.poles.end());
    return RationalEntry(std::move(z), std::move(p), a.gain * b.gain).simplified(tol);
}

RationalEntry entry_add_poly(const RationalEntry& a, const RationalEntry& b, double tol) {
    const Eigen::VectorXd na = a.gain * poly_mul(poly_from_roots(a.zeros), poly_from_roots(b.poles));
    const Eigen::VectorXd nb = b.gain * poly_mul(poly_from_roots(b.zeros), poly_from_roots(a.poles));
    const Eigen::VectorXd num = poly_add(na, nb);
    const double cmax = num.cwiseAbs().maxCoeff();
    if (cmax == 0.0) {
        return RationalEntry::constant(0.0);
    }
    int lead = 0;
    while (std::abs(num(lead)) <= 1e-14 * cmax) {
        ++lead;
    }
    Roots p = a.poles;
    p.insert(p.end(), b.poles.begin(), b.poles.end());
    return RationalEntry(poly_roots(num.tail(num.size() - lead)), std::move(p), num(lead))
        .simplified(tol);
}

RationalEntry entry_add(const RationalEntry& a, const RationalEntry& b) {
    if (a.is_zero()) {
        return b;
    }
    if (b.is_zero()) {
        return a;
    }
    if (a.poles.empty() && b.poles.empty()) {
        return RationalEntry::constant(a.gain + b.gain);
    }
    if (a.is_proper() && b.is_proper()) {
        const StateSpace s = ss_add(realize(a), realize(b));
        return ss_to_tf(s)(0, 0);
    }
    return entry_add_poly(a, b, 1e-7);
}

void check_same_dims(const TransferMatrix& G, const TransferMatrix& H, const char* what) {
    if (G.rows() != H.rows() || G.cols() != H.cols()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Transfer-matrix algebra

TransferMatrix tf_multiply(const TransferMatrix& L, const TransferMatrix& R) {
    if (L.cols() != R.rows()) {
        throw std::invalid_argument("tf_multiply: cols(L) must equal rows(R)");
    }
    const int p = L.rows(), q = L.cols(), m = R.cols();
    if (L.is_diagonal() || R.is_diagonal() || !(L.is_proper() && R.is_proper())) {
        // Entry-wise route: exact for diagonal factors, the only option for improper ones.
        TransferMatrix out(p, m);
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j < m; ++j) {
                RationalEntry acc = RationalEntry::constant(0.0);
                for (int k = 0; k < q; ++k) {
                    acc = entry_add(acc, entry_multiply(L(i, k), R(k, j), 1e-7));
                }
                out(i, j) = acc;
            }
        }
        return out;
    }
    return ss_to_tf(ss_series(realize(L), realize(R)));
}

TransferMatrix tf_add(const TransferMatrix& G, const TransferMatrix& H) {
    check_same_dims(G, H, "tf_add");
    TransferMatrix out(G.rows(), G.cols());
    for (int i = 0; i < G.rows(); ++i) {
        for (int j = 0; j < G.cols(); ++j) {
            out(i, j) = entry_add(G(i, j), H(i, j));
        }
    }
    return out;
}

TransferMatrix tf_subtract(const TransferMatrix& G, const TransferMatrix& H) {
    return tf_add(G, -H);
}

void check_invertible_on_grid(const TransferMatrix& G, const InverseOptions& opts) {
    if (!G.is_square()) {
        throw std::invalid_argument("tf_inverse: transfer matrix must be square");
    }
    const std::vector<double>& grid = opts.grid ? *opts.grid : analysis_grid();
    double dmax = 0.0, dmin = std::numeric_limits<double>::infinity(), wmin = grid.front();
    for (double w : grid) {
        const double d = std::abs(G.eval(Complex(0.0, w)).determinant());
        dmax = std::max(dmax, d);
        if (d < dmin) {
            dmin = d;
            wmin = w;
        }
    }
    if (!(dmax > 0.0) || !(dmin >= opts.det_threshold * dmax)) {
        throw SingularityError("tf_inverse: determinant numerically singular at omega=" +
                                   std::to_string(wmin),
                               wmin);
    }
}

TransferMatrix tf_inverse(const TransferMatrix& G, const InverseOptions& opts) {
    check_invertible_on_grid(G, opts);
    const int n = G.rows();

    if (G.is_diagonal()) {
        TransferMatrix out(n, n);
        for (int i = 0; i < n; ++i) {
            const RationalEntry& g = G(i, i);
            out(i, i) = RationalEntry(g.poles, g.zeros, 1.0 / g.gain);
        }
        return out;
    }
    if (G.is_biproper()) {
        Eigen::JacobiSVD<Matrix> svd(G.at_infinity());
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) > 1e-10 * sv(0)) {
            return ss_to_tf(ss_inverse(realize(G)));
        }
    }
    if (n != 2) {
        throw LtiError("tf_inverse: improper inverse supported for 2x2 only");
    }
    auto neg = [](RationalEntry e) {
        e.gain = -e.gain;
        return e;
    };
    const RationalEntry det = entry_add(entry_multiply(G(0, 0), G(1, 1), 1e-7),
                                        neg(entry_multiply(G(0, 1), G(1, 0), 1e-7)));
    const RationalEntry inv_det(det.poles, det.zeros, 1.0 / det.gain);
    TransferMatrix out(2, 2);
    out(0, 0) = entry_multiply(G(1, 1), inv_det, 1e-7);
    out(0, 1) = entry_multiply(neg(G(0, 1)), inv_det, 1e-7);
    out(1, 0) = entry_multiply(neg(G(1, 0)), inv_det, 1e-7);
    out(1, 1) = entry_multiply(G(0, 0), inv_det, 1e-7);
    return out;
}

Roots tf_poles(const TransferMatrix& G, double tol) {
    // (representative, multiplicity) clusters accumulated across entries.
    std::vector<std::pair<Complex, int>> global;
    auto close = [tol](Complex a, Complex b) {
        return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
    };
    for (const auto& e : G.entries()) {
        const RationalEntry s = e.simplified(tol);
        std::vector<std::pair<Complex, int>> local;
        // Entry roots are exact conjugate pairs, so clustering the closed upper
        // half plane and mirroring keeps the result conjugate-closed.
        for (const auto& p : s.poles) {
            if (p.imag() < 0.0) {
                continue;
            }
            auto it = std::find_if(local.begin(), local.end(),
                                   [&](const auto& c) { return close(p, c.first); });
            if (it == local.end()) {
                local.emplace_back(p, 1);
            } else {
                ++it->second;
            }
        }
        for (const auto& [p, mult] : local) {
            auto it = std::find_if(global.begin(), global.end(),
                                   [&](const auto& c) { return close(p, c.first); });
            if (it == global.end()) {
                global.emplace_back(p, mult);
            } else {
                it->second = std::max(it->second, mult);
            }
        }
    }
    Roots out;
    for (const auto& [p, mult] : global) {
        for (int k = 0; k < mult; ++k) {
            out.push_back(p);
            if (p.imag() > 0.0) {
                out.push_back(std::conj(p));
            }
        }
    }
    return normalize_roots(out, 1e-9);
}

bool is_hurwitz(const StateSpace& sys, double eps_stab) {
    for (const auto& ev : eigenvalues(sys.A())) {
        if (!(ev.real() < -eps_stab)) {
            return false;
        }
    }
    return true;
}

double response_distance(const TransferMatrix& G, const TransferMatrix& H,
                         const std::vector<double>& omegas) {
    check_same_dims(G, H, "response_distance");
    double num = 0.0, scale = 0.0;
    for (double w : omegas) {
        const Complex s(0.0, w);
        const CMatrix g = G.eval(s);
        num = std::max(num, (g - H.eval(s)).norm());
        scale = std::max(scale, g.norm());
    }
    return num / std::max(1.0, scale);
}

}  // namespace roadlearn::lti
