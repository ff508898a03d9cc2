#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace roadlearn::lti {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Roots = std::vector<Complex>;

// Base class for numerical failures in the LTI layer.
class LtiError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Determinant of a transfer matrix is numerically zero at some grid frequency.
class SingularityError : public LtiError {
public:
    SingularityError(const std::string& what, double omega) : LtiError(what), omega(omega) {}
    double omega;
};

// A frequency response exceeds the amplification guard.
class ConditioningError : public LtiError {
public:
    ConditioningError(const std::string& what, double omega) : LtiError(what), omega(omega) {}
    double omega;
};

class DivergenceError : public LtiError {
public:
    using LtiError::LtiError;
};

// Eigen-structure could not be resolved to the required accuracy.
class DiagnosticsError : public LtiError {
public:
    using LtiError::LtiError;
};

class StateSpace {
public:
    StateSpace() = default;
    StateSpace(Matrix A, Matrix B, Matrix C, Matrix D);

    // Pure feedthrough system with no states.
    static StateSpace gain(const Matrix& D);

    const Matrix& A() const { return A_; }
    const Matrix& B() const { return B_; }
    const Matrix& C() const { return C_; }
    const Matrix& D() const { return D_; }

    int n() const { return static_cast<int>(A_.rows()); }
    int m() const { return static_cast<int>(D_.cols()); }
    int p() const { return static_cast<int>(D_.rows()); }

    // C (sI - A)^{-1} B + D
    CMatrix eval(Complex s) const;

private:
    Matrix A_, B_, C_, D_;
};

// Real-coefficient rational function gain * prod(s - z) / prod(s - p).
struct RationalEntry {
    Roots zeros;
    Roots poles;
    double gain = 0.0;

    RationalEntry() = default;
    RationalEntry(Roots zeros, Roots poles, double gain);

    static RationalEntry constant(double k) { return RationalEntry({}, {}, k); }

    bool is_zero() const { return gain == 0.0; }
    bool is_proper() const { return is_zero() || zeros.size() <= poles.size(); }
    bool is_biproper() const { return !is_zero() && zeros.size() == poles.size(); }
    bool is_stable(double margin = 0.0) const;

    Complex eval(Complex s) const;
    // Limit as |s| -> infinity; throws for improper entries.
    double at_infinity() const;

    // Cancels zero/pole pairs closer than tol * max(1, |p|).
    RationalEntry simplified(double tol = 1e-7) const;
};

class TransferMatrix {
public:
    TransferMatrix() = default;
    TransferMatrix(int rows, int cols);
    TransferMatrix(int rows, int cols, std::vector<RationalEntry> entries);

    static TransferMatrix identity(int n);
    static TransferMatrix constant(const Matrix& K);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool is_square() const { return rows_ == cols_; }

    const RationalEntry& operator()(int i, int j) const { return entries_[index(i, j)]; }
    RationalEntry& operator()(int i, int j) { return entries_[index(i, j)]; }
    const std::vector<RationalEntry>& entries() const { return entries_; }

    CMatrix eval(Complex s) const;
    Matrix at_infinity() const;

    bool is_proper() const;
    bool is_biproper() const;
    bool is_stable(double margin = 0.0) const;
    bool is_diagonal() const;

    TransferMatrix operator-() const;
    TransferMatrix scaled(double k) const;
    TransferMatrix simplified(double tol = 1e-7) const;

private:
    std::size_t index(int i, int j) const;

    int rows_ = 0;
    int cols_ = 0;
    std::vector<RationalEntry> entries_;
};

// Uniformly sampled multi-channel series; data is channels x N.
class Signal {
public:
    Signal() = default;
    Signal(Matrix data, double dt, double t0 = 0.0);

    static Signal zeros(int channels, int samples, double dt, double t0 = 0.0);

    const Matrix& data() const { return data_; }
    Matrix& data() { return data_; }
    int channels() const { return static_cast<int>(data_.rows()); }
    int samples() const { return static_cast<int>(data_.cols()); }
    double dt() const { return dt_; }
    double t0() const { return t0_; }
    double time(int k) const { return t0_ + dt_ * k; }

    bool composable_with(const Signal& other) const;

    Signal operator+(const Signal& other) const;
    Signal operator-(const Signal& other) const;
    Signal scaled(double k) const;

    // Samples with time >= t_from (used to discard transients).
    Signal tail_from(double t_from) const;

private:
    Matrix data_;
    double dt_ = 1.0;
    double t0_ = 0.0;
};

// Frobenius-norm L2 distance ||a - b|| / ||b||, or ||a|| when b is zero.
double relative_l2(const Signal& a, const Signal& b);

struct FrequencyResponse {
    std::vector<double> omegas;
    std::vector<CMatrix> values;
};

std::vector<double> log_grid(double lo, double hi, int count);
// 512 log-spaced points in [1e-2, 1e3] rad/s.
const std::vector<double>& analysis_grid();

FrequencyResponse frequency_response(const TransferMatrix& G, const std::vector<double>& omegas);
FrequencyResponse frequency_response(const StateSpace& sys, const std::vector<double>& omegas);

// Sorts roots, snaps near-real values to the real axis and makes complex
// pairs exact conjugates. Throws std::invalid_argument when a complex root has
// no conjugate partner.
Roots normalize_roots(Roots roots, double tol = 1e-9);

}  // namespace roadlearn::lti
