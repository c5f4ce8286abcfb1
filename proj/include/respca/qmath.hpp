#pragma once

// Dense complex linear algebra for Hermitian matrices of dimension <= 64:
// tensor products, Jacobi eigendecomposition, unitary exponentials, partial
// trace, fidelities, and operator distances. Eigen supplies storage and
// elementwise arithmetic; the numerical algorithms are implemented here.

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace respca::qmath {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr int kMaxDim = 64;

struct HermitianEig {
    Eigen::VectorXd eigenvalues;  // sorted ascending
    Matrix eigenvectors;          // orthonormal columns, same order
};

Matrix identity(int n);
Matrix pauli_x();
Matrix pauli_y();
Matrix pauli_z();

// Kronecker product with a's indices major.
Matrix tensor(const Matrix& a, const Matrix& b);

bool is_hermitian(const Matrix& m, double tol = 1e-10);

// Cyclic Jacobi eigendecomposition; rejects non-Hermitian input.
// Converges to off-diagonal mass <= 1e-13 * ||h||_F.
HermitianEig hermitian_eig(const Matrix& h);

// exp(-i h t) via eigendecomposition; h must be Hermitian.
Matrix unitary_of(const Matrix& h, double t);

// Trace out every subsystem not listed in `keep`. `dims` are the subsystem
// dimensions in tensor order (major first); their product must equal the
// matrix dimension. Surviving subsystems keep their relative order.
Matrix partial_trace(const Matrix& m, const std::vector<int>& dims,
                     const std::vector<int>& keep);

// <psi|rho|psi>; psi must be normalized within 1e-10.
double pure_state_fidelity(const Matrix& rho, const Vector& psi);

// Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 for mixed states.
double state_fidelity(const Matrix& rho, const Matrix& sigma);

// Spectral norm of (a - b).
double op_distance(const Matrix& a, const Matrix& b);

// (1/2) * trace norm of (a - b); both inputs Hermitian.
double trace_distance(const Matrix& a, const Matrix& b);

}  // namespace respca::qmath
