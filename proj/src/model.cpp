#include "respca/model.hpp"

#include <cmath>
#include <stdexcept>

namespace respca::model {

using qmath::Complex;
using qmath::Matrix;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

DensityMatrix DensityMatrix::validated(const Matrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("density matrix not square");
    if (m.rows() > qmath::kMaxDim)
        throw std::invalid_argument("density matrix dimension exceeds 64");
    if (!qmath::is_hermitian(m, 1e-10))
        throw std::invalid_argument("density matrix not Hermitian within 1e-10");
    if (std::abs(m.trace().real() - 1.0) > 1e-10 || std::abs(m.trace().imag()) > 1e-10)
        throw std::invalid_argument("density matrix trace differs from 1 beyond 1e-10");
    const auto eig = qmath::hermitian_eig(m);
    if (eig.eigenvalues(0) < -1e-10)
        throw std::invalid_argument("density matrix has a negative eigenvalue beyond 1e-10");
    DensityMatrix dm;
    dm.dim = static_cast<int>(m.rows());
    dm.matrix = (m + m.adjoint()) / 2.0;
    return dm;
}

double DriveParams::tau_or_default() const {
    if (tau) return *tau;
    return kPi / (2.0 * c);  // half Rabi period of the resonant two-level flip
}

void DriveParams::validate() const {
    if (!(c > 0)) throw std::invalid_argument("drive coupling c must be positive");
    if (tau && !(*tau > 0)) throw std::invalid_argument("drive duration must be positive");
    if (echo_order < 0) throw std::invalid_argument("echo order must be >= 0");
    if (trotter_steps < 1) throw std::invalid_argument("trotter step count must be >= 1");
}

void NoiseModel::validate() const {
    if (sigma_delta < 0) throw std::invalid_argument("sigma_delta must be >= 0");
    if (std::holds_alternative<GaussHermiteAveraging>(averaging)) {
        const auto& gh = std::get<GaussHermiteAveraging>(averaging);
        if (gh.order < 1 || gh.order > 200)
            throw std::invalid_argument("Gauss-Hermite order out of range [1, 200]");
    } else {
        const auto& mc = std::get<MonteCarloAveraging>(averaging);
        if (mc.samples < 1) throw std::invalid_argument("Monte Carlo sample count must be >= 1");
    }
    if (shots && *shots < 1) throw std::invalid_argument("shot count must be >= 1");
}

DensityMatrix paper_density_matrix() {
    const Matrix i2 = qmath::identity(2);
    const Matrix sx = qmath::pauli_x();
    const Matrix sz = qmath::pauli_z();
    Matrix m = 0.15 * qmath::tensor(sz, i2) + 0.09 * qmath::tensor(sx, i2) -
               0.03 * qmath::tensor(i2, sz) + qmath::identity(4) / 4.0;
    return DensityMatrix::validated(m);
}

Matrix build_hamiltonian(const DriveParams& p, const DensityMatrix& rho, double delta_f) {
    p.validate();
    const int n = rho.dim;
    const Matrix in = qmath::identity(n);
    Matrix proj1 = Matrix::Zero(2, 2);
    proj1(1, 1) = 1.0;
    return ((p.omega + delta_f) / 2.0) * qmath::tensor(qmath::pauli_z(), in) +
           p.c * qmath::tensor(qmath::pauli_x(), in) +
           qmath::tensor(proj1, rho.matrix);
}

double analytic_transition_probability(double lambda_i, double weight, double omega,
                                       double c, double tau) {
    const double delta = omega - lambda_i;
    const double rabi = std::sqrt(delta * delta + 4.0 * c * c);
    if (rabi == 0.0) return 0.0;  // no drive, no detuning: nothing moves
    const double s = (2.0 * c / rabi) * std::sin(rabi * tau / 2.0);
    return weight * s * s;
}

}  // namespace respca::model
