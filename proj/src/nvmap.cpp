#include "respca/nvmap.hpp"

#include <cmath>
#include <stdexcept>

namespace respca::nvmap {

using qmath::Complex;
using qmath::Matrix;

void LaserParams::validate() const {
    if (!(t2_laser > 0) || !(t1_laser > 0) || !(duration >= 0))
        throw std::invalid_argument("laser times must be positive (duration >= 0)");
    if (t2_laser > 2 * t1_laser)
        throw std::invalid_argument(
            "laser T2 must not exceed 2 T1, otherwise the channel is not CP");
}

double NvParams::alpha() const { return a_par_c * std::cos(theta_prime); }
double NvParams::beta() const { return a_par_c * std::sin(theta_prime); }

void NvParams::validate() const {
    if (!(f_map > 0)) throw std::invalid_argument("f_map must be positive");
    if (!(t2e_star > 0)) throw std::invalid_argument("t2e_star must be positive");
    if (!(calibration >= 0)) throw std::invalid_argument("calibration must be >= 0");
    laser.validate();
}

PhysicalDrive to_physical(double omega, double c, const NvParams& nv) {
    PhysicalDrive d;
    d.delta = nv.f_map * (omega - 0.25);
    d.omega_mw = 2.0 * nv.f_map * c;
    return d;
}

std::pair<double, double> from_physical(const PhysicalDrive& d, const NvParams& nv) {
    return {d.delta / nv.f_map + 0.25, d.omega_mw / (2.0 * nv.f_map)};
}

double effective_omega(double omega, double delta_b, const NvParams& nv) {
    return omega - nv.gamma_e * delta_b / nv.f_map;
}

double resolution_bound(const NvParams& nv) {
    return std::sqrt(std::log(2.0)) / (kPi * nv.t2e_star * nv.f_map);
}

double calibrated_sigma_delta(const NvParams& nv, double calibration) {
    return calibration * std::sqrt(2.0) / (nv.t2e_star * nv.f_map);
}

double calibrated_sigma_delta(const NvParams& nv) {
    return calibrated_sigma_delta(nv, nv.calibration);
}

std::array<Matrix, 4> laser_kraus(const LaserParams& laser, double t) {
    laser.validate();
    if (t < 0) throw std::invalid_argument("laser_kraus: negative duration");
    const double eta = 1.0 - std::exp(-t / laser.t1_laser);  // |1> -> |0> damping
    // Extra dephasing beyond what damping already causes, so the total
    // coherence decay is exactly exp(-t/T2L).
    const double d = std::exp(-t / laser.t2_laser) / std::exp(-t / (2.0 * laser.t1_laser));

    Matrix a0(2, 2), a1(2, 2);
    a0 << 1, 0, 0, std::sqrt(1.0 - eta);
    a1 << 0, std::sqrt(eta), 0, 0;
    Matrix d0 = std::sqrt((1.0 + d) / 2.0) * qmath::identity(2);
    Matrix d1 = std::sqrt((1.0 - d) / 2.0) * qmath::pauli_z();
    return {d0 * a0, d0 * a1, d1 * a0, d1 * a1};
}

Matrix apply_laser_channel(const Matrix& state, const LaserParams& laser, double t) {
    const auto kraus = laser_kraus(laser, t);
    if (state.rows() == 2) {
        Matrix out = Matrix::Zero(2, 2);
        for (const Matrix& k : kraus) out += k * state * k.adjoint();
        return out;
    }
    if (state.rows() == 4) {
        Matrix out = Matrix::Zero(4, 4);
        const Matrix i2 = qmath::identity(2);
        for (const Matrix& k : kraus) {
            const Matrix kk = qmath::tensor(i2, k);
            out += kk * state * kk.adjoint();
        }
        return out;
    }
    throw std::invalid_argument("apply_laser_channel: state must be 2x2 or 4x4");
}

namespace {

Matrix rotation_y(double theta) {
    Matrix r(2, 2);
    r << std::cos(theta / 2.0), -std::sin(theta / 2.0), std::sin(theta / 2.0),
        std::cos(theta / 2.0);
    return r;
}

}  // namespace

PreparationResult simulate_preparation(double theta1, double theta2,
                                       const LaserParams& laser) {
    laser.validate();
    PreparationResult res;

    Matrix rho0 = Matrix::Zero(4, 4);  // carbon-major basis |C N>
    rho0(0, 0) = 0.85;
    rho0(2, 2) = 0.15;
    res.initial = model::DensityMatrix::validated(rho0);

    // R_Y(theta1) on N everywhere, plus R_Y(theta2) on N when C is |0>.
    const Matrix r1 = qmath::tensor(qmath::identity(2), rotation_y(theta1));
    Matrix ctrl = Matrix::Zero(4, 4);
    ctrl.block(0, 0, 2, 2) = rotation_y(theta2);
    ctrl.block(2, 2, 2, 2) = qmath::identity(2);
    const Matrix u = ctrl * r1;
    res.after_rotations = model::DensityMatrix::validated(u * rho0 * u.adjoint());

    res.after_laser = model::DensityMatrix::validated(
        apply_laser_channel(res.after_rotations.matrix, laser, laser.duration));
    for (int i = 0; i < 4; ++i)
        res.post_laser_diagonal[i] = res.after_laser.matrix(i, i).real();

    const Matrix u2 = qmath::tensor(rotation_y(kPi / 6.0), rotation_y(kPi));
    res.final_state = model::DensityMatrix::validated(
        u2 * res.after_laser.matrix * u2.adjoint());

    const model::DensityMatrix target = model::paper_density_matrix();
    res.fidelity_to_target =
        qmath::state_fidelity(res.final_state.matrix, target.matrix);
    res.fidelity_sqrt = std::sqrt(res.fidelity_to_target);
    return res;
}

}  // namespace respca::nvmap
