#pragma once

// Mapping between dimensionless algorithm parameters and NV-center physical
// parameters, the field-drift error model, the dephasing-limited resolution
// bound, and the laser-assisted state-preparation channel. All physical
// quantities are stored in SI with frequencies as angular frequencies; the
// config layer converts from MHz/us/G once at the boundary.

#include "respca/model.hpp"

#include <array>

namespace respca::nvmap {

inline constexpr double kPi = 3.14159265358979323846;

struct LaserParams {
    double t2_laser = 0.6e-6;   // laser-induced nitrogen dephasing time, s
    double t1_laser = 2.1e-6;   // repolarization time, s
    double duration = 1.4e-6;   // pulse length, s
    void validate() const;      // all positive
};

struct NvParams {
    double f_map = 2 * kPi * 36.25e6;      // mapping factor, rad/s
    double gamma_e = 2 * kPi * 2.8e6;      // electron gyromagnetic ratio, rad/s/G
    double t2e_star = 5.8e-6;              // probe dephasing time, s
    double a_par_c = 2 * kPi * 12.8e6;     // hyperfine coupling, rad/s
    double a_par_n = -2 * kPi * 2.16e6;    // hyperfine coupling, rad/s
    double theta_prime = 0.0;              // register-frame rotation angle
    // sigma_delta multiplier; the default is fixed by matching the simulated
    // small-c native FWHM floor 2*sqrt(2 ln2)*sigma to resolution_bound, which
    // gives exactly 1/(4 pi).
    double calibration = 1.0 / (4 * kPi);
    LaserParams laser;

    double alpha() const;  // A_par_C * cos(theta_prime)
    double beta() const;   // A_par_C * sin(theta_prime)
    void validate() const;
};

struct PhysicalDrive {
    double delta = 0.0;     // microwave detuning, rad/s
    double omega_mw = 0.0;  // drive amplitude, rad/s, >= 0
};

// delta = f_map (omega - 1/4), Omega_MW = 2 f_map c.
PhysicalDrive to_physical(double omega, double c, const NvParams& nv);

// Inverse of to_physical (round-trip identity).
std::pair<double, double> from_physical(const PhysicalDrive& d, const NvParams& nv);

// omega_eff = omega - gamma_e * delta_b / f_map (delta_b in field units, signed).
double effective_omega(double omega, double delta_b, const NvParams& nv);

// Gamma_2* = sqrt(ln 2) / (pi * T2e* * f_map), dimensionless.
double resolution_bound(const NvParams& nv);

// sigma_delta = calibration * sqrt(2) / (T2e* * f_map), dimensionless.
double calibrated_sigma_delta(const NvParams& nv, double calibration);
double calibrated_sigma_delta(const NvParams& nv);  // nv.calibration

// CPTP laser channel on one nitrogen qubit for time t: coherences decay by
// exp(-t/T2L) while the |1> population damps toward |0> as exp(-t/T1L).
// Returns the 2x2 Kraus operators (amplitude damping composed with dephasing).
std::array<qmath::Matrix, 4> laser_kraus(const LaserParams& laser, double t);

// Applies the laser channel to the nitrogen factor of a (carbon x nitrogen)
// 4x4 state, or directly to a 2x2 nitrogen state.
qmath::Matrix apply_laser_channel(const qmath::Matrix& state, const LaserParams& laser,
                                  double t);

struct PreparationResult {
    model::DensityMatrix initial;          // diag(0.85,0.15)_C x |0><0|_N
    model::DensityMatrix after_rotations;  // R_Y(theta1)_N and C-controlled R_Y(theta2)_N
    model::DensityMatrix after_laser;
    model::DensityMatrix final_state;      // after R_Y(pi/6)_C and R_Y(pi)_N
    std::array<double, 4> post_laser_diagonal{};
    double fidelity_to_target = 0.0;       // Uhlmann fidelity vs paper_density_matrix
    double fidelity_sqrt = 0.0;
};

PreparationResult simulate_preparation(double theta1, double theta2,
                                       const LaserParams& laser);

}  // namespace respca::nvmap
