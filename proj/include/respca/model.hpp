#pragma once

// Problem-domain types: density matrices, drive parameters, noise models,
// the closed-form Rabi transition probability, and the canonical 4x4 test
// matrix. Conventions: the probe qubit is the major tensor factor and |0>
// is the +1 eigenstate of sigma_z, so resonance occurs at omega ~ lambda_i
// with the Hamiltonian exactly as written below.

#include "respca/qmath.hpp"

#include <cstdint>
#include <optional>
#include <variant>

namespace respca::model {

struct DensityMatrix {
    int dim = 0;
    qmath::Matrix matrix;

    // Validates Hermiticity (1e-10), unit trace (1e-10), and positivity
    // (smallest eigenvalue >= -1e-10); throws std::invalid_argument otherwise.
    static DensityMatrix validated(const qmath::Matrix& m);
};

struct DriveParams {
    double omega = 0.0;   // dimensionless scan frequency
    double c = 6e-4;      // dimensionless drive strength, > 0
    std::optional<double> tau;  // evolution time; default pi/(2c)
    int echo_order = 0;   // M: number of (tau/2M - pi - tau/2M - pi) cycles
    int trotter_steps = 1;  // N for the trotter/dme evolvers; dt = tau/N

    double tau_or_default() const;
    void validate() const;  // c > 0, tau > 0, M >= 0, N >= 1
};

struct GaussHermiteAveraging {
    int order = 31;
};

struct MonteCarloAveraging {
    long samples = 100000;
};

struct NoiseModel {
    double sigma_delta = 0.0;  // std of the quasi-static probe detuning
    std::variant<GaussHermiteAveraging, MonteCarloAveraging> averaging =
        GaussHermiteAveraging{};
    std::optional<long> shots;  // binomial readout sampling; absent = exact

    void validate() const;
    bool is_monte_carlo() const {
        return std::holds_alternative<MonteCarloAveraging>(averaging);
    }
};

// rho = 0.15 sz(1) + 0.09 sx(1) - 0.03 sz(2) + I4/4 in basis |00>,|01>,|10>,|11>.
DensityMatrix paper_density_matrix();

// H = ((omega+delta_f)/2) sz x I_n + c sx x I_n + |1><1| x rho.
qmath::Matrix build_hamiltonian(const DriveParams& p, const DensityMatrix& rho,
                                double delta_f);

// P_i(omega) = weight * D^2 * sin^2(c tau / D), D = sqrt((2c)^2/((2c)^2+(omega-lambda_i)^2)).
// `weight` generalizes the lambda_i prefactor to non-rho register inputs.
double analytic_transition_probability(double lambda_i, double weight,
                                       double omega, double c, double tau);

}  // namespace respca::model
