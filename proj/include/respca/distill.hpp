#pragma once

// Principal-component distillation by post-selection on the probe, with
// efficiency/fidelity metrics and probe-subspace population tables.

#include "respca/engine.hpp"

namespace respca::distill {

struct DistillReport {
    double omega_used = 0.0;
    double efficiency = 0.0;  // population(Pi1, lambda_target) / lambda_target
    double fidelity = 0.0;    // <lambda_target| post_state |lambda_target>
    double fidelity_sqrt = 0.0;  // sqrt convention, reported alongside
    double success_probability = 0.0;
    Eigen::MatrixXd populations;  // 2 x n: rows probe Pi0/Pi1, columns eigencomponents
    model::DensityMatrix post_state;  // register state given probe = |1>
    bool no_transfer = false;      // success below 1e-12; post_state undefined
    int target_index = -1;         // eigencomponent index (ascending order)
};

// Entry (k, i) = <k, lambda_i| s |k, lambda_i>, k = probe 0/1.
Eigen::MatrixXd eigenbasis_populations(const engine::SystemState& s,
                                       const qmath::HermitianEig& eig);

// Register state conditioned on probe = |1> plus that probability.
// Throws std::runtime_error when the probability is below 1e-12.
std::pair<model::DensityMatrix, double> post_select(const engine::SystemState& s);

// Runs the sequence from initial_state(rho) and post-selects. target_index < 0
// selects the largest eigenvalue.
DistillReport distill(const model::DensityMatrix& rho, double omega,
                      const model::DriveParams& p, const model::NoiseModel& noise,
                      const engine::EvolverKind& ev, uint64_t master_seed = 0,
                      int target_index = -1);

}  // namespace respca::distill
