#pragma once

// Time evolution: exact propagator, first-order Trotter circuit, the
// density-matrix-exponentiation (DME) realization of controlled e^{-i rho dt},
// native/echo pulse sequences, and quasi-static noise-ensemble averaging.

#include "respca/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace respca::engine {

struct SystemState {
    int dim = 0;  // 2n (probe x register)
    qmath::Matrix matrix;
};

struct EvolverKind {
    enum class Type { Exact, Trotter, Dme };
    Type type = Type::Exact;
    int steps = 1;  // N for trotter/dme

    static EvolverKind parse(const std::string& text);  // "exact" | "trotter:N" | "dme:N"
    std::string to_string() const;
    void validate() const;
};

enum class PulseAxis { X, Y };

struct SequenceOutcome {
    SystemState final_state;  // ensemble-averaged
    double success_probability = 0.0;
    std::vector<double> per_sample_success;  // filled for quadrature / small MC runs
};

// rho_ini = |0><0| x rho.
SystemState initial_state(const model::DensityMatrix& rho);

// U s U^dag with U = unitary_of(h, t).
SystemState evolve_exact(const SystemState& s, const qmath::Matrix& h, double t);

// N repetitions of [drive factor] then [controlled-exp(-i rho dt)], dt = tau/N.
// strang = true switches to the symmetric half-drive/full-ctrl/half-drive split
// (second-order; kept for error-scaling studies, not the default).
SystemState evolve_trotter(const SystemState& s, const model::DriveParams& p,
                           const model::DensityMatrix& rho, double delta_f,
                           bool strang = false);

// The N-step Trotter product as a matrix, for error-scaling studies against
// unitary_of(build_hamiltonian(...), tau).
qmath::Matrix trotter_propagator(const model::DriveParams& p,
                                 const model::DensityMatrix& rho, double delta_f,
                                 bool strang = false);

// One DME collision step: attach a fresh copy of rho, apply
// exp(-i (|1><1| x SWAP) dt), trace the copy out. O(dt^2) error per step.
SystemState dme_controlled_step(const SystemState& s,
                                const model::DensityMatrix& rho_copy, double dt);

// Tr[(|1><1| x I_n) s].
double success_probability(const SystemState& s);

// One (tau/2M - pi - tau/2M - pi)^M sequence (M = 0: free evolution for tau)
// at a single fixed detuning delta_f, no ensemble average. Exposed for tests
// and as the per-sample kernel of run_sequence.
SystemState apply_sequence_single(const model::DensityMatrix& rho,
                                  const model::DriveParams& p, double delta_f,
                                  const EvolverKind& ev,
                                  PulseAxis axis = PulseAxis::X);

// Precomputes the register eigenbasis once and evaluates sequences for many
// (omega, delta_f) cheaply. With the exact evolver the Hamiltonian is
// block-diagonal across eigencomponents of rho, so each noise sample reduces
// to independent 2x2 problems; `success` uses their closed form and `run`
// assembles the full averaged state. Trotter/DME fall back to dense matrices.
class SequenceRunner {
  public:
    SequenceRunner(const model::DensityMatrix& rho, const model::NoiseModel& noise,
                   const EvolverKind& ev, uint64_t master_seed,
                   PulseAxis axis = PulseAxis::X);

    // Ensemble-averaged success probability only (fast path).
    double success(const model::DriveParams& p) const;

    // Full outcome with the averaged state.
    SequenceOutcome run(const model::DriveParams& p) const;

    const std::vector<std::pair<double, double>>& samples() const {
        return samples_;  // (delta_f, weight), weights sum to 1
    }

  private:
    model::DensityMatrix rho_;
    qmath::HermitianEig eig_;
    model::NoiseModel noise_;
    EvolverKind ev_;
    PulseAxis axis_;
    std::vector<std::pair<double, double>> samples_;
};

// Convenience wrapper: one-shot run_sequence as in the module contract.
SequenceOutcome run_sequence(const model::DensityMatrix& rho,
                             const model::DriveParams& p,
                             const model::NoiseModel& noise, const EvolverKind& ev,
                             uint64_t master_seed = 0,
                             PulseAxis axis = PulseAxis::X);

// Closed-form probe-flip probability of one eigencomponent under the M-order
// sequence at detuning Delta = omega + delta_f - lambda_i (exact for the
// quasi-static model; cross-checked against matrix products in tests).
double sequence_flip_probability(double detuning, double c, double tau, int echo_order);

// Gauss-Hermite nodes/weights for E[f(delta)], delta ~ N(0, sigma^2):
// E[f] ~= sum_k w_k f(x_k * sqrt(2) * sigma), weights normalized to sum 1.
void gauss_hermite(int order, std::vector<double>& nodes, std::vector<double>& weights);

// Deterministic per-index standard normal draw (splitmix64 + Box-Muller).
double seeded_normal(uint64_t master_seed, uint64_t index);

// Deterministic binomial sample mean of `shots` Bernoulli(p) draws.
double binomial_sample_mean(double p, long shots, uint64_t master_seed, uint64_t index);

}  // namespace respca::engine
