#include "respca/distill.hpp"

#include <cmath>
#include <stdexcept>

namespace respca::distill {

using qmath::Complex;
using qmath::Matrix;
using qmath::Vector;

Eigen::MatrixXd eigenbasis_populations(const engine::SystemState& s,
                                       const qmath::HermitianEig& eig) {
    const int n = static_cast<int>(eig.eigenvalues.size());
    if (s.dim != 2 * n)
        throw std::invalid_argument("eigenbasis_populations: eigenbasis does not match state");
    Eigen::MatrixXd table(2, n);
    for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < n; ++i) {
            Vector basis = Vector::Zero(2 * n);
            basis.segment(k * n, n) = eig.eigenvectors.col(i);
            const Complex val = basis.adjoint() * s.matrix * basis;
            table(k, i) = val.real();
        }
    }
    return table;
}

std::pair<model::DensityMatrix, double> post_select(const engine::SystemState& s) {
    const int n = s.dim / 2;
    const Matrix block = s.matrix.block(n, n, n, n);
    const double prob = block.trace().real();
    if (prob < 1e-12)
        throw std::runtime_error("post_select: probe |1> probability below 1e-12");
    return {model::DensityMatrix::validated(block / prob), prob};
}

DistillReport distill(const model::DensityMatrix& rho, double omega,
                      const model::DriveParams& p, const model::NoiseModel& noise,
                      const engine::EvolverKind& ev, uint64_t master_seed,
                      int target_index) {
    const qmath::HermitianEig eig = qmath::hermitian_eig(rho.matrix);
    const int n = rho.dim;
    if (target_index >= n)
        throw std::invalid_argument("distill: target index out of range");
    if (target_index < 0) target_index = n - 1;  // eigenvalues sorted ascending

    model::DriveParams q = p;
    q.omega = omega;
    const engine::SequenceOutcome outcome =
        engine::run_sequence(rho, q, noise, ev, master_seed);

    DistillReport rep;
    rep.omega_used = omega;
    rep.target_index = target_index;
    rep.success_probability = outcome.success_probability;
    rep.populations = eigenbasis_populations(outcome.final_state, eig);

    if (outcome.success_probability < 1e-12) {
        rep.no_transfer = true;
        return rep;
    }

    auto [post, prob] = post_select(outcome.final_state);
    rep.post_state = post;
    rep.success_probability = prob;

    const double lam = eig.eigenvalues(target_index);
    rep.efficiency = lam > 0 ? rep.populations(1, target_index) / lam : 0.0;
    rep.fidelity =
        qmath::pure_state_fidelity(post.matrix, eig.eigenvectors.col(target_index));
    rep.fidelity_sqrt = std::sqrt(rep.fidelity);
    return rep;
}

}  // namespace respca::distill
