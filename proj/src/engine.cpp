#include "respca/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace respca::engine {

using qmath::Complex;
using qmath::Matrix;

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit_open(uint64_t bits) {  // uniform on (0,1)
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// exp(-i ((det/2) sz + c sx) t), closed form on the Bloch sphere.
Eigen::Matrix2cd free_segment(double det, double c, double t) {
    const double half_rabi = std::sqrt(det * det / 4.0 + c * c);
    Eigen::Matrix2cd u;
    if (half_rabi == 0.0) {
        u.setIdentity();
        return u;
    }
    const double a = half_rabi * t;
    const double co = std::cos(a);
    const double si = std::sin(a);
    const double nz = det / (2.0 * half_rabi);
    const double nx = c / half_rabi;
    u(0, 0) = Complex(co, -si * nz);
    u(1, 1) = Complex(co, si * nz);
    u(0, 1) = Complex(0, -si * nx);
    u(1, 0) = Complex(0, -si * nx);
    return u;
}

Eigen::Matrix2cd pulse_matrix(PulseAxis axis) {
    Eigen::Matrix2cd u;
    if (axis == PulseAxis::X) {
        u << 0, Complex(0, -1), Complex(0, -1), 0;  // exp(-i pi sx / 2)
    } else {
        u << 0, -1, 1, 0;  // exp(-i pi sy / 2)
    }
    return u;
}

// Full probe-block sequence propagator at fixed detuning (2x2, exact).
Eigen::Matrix2cd block_sequence_unitary(double det, double c, double tau,
                                        int echo_order, PulseAxis axis) {
    if (echo_order == 0) return free_segment(det, c, tau);
    const Eigen::Matrix2cd f = free_segment(det, c, tau / (2.0 * echo_order));
    const Eigen::Matrix2cd x = pulse_matrix(axis);
    // time order free-pulse-free-pulse; rightmost factor acts first
    const Eigen::Matrix2cd cyc = x * f * x * f;
    Eigen::Matrix2cd u = Eigen::Matrix2cd::Identity();
    for (int m = 0; m < echo_order; ++m) u = cyc * u;
    return u;
}

}  // namespace

EvolverKind EvolverKind::parse(const std::string& text) {
    EvolverKind ev;
    if (text == "exact") {
        ev.type = Type::Exact;
        ev.steps = 1;
        return ev;
    }
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if (head == "trotter")
        ev.type = Type::Trotter;
    else if (head == "dme")
        ev.type = Type::Dme;
    else
        throw std::invalid_argument("unknown evolver '" + text +
                                    "' (expected exact, trotter:N, or dme:N)");
    if (colon == std::string::npos)
        throw std::invalid_argument("evolver '" + head + "' needs a step count, e.g. " +
                                    head + ":64");
    try {
        size_t used = 0;
        ev.steps = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw std::invalid_argument("bad step count in evolver '" + text + "'");
    }
    ev.validate();
    return ev;
}

std::string EvolverKind::to_string() const {
    switch (type) {
        case Type::Exact:
            return "exact";
        case Type::Trotter:
            return "trotter:" + std::to_string(steps);
        case Type::Dme:
            return "dme:" + std::to_string(steps);
    }
    return "exact";
}

void EvolverKind::validate() const {
    if (type != Type::Exact && steps < 1)
        throw std::invalid_argument("evolver step count must be >= 1");
}

SystemState initial_state(const model::DensityMatrix& rho) {
    Matrix probe = Matrix::Zero(2, 2);
    probe(0, 0) = 1.0;
    SystemState s;
    s.dim = 2 * rho.dim;
    s.matrix = qmath::tensor(probe, rho.matrix);
    return s;
}

SystemState evolve_exact(const SystemState& s, const Matrix& h, double t) {
    if (h.rows() != s.dim) throw std::invalid_argument("evolve_exact: dimension mismatch");
    const Matrix u = qmath::unitary_of(h, t);
    SystemState out;
    out.dim = s.dim;
    out.matrix = u * s.matrix * u.adjoint();
    return out;
}

namespace {

// One first-order step: controlled-exp(-i rho dt) after the probe drive factor.
struct TrotterFactors {
    Matrix drive;      // exp(-i h_probe dt) x I_n
    Matrix ctrl;       // P0 x I_n + P1 x exp(-i rho dt)
    Matrix drive_half; // exp(-i h_probe dt/2) x I_n, for the Strang variant
};

TrotterFactors trotter_factors(const model::DriveParams& p,
                               const model::DensityMatrix& rho, double delta_f,
                               double dt) {
    const int n = rho.dim;
    Matrix h_probe = ((p.omega + delta_f) / 2.0) * qmath::pauli_z() + p.c * qmath::pauli_x();
    TrotterFactors f;
    f.drive = qmath::tensor(qmath::unitary_of(h_probe, dt), qmath::identity(n));
    f.drive_half = qmath::tensor(qmath::unitary_of(h_probe, dt / 2.0), qmath::identity(n));
    Matrix ctrl = Matrix::Zero(2 * n, 2 * n);
    ctrl.block(0, 0, n, n) = qmath::identity(n);
    ctrl.block(n, n, n, n) = qmath::unitary_of(rho.matrix, dt);
    f.ctrl = ctrl;
    return f;
}

}  // namespace

Matrix trotter_propagator(const model::DriveParams& p, const model::DensityMatrix& rho,
                          double delta_f, bool strang) {
    p.validate();
    const int n_steps = p.trotter_steps;
    const double dt = p.tau_or_default() / n_steps;
    const TrotterFactors f = trotter_factors(p, rho, delta_f, dt);
    const Matrix step = strang ? Matrix(f.drive_half * f.ctrl * f.drive_half)
                               : Matrix(f.ctrl * f.drive);
    Matrix u = Matrix::Identity(2 * rho.dim, 2 * rho.dim);
    for (int k = 0; k < n_steps; ++k) u = step * u;
    return u;
}

SystemState evolve_trotter(const SystemState& s, const model::DriveParams& p,
                           const model::DensityMatrix& rho, double delta_f,
                           bool strang) {
    if (s.dim != 2 * rho.dim) throw std::invalid_argument("evolve_trotter: dimension mismatch");
    const Matrix u = trotter_propagator(p, rho, delta_f, strang);
    SystemState out;
    out.dim = s.dim;
    out.matrix = u * s.matrix * u.adjoint();
    return out;
}

SystemState dme_controlled_step(const SystemState& s,
                                const model::DensityMatrix& rho_copy, double dt) {
    const int n = rho_copy.dim;
    if (s.dim != 2 * n)
        throw std::invalid_argument("dme_controlled_step: copy dimension does not match register");
    if (2L * n * n > qmath::kMaxDim)
        throw std::invalid_argument("dme_controlled_step: joint dimension exceeds 64");

    // Joint state on probe x register x copy.
    Matrix joint = qmath::tensor(s.matrix, rho_copy.matrix);

    // SWAP between register and copy.
    Matrix swap = Matrix::Zero(n * n, n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) swap(a * n + b, b * n + a) = 1.0;

    // exp(-i (P1 x S) dt) = P0 x I + P1 x (cos dt I - i sin dt S), since S^2 = I.
    Matrix u = Matrix::Zero(2 * n * n, 2 * n * n);
    u.block(0, 0, n * n, n * n) = Matrix::Identity(n * n, n * n);
    u.block(n * n, n * n, n * n, n * n) =
        std::cos(dt) * Matrix::Identity(n * n, n * n) - Complex(0, std::sin(dt)) * swap;

    joint = u * joint * u.adjoint();
    SystemState out;
    out.dim = s.dim;
    out.matrix = qmath::partial_trace(joint, {2, n, n}, {0, 1});
    return out;
}

double success_probability(const SystemState& s) {
    const int n = s.dim / 2;
    const double p = s.matrix.block(n, n, n, n).trace().real();
    return std::clamp(p, 0.0, 1.0);
}

SystemState apply_sequence_single(const model::DensityMatrix& rho,
                                  const model::DriveParams& p, double delta_f,
                                  const EvolverKind& ev, PulseAxis axis) {
    p.validate();
    ev.validate();
    const double tau = p.tau_or_default();
    const int seq_m = p.echo_order;
    const int n = rho.dim;

    model::DriveParams pl = p;  // the evolver kind owns the step count when set
    if (ev.type != EvolverKind::Type::Exact) pl.trotter_steps = ev.steps;

    // Segment evolver at fixed delta_f. Total step budget N refers to the full
    // duration tau; a segment of length t_seg gets round(t_seg/dt) >= 1 steps.
    const double dt_budget = tau / pl.trotter_steps;
    auto evolve_segment = [&](const SystemState& st, double t_seg) -> SystemState {
        if (t_seg <= 0) return st;
        switch (ev.type) {
            case EvolverKind::Type::Exact: {
                const Matrix h = model::build_hamiltonian(pl, rho, delta_f);
                return evolve_exact(st, h, t_seg);
            }
            case EvolverKind::Type::Trotter: {
                model::DriveParams seg = pl;
                seg.tau = t_seg;
                seg.trotter_steps =
                    std::max(1, static_cast<int>(std::llround(t_seg / dt_budget)));
                return evolve_trotter(st, seg, rho, delta_f);
            }
            case EvolverKind::Type::Dme: {
                const int k = std::max(1, static_cast<int>(std::llround(t_seg / dt_budget)));
                const double dt = t_seg / k;
                const Matrix h_probe = ((pl.omega + delta_f) / 2.0) * qmath::pauli_z() +
                                       pl.c * qmath::pauli_x();
                const Matrix drive =
                    qmath::tensor(qmath::unitary_of(h_probe, dt), qmath::identity(n));
                SystemState cur = st;
                for (int j = 0; j < k; ++j) {
                    cur.matrix = drive * cur.matrix * drive.adjoint();
                    cur = dme_controlled_step(cur, rho, dt);
                }
                return cur;
            }
        }
        return st;
    };

    SystemState s = initial_state(rho);
    if (seq_m == 0) return evolve_segment(s, tau);

    const Matrix pulse = qmath::tensor(Matrix(pulse_matrix(axis)), qmath::identity(n));
    const double seg = tau / (2.0 * seq_m);
    for (int m = 0; m < seq_m; ++m) {
        s = evolve_segment(s, seg);
        s.matrix = pulse * s.matrix * pulse.adjoint();
        s = evolve_segment(s, seg);
        s.matrix = pulse * s.matrix * pulse.adjoint();
    }
    return s;
}

SequenceRunner::SequenceRunner(const model::DensityMatrix& rho,
                               const model::NoiseModel& noise, const EvolverKind& ev,
                               uint64_t master_seed, PulseAxis axis)
    : rho_(rho), eig_(qmath::hermitian_eig(rho.matrix)), noise_(noise), ev_(ev), axis_(axis) {
    noise_.validate();
    ev_.validate();
    if (noise_.sigma_delta == 0.0) {
        samples_ = {{0.0, 1.0}};
    } else if (!noise_.is_monte_carlo()) {
        const auto& gh = std::get<model::GaussHermiteAveraging>(noise_.averaging);
        std::vector<double> x, w;
        gauss_hermite(gh.order, x, w);
        samples_.reserve(x.size());
        const double scale = std::sqrt(2.0) * noise_.sigma_delta;
        for (size_t k = 0; k < x.size(); ++k) samples_.emplace_back(x[k] * scale, w[k]);
    } else {
        const auto& mc = std::get<model::MonteCarloAveraging>(noise_.averaging);
        samples_.reserve(mc.samples);
        const double inv = 1.0 / static_cast<double>(mc.samples);
        for (long j = 0; j < mc.samples; ++j)
            samples_.emplace_back(noise_.sigma_delta * seeded_normal(master_seed, j), inv);
    }
}

double SequenceRunner::success(const model::DriveParams& p) const {
    p.validate();
    if (ev_.type != EvolverKind::Type::Exact) return run(p).success_probability;

    const double tau = p.tau_or_default();
    const int n = rho_.dim;
    const bool closed_form = (axis_ == PulseAxis::X) || p.echo_order == 0;
    double acc = 0.0;
    for (const auto& [delta, w] : samples_) {
        double ps = 0.0;
        for (int i = 0; i < n; ++i) {
            const double lam = std::max(0.0, eig_.eigenvalues(i));
            if (lam == 0.0) continue;
            const double det = p.omega + delta - eig_.eigenvalues(i);
            if (closed_form) {
                ps += lam * sequence_flip_probability(det, p.c, tau, p.echo_order);
            } else {
                const Eigen::Matrix2cd u =
                    block_sequence_unitary(det, p.c, tau, p.echo_order, axis_);
                ps += lam * std::norm(u(1, 0));
            }
        }
        acc += w * ps;
    }
    return acc;
}

SequenceOutcome SequenceRunner::run(const model::DriveParams& p) const {
    p.validate();
    const double tau = p.tau_or_default();
    const int n = rho_.dim;
    SequenceOutcome out;
    out.final_state.dim = 2 * n;
    out.final_state.matrix = Matrix::Zero(2 * n, 2 * n);
    out.per_sample_success.reserve(samples_.size());
    double acc = 0.0;

    if (ev_.type == EvolverKind::Type::Exact) {
        std::vector<Matrix> proj(n);
        for (int i = 0; i < n; ++i) {
            const qmath::Vector v = eig_.eigenvectors.col(i);
            proj[i] = v * v.adjoint();
        }
        for (const auto& [delta, w] : samples_) {
            double ps = 0.0;
            for (int i = 0; i < n; ++i) {
                const double lam = std::max(0.0, eig_.eigenvalues(i));
                if (lam == 0.0) continue;
                const Eigen::Matrix2cd u = block_sequence_unitary(
                    p.omega + delta - eig_.eigenvalues(i), p.c, tau, p.echo_order, axis_);
                const Complex psi0 = u(0, 0), psi1 = u(1, 0);  // u acting on |0>
                ps += lam * std::norm(psi1);
                const double wl = w * lam;
                for (int a = 0; a < 2; ++a) {
                    const Complex pa = (a == 0) ? psi0 : psi1;
                    for (int b = 0; b < 2; ++b) {
                        const Complex coeff = wl * pa * std::conj(b == 0 ? psi0 : psi1);
                        out.final_state.matrix.block(a * n, b * n, n, n) += coeff * proj[i];
                    }
                }
            }
            out.per_sample_success.push_back(ps);
            acc += w * ps;
        }
    } else {
        for (const auto& [delta, w] : samples_) {
            const SystemState st = apply_sequence_single(rho_, p, delta, ev_, axis_);
            const double ps = success_probability(st);
            out.final_state.matrix += w * st.matrix;
            out.per_sample_success.push_back(ps);
            acc += w * ps;
        }
    }
    out.success_probability = acc;
    return out;
}

SequenceOutcome run_sequence(const model::DensityMatrix& rho, const model::DriveParams& p,
                             const model::NoiseModel& noise, const EvolverKind& ev,
                             uint64_t master_seed, PulseAxis axis) {
    return SequenceRunner(rho, noise, ev, master_seed, axis).run(p);
}

double sequence_flip_probability(double detuning, double c, double tau, int echo_order) {
    const double rabi = std::sqrt(detuning * detuning + 4.0 * c * c);
    if (rabi == 0.0) return 0.0;
    if (echo_order == 0) {
        const double s = (2.0 * c / rabi) * std::sin(rabi * tau / 2.0);
        return s * s;
    }
    // Each (tau/2M - pi_x - tau/2M - pi_x) cycle is a rotation about an
    // equatorial axis by Theta = 2 asin(|2c/Omega| |sin(Omega t / 2)|); M
    // cycles compose by angle addition, so p_flip = sin^2(M Theta).
    const double t = tau / (2.0 * echo_order);
    const double s =
        std::min(1.0, std::abs((2.0 * c / rabi) * std::sin(rabi * t / 2.0)));
    const double amp = std::sin(2.0 * echo_order * std::asin(s));
    return amp * amp;
}

void gauss_hermite(int order, std::vector<double>& nodes, std::vector<double>& weights) {
    if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
    nodes.assign(order, 0.0);
    weights.assign(order, 0.0);
    const int m = (order + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        // Stroud-Secrest style initial guesses, then Newton on the recurrence.
        if (i == 0)
            z = std::sqrt(2.0 * order + 1.0) -
                1.85575 * std::pow(2.0 * order + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(order), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * nodes[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * nodes[1];
        else
            z = 2.0 * z - nodes[i - 2];

        double pp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 0.7511255444649425;  // pi^{-1/4}, normalized H_0
            double p2 = 0.0;
            for (int j = 1; j <= order; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * order) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        nodes[i] = z;
        nodes[order - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[order - 1 - i] = weights[i];
    }
    double total = 0.0;
    for (double w : weights) total += w;
    for (double& w : weights) w /= total;
}

double seeded_normal(uint64_t master_seed, uint64_t index) {
    const uint64_t h1 = splitmix64(master_seed ^ splitmix64(index + 0x9e3779b97f4a7c15ULL));
    const uint64_t h2 = splitmix64(h1);
    const double u1 = unit_open(h1);
    const double u2 = unit_open(h2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double binomial_sample_mean(double p, long shots, uint64_t master_seed, uint64_t index) {
    if (shots < 1) throw std::invalid_argument("binomial_sample_mean: shots must be >= 1");
    p = std::clamp(p, 0.0, 1.0);
    const uint64_t base = splitmix64(master_seed ^ splitmix64(index ^ 0x5851f42d4c957f2dULL));
    long count = 0;
    for (long j = 0; j < shots; ++j) {
        if (unit_open(splitmix64(base + static_cast<uint64_t>(j) *
                                            0x9e3779b97f4a7c15ULL)) < p)
            ++count;
    }
    return static_cast<double>(count) / static_cast<double>(shots);
}

}  // namespace respca::engine
