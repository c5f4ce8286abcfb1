// Python surface for the simulator: the canonical test matrix, eigensolver,
// sequence evolution, spectrum scanning/fitting, adaptive refinement,
// distillation, the physical-unit mapping, and state preparation. Thin
// functional wrappers over the C++ core; matrices cross as numpy arrays.

#include "respca/distill.hpp"
#include "respca/io.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace respca;
using qmath::Matrix;

namespace {

model::DensityMatrix as_density(const Matrix& m) {
    return model::DensityMatrix::validated(m);
}

model::DriveParams make_drive(double omega, double c, std::optional<double> tau,
                              int echo_order, int trotter_steps) {
    model::DriveParams p;
    p.omega = omega;
    p.c = c;
    p.tau = tau;
    p.echo_order = echo_order;
    p.trotter_steps = trotter_steps;
    p.validate();
    return p;
}

model::NoiseModel make_noise(double sigma_delta, std::optional<long> mc_samples,
                             int gh_order, std::optional<long> shots) {
    model::NoiseModel n;
    n.sigma_delta = sigma_delta;
    if (mc_samples)
        n.averaging = model::MonteCarloAveraging{*mc_samples};
    else
        n.averaging = model::GaussHermiteAveraging{gh_order};
    n.shots = shots;
    n.validate();
    return n;
}

py::dict peak_dict(const scan::Peak& p) {
    py::dict d;
    d["center"] = p.center;
    d["fwhm"] = p.fwhm;
    d["amplitude"] = p.amplitude;
    d["baseline"] = p.baseline;
    d["center_uncertainty"] = p.center_uncertainty;
    d["fit_residual"] = p.fit_residual;
    d["converged"] = p.converged;
    d["unresolved"] = p.unresolved;
    d["stage"] = p.stage;
    return d;
}

}  // namespace

PYBIND11_MODULE(respca, m) {
    m.doc() = "resonant principal-component analysis simulator";

    // ---- states and linear algebra ----
    m.def("paper_density_matrix",
          []() { return model::paper_density_matrix().matrix; },
          "The canonical 4x4 register state used throughout the docs");

    m.def(
        "hermitian_eig",
        [](const Matrix& h) {
            const auto eig = qmath::hermitian_eig(h);
            return py::make_tuple(eig.eigenvalues, eig.eigenvectors);
        },
        py::arg("matrix"),
        "Jacobi eigendecomposition -> (eigenvalues ascending, eigenvector columns)");

    m.def("tensor", &qmath::tensor, py::arg("a"), py::arg("b"),
          "Kronecker product, first factor major");
    m.def("partial_trace", &qmath::partial_trace, py::arg("matrix"), py::arg("dims"),
          py::arg("keep"));
    m.def("state_fidelity", &qmath::state_fidelity, py::arg("rho"), py::arg("sigma"),
          "Uhlmann fidelity of two density matrices");
    m.def("trace_distance", &qmath::trace_distance, py::arg("a"), py::arg("b"));
    m.def("validate_density_matrix",
          [](const Matrix& m_) { return as_density(m_).matrix; }, py::arg("matrix"),
          "Checks Hermiticity, unit trace, positivity; raises ValueError");

    // ---- closed-form line ----
    m.def("sequence_flip_probability", &engine::sequence_flip_probability,
          py::arg("detuning"), py::arg("c"), py::arg("tau"), py::arg("echo_order") = 0,
          "Closed-form probe-flip probability of one eigencomponent");
    m.def("expected_fwhm", &scan::expected_fwhm, py::arg("c"),
          "Half-max width of the noiseless native line, 3.1952*c");

    // ---- sequence evolution ----
    m.def(
        "success_probability",
        [](const Matrix& rho, double omega, double c, std::optional<double> tau,
           int echo_order, int trotter_steps, double sigma_delta,
           std::optional<long> mc_samples, int gh_order, const std::string& evolver,
           uint64_t seed) {
            const auto p = make_drive(omega, c, tau, echo_order, trotter_steps);
            const auto n = make_noise(sigma_delta, mc_samples, gh_order, std::nullopt);
            return engine::run_sequence(as_density(rho), p, n,
                                        engine::EvolverKind::parse(evolver), seed)
                .success_probability;
        },
        py::arg("rho"), py::arg("omega"), py::arg("c") = 6e-4,
        py::arg("tau") = std::nullopt, py::arg("echo_order") = 0,
        py::arg("trotter_steps") = 64, py::arg("sigma_delta") = 0.0,
        py::arg("mc_samples") = std::nullopt, py::arg("gh_order") = 31,
        py::arg("evolver") = "exact", py::arg("seed") = 0,
        "Ensemble-averaged probe-flip probability of one sequence");

    m.def(
        "run_sequence",
        [](const Matrix& rho, double omega, double c, std::optional<double> tau,
           int echo_order, int trotter_steps, double sigma_delta,
           std::optional<long> mc_samples, int gh_order, const std::string& evolver,
           uint64_t seed) {
            const auto p = make_drive(omega, c, tau, echo_order, trotter_steps);
            const auto n = make_noise(sigma_delta, mc_samples, gh_order, std::nullopt);
            const auto out = engine::run_sequence(as_density(rho), p, n,
                                                  engine::EvolverKind::parse(evolver),
                                                  seed);
            py::dict d;
            d["success_probability"] = out.success_probability;
            d["final_state"] = out.final_state.matrix;
            return d;
        },
        py::arg("rho"), py::arg("omega"), py::arg("c") = 6e-4,
        py::arg("tau") = std::nullopt, py::arg("echo_order") = 0,
        py::arg("trotter_steps") = 64, py::arg("sigma_delta") = 0.0,
        py::arg("mc_samples") = std::nullopt, py::arg("gh_order") = 31,
        py::arg("evolver") = "exact", py::arg("seed") = 0,
        "Full outcome: averaged success probability and final density matrix");

    // ---- scanning and fitting ----
    m.def(
        "scan_spectrum",
        [](const Matrix& rho, const std::vector<double>& omegas, double c,
           std::optional<double> tau, int echo_order, double sigma_delta,
           std::optional<long> mc_samples, int gh_order, std::optional<long> shots,
           const std::string& evolver, uint64_t seed) {
            const auto p = make_drive(0.0, c, tau, echo_order, 64);
            const auto n = make_noise(sigma_delta, mc_samples, gh_order, shots);
            const auto spec = scan::scan_spectrum(as_density(rho), p, omegas, n,
                                                  engine::EvolverKind::parse(evolver),
                                                  seed);
            std::vector<double> w, ps, se;
            for (const auto& pt : spec.points) {
                w.push_back(pt.omega);
                ps.push_back(pt.p_success);
                se.push_back(pt.std_error);
            }
            py::dict d;
            d["omega"] = w;
            d["p_success"] = ps;
            d["std_error"] = se;
            return d;
        },
        py::arg("rho"), py::arg("omegas"), py::arg("c") = 6e-4,
        py::arg("tau") = std::nullopt, py::arg("echo_order") = 0,
        py::arg("sigma_delta") = 0.0, py::arg("mc_samples") = std::nullopt,
        py::arg("gh_order") = 31, py::arg("shots") = std::nullopt,
        py::arg("evolver") = "exact", py::arg("seed") = 0,
        "One sequence per grid frequency -> {omega, p_success, std_error}");

    m.def(
        "fit_gaussian_peak",
        [](const std::vector<double>& omegas, const std::vector<double>& values,
           std::optional<double> lo, std::optional<double> hi) {
            if (omegas.size() != values.size())
                throw std::invalid_argument("omega and value arrays differ in length");
            scan::Spectrum spec;
            for (size_t i = 0; i < omegas.size(); ++i)
                spec.points.push_back({omegas[i], values[i], 0.0});
            const double wlo = lo ? *lo : omegas.front();
            const double whi = hi ? *hi : omegas.back();
            return peak_dict(scan::fit_gaussian_peak(spec, wlo, whi));
        },
        py::arg("omegas"), py::arg("values"), py::arg("lo") = std::nullopt,
        py::arg("hi") = std::nullopt,
        "Gaussian least squares over a window -> peak parameter dict");

    m.def(
        "adaptive_scan",
        [](const Matrix& rho,
           std::optional<std::vector<std::tuple<double, int, double>>> stages,
           std::pair<double, double> initial_range, int initial_points,
           bool track_rightmost_only, double sigma_delta,
           std::optional<long> mc_samples, int gh_order, uint64_t seed) {
            scan::AdaptiveSchedule sched = scan::AdaptiveSchedule::default_schedule();
            if (stages) {
                sched.stages.clear();
                for (const auto& [c, points, kappa] : *stages)
                    sched.stages.push_back({c, points, kappa});
            }
            sched.initial_range = initial_range;
            sched.initial_points = initial_points;
            sched.track_rightmost_only = track_rightmost_only;
            sched.validate();
            const auto n = make_noise(sigma_delta, mc_samples, gh_order, std::nullopt);
            const auto res = scan::adaptive_scan(as_density(rho), sched, n, {}, seed);
            py::list peaks;
            for (const auto& p : res.peaks) peaks.append(peak_dict(p));
            py::dict d;
            d["peaks"] = peaks;
            d["total_grid_points"] = res.total_grid_points;
            d["total_repetitions"] = res.total_repetitions;
            d["aborted"] = res.aborted;
            d["last_stage"] = res.last_stage;
            return d;
        },
        py::arg("rho"), py::arg("stages") = std::nullopt,
        py::arg("initial_range") = std::pair<double, double>{0.0, 1.0},
        py::arg("initial_points") = 15, py::arg("track_rightmost_only") = false,
        py::arg("sigma_delta") = 0.0, py::arg("mc_samples") = std::nullopt,
        py::arg("gh_order") = 31, py::arg("seed") = 0,
        "Coarse-to-fine eigenvalue search; stages are (c, points, kappa) tuples");

    // ---- distillation ----
    m.def(
        "distill",
        [](const Matrix& rho, double omega, double c, std::optional<double> tau,
           int echo_order, double sigma_delta, std::optional<long> mc_samples,
           int gh_order, const std::string& evolver, uint64_t seed, int target_index) {
            const auto p = make_drive(omega, c, tau, echo_order, 64);
            const auto n = make_noise(sigma_delta, mc_samples, gh_order, std::nullopt);
            const auto rep =
                distill::distill(as_density(rho), omega, p, n,
                                 engine::EvolverKind::parse(evolver), seed, target_index);
            py::dict d;
            d["omega_used"] = rep.omega_used;
            d["target_index"] = rep.target_index;
            d["success_probability"] = rep.success_probability;
            d["no_transfer"] = rep.no_transfer;
            d["populations"] = rep.populations;
            if (!rep.no_transfer) {
                d["efficiency"] = rep.efficiency;
                d["fidelity"] = rep.fidelity;
                d["fidelity_sqrt"] = rep.fidelity_sqrt;
                d["post_state"] = rep.post_state.matrix;
            }
            return d;
        },
        py::arg("rho"), py::arg("omega"), py::arg("c") = 6e-4,
        py::arg("tau") = std::nullopt, py::arg("echo_order") = 0,
        py::arg("sigma_delta") = 0.0, py::arg("mc_samples") = std::nullopt,
        py::arg("gh_order") = 31, py::arg("evolver") = "exact", py::arg("seed") = 0,
        py::arg("target_index") = -1,
        "Run the sequence at omega and post-select the probe-|1> register state");

    // ---- physical-unit mapping ----
    m.def(
        "to_physical",
        [](double omega, double c) {
            const auto d = nvmap::to_physical(omega, c, nvmap::NvParams{});
            return py::make_tuple(d.delta, d.omega_mw);
        },
        py::arg("omega"), py::arg("c"),
        "Dimensionless (omega, c) -> (detuning, drive amplitude) in rad/s");
    m.def(
        "from_physical",
        [](double delta, double omega_mw) {
            const auto [o, c] = nvmap::from_physical({delta, omega_mw}, nvmap::NvParams{});
            return py::make_tuple(o, c);
        },
        py::arg("delta"), py::arg("omega_mw"));
    m.def(
        "effective_omega",
        [](double omega, double delta_b) {
            return nvmap::effective_omega(omega, delta_b, nvmap::NvParams{});
        },
        py::arg("omega"), py::arg("delta_b"),
        "Scan frequency shifted by a magnetic field drift (gauss)");
    m.def(
        "resolution_bound", []() { return nvmap::resolution_bound(nvmap::NvParams{}); },
        "Dephasing-limited dimensionless linewidth floor Gamma_2*");
    m.def(
        "calibrated_sigma_delta",
        [](std::optional<double> calibration) {
            const nvmap::NvParams nv;
            return calibration ? nvmap::calibrated_sigma_delta(nv, *calibration)
                               : nvmap::calibrated_sigma_delta(nv);
        },
        py::arg("calibration") = std::nullopt,
        "Quasi-static detuning sigma for the default hardware parameters");

    // ---- state preparation ----
    m.def(
        "simulate_preparation",
        [](double theta1, double theta2, double t2_us, double t1_us,
           double duration_us) {
            nvmap::LaserParams laser;
            laser.t2_laser = t2_us * 1e-6;
            laser.t1_laser = t1_us * 1e-6;
            laser.duration = duration_us * 1e-6;
            const auto res = nvmap::simulate_preparation(theta1, theta2, laser);
            py::dict d;
            d["post_laser_diagonal"] = res.post_laser_diagonal;
            d["fidelity_to_target"] = res.fidelity_to_target;
            d["fidelity_sqrt"] = res.fidelity_sqrt;
            d["initial"] = res.initial.matrix;
            d["after_rotations"] = res.after_rotations.matrix;
            d["after_laser"] = res.after_laser.matrix;
            d["final_state"] = res.final_state.matrix;
            return d;
        },
        py::arg("theta1"), py::arg("theta2"), py::arg("t2_us") = 0.6,
        py::arg("t1_us") = 2.1, py::arg("duration_us") = 1.4,
        "Two-qubit rotation + laser channel preparation chain");
}
