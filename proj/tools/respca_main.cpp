// respca: config-driven front end for the resonant spectroscopy simulator.
// Subcommands: spectrum, adaptive, distill, dd-study, prep. Every run writes
// its artifacts plus a <command>.meta.json embedding the fully resolved config;
// pointing --config at a meta file reproduces the run.

#include <CLI11.hpp>

#include "respca/distill.hpp"
#include "respca/io.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace respca;

namespace {

struct OutputSet {
    std::vector<std::pair<std::string, std::string>> files;  // name -> content
    void add(const std::string& name, const std::string& content) {
        files.emplace_back(name, content);
    }
};

// All computation happens before this runs, so a failing command leaves no
// partial artifacts behind.
void flush_outputs(const io::RunConfig& cfg, const std::string& command,
                   OutputSet& out, double wall_seconds, const json& extra_meta) {
    fs::create_directories(cfg.output_dir);
    json meta;
    meta["format_version"] = io::kFormatVersion;
    meta["command"] = command;
    meta["config"] = io::resolved_config_json(cfg);
    meta["wall_time_s"] = wall_seconds;
    json names = json::array();
    for (const auto& [name, content] : out.files) names.push_back(name);
    meta["outputs"] = names;
    if (!extra_meta.is_null()) meta["summary"] = extra_meta;
    out.add(command + ".meta.json", meta.dump(2) + "\n");
    for (const auto& [name, content] : out.files)
        io::write_text_file((fs::path(cfg.output_dir) / name).string(), content);
}

model::DensityMatrix resolve_rho(const io::RunConfig& cfg) {
    if (cfg.rho_source == "paper") return model::paper_density_matrix();
    return io::load_density_matrix(cfg.rho_source);
}

double run_and_time(const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_spectrum(const io::RunConfig& cfg) {
    const model::DensityMatrix rho = resolve_rho(cfg);
    std::vector<double> grid;
    if (cfg.spectrum.points == 1) {
        grid = {cfg.spectrum.omega_min};
    } else {
        grid.resize(cfg.spectrum.points);
        for (int i = 0; i < cfg.spectrum.points; ++i)
            grid[i] = cfg.spectrum.omega_min +
                      (cfg.spectrum.omega_max - cfg.spectrum.omega_min) * i /
                          (cfg.spectrum.points - 1);
    }
    scan::Spectrum spec;
    const double wall = run_and_time([&] {
        spec = scan::scan_spectrum(rho, cfg.drive, grid, cfg.noise, cfg.evolver, cfg.seed);
    });
    OutputSet out;
    out.add("spectrum.csv", io::spectrum_csv(spec));
    flush_outputs(cfg, "spectrum", out, wall, json());
    return 0;
}

int cmd_adaptive(const io::RunConfig& cfg) {
    const model::DensityMatrix rho = resolve_rho(cfg);
    scan::AdaptiveResult res;
    const double wall = run_and_time([&] {
        res = scan::adaptive_scan(rho, cfg.schedule, cfg.noise, cfg.evolver, cfg.seed);
    });

    OutputSet out;
    for (size_t k = 0; k < res.stage_spectra.size(); ++k)
        out.add("stage_" + std::to_string(k) + ".csv",
                io::spectrum_csv(res.stage_spectra[k]));
    json peaks = json::array();
    for (const auto& pk : res.peaks) peaks.push_back(io::peak_json(pk));
    json jp;
    jp["format_version"] = io::kFormatVersion;
    jp["peaks"] = peaks;
    jp["total_grid_points"] = res.total_grid_points;
    jp["total_repetitions"] = res.total_repetitions;
    jp["aborted"] = res.aborted;
    jp["last_stage"] = res.last_stage;
    jp["schedule"] = io::schedule_json(cfg.schedule);
    out.add("peaks.json", jp.dump(2) + "\n");

    json summary = {{"total_grid_points", res.total_grid_points},
                    {"total_repetitions", res.total_repetitions},
                    {"aborted", res.aborted},
                    {"last_stage", res.last_stage},
                    {"peak_count", res.peaks.size()}};
    flush_outputs(cfg, "adaptive", out, wall, summary);
    if (res.aborted) {
        std::cerr << "error: numerical: adaptive scan lost all peaks after stage "
                  << res.last_stage << "; last good results persisted\n";
        return 3;
    }
    return 0;
}

int cmd_distill(const io::RunConfig& cfg) {
    const model::DensityMatrix rho = resolve_rho(cfg);
    distill::DistillReport rep;
    const double wall = run_and_time([&] {
        rep = distill::distill(rho, cfg.drive.omega, cfg.drive, cfg.noise, cfg.evolver,
                               cfg.seed);
    });

    json jr;
    jr["format_version"] = io::kFormatVersion;
    jr["omega_used"] = rep.omega_used;
    jr["target_index"] = rep.target_index;
    jr["no_transfer"] = rep.no_transfer;
    jr["success_probability"] = rep.success_probability;
    if (!rep.no_transfer) {
        jr["efficiency"] = rep.efficiency;
        jr["fidelity"] = rep.fidelity;
        jr["fidelity_sqrt"] = rep.fidelity_sqrt;
        jr["post_state"] = io::density_matrix_json(rep.post_state);
    }
    json pops = json::array();
    for (int k = 0; k < 2; ++k) {
        json row = json::array();
        for (int i = 0; i < rep.populations.cols(); ++i)
            row.push_back(rep.populations(k, i));
        pops.push_back(row);
    }
    jr["populations"] = pops;

    std::ostringstream csv;
    csv << "subspace";
    for (int i = 0; i < rep.populations.cols(); ++i) csv << ",lambda_" << (i + 1);
    csv << "\n";
    for (int k = 0; k < 2; ++k) {
        csv << "Pi" << k;
        for (int i = 0; i < rep.populations.cols(); ++i)
            csv << ',' << io::format_number(rep.populations(k, i));
        csv << "\n";
    }

    OutputSet out;
    out.add("distill.json", jr.dump(2) + "\n");
    out.add("populations.csv", csv.str());
    flush_outputs(cfg, "distill", out, wall,
                  json{{"no_transfer", rep.no_transfer},
                       {"success_probability", rep.success_probability}});
    if (rep.no_transfer) {
        std::cerr << "error: numerical: no population transfer at omega="
                  << io::format_number(rep.omega_used) << "; report written\n";
        return 3;
    }
    return 0;
}

// FWHM of the noiseless echo line in units of c, by bisecting the closed-form
// profile (depends only on M).
double intrinsic_fwhm_factor(int echo_order) {
    static std::map<int, double> cache;
    const auto it = cache.find(echo_order);
    if (it != cache.end()) return it->second;
    const double c = 1.0, tau = nvmap::kPi / (2.0 * c);
    auto profile = [&](double u) {
        return engine::sequence_flip_probability(u * c, c, tau, echo_order);
    };
    const double peak = profile(0.0);
    double lo = 0.0, hi = 0.5;
    while (profile(hi) > peak / 2.0 && hi < 1e4) {
        lo = hi;
        hi += 0.5;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (profile(mid) > peak / 2.0 ? lo : hi) = mid;
    }
    const double factor = 2.0 * 0.5 * (lo + hi);
    cache[echo_order] = factor;
    return factor;
}

int cmd_ddstudy(const io::RunConfig& cfg) {
    const model::DensityMatrix rho = resolve_rho(cfg);

    // Quadrature nodes alias through the sliver-thin lines at the smallest c,
    // so this study always ensemble-averages by Monte Carlo. One master seed
    // means one shared noise realization across every (c, M) cell.
    model::NoiseModel noise = cfg.noise;
    if (!noise.is_monte_carlo() && noise.sigma_delta > 0)
        noise.averaging = model::MonteCarloAveraging{cfg.ddstudy.mc_samples};

    const double sigma = noise.sigma_delta;
    const double gauss_floor = 2.3548200450309493 * sigma;

    std::ostringstream csv;
    csv << "c,M,amplitude,fwhm,converged\n";
    json cells = json::array();
    const double wall = run_and_time([&] {
        for (double c : cfg.ddstudy.c_list) {
            for (int m : cfg.ddstudy.m_list) {
                const double est =
                    std::hypot(intrinsic_fwhm_factor(m) * c, gauss_floor);
                const double half = cfg.ddstudy.window_fwhm * est;
                std::vector<double> grid(cfg.ddstudy.points);
                for (int i = 0; i < cfg.ddstudy.points; ++i)
                    grid[i] = cfg.drive.omega - half +
                              2.0 * half * i / (cfg.ddstudy.points - 1);
                model::DriveParams q = cfg.drive;
                q.c = c;
                q.echo_order = m;
                q.tau.reset();  // tau = pi/(2c) per line
                const scan::Spectrum spec =
                    scan::scan_spectrum(rho, q, grid, noise, cfg.evolver, cfg.seed);
                const scan::Peak pk =
                    scan::fit_gaussian_peak(spec, grid.front(), grid.back());
                // Amplitude is the measured peak success probability, a
                // population. A Gaussian fit overshoots the flat tops of
                // high-M lines, so the fit only supplies the width.
                double height = 0.0;
                for (const auto& pt : spec.points)
                    height = std::max(height, pt.p_success);
                csv << io::format_number(c) << ',' << m << ','
                    << io::format_number(height) << ',' << io::format_number(pk.fwhm)
                    << ',' << (pk.converged ? 1 : 0) << "\n";
                cells.push_back({{"c", c},
                                 {"M", m},
                                 {"amplitude", height},
                                 {"fwhm", pk.fwhm},
                                 {"converged", pk.converged}});
            }
        }
    });

    OutputSet out;
    out.add("ddstudy.csv", csv.str());
    flush_outputs(cfg, "dd-study", out, wall, json{{"cells", cells}});
    return 0;
}

int cmd_prep(const io::RunConfig& cfg) {
    nvmap::PreparationResult res;
    const double wall = run_and_time([&] {
        res = nvmap::simulate_preparation(cfg.prep_theta1, cfg.prep_theta2,
                                          cfg.nv.laser);
    });
    json jr;
    jr["format_version"] = io::kFormatVersion;
    jr["theta1"] = cfg.prep_theta1;
    jr["theta2"] = cfg.prep_theta2;
    jr["initial"] = io::density_matrix_json(res.initial);
    jr["after_rotations"] = io::density_matrix_json(res.after_rotations);
    jr["after_laser"] = io::density_matrix_json(res.after_laser);
    jr["final_state"] = io::density_matrix_json(res.final_state);
    jr["post_laser_diagonal"] = res.post_laser_diagonal;
    jr["fidelity_to_target"] = res.fidelity_to_target;
    jr["fidelity_sqrt"] = res.fidelity_sqrt;

    OutputSet out;
    out.add("prep.json", jr.dump(2) + "\n");
    flush_outputs(cfg, "prep", out, wall,
                  json{{"fidelity_to_target", res.fidelity_to_target}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"resonant quantum principal component spectroscopy simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, output_dir, evolver_text, stages_path;
    uint64_t seed = 0;
    int echo = 0;
    long shots = 0;

    app.add_option("--config", config_path, "JSON config (or a previous run's meta file)");
    auto* opt_seed = app.add_option("--seed", seed, "master RNG seed");
    app.add_option("--output", output_dir, "output directory");
    app.add_option("--evolver", evolver_text, "exact | trotter:N | dme:N");
    auto* opt_echo = app.add_option("--echo", echo, "echo order M (>= 0)");
    auto* opt_shots = app.add_option("--shots", shots, "binomial readout shots (0 disables)");

    auto* sub_spectrum = app.add_subcommand("spectrum", "scan a fixed frequency grid");
    double omega_min = 0.0, omega_max = 0.0;
    int points = 0;
    sub_spectrum->add_option("--omega-min", omega_min, "grid start");
    sub_spectrum->add_option("--omega-max", omega_max, "grid end");
    sub_spectrum->add_option("--points", points, "grid size");

    auto* sub_adaptive =
        app.add_subcommand("adaptive", "multi-stage adaptive eigenvalue scan");
    sub_adaptive->add_option("--stages", stages_path, "schedule JSON file");

    auto* sub_distill = app.add_subcommand("distill", "distill one eigencomponent");
    double omega = std::nan("");
    sub_distill->add_option("--omega", omega, "target frequency");

    auto* sub_dd = app.add_subcommand("dd-study", "echo-order study over a (c, M) grid");
    std::vector<double> c_list;
    std::vector<int> m_list;
    sub_dd->add_option("--c-list", c_list, "drive strengths")->delimiter(',');
    sub_dd->add_option("--m-list", m_list, "echo orders")->delimiter(',');

    auto* sub_prep = app.add_subcommand("prep", "laser-assisted state preparation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    }

    try {
        io::RunConfig cfg =
            config_path.empty() ? io::default_config() : io::load_config(config_path);
        if (opt_seed->count()) cfg.seed = seed;
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (!evolver_text.empty()) {
            try {
                cfg.evolver = engine::EvolverKind::parse(evolver_text);
            } catch (const std::invalid_argument& e) {
                throw io::ConfigError(e.what());
            }
        }
        if (opt_echo->count()) {
            if (echo < 0) throw io::ConfigError("--echo must be >= 0");
            cfg.drive.echo_order = echo;
        }
        if (opt_shots->count()) {
            if (shots < 0) throw io::ConfigError("--shots must be >= 0");
            if (shots == 0)
                cfg.noise.shots.reset();
            else
                cfg.noise.shots = shots;
        }

        if (sub_spectrum->parsed()) {
            if (sub_spectrum->count("--omega-min")) cfg.spectrum.omega_min = omega_min;
            if (sub_spectrum->count("--omega-max")) cfg.spectrum.omega_max = omega_max;
            if (sub_spectrum->count("--points")) cfg.spectrum.points = points;
        }
        if (sub_adaptive->parsed() && !stages_path.empty())
            cfg.schedule = io::load_schedule(stages_path);
        if (sub_distill->parsed() && sub_distill->count("--omega"))
            cfg.drive.omega = omega;
        if (sub_dd->parsed()) {
            if (!c_list.empty()) cfg.ddstudy.c_list = c_list;
            if (!m_list.empty()) cfg.ddstudy.m_list = m_list;
        }

        cfg.resolve_and_validate();

        if (sub_spectrum->parsed()) return cmd_spectrum(cfg);
        if (sub_adaptive->parsed()) return cmd_adaptive(cfg);
        if (sub_distill->parsed()) return cmd_distill(cfg);
        if (sub_dd->parsed()) return cmd_ddstudy(cfg);
        if (sub_prep->parsed()) return cmd_prep(cfg);
        std::cerr << "error: config: no command given\n";
        return 2;
    } catch (const io::ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const io::NumericalError& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return 3;
    }
}
