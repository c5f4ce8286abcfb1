#pragma once

// Config document handling, density-matrix JSON serialization, CSV/JSON
// artifact writers, and the error taxonomy shared with the CLI. A single JSON
// config document drives every command; command-line flags override fields;
// the fully resolved config is echoed into every output for provenance.

#include "respca/engine.hpp"
#include "respca/nvmap.hpp"
#include "respca/scan.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace respca::io {

inline constexpr int kFormatVersion = 1;

// exit code 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// exit code 3
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-command parameter sections. They live inside the config document so a
// command's meta file is itself a complete, re-runnable config.
struct SpectrumParams {
    double omega_min = 0.0;
    double omega_max = 1.0;
    int points = 201;
};

struct DdStudyParams {
    std::vector<double> c_list{6e-4, 2e-5, 5e-7};
    std::vector<int> m_list{0, 1, 2, 4, 8};
    int points = 41;           // grid points per fitted line
    double window_fwhm = 1.5;  // window halfwidth, in estimated-FWHM units
    // Sliver lines at the smallest c alias through quadrature nodes, so the
    // dd study runs Monte-Carlo; this is the sample count used when the
    // configured noise averaging is quadrature-based.
    long mc_samples = 200000;
};

struct RunConfig {
    std::string rho_source = "paper";  // "paper" or a density-matrix file path
    model::DriveParams drive{0.454929, 6e-4, std::nullopt, 0, 64};
    bool noise_calibrated_nv = true;  // "calibrated-nv": sigma from nv params
    model::NoiseModel noise;
    engine::EvolverKind evolver;
    nvmap::NvParams nv;
    double prep_theta1 = 0.58 * nvmap::kPi;
    double prep_theta2 = 0.31 * nvmap::kPi;
    uint64_t seed = 20260816;
    std::string output_dir = "out";

    SpectrumParams spectrum;
    scan::AdaptiveSchedule schedule = scan::AdaptiveSchedule::default_schedule();
    DdStudyParams ddstudy;

    // Fills noise.sigma_delta from the nv params when calibrated-nv was
    // requested, then validates everything. Throws ConfigError.
    void resolve_and_validate();
};

RunConfig default_config();
RunConfig load_config(const std::string& path);          // throws ConfigError
void apply_config_json(RunConfig& cfg, const nlohmann::json& j);

nlohmann::json resolved_config_json(const RunConfig& cfg);

// {"dim": n, "re": [[...]], "im": [[...]]}; validation tolerance 1e-8 with
// renormalization of sub-tolerance trace drift. Throws ConfigError.
model::DensityMatrix load_density_matrix(const std::string& path);
nlohmann::json density_matrix_json(const model::DensityMatrix& dm);
model::DensityMatrix density_matrix_from_json(const nlohmann::json& j);

scan::AdaptiveSchedule schedule_from_json(const nlohmann::json& j);  // throws ConfigError
scan::AdaptiveSchedule load_schedule(const std::string& path);
nlohmann::json schedule_json(const scan::AdaptiveSchedule& s);

nlohmann::json peak_json(const scan::Peak& p);

// 12 significant digits, matching the CSV contract.
std::string format_number(double v);

std::string spectrum_csv(const scan::Spectrum& spec);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);  // throws ConfigError

}  // namespace respca::io
