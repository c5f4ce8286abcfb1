#pragma once

// Frequency scanning, peak detection, Gaussian least-squares fitting, and the
// adaptive refinement schedule. The true noiseless lineshape is a Rabi sinc;
// Gaussian fitting is retained deliberately (the reference analysis fits
// Gaussians), with the fit window held to +-1.5 FWHM estimates to suppress
// sidelobe bias.

#include "respca/engine.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace respca::scan {

struct SpectrumPoint {
    double omega = 0.0;
    double p_success = 0.0;
    double std_error = 0.0;  // 0 when shots absent
};

struct Spectrum {
    std::vector<SpectrumPoint> points;  // omegas strictly increasing
    model::DriveParams drive;
    model::NoiseModel noise;
    engine::EvolverKind evolver;
};

struct Peak {
    double center = 0.0;
    double fwhm = 0.0;
    double amplitude = 0.0;  // height above baseline
    double baseline = 0.0;
    double center_uncertainty = 0.0;
    double fit_residual = 0.0;  // rms residual
    bool converged = false;
    bool unresolved = false;  // merged two-peak fit with singular covariance
    int stage = -1;           // adaptive stage that produced it, -1 otherwise
};

struct StageSpec {
    double c = 0.0;
    int points = 15;      // grid points per window
    double kappa = 3.0;   // window halfwidth multiplier
};

struct AdaptiveSchedule {
    std::vector<StageSpec> stages;  // c strictly decreasing
    std::pair<double, double> initial_range{0.0, 1.0};
    int initial_points = 15;
    double min_prominence = 0.10;      // relative to window max-min
    double min_amplitude_frac = 0.15;  // rejects Rabi sidelobes (~11% of main lobe)
    bool track_rightmost_only = false;

    static AdaptiveSchedule default_schedule();  // c = 0.05, 0.01, 2e-3, 6e-4
    void validate() const;
};

struct AdaptiveResult {
    std::vector<Peak> peaks;  // one per tracked eigenvalue, centers ascending
    std::vector<Spectrum> stage_spectra;  // concatenated window scans per stage
    long total_grid_points = 0;
    long total_repetitions = 0;  // grid points x noise samples
    bool aborted = false;        // a stage lost all peaks; `peaks` = last good stage
    int last_stage = -1;
};

// Half-max width of the noiseless native line: 3.19524... * c.
double expected_fwhm(double c);

// One run_sequence per grid point with omega substituted; when shots are
// present p_success is a binomial sample mean and std_error = sqrt(p(1-p)/shots).
Spectrum scan_spectrum(const model::DensityMatrix& rho, const model::DriveParams& p,
                       const std::vector<double>& grid, const model::NoiseModel& noise,
                       const engine::EvolverKind& ev, uint64_t master_seed = 0);

// Indices of local maxima with prominence >= min_prominence (absolute units).
std::vector<int> detect_peaks(const Spectrum& spec, double min_prominence);

// Nonlinear least squares of A exp(-(w-mu)^2/(2 s^2)) + b over the window.
// Non-convergent or degenerate fits return converged = false.
Peak fit_gaussian_peak(const Spectrum& spec, double window_lo, double window_hi);

// Joint two-Gaussian fit (shared baseline) used when two detected peaks share
// one window; falls back to marking the pair unresolved when the fit is singular.
std::vector<Peak> fit_two_gaussian_peaks(const Spectrum& spec, double window_lo,
                                         double window_hi, int ipk1, int ipk2);

AdaptiveResult adaptive_scan(const model::DensityMatrix& rho,
                             const AdaptiveSchedule& schedule,
                             const model::NoiseModel& noise,
                             const engine::EvolverKind& ev, uint64_t master_seed = 0);

// ---- generic Levenberg-Marquardt ----
// Residual function: params -> residual vector. Jacobian by forward differences.
struct LmResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  // (J^T J)^-1 * residual variance
    double rms_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

LmResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& initial, int max_iterations = 200,
    double relative_step_tol = 1e-10);

}  // namespace respca::scan
