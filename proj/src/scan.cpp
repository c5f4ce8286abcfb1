#include "respca/scan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace respca::scan {

namespace {

constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

double gauss(double w, double a, double mu, double s, double b) {
    const double z = (w - mu) / s;
    return a * std::exp(-0.5 * z * z) + b;
}

}  // namespace

double expected_fwhm(double c) {
    // Half-max point of the noiseless native line p(u) = sin^2((pi/2) sqrt(1+u^2))
    // / (1+u^2), u = detuning/(2c): strictly decreasing on [0, sqrt(3)], so the
    // crossing is safe to bisect. FWHM = 4 c u*.
    static const double ustar = [] {
        auto p = [](double u) {
            const double q = std::sqrt(1.0 + u * u);
            const double s = std::sin(1.5707963267948966 * q);
            return s * s / (1.0 + u * u);
        };
        double lo = 0.0, hi = 1.5;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (p(mid) > 0.5 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }();
    return 4.0 * ustar * c;
}

namespace {

// Shared grid evaluator so adaptive stages keep one running shot counter.
std::vector<SpectrumPoint> eval_grid(const engine::SequenceRunner& runner,
                                     const model::DriveParams& p,
                                     const std::vector<double>& grid,
                                     const model::NoiseModel& noise,
                                     uint64_t master_seed, long& point_counter) {
    std::vector<SpectrumPoint> pts;
    pts.reserve(grid.size());
    for (double w : grid) {
        model::DriveParams q = p;
        q.omega = w;
        SpectrumPoint pt;
        pt.omega = w;
        pt.p_success = runner.success(q);
        if (noise.shots) {
            pt.p_success = engine::binomial_sample_mean(
                pt.p_success, *noise.shots, master_seed,
                static_cast<uint64_t>(point_counter));
            pt.std_error =
                std::sqrt(std::max(0.0, pt.p_success * (1.0 - pt.p_success)) /
                          static_cast<double>(*noise.shots));
        }
        ++point_counter;
        pts.push_back(pt);
    }
    return pts;
}

// Local maxima (plateau-aware) with absolute prominence threshold, scipy-style:
// prominence = height - max(lowest point toward the nearest higher ground on
// each side, window edges counting as ground).
std::vector<int> detect_indices(const std::vector<double>& ys, double min_prominence) {
    const int n = static_cast<int>(ys.size());
    std::vector<int> out;
    for (int i = 1; i < n - 1; ++i) {
        if (!(ys[i] > ys[i - 1])) continue;
        int j = i;
        while (j + 1 < n && ys[j + 1] == ys[i]) ++j;
        if (j + 1 >= n || !(ys[j + 1] < ys[i])) continue;
        const int peak = (i + j) / 2;

        double left_min = ys[i];
        for (int k = i - 1; k >= 0; --k) {
            left_min = std::min(left_min, ys[k]);
            if (ys[k] > ys[peak]) break;
        }
        double right_min = ys[j];
        for (int k = j + 1; k < n; ++k) {
            right_min = std::min(right_min, ys[k]);
            if (ys[k] > ys[peak]) break;
        }
        const double prom = ys[peak] - std::max(left_min, right_min);
        if (prom >= min_prominence) out.push_back(peak);
        i = j;
    }
    return out;
}

// Half-max crossing width estimate around a grid argmax, with one-sided
// fallbacks when the window clips the line.
double est_fwhm_grid(const std::vector<SpectrumPoint>& pts, int ipk) {
    const int n = static_cast<int>(pts.size());
    double base = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) base = std::min(base, p.p_success);
    const double half = base + (pts[ipk].p_success - base) / 2.0;
    const double spacing =
        n > 1 ? (pts[n - 1].omega - pts[0].omega) / (n - 1) : 1e-6;

    bool have_lo = false, have_hi = false;
    double lo = 0.0, hi = 0.0;
    for (int j = ipk; j > 0; --j) {
        if (pts[j - 1].p_success < half && half <= pts[j].p_success) {
            const double t = (half - pts[j - 1].p_success) /
                             (pts[j].p_success - pts[j - 1].p_success);
            lo = pts[j - 1].omega + t * (pts[j].omega - pts[j - 1].omega);
            have_lo = true;
            break;
        }
    }
    for (int j = ipk; j < n - 1; ++j) {
        if (pts[j + 1].p_success < half && half <= pts[j].p_success) {
            const double t = (half - pts[j + 1].p_success) /
                             (pts[j].p_success - pts[j + 1].p_success);
            hi = pts[j + 1].omega - t * (pts[j + 1].omega - pts[j].omega);
            have_hi = true;
            break;
        }
    }
    const double center = pts[ipk].omega;
    if (!have_lo && have_hi) return hi > center ? 2.0 * (hi - center) : 2.0 * spacing;
    if (!have_hi && have_lo) return center > lo ? 2.0 * (center - lo) : 2.0 * spacing;
    if (!have_lo || !have_hi || hi <= lo) return 2.0 * spacing;
    return hi - lo;
}

bool sane_fit(double mu, double fwhm, double a, double lo, double hi) {
    return lo <= mu && mu <= hi && fwhm > 0 && fwhm <= 2.0 * (hi - lo) && a > 0;
}

Peak moment_peak(const std::vector<SpectrumPoint>& pts, int ipk) {
    double base = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) base = std::min(base, p.p_success);
    Peak pk;
    pk.center = pts[ipk].omega;
    pk.fwhm = est_fwhm_grid(pts, ipk);
    pk.amplitude = pts[ipk].p_success - base;
    pk.baseline = base;
    pk.converged = false;
    return pk;
}

// Core single-Gaussian fit over an explicit point set.
Peak fit_points(const std::vector<SpectrumPoint>& pts, double window_lo,
                double window_hi) {
    const int n = static_cast<int>(pts.size());
    if (n < 5)
        throw std::invalid_argument("fit_gaussian_peak: needs at least 5 points in window");

    double ymin = pts[0].p_success, ymax = pts[0].p_success;
    int ipk = 0;
    for (int i = 0; i < n; ++i) {
        if (pts[i].p_success > ymax) {
            ymax = pts[i].p_success;
            ipk = i;
        }
        ymin = std::min(ymin, pts[i].p_success);
    }
    Peak pk = moment_peak(pts, ipk);
    if (ymax - ymin <= 0) return pk;  // flat window, nothing to fit

    Eigen::VectorXd th0(4);
    th0 << ymax - ymin, pts[ipk].omega, est_fwhm_grid(pts, ipk) / kFwhmPerSigma, ymin;

    auto residuals = [&pts](const Eigen::VectorXd& th) {
        Eigen::VectorXd r(pts.size());
        for (size_t i = 0; i < pts.size(); ++i)
            r(i) = gauss(pts[i].omega, th(0), th(1), th(2), th(3)) - pts[i].p_success;
        return r;
    };
    const LmResult lm = levenberg_marquardt(residuals, th0);

    const double fwhm = std::abs(lm.params(2)) * kFwhmPerSigma;
    if (lm.converged &&
        sane_fit(lm.params(1), fwhm, lm.params(0), window_lo, window_hi)) {
        pk.amplitude = lm.params(0);
        pk.center = lm.params(1);
        pk.fwhm = fwhm;
        pk.baseline = lm.params(3);
        pk.center_uncertainty = std::sqrt(std::max(0.0, lm.covariance(1, 1)));
        pk.fit_residual = lm.rms_residual;
        pk.converged = true;
    }
    return pk;
}

std::vector<SpectrumPoint> points_in(const Spectrum& spec, double lo, double hi) {
    std::vector<SpectrumPoint> pts;
    for (const auto& p : spec.points)
        if (p.omega >= lo && p.omega <= hi) pts.push_back(p);
    return pts;
}

}  // namespace

Spectrum scan_spectrum(const model::DensityMatrix& rho, const model::DriveParams& p,
                       const std::vector<double>& grid, const model::NoiseModel& noise,
                       const engine::EvolverKind& ev, uint64_t master_seed) {
    if (grid.empty()) throw std::invalid_argument("scan_spectrum: empty grid");
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("scan_spectrum: grid must be strictly increasing");
    noise.validate();
    const engine::SequenceRunner runner(rho, noise, ev, master_seed);
    Spectrum out;
    out.drive = p;
    out.noise = noise;
    out.evolver = ev;
    long counter = 0;
    out.points = eval_grid(runner, p, grid, noise, master_seed, counter);
    return out;
}

std::vector<int> detect_peaks(const Spectrum& spec, double min_prominence) {
    if (spec.points.size() < 3)
        throw std::invalid_argument("detect_peaks: need at least 3 points");
    std::vector<double> ys;
    ys.reserve(spec.points.size());
    for (const auto& p : spec.points) ys.push_back(p.p_success);
    return detect_indices(ys, min_prominence);
}

Peak fit_gaussian_peak(const Spectrum& spec, double window_lo, double window_hi) {
    return fit_points(points_in(spec, window_lo, window_hi), window_lo, window_hi);
}

std::vector<Peak> fit_two_gaussian_peaks(const Spectrum& spec, double window_lo,
                                         double window_hi, int ipk1, int ipk2) {
    const auto& pts = spec.points;
    const int n = static_cast<int>(pts.size());
    if (ipk1 < 0 || ipk2 < 0 || ipk1 >= n || ipk2 >= n || ipk1 == ipk2)
        throw std::invalid_argument("fit_two_gaussian_peaks: bad peak indices");

    double ymin = pts[0].p_success;
    for (const auto& p : pts) ymin = std::min(ymin, p.p_success);

    Eigen::VectorXd th0(7);
    th0 << pts[ipk1].p_success - ymin, pts[ipk1].omega,
        est_fwhm_grid(pts, ipk1) / kFwhmPerSigma, pts[ipk2].p_success - ymin,
        pts[ipk2].omega, est_fwhm_grid(pts, ipk2) / kFwhmPerSigma, ymin;

    auto residuals = [&pts](const Eigen::VectorXd& th) {
        Eigen::VectorXd r(pts.size());
        for (size_t i = 0; i < pts.size(); ++i)
            r(i) = gauss(pts[i].omega, th(0), th(1), th(2), th(6)) +
                   gauss(pts[i].omega, th(3), th(4), th(5), 0.0) - pts[i].p_success;
        return r;
    };
    const LmResult lm = levenberg_marquardt(residuals, th0);

    const double f1 = std::abs(lm.params(2)) * kFwhmPerSigma;
    const double f2 = std::abs(lm.params(5)) * kFwhmPerSigma;
    const bool ok = lm.converged && lm.covariance.allFinite() &&
                    sane_fit(lm.params(1), f1, lm.params(0), window_lo, window_hi) &&
                    sane_fit(lm.params(4), f2, lm.params(3), window_lo, window_hi);
    if (ok) {
        Peak a, b;
        a.amplitude = lm.params(0);
        a.center = lm.params(1);
        a.fwhm = f1;
        a.baseline = lm.params(6);
        a.center_uncertainty = std::sqrt(std::max(0.0, lm.covariance(1, 1)));
        a.fit_residual = lm.rms_residual;
        a.converged = true;
        b.amplitude = lm.params(3);
        b.center = lm.params(4);
        b.fwhm = f2;
        b.baseline = lm.params(6);
        b.center_uncertainty = std::sqrt(std::max(0.0, lm.covariance(4, 4)));
        b.fit_residual = lm.rms_residual;
        b.converged = true;
        if (a.center > b.center) std::swap(a, b);
        return {a, b};
    }

    // Singular or insane joint fit: report the pair as one unresolved blob.
    Peak merged = fit_points(pts, window_lo, window_hi);
    merged.unresolved = true;
    return {merged};
}

AdaptiveSchedule AdaptiveSchedule::default_schedule() {
    AdaptiveSchedule s;
    s.stages = {StageSpec{0.05, 15, 3.0}, StageSpec{0.01, 15, 3.0},
                StageSpec{2e-3, 15, 3.0}, StageSpec{6e-4, 15, 3.0}};
    return s;
}

void AdaptiveSchedule::validate() const {
    if (stages.empty()) throw std::invalid_argument("schedule needs at least one stage");
    for (size_t k = 0; k < stages.size(); ++k) {
        if (!(stages[k].c > 0))
            throw std::invalid_argument("stage drive strength must be positive");
        if (k > 0 && !(stages[k].c < stages[k - 1].c))
            throw std::invalid_argument("stage drive strengths must strictly decrease");
        if (stages[k].points < 5)
            throw std::invalid_argument("stage needs at least 5 points per window");
        if (!(stages[k].kappa > 0))
            throw std::invalid_argument("stage window multiplier must be positive");
    }
    if (!(initial_range.second > initial_range.first))
        throw std::invalid_argument("initial range must be nonempty");
    if (initial_points < 5)
        throw std::invalid_argument("initial stage needs at least 5 points");
    if (!(min_prominence > 0) || min_prominence >= 1)
        throw std::invalid_argument("min_prominence must lie in (0,1)");
    if (min_amplitude_frac < 0 || min_amplitude_frac >= 1)
        throw std::invalid_argument("min_amplitude_frac must lie in [0,1)");
}

namespace {

// Peak detection inside one window: relative prominence and a relative
// amplitude floor that rejects Rabi sidelobes (first sinc sidelobe ~11% of
// the main lobe). Falls back to the window argmax so a window holding a real
// line never comes back empty.
std::vector<int> detect_in_window(const std::vector<SpectrumPoint>& pts,
                                  double prom_rel, double amp_rel) {
    std::vector<double> ys;
    ys.reserve(pts.size());
    double ymin = pts[0].p_success, ymax = pts[0].p_success;
    for (const auto& p : pts) {
        ys.push_back(p.p_success);
        ymin = std::min(ymin, p.p_success);
        ymax = std::max(ymax, p.p_success);
    }
    const double rng = ymax - ymin;
    if (rng <= 0) return {};
    std::vector<int> ipks = detect_indices(ys, prom_rel * rng);
    std::vector<int> kept;
    for (int i : ipks)
        if (ys[i] - ymin >= amp_rel * rng) kept.push_back(i);
    if (kept.empty())
        kept.push_back(static_cast<int>(
            std::max_element(ys.begin(), ys.end()) - ys.begin()));
    return kept;
}

std::vector<Peak> fit_window_peaks(const std::vector<SpectrumPoint>& pts,
                                   const std::vector<int>& ipks, double lo, double hi,
                                   const Spectrum& meta_template) {
    std::vector<Peak> out;
    if (ipks.size() == 2) {
        Spectrum tmp = meta_template;
        tmp.points = pts;
        std::vector<Peak> pair = fit_two_gaussian_peaks(tmp, lo, hi, ipks[0], ipks[1]);
        if (pair.size() == 2) return pair;
        // fall through to independent fits when the joint fit degenerates
    }
    for (int ipk : ipks) {
        const double fw = est_fwhm_grid(pts, ipk);
        const double sub_lo = pts[ipk].omega - 1.5 * fw;
        const double sub_hi = pts[ipk].omega + 1.5 * fw;
        std::vector<SpectrumPoint> sub;
        for (const auto& p : pts)
            if (p.omega >= sub_lo && p.omega <= sub_hi) sub.push_back(p);
        if (sub.size() < 5) {
            // take the 5 grid points nearest the maximum instead
            std::vector<SpectrumPoint> sorted = pts;
            const double cw = pts[ipk].omega;
            std::sort(sorted.begin(), sorted.end(),
                      [cw](const SpectrumPoint& a, const SpectrumPoint& b) {
                          return std::abs(a.omega - cw) < std::abs(b.omega - cw);
                      });
            sorted.resize(std::min<size_t>(5, sorted.size()));
            std::sort(sorted.begin(), sorted.end(),
                      [](const SpectrumPoint& a, const SpectrumPoint& b) {
                          return a.omega < b.omega;
                      });
            sub = std::move(sorted);
        }
        Peak pk = sub.size() >= 5 ? fit_points(sub, lo, hi) : moment_peak(pts, ipk);
        if (!pk.converged) {
            Peak fallback = moment_peak(pts, ipk);
            fallback.unresolved = pk.unresolved;
            pk = fallback;
        }
        out.push_back(pk);
    }
    return out;
}

}  // namespace

AdaptiveResult adaptive_scan(const model::DensityMatrix& rho,
                             const AdaptiveSchedule& schedule,
                             const model::NoiseModel& noise,
                             const engine::EvolverKind& ev, uint64_t master_seed) {
    schedule.validate();
    noise.validate();
    const engine::SequenceRunner runner(rho, noise, ev, master_seed);
    const long samples_per_point = static_cast<long>(runner.samples().size());

    AdaptiveResult result;
    long counter = 0;

    // Scans one window, re-centering up to twice if the maximum sits on an
    // edge (the previous stage's fit can drift by a fraction of its width).
    auto scan_window = [&](double c, double lo, double hi, int npts,
                           std::vector<SpectrumPoint>& all_pts)
        -> std::pair<std::vector<SpectrumPoint>, std::pair<double, double>> {
        model::DriveParams q;
        q.c = c;
        std::vector<SpectrumPoint> pts;
        for (int ext = 0; ext <= 2; ++ext) {
            std::vector<double> grid(npts);
            for (int i = 0; i < npts; ++i)
                grid[i] = lo + (hi - lo) * i / (npts - 1);
            pts = eval_grid(runner, q, grid, noise, master_seed, counter);
            result.total_grid_points += npts;
            all_pts.insert(all_pts.end(), pts.begin(), pts.end());
            int imax = 0;
            for (int i = 1; i < npts; ++i)
                if (pts[i].p_success > pts[imax].p_success) imax = i;
            if (imax == 0)
                lo -= (hi - lo) / 2.0;
            else if (imax == npts - 1)
                hi += (hi - lo) / 2.0;
            else
                break;
        }
        return {pts, {lo, hi}};
    };

    auto finish_stage_log = [&](std::vector<SpectrumPoint>& all_pts, double c) {
        std::sort(all_pts.begin(), all_pts.end(),
                  [](const SpectrumPoint& a, const SpectrumPoint& b) {
                      return a.omega < b.omega;
                  });
        all_pts.erase(std::unique(all_pts.begin(), all_pts.end(),
                                  [](const SpectrumPoint& a, const SpectrumPoint& b) {
                                      return a.omega == b.omega;
                                  }),
                      all_pts.end());
        Spectrum s;
        s.drive.c = c;
        s.noise = noise;
        s.evolver = ev;
        s.points = std::move(all_pts);
        result.stage_spectra.push_back(std::move(s));
    };

    Spectrum meta;
    meta.noise = noise;
    meta.evolver = ev;

    // Stage 0: coarse scan of the full range.
    std::vector<Peak> peaks;
    {
        const StageSpec& st = schedule.stages[0];
        std::vector<SpectrumPoint> stage_pts;
        auto [pts, win] =
            scan_window(st.c, schedule.initial_range.first,
                        schedule.initial_range.second, schedule.initial_points,
                        stage_pts);
        const std::vector<int> ipks =
            detect_in_window(pts, schedule.min_prominence, schedule.min_amplitude_frac);
        meta.drive.c = st.c;
        peaks = fit_window_peaks(pts, ipks, win.first, win.second, meta);
        for (Peak& pk : peaks) pk.stage = 0;
        finish_stage_log(stage_pts, st.c);
        result.last_stage = 0;
    }
    if (schedule.track_rightmost_only && !peaks.empty()) {
        Peak right = peaks[0];
        for (const Peak& pk : peaks)
            if (pk.center > right.center) right = pk;
        peaks = {right};
    }
    if (peaks.empty()) {
        result.aborted = true;
        result.total_repetitions = result.total_grid_points * samples_per_point;
        return result;
    }

    for (size_t k = 1; k < schedule.stages.size(); ++k) {
        const StageSpec& st = schedule.stages[k];
        const double exp_fw = expected_fwhm(st.c);
        std::vector<Peak> next;
        std::vector<SpectrumPoint> stage_pts;
        meta.drive.c = st.c;
        for (const Peak& prev : peaks) {
            // Window rule: kappa times the previous width, clamped to what the
            // new drive strength can actually need, floored so a drifted center
            // still lands inside.
            double half = std::min(st.kappa * prev.fwhm, st.kappa * exp_fw);
            half = std::max(half, 2.0 * exp_fw);
            auto [pts, win] = scan_window(st.c, prev.center - half,
                                          prev.center + half, st.points, stage_pts);
            // Lost track: the window shows no structure on the scale of the
            // line it is supposed to refine. Skipping it (instead of fitting
            // whatever tail ripple remains) lets the stage abort honestly.
            double ymin = pts[0].p_success, ymax = pts[0].p_success;
            for (const auto& sp : pts) {
                ymin = std::min(ymin, sp.p_success);
                ymax = std::max(ymax, sp.p_success);
            }
            if (ymax - ymin < 1e-6 * prev.amplitude) continue;
            const std::vector<int> ipks = detect_in_window(
                pts, schedule.min_prominence, schedule.min_amplitude_frac);
            std::vector<Peak> got =
                fit_window_peaks(pts, ipks, win.first, win.second, meta);
            for (Peak& pk : got) pk.stage = static_cast<int>(k);
            next.insert(next.end(), got.begin(), got.end());
        }
        finish_stage_log(stage_pts, st.c);

        // Windows of neighboring peaks can rediscover the same line; keep the
        // stronger fit when two centers agree within half a linewidth.
        std::sort(next.begin(), next.end(),
                  [](const Peak& a, const Peak& b) { return a.center < b.center; });
        std::vector<Peak> dedup;
        for (const Peak& pk : next) {
            if (!dedup.empty() &&
                std::abs(pk.center - dedup.back().center) <
                    0.5 * std::max(pk.fwhm, dedup.back().fwhm)) {
                if (pk.amplitude > dedup.back().amplitude) dedup.back() = pk;
            } else {
                dedup.push_back(pk);
            }
        }
        if (schedule.track_rightmost_only && !dedup.empty()) {
            Peak right = dedup[0];
            for (const Peak& pk : dedup)
                if (pk.center > right.center) right = pk;
            dedup = {right};
        }
        if (dedup.empty()) {
            result.aborted = true;
            break;  // keep the last good stage's peaks
        }
        peaks = std::move(dedup);
        result.last_stage = static_cast<int>(k);
    }

    result.peaks = std::move(peaks);
    std::sort(result.peaks.begin(), result.peaks.end(),
              [](const Peak& a, const Peak& b) { return a.center < b.center; });
    result.total_repetitions = result.total_grid_points * samples_per_point;
    return result;
}

LmResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& initial, int max_iterations, double relative_step_tol) {
    LmResult out;
    out.params = initial;
    const int np = static_cast<int>(initial.size());

    Eigen::VectorXd r = residuals(out.params);
    double cost = r.squaredNorm();
    const int m = static_cast<int>(r.size());

    auto jacobian = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& r0) {
        Eigen::MatrixXd j(r0.size(), np);
        for (int k = 0; k < np; ++k) {
            const double h = 1e-7 * std::max(std::abs(th(k)), 1e-7);
            Eigen::VectorXd tp = th;
            tp(k) += h;
            j.col(k) = (residuals(tp) - r0) / h;
        }
        return j;
    };

    double lambda = 1e-3;
    Eigen::MatrixXd jtj;
    for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
        const Eigen::MatrixXd j = jacobian(out.params, r);
        jtj = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * r;

        bool stepped = false;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd a = jtj;
            for (int d = 0; d < np; ++d)
                a(d, d) += lambda * std::max(jtj(d, d), 1e-12);
            const Eigen::VectorXd dx = a.ldlt().solve(-g);
            if (!dx.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd cand = out.params + dx;
            const Eigen::VectorXd rc = residuals(cand);
            const double cc = rc.squaredNorm();
            if (cc < cost) {
                const double step = dx.norm();
                const double scale = out.params.norm() + relative_step_tol;
                const double gain = cost - cc;
                out.params = cand;
                r = rc;
                cost = cc;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (step <= relative_step_tol * scale) out.converged = true;
                // cost stagnation: accepted steps that no longer pay off
                if (gain <= 1e-12 * std::max(cc, 1e-30)) out.converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e14) break;
        }
        if (!stepped && g.norm() <= 1e-9 * std::max(1.0, std::sqrt(cost)))
            out.converged = true;  // stuck at a (near-)zero-gradient point
        if (out.converged || !stepped) break;
    }

    // Covariance from the final Jacobian, scaled by the residual variance.
    const Eigen::MatrixXd j = jacobian(out.params, r);
    jtj = j.transpose() * j;
    const double dof = std::max(1, m - np);
    const double var = cost / dof;
    const Eigen::MatrixXd inv =
        jtj.fullPivLu().isInvertible()
            ? Eigen::MatrixXd(jtj.inverse())
            : Eigen::MatrixXd::Constant(np, np,
                                        std::numeric_limits<double>::quiet_NaN());
    out.covariance = inv * var;
    out.rms_residual = std::sqrt(cost / std::max(1, m));
    return out;
}

}  // namespace respca::scan
