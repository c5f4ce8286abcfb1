#include "respca/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace respca::io {

using nlohmann::json;

void RunConfig::resolve_and_validate() {
    try {
        if (noise_calibrated_nv)
            noise.sigma_delta = nvmap::calibrated_sigma_delta(nv);
        drive.validate();
        noise.validate();
        evolver.validate();
        nv.validate();
        schedule.validate();
        if (rho_source.empty()) throw std::invalid_argument("rho_source must not be empty");
        if (spectrum.points < 1)
            throw std::invalid_argument("spectrum.points must be >= 1");
        if (spectrum.points > 1 && !(spectrum.omega_max > spectrum.omega_min))
            throw std::invalid_argument("spectrum omega range must be nonempty");
        if (ddstudy.c_list.empty() || ddstudy.m_list.empty())
            throw std::invalid_argument("ddstudy c_list and m_list must be nonempty");
        for (double c : ddstudy.c_list)
            if (!(c > 0)) throw std::invalid_argument("ddstudy c values must be positive");
        for (int m : ddstudy.m_list)
            if (m < 0) throw std::invalid_argument("ddstudy echo orders must be >= 0");
        if (ddstudy.points < 5)
            throw std::invalid_argument("ddstudy.points must be >= 5");
        if (!(ddstudy.window_fwhm > 0))
            throw std::invalid_argument("ddstudy.window_fwhm must be positive");
        if (ddstudy.mc_samples < 1)
            throw std::invalid_argument("ddstudy.mc_samples must be >= 1");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RunConfig default_config() { return RunConfig{}; }

namespace {

[[noreturn]] void config_fail(const std::string& what) { throw ConfigError(what); }

double expect_number(const json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number())
        config_fail("expected a number at '" + key + "'");
    return j.at(key).get<double>();
}

void read_if(const json& j, const char* key, double& out) {
    if (j.contains(key)) {
        if (!j.at(key).is_number()) config_fail(std::string("'") + key + "' must be a number");
        out = j.at(key).get<double>();
    }
}

void read_if(const json& j, const char* key, int& out) {
    if (j.contains(key)) {
        if (!j.at(key).is_number_integer())
            config_fail(std::string("'") + key + "' must be an integer");
        out = j.at(key).get<int>();
    }
}

void read_if(const json& j, const char* key, long& out) {
    if (j.contains(key)) {
        if (!j.at(key).is_number_integer())
            config_fail(std::string("'") + key + "' must be an integer");
        out = j.at(key).get<long>();
    }
}

void read_if(const json& j, const char* key, bool& out) {
    if (j.contains(key)) {
        if (!j.at(key).is_boolean()) config_fail(std::string("'") + key + "' must be a boolean");
        out = j.at(key).get<bool>();
    }
}

void read_if(const json& j, const char* key, std::string& out) {
    if (j.contains(key)) {
        if (!j.at(key).is_string()) config_fail(std::string("'") + key + "' must be a string");
        out = j.at(key).get<std::string>();
    }
}

constexpr double kMega = 1e6;
constexpr double kMicro = 1e-6;
constexpr double kTwoPi = 2.0 * nvmap::kPi;

void apply_noise_json(RunConfig& cfg, const json& jn) {
    if (jn.is_string()) {
        if (jn.get<std::string>() != "calibrated-nv")
            config_fail("noise string must be \"calibrated-nv\"");
        cfg.noise_calibrated_nv = true;
        return;
    }
    if (!jn.is_object()) config_fail("'noise' must be an object or \"calibrated-nv\"");
    if (jn.contains("sigma_delta")) {
        const json& js = jn.at("sigma_delta");
        if (js.is_string()) {
            if (js.get<std::string>() != "calibrated-nv")
                config_fail("noise.sigma_delta string must be \"calibrated-nv\"");
            cfg.noise_calibrated_nv = true;
        } else if (js.is_number()) {
            cfg.noise.sigma_delta = js.get<double>();
            cfg.noise_calibrated_nv = false;
        } else {
            config_fail("noise.sigma_delta must be a number or \"calibrated-nv\"");
        }
    }
    // Resolved documents carry both the numeric sigma and this flag; honor the
    // flag so a re-loaded meta file keeps tracking the nv parameters.
    read_if(jn, "calibrated_nv", cfg.noise_calibrated_nv);
    if (jn.contains("averaging")) {
        const json& ja = jn.at("averaging");
        std::string kind;
        if (!ja.is_object() || !ja.contains("kind") || !ja.at("kind").is_string())
            config_fail("noise.averaging needs a 'kind' string");
        kind = ja.at("kind").get<std::string>();
        if (kind == "gauss-hermite") {
            model::GaussHermiteAveraging gh;
            read_if(ja, "order", gh.order);
            cfg.noise.averaging = gh;
        } else if (kind == "monte-carlo") {
            model::MonteCarloAveraging mc;
            read_if(ja, "samples", mc.samples);
            cfg.noise.averaging = mc;
        } else {
            config_fail("noise.averaging.kind must be gauss-hermite or monte-carlo");
        }
    }
    if (jn.contains("shots")) {
        if (jn.at("shots").is_null()) {
            cfg.noise.shots.reset();
        } else if (jn.at("shots").is_number_integer()) {
            cfg.noise.shots = jn.at("shots").get<long>();
        } else {
            config_fail("noise.shots must be an integer or null");
        }
    }
}

void apply_nv_json(RunConfig& cfg, const json& jn) {
    if (!jn.is_object()) config_fail("'nv' must be an object");
    auto angular_mhz = [&](const char* key, double& out) {
        if (jn.contains(key)) out = kTwoPi * expect_number(jn, key) * kMega;
    };
    angular_mhz("f_map_mhz", cfg.nv.f_map);
    angular_mhz("gamma_e_mhz_per_g", cfg.nv.gamma_e);
    angular_mhz("a_par_c_mhz", cfg.nv.a_par_c);
    angular_mhz("a_par_n_mhz", cfg.nv.a_par_n);
    if (jn.contains("t2e_star_us")) cfg.nv.t2e_star = expect_number(jn, "t2e_star_us") * kMicro;
    read_if(jn, "theta_prime", cfg.nv.theta_prime);
    read_if(jn, "calibration", cfg.nv.calibration);
    if (jn.contains("laser")) {
        const json& jl = jn.at("laser");
        if (!jl.is_object()) config_fail("'nv.laser' must be an object");
        if (jl.contains("t2_us")) cfg.nv.laser.t2_laser = expect_number(jl, "t2_us") * kMicro;
        if (jl.contains("t1_us")) cfg.nv.laser.t1_laser = expect_number(jl, "t1_us") * kMicro;
        if (jl.contains("duration_us"))
            cfg.nv.laser.duration = expect_number(jl, "duration_us") * kMicro;
    }
}

}  // namespace

void apply_config_json(RunConfig& cfg, const json& j) {
    if (!j.is_object()) config_fail("config document must be a JSON object");
    if (j.contains("format_version") &&
        j.at("format_version").get<int>() != kFormatVersion)
        config_fail("unsupported format_version (expected " +
                    std::to_string(kFormatVersion) + ")");

    read_if(j, "rho_source", cfg.rho_source);
    if (j.contains("drive")) {
        const json& jd = j.at("drive");
        if (!jd.is_object()) config_fail("'drive' must be an object");
        read_if(jd, "omega", cfg.drive.omega);
        read_if(jd, "c", cfg.drive.c);
        if (jd.contains("tau")) {
            if (jd.at("tau").is_null())
                cfg.drive.tau.reset();
            else
                cfg.drive.tau = expect_number(jd, "tau");
        }
        read_if(jd, "echo_order", cfg.drive.echo_order);
        read_if(jd, "trotter_steps", cfg.drive.trotter_steps);
    }
    if (j.contains("noise")) apply_noise_json(cfg, j.at("noise"));
    if (j.contains("evolver")) {
        if (!j.at("evolver").is_string()) config_fail("'evolver' must be a string");
        try {
            cfg.evolver = engine::EvolverKind::parse(j.at("evolver").get<std::string>());
        } catch (const std::invalid_argument& e) {
            config_fail(e.what());
        }
    }
    if (j.contains("nv")) apply_nv_json(cfg, j.at("nv"));
    if (j.contains("prep")) {
        const json& jp = j.at("prep");
        if (!jp.is_object()) config_fail("'prep' must be an object");
        if (jp.contains("theta1_over_pi"))
            cfg.prep_theta1 = expect_number(jp, "theta1_over_pi") * nvmap::kPi;
        if (jp.contains("theta2_over_pi"))
            cfg.prep_theta2 = expect_number(jp, "theta2_over_pi") * nvmap::kPi;
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer()) config_fail("'seed' must be an integer");
        cfg.seed = j.at("seed").get<uint64_t>();
    }
    read_if(j, "output_dir", cfg.output_dir);

    if (j.contains("spectrum")) {
        const json& js = j.at("spectrum");
        if (!js.is_object()) config_fail("'spectrum' must be an object");
        read_if(js, "omega_min", cfg.spectrum.omega_min);
        read_if(js, "omega_max", cfg.spectrum.omega_max);
        read_if(js, "points", cfg.spectrum.points);
    }
    if (j.contains("schedule")) cfg.schedule = schedule_from_json(j.at("schedule"));
    if (j.contains("ddstudy")) {
        const json& jd = j.at("ddstudy");
        if (!jd.is_object()) config_fail("'ddstudy' must be an object");
        if (jd.contains("c_list")) {
            if (!jd.at("c_list").is_array()) config_fail("ddstudy.c_list must be an array");
            cfg.ddstudy.c_list = jd.at("c_list").get<std::vector<double>>();
        }
        if (jd.contains("m_list")) {
            if (!jd.at("m_list").is_array()) config_fail("ddstudy.m_list must be an array");
            cfg.ddstudy.m_list = jd.at("m_list").get<std::vector<int>>();
        }
        read_if(jd, "points", cfg.ddstudy.points);
        read_if(jd, "window_fwhm", cfg.ddstudy.window_fwhm);
        read_if(jd, "mc_samples", cfg.ddstudy.mc_samples);
    }
}

RunConfig load_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        config_fail("failed to parse config '" + path + "': " + e.what());
    }
    // A command's meta file embeds the config under "config"; accept it too.
    if (j.is_object() && j.contains("config")) j = j.at("config");
    RunConfig cfg;
    try {
        apply_config_json(cfg, j);
    } catch (const json::exception& e) {
        config_fail("bad config '" + path + "': " + e.what());
    }
    return cfg;
}

json resolved_config_json(const RunConfig& cfg) {
    json j;
    j["format_version"] = kFormatVersion;
    j["rho_source"] = cfg.rho_source;
    j["drive"] = {{"omega", cfg.drive.omega},
                  {"c", cfg.drive.c},
                  {"tau", cfg.drive.tau ? json(*cfg.drive.tau) : json(nullptr)},
                  {"echo_order", cfg.drive.echo_order},
                  {"trotter_steps", cfg.drive.trotter_steps}};
    json ja;
    if (cfg.noise.is_monte_carlo()) {
        ja = {{"kind", "monte-carlo"},
              {"samples", std::get<model::MonteCarloAveraging>(cfg.noise.averaging).samples}};
    } else {
        ja = {{"kind", "gauss-hermite"},
              {"order", std::get<model::GaussHermiteAveraging>(cfg.noise.averaging).order}};
    }
    j["noise"] = {{"sigma_delta", cfg.noise.sigma_delta},
                  {"calibrated_nv", cfg.noise_calibrated_nv},
                  {"averaging", ja},
                  {"shots", cfg.noise.shots ? json(*cfg.noise.shots) : json(nullptr)}};
    j["evolver"] = cfg.evolver.to_string();
    j["nv"] = {{"f_map_mhz", cfg.nv.f_map / (kTwoPi * kMega)},
               {"gamma_e_mhz_per_g", cfg.nv.gamma_e / (kTwoPi * kMega)},
               {"t2e_star_us", cfg.nv.t2e_star / kMicro},
               {"a_par_c_mhz", cfg.nv.a_par_c / (kTwoPi * kMega)},
               {"a_par_n_mhz", cfg.nv.a_par_n / (kTwoPi * kMega)},
               {"theta_prime", cfg.nv.theta_prime},
               {"calibration", cfg.nv.calibration},
               {"laser",
                {{"t2_us", cfg.nv.laser.t2_laser / kMicro},
                 {"t1_us", cfg.nv.laser.t1_laser / kMicro},
                 {"duration_us", cfg.nv.laser.duration / kMicro}}}};
    j["prep"] = {{"theta1_over_pi", cfg.prep_theta1 / nvmap::kPi},
                 {"theta2_over_pi", cfg.prep_theta2 / nvmap::kPi}};
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["spectrum"] = {{"omega_min", cfg.spectrum.omega_min},
                     {"omega_max", cfg.spectrum.omega_max},
                     {"points", cfg.spectrum.points}};
    j["schedule"] = schedule_json(cfg.schedule);
    j["ddstudy"] = {{"c_list", cfg.ddstudy.c_list},
                    {"m_list", cfg.ddstudy.m_list},
                    {"points", cfg.ddstudy.points},
                    {"window_fwhm", cfg.ddstudy.window_fwhm},
                    {"mc_samples", cfg.ddstudy.mc_samples}};
    return j;
}

model::DensityMatrix density_matrix_from_json(const json& j) {
    if (!j.is_object() || !j.contains("dim") || !j.contains("re"))
        config_fail("density matrix document needs 'dim' and 're'");
    const int n = j.at("dim").get<int>();
    if (n < 1 || n > qmath::kMaxDim) config_fail("density matrix dim out of range [1, 64]");
    qmath::Matrix m = qmath::Matrix::Zero(n, n);
    const json& re = j.at("re");
    const json* im = j.contains("im") && !j.at("im").is_null() ? &j.at("im") : nullptr;
    if (!re.is_array() || static_cast<int>(re.size()) != n ||
        (im && (!im->is_array() || static_cast<int>(im->size()) != n)))
        config_fail("density matrix 're'/'im' must be dim x dim arrays");
    for (int r = 0; r < n; ++r) {
        const json& rr = re.at(r);
        if (!rr.is_array() || static_cast<int>(rr.size()) != n)
            config_fail("density matrix 're'/'im' must be dim x dim arrays");
        for (int c = 0; c < n; ++c) {
            double real = rr.at(c).get<double>();
            double imag = 0.0;
            if (im) imag = im->at(r).at(c).get<double>();
            m(r, c) = qmath::Complex(real, imag);
        }
    }

    // File tolerance is looser than the in-memory invariant: accept 1e-8
    // drift, repair it, then revalidate strictly.
    if ((m - m.adjoint()).norm() > 1e-8 * std::max(1.0, m.norm()))
        config_fail("density matrix is not Hermitian within 1e-8");
    m = ((m + m.adjoint()) / 2.0).eval();  // eval: adjoint aliases its source
    const double tr = m.trace().real();
    if (std::abs(tr - 1.0) > 1e-8) config_fail("density matrix trace differs from 1 beyond 1e-8");
    m /= tr;
    qmath::HermitianEig eig = qmath::hermitian_eig(m);
    if (eig.eigenvalues(0) < -1e-8)
        config_fail("density matrix has a negative eigenvalue beyond 1e-8");
    if (eig.eigenvalues(0) < 0) {
        qmath::Matrix d = qmath::Matrix::Zero(n, n);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += std::max(0.0, eig.eigenvalues(i));
        for (int i = 0; i < n; ++i)
            d(i, i) = std::max(0.0, eig.eigenvalues(i)) / s;
        m = eig.eigenvectors * d * eig.eigenvectors.adjoint();
    }
    try {
        return model::DensityMatrix::validated(m);
    } catch (const std::invalid_argument& e) {
        config_fail(std::string("density matrix invalid after repair: ") + e.what());
    }
}

model::DensityMatrix load_density_matrix(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        config_fail("failed to parse density matrix '" + path + "': " + e.what());
    }
    try {
        return density_matrix_from_json(j);
    } catch (const json::exception& e) {
        config_fail("bad density matrix '" + path + "': " + e.what());
    }
}

json density_matrix_json(const model::DensityMatrix& dm) {
    json re = json::array(), im = json::array();
    for (int r = 0; r < dm.dim; ++r) {
        json rr = json::array(), ri = json::array();
        for (int c = 0; c < dm.dim; ++c) {
            rr.push_back(dm.matrix(r, c).real());
            ri.push_back(dm.matrix(r, c).imag());
        }
        re.push_back(rr);
        im.push_back(ri);
    }
    return {{"format_version", kFormatVersion}, {"dim", dm.dim}, {"re", re}, {"im", im}};
}

scan::AdaptiveSchedule schedule_from_json(const json& j) {
    if (!j.is_object()) config_fail("schedule must be a JSON object");
    scan::AdaptiveSchedule s;
    if (j.contains("stages")) {
        if (!j.at("stages").is_array()) config_fail("schedule.stages must be an array");
        s.stages.clear();
        for (const json& js : j.at("stages")) {
            scan::StageSpec st;
            st.c = expect_number(js, "c");
            read_if(js, "points", st.points);
            read_if(js, "kappa", st.kappa);
            s.stages.push_back(st);
        }
    }
    if (j.contains("initial_range")) {
        const json& jr = j.at("initial_range");
        if (!jr.is_array() || jr.size() != 2)
            config_fail("schedule.initial_range must be [lo, hi]");
        s.initial_range = {jr.at(0).get<double>(), jr.at(1).get<double>()};
    }
    read_if(j, "initial_points", s.initial_points);
    read_if(j, "min_prominence", s.min_prominence);
    read_if(j, "min_amplitude_frac", s.min_amplitude_frac);
    read_if(j, "track_rightmost_only", s.track_rightmost_only);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        config_fail(e.what());
    }
    return s;
}

scan::AdaptiveSchedule load_schedule(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        config_fail("failed to parse schedule '" + path + "': " + e.what());
    }
    try {
        return schedule_from_json(j);
    } catch (const json::exception& e) {
        config_fail("bad schedule '" + path + "': " + e.what());
    }
}

json schedule_json(const scan::AdaptiveSchedule& s) {
    json stages = json::array();
    for (const auto& st : s.stages)
        stages.push_back({{"c", st.c}, {"points", st.points}, {"kappa", st.kappa}});
    return {{"stages", stages},
            {"initial_range", {s.initial_range.first, s.initial_range.second}},
            {"initial_points", s.initial_points},
            {"min_prominence", s.min_prominence},
            {"min_amplitude_frac", s.min_amplitude_frac},
            {"track_rightmost_only", s.track_rightmost_only}};
}

json peak_json(const scan::Peak& p) {
    return {{"center", p.center},
            {"fwhm", p.fwhm},
            {"amplitude", p.amplitude},
            {"baseline", p.baseline},
            {"center_uncertainty", p.center_uncertainty},
            {"fit_residual", p.fit_residual},
            {"converged", p.converged},
            {"unresolved", p.unresolved},
            {"stage", p.stage}};
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string spectrum_csv(const scan::Spectrum& spec) {
    std::ostringstream out;
    out << "omega,p_success,std_error\n";
    for (const auto& pt : spec.points)
        out << format_number(pt.omega) << ',' << format_number(pt.p_success) << ','
            << format_number(pt.std_error) << '\n';
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw ConfigError("failed while writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace respca::io
