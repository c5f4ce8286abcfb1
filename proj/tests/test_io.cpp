#include <doctest.h>

#include "respca/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

using namespace respca;
using nlohmann::json;

namespace {

// Each test writes into its own throwaway directory under the system tmp.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("respca_io_" + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_json(const TempDir& dir, const std::string& name, const json& j) {
    const std::string p = dir.file(name);
    io::write_text_file(p, j.dump(2));
    return p;
}

// Recursive comparison with a relative tolerance on numbers. The config
// document stores the nv block in MHz/us, and that unit conversion can move
// the last bit, so document equality is semantic on the first reload and
// byte-exact only from then on.
bool json_close(const json& a, const json& b, double rtol = 1e-12) {
    if (a.type() != b.type()) {
        if (a.is_number() && b.is_number()) {
            const double x = a.get<double>(), y = b.get<double>();
            return std::abs(x - y) <= rtol * std::max({1.0, std::abs(x), std::abs(y)});
        }
        return false;
    }
    if (a.is_object()) {
        if (a.size() != b.size()) return false;
        for (auto it = a.begin(); it != a.end(); ++it)
            if (!b.contains(it.key()) || !json_close(it.value(), b.at(it.key()), rtol))
                return false;
        return true;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) return false;
        for (size_t i = 0; i < a.size(); ++i)
            if (!json_close(a.at(i), b.at(i), rtol)) return false;
        return true;
    }
    if (a.is_number()) {
        const double x = a.get<double>(), y = b.get<double>();
        return std::abs(x - y) <= rtol * std::max({1.0, std::abs(x), std::abs(y)});
    }
    return a == b;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("default config resolves the calibrated detuning noise") {
    io::RunConfig cfg = io::default_config();
    CHECK(cfg.noise_calibrated_nv);
    cfg.resolve_and_validate();
    CHECK(cfg.noise.sigma_delta ==
          doctest::Approx(nvmap::calibrated_sigma_delta(cfg.nv)).epsilon(1e-15));
    CHECK(cfg.noise.sigma_delta == doctest::Approx(8.519013e-5).epsilon(1e-6));

    // the calibration tracks the nv parameters on re-resolution
    cfg.nv.t2e_star *= 2.0;
    cfg.resolve_and_validate();
    CHECK(cfg.noise.sigma_delta == doctest::Approx(8.519013e-5 / 2).epsilon(1e-6));

    // an explicit numeric sigma is left alone
    io::RunConfig manual = io::default_config();
    manual.noise_calibrated_nv = false;
    manual.noise.sigma_delta = 3e-4;
    manual.resolve_and_validate();
    CHECK(manual.noise.sigma_delta == 3e-4);
}

TEST_CASE("resolved config survives load round-trips") {
    io::RunConfig cfg = io::default_config();
    cfg.resolve_and_validate();
    const json j1 = io::resolved_config_json(cfg);

    io::RunConfig b2;
    io::apply_config_json(b2, j1);
    b2.resolve_and_validate();
    const json j2 = io::resolved_config_json(b2);
    CHECK(json_close(j1, j2));

    // after one normalization the document is bit-stable
    io::RunConfig b3;
    io::apply_config_json(b3, j2);
    b3.resolve_and_validate();
    CHECK(io::resolved_config_json(b3).dump() == j2.dump());
}

TEST_CASE("non-default fields also survive the round-trip") {
    io::RunConfig cfg = io::default_config();
    cfg.rho_source = "some/rho.json";
    cfg.drive = {0.31, 2.5e-4, 1234.5, 2, 128};
    cfg.noise_calibrated_nv = false;
    cfg.noise.sigma_delta = 4.2e-4;
    cfg.noise.averaging = model::MonteCarloAveraging{5000};
    cfg.noise.shots = 750;
    cfg.evolver = engine::EvolverKind::parse("dme:32");
    cfg.nv.calibration = 0.25;
    cfg.nv.theta_prime = 0.1;
    cfg.prep_theta1 = 0.5 * nvmap::kPi;
    cfg.seed = 99;
    cfg.output_dir = "elsewhere";
    cfg.spectrum = {0.2, 0.6, 11};
    cfg.schedule.stages = {{0.02, 21, 2.5}, {1e-3, 15, 3.0}};
    cfg.schedule.track_rightmost_only = true;
    cfg.ddstudy.c_list = {1e-3};
    cfg.ddstudy.m_list = {0, 2};
    cfg.ddstudy.mc_samples = 4321;
    cfg.resolve_and_validate();

    const json j1 = io::resolved_config_json(cfg);
    io::RunConfig back;
    io::apply_config_json(back, j1);
    back.resolve_and_validate();
    const json j2 = io::resolved_config_json(back);
    CHECK(json_close(j1, j2));
    CHECK_FALSE(back.noise_calibrated_nv);
    CHECK(back.noise.sigma_delta == 4.2e-4);  // explicit sigma passes verbatim
    CHECK(back.noise.shots.has_value());
    CHECK(*back.noise.shots == 750);
    CHECK(back.evolver.to_string() == "dme:32");
    CHECK(back.schedule.track_rightmost_only);
    CHECK(back.drive.tau.has_value());
    CHECK(*back.drive.tau == 1234.5);

    io::RunConfig b3;
    io::apply_config_json(b3, j2);
    b3.resolve_and_validate();
    CHECK(io::resolved_config_json(b3).dump() == j2.dump());
}

TEST_CASE("meta documents load through their embedded config") {
    TempDir dir;
    io::RunConfig cfg = io::default_config();
    cfg.seed = 4242;
    cfg.resolve_and_validate();
    const json meta = {{"format_version", io::kFormatVersion},
                       {"command", "spectrum"},
                       {"config", io::resolved_config_json(cfg)},
                       {"wall_time_s", 0.1},
                       {"outputs", json::array()}};
    const std::string path = write_json(dir, "spectrum.meta.json", meta);

    io::RunConfig back = io::load_config(path);
    back.resolve_and_validate();
    CHECK(back.seed == 4242);
    CHECK(json_close(io::resolved_config_json(back), io::resolved_config_json(cfg)));
}

TEST_CASE("malformed config documents raise config errors") {
    TempDir dir;
    auto loads = [&](const std::string& text) {
        const std::string p = dir.file("bad.json");
        io::write_text_file(p, text);
        return io::load_config(p);
    };
    CHECK_THROWS_AS(loads("not json at all"), io::ConfigError);
    CHECK_THROWS_AS(loads("[1,2,3]"), io::ConfigError);
    CHECK_THROWS_AS(loads("{\"format_version\": 99}"), io::ConfigError);
    CHECK_THROWS_AS(loads("{\"drive\": 3}"), io::ConfigError);
    CHECK_THROWS_AS(loads("{\"drive\": {\"c\": \"strong\"}}"), io::ConfigError);
    CHECK_THROWS_AS(loads("{\"evolver\": \"magic\"}"), io::ConfigError);
    CHECK_THROWS_AS(loads("{\"evolver\": 7}"), io::ConfigError);
    CHECK_THROWS_AS(loads("{\"noise\": {\"sigma_delta\": \"big\"}}"), io::ConfigError);
    CHECK_THROWS_AS(loads("{\"noise\": {\"averaging\": {\"kind\": \"dice\"}}}"),
                    io::ConfigError);
    CHECK_THROWS_AS(loads("{\"noise\": {\"shots\": 1.5}}"), io::ConfigError);
    CHECK_THROWS_AS(loads("{\"seed\": \"seven\"}"), io::ConfigError);
    CHECK_THROWS_AS(io::load_config(dir.file("missing.json")), io::ConfigError);

    // structurally fine but semantically invalid: caught at resolve time
    io::RunConfig cfg = io::default_config();
    io::apply_config_json(cfg, json::parse("{\"drive\": {\"c\": -1.0}}"));
    CHECK_THROWS_AS(cfg.resolve_and_validate(), io::ConfigError);
}

TEST_CASE("density matrix json round-trips exactly") {
    const auto rho = model::paper_density_matrix();
    const json j = io::density_matrix_json(rho);
    CHECK(j.at("dim") == 4);
    const auto back = io::density_matrix_from_json(j);
    CHECK((back.matrix - rho.matrix).cwiseAbs().maxCoeff() < 1e-14);

    // a purely real document may omit the imaginary part
    json real_only = j;
    real_only.erase("im");
    const auto real_back = io::density_matrix_from_json(real_only);
    CHECK((real_back.matrix - rho.matrix.real().cast<qmath::Complex>())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
}

TEST_CASE("sub-tolerance drift in a density matrix file is repaired") {
    const auto rho = model::paper_density_matrix();

    json drifted = io::density_matrix_json(rho);
    drifted["re"][0][0] = rho.matrix(0, 0).real() + 4e-9;  // trace 1 + 4e-9
    const auto fixed = io::density_matrix_from_json(drifted);
    CHECK(fixed.matrix.trace().real() == doctest::Approx(1.0).epsilon(1e-14));

    json skewed = io::density_matrix_json(rho);
    skewed["re"][0][1] = rho.matrix(0, 1).real() + 4e-9;  // hermiticity 4e-9
    const auto sym = io::density_matrix_from_json(skewed);
    CHECK((sym.matrix - sym.matrix.adjoint()).norm() < 1e-15);

    // a slightly negative eigenvalue gets clamped and renormalized
    json dipped = {{"dim", 2},
                   {"re", {{-4e-9, 0.0}, {0.0, 1.0 + 4e-9}}},
                   {"im", {{0.0, 0.0}, {0.0, 0.0}}}};
    const auto clamped = io::density_matrix_from_json(dipped);
    CHECK(clamped.matrix(0, 0).real() >= 0.0);
    CHECK(clamped.matrix.trace().real() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("density matrix violations beyond tolerance are rejected") {
    const auto rho = model::paper_density_matrix();
    auto reject = [&](json j) {
        CHECK_THROWS_AS(io::density_matrix_from_json(j), io::ConfigError);
    };

    json trace_off = io::density_matrix_json(rho);
    trace_off["re"][0][0] = rho.matrix(0, 0).real() + 1e-6;
    reject(trace_off);

    json herm_off = io::density_matrix_json(rho);
    herm_off["re"][0][1] = rho.matrix(0, 1).real() + 1e-6;
    reject(herm_off);

    reject({{"dim", 2}, {"re", {{-1e-6, 0.0}, {0.0, 1.0 + 1e-6}}}});
    reject({{"dim", 0}, {"re", json::array()}});
    reject({{"dim", 65}, {"re", json::array()}});
    reject({{"dim", 2}, {"re", {{1.0, 0.0}}}});  // ragged
    reject({{"dim", 2}});                        // missing re
    reject(json::array());
}

TEST_CASE("schedule json round-trips and validation rejects bad schedules") {
    const auto sched = scan::AdaptiveSchedule::default_schedule();
    const json j = io::schedule_json(sched);
    const auto back = io::schedule_from_json(j);
    CHECK(io::schedule_json(back).dump() == j.dump());

    TempDir dir;
    const std::string p = write_json(dir, "schedule.json", j);
    const auto loaded = io::load_schedule(p);
    CHECK(io::schedule_json(loaded).dump() == j.dump());

    auto reject = [](json bad) {
        CHECK_THROWS_AS(io::schedule_from_json(bad), io::ConfigError);
    };
    reject(json::parse("{\"stages\": []}"));
    reject(json::parse("{\"stages\": [{\"c\": -0.1}]}"));
    reject(json::parse("{\"stages\": [{\"c\": 0.01}, {\"c\": 0.01}]}"));  // not decreasing
    reject(json::parse("{\"stages\": [{\"c\": 0.01, \"points\": 3}]}"));
    reject(json::parse("{\"stages\": [{\"c\": 0.01}], \"initial_range\": [1.0, 0.0]}"));
    reject(json::parse("{\"stages\": [{\"c\": 0.01}], \"min_prominence\": 1.5}"));
    reject(json::parse("{\"stages\": [{\"c\": 0.01}], \"initial_range\": [0.0]}"));
}

TEST_CASE("numbers render with 12 significant digits") {
    CHECK(io::format_number(1.0) == "1");
    CHECK(io::format_number(0.5) == "0.5");
    CHECK(io::format_number(0.45492855684535904) == "0.454928556845");
    CHECK(io::format_number(1.23456789012345e-7) == "1.23456789012e-07");
    CHECK(io::format_number(0.0) == "0");
    CHECK(io::format_number(-2.5e-300) == "-2.5e-300");
}

TEST_CASE("spectrum csv layout is stable") {
    scan::Spectrum spec;
    spec.points.push_back({0.25, 0.0625, 0.0});
    spec.points.push_back({0.45492855684535904, 0.454, 0.003});
    CHECK(io::spectrum_csv(spec) ==
          "omega,p_success,std_error\n"
          "0.25,0.0625,0\n"
          "0.454928556845,0.454,0.003\n");
}

TEST_CASE("text files round-trip and missing files throw") {
    TempDir dir;
    const std::string p = dir.file("note.txt");
    io::write_text_file(p, "line one\nline two\n");
    CHECK(io::read_text_file(p) == "line one\nline two\n");
    CHECK_THROWS_AS(io::read_text_file(dir.file("absent.txt")), io::ConfigError);
}

}  // TEST_SUITE
