#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "gpob/cli_reports.hpp"
#include "gpob/errors.hpp"

using namespace gpob;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("gpob_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

/// Small, fast run at δ = 0.
RunConfig tiny_config(const fs::path& dir) {
    return parse_config("[geometry]\nn_radial = 48\nn_angular = 32\nstretch = 1.08\n"
                        "[flow]\ndelta = 0\n"
                        "[layer]\nepsilons = 0.5\n"
                        "[waves]\nc_start = 0.5\nc_end = 0.6\nc_step = 0.1\nc_min_step = 0.05\nL = 10\nh = 0.5\n"
                        "[output]\ndir = " +
                        dir.string() + "\n");
}

}  // namespace

TEST_CASE("config text round-trips") {
    RunConfig c;
    c.shape = "ellipse";
    c.a = 2.0;
    c.epsilons = {0.1, 0.05};
    c.bc = BoundaryCondition::Dirichlet;
    c.delta = 0.1;
    c.polish = true;
    const RunConfig back = parse_config(c.to_text());
    CHECK(back.canonical() == c.canonical());
    CHECK(back.hash() == c.hash());
    CHECK(back.epsilons == c.epsilons);
    CHECK(back.bc == BoundaryCondition::Dirichlet);
}

TEST_CASE("config hash tracks every knob but the output directory") {
    const RunConfig base;
    CHECK(base.hash().size() == 64);
    RunConfig t = base;
    t.gp_abs_tol = 2e-9;
    CHECK(t.hash() != base.hash());
    t = base;
    t.output_dir = "elsewhere";
    CHECK(t.hash() == base.hash());
}

TEST_CASE("config parsing") {
    const RunConfig c = parse_config("# comment\n[flow]\ndelta = 0.15 ; trailing\n; another\n[layer]\nepsilons = 0.1, 0.2\n");
    CHECK(c.delta == 0.15);
    CHECK(c.epsilons == std::vector<double>{0.1, 0.2});
    CHECK_THROWS_AS(parse_config("[flow]\ndleta = 0.1\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("[flow]\ndelta = abc\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("[flow]\ndelta = 0.7\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("[geometry]\nn_radial = 2.5\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("[nucleation]\nbc = robin\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("[waves]\nc_start = 1.0\nc_end = 0.5\n"), InvalidArgument);
    CHECK_THROWS_AS(load_config("/nonexistent/gpob.ini"), IoError);
}

TEST_CASE("NaN becomes null with a flag") {
    Json j;
    put_number(j, "x", 1.5);
    put_number(j, "y", std::numeric_limits<double>::quiet_NaN());
    CHECK(j["x"] == 1.5);
    CHECK(j["y"].is_null());
    CHECK(j["y_is_nan"] == true);
    CHECK_FALSE(j.contains("x_is_nan"));
}

TEST_CASE("sign changes are cyclic") {
    CHECK(sign_changes({1, 2, -1, -2}, 0.0) == std::vector<std::size_t>{1, 3});
    CHECK(sign_changes({1, 0, 1, 1}, 1e-12) == std::vector<std::size_t>{1});
    CHECK(sign_changes({1, 1, 1}, 0.0).empty());
}

TEST_CASE("stage status names") {
    for (auto s : {StageStatus::Completed, StageStatus::Cached, StageStatus::Failed, StageStatus::Skipped,
                   StageStatus::Degenerate})
        CHECK(stage_status_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(stage_status_from_string("done"), InvalidArgument);
}

TEST_CASE("manifest JSON round-trips") {
    RunManifest m;
    m.config_hash = "abc";
    m.version = "1";
    m.solves_executed = 3;
    StageRecord r;
    r.name = "flow";
    r.status = StageStatus::Completed;
    r.artifacts = {"flow/phi.f64"};
    r.checks = {{"converged", true}, {"subsonic", false}};
    m.stages.push_back(r);
    const RunManifest b = RunManifest::from_json(m.to_json());
    CHECK(b.to_json() == m.to_json());
    REQUIRE(b.stage("flow"));
    CHECK_FALSE(b.stage("flow")->checks_pass());
    CHECK(b.stage("tw") == nullptr);
}

TEST_CASE("field export") {
    RunConfig c;
    c.n_radial = 3;
    c.n_angular = 4;
    const auto g = build_grid(c);
    const fs::path dir = scratch("export");
    Vec real(g->size());
    CVec cplx(g->size());
    for (std::size_t k = 0; k < g->size(); ++k) {
        real[k] = 0.1 * static_cast<double>(k);
        cplx[k] = {1.0 / (k + 1.0), -static_cast<double>(k)};
    }

    export_field(*g, real, dir / "r.csv", FieldFormat::Csv);
    auto rows = lines_of(dir / "r.csv");
    REQUIRE(rows.size() == 13);
    CHECK(rows[0] == "r,theta,x1,x2,value");
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            std::stringstream ss(rows[1 + i * 4 + j]);
            std::vector<double> v;
            for (std::string f; std::getline(ss, f, ',');) v.push_back(std::stod(f));
            REQUIRE(v.size() == 5);
            const std::size_t k = g->index(i, j);
            CHECK(v[0] == g->xi(i));
            CHECK(v[1] == g->theta(j));
            CHECK(v[2] == g->x1(k));
            CHECK(v[3] == g->x2(k));
            CHECK(v[4] == real[k]);
        }

    export_field(*g, cplx, dir / "c.csv", FieldFormat::Csv);
    rows = lines_of(dir / "c.csv");
    REQUIRE(rows.size() == 13);
    CHECK(rows[0] == "r,theta,x1,x2,re,im");

    export_field(*g, cplx, dir / "c.c64", FieldFormat::Binary);
    const FieldDump d = read_field_binary((dir / "c.c64").string());
    CHECK(d.is_complex);
    CHECK(d.cplx == cplx);
    CHECK_THROWS_AS(export_field(*g, Vec(2), dir / "bad.csv", FieldFormat::Csv), InvalidArgument);
}

TEST_CASE("pipeline at delta = 0 is degenerate and resumable") {
    const fs::path dir = scratch("pipeline");
    const RunConfig cfg = tiny_config(dir);

    const RunManifest first = run_pipeline(cfg);
    REQUIRE(first.stages.size() == 4);
    CHECK(first.stage("flow")->status == StageStatus::Completed);
    CHECK(first.stage("layer")->status == StageStatus::Completed);
    CHECK(first.stage("tw")->done());
    const StageRecord& nuc = *first.stage("nucleate");
    CHECK(nuc.status == StageStatus::Degenerate);
    CHECK(nuc.message == "degenerate: no extrema");
    CHECK(nuc.checks.at("vortex_free_trivial"));
    CHECK(first.solves_executed > 0);
    CHECK(first.config_hash == cfg.hash());

    const Json s1 = summarize(dir);
    CHECK(s1["boundary_extrema"].empty());
    CHECK(s1["delta_star"] == "skipped");

    const RunManifest second = run_pipeline(cfg);
    CHECK(second.solves_executed == 0);
    for (const auto& st : second.stages) CHECK(st.status == StageStatus::Cached);
    CHECK(summarize(dir) == s1);

    // a changed tolerance invalidates the cache
    RunConfig changed = cfg;
    changed.gp_abs_tol = 2e-9;
    const RunManifest third = run_pipeline(changed);
    CHECK(third.solves_executed > 0);
    CHECK(third.stage("flow")->status == StageStatus::Completed);
}

TEST_CASE("pipeline stops early and reports missing runs") {
    const fs::path dir = scratch("partial");
    const RunConfig cfg = tiny_config(dir);
    const RunManifest m = run_pipeline(cfg, std::string("flow"));
    CHECK(m.stage("flow")->status == StageStatus::Completed);
    CHECK(m.stage("layer")->status == StageStatus::Skipped);
    const Json s = summarize(dir);
    CHECK(s["acceptance"]["nucleate.vortex_free_trivial"] == "skipped");
    CHECK(s["acceptance"]["all_pass"] == false);
    CHECK_THROWS_AS(run_pipeline(cfg, std::string("nope")), InvalidArgument);
    CHECK_THROWS_AS(summarize(scratch("empty")), MissingArtifact);
}
