// gpob: command-line front end for the flow, layer, traveling-wave and
// nucleation stages. GPOB_THREADS caps worker threads.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gpob/cli_reports.hpp"
#include "gpob/errors.hpp"

using namespace gpob;
namespace fs = std::filesystem;

namespace {

int report_stage(const StageRecord& r) {
    std::printf("%-9s %-10s %s\n", r.name.c_str(), to_string(r.status).c_str(), r.message.c_str());
    for (const auto& [name, ok] : r.checks) std::printf("  %-32s %s\n", name.c_str(), ok ? "pass" : "FAIL");
    return r.checks_pass() ? 0 : 1;
}

void save_config(const RunConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream(dir / "config.ini") << cfg.to_text();
}

RunConfig config_in(const fs::path& dir) {
    if (!fs::exists(dir / "config.ini")) throw MissingArtifact((dir / "config.ini").string());
    return load_config(dir / "config.ini");
}

std::string eps_dir(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "eps_%g", eps);
    return buf;
}

void write_json_file(const fs::path& p, const Json& j) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vortex nucleation past obstacles in the Gross-Pitaevskii model"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string out, config_path, from, flow_dir, waves_dir, run_dir, stage, bc = "neumann";
    double eps = 0.1, c = 0.3;
    bool polish = false;

    auto* flow = app.add_subcommand("flow", "compressible potential flow past the obstacle");
    flow->add_option("--shape", cfg.shape, "disk or ellipse");
    flow->add_option("--a", cfg.a, "semi-axis along x1");
    flow->add_option("--b", cfg.b, "semi-axis along x2 (ellipse)");
    flow->add_option("--delta", cfg.delta, "far-field speed");
    flow->add_option("--nr", cfg.n_radial, "radial nodes");
    flow->add_option("--nth", cfg.n_angular, "angular nodes");
    flow->add_option("--rfar", cfg.r_far, "outer radius");
    flow->add_option("--stretch", cfg.stretch, "radial stretch ratio");
    flow->add_option("--sonic-max", cfg.sonic_delta_max, "also bracket the critical speed up to this delta");
    flow->add_option("--out", out, "output directory")->required();

    auto* layer = app.add_subcommand("layer", "boundary-layer correction and vortex-free field");
    layer->add_option("--from", from, "flow directory")->required();
    layer->add_option("--eps", eps, "healing length")->required();
    layer->add_flag("--polish", polish, "Newton-polish on the full system");
    layer->add_option("--out", out, "output directory (default <from>/eps_<eps>)");

    auto* tw = app.add_subcommand("tw", "one traveling wave");
    tw->set_help_flag("--help", "print this help");
    tw->add_option("--c", c, "speed")->required();
    tw->add_option("--L", cfg.wave_L, "box half-width");
    tw->add_option("--h", cfg.wave_h, "mesh size");
    tw->add_option("--out", out, "output directory")->required();

    auto* sweep = app.add_subcommand("tw-sweep", "continuation of the traveling-wave branch in c");
    sweep->set_help_flag("--help", "print this help");
    sweep->add_option("--c0", cfg.c_start, "first speed");
    sweep->add_option("--c1", cfg.c_end, "last speed");
    sweep->add_option("--step", cfg.c_step, "initial and largest step");
    sweep->add_option("--min-step", cfg.c_min_step, "smallest step");
    sweep->add_option("--L", cfg.wave_L, "box half-width");
    sweep->add_option("--h", cfg.wave_h, "mesh size");
    sweep->add_option("--out", out, "output directory")->required();

    auto* nucleate = app.add_subcommand("nucleate", "vortex-free and vortex branches of the exterior problem");
    nucleate->add_option("--flow", flow_dir, "flow directory")->required();
    nucleate->add_option("--eps", eps, "healing length")->required();
    nucleate->add_option("--bc", bc, "neumann or dirichlet");
    nucleate->add_option("--waves", waves_dir, "tw-sweep directory (a sweep is run when absent)");
    nucleate->add_option("--out", out, "output directory")->required();

    auto* report = app.add_subcommand("report", "summary document of a pipeline run");
    report->add_option("--run", run_dir, "run directory")->required();
    report->add_option("--out", out, "write the summary here as well");

    auto* pipeline = app.add_subcommand("pipeline", "flow, layer, tw and nucleate with caching");
    pipeline->add_option("--config", config_path, "config file")->required();
    pipeline->add_option("--stage", stage, "stop after this stage");
    pipeline->add_option("--out", out, "run directory (overrides the config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*flow) {
            cfg.output_dir = out;
            cfg.validate();
            save_config(cfg, out);
            return report_stage(run_stage(cfg, StageLayout::flat(out), "flow"));
        }
        if (*layer) {
            cfg = config_in(from);
            cfg.epsilons = {eps};
            cfg.polish = polish;
            if (out.empty()) out = (fs::path(from) / eps_dir(eps)).string();
            cfg.output_dir = out;
            StageLayout lay = StageLayout::flat(out);
            lay.flow = from;
            return report_stage(run_stage(cfg, lay, "layer"));
        }
        if (*tw) {
            cfg.output_dir = out;
            cfg.validate();
            const auto g = HalfPlaneGrid::make(cfg.wave_L, cfg.wave_L, cfg.wave_h);
            const auto closure = FarFieldClosure::pair_phase(1.0 / c);
            const TravelingWave w =
                solve_traveling_wave(c, wave_seed(solve_gl_profile(), 1.0 / c, g, closure), g,
                                     default_wave_newton(), true, closure);
            fs::create_directories(out);
            write_field_binary((fs::path(out) / "wave.c64").string(), g.n1, g.n2, w.field);
            const SpectralReport sp = nondegeneracy_spectrum(w);
            Json s;
            s["c"] = sp.c;
            put_number(s, "smallest_sv_constrained", sp.smallest_sv_constrained);
            put_number(s, "smallest_sv", sp.smallest_sv);
            put_number(s, "kernel_residual_gauge", sp.kernel_residual_gauge);
            put_number(s, "kernel_residual_translation", sp.kernel_residual_translation);
            s["iterations"] = sp.iterations;
            write_json_file(fs::path(out) / "spectrum.json", s);
            Json j = {{"c", w.c},           {"d_c", w.d_c},         {"two_c_d", 2 * w.c * w.d_c},
                      {"L", cfg.wave_L},    {"h", cfg.wave_h},      {"residual_norm", w.residual_norm},
                      {"momentum", w.momentum}, {"newton_iterations", w.newton_iterations},
                      {"vortices", w.vortices.size()}};
            write_json_file(fs::path(out) / "wave.json", j);
            StageRecord r;
            r.name = "tw";
            r.status = StageStatus::Completed;
            r.checks["converged"] = w.residual_norm <= default_wave_newton().abs_tol;
            if (c <= 0.3) r.checks["point_vortex_oracle"] = std::abs(2 * w.c * w.d_c - 1.0) <= 0.2;
            return report_stage(r);
        }
        if (*sweep) {
            cfg.output_dir = out;
            save_config(cfg, out);
            return report_stage(run_stage(cfg, StageLayout::flat(out), "tw"));
        }
        if (*nucleate) {
            cfg = config_in(flow_dir);
            cfg.epsilons = {eps};
            cfg.bc = boundary_condition_from_string(bc);
            cfg.output_dir = out;
            save_config(cfg, out);
            StageLayout lay = StageLayout::flat(out);
            lay.flow = flow_dir;
            if (waves_dir.empty()) {
                lay.tw = fs::path(out) / "tw";
                const StageRecord w = run_stage(cfg, lay, "tw");
                report_stage(w);
            } else {
                lay.tw = waves_dir;
            }
            lay.layer = [&](double) { return fs::path(out) / "layer"; };
            report_stage(run_stage(cfg, lay, "layer"));
            return report_stage(run_stage(cfg, lay, "nucleate"));
        }
        if (*report) {
            const Json s = summarize(run_dir);
            std::cout << s.dump(2) << '\n';
            if (!out.empty()) write_json_file(out, s);
            return s["acceptance"]["all_pass"].get<bool>() ? 0 : 1;
        }
        if (*pipeline) {
            cfg = load_config(config_path);
            if (!out.empty()) cfg.output_dir = out;
            const RunManifest m = run_pipeline(cfg, stage.empty() ? std::nullopt : std::optional<std::string>(stage));
            int rc = 0;
            for (const auto& r : m.stages)
                if (r.status != StageStatus::Skipped || r.message != "not requested") rc |= report_stage(r);
            std::printf("solves executed: %d\n", m.solves_executed);
            const Json s = summarize(cfg.output_dir);
            write_json_file(fs::path(cfg.output_dir) / "summary.json", s);
            return rc;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "gpob: %s\n", e.what());
        return 2;
    }
    return 1;
}
