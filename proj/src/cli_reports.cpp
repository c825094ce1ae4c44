#include "gpob/cli_reports.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "gpob/errors.hpp"

#ifndef GPOB_VERSION
#define GPOB_VERSION "0.0.0"
#endif

namespace gpob {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

/// Value text without a trailing ` ;` or ` #` comment.
std::string strip_comment(const std::string& v) {
    std::string out = v;
    for (const char* mark : {" ;", "\t;", " #", "\t#"})
        if (const auto p = out.find(mark); p != std::string::npos) out.erase(p);
    return trim(out);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw InvalidArgument("config key '" + key + "': '" + v + "' is not a number");
    }
    if (used != v.size()) throw InvalidArgument("config key '" + key + "': '" + v + "' is not a number");
    return x;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    if (!(x >= 0.0) || x != std::floor(x)) throw InvalidArgument("config key '" + key + "' must be a whole number");
    return static_cast<std::size_t>(x);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidArgument("config key '" + key + "' must be true or false");
}

std::string list_text(const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt17(v[k]);
    return s;
}

struct Knob {
    std::string name;  ///< section.key
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
Knob num(const std::string& name, T RunConfig::*m) {
    return {name, [m](const RunConfig& c) { return fmt17(static_cast<double>(c.*m)); },
            [m, name](RunConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, std::size_t>)
                    c.*m = to_size(name, v);
                else
                    c.*m = to_double(name, v);
            }};
}

const std::vector<Knob>& knobs() {
    static const std::vector<Knob> k = {
        {"geometry.shape", [](const RunConfig& c) { return c.shape; },
         [](RunConfig& c, const std::string& v) { c.shape = v; }},
        num("geometry.a", &RunConfig::a),
        num("geometry.b", &RunConfig::b),
        num("geometry.n_radial", &RunConfig::n_radial),
        num("geometry.n_angular", &RunConfig::n_angular),
        num("geometry.r_far", &RunConfig::r_far),
        num("geometry.stretch", &RunConfig::stretch),
        {"geometry.cluster_centers", [](const RunConfig& c) { return list_text(c.cluster_centers); },
         [](RunConfig& c, const std::string& v) { c.cluster_centers = to_list("geometry.cluster_centers", v); }},
        num("geometry.cluster_factor", &RunConfig::cluster_factor),
        num("geometry.cluster_half_width", &RunConfig::cluster_half_width),
        num("flow.delta", &RunConfig::delta),
        num("flow.abs_tol", &RunConfig::flow_abs_tol),
        num("flow.sonic_delta_max", &RunConfig::sonic_delta_max),
        num("flow.sonic_step", &RunConfig::sonic_step),
        num("flow.sonic_min_step", &RunConfig::sonic_min_step),
        {"layer.epsilons", [](const RunConfig& c) { return list_text(c.epsilons); },
         [](RunConfig& c, const std::string& v) { c.epsilons = to_list("layer.epsilons", v); }},
        {"layer.polish", [](const RunConfig& c) { return std::string(c.polish ? "true" : "false"); },
         [](RunConfig& c, const std::string& v) { c.polish = to_bool("layer.polish", v); }},
        num("waves.c_start", &RunConfig::c_start),
        num("waves.c_end", &RunConfig::c_end),
        num("waves.c_step", &RunConfig::c_step),
        num("waves.c_min_step", &RunConfig::c_min_step),
        num("waves.L", &RunConfig::wave_L),
        num("waves.h", &RunConfig::wave_h),
        num("waves.abs_tol", &RunConfig::wave_abs_tol),
        {"nucleation.bc", [](const RunConfig& c) { return to_string(c.bc); },
         [](RunConfig& c, const std::string& v) { c.bc = boundary_condition_from_string(v); }},
        num("nucleation.abs_tol", &RunConfig::gp_abs_tol),
        num("nucleation.lambda_stride", &RunConfig::lambda_stride),
        {"output.dir", [](const RunConfig& c) { return c.output_dir; },
         [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
    };
    return k;
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw InvalidArgument("config key '" + key + "' " + what);
}

std::string eps_tag(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "eps_%g", eps);
    return buf;
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("write failed for " + p.string());
}

void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

Json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw MissingArtifact(p.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw IoError(p.string() + ": " + e.what());
    }
}

std::string kind_name(ExtremumKind k) { return k == ExtremumKind::Max ? "max" : "min"; }

NewtonConfig with_tol(NewtonConfig c, double tol) {
    c.abs_tol = tol;
    return c;
}

/// Stage checks expected for a config, used to mark absent stages.
std::vector<std::string> expected_checks(const RunConfig& cfg, const std::string& stage) {
    std::vector<std::string> out;
    if (stage == "flow") {
        out = {"converged", "subsonic"};
        if (cfg.sonic_delta_max > 0.0) out.push_back("sonic_bracket");
    } else if (stage == "layer") {
        for (double e : cfg.epsilons)
            if (cfg.delta > 0.0) out.push_back("decay_rate_" + eps_tag(e));
    } else if (stage == "tw") {
        out = {"branch_end_observed", "point_vortex_oracle"};
    } else if (stage == "nucleate") {
        if (cfg.delta == 0.0) return {"vortex_free_trivial"};
        for (double e : cfg.epsilons) {
            const std::string t = "_" + eps_tag(e);
            for (const char* n : {"two_solutions", "core_near_site", "vortex_free_modulus", "lambda0"})
                out.push_back(n + t);
            if (cfg.bc == BoundaryCondition::Dirichlet) out.push_back("layer_match" + t);
        }
        if (cfg.epsilons.size() >= 2) out.push_back("core_scaling");
    }
    return out;
}

/// Pipeline state: live results and reloadable artifacts.
class Runner {
public:
    Runner(const RunConfig& cfg, StageLayout layout)
        : cfg_(cfg), lay_(std::move(layout)), grid_(build_grid(cfg)) {}

    int solves = 0;

    StageRecord run(const std::string& stage) {
        StageRecord r;
        r.name = stage;
        if (stage == "flow") flow_stage(r);
        else if (stage == "layer") layer_stage(r);
        else if (stage == "tw") tw_stage(r);
        else if (stage == "nucleate") nucleate_stage(r);
        else throw InvalidArgument("unknown stage '" + stage + "'");
        return r;
    }

private:
    const RunConfig& cfg_;
    StageLayout lay_;
    std::shared_ptr<const Grid2D> grid_;
    std::optional<FlowSolution> flow_;
    std::map<double, VortexFreeSolution> vf_;
    std::optional<std::vector<TravelingWave>> waves_;

    void record(StageRecord& r, const fs::path& p) {
        r.artifacts.push_back(fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(lay_.root).lexically_normal()).string());
    }
    void dump(StageRecord& r, const fs::path& p, std::span<const double> v) {
        fs::create_directories(p.parent_path());
        write_field_binary(p.string(), grid_->n_radial(), grid_->n_angular(), v);
        record(r, p);
    }
    void dump(StageRecord& r, const fs::path& p, const CVec& v) {
        fs::create_directories(p.parent_path());
        write_field_binary(p.string(), grid_->n_radial(), grid_->n_angular(), v);
        record(r, p);
    }
    void dump_json(StageRecord& r, const fs::path& p, const Json& j) {
        write_json(p, j);
        record(r, p);
    }
    void dump_text(StageRecord& r, const fs::path& p, const std::string& text) {
        write_text(p, text);
        record(r, p);
    }

    Vec load_real(const fs::path& p) {
        if (!fs::exists(p)) throw MissingArtifact(p.string());
        FieldDump d = read_field_binary(p.string());
        if (d.is_complex || d.n_radial != grid_->n_radial() || d.n_angular != grid_->n_angular())
            throw IoError(p.string() + " does not match the configured grid");
        return d.real;
    }
    CVec load_complex(const fs::path& p) {
        if (!fs::exists(p)) throw MissingArtifact(p.string());
        FieldDump d = read_field_binary(p.string());
        if (!d.is_complex) throw IoError(p.string() + " is not a complex field");
        return d.cplx;
    }

    const FlowSolution& flow() {
        if (flow_) return *flow_;
        const Json j = read_json(lay_.flow / "flow.json");
        FlowSolution f;
        f.grid = grid_;
        f.delta = j.at("delta");
        f.dipole = j.at("dipole");
        f.residual_norm = j.at("residual_norm");
        f.newton_iterations = j.at("newton_iterations");
        f.max_boundary_speed2 = j.at("max_boundary_speed2");
        f.sonic_margin = j.at("sonic_margin");
        f.phi = load_real(lay_.flow / "phi.f64");
        f.speed2 = load_real(lay_.flow / "speed2.f64");
        f.rho = load_real(lay_.flow / "rho.f64");
        f.amplitude = load_real(lay_.flow / "amplitude.f64");
        flow_ = std::move(f);
        return *flow_;
    }

    const VortexFreeSolution& vortex_free(double eps) {
        if (auto it = vf_.find(eps); it != vf_.end()) return it->second;
        const fs::path base = lay_.layer(eps);
        const Json j = read_json(base / "layer.json");
        VortexFreeSolution v;
        v.grid = grid_;
        v.epsilon = eps;
        v.delta = cfg_.delta;
        v.rho_eps = load_real(base / "rho_eps.f64");
        v.phi_eps = load_real(base / "phi_eps.f64");
        v.u = load_complex(base / "ueps.c64");
        v.rho2_norm = j.at("rho2_norm");
        v.phi2_norm = j.at("phi2_norm");
        v.residual_norm = j.at("vortex_free_residual");
        v.polished = j.at("polished");
        return vf_.emplace(eps, std::move(v)).first->second;
    }

    const std::vector<TravelingWave>& waves() {
        if (waves_) return *waves_;
        const Json j = read_json(lay_.tw / "waves.json");
        const auto g = HalfPlaneGrid::make(j.at("L"), j.at("L"), j.at("h"));
        std::vector<TravelingWave> out;
        for (const auto& w : j.at("waves")) {
            TravelingWave t = wave_from_field(w.at("c"), g, load_complex(lay_.tw / w.at("file").get<std::string>()),
                                              FarFieldClosure::pair_phase(w.at("closure_d")));
            t.residual_norm = w.at("residual_norm");
            t.newton_iterations = w.at("newton_iterations");
            out.push_back(std::move(t));
        }
        waves_ = std::move(out);
        return *waves_;
    }

    void flow_stage(StageRecord& r) {
        FlowParams p{cfg_.delta, cfg_.epsilons.front()};
        flow_ = solve_potential_flow(grid_, p, std::nullopt, with_tol(default_flow_newton(), cfg_.flow_abs_tol));
        ++solves;
        const FlowSolution& f = *flow_;
        dump(r, lay_.flow / "phi.f64", f.phi);
        dump(r, lay_.flow / "speed2.f64", f.speed2);
        dump(r, lay_.flow / "rho.f64", f.rho);
        dump(r, lay_.flow / "amplitude.f64", f.amplitude);
        const BoundaryExtrema ext = boundary_extrema(f);
        Json j;
        j["delta"] = f.delta;
        j["dipole"] = f.dipole;
        j["residual_norm"] = f.residual_norm;
        j["newton_iterations"] = f.newton_iterations;
        j["max_boundary_speed2"] = f.max_boundary_speed2;
        j["sonic_margin"] = f.sonic_margin;
        j["trace_constant"] = ext.trace.is_constant;
        j["extrema"] = Json::array();
        for (const auto& e : ext.trace.extrema)
            j["extrema"].push_back({{"index", e.index}, {"theta", e.theta}, {"value", e.value}, {"kind", kind_name(e.kind)}});
        dump_json(r, lay_.flow / "flow.json", j);
        r.checks["converged"] = f.residual_norm <= cfg_.flow_abs_tol;
        r.checks["subsonic"] = f.max_boundary_speed2 < kSonicSpeed2;

        if (cfg_.sonic_delta_max > 0.0) {
            ContinuationConfig cc;
            cc.initial_step = cfg_.sonic_step;
            cc.max_step = cfg_.sonic_step;
            cc.min_step = cfg_.sonic_min_step;
            const SonicReport s = sonic_continuation(grid_, cfg_.sonic_delta_max, cc);
            solves += static_cast<int>(s.samples.size());
            Json sj;
            sj["delta_lo"] = s.delta_lo;
            sj["delta_hi"] = s.delta_hi;
            sj["bracketed"] = s.bracketed;
            sj["failure"] = s.failure;
            sj["samples"] = Json::array();
            for (const auto& x : s.samples)
                sj["samples"].push_back(
                    {{"delta", x.delta}, {"max_boundary_speed2", x.max_boundary_speed2}, {"converged", x.converged}});
            dump_json(r, lay_.flow / "sonic.json", sj);
            r.checks["sonic_bracket"] =
                s.bracketed && s.delta_lo > 0.20 && s.delta_hi < 0.29 && s.delta_hi - s.delta_lo <= 0.005;
        }
    }

    void layer_stage(StageRecord& r) {
        const FlowSolution& f = flow();
        for (double eps : cfg_.epsilons) {
            const fs::path base = lay_.layer(eps);
            const BoundaryLayerField L = solve_rho1(f, eps);
            VortexFreeSolution v = assemble_vortex_free(f, L, eps, cfg_.polish);
            solves += cfg_.polish ? 2 : 1;
            dump(r, base / "rho1.f64", L.rho1);
            dump(r, base / "rho_eps.f64", v.rho_eps);
            dump(r, base / "phi_eps.f64", v.phi_eps);
            dump(r, base / "ueps.c64", v.u);
            Json j;
            j["epsilon"] = eps;
            j["layer_residual"] = L.residual_norm;
            put_number(j, "decay_rate", L.decay_rate);
            put_number(j, "expected_rate", L.expected_rate);
            put_number(j, "decay_amplitude", L.decay_amplitude);
            put_number(j, "expected_amplitude", L.expected_amplitude);
            j["fit_column"] = L.fit_column;
            j["rho2_norm"] = v.rho2_norm;
            j["phi2_norm"] = v.phi2_norm;
            j["vortex_free_residual"] = v.residual_norm;
            j["polished"] = v.polished;
            dump_json(r, base / "layer.json", j);
            if (cfg_.delta > 0.0)
                r.checks["decay_rate_" + eps_tag(eps)] =
                    std::abs(L.decay_rate / L.expected_rate - 1.0) <= 0.15;
            vf_[eps] = std::move(v);
        }
    }

    void tw_stage(StageRecord& r) {
        const auto g = HalfPlaneGrid::make(cfg_.wave_L, cfg_.wave_L, cfg_.wave_h);
        ContinuationConfig cc;
        cc.initial_step = cfg_.c_step;
        cc.max_step = cfg_.c_step;
        cc.min_step = cfg_.c_min_step;
        const WaveBranch br = continuation_in_c(cfg_.c_start, cfg_.c_end, g, solve_gl_profile(), cc,
                                                with_tol(default_wave_newton(), cfg_.wave_abs_tol));
        solves += static_cast<int>(br.waves.size());
        Json j;
        j["L"] = cfg_.wave_L;
        j["h"] = cfg_.wave_h;
        j["status"] = br.status == BranchStatus::BranchEnd ? "branch_end" : "completed";
        j["c_end_observed"] = br.c_end_observed;
        j["c_failed"] = br.c_failed;
        j["termination"] = br.termination;
        j["small_c_bound"] = br.small_c_bound;
        j["waves"] = Json::array();
        bool oracle = true;
        int oracle_samples = 0;
        std::ostringstream branch;
        branch << "c,d_c,residual,momentum\n";
        for (std::size_t k = 0; k < br.waves.size(); ++k) {
            const TravelingWave& w = br.waves[k];
            char name[32];
            std::snprintf(name, sizeof name, "wave_%03zu.c64", k);
            fs::create_directories(lay_.tw);
            write_field_binary((lay_.tw / name).string(), g.n1, g.n2, w.field);
            record(r, lay_.tw / name);
            branch << fmt17(w.c) << ',' << fmt17(w.d_c) << ',' << fmt17(w.residual_norm) << ',' << fmt17(w.momentum)
                   << '\n';
            j["waves"].push_back({{"c", w.c},
                                  {"d_c", w.d_c},
                                  {"two_c_d", 2.0 * w.c * w.d_c},
                                  {"momentum", w.momentum},
                                  {"newton_iterations", w.newton_iterations},
                                  {"residual_norm", w.residual_norm},
                                  {"vortices", w.vortices.size()},
                                  {"closure_d", w.closure.pair_d},
                                  {"file", name}});
            if (w.c <= 0.3 + 1e-12) {
                ++oracle_samples;
                oracle = oracle && 2.0 * w.c * w.d_c >= 0.8 && 2.0 * w.c * w.d_c <= 1.2;
            }
        }
        dump_json(r, lay_.tw / "waves.json", j);
        dump_text(r, lay_.tw / "branch.csv", branch.str());
        r.checks["branch_end_observed"] = br.status == BranchStatus::BranchEnd && br.c_end_observed < std::sqrt(2.0);
        r.checks["point_vortex_oracle"] = oracle && oracle_samples > 0;
        waves_ = br.waves;
    }

    void nucleate_stage(StageRecord& r) {
        const FlowSolution& f = flow();
        const std::vector<TravelingWave>& tw = waves();
        const NewtonConfig ncfg = with_tol(default_gp_newton(), cfg_.gp_abs_tol);
        std::vector<double> log_eps, log_dist;
        bool all_degenerate = true;
        for (double eps : cfg_.epsilons) {
            const std::string tag = eps_tag(eps);
            const fs::path base = lay_.nucleate(eps);
            const NucleationReport rep = nucleation_report(f, vortex_free(eps), tw, eps, cfg_.bc, ncfg);
            solves += rep.vortex_branch ? 2 : 1;
            const Grid2D& g = *grid_;
            dump(r, base / "u_free.c64", rep.vortex_free.u);
            if (rep.vortex_branch) dump(r, base / "u_vortex.c64", rep.vortex_branch->u);

            Json j;
            j["epsilon"] = eps;
            j["delta"] = rep.delta;
            j["bc"] = to_string(rep.bc);
            j["degenerate"] = rep.degenerate;
            auto summary = [](const GPSolution& s) {
                Json o;
                o["residual_norm"] = s.residual_norm;
                o["newton_iterations"] = s.newton_iterations;
                o["min_modulus"] = s.min_modulus;
                o["far_winding"] = s.far_winding;
                o["vortices"] = Json::array();
                for (const auto& v : s.vortices)
                    o["vortices"].push_back({{"x1", v.position[0]}, {"x2", v.position[1]}, {"winding", v.winding},
                                             {"core_min", v.core_min}});
                return o;
            };
            j["vortex_free"] = summary(rep.vortex_free);
            j["vortex_branch"] = rep.vortex_branch ? summary(*rep.vortex_branch) : Json();
            j["vortex_failure"] = rep.vortex_failure;
            j["predicted_sites"] = Json::array();
            for (const auto& e : rep.predicted_sites)
                j["predicted_sites"].push_back({{"theta", e.theta}, {"value", e.value}, {"kind", kind_name(e.kind)}});
            put_number(j, "lambda0", rep.lambda0);

            if (rep.degenerate) {
                double dev = 0.0;
                for (const auto& z : rep.vortex_free.u) dev = std::max(dev, std::abs(z - 1.0));
                j["max_deviation_from_one"] = dev;
                r.checks["vortex_free_trivial"] = dev <= 1e-12;
                dump_json(r, base / "report.json", j);
                continue;
            }
            all_degenerate = false;
            j["distinctness"] = rep.distinctness;
            if (rep.seed) {
                j["seed"] = {{"theta", rep.seed->frame.theta},
                             {"c_local", rep.seed->frame.c},
                             {"c_used", rep.seed->c_used},
                             {"extrapolated_seed", rep.seed->extrapolated_seed},
                             {"predicted_core", {rep.seed->predicted_core[0], rep.seed->predicted_core[1]}}};
            }
            j["core_modulus"] = rep.core_modulus;
            j["core_to_site"] = rep.core_to_site;
            j["core_to_boundary"] = rep.core_to_boundary;

            // λ-diagnostics
            std::vector<std::size_t> cols;
            for (std::size_t c = 0; c < g.n_angular(); c += cfg_.lambda_stride) cols.push_back(c);
            const ProjectionDiagnostics pd = lambda_projections(vortex_free(eps), f, tw, cols);
            std::ostringstream csv;
            csv << "theta,lambda0,lambda1,dtau_speed2,c_local,c_wave,a0,gram_condition,p1,p1_asymptotic,p1_strain\n";
            for (const auto& p : pd.points)
                csv << fmt17(p.theta) << ',' << fmt17(p.lambda0) << ',' << fmt17(p.lambda1) << ','
                    << fmt17(p.tangential_derivative) << ',' << fmt17(p.c) << ',' << fmt17(p.c_wave) << ','
                    << fmt17(p.a0) << ',' << fmt17(p.gram_condition) << ',' << fmt17(p.p1) << ','
                    << fmt17(p.p1_asymptotic) << ',' << fmt17(p.p1_strain) << '\n';
            dump_text(r, base / "lambda.csv", csv.str());
            double scale = 0.0;
            for (double l : pd.lambda1) scale = std::max(scale, std::abs(l));
            j["lambda1_zeros"] = Json::array();
            for (std::size_t z : sign_changes(pd.lambda1, 1e-8 * scale)) j["lambda1_zeros"].push_back(pd.points[z].theta);
            put_number(j, "A0_estimate", pd.A0_estimate);
            j["noise_floor"] = pd.noise_floor;
            dump_json(r, base / "report.json", j);

            const std::string t = "_" + tag;
            r.checks["two_solutions" + t] = rep.vortex_branch && rep.distinctness > 1e-2;
            r.checks["core_near_site" + t] = rep.vortex_branch && !rep.observed_sites.empty() &&
                                            rep.core_modulus < 0.3 && rep.core_to_site <= 5 * eps;
            r.checks["vortex_free_modulus" + t] =
                cfg_.bc == BoundaryCondition::Dirichlet || rep.vortex_free.min_modulus > 0.6;
            r.checks["lambda0" + t] = std::abs(rep.lambda0) <= 10 * cfg_.gp_abs_tol;
            if (cfg_.bc == BoundaryCondition::Dirichlet)
                r.checks["layer_match" + t] = dirichlet_layer_deviation(rep.vortex_free, f, eps) <= 0.10;
            if (rep.vortex_branch && !rep.observed_sites.empty()) {
                log_eps.push_back(std::log(eps));
                log_dist.push_back(std::log(rep.core_to_boundary));
            }
        }
        if (cfg_.epsilons.size() >= 2 && !all_degenerate) {
            double slope = std::numeric_limits<double>::quiet_NaN();
            if (log_eps.size() >= 2) {
                double me = 0, md = 0, see = 0, sed = 0;
                for (std::size_t k = 0; k < log_eps.size(); ++k) me += log_eps[k], md += log_dist[k];
                me /= log_eps.size();
                md /= log_eps.size();
                for (std::size_t k = 0; k < log_eps.size(); ++k) {
                    see += (log_eps[k] - me) * (log_eps[k] - me);
                    sed += (log_eps[k] - me) * (log_dist[k] - md);
                }
                slope = sed / see;
            }
            Json s;
            put_number(s, "core_distance_slope", slope);
            dump_json(r, lay_.scaling, s);
            r.checks["core_scaling"] = std::abs(slope - 1.0) <= 0.3;
        }
        if (all_degenerate) {
            r.status = StageStatus::Degenerate;
            r.message = "degenerate: no extrema";
        }
    }

    /// max over s ≤ 5ε along the normal at the max-speed point of
    /// ||u| − ρ₀(s/ε; b)| / √(1 − b²)
    static double dirichlet_layer_deviation(const GPSolution& s, const FlowSolution& f, double eps) {
        const Grid2D& g = *f.grid;
        const auto maxima = boundary_extrema(f).trace.maxima();
        const std::size_t j = maxima.empty() ? 0 : maxima.front().index;
        const double b = std::sqrt(f.speed2[g.index(0, j)]);
        const DirichletLayer layer = dirichlet_layer(b, 25.0);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.n_radial() && g.normal_distance(i, j) <= 5 * eps; ++i)
            worst = std::max(worst, std::abs(std::abs(s.u[g.index(i, j)]) - layer(g.normal_distance(i, j) / eps)) /
                                        layer.plateau);
        return worst;
    }
};

}  // namespace

void RunConfig::validate() const {
    require(shape == "disk" || shape == "ellipse", "geometry.shape", "must be disk or ellipse");
    require(a > 0.0 && b > 0.0, "geometry.a", "and geometry.b must be positive");
    require(n_radial >= 3, "geometry.n_radial", "must be at least 3");
    require(n_angular >= 4, "geometry.n_angular", "must be at least 4");
    require(r_far > std::max(a, b), "geometry.r_far", "must exceed the obstacle size");
    require(stretch >= 1.0, "geometry.stretch", "must be at least 1");
    require(cluster_factor >= 1.0, "geometry.cluster_factor", "must be at least 1");
    require(cluster_half_width > 0.0 && cluster_half_width < std::numbers::pi, "geometry.cluster_half_width",
            "must lie in (0, pi)");
    require(delta >= 0.0 && delta * delta < kSonicSpeed2, "flow.delta", "must lie in [0, 1/sqrt(3))");
    require(flow_abs_tol > 0.0, "flow.abs_tol", "must be positive");
    require(sonic_delta_max >= 0.0 && sonic_delta_max * sonic_delta_max < 1.0, "flow.sonic_delta_max",
            "must lie in [0, 1)");
    require(sonic_step > 0.0 && sonic_min_step > 0.0 && sonic_min_step <= sonic_step, "flow.sonic_step",
            "and flow.sonic_min_step must satisfy 0 < min <= step");
    require(!epsilons.empty(), "layer.epsilons", "must list at least one value");
    for (double e : epsilons) require(e > 0.0 && e <= 1.0, "layer.epsilons", "entries must lie in (0, 1]");
    require(c_start > 0.0 && c_start < c_end && c_end <= std::sqrt(2.0), "waves.c_start",
            "and waves.c_end must satisfy 0 < c_start < c_end <= sqrt(2)");
    require(c_step > 0.0 && c_min_step > 0.0 && c_min_step <= c_step, "waves.c_step",
            "and waves.c_min_step must satisfy 0 < min <= step");
    require(wave_h > 0.0 && wave_L >= 10.0 * wave_h, "waves.L", "must be at least 10 h with h > 0");
    require(wave_abs_tol > 0.0, "waves.abs_tol", "must be positive");
    require(gp_abs_tol > 0.0, "nucleation.abs_tol", "must be positive");
    require(lambda_stride >= 1, "nucleation.lambda_stride", "must be at least 1");
    require(!output_dir.empty(), "output.dir", "must be set");
}

std::string RunConfig::canonical() const {
    std::vector<std::string> lines;
    for (const auto& k : knobs())
        if (k.name != "output.dir") lines.push_back(k.name + " = " + k.get(*this));
    std::sort(lines.begin(), lines.end());
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
}

std::string RunConfig::hash() const {
    const std::string text = canonical();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string RunConfig::to_text() const {
    std::string out, section;
    for (const auto& k : knobs()) {
        const auto dot = k.name.find('.');
        const std::string sec = k.name.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "" : "\n") + ("[" + sec + "]\n");
            section = sec;
        }
        out += k.name.substr(dot + 1) + " = " + k.get(*this) + "\n";
    }
    return out;
}

RunConfig parse_config(const std::string& text) {
    boost::property_tree::ptree pt;
    std::istringstream in(text);
    try {
        boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw InvalidArgument(std::string("config parse error: ") + e.what());
    }
    RunConfig cfg;
    for (const auto& [section, body] : pt) {
        if (body.empty()) throw InvalidArgument("config key '" + section + "' is outside any section");
        for (const auto& [key, value] : body) {
            const std::string name = section + "." + key;
            const auto it = std::find_if(knobs().begin(), knobs().end(), [&](const Knob& k) { return k.name == name; });
            if (it == knobs().end()) throw InvalidArgument("unknown config key '" + name + "'");
            it->set(cfg, strip_comment(value.data()));
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::shared_ptr<const Grid2D> build_grid(const RunConfig& cfg) {
    cfg.validate();
    AngularClustering cl;
    cl.centers = cfg.cluster_centers;
    cl.factor = cfg.cluster_factor;
    cl.half_width = cfg.cluster_half_width;
    const ObstacleShape shape = cfg.shape == "disk" ? ObstacleShape::disk(cfg.a) : ObstacleShape::ellipse(cfg.a, cfg.b);
    return std::make_shared<const Grid2D>(
        build_exterior_grid(shape, cfg.n_radial, cfg.n_angular, cfg.r_far, cfg.stretch, cl));
}

std::string to_string(StageStatus s) {
    switch (s) {
        case StageStatus::Completed: return "completed";
        case StageStatus::Cached: return "cached";
        case StageStatus::Failed: return "failed";
        case StageStatus::Skipped: return "skipped";
        case StageStatus::Degenerate: return "degenerate";
    }
    return "skipped";
}

StageStatus stage_status_from_string(const std::string& s) {
    for (auto st : {StageStatus::Completed, StageStatus::Cached, StageStatus::Failed, StageStatus::Skipped,
                    StageStatus::Degenerate})
        if (to_string(st) == s) return st;
    throw InvalidArgument("unknown stage status '" + s + "'");
}

bool StageRecord::done() const {
    return status == StageStatus::Completed || status == StageStatus::Cached || status == StageStatus::Degenerate;
}

bool StageRecord::checks_pass() const {
    return done() && std::all_of(checks.begin(), checks.end(), [](const auto& kv) { return kv.second; });
}

const StageRecord* RunManifest::stage(const std::string& name) const {
    for (const auto& s : stages)
        if (s.name == name) return &s;
    return nullptr;
}

Json RunManifest::to_json() const {
    Json j;
    j["config_hash"] = config_hash;
    j["version"] = version;
    j["solves_executed"] = solves_executed;
    j["stages"] = Json::array();
    for (const auto& s : stages)
        j["stages"].push_back({{"name", s.name},
                               {"status", to_string(s.status)},
                               {"message", s.message},
                               {"artifacts", s.artifacts},
                               {"wall_seconds", s.wall_seconds},
                               {"checks", s.checks}});
    return j;
}

RunManifest RunManifest::from_json(const Json& j) {
    RunManifest m;
    m.config_hash = j.at("config_hash");
    m.version = j.at("version");
    m.solves_executed = j.at("solves_executed");
    for (const auto& s : j.at("stages")) {
        StageRecord r;
        r.name = s.at("name");
        r.status = stage_status_from_string(s.at("status"));
        r.message = s.at("message");
        r.artifacts = s.at("artifacts").get<std::vector<std::string>>();
        r.wall_seconds = s.at("wall_seconds");
        r.checks = s.at("checks").get<std::map<std::string, bool>>();
        m.stages.push_back(std::move(r));
    }
    return m;
}

const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> s = {"flow", "layer", "tw", "nucleate"};
    return s;
}

RunManifest read_manifest(const fs::path& run_dir) { return RunManifest::from_json(read_json(run_dir / "manifest.json")); }

StageLayout StageLayout::pipeline(const fs::path& root) {
    StageLayout l;
    l.root = root;
    l.flow = root / "flow";
    l.tw = root / "tw";
    l.layer = [root](double e) { return root / "layer" / eps_tag(e); };
    l.nucleate = [root](double e) { return root / "nucleate" / eps_tag(e); };
    l.scaling = root / "nucleate" / "scaling.json";
    return l;
}

StageLayout StageLayout::flat(const fs::path& root) {
    StageLayout l;
    l.root = root;
    l.flow = root;
    l.tw = root;
    l.layer = [root](double) { return root; };
    l.nucleate = [root](double) { return root; };
    l.scaling = root / "scaling.json";
    return l;
}

StageRecord run_stage(const RunConfig& cfg, const StageLayout& layout, const std::string& stage, int* solves) {
    cfg.validate();
    Runner runner(cfg, layout);
    const auto t0 = std::chrono::steady_clock::now();
    StageRecord r = runner.run(stage);
    if (r.status == StageStatus::Skipped) r.status = StageStatus::Completed;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (solves) *solves = runner.solves;
    return r;
}

RunManifest run_pipeline(const RunConfig& cfg, const std::optional<std::string>& only) {
    cfg.validate();
    const auto& names = pipeline_stages();
    std::size_t last = names.size() - 1;
    if (only) {
        const auto it = std::find(names.begin(), names.end(), *only);
        if (it == names.end()) throw InvalidArgument("unknown stage '" + *only + "'");
        last = static_cast<std::size_t>(it - names.begin());
    }
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    {
        const auto g = build_grid(cfg);
        for (double e : cfg.epsilons) check_gp_resolution(*g, e);
    }

    std::optional<RunManifest> prev;
    if (fs::exists(dir / "manifest.json")) {
        try {
            RunManifest m = read_manifest(dir);
            if (m.config_hash == cfg.hash()) prev = std::move(m);
        } catch (const Error&) {
        }
    }
    write_text(dir / "config.ini", cfg.to_text());

    RunManifest man;
    man.config_hash = cfg.hash();
    man.version = GPOB_VERSION;
    Runner runner(cfg, StageLayout::pipeline(dir));
    bool halted = false, recomputed = false;
    for (std::size_t s = 0; s < names.size(); ++s) {
        const std::string& name = names[s];
        const StageRecord* old = prev ? prev->stage(name) : nullptr;
        const bool reusable = old && old->done() && !recomputed &&
                              std::all_of(old->artifacts.begin(), old->artifacts.end(),
                                          [&](const std::string& a) { return fs::exists(dir / a); });
        StageRecord rec;
        rec.name = name;
        if (halted) {
            rec.status = StageStatus::Skipped;
            rec.message = "upstream stage failed";
        } else if (reusable) {
            rec = *old;
            rec.status = StageStatus::Cached;
        } else if (s > last) {
            if (old) rec = *old;
            else {
                rec.status = StageStatus::Skipped;
                rec.message = "not requested";
            }
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            const int before = runner.solves;
            try {
                rec = runner.run(name);
                if (rec.status == StageStatus::Skipped) rec.status = StageStatus::Completed;
            } catch (const Error& e) {
                rec.name = name;
                rec.status = StageStatus::Failed;
                rec.message = e.what();
                rec.checks.clear();
                halted = true;
            }
            rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            man.solves_executed += runner.solves - before;
            recomputed = true;
        }
        man.stages.push_back(rec);
        write_json(dir / "manifest.json", man.to_json());
    }
    return man;
}

void put_number(Json& obj, const std::string& key, double v) {
    if (std::isfinite(v)) {
        obj[key] = v;
    } else {
        obj[key] = nullptr;
        obj[key + "_is_nan"] = true;
    }
}

std::vector<std::size_t> sign_changes(const std::vector<double>& v, double zero_tol) {
    std::vector<std::size_t> out;
    const std::size_t n = v.size();
    for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(v[j]) <= zero_tol) {
            out.push_back(j);
            continue;
        }
        const double next = v[(j + 1) % n];
        if (std::abs(next) > zero_tol && (v[j] > 0) != (next > 0)) out.push_back(j);
    }
    return out;
}

namespace {

template <class Row>
void write_csv(const Grid2D& g, const fs::path& path, const std::string& header, Row row) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << header << '\n';
    for (std::size_t i = 0; i < g.n_radial(); ++i)
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            const std::size_t k = g.index(i, j);
            out << fmt17(g.xi(i)) << ',' << fmt17(g.theta(j)) << ',' << fmt17(g.x1(k)) << ',' << fmt17(g.x2(k))
                << ',' << row(k) << '\n';
        }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void export_field(const Grid2D& g, std::span<const double> field, const fs::path& path, FieldFormat format) {
    if (field.size() != g.size()) throw InvalidArgument("field size does not match the grid");
    if (format == FieldFormat::Binary) {
        write_field_binary(path.string(), g.n_radial(), g.n_angular(), field);
        return;
    }
    write_csv(g, path, "r,theta,x1,x2,value", [&](std::size_t k) { return fmt17(field[k]); });
}

void export_field(const Grid2D& g, const CVec& field, const fs::path& path, FieldFormat format) {
    if (field.size() != g.size()) throw InvalidArgument("field size does not match the grid");
    if (format == FieldFormat::Binary) {
        write_field_binary(path.string(), g.n_radial(), g.n_angular(), field);
        return;
    }
    write_csv(g, path, "r,theta,x1,x2,re,im",
              [&](std::size_t k) { return fmt17(field[k].real()) + "," + fmt17(field[k].imag()); });
}

Json summarize(const fs::path& run_dir) {
    const RunManifest man = read_manifest(run_dir);
    const RunConfig cfg = load_config(run_dir / "config.ini");
    const StageLayout lay = StageLayout::pipeline(run_dir);
    Json s;
    s["config_hash"] = man.config_hash;
    s["version"] = man.version;
    s["stages"] = Json::object();
    for (const auto& st : man.stages) {
        StageStatus shown = st.status;
        if (shown == StageStatus::Cached)
            shown = st.message.starts_with("degenerate") ? StageStatus::Degenerate : StageStatus::Completed;
        s["stages"][st.name] = {{"status", to_string(shown)}, {"message", st.message}};
    }

    auto done = [&](const std::string& n) {
        const StageRecord* r = man.stage(n);
        return r && r->done();
    };

    if (done("flow") && fs::exists(lay.flow / "sonic.json")) {
        const Json sj = read_json(lay.flow / "sonic.json");
        s["delta_star"] = {{"lo", sj.at("delta_lo")}, {"hi", sj.at("delta_hi")}, {"bracketed", sj.at("bracketed")}};
    } else {
        s["delta_star"] = "skipped";
    }
    if (done("flow")) {
        const Json fj = read_json(lay.flow / "flow.json");
        s["boundary_extrema"] = fj.at("extrema");
        s["max_boundary_speed2"] = fj.at("max_boundary_speed2");
    } else {
        s["boundary_extrema"] = "skipped";
    }
    if (done("tw")) {
        const Json tj = read_json(lay.tw / "waves.json");
        Json table = Json::array();
        for (const auto& w : tj.at("waves"))
            table.push_back({{"c", w.at("c")}, {"d_c", w.at("d_c")}, {"two_c_d", w.at("two_c_d")},
                             {"momentum", w.at("momentum")}});
        s["wave_branch"] = {{"status", tj.at("status")}, {"c_end_observed", tj.at("c_end_observed")},
                            {"termination", tj.at("termination")}, {"table", table}};
    } else {
        s["wave_branch"] = "skipped";
    }
    if (done("nucleate")) {
        Json nj = Json::object();
        for (double e : cfg.epsilons) {
            const Json r = read_json(lay.nucleate(e) / "report.json");
            Json o;
            for (const char* k : {"degenerate", "distinctness", "lambda1_zeros", "lambda0", "core_modulus",
                                  "core_to_site", "core_to_boundary", "vortex_failure", "seed"})
                if (r.contains(k)) o[k] = r.at(k);
            nj[eps_tag(e)] = o;
        }
        s["nucleation"] = nj;
    } else {
        s["nucleation"] = "skipped";
    }

    Json acc = Json::object();
    bool all = true;
    for (const auto& name : pipeline_stages()) {
        const StageRecord* r = man.stage(name);
        for (const auto& c : expected_checks(cfg, name)) {
            const std::string key = name + "." + c;
            if (r && r->done() && r->checks.count(c)) {
                acc[key] = r->checks.at(c);
                all = all && r->checks.at(c);
            } else {
                acc[key] = "skipped";
                all = false;
            }
        }
    }
    acc["all_pass"] = all;
    s["acceptance"] = acc;
    return s;
}

}  // namespace gpob
