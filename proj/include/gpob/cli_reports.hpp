#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpob/nucleation.hpp"
#include "json.hpp"

namespace gpob {

using Json = nlohmann::json;

/// Every knob of a pipeline run. Text form is line-based `key = value` under
/// [geometry], [flow], [layer], [waves], [nucleation] and [output]; `#` and
/// `;` start comments, lists are comma separated.
struct RunConfig {
    // [geometry]
    std::string shape = "disk";  ///< disk | ellipse
    double a = 1.0, b = 1.0;     ///< semi-axes (a for the disk)
    std::size_t n_radial = 128, n_angular = 256;
    double r_far = 20.0;
    double stretch = 1.05;
    std::vector<double> cluster_centers{0.0, 3.141592653589793};
    double cluster_factor = 4.0;
    double cluster_half_width = 0.3;
    // [flow]
    double delta = 0.2;
    double flow_abs_tol = 1e-10;
    double sonic_delta_max = 0.0;  ///< > 0 adds a δ-continuation to the flow stage
    double sonic_step = 0.01;
    double sonic_min_step = 0.0025;
    // [layer]
    std::vector<double> epsilons{0.1};
    bool polish = false;
    // [waves]
    double c_start = 0.06, c_end = 1.3;
    double c_step = 0.03, c_min_step = 0.005;
    double wave_L = 40.0, wave_h = 0.2;
    double wave_abs_tol = 1e-10;
    // [nucleation]
    BoundaryCondition bc = BoundaryCondition::Neumann;
    double gp_abs_tol = 1e-9;
    std::size_t lambda_stride = 4;  ///< λ-diagnostics on every k-th boundary column
    // [output]
    std::string output_dir = "run";

    /// Throws InvalidArgument naming the first offending key.
    void validate() const;
    /// Sorted `section.key = value` lines for every knob except output.dir,
    /// numbers printed with 17 significant digits.
    std::string canonical() const;
    /// SHA-256 of canonical(), lowercase hex.
    std::string hash() const;
    /// Config text that parses back to *this.
    std::string to_text() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

std::shared_ptr<const Grid2D> build_grid(const RunConfig& cfg);

enum class StageStatus { Completed, Cached, Failed, Skipped, Degenerate };
std::string to_string(StageStatus s);
StageStatus stage_status_from_string(const std::string& s);

struct StageRecord {
    std::string name;
    StageStatus status = StageStatus::Skipped;
    std::string message;
    std::vector<std::string> artifacts;  ///< paths relative to the run directory
    double wall_seconds = 0.0;
    std::map<std::string, bool> checks;  ///< the stage's own acceptance checks

    bool done() const;  ///< Completed, Cached or Degenerate
    bool checks_pass() const;
};

struct RunManifest {
    std::string config_hash;
    std::string version;
    std::vector<StageRecord> stages;  ///< flow, layer, tw, nucleate
    int solves_executed = 0;

    const StageRecord* stage(const std::string& name) const;
    Json to_json() const;
    static RunManifest from_json(const Json& j);
};

/// Directories that hold each stage's files. Artifact paths in a StageRecord
/// are relative to `root`.
struct StageLayout {
    std::filesystem::path root, flow, tw, scaling;
    std::function<std::filesystem::path(double)> layer, nucleate;  ///< per ε

    /// root/flow, root/layer/eps_<ε>, root/tw, root/nucleate/eps_<ε>
    static StageLayout pipeline(const std::filesystem::path& root);
    /// everything directly in root (single-ε command-line stages)
    static StageLayout flat(const std::filesystem::path& root);
};

/// Runs one stage. Upstream results are read back from their layout
/// directories (MissingArtifact when absent). `solves` receives the number of
/// nonlinear solves executed.
StageRecord run_stage(const RunConfig& cfg, const StageLayout& layout, const std::string& stage,
                      int* solves = nullptr);

/// Stage names in execution order.
const std::vector<std::string>& pipeline_stages();

/// Runs flow → layer → tw (c-sweep) → nucleate (λ-diagnostics, both branches)
/// in cfg.output_dir. A stage whose manifest entry is done under the same
/// config hash, with every artifact present, is marked Cached and not rerun;
/// its outputs are reloaded when a later stage needs them. A failing stage is
/// recorded and halts the run; later stages are Skipped. `only`, when given,
/// limits execution to the stages up to and including that one.
RunManifest run_pipeline(const RunConfig& cfg, const std::optional<std::string>& only = std::nullopt);

/// Reads <dir>/manifest.json. Throws MissingArtifact.
RunManifest read_manifest(const std::filesystem::path& run_dir);

enum class FieldFormat { Binary, Csv };

/// Binary dump (domain_grid format) or CSV rows `r,theta,x1,x2,value` (real)
/// or `r,theta,x1,x2,re,im` (complex), 17 significant digits, r the radial
/// coordinate of the ring and theta the boundary parameter of the column.
void export_field(const Grid2D& g, std::span<const double> field, const std::filesystem::path& path,
                  FieldFormat format);
void export_field(const Grid2D& g, const CVec& field, const std::filesystem::path& path, FieldFormat format);

/// Structured summary of a run directory: δ* bracket, boundary extrema,
/// c-branch table, λ₁ zeros, branch distinctness and every stage check under
/// "acceptance" (checks of missing stages are "skipped"). Independent of wall
/// times, so reruns on cached artifacts give identical output. Throws
/// MissingArtifact when the manifest is absent.
Json summarize(const std::filesystem::path& run_dir);

/// JSON number, or null plus `<key>_is_nan: true` for non-finite values.
void put_number(Json& obj, const std::string& key, double v);

/// Indices j where λ₁ changes sign between points j and j+1 (cyclically) or
/// |λ₁(j)| ≤ zero_tol.
std::vector<std::size_t> sign_changes(const std::vector<double>& values, double zero_tol);

}  // namespace gpob
