// Batch front-end: JSON run configuration, CSV ingestion, the learning
// pipeline over sweep cells, the random-Fourier-feature simulation study, and
// the CSV/JSON artifacts they emit.

#pragma once

#include "safepl/core.hpp"
#include "safepl/diagnostics.hpp"
#include "safepl/model_classes.hpp"
#include "safepl/optimizer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace safepl::app {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// CSV column names. An empty `x` selects every header named x<k>, ordered
/// by k.
struct ColumnMap {
    std::vector<std::string> x;
    std::string a = "a", y = "y", z = "z", e = "e", d = "d";
};

enum class TargetKind { outcome, effect, decisions };
enum class BandKind { whs, bonferroni_wilson };

struct ModelSpec {
    enum class Kind { no_restriction, lipschitz, additive, glm };
    Kind kind = Kind::no_restriction;
    /// Explicit Lipschitz constants per action label.
    std::map<int, double> lambda;
    /// Heuristic multiplier, used when `lambda` is empty.
    std::optional<double> multiplier;
    models::Metric metric = models::Metric::l1;
    int order = 1;
    models::BasisSpec basis;
};

/// Explicit members are kept as table rules until the grid is known.
struct PolicyClassSpec {
    PolicyClass cls;
    std::vector<TableRule> tables;
    PolicyClass resolve(const CovariateGrid& grid) const;
};

struct CertificateSpec {
    bool enabled = true;
    double delta = 0.05;
    diag::Complexity::Kind kind = diag::Complexity::Kind::rademacher;
    double vc_dimension = 0.0;
    double universal_constant = 1.0;
    std::size_t replications = 200;
};

struct RunConfig {
    std::filesystem::path input;
    ColumnMap columns;
    ActionSet actions = ActionSet::binary();
    PolicyRule baseline;
    UtilitySpec utility;
    ModelSpec model;
    /// Model for the decision response; defaults to `model`.
    std::optional<ModelSpec> decision_model;
    double decision_cost = 0.0;
    TargetKind target = TargetKind::outcome;
    BandKind band = BandKind::whs;
    /// Gain values to sweep (constant across actions); empty keeps `utility`.
    std::vector<double> gains;
    /// Confidence levels 1 - alpha in [0,1).
    std::vector<double> levels{0.95};
    PolicyClassSpec policy_class;
    CertificateSpec certificate;
    std::uint64_t seed = 1;
    std::filesystem::path output = "out";
};

/// Relative paths in the config resolve against `base_dir`. Errors name the
/// offending key path.
RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

std::string to_string(TargetKind t);

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Reads `x1..xp,a,y[,z,e,d]`; every error names the file line.
Dataset ingest(const std::filesystem::path& csv, const ColumnMap& columns, const ActionSet& actions,
               const PolicyRule& baseline);

/// Same, from text already in memory (`origin` labels error messages).
Dataset ingest_text(const std::string& text, const ColumnMap& columns, const ActionSet& actions,
                    const PolicyRule& baseline, const std::string& origin = "input");

/// Canonical CSV for a dataset: x1..xp,a,y then z,e and d when present.
std::string to_csv(const Dataset& data);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Bounds for one response at one level.
struct LevelBounds {
    double level = 0.0;
    /// "outcome", "effect" or "decision".
    std::string quantity;
    models::BoundedModelClass bounds;
    models::SizeReport size;
};

struct CellResult {
    double gain = 0.0;
    double level = 0.0;
    opt::MaximinReport report;
    /// worst_case_value >= baseline_value - tie tolerance.
    bool safety_check = false;
    std::optional<diag::RegretCertificate> safety;
    std::optional<diag::RegretCertificate> optimality;
};

struct RunResult {
    /// Rows the objective uses (z == 1 rows for outcome targets on
    /// experimental data).
    Dataset data;
    std::vector<LevelBounds> bounds;
    std::vector<CellResult> cells;
    std::optional<diag::RademacherEstimate> rademacher;
    std::vector<std::string> warnings;
};

/// Worker count: SAFEPL_THREADS when set, else hardware concurrency.
unsigned thread_count();

/// Builds the model classes for every level and learns one policy per
/// (gain, level) cell. Cells run on `threads` workers; results are ordered
/// gain-major and do not depend on the worker count.
RunResult run_pipeline(const RunConfig& cfg, const Dataset& data, unsigned threads = 1);

/// Bounds only, for the `widths` subcommand.
RunResult compute_widths(const RunConfig& cfg, const Dataset& data);

/// report.json, bounds.csv, size_vs_level.csv, policy_diff.csv and
/// threshold_vs_cost.csv under `dir`.
void write_run_outputs(const RunConfig& cfg, const RunResult& result, const std::filesystem::path& dir);
void write_width_outputs(const RunResult& result, const std::filesystem::path& dir);

json report_json(const RunConfig& cfg, const RunResult& result);
json certificate_json(const diag::RegretCertificate& c);

/// Shortest round-trip formatting for CSV output.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Simulation study
// ---------------------------------------------------------------------------

struct SimConfig {
    std::size_t replications = 200;
    std::vector<std::size_t> sample_sizes{500, 1000, 1500, 2000};
    std::vector<double> multipliers{0.5, 1.0, 2.0};
    std::vector<double> levels{0.0, 0.8, 0.95};
    int min_threshold = 0;
    int max_threshold = 10;
    std::uint64_t seed = 1;
    std::filesystem::path output = "out";
};

SimConfig parse_sim_config(const json& j, const std::filesystem::path& base_dir = {});

struct SimDraw {
    std::size_t n = 0;
    double multiplier = 0.0;
    double level = 0.0;
    int threshold = 0;
    double v_learned = 0.0, v_baseline = 0.0, v_oracle = 0.0;
    /// Normalized improvement and regret; unset when the oracle ties the
    /// baseline and the normalization is undefined.
    std::optional<double> improvement, regret;
};

/// One replication of one cell: draw `rep` of the design with n rows, a
/// saturated WHS band at `level`, the heuristic Lipschitz constants times
/// `multiplier`, and the threshold class.
SimDraw simulate_draw(const SimConfig& cfg, std::size_t rep, std::size_t n, double multiplier, double level);

struct SimCell {
    std::size_t n = 0;
    double multiplier = 0.0;
    double level = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
    double mean_improvement = 0.0, se_improvement = 0.0;
    double mean_regret = 0.0, se_regret = 0.0;
    /// max |improvement + regret - 1| over used draws.
    double identity_error = 0.0;
};

/// Full factorial over sample size x multiplier x level; cells in that
/// nesting order.
std::vector<SimCell> run_simulation(const SimConfig& cfg, unsigned threads = 1);

void write_simulation(const std::vector<SimCell>& cells, const std::filesystem::path& dir);

}  // namespace safepl::app
