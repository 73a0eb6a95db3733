// Domain data model for safe policy learning under a deterministic baseline.
//
// Everything here is immutable after construction. Covariates live on a
// finite integer grid; policies are total maps from grid points to action
// labels; values are computed in double precision with no hidden state.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace safepl {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (config 2, data 3, numeric 4).
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

using Covariate = std::vector<int>;

std::string to_string(const Covariate& x);

// ---------------------------------------------------------------------------
// CovariateGrid
// ---------------------------------------------------------------------------

/// Distinct covariate points with a probability mass on each.
class CovariateGrid {
public:
    CovariateGrid() = default;
    CovariateGrid(std::vector<Covariate> points, std::vector<double> weights);

    /// Every point gets mass 1/J.
    static CovariateGrid uniform(std::vector<Covariate> points);

    /// Empirical grid of a sample: sorted distinct points, weight = count/n.
    /// `row_index` receives the grid index of each sample row.
    static CovariateGrid empirical(std::span<const Covariate> sample,
                                   std::vector<std::size_t>* row_index = nullptr);

    std::size_t size() const { return points_.size(); }
    std::size_t dimension() const { return points_.empty() ? 0 : points_.front().size(); }
    const Covariate& point(std::size_t j) const { return points_.at(j); }
    double weight(std::size_t j) const { return weights_.at(j); }
    std::span<const Covariate> points() const { return points_; }
    std::span<const double> weights() const { return weights_; }

    std::optional<std::size_t> find(const Covariate& x) const;

private:
    std::vector<Covariate> points_;
    std::vector<double> weights_;
    std::map<Covariate, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// ActionSet / UtilitySpec
// ---------------------------------------------------------------------------

class ActionSet {
public:
    ActionSet() = default;
    explicit ActionSet(std::vector<int> labels);

    static ActionSet binary() { return ActionSet({0, 1}); }

    std::size_t size() const { return labels_.size(); }
    int label(std::size_t k) const { return labels_.at(k); }
    std::span<const int> labels() const { return labels_; }
    bool contains(int label) const;
    /// Position of `label`; throws DataError if absent.
    std::size_t index_of(int label) const;
    bool is_binary01() const { return labels_.size() == 2 && labels_[0] == 0 && labels_[1] == 1; }

    bool operator==(const ActionSet&) const = default;

private:
    std::vector<int> labels_;
};

/// Utility u(y, a) = gain(a) * y + cost(a), so gain(a) = u(1,a) - u(0,a) and
/// cost(a) = u(0,a).
struct UtilitySpec {
    std::map<int, double> gain;
    std::map<int, double> cost;

    static UtilitySpec constant_gain(const ActionSet& actions, double gain,
                                     std::map<int, double> cost);

    double gain_of(int action) const;
    double cost_of(int action) const;
    /// Throws ConfigError unless every action has both entries.
    void validate(const ActionSet& actions) const;
    bool has_constant_gain() const;
    /// C = max_{y,a} |u(y,a)|.
    double magnitude() const;
};

// ---------------------------------------------------------------------------
// Policy rules and policies
// ---------------------------------------------------------------------------

/// 1{ sum_{f in features} x_f >= threshold }.
struct ThresholdRule {
    std::vector<std::size_t> features;
    int threshold = 0;
};

/// 1{ sum_j weights_j x_j >= threshold }.
struct IntegerWeightRule {
    std::vector<int> weights;
    int threshold = 0;
};

/// Staircase on two integer axes. Row r covers axis-0 value lo[0] + r; the
/// rule is 1 at (lo[0]+r, lo[1]+c) iff c >= boundary[r]. Monotone in both
/// axes iff boundary is nonincreasing.
struct MonotoneRule {
    std::size_t axis0 = 0;
    std::size_t axis1 = 1;
    int lo0 = 0;
    int lo1 = 0;
    int columns = 0;
    std::vector<int> boundary;
};

/// Explicit lookup; points not listed take `fallback` when present.
struct TableRule {
    std::map<Covariate, int> table;
    std::optional<int> fallback;
};

using PolicyRule = std::variant<ThresholdRule, IntegerWeightRule, MonotoneRule, TableRule>;

/// Action label chosen by the rule. Binary families emit labels 0 and 1.
int apply_rule(const PolicyRule& rule, const Covariate& x);
std::string describe_rule(const PolicyRule& rule);

/// Total map from grid indices to action labels.
class Policy {
public:
    Policy() = default;
    explicit Policy(std::vector<int> labels) : labels_(std::move(labels)) {}

    static Policy from_rule(const PolicyRule& rule, const CovariateGrid& grid);
    static Policy constant(std::size_t grid_size, int label) {
        return Policy(std::vector<int>(grid_size, label));
    }

    std::size_t size() const { return labels_.size(); }
    int at(std::size_t j) const { return labels_.at(j); }
    std::span<const int> labels() const { return labels_; }

    /// Grid points where the two policies disagree.
    std::size_t deviations(const Policy& other) const;
    /// Throws DataError if any label is outside `actions`.
    void validate(const ActionSet& actions, std::size_t grid_size) const;

    bool operator==(const Policy&) const = default;
    auto operator<=>(const Policy&) const = default;

private:
    std::vector<int> labels_;
};

// ---------------------------------------------------------------------------
// Policy classes
// ---------------------------------------------------------------------------

struct ThresholdClass {
    std::vector<std::size_t> features;
    int min_threshold = 0;
    int max_threshold = 0;
};

struct IntegerWeightClass {
    std::size_t dimension = 0;
    int weight_min = 0;
    int weight_max = 4;
    int threshold = 4;
    /// When set, the threshold becomes an extra integer decision variable.
    std::optional<std::pair<int, int>> threshold_range;
};

struct MonotoneGridClass {
    std::size_t axis0 = 0;
    std::size_t axis1 = 1;
    int lo0 = 1;
    int hi0 = 6;
    int lo1 = 1;
    int hi1 = 6;
};

struct ExplicitClass {
    std::vector<Policy> policies;
};

using PolicyClass = std::variant<ThresholdClass, IntegerWeightClass, MonotoneGridClass, ExplicitClass>;

std::string class_name(const PolicyClass& cls);

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct Observation {
    Covariate x;
    int action = 0;
    int outcome = 0;
    std::optional<int> assignment;
    std::optional<double> propensity;
    std::optional<int> decision;
};

/// Observations generated by a known deterministic baseline rule.
///
/// Construction validates every row (binary outcome/assignment/decision,
/// propensity in (0,1) whenever an assignment is present, and a = baseline(x))
/// and builds the empirical grid with the baseline policy on it.
class Dataset {
public:
    /// `first_line` > 0 makes error messages cite file lines
    /// (row i is reported as line first_line + i).
    Dataset(std::vector<Observation> rows, ActionSet actions, PolicyRule baseline,
            std::size_t first_line = 0);

    std::size_t size() const { return rows_.size(); }
    const Observation& row(std::size_t i) const { return rows_.at(i); }
    std::span<const Observation> rows() const { return rows_; }
    const ActionSet& actions() const { return actions_; }
    const PolicyRule& baseline_rule() const { return baseline_rule_; }
    const CovariateGrid& grid() const { return grid_; }
    const Policy& baseline() const { return baseline_; }
    std::size_t cell(std::size_t i) const { return row_cell_.at(i); }
    std::span<const std::size_t> cells() const { return row_cell_; }

    bool has_assignment() const { return has_assignment_; }
    bool has_decision() const { return has_decision_; }

    /// Rows satisfying `keep`, as a new dataset with its own empirical grid.
    template <class Pred>
    Dataset filter(Pred keep) const {
        std::vector<Observation> kept;
        for (const auto& r : rows_)
            if (keep(r)) kept.push_back(r);
        return Dataset(std::move(kept), actions_, baseline_rule_);
    }

private:
    std::vector<Observation> rows_;
    ActionSet actions_;
    PolicyRule baseline_rule_;
    CovariateGrid grid_;
    Policy baseline_;
    std::vector<std::size_t> row_cell_;
    bool has_assignment_ = false;
    bool has_decision_ = false;
};

// ---------------------------------------------------------------------------
// ModelTable and value arithmetic
// ---------------------------------------------------------------------------

/// Conditional expectation m(a, x) over ActionSet x grid; entries may be unset.
class ModelTable {
public:
    ModelTable() = default;
    ModelTable(ActionSet actions, std::size_t grid_size);

    void set(int action, std::size_t j, double value);
    bool has(int action, std::size_t j) const;
    /// Throws DataError naming (a, j) when unset.
    double at(int action, std::size_t j) const;

    const ActionSet& actions() const { return actions_; }
    std::size_t grid_size() const { return grid_size_; }

private:
    ActionSet actions_;
    std::size_t grid_size_ = 0;
    std::vector<std::optional<double>> values_;
};

/// V(pi, m) = sum_x w(x) [u(pi(x)) m(pi(x), x) + c(pi(x))].
double value(const Policy& policy, const ModelTable& model, const CovariateGrid& grid,
             const UtilitySpec& util);

/// Sample analog: observed Y where pi agrees with the baseline, model values
/// elsewhere, averaged with weight 1/n.
double empirical_value(const Policy& policy, const Dataset& data, const ModelTable& model,
                       const UtilitySpec& util);

/// (1/n) sum_i [u(A_i) Y_i + c(A_i)]; point-identified.
double baseline_value(const Dataset& data, const UtilitySpec& util);

/// R(pi1, pi2, m) = V(pi2, m) - V(pi1, m).
double regret(const Policy& pi1, const Policy& pi2, const ModelTable& model,
              const CovariateGrid& grid, const UtilitySpec& util);

}  // namespace safepl
