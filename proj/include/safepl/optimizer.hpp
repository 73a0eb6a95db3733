// Quasi-outcomes and exact maximin search over the supported policy classes.
//
// With point-wise bounds the inner minimization separates per (row, action):
// a deviating cell takes the lower bound when the gain is nonnegative and the
// upper bound otherwise. The outer maximization is then plain welfare
// maximization over the quasi-outcomes, solved exactly per class.

#pragma once

#include "safepl/core.hpp"
#include "safepl/model_classes.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace safepl::opt {

enum class Source : std::uint8_t { observed, lower, upper };

/// Per row and action: the quasi-outcome and where it came from.
struct QuasiOutcomeTable {
    CovariateGrid grid;
    Policy baseline;
    ActionSet actions;
    std::vector<std::size_t> row_cell;
    /// Row weights; empty means uniform 1/n.
    std::vector<double> row_weight;
    /// Indexed [i * K + k].
    std::vector<double> values;
    std::vector<Source> source;

    std::size_t rows() const { return row_cell.size(); }
    double at(std::size_t i, std::size_t k) const { return values[i * actions.size() + k]; }
    Source source_at(std::size_t i, std::size_t k) const { return source[i * actions.size() + k]; }
};

/// Observed outcome (or `response[i]` when given, e.g. a transformed outcome)
/// where the action agrees with the baseline; B_l if gain >= 0, B_u otherwise.
QuasiOutcomeTable quasi_outcomes(const Dataset& data, const models::BoundedModelClass& cls, const UtilitySpec& util,
                                 std::span<const double> response = {});

/// Population analog: one pseudo-row per grid point carrying m~(x) with the
/// grid weight.
QuasiOutcomeTable population_table(const CovariateGrid& grid, const Policy& baseline,
                                   std::span<const double> baseline_mean, const models::BoundedModelClass& cls,
                                   const UtilitySpec& util);

/// Linear objective sum_i w_i t_i(pi(X_i)) with per-row contributions t_i(a).
class Objective {
public:
    /// t_i(a) = gain(a) * quasi_i(a) + cost(a).
    static Objective from_table(const QuasiOutcomeTable& table, const UtilitySpec& util);

    /// Adds another objective over the same rows (contributions are summed).
    Objective& add(const Objective& other);

    /// Row-wise value; for uniform weights (sum_i t_i) / n.
    double value(const Policy& policy) const;
    /// Aggregated weight * contribution per (grid point, action position).
    double cell_score(std::size_t j, std::size_t k) const { return cell_[j * K_ + k]; }
    /// Value from cell scores; equal to value() up to rounding.
    double cell_value(const Policy& policy) const;
    /// Absolute tolerance used to call two values tied.
    double tie_tolerance() const;

    const CovariateGrid& grid() const { return grid_; }
    const Policy& baseline() const { return baseline_; }
    const ActionSet& actions() const { return actions_; }
    std::size_t rows() const { return row_cell_.size(); }

private:
    void rebuild_cells();

    CovariateGrid grid_;
    Policy baseline_;
    ActionSet actions_;
    std::size_t K_ = 0;
    std::vector<std::size_t> row_cell_;
    std::vector<double> row_weight_;
    std::vector<double> contrib_;
    std::vector<double> cell_;
};

/// (1/n) sum_i sum_a pi(a|X_i) (u(a) quasi_i(a) + c(a)).
double maximin_value(const Policy& policy, const QuasiOutcomeTable& table, const UtilitySpec& util);

struct SearchStats {
    std::uint64_t policies_evaluated = 0;
    std::uint64_t nodes_expanded = 0;
};

struct MaximinReport {
    Policy policy;
    std::vector<int> params;
    std::string description;
    double worst_case_value = 0.0;
    double baseline_value = 0.0;
    double improvement = 0.0;
    std::size_t deviations = 0;
    bool baseline_in_class = false;
    std::string policy_class;
    SearchStats stats;
    std::vector<std::string> tie_break;
    std::vector<std::string> warnings;
};

MaximinReport learn_threshold(const Objective& obj, const ThresholdClass& cls);
MaximinReport learn_integer_weights(const Objective& obj, const IntegerWeightClass& cls);
MaximinReport learn_monotone_grid(const Objective& obj, const MonotoneGridClass& cls);
MaximinReport learn_explicit(const Objective& obj, const ExplicitClass& cls);
MaximinReport learn(const Objective& obj, const PolicyClass& cls);

/// Nonincreasing boundaries b (values 0..cols) of all monotone 0/1 grids
/// with `rows` x `cols` cells; count C(rows+cols, rows). Limited to 8 x 8.
std::vector<std::vector<int>> enumerate_order_ideals(int rows, int cols);

struct EnumeratedPolicy {
    std::vector<int> params;
    Policy policy;
};

/// All members of an enumerable class on `grid`. Integer-weight boxes are
/// enumerated when they hold at most `limit` vectors.
std::vector<EnumeratedPolicy> enumerate_policies(const PolicyClass& cls, const CovariateGrid& grid,
                                                 std::uint64_t limit = 1'000'000);

/// The rule realizing a class member with the given params. Explicit members
/// become table rules over `grid`.
PolicyRule rule_for(const PolicyClass& cls, const std::vector<int>& params, const CovariateGrid& grid);

}  // namespace safepl::opt
