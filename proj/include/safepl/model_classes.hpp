// Point-wise bounded model classes: for every (action, grid point) a lower
// and upper bound on the conditional expectation, derived from a band on
// the observable baseline function and a structural assumption.
//
// Every constructor takes a `grid_band` over grid points: the band for
// m~(x) = m(baseline(x), x). A band at level 0 (ConfidenceBand::exact) gives
// the population class; a band at level 1 - alpha gives the empirical class.
// Cells where the action agrees with the baseline always carry the grid band.

#pragma once

#include "safepl/bands.hpp"
#include "safepl/core.hpp"

#include <limits>
#include <map>
#include <string>
#include <vector>

namespace safepl::models {

enum class Target { outcome, effect };

/// [0,1] for outcomes, [-1,1] for effects.
std::pair<double, double> target_range(Target t);
std::string to_string(Target t);

enum class Metric { l1, l2 };

double distance(const Covariate& x, const Covariate& y, Metric metric);

struct BoundedModelClass {
    ActionSet actions;
    std::size_t grid_size = 0;
    Target target = Target::outcome;
    /// Indexed [k * grid_size + j] with k the action position.
    std::vector<double> lower;
    std::vector<double> upper;
    std::string provenance;
    std::vector<std::string> warnings;

    double lo(int action, std::size_t j) const { return lower.at(actions.index_of(action) * grid_size + j); }
    double hi(int action, std::size_t j) const { return upper.at(actions.index_of(action) * grid_size + j); }
    double lo_at(std::size_t k, std::size_t j) const { return lower[k * grid_size + j]; }
    double hi_at(std::size_t k, std::size_t j) const { return upper[k * grid_size + j]; }

    /// Throws NumericError if lower > upper or a bound leaves the target range.
    void check() const;
};

struct LipschitzSpec {
    /// lambda_a >= 0 per action label; +inf means no restriction.
    std::map<int, double> lambda;
    Metric metric = Metric::l1;
    std::vector<std::string> warnings;

    double lambda_of(int action) const;
};

BoundedModelClass bounds_no_restriction(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                        const bands::ConfidenceBand& grid_band, Target target);

/// L_a(x) = max_{x' in region a} (C_l(x') - lambda_a d(x,x')),
/// U_a(x) = min_{x' in region a} (C_u(x') + lambda_a d(x,x')), clipped.
/// One-dimensional grids use a linear-time two-pass sweep.
BoundedModelClass bounds_lipschitz(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                   const bands::ConfidenceBand& grid_band, Target target, const LipschitzSpec& spec);

/// One additive component f_S(a, x_S) over coordinates S with its band,
/// keyed by the sub-vector x_S. An empty S is an intercept.
struct AdditiveComponent {
    int action = 0;
    std::vector<std::size_t> coords;
    double lambda = 0.0;
    std::map<Covariate, std::pair<double, double>> band;
};

Covariate project(const Covariate& x, const std::vector<std::size_t>& coords);

/// Component-wise sup/inf over the action's region, summed, then clipped.
BoundedModelClass bounds_additive(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                  const bands::ConfidenceBand& grid_band, Target target,
                                  const std::vector<AdditiveComponent>& components, Metric metric = Metric::l1);

/// Fits per action region a one-hot additive decomposition (intercept plus
/// main effects, plus pairwise terms when `order` is 2) of the response by
/// minimum-norm least squares and returns WHS component bands at level
/// 1 - (1-level)/K, one Bonferroni share per region.
std::vector<AdditiveComponent> fit_additive_components(const CovariateGrid& grid, const Policy& baseline,
                                                       const ActionSet& actions,
                                                       std::span<const std::size_t> row_cell,
                                                       std::span<const double> response, int order,
                                                       const LipschitzSpec& lambdas, double level);

enum class Link { identity, logit };

/// Feature map phi(a, x). Action-specific blocks so each action has its own
/// coefficients:
///   additive          intercept + raw coordinates
///   two_way           additive + pairwise products shared across actions
///   one_hot_additive  intercept + one indicator per coordinate level
///   saturated         one indicator per grid point
struct BasisSpec {
    enum class Kind { additive, two_way, one_hot_additive, saturated };
    Kind kind = Kind::additive;
    Link link = Link::identity;

    std::size_t dimension(const ActionSet& actions, const CovariateGrid& grid) const;
    Eigen::VectorXd features(const ActionSet& actions, const CovariateGrid& grid, int action,
                             const Covariate& x) const;
};

/// Null-space tolerance for deciding that phi(a,x) is identified.
inline constexpr double kNullTolerance = 1e-8;

struct GlmNullspaceResult {
    BoundedModelClass bounds;
    bands::LinearModelFit fit;
    /// Per (k, j): whether phi(a, x) is orthogonal to the null space.
    std::vector<bool> identified;
};

/// Regresses the response on phi(baseline(x), x) (per row for the identity
/// link; per cell on continuity-corrected logits for the logit link), then
/// bounds each (a, x) by the WHS band mapped through the inverse link when
/// ||D^T phi|| <= kNullTolerance, and by the full range otherwise.
/// When `grid_band` is given, agreement cells carry it instead.
GlmNullspaceResult bounds_glm_nullspace(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                        std::span<const std::size_t> row_cell, std::span<const double> response,
                                        const BasisSpec& basis, double level, Target target,
                                        const bands::ConfidenceBand* grid_band = nullptr);

/// lambda_a = multiplier * max over consecutive region points of
/// |est(x_{i+1}) - est(x_i)| / |x_{i+1} - x_i| on a one-dimensional grid.
/// A region with a single point gets +inf and a warning.
LipschitzSpec lipschitz_heuristic(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                  std::span<const double> estimates, double multiplier = 3.0);

struct SizeReport {
    double total = 0.0;
    /// Sum_j w_j (B_u - B_l)(a, j) per action position.
    std::vector<double> per_action;
};

/// Sum_j w_j max_a (B_u(a,j) - B_l(a,j)). With the empirical grid this is the
/// average over rows.
SizeReport empirical_size(const BoundedModelClass& cls, const CovariateGrid& grid);

/// Population pinning helper: the grid band for a known model m.
bands::ConfidenceBand population_band(const ModelTable& model, const Policy& baseline);

}  // namespace safepl::models
