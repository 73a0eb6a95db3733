// Learning from an experiment against a null policy (transformed outcome on
// the effect scale) and from human decisions that respond to the policy.

#pragma once

#include "safepl/bands.hpp"
#include "safepl/model_classes.hpp"
#include "safepl/optimizer.hpp"

#include <vector>

namespace safepl::ext {

/// Gamma_i = Y_i (Z_i - e_i) / (e_i (1 - e_i)).
std::vector<double> transformed_outcome(const Dataset& data);

struct EffectEstimates {
    /// Per grid point: mean of Gamma over the stratum.
    std::vector<double> tau;
    /// False when the stratum lacks a treated or a control row.
    std::vector<bool> available;
};

EffectEstimates effect_estimates(const Dataset& data, std::span<const double> gamma);

/// WHS band on the saturated design over strata for the baseline effect
/// tau(baseline(x), x). Strata without both arms are vacuous on [-1,1].
bands::ConfidenceBand effect_band(const Dataset& data, std::span<const double> gamma, double level);

/// Maximin regret against the null policy: Gamma replaces Y on agreement
/// cells and the effect class supplies the bounds elsewhere.
opt::MaximinReport learn_from_experiment(const Dataset& data, const models::BoundedModelClass& effect_class,
                                         const UtilitySpec& util, const PolicyClass& policy_class);

/// Objective of the experiment path, for reuse by diagnostics and sweeps.
opt::Objective experiment_objective(const Dataset& data, const models::BoundedModelClass& effect_class,
                                    const UtilitySpec& util);

/// Value u * Y(a) + cost(a) + c * D(a); the outcome term takes the worst case
/// over the outcome class and the decision term over the decision class.
/// Gains must be constant across actions.
opt::Objective decisions_objective(const Dataset& data, const models::BoundedModelClass& outcome_class,
                                   const models::BoundedModelClass& decision_class, const UtilitySpec& util,
                                   double decision_cost);

opt::MaximinReport learn_with_decisions(const Dataset& data, const models::BoundedModelClass& outcome_class,
                                        const models::BoundedModelClass& decision_class, const UtilitySpec& util,
                                        double decision_cost, const PolicyClass& policy_class);

/// Bonferroni split used when outcome and decision classes are built
/// together: each band is built at level 1 - alpha/2.
inline double bonferroni_half(double level) { return level == 0.0 ? 0.0 : 1.0 - (1.0 - level) / 2.0; }

}  // namespace safepl::ext
