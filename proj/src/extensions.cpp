#include "safepl/extensions.hpp"

namespace safepl::ext {

std::vector<double> transformed_outcome(const Dataset& data) {
    if (!data.has_assignment()) throw DataError("transformed outcome needs assignment z and propensity e columns");
    std::vector<double> g(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data.row(i);
        const double e = *r.propensity;
        if (!(e > 0.0 && e < 1.0)) throw DataError("row " + std::to_string(i) + ": propensity must lie in (0,1)");
        g[i] = r.outcome * (*r.assignment - e) / (e * (1.0 - e));
    }
    return g;
}

EffectEstimates effect_estimates(const Dataset& data, std::span<const double> gamma) {
    if (gamma.size() != data.size()) throw DataError("transformed outcome does not cover the dataset");
    const std::size_t J = data.grid().size();
    std::vector<double> sum(J, 0.0), count(J, 0.0);
    std::vector<int> treated(J, 0), control(J, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t j = data.cell(i);
        sum[j] += gamma[i];
        count[j] += 1.0;
        (*data.row(i).assignment ? treated : control)[j] += 1;
    }
    EffectEstimates est;
    est.tau.resize(J);
    est.available.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        est.available[j] = treated[j] > 0 && control[j] > 0;
        est.tau[j] = count[j] > 0.0 ? sum[j] / count[j] : 0.0;
    }
    return est;
}

bands::ConfidenceBand effect_band(const Dataset& data, std::span<const double> gamma, double level) {
    const auto est = effect_estimates(data, gamma);
    std::vector<std::size_t> cells;
    std::vector<double> resp;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (est.available[data.cell(i)]) {
            cells.push_back(data.cell(i));
            resp.push_back(gamma[i]);
        }
    if (cells.empty()) {
        bands::ConfidenceBand b;
        b.level = level;
        const std::size_t J = data.grid().size();
        b.estimate.assign(J, 0.0);
        b.lower.assign(J, -1.0);
        b.upper.assign(J, 1.0);
        b.vacuous.assign(J, true);
        return b;
    }
    return bands::saturated_whs_bands(cells, resp, data.grid().size(), level, -1.0, 1.0);
}

opt::Objective experiment_objective(const Dataset& data, const models::BoundedModelClass& effect_class,
                                    const UtilitySpec& util) {
    if (effect_class.target != models::Target::effect)
        throw ConfigError("learning from an experiment needs an effect-target model class");
    if (!util.has_constant_gain())
        throw ConfigError("learning from an experiment assumes a gain that is constant across actions");
    const auto gamma = transformed_outcome(data);
    return opt::Objective::from_table(opt::quasi_outcomes(data, effect_class, util, gamma), util);
}

opt::MaximinReport learn_from_experiment(const Dataset& data, const models::BoundedModelClass& effect_class,
                                         const UtilitySpec& util, const PolicyClass& policy_class) {
    return opt::learn(experiment_objective(data, effect_class, util), policy_class);
}

opt::Objective decisions_objective(const Dataset& data, const models::BoundedModelClass& outcome_class,
                                   const models::BoundedModelClass& decision_class, const UtilitySpec& util,
                                   double decision_cost) {
    if (!data.has_decision()) throw DataError("decision column d is absent");
    if (!util.has_constant_gain())
        throw ConfigError("decision-aware learning assumes a gain that is constant across decisions and actions");
    std::vector<double> d(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) d[i] = *data.row(i).decision;

    UtilitySpec dutil;
    for (int a : data.actions().labels()) {
        dutil.gain[a] = decision_cost;
        dutil.cost[a] = 0.0;
    }
    auto obj = opt::Objective::from_table(opt::quasi_outcomes(data, outcome_class, util), util);
    obj.add(opt::Objective::from_table(opt::quasi_outcomes(data, decision_class, dutil, d), dutil));
    return obj;
}

opt::MaximinReport learn_with_decisions(const Dataset& data, const models::BoundedModelClass& outcome_class,
                                        const models::BoundedModelClass& decision_class, const UtilitySpec& util,
                                        double decision_cost, const PolicyClass& policy_class) {
    return opt::learn(decisions_objective(data, outcome_class, decision_class, util, decision_cost), policy_class);
}

}  // namespace safepl::ext
