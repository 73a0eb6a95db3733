#include "safepl/app.hpp"

#include "app_parallel.hpp"
#include "safepl/extensions.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace safepl::app {

unsigned thread_count() {
    if (const char* s = std::getenv("SAFEPL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(s, &end, 10);
        if (end == s || *end != '\0' || v < 1) throw ConfigError("SAFEPL_THREADS must be a positive integer");
        return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Rethrows module errors with the config key that selected the step.
template <class Fn>
auto with_context(const std::string& where, Fn fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(where + ": " + e.what());
    }
}

struct Response {
    std::string quantity;
    models::Target target;
    std::vector<double> values;
    const ModelSpec* spec;
    std::string key;
};

struct Prepared {
    Dataset data;
    std::vector<Response> responses;
};

Prepared prepare(const RunConfig& cfg, const Dataset& raw) {
    auto outcomes = [](const Dataset& d) {
        std::vector<double> y(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) y[i] = d.row(i).outcome;
        return y;
    };
    switch (cfg.target) {
        case TargetKind::outcome: {
            // On experimental data only the rows that followed the baseline
            // identify m~.
            Dataset d = raw.has_assignment() ? raw.filter([](const Observation& r) { return *r.assignment == 1; })
                                             : raw;
            if (d.size() == 0) throw DataError("no rows with z = 1");
            auto y = outcomes(d);
            return {std::move(d), {{"outcome", models::Target::outcome, std::move(y), &cfg.model, "model"}}};
        }
        case TargetKind::effect: {
            if (!raw.has_assignment()) throw DataError("effect target needs z and e columns");
            auto g = ext::transformed_outcome(raw);
            return {raw, {{"effect", models::Target::effect, std::move(g), &cfg.model, "model"}}};
        }
        case TargetKind::decisions: {
            if (!raw.has_decision()) throw DataError("decisions target needs a d column");
            Dataset d = raw.has_assignment() ? raw.filter([](const Observation& r) { return *r.assignment == 1; })
                                             : raw;
            if (d.size() == 0) throw DataError("no rows with z = 1");
            auto y = outcomes(d);
            std::vector<double> dec(d.size());
            for (std::size_t i = 0; i < d.size(); ++i) dec[i] = *d.row(i).decision;
            const ModelSpec* dspec = cfg.decision_model ? &*cfg.decision_model : &cfg.model;
            std::vector<Response> rs;
            rs.push_back({"outcome", models::Target::outcome, std::move(y), &cfg.model, "model"});
            rs.push_back({"decision", models::Target::outcome, std::move(dec), dspec,
                          cfg.decision_model ? "decision_model" : "model"});
            return {std::move(d), std::move(rs)};
        }
    }
    throw ConfigError("unknown target");
}

bands::ConfidenceBand grid_band(const RunConfig& cfg, const Dataset& data, const Response& r, double level) {
    const std::size_t J = data.grid().size();
    if (r.target == models::Target::effect) return ext::effect_band(data, r.values, level);
    if (cfg.band == BandKind::whs) {
        const auto [lo, hi] = models::target_range(r.target);
        return bands::saturated_whs_bands(data.cells(), r.values, J, level, lo, hi);
    }
    std::vector<double> succ(J, 0.0), trials(J, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        succ[data.cell(i)] += r.values[i];
        trials[data.cell(i)] += 1.0;
    }
    return bands::stratum_bands(succ, trials, level);
}

models::BoundedModelClass build_class(const RunConfig& cfg, const Dataset& data, const Response& r, double level) {
    const auto band = with_context("band", [&] { return grid_band(cfg, data, r, level); });
    const ModelSpec& spec = *r.spec;
    const auto& grid = data.grid();
    const auto& base = data.baseline();
    const auto& actions = data.actions();
    return with_context(r.key, [&]() -> models::BoundedModelClass {
        switch (spec.kind) {
            case ModelSpec::Kind::no_restriction:
                return models::bounds_no_restriction(grid, base, actions, band, r.target);
            case ModelSpec::Kind::lipschitz: {
                models::LipschitzSpec ls;
                if (spec.lambda.empty()) {
                    ls = models::lipschitz_heuristic(grid, base, actions, band.estimate, *spec.multiplier);
                } else {
                    ls.lambda = spec.lambda;
                }
                ls.metric = spec.metric;
                auto c = models::bounds_lipschitz(grid, base, actions, band, r.target, ls);
                c.warnings.insert(c.warnings.begin(), ls.warnings.begin(), ls.warnings.end());
                return c;
            }
            case ModelSpec::Kind::additive: {
                models::LipschitzSpec ls;
                ls.metric = spec.metric;
                for (int a : actions.labels()) {
                    auto it = spec.lambda.find(a);
                    ls.lambda[a] = it == spec.lambda.end() ? std::numeric_limits<double>::infinity() : it->second;
                }
                auto comps = models::fit_additive_components(grid, base, actions, data.cells(), r.values, spec.order,
                                                             ls, level);
                return models::bounds_additive(grid, base, actions, band, r.target, comps, spec.metric);
            }
            case ModelSpec::Kind::glm:
                return models::bounds_glm_nullspace(grid, base, actions, data.cells(), r.values, spec.basis, level,
                                                    r.target, &band)
                    .bounds;
        }
        throw ConfigError("unknown model class");
    });
}

UtilitySpec utility_for(const RunConfig& cfg, double gain) {
    if (cfg.gains.empty()) return cfg.utility;
    return UtilitySpec::constant_gain(cfg.actions, gain, cfg.utility.cost);
}

double nominal_gain(const UtilitySpec& u) { return u.gain.empty() ? 0.0 : u.gain.begin()->second; }

}  // namespace

RunResult compute_widths(const RunConfig& cfg, const Dataset& raw) {
    auto prep = with_context("target", [&] { return prepare(cfg, raw); });
    RunResult res{prep.data, {}, {}, std::nullopt, {}};
    for (double level : cfg.levels) {
        // Outcome and decision bands share alpha when both are built.
        const double lv = prep.responses.size() > 1 ? ext::bonferroni_half(level) : level;
        for (const auto& r : prep.responses) {
            auto cls = build_class(cfg, prep.data, r, lv);
            auto size = models::empirical_size(cls, prep.data.grid());
            for (const auto& w : cls.warnings) res.warnings.push_back("level " + format_double(level) + ": " + w);
            res.bounds.push_back({level, r.quantity, std::move(cls), std::move(size)});
        }
    }
    return res;
}

RunResult run_pipeline(const RunConfig& cfg, const Dataset& raw, unsigned threads) {
    RunResult res = compute_widths(cfg, raw);
    const Dataset& data = res.data;
    const auto cls = with_context("policy_class", [&] { return cfg.policy_class.resolve(data.grid()); });
    const std::size_t R = res.bounds.size() / cfg.levels.size();

    // Enumerated members feed the Rademacher estimate and the policy-weighted
    // width; classes too large to enumerate skip both.
    std::optional<std::vector<Policy>> members;
    if (cfg.certificate.enabled) {
        try {
            std::vector<Policy> pols;
            for (auto& m : opt::enumerate_policies(cls, data.grid())) pols.push_back(std::move(m.policy));
            std::sort(pols.begin(), pols.end());
            pols.erase(std::unique(pols.begin(), pols.end()), pols.end());
            members = std::move(pols);
        } catch (const Error& e) {
            res.warnings.push_back(std::string("policy class not enumerated: ") + e.what());
        }
        if (cfg.certificate.kind == diag::Complexity::Kind::rademacher && members && data.actions().is_binary01())
            res.rademacher = diag::rademacher_estimate(*members, data.cells(), cfg.certificate.replications, cfg.seed,
                                                       threads);
        else if (cfg.certificate.kind == diag::Complexity::Kind::rademacher)
            res.warnings.push_back("Rademacher complexity unavailable; certificates omitted");
    }

    const std::vector<double> gains = cfg.gains.empty() ? std::vector<double>{nominal_gain(cfg.utility)} : cfg.gains;
    std::vector<std::pair<double, std::size_t>> grid;
    for (double g : gains)
        for (std::size_t l = 0; l < cfg.levels.size(); ++l) grid.emplace_back(g, l);
    res.cells.resize(grid.size());
    std::vector<std::vector<std::string>> cell_warnings(grid.size());

    detail::parallel_for(grid.size(), threads, [&](std::size_t c) {
        const auto [gain, l] = grid[c];
        const double level = cfg.levels[l];
        const auto util = utility_for(cfg, gain);
        const auto& primary = res.bounds[l * R].bounds;
        opt::Objective obj = with_context("utility", [&] {
            switch (cfg.target) {
                case TargetKind::outcome:
                    return opt::Objective::from_table(opt::quasi_outcomes(data, primary, util), util);
                case TargetKind::effect: return ext::experiment_objective(data, primary, util);
                case TargetKind::decisions:
                    return ext::decisions_objective(data, primary, res.bounds[l * R + 1].bounds, util,
                                                    cfg.decision_cost);
            }
            throw ConfigError("unknown target");
        });
        CellResult cell;
        cell.gain = gain;
        cell.level = level;
        cell.report = with_context("policy_class", [&] { return opt::learn(obj, cls); });
        cell.safety_check = cell.report.worst_case_value >= cell.report.baseline_value - obj.tie_tolerance();

        if (cfg.certificate.enabled) {
            std::optional<diag::Complexity> cx;
            if (cfg.certificate.kind == diag::Complexity::Kind::vc)
                cx = diag::Complexity{diag::Complexity::Kind::vc, cfg.certificate.vc_dimension,
                                      cfg.certificate.universal_constant};
            else if (res.rademacher)
                cx = diag::Complexity{diag::Complexity::Kind::rademacher, res.rademacher->value, 1.0};
            if (cx) {
                double C = util.magnitude();
                if (cfg.target == TargetKind::decisions) C += std::abs(cfg.decision_cost);
                with_context("certificate", [&] {
                    cell.safety = diag::safety_bound(data.size(), 1.0 - level, cfg.certificate.delta, C, *cx);
                    return 0;
                });
                if (cfg.target != TargetKind::decisions) {
                    try {
                        std::optional<double> pw;
                        if (members)
                            pw = diag::policy_weighted_width(primary, data.grid(), data.baseline(), *members);
                        cell.optimality = diag::optimality_bound(res.bounds[l * R].size.total, data.size(),
                                                                 1.0 - level, cfg.certificate.delta, util, *cx, pw);
                    } catch (const ConfigError& e) {
                        cell_warnings[c].push_back("gain " + format_double(gain) + ", level " + format_double(level) +
                                                   ": optimality certificate skipped: " + e.what());
                    }
                }
            }
        }
        res.cells[c] = std::move(cell);
    });
    for (auto& w : cell_warnings) res.warnings.insert(res.warnings.end(), w.begin(), w.end());
    return res;
}

}  // namespace safepl::app
