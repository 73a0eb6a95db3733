#include "safepl/app.hpp"

#include "app_parallel.hpp"
#include "safepl/simlab.hpp"

#include <cmath>

namespace safepl::app {

namespace {

std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep) {
    return sim::splitmix64(seed ^ sim::splitmix64(static_cast<std::uint64_t>(rep) + 1));
}

double threshold_value(int t, const sim::RffInstance& inst) {
    return value(Policy::from_rule(ThresholdRule{{0}, t}, inst.grid), inst.truth, inst.grid, inst.util);
}

}  // namespace

SimDraw simulate_draw(const SimConfig& cfg, std::size_t rep, std::size_t n, double multiplier, double level) {
    const auto inst = sim::gen_rff_instance(replication_seed(cfg.seed, rep), n);
    const auto& data = inst.data;
    std::vector<double> y(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) y[i] = data.row(i).outcome;

    const auto band = bands::saturated_whs_bands(data.cells(), y, data.grid().size(), level, 0.0, 1.0);
    const auto lip =
        models::lipschitz_heuristic(data.grid(), data.baseline(), data.actions(), band.estimate, multiplier);
    const auto cls = models::bounds_lipschitz(data.grid(), data.baseline(), data.actions(), band,
                                              models::Target::outcome, lip);
    const auto obj = opt::Objective::from_table(opt::quasi_outcomes(data, cls, inst.util), inst.util);
    const auto report = opt::learn_threshold(obj, ThresholdClass{{0}, cfg.min_threshold, cfg.max_threshold});

    SimDraw d;
    d.n = n;
    d.multiplier = multiplier;
    d.level = level;
    d.threshold = report.params.at(0);
    d.v_learned = threshold_value(d.threshold, inst);
    d.v_baseline = threshold_value(5, inst);
    d.v_oracle = d.v_baseline;
    for (int t = cfg.min_threshold; t <= cfg.max_threshold; ++t) d.v_oracle = std::max(d.v_oracle, threshold_value(t, inst));
    const double den = d.v_oracle - d.v_baseline;
    if (den > 1e-12) {
        d.improvement = (d.v_learned - d.v_baseline) / den;
        d.regret = (d.v_oracle - d.v_learned) / den;
    }
    return d;
}

std::vector<SimCell> run_simulation(const SimConfig& cfg, unsigned threads) {
    struct Key {
        std::size_t n;
        double mult, level;
    };
    std::vector<Key> keys;
    for (auto n : cfg.sample_sizes)
        for (double m : cfg.multipliers)
            for (double l : cfg.levels) keys.push_back({n, m, l});
    const std::size_t R = cfg.replications;
    std::vector<SimDraw> draws(keys.size() * R);
    detail::parallel_for(draws.size(), threads, [&](std::size_t i) {
        const auto& k = keys[i / R];
        draws[i] = simulate_draw(cfg, i % R, k.n, k.mult, k.level);
    });

    std::vector<SimCell> cells;
    for (std::size_t c = 0; c < keys.size(); ++c) {
        SimCell cell{keys[c].n, keys[c].mult, keys[c].level};
        double si = 0, si2 = 0, sr = 0, sr2 = 0;
        for (std::size_t r = 0; r < R; ++r) {
            const auto& d = draws[c * R + r];
            if (!d.improvement) {
                ++cell.excluded;
                continue;
            }
            ++cell.used;
            si += *d.improvement;
            si2 += *d.improvement * *d.improvement;
            sr += *d.regret;
            sr2 += *d.regret * *d.regret;
            cell.identity_error = std::max(cell.identity_error, std::abs(*d.improvement + *d.regret - 1.0));
        }
        if (cell.used > 0) {
            const double u = static_cast<double>(cell.used);
            cell.mean_improvement = si / u;
            cell.mean_regret = sr / u;
            if (cell.used > 1) {
                cell.se_improvement = std::sqrt(std::max(0.0, (si2 - u * cell.mean_improvement * cell.mean_improvement) / (u - 1)) / u);
                cell.se_regret = std::sqrt(std::max(0.0, (sr2 - u * cell.mean_regret * cell.mean_regret) / (u - 1)) / u);
            }
        }
        cells.push_back(cell);
    }
    return cells;
}

}  // namespace safepl::app
