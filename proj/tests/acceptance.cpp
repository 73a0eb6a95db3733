// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "bruteforce.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include "safepl/app.hpp"
#include "safepl/bands.hpp"
#include "safepl/extensions.hpp"
#include "safepl/optimizer.hpp"
#include "safepl/simlab.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

using namespace safepl;
using testsupport::Rng;
using testsupport::uniform_int;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass = false;
    std::string detail;
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

models::BoundedModelClass pinned_class(Rng& rng, const Dataset& data) {
    return testsupport::random_class(rng, data.baseline(), std::vector<double>(data.grid().size(), 0.5));
}

// 1. Learned worst-case value never falls below the baseline value.
Outcome safety_identity() {
    Rng rng(1001);
    int violations = 0;
    const int N = 1000;
    for (int t = 0; t < N; ++t) {
        const int J = uniform_int(rng, 1, 20);
        const auto data = testsupport::random_line_dataset(rng, J, uniform_int(rng, 0, J), rng.below(40));
        const auto cls = pinned_class(rng, data);
        const auto u = testsupport::random_utility(rng);
        ExplicitClass pc{{data.baseline()}};
        const int extra = uniform_int(rng, 0, 30);
        for (int k = 0; k < extra; ++k) pc.policies.push_back(testsupport::random_policy(rng, J));
        const auto obj = opt::Objective::from_table(opt::quasi_outcomes(data, cls, u), u);
        const auto r = opt::learn_explicit(obj, pc);
        if (!(r.worst_case_value >= baseline_value(data, u))) ++violations;
    }
    return {violations == 0, fmt("%d/%d violations", violations, N)};
}

// 2. Every searcher agrees with exhaustive search.
Outcome oracle_equivalence() {
    Rng rng(1002);
    const int N = 200;
    int value_mismatch = 0, policy_mismatch = 0;
    auto compare = [&](const opt::MaximinReport& r, const brute::Best& b) {
        if (!(std::abs(r.worst_case_value - b.value) <= 1e-12)) ++value_mismatch;
        if (b.runner_up_gap > 1e-9 && !(r.policy == b.policy)) ++policy_mismatch;
    };
    for (int t = 0; t < N; ++t) {
        const int J = uniform_int(rng, 1, 12);
        const auto data = testsupport::random_line_dataset(rng, J, uniform_int(rng, 0, J), 50);
        const auto cls = pinned_class(rng, data);
        const auto u = testsupport::random_utility(rng);
        const auto obj = opt::Objective::from_table(opt::quasi_outcomes(data, cls, u), u);
        const auto r = opt::learn_threshold(obj, ThresholdClass{{0}, 0, J});
        compare(r, brute::argmax(brute::threshold_policies(data.grid(), 0, J),
                                 [&](const Policy& p) { return brute::maximin(p, data, cls, u); }));
    }
    for (int t = 0; t < N; ++t) {
        const std::size_t d = uniform_int(rng, 1, 4);
        const int wmax = uniform_int(rng, 1, 3), threshold = uniform_int(rng, 1, 4);
        std::vector<int> w(d);
        for (auto& v : w) v = uniform_int(rng, 0, wmax);
        const auto data = testsupport::random_dataset(rng, testsupport::box_points(d, 0, 1),
                                                      IntegerWeightRule{w, threshold}, 60);
        const auto cls = pinned_class(rng, data);
        const auto u = testsupport::random_utility(rng);
        const auto obj = opt::Objective::from_table(opt::quasi_outcomes(data, cls, u), u);
        const auto r = opt::learn_integer_weights(obj, IntegerWeightClass{d, 0, wmax, threshold, std::nullopt});
        compare(r, brute::argmax(brute::weight_policies(data.grid(), d, 0, wmax, threshold),
                                 [&](const Policy& p) { return brute::maximin(p, data, cls, u); }));
    }
    for (int t = 0; t < N; ++t) {
        const int rows = uniform_int(rng, 1, 4), cols = uniform_int(rng, 1, 4);
        std::vector<Covariate> pts;
        for (int a = 0; a < rows; ++a)
            for (int b = 0; b < cols; ++b) pts.push_back({1 + a, 1 + b});
        std::vector<int> bnd(rows);
        int prev = cols;
        for (auto& b : bnd) prev = b = uniform_int(rng, 0, prev);
        const auto data = testsupport::random_dataset(rng, pts, MonotoneRule{0, 1, 1, 1, cols, bnd}, 40);
        const auto cls = pinned_class(rng, data);
        const auto u = testsupport::random_utility(rng);
        const auto obj = opt::Objective::from_table(opt::quasi_outcomes(data, cls, u), u);
        const auto r = opt::learn_monotone_grid(obj, MonotoneGridClass{0, 1, 1, rows, 1, cols});
        compare(r, brute::argmax(brute::monotone_policies(data.grid(), 1, rows, 1, cols),
                                 [&](const Policy& p) { return brute::maximin(p, data, cls, u); }));
    }
    for (int t = 0; t < N; ++t) {
        const int J = uniform_int(rng, 1, 8);
        const auto data = testsupport::random_line_dataset(rng, J, uniform_int(rng, 0, J), 30);
        const auto cls = pinned_class(rng, data);
        const auto u = testsupport::random_utility(rng);
        std::vector<Policy> pols;
        const int m = uniform_int(rng, 1, 40);
        for (int k = 0; k < m; ++k) pols.push_back(testsupport::random_policy(rng, J));
        const auto obj = opt::Objective::from_table(opt::quasi_outcomes(data, cls, u), u);
        const auto r = opt::learn_explicit(obj, ExplicitClass{pols});
        compare(r, brute::argmax(pols, [&](const Policy& p) { return brute::maximin(p, data, cls, u); }));
    }
    return {value_mismatch == 0 && policy_mismatch == 0,
            fmt("%d value and %d policy mismatches over 4 x %d instances", value_mismatch, policy_mismatch, N)};
}

// 3. Order ideal counts against a lattice-path DP and, for small boxes, a
// filter over all labellings.
Outcome monotone_counts() {
    int bad = 0, checked = 0;
    for (int m = 1; m <= 6; ++m)
        for (int n = 1; n <= 6; ++n) {
            std::vector<std::vector<long>> paths(m + 1, std::vector<long>(n + 1, 1));
            for (int i = 1; i <= m; ++i)
                for (int j = 1; j <= n; ++j) paths[i][j] = paths[i - 1][j] + paths[i][j - 1];
            const auto ideals = opt::enumerate_order_ideals(m, n);
            long expect = paths[m][n];
            if (static_cast<long>(ideals.size()) != expect) ++bad;
            if (m * n <= 16 && static_cast<long>(brute::monotone_labellings(m, n).size()) != expect) ++bad;
            ++checked;
        }
    const auto six = opt::enumerate_order_ideals(6, 6).size();
    return {bad == 0 && six == 924, fmt("%d/%d sizes wrong, 6x6 gives %zu", bad, checked, six)};
}

// 4. Regret of the population maximin policy is within u times the policy
// weighted width when the true model lies in the class.
Outcome certificate_regret() {
    Rng rng(1004);
    const int N = 500;
    int violations = 0, outside = 0;
    double worst_slack = kInf;
    for (int t = 0; t < N; ++t) {
        const int J = uniform_int(rng, 1, 8);
        const auto grid = testsupport::weighted_line_grid(rng, J);
        const auto base = testsupport::random_policy(rng, J);
        const auto actions = ActionSet::binary();
        ModelTable truth(actions, J);
        double lam_true = 0;
        for (int a = 0; a < 2; ++a) {
            double v = rng.uniform();
            for (int j = 0; j < J; ++j) {
                if (j > 0) {
                    const double step = rng.uniform(-0.2, 0.2);
                    const double next = std::clamp(v + step, 0.0, 1.0);
                    lam_true = std::max(lam_true, std::abs(next - v));
                    v = next;
                }
                truth.set(a, j, v);
            }
        }
        const auto band = models::population_band(truth, base);
        models::BoundedModelClass cls;
        if (rng.bernoulli(0.3)) {
            cls = models::bounds_no_restriction(grid, base, actions, band, models::Target::outcome);
        } else {
            models::LipschitzSpec spec;
            const double lam = lam_true * rng.uniform(1.0, 3.0);
            spec.lambda = {{0, lam}, {1, lam}};
            cls = models::bounds_lipschitz(grid, base, actions, band, models::Target::outcome, spec);
        }
        for (int a = 0; a < 2; ++a)
            for (int j = 0; j < J; ++j)
                if (truth.at(a, j) < cls.lo(a, j) - 1e-15 || truth.at(a, j) > cls.hi(a, j) + 1e-15) ++outside;

        const double gain = rng.uniform(0.1, 5.0);
        const auto util = UtilitySpec::constant_gain(actions, gain, {{0, rng.uniform(-1, 1)}, {1, rng.uniform(-1, 1)}});
        std::vector<double> mean(J);
        for (int j = 0; j < J; ++j) mean[j] = truth.at(base.at(j), j);
        const auto obj = opt::Objective::from_table(opt::population_table(grid, base, mean, cls, util), util);
        const auto members = brute::all_policies(J);
        const auto r = opt::learn_explicit(obj, ExplicitClass{members});
        double v_star = -kInf;
        for (const auto& p : members) v_star = std::max(v_star, value(p, truth, grid, util));
        const double regret_ = v_star - value(r.policy, truth, grid, util);
        const double bound = gain * diag::policy_weighted_width(cls, grid, base, members);
        worst_slack = std::min(worst_slack, bound - regret_);
        if (regret_ > bound + 1e-12) ++violations;
    }
    return {violations == 0 && outside == 0,
            fmt("%d/%d violations, %d truth cells outside the class, min slack %.3g", violations, N, outside,
                worst_slack)};
}

// 5. WHS simultaneous coverage on a linear model with intercept and two
// covariates.
Outcome whs_coverage() {
    Rng rng(1005);
    const int n = 200, reps = 500;
    const Eigen::Vector3d beta(0.5, -1.0, 2.0);
    Eigen::MatrixXd queries(121, 3);
    for (int a = 0; a <= 10; ++a)
        for (int b = 0; b <= 10; ++b) queries.row(a * 11 + b) << 1.0, a / 10.0, b / 10.0;
    const Eigen::VectorXd truth = queries * beta;
    std::string detail;
    bool pass = true;
    for (double alpha : {0.2, 0.05}) {
        int covered = 0;
        for (int r = 0; r < reps; ++r) {
            Eigen::MatrixXd X(n, 3);
            Eigen::VectorXd y(n);
            for (int i = 0; i < n; ++i) {
                X.row(i) << 1.0, rng.uniform(), rng.uniform();
                y(i) = X.row(i).dot(beta) + rng.normal();
            }
            const auto band = bands::whs_band(bands::fit_min_norm(X, y), queries, 1.0 - alpha);
            bool all = true;
            for (Eigen::Index q = 0; q < queries.rows(); ++q)
                all = all && band.lower[q] <= truth(q) && truth(q) <= band.upper[q];
            covered += all;
        }
        const double rate = static_cast<double>(covered) / reps;
        pass = pass && rate >= 1.0 - alpha - 0.03;
        detail += fmt("%scoverage %.3f at alpha %.2f", detail.empty() ? "" : ", ", rate, alpha);
    }
    return {pass, detail};
}

// 6. Simulation study at desk scale.
Outcome simulation_study() {
    app::SimConfig cfg;
    cfg.replications = 200;
    const auto cells = app::run_simulation(cfg, app::thread_count());
    bool nonneg = true;
    double identity = 0;
    std::size_t excluded = 0;
    for (const auto& c : cells) {
        nonneg = nonneg && c.mean_improvement >= 0.0;
        identity = std::max(identity, c.identity_error);
        excluded += c.excluded;
    }
    std::vector<double> ns, regret_;
    for (const auto& c : cells)
        if (c.multiplier == 1.0 && c.level == 0.8) {
            ns.push_back(static_cast<double>(c.n));
            regret_.push_back(c.mean_regret);
        }
    const int k = static_cast<int>(ns.size());
    const double rho = oracle::spearman(ns.data(), regret_.data(), k);
    const double p = oracle::spearman_p_lower(ns.data(), regret_.data(), k);
    bool level_order = true;
    double worst_gap = kInf;
    for (const auto& lo : cells)
        for (const auto& hi : cells)
            if (lo.n == hi.n && lo.multiplier == hi.multiplier && lo.level < hi.level) {
                worst_gap = std::min(worst_gap, lo.mean_improvement - hi.mean_improvement);
                level_order = level_order && lo.mean_improvement >= hi.mean_improvement - 0.02;
            }
    std::ostringstream reg;
    for (double v : regret_) reg << (reg.tellp() ? " " : "") << fmt("%.4f", v);
    return {nonneg && rho < 0 && p < 0.05 && level_order && identity <= 1e-12,
            fmt("(i) improvement >= 0 in all %zu cells: %s; (ii) regret at mult 1, level 0.8 = [%s], rho %.2f, p %.4f; "
                "(iii) min lower-minus-higher level improvement %.4f; %zu draws excluded",
                cells.size(), nonneg ? "yes" : "no", reg.str().c_str(), rho, p, worst_gap, excluded)};
}

// 7. Two binary covariates: the (1,1) cell flips exactly when the additive
// extrapolation of the control outcome beats the observed treated outcome.
Outcome two_binary_flip() {
    Rng rng(1007);
    const int N = 100;
    int violations = 0, skipped = 0, flips = 0;
    const auto all = brute::all_policies(4);
    for (int t = 0; t < N; ++t) {
        const double m00 = rng.uniform(), m10 = rng.uniform(), m01 = rng.uniform(), m11 = rng.uniform();
        const double margin = m01 + m10 - m00 - m11;
        if (std::abs(margin) <= 1e-6) {
            ++skipped;
            continue;
        }
        const auto ex = sim::gen_two_binary_example(m00, m10, m01, m11);
        const std::vector<std::size_t> cells{0, 1, 2, 3};
        const auto glm = models::bounds_glm_nullspace(ex.grid, ex.baseline, ActionSet::binary(), cells, ex.observed,
                                                      ex.basis, 0.0, models::Target::outcome);
        const auto obj = opt::Objective::from_table(
            opt::population_table(ex.grid, ex.baseline, ex.observed, glm.bounds, ex.util), ex.util);
        const auto r = opt::learn_explicit(obj, ExplicitClass{all});
        const bool flipped = r.policy.at(3) == 0;
        flips += flipped;
        if (flipped != (margin > 0)) ++violations;
        for (std::size_t j = 0; j < 3; ++j)
            if (r.policy.at(j) != ex.baseline.at(j)) ++violations;
    }
    return {violations == 0, fmt("%d violations over %d instances (%d flips, %d within margin)", violations,
                                 N - skipped, flips, skipped)};
}

// 8. Single-covariate Lipschitz envelope against a loop over the region.
Outcome lipschitz_oracle() {
    Rng rng(1008);
    const int N = 1000;
    int bad = 0;
    double worst = 0;
    for (int t = 0; t < N; ++t) {
        const int J = uniform_int(rng, 1, 30);
        std::vector<Covariate> pts;
        int x = uniform_int(rng, -5, 5);
        for (int j = 0; j < J; ++j) {
            pts.push_back({x});
            x += uniform_int(rng, 1, 3);
        }
        const auto grid = CovariateGrid::uniform(pts);
        const auto base = testsupport::random_policy(rng, J);
        bands::ConfidenceBand band;
        const bool exact = rng.bernoulli(0.5);
        for (int j = 0; j < J; ++j) {
            const double e = rng.uniform(), h = exact ? 0.0 : 0.2 * rng.uniform();
            band.estimate.push_back(e);
            band.lower.push_back(e - h);
            band.upper.push_back(e + h);
            band.vacuous.push_back(false);
        }
        models::LipschitzSpec spec;
        spec.lambda = {{0, rng.bernoulli(0.05) ? kInf : rng.uniform(0, 0.5)},
                       {1, rng.bernoulli(0.05) ? kInf : rng.uniform(0, 0.5)}};
        const auto c = models::bounds_lipschitz(grid, base, ActionSet::binary(), band, models::Target::outcome, spec);
        for (int a = 0; a < 2; ++a)
            for (int j = 0; j < J; ++j) {
                if (base.at(j) == a) continue;
                const double lam = spec.lambda_of(a);
                double L = -kInf, U = kInf;
                bool any = false;
                for (int k = 0; k < J; ++k) {
                    if (base.at(k) != a) continue;
                    any = true;
                    const double d = std::abs(pts[j][0] - pts[k][0]);
                    L = std::max(L, band.lower[k] - (std::isinf(lam) ? kInf : lam * d));
                    U = std::min(U, band.upper[k] + (std::isinf(lam) ? kInf : lam * d));
                }
                if (!any) L = 0.0, U = 1.0;
                L = std::clamp(L, 0.0, 1.0);
                U = std::clamp(U, 0.0, 1.0);
                if (L > U) std::swap(L, U);
                const double err = std::max(std::abs(c.lo(a, j) - L), std::abs(c.hi(a, j) - U));
                worst = std::max(worst, err);
                if (!(err <= 1e-12)) ++bad;
            }
    }
    return {bad == 0, fmt("%d mismatched cells, max error %.2g", bad, worst)};
}

// 9. PSA-like threshold sweep over the NVCA cost.
Outcome psa_threshold() {
    const auto sample = sim::gen_psa_like(2024, 1891);
    const auto data = sample.nvca_points();
    const auto gamma = ext::transformed_outcome(data);
    const auto band = ext::effect_band(data, gamma, 0.8);
    const auto lip = models::lipschitz_heuristic(data.grid(), data.baseline(), data.actions(), band.estimate, 3.0);
    const auto cls =
        models::bounds_lipschitz(data.grid(), data.baseline(), data.actions(), band, models::Target::effect, lip);
    std::vector<double> costs;
    for (double u = 0.25; u <= 40.0; u += 0.25) costs.push_back(u);
    for (double u : {50.0, 100.0, 1000.0, 1e4}) costs.push_back(u);
    std::vector<int> thr;
    for (double u : costs) {
        const auto util = UtilitySpec::constant_gain(data.actions(), u, {{0, 0.0}, {1, -1.0}});
        const auto r = ext::learn_from_experiment(data, cls, util, ThresholdClass{{0}, 0, 7});
        thr.push_back(r.params.at(0));
    }
    bool monotone = true;
    for (std::size_t i = 1; i < thr.size(); ++i) monotone = monotone && thr[i] <= thr[i - 1];
    std::size_t tail = thr.size();
    while (tail > 0 && thr[tail - 1] == sim::kNvcaThreshold) --tail;
    const bool reverts = tail < thr.size();
    const double crossover = tail < costs.size() ? costs[tail] : kInf;
    std::ostringstream path;
    int last = -1;
    for (std::size_t i = 0; i < thr.size(); ++i)
        if (thr[i] != last) {
            path << (last < 0 ? "" : ", ") << "u=" << costs[i] << ": " << thr[i];
            last = thr[i];
        }
    return {monotone && reverts && thr.front() > thr.back(),
            fmt("thresholds %s; baseline from u=%g on", path.str().c_str(), crossover)};
}

// 10. F quantile against quadrature and root finding.
Outcome f_quantile_accuracy() {
    int bad = 0, count = 0;
    double worst = 0;
    const std::pair<double, double> dofs[] = {{1, 1}, {1, 10}, {3, 196}, {5, 20}, {10, 3}, {30, 60}};
    for (double p : {0.01, 0.1, 0.5, 0.9, 0.99})
        for (auto [d1, d2] : dofs) {
            const double got = bands::f_quantile(p, d1, d2), want = oracle::f_quantile(p, d1, d2);
            const double rel = std::abs(got - want) / want;
            worst = std::max(worst, rel);
            bad += !(rel <= 1e-6);
            ++count;
        }
    return {bad == 0, fmt("%d/%d points off, max relative error %.2g", bad, count, worst)};
}

}  // namespace


int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double limit_s;
    };
    const Criterion criteria[] = {
        {"C1 safety identity", safety_identity, 10},
        {"C2 oracle equivalence", oracle_equivalence, 60},
        {"C3 monotone enumeration counts", monotone_counts, 5},
        {"C4 regret certificate", certificate_regret, kInf},
        {"C5 WHS band coverage", whs_coverage, 120},
        {"C6 simulation study", simulation_study, 900},
        {"C7 two binary covariates", two_binary_flip, kInf},
        {"C8 Lipschitz bounds", lipschitz_oracle, kInf},
        {"C9 PSA-like threshold sweep", psa_threshold, kInf},
        {"C10 F quantile accuracy", f_quantile_accuracy, kInf},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("%s %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                    in_time ? "" : ", over the time limit");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
