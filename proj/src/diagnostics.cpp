#include "safepl/diagnostics.hpp"

#include "safepl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace safepl::diag {

RademacherEstimate rademacher_estimate(const std::vector<Policy>& policies, std::span<const std::size_t> row_cell,
                                       std::size_t replications, std::uint64_t seed, unsigned threads) {
    if (replications < 100) throw ConfigError("Rademacher estimate needs at least 100 replications");
    if (policies.empty()) throw ConfigError("Rademacher estimate needs a nonempty class");
    if (row_cell.empty()) throw DataError("Rademacher estimate needs at least one row");
    const std::size_t J = policies.front().size();
    for (const auto& p : policies) {
        if (p.size() != J) throw DataError("policies cover different grids");
        for (int v : p.labels())
            if (v != 0 && v != 1) throw ConfigError("Rademacher estimate needs 0/1 policies");
    }
    for (auto j : row_cell)
        if (j >= J) throw DataError("row cell index outside the grid");

    const double n = static_cast<double>(row_cell.size());
    std::vector<double> draws(replications);
    auto work = [&](std::size_t begin, std::size_t end) {
        std::vector<double> s(J);
        for (std::size_t r = begin; r < end; ++r) {
            auto rng = sim::Rng::substream(seed, r);
            std::fill(s.begin(), s.end(), 0.0);
            for (auto j : row_cell) s[j] += rng.sign();
            double sup = 0.0;
            for (const auto& p : policies) {
                double v = 0.0;
                for (std::size_t j = 0; j < J; ++j)
                    if (p.at(j)) v += s[j];
                sup = std::max(sup, std::abs(v));
            }
            draws[r] = sup / n;
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(replications)));
    if (threads == 1) {
        work(0, replications);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (replications + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk, e = std::min(replications, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }
    double mean = 0.0;
    for (double d : draws) mean += d;
    mean /= static_cast<double>(replications);
    double var = 0.0;
    for (double d : draws) var += (d - mean) * (d - mean);
    var /= static_cast<double>(replications - 1);
    return {mean, std::sqrt(var / static_cast<double>(replications)), replications};
}

RademacherEstimate rademacher_estimate(const PolicyClass& cls, const CovariateGrid& grid,
                                       std::span<const std::size_t> row_cell, std::size_t replications,
                                       std::uint64_t seed, unsigned threads) {
    std::vector<Policy> pols;
    for (auto& m : opt::enumerate_policies(cls, grid)) pols.push_back(std::move(m.policy));
    std::sort(pols.begin(), pols.end());
    pols.erase(std::unique(pols.begin(), pols.end()), pols.end());
    return rademacher_estimate(pols, row_cell, replications, seed, threads);
}

namespace {

void check_common(std::size_t n, double alpha, double delta, double C) {
    if (n == 0) throw ConfigError("certificate needs n >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
    if (!(delta > 0.0 && delta <= std::exp(-1.0))) throw ConfigError("delta must lie in (0, 1/e]");
    if (!(C >= 0.0) || !std::isfinite(C)) throw ConfigError("utility magnitude C must be finite and nonnegative");
}

double complexity_term(std::size_t n, double C, const Complexity& cx) {
    if (!(cx.value >= 0.0)) throw ConfigError("complexity must be nonnegative");
    if (cx.kind == Complexity::Kind::rademacher) return 8.0 * C * cx.value;
    if (!(cx.universal_constant >= 0.0)) throw ConfigError("universal constant must be nonnegative");
    return C / std::sqrt(static_cast<double>(n)) * 4.0 * cx.universal_constant * std::sqrt(cx.value);
}

double sampling_term(std::size_t n, double delta, double C) {
    return 14.0 * C * std::sqrt(std::log(1.0 / delta) / static_cast<double>(n));
}

}  // namespace

RegretCertificate safety_bound(std::size_t n, double alpha, double delta, double C, const Complexity& complexity) {
    check_common(n, alpha, delta, C);
    RegretCertificate c;
    c.kind = "safety";
    c.n = n;
    c.alpha = alpha;
    c.delta = delta;
    c.C = C;
    c.complexity = complexity;
    c.complexity_term = complexity_term(n, C, complexity);
    c.sampling_term = sampling_term(n, delta, C);
    c.bound = c.width_term + c.complexity_term + c.sampling_term;
    c.probability = std::max(0.0, 1.0 - alpha - delta);
    return c;
}

RegretCertificate optimality_bound(double size, std::size_t n, double alpha, double delta, const UtilitySpec& util,
                                   const Complexity& complexity, std::optional<double> policy_weighted_size) {
    if (!util.has_constant_gain() || util.gain.empty())
        throw ConfigError("optimality certificate requires a gain shared by all actions");
    if (!(util.gain.begin()->second > 0.0)) throw ConfigError("optimality certificate requires a positive gain");
    if (!(size >= 0.0)) throw ConfigError("model class size must be nonnegative");
    const double C = util.magnitude();
    auto c = safety_bound(n, alpha, delta, C, complexity);
    c.kind = "optimality";
    c.width_term = 2.0 * C * size;
    c.bound = c.width_term + c.complexity_term + c.sampling_term;
    if (policy_weighted_size) {
        if (!(*policy_weighted_size >= 0.0)) throw ConfigError("policy-weighted size must be nonnegative");
        c.policy_weighted_bound = 2.0 * C * *policy_weighted_size + c.complexity_term + c.sampling_term;
    }
    return c;
}

double policy_weighted_width(const models::BoundedModelClass& cls, const CovariateGrid& grid, const Policy& baseline,
                             const std::vector<Policy>& policies) {
    if (policies.empty()) throw ConfigError("policy-weighted width needs a nonempty class");
    if (grid.size() != cls.grid_size || baseline.size() != grid.size())
        throw DataError("policy-weighted width inputs do not cover the grid");
    double sup = 0.0;
    for (const auto& p : policies) {
        if (p.size() != grid.size()) throw DataError("policy does not cover the grid");
        double w = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (p.at(j) == baseline.at(j)) continue;
            const std::size_t k = cls.actions.index_of(p.at(j));
            w += grid.weight(j) * (cls.hi_at(k, j) - cls.lo_at(k, j));
        }
        sup = std::max(sup, w);
    }
    return sup;
}

}  // namespace safepl::diag
