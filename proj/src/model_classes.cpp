#include "safepl/model_classes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace safepl::models {

using bands::ConfidenceBand;

std::pair<double, double> target_range(Target t) {
    return t == Target::outcome ? std::pair{0.0, 1.0} : std::pair{-1.0, 1.0};
}

std::string to_string(Target t) { return t == Target::outcome ? "outcome" : "effect"; }

double distance(const Covariate& x, const Covariate& y, Metric metric) {
    if (x.size() != y.size()) throw DataError("distance between covariates of different dimension");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        s += metric == Metric::l1 ? std::abs(d) : d * d;
    }
    return metric == Metric::l1 ? s : std::sqrt(s);
}

void BoundedModelClass::check() const {
    const auto [lo, hi] = target_range(target);
    for (std::size_t k = 0; k < actions.size(); ++k)
        for (std::size_t j = 0; j < grid_size; ++j) {
            const double l = lo_at(k, j), u = hi_at(k, j);
            if (!(l <= u) || l < lo || u > hi)
                throw NumericError("bounds at (a=" + std::to_string(actions.label(k)) + ", x#" + std::to_string(j) +
                                   ") are [" + std::to_string(l) + ", " + std::to_string(u) + "]");
        }
}

double LipschitzSpec::lambda_of(int action) const {
    auto it = lambda.find(action);
    if (it == lambda.end()) throw ConfigError("Lipschitz constant missing for action " + std::to_string(action));
    if (!(it->second >= 0.0)) throw ConfigError("Lipschitz constant for action " + std::to_string(action) + " is negative");
    return it->second;
}

namespace {

BoundedModelClass make_class(const ActionSet& actions, std::size_t J, Target target, std::string provenance) {
    BoundedModelClass c;
    c.actions = actions;
    c.grid_size = J;
    c.target = target;
    const auto [lo, hi] = target_range(target);
    c.lower.assign(actions.size() * J, lo);
    c.upper.assign(actions.size() * J, hi);
    c.provenance = std::move(provenance);
    return c;
}

double clip(double v, Target t) {
    const auto [lo, hi] = target_range(t);
    return std::min(hi, std::max(lo, v));
}

void check_inputs(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                  const ConfidenceBand& band) {
    if (baseline.size() != grid.size()) throw DataError("baseline policy does not cover the grid");
    if (band.size() != grid.size() || band.lower.size() != grid.size() || band.upper.size() != grid.size())
        throw DataError("grid band has " + std::to_string(band.size()) + " entries, grid has " +
                        std::to_string(grid.size()));
    baseline.validate(actions, grid.size());
}

void pin_agreement(BoundedModelClass& c, const Policy& baseline, const ConfidenceBand& band) {
    for (std::size_t j = 0; j < c.grid_size; ++j) {
        const std::size_t k = c.actions.index_of(baseline.at(j));
        c.lower[k * c.grid_size + j] = clip(band.lower[j], c.target);
        c.upper[k * c.grid_size + j] = clip(band.upper[j], c.target);
    }
}

// Stores clipped (L, U) for a disagreement cell; crossed bounds are swapped
// and reported.
void store(BoundedModelClass& c, std::size_t k, std::size_t j, double L, double U, const CovariateGrid& grid) {
    L = clip(L, c.target);
    U = clip(U, c.target);
    if (L > U) {
        c.warnings.push_back("crossed bounds at (a=" + std::to_string(c.actions.label(k)) + ", x=" +
                             safepl::to_string(grid.point(j)) + "); swapped");
        std::swap(L, U);
    }
    c.lower[k * c.grid_size + j] = L;
    c.upper[k * c.grid_size + j] = U;
}

// C - lambda * d without evaluating inf * 0.
double shifted(double c, double lambda, double d, double sign) {
    if (d == 0.0) return c;
    return c + sign * lambda * d;
}

std::vector<std::size_t> region(const Policy& baseline, int action) {
    std::vector<std::size_t> r;
    for (std::size_t j = 0; j < baseline.size(); ++j)
        if (baseline.at(j) == action) r.push_back(j);
    return r;
}

}  // namespace

BoundedModelClass bounds_no_restriction(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                        const ConfidenceBand& grid_band, Target target) {
    check_inputs(grid, baseline, actions, grid_band);
    auto c = make_class(actions, grid.size(), target, "no_restriction");
    pin_agreement(c, baseline, grid_band);
    return c;
}

BoundedModelClass bounds_lipschitz(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                   const ConfidenceBand& grid_band, Target target, const LipschitzSpec& spec) {
    check_inputs(grid, baseline, actions, grid_band);
    auto c = make_class(actions, grid.size(), target, "lipschitz");
    pin_agreement(c, baseline, grid_band);
    const std::size_t J = grid.size();
    const bool one_dim = grid.dimension() == 1;

    std::vector<std::size_t> order(J);
    std::iota(order.begin(), order.end(), 0);
    if (one_dim)
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return grid.point(a)[0] < grid.point(b)[0]; });

    for (std::size_t k = 0; k < actions.size(); ++k) {
        const int a = actions.label(k);
        const double lam = spec.lambda_of(a);
        const auto R = region(baseline, a);
        if (R.empty()) {
            c.warnings.push_back("action " + std::to_string(a) + " is never taken by the baseline; bounds are vacuous");
            continue;
        }
        if (std::isinf(lam)) continue;  // full range on every disagreement cell

        std::vector<double> L(J, -std::numeric_limits<double>::infinity());
        std::vector<double> U(J, std::numeric_limits<double>::infinity());
        if (one_dim) {
            auto pos = [&](std::size_t j) { return static_cast<double>(grid.point(j)[0]); };
            // Forward: sources at or left of x. Select by key, evaluate exactly.
            std::optional<std::size_t> bl, bu;
            for (std::size_t j : order) {
                if (baseline.at(j) == a) {
                    if (!bl || grid_band.lower[j] + lam * pos(j) > grid_band.lower[*bl] + lam * pos(*bl)) bl = j;
                    if (!bu || grid_band.upper[j] - lam * pos(j) < grid_band.upper[*bu] - lam * pos(*bu)) bu = j;
                    continue;
                }
                if (bl) L[j] = std::max(L[j], shifted(grid_band.lower[*bl], lam, pos(j) - pos(*bl), -1.0));
                if (bu) U[j] = std::min(U[j], shifted(grid_band.upper[*bu], lam, pos(j) - pos(*bu), 1.0));
            }
            bl.reset();
            bu.reset();
            for (auto it = order.rbegin(); it != order.rend(); ++it) {
                const std::size_t j = *it;
                if (baseline.at(j) == a) {
                    if (!bl || grid_band.lower[j] - lam * pos(j) > grid_band.lower[*bl] - lam * pos(*bl)) bl = j;
                    if (!bu || grid_band.upper[j] + lam * pos(j) < grid_band.upper[*bu] + lam * pos(*bu)) bu = j;
                    continue;
                }
                if (bl) L[j] = std::max(L[j], shifted(grid_band.lower[*bl], lam, pos(*bl) - pos(j), -1.0));
                if (bu) U[j] = std::min(U[j], shifted(grid_band.upper[*bu], lam, pos(*bu) - pos(j), 1.0));
            }
        } else {
            for (std::size_t j = 0; j < J; ++j) {
                if (baseline.at(j) == a) continue;
                for (std::size_t jp : R) {
                    const double d = distance(grid.point(j), grid.point(jp), spec.metric);
                    L[j] = std::max(L[j], shifted(grid_band.lower[jp], lam, d, -1.0));
                    U[j] = std::min(U[j], shifted(grid_band.upper[jp], lam, d, 1.0));
                }
            }
        }
        for (std::size_t j = 0; j < J; ++j)
            if (baseline.at(j) != a) store(c, k, j, L[j], U[j], grid);
    }
    return c;
}

Covariate project(const Covariate& x, const std::vector<std::size_t>& coords) {
    Covariate s;
    s.reserve(coords.size());
    for (auto p : coords) {
        if (p >= x.size()) throw DataError("component coordinate out of range");
        s.push_back(x[p]);
    }
    return s;
}

BoundedModelClass bounds_additive(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                  const ConfidenceBand& grid_band, Target target,
                                  const std::vector<AdditiveComponent>& components, Metric metric) {
    check_inputs(grid, baseline, actions, grid_band);
    auto c = make_class(actions, grid.size(), target, "additive");
    pin_agreement(c, baseline, grid_band);
    const std::size_t J = grid.size();

    for (std::size_t k = 0; k < actions.size(); ++k) {
        const int a = actions.label(k);
        const auto R = region(baseline, a);
        std::vector<const AdditiveComponent*> comps;
        for (const auto& comp : components)
            if (comp.action == a) comps.push_back(&comp);
        if (R.empty() || comps.empty()) {
            c.warnings.push_back("action " + std::to_string(a) +
                                 (R.empty() ? " is never taken by the baseline" : " has no additive components") +
                                 "; bounds are vacuous");
            continue;
        }
        for (std::size_t j = 0; j < J; ++j) {
            if (baseline.at(j) == a) continue;
            double L = 0.0, U = 0.0;
            for (const auto* comp : comps) {
                if (!(comp->lambda >= 0.0)) throw ConfigError("component Lipschitz constant is negative");
                const Covariate xs = project(grid.point(j), comp->coords);
                double sup = -std::numeric_limits<double>::infinity();
                double inf = std::numeric_limits<double>::infinity();
                for (std::size_t jp : R) {
                    const Covariate xps = project(grid.point(jp), comp->coords);
                    auto it = comp->band.find(xps);
                    if (it == comp->band.end())
                        throw DataError("additive component for action " + std::to_string(a) +
                                        " has no band at sub-covariate " + safepl::to_string(xps));
                    const double d = distance(xs, xps, metric);
                    sup = std::max(sup, shifted(it->second.first, comp->lambda, d, -1.0));
                    inf = std::min(inf, shifted(it->second.second, comp->lambda, d, 1.0));
                }
                L += sup;
                U += inf;
            }
            store(c, k, j, L, U, grid);
        }
    }
    return c;
}

std::vector<AdditiveComponent> fit_additive_components(const CovariateGrid& grid, const Policy& baseline,
                                                       const ActionSet& actions,
                                                       std::span<const std::size_t> row_cell,
                                                       std::span<const double> response, int order,
                                                       const LipschitzSpec& lambdas, double level) {
    if (order != 1 && order != 2) throw ConfigError("additive order must be 1 or 2");
    if (row_cell.size() != response.size()) throw DataError("cell index and response lengths differ");
    const std::size_t p = grid.dimension();

    std::size_t nonempty = 0;
    for (int a : actions.labels()) nonempty += !region(baseline, a).empty();
    const double region_level = level == 0.0 ? 0.0 : 1.0 - (1.0 - level) / static_cast<double>(nonempty);

    std::vector<AdditiveComponent> out;
    for (int a : actions.labels()) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < row_cell.size(); ++i)
            if (baseline.at(row_cell[i]) == a) rows.push_back(i);
        if (rows.empty()) continue;

        // Columns: intercept, then one indicator per observed sub-vector value.
        std::vector<std::vector<std::size_t>> subsets{{}};
        for (std::size_t u = 0; u < p; ++u) subsets.push_back({u});
        if (order == 2)
            for (std::size_t u = 0; u < p; ++u)
                for (std::size_t v = u + 1; v < p; ++v) subsets.push_back({u, v});

        std::vector<std::map<Covariate, Eigen::Index>> column(subsets.size());
        Eigen::Index d = 0;
        for (std::size_t s = 0; s < subsets.size(); ++s) {
            std::set<Covariate> values;
            for (auto i : rows) values.insert(project(grid.point(row_cell[i]), subsets[s]));
            for (const auto& v : values) column[s][v] = d++;
        }
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), d);
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto& x = grid.point(row_cell[rows[r]]);
            for (std::size_t s = 0; s < subsets.size(); ++s)
                X(static_cast<Eigen::Index>(r), column[s].at(project(x, subsets[s]))) = 1.0;
            y(static_cast<Eigen::Index>(r)) = response[rows[r]];
        }
        const auto fit = bands::fit_min_norm(X, y);
        const auto band = bands::whs_band(fit, Eigen::MatrixXd::Identity(d, d), region_level);
        const double lam = lambdas.lambda_of(a);
        for (std::size_t s = 0; s < subsets.size(); ++s) {
            AdditiveComponent comp;
            comp.action = a;
            comp.coords = subsets[s];
            comp.lambda = lam;
            for (const auto& [v, col] : column[s]) {
                const auto q = static_cast<std::size_t>(col);
                comp.band[v] = {band.lower[q], band.upper[q]};
            }
            out.push_back(std::move(comp));
        }
    }
    return out;
}

// --- GLM basis -------------------------------------------------------------

namespace {

std::vector<std::vector<int>> coordinate_levels(const CovariateGrid& grid) {
    std::vector<std::set<int>> lv(grid.dimension());
    for (const auto& x : grid.points())
        for (std::size_t u = 0; u < x.size(); ++u) lv[u].insert(x[u]);
    std::vector<std::vector<int>> out;
    for (auto& s : lv) out.emplace_back(s.begin(), s.end());
    return out;
}

std::size_t block_size(BasisSpec::Kind kind, const CovariateGrid& grid) {
    const std::size_t p = grid.dimension();
    switch (kind) {
        case BasisSpec::Kind::additive:
        case BasisSpec::Kind::two_way:
            return 1 + p;
        case BasisSpec::Kind::one_hot_additive: {
            std::size_t s = 1;
            for (const auto& l : coordinate_levels(grid)) s += l.size();
            return s;
        }
        case BasisSpec::Kind::saturated:
            return grid.size();
    }
    return 0;
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

std::size_t BasisSpec::dimension(const ActionSet& actions, const CovariateGrid& grid) const {
    const std::size_t p = grid.dimension();
    std::size_t d = actions.size() * block_size(kind, grid);
    if (kind == Kind::two_way) d += p * (p - 1) / 2;
    return d;
}

Eigen::VectorXd BasisSpec::features(const ActionSet& actions, const CovariateGrid& grid, int action,
                                    const Covariate& x) const {
    const std::size_t p = grid.dimension();
    if (x.size() != p) throw DataError("covariate dimension differs from the grid");
    const std::size_t block = block_size(kind, grid);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension(actions, grid)));
    const auto off = static_cast<Eigen::Index>(actions.index_of(action) * block);
    switch (kind) {
        case Kind::additive:
        case Kind::two_way: {
            phi(off) = 1.0;
            for (std::size_t u = 0; u < p; ++u) phi(off + 1 + static_cast<Eigen::Index>(u)) = x[u];
            if (kind == Kind::two_way) {
                auto pos = static_cast<Eigen::Index>(actions.size() * block);
                for (std::size_t u = 0; u < p; ++u)
                    for (std::size_t v = u + 1; v < p; ++v) phi(pos++) = static_cast<double>(x[u]) * x[v];
            }
            break;
        }
        case Kind::one_hot_additive: {
            phi(off) = 1.0;
            Eigen::Index pos = off + 1;
            const auto levels = coordinate_levels(grid);
            for (std::size_t u = 0; u < p; ++u) {
                const auto& lv = levels[u];
                auto it = std::lower_bound(lv.begin(), lv.end(), x[u]);
                if (it == lv.end() || *it != x[u]) throw DataError("covariate level not present on the grid");
                phi(pos + (it - lv.begin())) = 1.0;
                pos += static_cast<Eigen::Index>(lv.size());
            }
            break;
        }
        case Kind::saturated: {
            auto j = grid.find(x);
            if (!j) throw DataError("covariate " + safepl::to_string(x) + " is not on the grid");
            phi(off + static_cast<Eigen::Index>(*j)) = 1.0;
            break;
        }
    }
    return phi;
}

GlmNullspaceResult bounds_glm_nullspace(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                        std::span<const std::size_t> row_cell, std::span<const double> response,
                                        const BasisSpec& basis, double level, Target target,
                                        const ConfidenceBand* grid_band) {
    if (row_cell.size() != response.size()) throw DataError("cell index and response lengths differ");
    if (row_cell.empty()) throw DataError("GLM fit needs at least one row");
    if (basis.link == Link::logit && target != Target::outcome)
        throw ConfigError("the logit link applies to the outcome target only");
    baseline.validate(actions, grid.size());
    const std::size_t J = grid.size();
    const auto d = static_cast<Eigen::Index>(basis.dimension(actions, grid));

    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    if (basis.link == Link::identity) {
        X.resize(static_cast<Eigen::Index>(row_cell.size()), d);
        y.resize(static_cast<Eigen::Index>(row_cell.size()));
        for (std::size_t i = 0; i < row_cell.size(); ++i) {
            const std::size_t j = row_cell[i];
            X.row(static_cast<Eigen::Index>(i)) = basis.features(actions, grid, baseline.at(j), grid.point(j));
            y(static_cast<Eigen::Index>(i)) = response[i];
        }
    } else {
        std::vector<double> s(J, 0.0), n(J, 0.0);
        for (std::size_t i = 0; i < row_cell.size(); ++i) {
            s[row_cell[i]] += response[i];
            n[row_cell[i]] += 1.0;
        }
        std::vector<std::size_t> cells;
        for (std::size_t j = 0; j < J; ++j)
            if (n[j] > 0.0) cells.push_back(j);
        X.resize(static_cast<Eigen::Index>(cells.size()), d);
        y.resize(static_cast<Eigen::Index>(cells.size()));
        for (std::size_t r = 0; r < cells.size(); ++r) {
            const std::size_t j = cells[r];
            const double pj = (s[j] + 0.5) / (n[j] + 1.0);
            X.row(static_cast<Eigen::Index>(r)) = basis.features(actions, grid, baseline.at(j), grid.point(j));
            y(static_cast<Eigen::Index>(r)) = std::log(pj / (1.0 - pj));
        }
    }

    GlmNullspaceResult res;
    res.fit = bands::fit_min_norm(X, y);
    res.bounds = make_class(actions, J, target, "glm_nullspace");
    res.identified.assign(actions.size() * J, false);

    std::vector<std::size_t> q_index;
    std::vector<Eigen::VectorXd> q_phi;
    for (std::size_t k = 0; k < actions.size(); ++k)
        for (std::size_t j = 0; j < J; ++j) {
            const Eigen::VectorXd phi = basis.features(actions, grid, actions.label(k), grid.point(j));
            const double leak = res.fit.null_basis.cols() ? (res.fit.null_basis.transpose() * phi).norm() : 0.0;
            if (leak <= kNullTolerance) {
                res.identified[k * J + j] = true;
                q_index.push_back(k * J + j);
                q_phi.push_back(phi);
            }
        }
    if (!q_phi.empty()) {
        Eigen::MatrixXd Q(static_cast<Eigen::Index>(q_phi.size()), d);
        for (std::size_t r = 0; r < q_phi.size(); ++r) Q.row(static_cast<Eigen::Index>(r)) = q_phi[r];
        const auto band = bands::whs_band(res.fit, Q, level);
        for (std::size_t r = 0; r < q_index.size(); ++r) {
            double lo = band.lower[r], hi = band.upper[r];
            if (basis.link == Link::logit) {
                lo = logistic(lo);
                hi = logistic(hi);
            }
            res.bounds.lower[q_index[r]] = clip(lo, target);
            res.bounds.upper[q_index[r]] = clip(hi, target);
        }
    }
    if (grid_band) {
        check_inputs(grid, baseline, actions, *grid_band);
        pin_agreement(res.bounds, baseline, *grid_band);
    }
    return res;
}

LipschitzSpec lipschitz_heuristic(const CovariateGrid& grid, const Policy& baseline, const ActionSet& actions,
                                  std::span<const double> estimates, double multiplier) {
    if (grid.dimension() != 1) throw ConfigError("the Lipschitz heuristic needs a one-dimensional grid");
    if (estimates.size() != grid.size()) throw DataError("estimates do not cover the grid");
    if (!(multiplier >= 0.0)) throw ConfigError("Lipschitz multiplier must be nonnegative");
    LipschitzSpec spec;
    spec.metric = Metric::l1;
    for (int a : actions.labels()) {
        auto R = region(baseline, a);
        std::sort(R.begin(), R.end(), [&](std::size_t u, std::size_t v) { return grid.point(u)[0] < grid.point(v)[0]; });
        if (R.size() < 2) {
            spec.lambda[a] = std::numeric_limits<double>::infinity();
            spec.warnings.push_back("action " + std::to_string(a) + " region has " + std::to_string(R.size()) +
                                    " point(s); Lipschitz constant set to infinity");
            continue;
        }
        double slope = 0.0;
        for (std::size_t r = 1; r < R.size(); ++r) {
            const double dx = static_cast<double>(grid.point(R[r])[0] - grid.point(R[r - 1])[0]);
            slope = std::max(slope, std::abs(estimates[R[r]] - estimates[R[r - 1]]) / dx);
        }
        spec.lambda[a] = multiplier * slope;
    }
    return spec;
}

SizeReport empirical_size(const BoundedModelClass& cls, const CovariateGrid& grid) {
    if (grid.size() != cls.grid_size) throw DataError("model class and grid sizes differ");
    SizeReport rep;
    rep.per_action.assign(cls.actions.size(), 0.0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double m = 0.0;
        for (std::size_t k = 0; k < cls.actions.size(); ++k) {
            const double w = cls.hi_at(k, j) - cls.lo_at(k, j);
            m = std::max(m, w);
            rep.per_action[k] += grid.weight(j) * w;
        }
        rep.total += grid.weight(j) * m;
    }
    return rep;
}

ConfidenceBand population_band(const ModelTable& model, const Policy& baseline) {
    std::vector<double> v(baseline.size());
    for (std::size_t j = 0; j < baseline.size(); ++j) v[j] = model.at(baseline.at(j), j);
    return ConfidenceBand::exact(std::move(v));
}

}  // namespace safepl::models
