#include "safepl/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace safepl::opt {

// --- quasi-outcomes --------------------------------------------------------

QuasiOutcomeTable quasi_outcomes(const Dataset& data, const models::BoundedModelClass& cls, const UtilitySpec& util,
                                 std::span<const double> response) {
    util.validate(data.actions());
    if (!(cls.actions == data.actions())) throw DataError("model class and dataset have different action sets");
    if (cls.grid_size != data.grid().size()) throw DataError("model class does not cover the dataset grid");
    if (!response.empty() && response.size() != data.size())
        throw DataError("response override has " + std::to_string(response.size()) + " entries for " +
                        std::to_string(data.size()) + " rows");
    QuasiOutcomeTable t;
    t.grid = data.grid();
    t.baseline = data.baseline();
    t.actions = data.actions();
    t.row_cell.assign(data.cells().begin(), data.cells().end());
    const std::size_t K = t.actions.size();
    t.values.resize(data.size() * K);
    t.source.resize(data.size() * K);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t j = data.cell(i);
        const int b = t.baseline.at(j);
        for (std::size_t k = 0; k < K; ++k) {
            const int a = t.actions.label(k);
            auto& v = t.values[i * K + k];
            auto& s = t.source[i * K + k];
            if (a == b) {
                v = response.empty() ? static_cast<double>(data.row(i).outcome) : response[i];
                s = Source::observed;
            } else if (util.gain_of(a) >= 0.0) {
                v = cls.lo_at(k, j);
                s = Source::lower;
            } else {
                v = cls.hi_at(k, j);
                s = Source::upper;
            }
        }
    }
    return t;
}

QuasiOutcomeTable population_table(const CovariateGrid& grid, const Policy& baseline,
                                   std::span<const double> baseline_mean, const models::BoundedModelClass& cls,
                                   const UtilitySpec& util) {
    util.validate(cls.actions);
    if (baseline_mean.size() != grid.size() || cls.grid_size != grid.size() || baseline.size() != grid.size())
        throw DataError("population table inputs do not cover the grid");
    QuasiOutcomeTable t;
    t.grid = grid;
    t.baseline = baseline;
    t.actions = cls.actions;
    const std::size_t J = grid.size(), K = cls.actions.size();
    t.row_cell.resize(J);
    std::iota(t.row_cell.begin(), t.row_cell.end(), 0);
    t.row_weight.assign(grid.weights().begin(), grid.weights().end());
    t.values.resize(J * K);
    t.source.resize(J * K);
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t k = 0; k < K; ++k) {
            const int a = cls.actions.label(k);
            if (a == baseline.at(j)) {
                t.values[j * K + k] = baseline_mean[j];
                t.source[j * K + k] = Source::observed;
            } else if (util.gain_of(a) >= 0.0) {
                t.values[j * K + k] = cls.lo_at(k, j);
                t.source[j * K + k] = Source::lower;
            } else {
                t.values[j * K + k] = cls.hi_at(k, j);
                t.source[j * K + k] = Source::upper;
            }
        }
    return t;
}

// --- Objective -------------------------------------------------------------

Objective Objective::from_table(const QuasiOutcomeTable& table, const UtilitySpec& util) {
    util.validate(table.actions);
    Objective o;
    o.grid_ = table.grid;
    o.baseline_ = table.baseline;
    o.actions_ = table.actions;
    o.K_ = table.actions.size();
    o.row_cell_ = table.row_cell;
    o.row_weight_ = table.row_weight;
    if (o.row_cell_.empty()) throw DataError("objective has no rows");
    o.contrib_.resize(o.row_cell_.size() * o.K_);
    for (std::size_t i = 0; i < o.row_cell_.size(); ++i)
        for (std::size_t k = 0; k < o.K_; ++k) {
            const int a = o.actions_.label(k);
            o.contrib_[i * o.K_ + k] = util.gain_of(a) * table.at(i, k) + util.cost_of(a);
        }
    o.rebuild_cells();
    return o;
}

Objective& Objective::add(const Objective& other) {
    if (other.row_cell_ != row_cell_ || !(other.actions_ == actions_) || other.row_weight_ != row_weight_)
        throw DataError("objectives are defined over different rows");
    for (std::size_t q = 0; q < contrib_.size(); ++q) contrib_[q] += other.contrib_[q];
    rebuild_cells();
    return *this;
}

void Objective::rebuild_cells() {
    const std::size_t J = grid_.size();
    cell_.assign(J * K_, 0.0);
    const bool uniform = row_weight_.empty();
    for (std::size_t i = 0; i < row_cell_.size(); ++i)
        for (std::size_t k = 0; k < K_; ++k)
            cell_[row_cell_[i] * K_ + k] += (uniform ? 1.0 : row_weight_[i]) * contrib_[i * K_ + k];
    if (uniform) {
        const double n = static_cast<double>(row_cell_.size());
        for (auto& v : cell_) v /= n;
    }
}

namespace {

std::vector<std::size_t> action_positions(const Policy& policy, const ActionSet& actions, std::size_t J) {
    if (policy.size() != J)
        throw DataError("policy covers " + std::to_string(policy.size()) + " points, grid has " + std::to_string(J));
    std::vector<std::size_t> pos(J);
    for (std::size_t j = 0; j < J; ++j) pos[j] = actions.index_of(policy.at(j));
    return pos;
}

}  // namespace

double Objective::value(const Policy& policy) const {
    const auto pos = action_positions(policy, actions_, grid_.size());
    double s = 0.0;
    if (row_weight_.empty()) {
        for (std::size_t i = 0; i < row_cell_.size(); ++i) s += contrib_[i * K_ + pos[row_cell_[i]]];
        return s / static_cast<double>(row_cell_.size());
    }
    for (std::size_t i = 0; i < row_cell_.size(); ++i) s += row_weight_[i] * contrib_[i * K_ + pos[row_cell_[i]]];
    return s;
}

double Objective::cell_value(const Policy& policy) const {
    const auto pos = action_positions(policy, actions_, grid_.size());
    double s = 0.0;
    for (std::size_t j = 0; j < pos.size(); ++j) s += cell_[j * K_ + pos[j]];
    return s;
}

double Objective::tie_tolerance() const {
    double scale = 0.0;
    for (std::size_t j = 0; j < grid_.size(); ++j) {
        double m = 0.0;
        for (std::size_t k = 0; k < K_; ++k) m = std::max(m, std::abs(cell_[j * K_ + k]));
        scale += m;
    }
    return 1e-12 * std::max(1.0, scale);
}

double maximin_value(const Policy& policy, const QuasiOutcomeTable& table, const UtilitySpec& util) {
    return Objective::from_table(table, util).value(policy);
}

// --- candidate selection ---------------------------------------------------

namespace {

struct Candidate {
    std::vector<int> params;
    Policy policy;
    double cell_value = 0.0;
};

// Keeps every distinct policy whose cell value is within 2*tol of the best
// seen so far; for repeated policies the smallest params win.
class Collector {
public:
    explicit Collector(double tol) : tol_(tol) {}

    double best() const { return best_; }
    double cutoff() const { return best_ - 2.0 * tol_; }

    void offer(std::vector<int> params, Policy policy, double v) {
        if (v < cutoff()) return;
        if (v > best_) best_ = v;
        auto it = kept_.find(policy);
        if (it == kept_.end()) {
            kept_.emplace(std::move(policy), Candidate{std::move(params), Policy{}, v});
        } else if (params < it->second.params) {
            it->second.params = std::move(params);
        }
        if (kept_.size() > 4096) prune();
    }

    std::vector<Candidate> take() {
        prune();
        std::vector<Candidate> out;
        out.reserve(kept_.size());
        for (auto& [pol, c] : kept_) {
            c.policy = pol;
            out.push_back(std::move(c));
        }
        return out;
    }

private:
    void prune() {
        const double cut = cutoff();
        for (auto it = kept_.begin(); it != kept_.end();)
            it = it->second.cell_value < cut ? kept_.erase(it) : std::next(it);
    }

    double tol_;
    double best_ = -std::numeric_limits<double>::infinity();
    std::map<Policy, Candidate> kept_;
};

std::string join(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

MaximinReport finalize(const Objective& obj, std::vector<Candidate> cands, const PolicyClass& cls,
                       bool baseline_in_class, SearchStats stats, std::vector<std::string> warnings) {
    if (cands.empty()) throw NumericError("search produced no candidate policy");
    const double tol = obj.tie_tolerance();
    std::vector<double> v(cands.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cands.size(); ++c) {
        v[c] = obj.value(cands[c].policy);
        best = std::max(best, v[c]);
    }
    std::vector<std::size_t> tied;
    for (std::size_t c = 0; c < cands.size(); ++c)
        if (v[c] >= best - tol) tied.push_back(c);
    const Policy& base = obj.baseline();
    std::sort(tied.begin(), tied.end(), [&](std::size_t a, std::size_t b) {
        const auto da = cands[a].policy.deviations(base), db = cands[b].policy.deviations(base);
        if (da != db) return da < db;
        return cands[a].params < cands[b].params;
    });
    const auto& win = cands[tied.front()];

    MaximinReport r;
    r.policy = win.policy;
    r.params = win.params;
    r.policy_class = class_name(cls);
    r.description = describe_rule(rule_for(cls, win.params, obj.grid()));
    r.worst_case_value = v[tied.front()];
    r.baseline_value = obj.value(base);
    r.improvement = r.worst_case_value - r.baseline_value;
    r.deviations = win.policy.deviations(base);
    r.baseline_in_class = baseline_in_class;
    r.stats = stats;
    r.warnings = std::move(warnings);
    r.tie_break.push_back(std::to_string(tied.size()) + " of " + std::to_string(cands.size()) +
                          " candidate(s) within " + std::to_string(tol) + " of the best value");
    if (tied.size() > 1)
        r.tie_break.push_back("chose fewest deviations (" + std::to_string(r.deviations) +
                              "), then smallest params [" + join(win.params) + "]");
    return r;
}

void require_binary(const Objective& obj, const char* what) {
    if (!obj.actions().is_binary01())
        throw ConfigError(std::string(what) + " policies need the binary action set {0,1}");
}

MaximinReport search_list(const Objective& obj, const PolicyClass& cls, std::vector<EnumeratedPolicy> members,
                          std::vector<std::string> warnings) {
    Collector col(obj.tie_tolerance());
    SearchStats stats;
    bool in_class = false;
    for (auto& m : members) {
        ++stats.policies_evaluated;
        in_class = in_class || m.policy == obj.baseline();
        const double v = obj.cell_value(m.policy);
        col.offer(std::move(m.params), std::move(m.policy), v);
    }
    if (!in_class)
        warnings.push_back("baseline policy is not in the class; the safety guarantee does not apply");
    return finalize(obj, col.take(), cls, in_class, stats, std::move(warnings));
}

}  // namespace

// --- enumeration -----------------------------------------------------------

std::vector<std::vector<int>> enumerate_order_ideals(int rows, int cols) {
    if (rows < 1 || cols < 1) throw ConfigError("monotone grid needs at least one row and column");
    if (rows > 8 || cols > 8)
        throw ConfigError("monotone grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " exceeds the 8x8 enumeration budget");
    std::vector<std::vector<int>> out;
    std::vector<int> b(static_cast<std::size_t>(rows));
    auto rec = [&](auto&& self, int r, int cap) -> void {
        if (r == rows) {
            out.push_back(b);
            return;
        }
        for (int v = 0; v <= cap; ++v) {
            b[static_cast<std::size_t>(r)] = v;
            self(self, r + 1, v);
        }
    };
    rec(rec, 0, cols);
    return out;
}

PolicyRule rule_for(const PolicyClass& cls, const std::vector<int>& params, const CovariateGrid& grid) {
    struct R {
        const std::vector<int>& p;
        const CovariateGrid& grid;
        PolicyRule operator()(const ThresholdClass& c) const { return ThresholdRule{c.features, p.at(0)}; }
        PolicyRule operator()(const IntegerWeightClass& c) const {
            return IntegerWeightRule{std::vector<int>(p.begin(), p.begin() + static_cast<long>(c.dimension)),
                                     p.at(c.dimension)};
        }
        PolicyRule operator()(const MonotoneGridClass& c) const {
            return MonotoneRule{c.axis0, c.axis1, c.lo0, c.lo1, c.hi1 - c.lo1 + 1, p};
        }
        PolicyRule operator()(const ExplicitClass& c) const {
            TableRule t;
            const auto& pol = c.policies.at(static_cast<std::size_t>(p.at(0)));
            for (std::size_t j = 0; j < grid.size(); ++j) t.table[grid.point(j)] = pol.at(j);
            return t;
        }
    };
    return std::visit(R{params, grid}, cls);
}

std::vector<EnumeratedPolicy> enumerate_policies(const PolicyClass& cls, const CovariateGrid& grid,
                                                 std::uint64_t limit) {
    std::vector<EnumeratedPolicy> out;
    auto push = [&](std::vector<int> params) {
        Policy p = Policy::from_rule(rule_for(cls, params, grid), grid);
        out.push_back({std::move(params), std::move(p)});
    };
    if (const auto* c = std::get_if<ThresholdClass>(&cls)) {
        if (c->min_threshold > c->max_threshold) throw ConfigError("threshold range is empty");
        for (int eta = c->min_threshold; eta <= c->max_threshold; ++eta) push({eta});
    } else if (const auto* c = std::get_if<IntegerWeightClass>(&cls)) {
        if (c->weight_min > c->weight_max) throw ConfigError("integer weight box is empty");
        const int lo_t = c->threshold_range ? c->threshold_range->first : c->threshold;
        const int hi_t = c->threshold_range ? c->threshold_range->second : c->threshold;
        if (lo_t > hi_t) throw ConfigError("threshold range is empty");
        const double W = c->weight_max - c->weight_min + 1;
        if (std::pow(W, static_cast<double>(c->dimension)) * (hi_t - lo_t + 1) > static_cast<double>(limit))
            throw ConfigError("integer weight box too large to enumerate");
        std::vector<int> theta(c->dimension, c->weight_min);
        for (int t = lo_t; t <= hi_t; ++t) {
            std::fill(theta.begin(), theta.end(), c->weight_min);
            while (true) {
                auto params = theta;
                params.push_back(t);
                push(std::move(params));
                std::size_t q = c->dimension;
                while (q > 0 && theta[q - 1] == c->weight_max) theta[--q] = c->weight_min;
                if (q == 0) break;
                ++theta[q - 1];
            }
        }
    } else if (const auto* c = std::get_if<MonotoneGridClass>(&cls)) {
        for (auto& b : enumerate_order_ideals(c->hi0 - c->lo0 + 1, c->hi1 - c->lo1 + 1)) push(std::move(b));
    } else {
        const auto& e = std::get<ExplicitClass>(cls);
        for (std::size_t q = 0; q < e.policies.size(); ++q) {
            if (e.policies[q].size() != grid.size())
                throw DataError("explicit policy " + std::to_string(q) + " does not cover the grid");
            out.push_back({{static_cast<int>(q)}, e.policies[q]});
        }
    }
    return out;
}

// --- searchers -------------------------------------------------------------

MaximinReport learn_threshold(const Objective& obj, const ThresholdClass& cls) {
    require_binary(obj, "threshold");
    if (cls.min_threshold > cls.max_threshold) throw ConfigError("threshold range is empty");
    return search_list(obj, cls, enumerate_policies(cls, obj.grid()), {});
}

MaximinReport learn_monotone_grid(const Objective& obj, const MonotoneGridClass& cls) {
    require_binary(obj, "monotone grid");
    return search_list(obj, cls, enumerate_policies(cls, obj.grid()), {});
}

MaximinReport learn_explicit(const Objective& obj, const ExplicitClass& cls) {
    if (cls.policies.empty()) throw ConfigError("explicit policy list is empty");
    ExplicitClass unique;
    for (const auto& p : cls.policies) {
        p.validate(obj.actions(), obj.grid().size());
        if (std::find(unique.policies.begin(), unique.policies.end(), p) == unique.policies.end())
            unique.policies.push_back(p);
    }
    return search_list(obj, unique, enumerate_policies(unique, obj.grid()), {});
}

namespace {

// Exact branch-and-bound over integer weight vectors on binary covariates.
class WeightSearch {
public:
    WeightSearch(const std::vector<Covariate>& pts, std::vector<double> s0, std::vector<double> s1,
                 const IntegerWeightClass& cls, std::vector<std::size_t> order, double tol)
        : pts_(pts), s0_(std::move(s0)), s1_(std::move(s1)), cls_(cls), order_(std::move(order)), col_(tol) {}

    void run(int threshold) {
        T_ = threshold;
        const std::size_t J = pts_.size(), d = cls_.dimension;
        sum_.assign(J, 0);
        rem_min_.assign(J, 0);
        rem_max_.assign(J, 0);
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t f = 0; f < d; ++f)
                if (pts_[j][f]) {
                    rem_min_[j] += cls_.weight_min;
                    rem_max_[j] += cls_.weight_max;
                }
        theta_.assign(d, 0);
        dfs(0);
    }

    Collector& collector() { return col_; }
    SearchStats stats;

private:
    void dfs(std::size_t depth) {
        ++stats.nodes_expanded;
        const std::size_t J = pts_.size();
        if (depth == cls_.dimension) {
            ++stats.policies_evaluated;
            std::vector<int> labels(J);
            double v = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                labels[j] = sum_[j] >= T_ ? 1 : 0;
                v += labels[j] ? s1_[j] : s0_[j];
            }
            auto params = theta_;
            params.push_back(T_);
            col_.offer(std::move(params), Policy(std::move(labels)), v);
            return;
        }
        double ub = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            if (sum_[j] + rem_min_[j] >= T_)
                ub += s1_[j];
            else if (sum_[j] + rem_max_[j] < T_)
                ub += s0_[j];
            else
                ub += std::max(s0_[j], s1_[j]);
        }
        if (ub < col_.cutoff()) return;

        const std::size_t f = order_[depth];
        for (std::size_t j = 0; j < J; ++j)
            if (pts_[j][f]) {
                rem_min_[j] -= cls_.weight_min;
                rem_max_[j] -= cls_.weight_max;
            }
        for (int w = cls_.weight_min; w <= cls_.weight_max; ++w) {
            theta_[f] = w;
            for (std::size_t j = 0; j < J; ++j)
                if (pts_[j][f]) sum_[j] += w;
            dfs(depth + 1);
            for (std::size_t j = 0; j < J; ++j)
                if (pts_[j][f]) sum_[j] -= w;
        }
        theta_[f] = 0;
        for (std::size_t j = 0; j < J; ++j)
            if (pts_[j][f]) {
                rem_min_[j] += cls_.weight_min;
                rem_max_[j] += cls_.weight_max;
            }
    }

    const std::vector<Covariate>& pts_;
    std::vector<double> s0_, s1_;
    const IntegerWeightClass& cls_;
    std::vector<std::size_t> order_;
    Collector col_;
    int T_ = 0;
    std::vector<long> sum_, rem_min_, rem_max_;
    std::vector<int> theta_;
};

}  // namespace

MaximinReport learn_integer_weights(const Objective& obj, const IntegerWeightClass& cls) {
    require_binary(obj, "integer-weight");
    const auto& grid = obj.grid();
    if (cls.weight_min > cls.weight_max) throw ConfigError("integer weight box is empty");
    if (cls.dimension != grid.dimension())
        throw ConfigError("integer-weight class has dimension " + std::to_string(cls.dimension) +
                          " but covariates have dimension " + std::to_string(grid.dimension()));
    const int lo_t = cls.threshold_range ? cls.threshold_range->first : cls.threshold;
    const int hi_t = cls.threshold_range ? cls.threshold_range->second : cls.threshold;
    if (lo_t > hi_t) throw ConfigError("threshold range is empty");
    const double W = cls.weight_max - cls.weight_min + 1;
    double worst = 0.0;
    for (std::size_t t = 0; t <= cls.dimension; ++t) worst += std::pow(W, static_cast<double>(t));
    worst *= hi_t - lo_t + 1;
    if (worst > 1e9)
        throw ConfigError("integer weight search needs up to " + std::to_string(worst) +
                          " nodes (limit 1e9); shrink the weight box or the threshold range");

    std::vector<Covariate> pts(grid.points().begin(), grid.points().end());
    for (const auto& x : pts)
        for (int v : x)
            if (v != 0 && v != 1) throw DataError("integer-weight policies need binary covariates, got " + to_string(x));

    const std::size_t J = grid.size();
    std::vector<double> s0(J), s1(J), freq(cls.dimension, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        s0[j] = obj.cell_score(j, 0);
        s1[j] = obj.cell_score(j, 1);
        for (std::size_t f = 0; f < cls.dimension; ++f) freq[f] += grid.weight(j) * pts[j][f];
    }
    std::vector<std::size_t> order(cls.dimension);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return freq[a] > freq[b]; });

    WeightSearch search(pts, s0, s1, cls, order, obj.tie_tolerance());
    for (int t = lo_t; t <= hi_t; ++t) search.run(t);

    // Membership of the baseline: maximize agreement with it.
    std::vector<double> a0(J), a1(J);
    for (std::size_t j = 0; j < J; ++j) {
        a0[j] = obj.baseline().at(j) == 0 ? 1.0 : 0.0;
        a1[j] = 1.0 - a0[j];
    }
    WeightSearch agree(pts, a0, a1, cls, order, 0.25);
    for (int t = lo_t; t <= hi_t; ++t) agree.run(t);
    const bool in_class = agree.collector().best() >= static_cast<double>(J) - 0.5;

    std::vector<std::string> warnings;
    if (!in_class) warnings.push_back("baseline policy is not in the class; the safety guarantee does not apply");
    auto cands = search.collector().take();
    return finalize(obj, std::move(cands), cls, in_class, search.stats, std::move(warnings));
}

MaximinReport learn(const Objective& obj, const PolicyClass& cls) {
    struct L {
        const Objective& o;
        MaximinReport operator()(const ThresholdClass& c) const { return learn_threshold(o, c); }
        MaximinReport operator()(const IntegerWeightClass& c) const { return learn_integer_weights(o, c); }
        MaximinReport operator()(const MonotoneGridClass& c) const { return learn_monotone_grid(o, c); }
        MaximinReport operator()(const ExplicitClass& c) const { return learn_explicit(o, c); }
    };
    return std::visit(L{obj}, cls);
}

}  // namespace safepl::opt
