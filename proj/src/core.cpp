#include "safepl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace safepl {

std::string to_string(const Covariate& x) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
    os << ')';
    return os.str();
}

// --- CovariateGrid ---------------------------------------------------------

CovariateGrid::CovariateGrid(std::vector<Covariate> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.empty()) throw DataError("covariate grid is empty");
    if (points_.size() != weights_.size())
        throw DataError("covariate grid: " + std::to_string(points_.size()) + " points but " +
                        std::to_string(weights_.size()) + " weights");
    const std::size_t dim = points_.front().size();
    double total = 0.0;
    for (std::size_t j = 0; j < points_.size(); ++j) {
        if (points_[j].size() != dim)
            throw DataError("covariate grid: point " + to_string(points_[j]) + " has dimension " +
                            std::to_string(points_[j].size()) + ", expected " + std::to_string(dim));
        if (!(weights_[j] >= 0.0) || !std::isfinite(weights_[j]))
            throw DataError("covariate grid: negative or non-finite weight at " + to_string(points_[j]));
        if (!index_.emplace(points_[j], j).second)
            throw DataError("covariate grid: duplicate point " + to_string(points_[j]));
        total += weights_[j];
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw DataError("covariate grid weights sum to " + std::to_string(total) + ", not 1");
}

CovariateGrid CovariateGrid::uniform(std::vector<Covariate> points) {
    std::vector<double> w(points.size(), points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size()));
    return CovariateGrid(std::move(points), std::move(w));
}

CovariateGrid CovariateGrid::empirical(std::span<const Covariate> sample,
                                       std::vector<std::size_t>* row_index) {
    if (sample.empty()) throw DataError("cannot build an empirical grid from zero rows");
    std::map<Covariate, std::size_t> counts;
    for (const auto& x : sample) ++counts[x];
    std::vector<Covariate> pts;
    std::vector<double> w;
    pts.reserve(counts.size());
    const double n = static_cast<double>(sample.size());
    for (const auto& [x, c] : counts) {
        pts.push_back(x);
        w.push_back(static_cast<double>(c) / n);
    }
    CovariateGrid grid(std::move(pts), std::move(w));
    if (row_index) {
        row_index->resize(sample.size());
        for (std::size_t i = 0; i < sample.size(); ++i) (*row_index)[i] = *grid.find(sample[i]);
    }
    return grid;
}

std::optional<std::size_t> CovariateGrid::find(const Covariate& x) const {
    auto it = index_.find(x);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

// --- ActionSet / UtilitySpec ----------------------------------------------

ActionSet::ActionSet(std::vector<int> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw ConfigError("action set needs at least two actions");
    std::set<int> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size()) throw ConfigError("action labels must be distinct");
}

bool ActionSet::contains(int label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t ActionSet::index_of(int label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw DataError("action " + std::to_string(label) + " is not in the action set");
    return static_cast<std::size_t>(it - labels_.begin());
}

UtilitySpec UtilitySpec::constant_gain(const ActionSet& actions, double gain, std::map<int, double> cost) {
    UtilitySpec u;
    for (int a : actions.labels()) u.gain[a] = gain;
    u.cost = std::move(cost);
    u.validate(actions);
    return u;
}

double UtilitySpec::gain_of(int action) const {
    auto it = gain.find(action);
    if (it == gain.end()) throw ConfigError("utility gain missing for action " + std::to_string(action));
    return it->second;
}

double UtilitySpec::cost_of(int action) const {
    auto it = cost.find(action);
    if (it == cost.end()) throw ConfigError("utility cost missing for action " + std::to_string(action));
    return it->second;
}

void UtilitySpec::validate(const ActionSet& actions) const {
    for (int a : actions.labels()) {
        double g = gain_of(a), c = cost_of(a);
        if (!std::isfinite(g) || !std::isfinite(c))
            throw ConfigError("utility for action " + std::to_string(a) + " is not finite");
    }
}

bool UtilitySpec::has_constant_gain() const {
    if (gain.empty()) return true;
    const double g0 = gain.begin()->second;
    return std::all_of(gain.begin(), gain.end(), [&](const auto& kv) { return kv.second == g0; });
}

double UtilitySpec::magnitude() const {
    double c = 0.0;
    for (const auto& [a, g] : gain) {
        const double u0 = cost_of(a);
        c = std::max({c, std::abs(u0), std::abs(u0 + g)});
    }
    return c;
}

// --- rules -----------------------------------------------------------------

namespace {

int coordinate(const Covariate& x, std::size_t f) {
    if (f >= x.size())
        throw DataError("rule references feature " + std::to_string(f) + " but covariate " + to_string(x) +
                        " has dimension " + std::to_string(x.size()));
    return x[f];
}

struct RuleApplier {
    const Covariate& x;
    int operator()(const ThresholdRule& r) const {
        long s = 0;
        for (auto f : r.features) s += coordinate(x, f);
        return s >= r.threshold ? 1 : 0;
    }
    int operator()(const IntegerWeightRule& r) const {
        if (r.weights.size() != x.size())
            throw DataError("integer-weight rule has " + std::to_string(r.weights.size()) +
                            " weights but covariate " + to_string(x) + " has dimension " +
                            std::to_string(x.size()));
        long s = 0;
        for (std::size_t j = 0; j < x.size(); ++j) s += static_cast<long>(r.weights[j]) * x[j];
        return s >= r.threshold ? 1 : 0;
    }
    int operator()(const MonotoneRule& r) const {
        const int row = coordinate(x, r.axis0) - r.lo0;
        const int col = coordinate(x, r.axis1) - r.lo1;
        if (row < 0 || row >= static_cast<int>(r.boundary.size()) || col < 0 || col >= r.columns)
            throw DataError("covariate " + to_string(x) + " lies outside the monotone grid");
        return col >= r.boundary[static_cast<std::size_t>(row)] ? 1 : 0;
    }
    int operator()(const TableRule& r) const {
        auto it = r.table.find(x);
        if (it != r.table.end()) return it->second;
        if (r.fallback) return *r.fallback;
        throw DataError("table rule has no entry for covariate " + to_string(x));
    }
};

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

}  // namespace

int apply_rule(const PolicyRule& rule, const Covariate& x) { return std::visit(RuleApplier{x}, rule); }

std::string describe_rule(const PolicyRule& rule) {
    struct D {
        std::string operator()(const ThresholdRule& r) const {
            return "threshold(features=[" + join(r.features) + "], eta=" + std::to_string(r.threshold) + ")";
        }
        std::string operator()(const IntegerWeightRule& r) const {
            return "integer_weight(theta=[" + join(r.weights) + "], threshold=" + std::to_string(r.threshold) + ")";
        }
        std::string operator()(const MonotoneRule& r) const {
            return "monotone(boundary=[" + join(r.boundary) + "])";
        }
        std::string operator()(const TableRule& r) const {
            return "table(" + std::to_string(r.table.size()) + " entries)";
        }
    };
    return std::visit(D{}, rule);
}

Policy Policy::from_rule(const PolicyRule& rule, const CovariateGrid& grid) {
    std::vector<int> labels(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) labels[j] = apply_rule(rule, grid.point(j));
    return Policy(std::move(labels));
}

std::size_t Policy::deviations(const Policy& other) const {
    if (other.size() != size()) throw DataError("policies are defined on grids of different sizes");
    std::size_t d = 0;
    for (std::size_t j = 0; j < size(); ++j) d += labels_[j] != other.labels_[j];
    return d;
}

void Policy::validate(const ActionSet& actions, std::size_t grid_size) const {
    if (size() != grid_size)
        throw DataError("policy covers " + std::to_string(size()) + " points, grid has " +
                        std::to_string(grid_size));
    for (std::size_t j = 0; j < size(); ++j)
        if (!actions.contains(labels_[j]))
            throw DataError("policy assigns unknown action " + std::to_string(labels_[j]) + " at grid index " +
                            std::to_string(j));
}

std::string class_name(const PolicyClass& cls) {
    struct N {
        std::string operator()(const ThresholdClass&) const { return "threshold"; }
        std::string operator()(const IntegerWeightClass&) const { return "integer_weight"; }
        std::string operator()(const MonotoneGridClass&) const { return "monotone_grid"; }
        std::string operator()(const ExplicitClass&) const { return "explicit"; }
    };
    return std::visit(N{}, cls);
}

// --- Dataset ---------------------------------------------------------------

Dataset::Dataset(std::vector<Observation> rows, ActionSet actions, PolicyRule baseline, std::size_t first_line)
    : rows_(std::move(rows)), actions_(std::move(actions)), baseline_rule_(std::move(baseline)) {
    if (rows_.empty()) throw DataError("dataset has no rows");
    auto where = [&](std::size_t i) {
        return first_line > 0 ? "line " + std::to_string(first_line + i) : "row " + std::to_string(i);
    };
    const std::size_t dim = rows_.front().x.size();
    std::size_t with_z = 0, with_d = 0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (r.x.size() != dim)
            throw DataError(where(i) + ": covariate has dimension " + std::to_string(r.x.size()) + ", expected " +
                            std::to_string(dim));
        if (r.outcome != 0 && r.outcome != 1) throw DataError(where(i) + ": outcome y must be 0 or 1");
        if (r.assignment && *r.assignment != 0 && *r.assignment != 1)
            throw DataError(where(i) + ": assignment z must be 0 or 1");
        if (r.decision && *r.decision != 0 && *r.decision != 1)
            throw DataError(where(i) + ": decision d must be 0 or 1");
        if (r.assignment && !r.propensity)
            throw DataError(where(i) + ": assignment z present without propensity e");
        if (r.propensity && !(*r.propensity > 0.0 && *r.propensity < 1.0))
            throw DataError(where(i) + ": propensity e must lie strictly between 0 and 1");
        if (!actions_.contains(r.action))
            throw DataError(where(i) + ": action " + std::to_string(r.action) + " is not in the action set");
        const int expected = apply_rule(baseline_rule_, r.x);
        if (expected != r.action)
            throw DataError(where(i) + ": recorded action " + std::to_string(r.action) +
                            " differs from baseline action " + std::to_string(expected) + " at x=" + to_string(r.x));
        with_z += r.assignment.has_value();
        with_d += r.decision.has_value();
    }
    if (with_z != 0 && with_z != rows_.size()) throw DataError("assignment z is present on some rows only");
    if (with_d != 0 && with_d != rows_.size()) throw DataError("decision d is present on some rows only");
    has_assignment_ = with_z > 0;
    has_decision_ = with_d > 0;

    std::vector<Covariate> xs;
    xs.reserve(rows_.size());
    for (const auto& r : rows_) xs.push_back(r.x);
    grid_ = CovariateGrid::empirical(xs, &row_cell_);
    baseline_ = Policy::from_rule(baseline_rule_, grid_);
}

// --- ModelTable and values -------------------------------------------------

ModelTable::ModelTable(ActionSet actions, std::size_t grid_size)
    : actions_(std::move(actions)), grid_size_(grid_size), values_(actions_.size() * grid_size) {}

void ModelTable::set(int action, std::size_t j, double value) {
    if (j >= grid_size_) throw DataError("model entry index " + std::to_string(j) + " is outside the grid");
    values_[actions_.index_of(action) * grid_size_ + j] = value;
}

bool ModelTable::has(int action, std::size_t j) const {
    if (j >= grid_size_ || !actions_.contains(action)) return false;
    return values_[actions_.index_of(action) * grid_size_ + j].has_value();
}

double ModelTable::at(int action, std::size_t j) const {
    if (!has(action, j))
        throw DataError("model value missing for (a=" + std::to_string(action) + ", x#" + std::to_string(j) + ")");
    return *values_[actions_.index_of(action) * grid_size_ + j];
}

double value(const Policy& policy, const ModelTable& model, const CovariateGrid& grid, const UtilitySpec& util) {
    if (policy.size() != grid.size()) throw DataError("policy and grid sizes differ");
    double v = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const int a = policy.at(j);
        if (!model.has(a, j))
            throw DataError("model value missing for (a=" + std::to_string(a) + ", x=" + to_string(grid.point(j)) +
                            ")");
        v += grid.weight(j) * (util.gain_of(a) * model.at(a, j) + util.cost_of(a));
    }
    return v;
}

double empirical_value(const Policy& policy, const Dataset& data, const ModelTable& model, const UtilitySpec& util) {
    const auto& grid = data.grid();
    if (policy.size() != grid.size()) throw DataError("policy and dataset grid sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t j = data.cell(i);
        const int a = policy.at(j);
        double y;
        if (a == data.baseline().at(j)) {
            y = data.row(i).outcome;
        } else {
            if (!model.has(a, j))
                throw DataError("model value missing for (a=" + std::to_string(a) + ", x=" +
                                to_string(grid.point(j)) + ")");
            y = model.at(a, j);
        }
        s += util.gain_of(a) * y + util.cost_of(a);
    }
    return s / static_cast<double>(data.size());
}

double baseline_value(const Dataset& data, const UtilitySpec& util) {
    double s = 0.0;
    for (const auto& r : data.rows()) s += util.gain_of(r.action) * r.outcome + util.cost_of(r.action);
    return s / static_cast<double>(data.size());
}

double regret(const Policy& pi1, const Policy& pi2, const ModelTable& model, const CovariateGrid& grid,
              const UtilitySpec& util) {
    return value(pi2, model, grid, util) - value(pi1, model, grid, util);
}

}  // namespace safepl
