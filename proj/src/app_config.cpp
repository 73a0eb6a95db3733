#include "safepl/app.hpp"

#include <fstream>
#include <set>

namespace safepl::app {

namespace {

// A JSON value with the key path that reached it, for error messages.
class Node {
public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError("config " + path_ + ": " + msg); }

    const std::string& path() const { return path_; }
    const json& raw() const { return *j_; }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    Node at(const std::string& key) const {
        if (!j_->is_object()) fail("expected an object");
        auto it = j_->find(key);
        if (it == j_->end()) throw ConfigError("config " + child(key) + ": required key is missing");
        return {*it, child(key)};
    }

    std::optional<Node> get(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return at(key);
    }

    std::vector<Node> items() const {
        if (!j_->is_array()) fail("expected an array");
        std::vector<Node> out;
        for (std::size_t i = 0; i < j_->size(); ++i) out.emplace_back((*j_)[i], path_ + "[" + std::to_string(i) + "]");
        return out;
    }

    void only(std::initializer_list<const char*> keys) const {
        if (!j_->is_object()) fail("expected an object");
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!allowed.count(it.key())) throw ConfigError("config " + child(it.key()) + ": unknown key");
    }

    double num() const {
        if (!j_->is_number()) fail("expected a number");
        return j_->get<double>();
    }

    int integer() const {
        if (!j_->is_number_integer()) fail("expected an integer");
        return j_->get<int>();
    }

    std::uint64_t unsigned_integer() const {
        if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<long long>() >= 0))
            fail("expected a nonnegative integer");
        return j_->get<std::uint64_t>();
    }

    std::string str() const {
        if (!j_->is_string()) fail("expected a string");
        return j_->get<std::string>();
    }

    bool boolean() const {
        if (!j_->is_boolean()) fail("expected true or false");
        return j_->get<bool>();
    }

    std::vector<int> ints() const {
        std::vector<int> v;
        for (auto& n : items()) v.push_back(n.integer());
        return v;
    }

    std::vector<double> nums() const {
        std::vector<double> v;
        for (auto& n : items()) v.push_back(n.num());
        return v;
    }

    /// {"0": 1.5, "1": 2} keyed by action label.
    std::map<int, double> action_map() const {
        if (!j_->is_object()) fail("expected an object keyed by action label");
        std::map<int, double> m;
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            int label = 0;
            try {
                std::size_t pos = 0;
                label = std::stoi(it.key(), &pos);
                if (pos != it.key().size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw ConfigError("config " + child(it.key()) + ": key is not an integer action label");
            }
            m[label] = Node(it.value(), child(it.key())).num();
        }
        return m;
    }

private:
    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* j_;
    std::string path_;
};

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

TableRule parse_table(const Node& n) {
    n.only({"type", "table", "fallback"});
    TableRule t;
    for (auto& entry : n.at("table").items()) {
        entry.only({"x", "a"});
        auto x = entry.at("x").ints();
        if (!t.table.emplace(std::move(x), entry.at("a").integer()).second)
            entry.fail("duplicate covariate in table");
    }
    if (auto f = n.get("fallback")) t.fallback = f->integer();
    return t;
}

std::vector<std::size_t> parse_features(const Node& n) {
    std::vector<std::size_t> f;
    for (auto& v : n.items()) {
        const int k = v.integer();
        if (k < 0) v.fail("feature index must be nonnegative");
        f.push_back(static_cast<std::size_t>(k));
    }
    return f;
}

PolicyRule parse_rule(const Node& n) {
    const auto type = n.at("type").str();
    if (type == "threshold") {
        n.only({"type", "features", "threshold"});
        return ThresholdRule{parse_features(n.at("features")), n.at("threshold").integer()};
    }
    if (type == "integer_weight") {
        n.only({"type", "weights", "threshold"});
        return IntegerWeightRule{n.at("weights").ints(), n.at("threshold").integer()};
    }
    if (type == "monotone") {
        n.only({"type", "axis0", "axis1", "lo0", "lo1", "columns", "boundary"});
        MonotoneRule r;
        r.axis0 = n.has("axis0") ? static_cast<std::size_t>(n.at("axis0").unsigned_integer()) : 0;
        r.axis1 = n.has("axis1") ? static_cast<std::size_t>(n.at("axis1").unsigned_integer()) : 1;
        r.lo0 = n.has("lo0") ? n.at("lo0").integer() : 1;
        r.lo1 = n.has("lo1") ? n.at("lo1").integer() : 1;
        r.columns = n.at("columns").integer();
        r.boundary = n.at("boundary").ints();
        return r;
    }
    if (type == "table") return parse_table(n);
    n.at("type").fail("unknown rule type '" + type + "' (threshold, integer_weight, monotone, table)");
}

PolicyClassSpec parse_policy_class(const Node& n) {
    const auto type = n.at("type").str();
    PolicyClassSpec spec;
    if (type == "threshold") {
        n.only({"type", "features", "min", "max"});
        ThresholdClass c{parse_features(n.at("features")), n.at("min").integer(), n.at("max").integer()};
        if (c.min_threshold > c.max_threshold) n.fail("min exceeds max");
        spec.cls = c;
    } else if (type == "integer_weight") {
        n.only({"type", "dimension", "weight_min", "weight_max", "threshold", "threshold_range"});
        IntegerWeightClass c;
        c.dimension = static_cast<std::size_t>(n.at("dimension").unsigned_integer());
        if (auto v = n.get("weight_min")) c.weight_min = v->integer();
        if (auto v = n.get("weight_max")) c.weight_max = v->integer();
        if (auto v = n.get("threshold")) c.threshold = v->integer();
        if (auto v = n.get("threshold_range")) {
            auto r = v->ints();
            if (r.size() != 2 || r[0] > r[1]) v->fail("expected [min, max]");
            c.threshold_range = std::make_pair(r[0], r[1]);
        }
        if (c.weight_min > c.weight_max) n.fail("weight_min exceeds weight_max");
        spec.cls = c;
    } else if (type == "monotone") {
        n.only({"type", "axis0", "axis1", "lo0", "hi0", "lo1", "hi1"});
        MonotoneGridClass c;
        if (auto v = n.get("axis0")) c.axis0 = static_cast<std::size_t>(v->unsigned_integer());
        if (auto v = n.get("axis1")) c.axis1 = static_cast<std::size_t>(v->unsigned_integer());
        if (auto v = n.get("lo0")) c.lo0 = v->integer();
        if (auto v = n.get("hi0")) c.hi0 = v->integer();
        if (auto v = n.get("lo1")) c.lo1 = v->integer();
        if (auto v = n.get("hi1")) c.hi1 = v->integer();
        if (c.lo0 > c.hi0 || c.lo1 > c.hi1) n.fail("empty axis range");
        spec.cls = c;
    } else if (type == "explicit") {
        n.only({"type", "policies"});
        for (auto& p : n.at("policies").items()) spec.tables.push_back(parse_table(p));
        if (spec.tables.empty()) n.at("policies").fail("explicit class needs at least one policy");
        spec.cls = ExplicitClass{};
    } else {
        n.at("type").fail("unknown policy class '" + type + "' (threshold, integer_weight, monotone, explicit)");
    }
    return spec;
}

ModelSpec parse_model(const Node& n) {
    const auto type = n.at("type").str();
    ModelSpec m;
    auto parse_lambda = [&]() {
        if (auto l = n.get("lambda")) {
            m.lambda = l->action_map();
            for (auto& [a, v] : m.lambda)
                if (!(v >= 0.0)) l->fail("Lipschitz constants must be nonnegative");
        }
        if (auto mult = n.get("multiplier")) {
            m.multiplier = mult->num();
            if (!(*m.multiplier > 0.0)) mult->fail("multiplier must be positive");
        }
        if (auto metric = n.get("metric")) {
            const auto s = metric->str();
            if (s == "l1") m.metric = models::Metric::l1;
            else if (s == "l2") m.metric = models::Metric::l2;
            else metric->fail("metric must be l1 or l2");
        }
    };
    if (type == "no_restriction") {
        n.only({"type"});
        m.kind = ModelSpec::Kind::no_restriction;
    } else if (type == "lipschitz") {
        n.only({"type", "lambda", "multiplier", "metric"});
        m.kind = ModelSpec::Kind::lipschitz;
        parse_lambda();
        if (m.lambda.empty() == !m.multiplier.has_value())
            n.fail("lipschitz needs exactly one of lambda or multiplier");
    } else if (type == "additive") {
        n.only({"type", "order", "lambda", "metric"});
        m.kind = ModelSpec::Kind::additive;
        parse_lambda();
        if (auto o = n.get("order")) {
            m.order = o->integer();
            if (m.order != 1 && m.order != 2) o->fail("order must be 1 or 2");
        }
    } else if (type == "glm") {
        n.only({"type", "basis", "link"});
        m.kind = ModelSpec::Kind::glm;
        const auto basis = n.has("basis") ? n.at("basis").str() : std::string("additive");
        if (basis == "additive") m.basis.kind = models::BasisSpec::Kind::additive;
        else if (basis == "two_way") m.basis.kind = models::BasisSpec::Kind::two_way;
        else if (basis == "one_hot_additive") m.basis.kind = models::BasisSpec::Kind::one_hot_additive;
        else if (basis == "saturated") m.basis.kind = models::BasisSpec::Kind::saturated;
        else n.at("basis").fail("unknown basis '" + basis + "'");
        const auto link = n.has("link") ? n.at("link").str() : std::string("identity");
        if (link == "identity") m.basis.link = models::Link::identity;
        else if (link == "logit") m.basis.link = models::Link::logit;
        else n.at("link").fail("link must be identity or logit");
    } else {
        n.at("type").fail("unknown model class '" + type + "' (no_restriction, lipschitz, additive, glm)");
    }
    return m;
}

UtilitySpec parse_utility(const Node& n, const ActionSet& actions) {
    n.only({"gain", "cost"});
    UtilitySpec u;
    auto g = n.at("gain");
    if (g.raw().is_number()) {
        for (int a : actions.labels()) u.gain[a] = g.num();
    } else {
        u.gain = g.action_map();
    }
    if (auto c = n.get("cost")) {
        if (c->raw().is_number()) {
            for (int a : actions.labels()) u.cost[a] = c->num();
        } else {
            u.cost = c->action_map();
        }
    } else {
        for (int a : actions.labels()) u.cost[a] = 0.0;
    }
    try {
        u.validate(actions);
    } catch (const ConfigError& e) {
        n.fail(e.what());
    }
    return u;
}

void check_level(const Node& n, double level) {
    if (!(level >= 0.0 && level < 1.0)) n.fail("confidence level must lie in [0,1)");
}

}  // namespace

std::string to_string(TargetKind t) {
    switch (t) {
        case TargetKind::outcome: return "outcome";
        case TargetKind::effect: return "effect";
        case TargetKind::decisions: return "decisions";
    }
    return "?";
}

PolicyClass PolicyClassSpec::resolve(const CovariateGrid& grid) const {
    if (!std::holds_alternative<ExplicitClass>(cls)) return cls;
    ExplicitClass out;
    for (const auto& t : tables) out.policies.push_back(Policy::from_rule(t, grid));
    return out;
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
    Node root(j, "$");
    root.only({"input", "columns", "actions", "baseline", "utility", "model", "decision_model", "decision_cost",
               "target", "band", "level", "levels", "gains", "policy_class", "certificate", "seed", "output"});
    RunConfig cfg;
    cfg.input = resolve_path(base_dir, root.at("input").str());
    if (auto c = root.get("columns")) {
        c->only({"x", "a", "y", "z", "e", "d"});
        if (auto x = c->get("x"))
            for (auto& v : x->items()) cfg.columns.x.push_back(v.str());
        if (auto v = c->get("a")) cfg.columns.a = v->str();
        if (auto v = c->get("y")) cfg.columns.y = v->str();
        if (auto v = c->get("z")) cfg.columns.z = v->str();
        if (auto v = c->get("e")) cfg.columns.e = v->str();
        if (auto v = c->get("d")) cfg.columns.d = v->str();
    }
    if (auto a = root.get("actions")) {
        try {
            cfg.actions = ActionSet(a->ints());
        } catch (const ConfigError& e) {
            a->fail(e.what());
        }
    }
    cfg.baseline = parse_rule(root.at("baseline"));
    cfg.utility = parse_utility(root.at("utility"), cfg.actions);
    cfg.model = parse_model(root.at("model"));
    if (auto d = root.get("decision_model")) cfg.decision_model = parse_model(*d);
    if (auto d = root.get("decision_cost")) cfg.decision_cost = d->num();

    if (auto t = root.get("target")) {
        const auto s = t->str();
        if (s == "outcome") cfg.target = TargetKind::outcome;
        else if (s == "effect") cfg.target = TargetKind::effect;
        else if (s == "decisions") cfg.target = TargetKind::decisions;
        else t->fail("target must be outcome, effect or decisions");
    }
    if (auto b = root.get("band")) {
        const auto s = b->str();
        if (s == "whs") cfg.band = BandKind::whs;
        else if (s == "bonferroni_wilson") cfg.band = BandKind::bonferroni_wilson;
        else b->fail("band must be whs or bonferroni_wilson");
    }
    if (root.has("level") && root.has("levels")) root.fail("give either level or levels, not both");
    if (auto l = root.get("level")) {
        cfg.levels = {l->num()};
        check_level(*l, cfg.levels[0]);
    }
    if (auto l = root.get("levels")) {
        cfg.levels.clear();
        for (auto& v : l->items()) {
            cfg.levels.push_back(v.num());
            check_level(v, cfg.levels.back());
        }
        if (cfg.levels.empty()) l->fail("level grid is empty");
    }
    if (auto g = root.get("gains")) {
        cfg.gains = g->nums();
        if (cfg.gains.empty()) g->fail("gain grid is empty");
    }
    cfg.policy_class = parse_policy_class(root.at("policy_class"));

    if (auto c = root.get("certificate")) {
        c->only({"enabled", "delta", "complexity", "vc_dimension", "universal_constant", "replications"});
        if (auto v = c->get("enabled")) cfg.certificate.enabled = v->boolean();
        if (auto v = c->get("delta")) cfg.certificate.delta = v->num();
        if (auto v = c->get("complexity")) {
            const auto s = v->str();
            if (s == "rademacher") cfg.certificate.kind = diag::Complexity::Kind::rademacher;
            else if (s == "vc") cfg.certificate.kind = diag::Complexity::Kind::vc;
            else v->fail("complexity must be rademacher or vc");
        }
        if (auto v = c->get("vc_dimension")) cfg.certificate.vc_dimension = v->num();
        if (auto v = c->get("universal_constant")) cfg.certificate.universal_constant = v->num();
        if (auto v = c->get("replications")) cfg.certificate.replications = v->unsigned_integer();
        if (cfg.certificate.kind == diag::Complexity::Kind::vc && !c->has("vc_dimension"))
            c->fail("vc complexity needs vc_dimension");
    }
    if (auto s = root.get("seed")) cfg.seed = s->unsigned_integer();
    if (auto o = root.get("output")) cfg.output = resolve_path(base_dir, o->str());

    if (cfg.target == TargetKind::effect && cfg.band == BandKind::bonferroni_wilson)
        root.at("band").fail("effect targets are not binary; use the whs band");
    if (cfg.target == TargetKind::effect && cfg.model.kind == ModelSpec::Kind::glm &&
        cfg.model.basis.link == models::Link::logit)
        root.at("model").fail("the logit link needs a [0,1] target");
    if (!cfg.gains.empty() && !cfg.utility.has_constant_gain())
        root.at("gains").fail("a gain sweep needs a gain shared by all actions");
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

SimConfig parse_sim_config(const json& j, const std::filesystem::path& base_dir) {
    Node root(j, "$");
    root.only({"replications", "sample_sizes", "multipliers", "levels", "min_threshold", "max_threshold", "seed",
               "output"});
    SimConfig cfg;
    if (auto v = root.get("replications")) {
        cfg.replications = v->unsigned_integer();
        if (cfg.replications < 2) v->fail("need at least 2 replications");
    }
    if (auto v = root.get("sample_sizes")) {
        cfg.sample_sizes.clear();
        for (auto& n : v->items()) {
            cfg.sample_sizes.push_back(n.unsigned_integer());
            if (cfg.sample_sizes.back() == 0) n.fail("sample size must be positive");
        }
    }
    if (auto v = root.get("multipliers")) {
        cfg.multipliers = v->nums();
        for (double m : cfg.multipliers)
            if (!(m > 0.0)) v->fail("multipliers must be positive");
    }
    if (auto v = root.get("levels")) {
        cfg.levels.clear();
        for (auto& n : v->items()) {
            cfg.levels.push_back(n.num());
            check_level(n, cfg.levels.back());
        }
    }
    if (auto v = root.get("min_threshold")) cfg.min_threshold = v->integer();
    if (auto v = root.get("max_threshold")) cfg.max_threshold = v->integer();
    if (cfg.min_threshold > cfg.max_threshold) root.fail("min_threshold exceeds max_threshold");
    if (auto v = root.get("seed")) cfg.seed = v->unsigned_integer();
    if (auto v = root.get("output")) cfg.output = resolve_path(base_dir, v->str());
    if (cfg.sample_sizes.empty() || cfg.multipliers.empty() || cfg.levels.empty())
        root.fail("simulation factorial has an empty axis");
    return cfg;
}

}  // namespace safepl::app
