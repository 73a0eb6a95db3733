#include "safepl/app.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace safepl::app {

std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

namespace {

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    return out;
}

std::string x_header(std::size_t p) {
    std::string h;
    for (std::size_t k = 1; k <= p; ++k) h += "x" + std::to_string(k) + ",";
    return h;
}

std::string x_fields(const Covariate& x) {
    std::string s;
    for (int v : x) s += std::to_string(v) + ",";
    return s;
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
}

json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json certificate_json(const diag::RegretCertificate& c) {
    json j = {{"kind", c.kind},
              {"bound", c.bound},
              {"width_term", c.width_term},
              {"complexity_term", c.complexity_term},
              {"sampling_term", c.sampling_term},
              {"probability", c.probability},
              {"n", c.n},
              {"alpha", c.alpha},
              {"delta", c.delta},
              {"C", c.C},
              {"complexity",
               {{"kind", c.complexity.kind == diag::Complexity::Kind::vc ? "vc" : "rademacher"},
                {"value", c.complexity.value},
                {"universal_constant", c.complexity.universal_constant}}}};
    if (c.policy_weighted_bound) j["policy_weighted_bound"] = *c.policy_weighted_bound;
    return j;
}

json report_json(const RunConfig& cfg, const RunResult& res) {
    const auto& grid = res.data.grid();
    json j;
    j["target"] = to_string(cfg.target);
    j["band"] = cfg.band == BandKind::whs ? "whs" : "bonferroni_wilson";
    j["n"] = res.data.size();
    j["grid_points"] = grid.size();
    j["baseline"] = describe_rule(res.data.baseline_rule());
    j["warnings"] = res.warnings;
    if (res.rademacher)
        j["rademacher"] = {{"value", res.rademacher->value},
                           {"std_error", res.rademacher->std_error},
                           {"replications", res.rademacher->replications}};
    json sizes = json::array();
    for (const auto& b : res.bounds) {
        json per = json::object();
        for (std::size_t k = 0; k < b.bounds.actions.size(); ++k)
            per[std::to_string(b.bounds.actions.label(k))] = b.size.per_action[k];
        sizes.push_back({{"level", b.level}, {"quantity", b.quantity}, {"size", b.size.total}, {"per_action", per}});
    }
    j["sizes"] = sizes;
    json cells = json::array();
    for (const auto& c : res.cells) {
        const auto& r = c.report;
        json cell = {{"gain", c.gain},
                     {"level", c.level},
                     {"policy_class", r.policy_class},
                     {"params", r.params},
                     {"description", r.description},
                     {"worst_case_value", double_or_null(r.worst_case_value)},
                     {"baseline_value", double_or_null(r.baseline_value)},
                     {"improvement", double_or_null(r.improvement)},
                     {"deviations", r.deviations},
                     {"baseline_in_class", r.baseline_in_class},
                     {"safety_check", c.safety_check},
                     {"policy", std::vector<int>(r.policy.labels().begin(), r.policy.labels().end())},
                     {"stats",
                      {{"policies_evaluated", r.stats.policies_evaluated},
                       {"nodes_expanded", r.stats.nodes_expanded}}},
                     {"tie_break", r.tie_break},
                     {"warnings", r.warnings}};
        if (c.safety) cell["safety_certificate"] = certificate_json(*c.safety);
        if (c.optimality) cell["optimality_certificate"] = certificate_json(*c.optimality);
        cells.push_back(std::move(cell));
    }
    j["cells"] = cells;
    return j;
}

void write_width_outputs(const RunResult& res, const std::filesystem::path& dir) {
    const auto& grid = res.data.grid();
    const auto& base = res.data.baseline();
    {
        auto out = open_out(dir, "bounds.csv");
        out << "level,quantity,action," << x_header(grid.dimension()) << "agreement,lower,upper\n";
        for (const auto& b : res.bounds)
            for (std::size_t k = 0; k < b.bounds.actions.size(); ++k)
                for (std::size_t j = 0; j < grid.size(); ++j) {
                    const int a = b.bounds.actions.label(k);
                    out << format_double(b.level) << ',' << b.quantity << ',' << a << ',' << x_fields(grid.point(j))
                        << (base.at(j) == a ? 1 : 0) << ',' << format_double(b.bounds.lo_at(k, j)) << ','
                        << format_double(b.bounds.hi_at(k, j)) << '\n';
                }
    }
    {
        auto out = open_out(dir, "size_vs_level.csv");
        out << "level,quantity,size";
        if (!res.bounds.empty())
            for (int a : res.bounds.front().bounds.actions.labels()) out << ",size_a" << a;
        out << '\n';
        for (const auto& b : res.bounds) {
            out << format_double(b.level) << ',' << b.quantity << ',' << format_double(b.size.total);
            for (double v : b.size.per_action) out << ',' << format_double(v);
            out << '\n';
        }
    }
}

void write_run_outputs(const RunConfig& cfg, const RunResult& res, const std::filesystem::path& dir) {
    write_width_outputs(res, dir);
    const auto& grid = res.data.grid();
    const auto& base = res.data.baseline();
    {
        auto out = open_out(dir, "report.json");
        out << report_json(cfg, res).dump(2) << '\n';
    }
    {
        auto out = open_out(dir, "policy_diff.csv");
        out << "gain,level," << x_header(grid.dimension()) << "baseline,learned,changed\n";
        for (const auto& c : res.cells)
            for (std::size_t j = 0; j < grid.size(); ++j) {
                const int l = c.report.policy.at(j);
                out << format_double(c.gain) << ',' << format_double(c.level) << ',' << x_fields(grid.point(j))
                    << base.at(j) << ',' << l << ',' << (l != base.at(j) ? 1 : 0) << '\n';
            }
    }
    {
        auto out = open_out(dir, "threshold_vs_cost.csv");
        out << "gain,level,policy_class,threshold,params,worst_case_value,baseline_value,improvement,deviations,"
               "safety_check\n";
        for (const auto& c : res.cells) {
            const auto& r = c.report;
            const bool thr = r.policy_class == "threshold" && !r.params.empty();
            out << format_double(c.gain) << ',' << format_double(c.level) << ',' << r.policy_class << ','
                << (thr ? std::to_string(r.params.front()) : std::string()) << ',' << join_ints(r.params) << ','
                << format_double(r.worst_case_value) << ',' << format_double(r.baseline_value) << ','
                << format_double(r.improvement) << ',' << r.deviations << ',' << (c.safety_check ? 1 : 0) << '\n';
        }
    }
}

std::string to_csv(const Dataset& data) {
    std::string s = x_header(data.grid().dimension()) + "a,y";
    if (data.has_assignment()) s += ",z,e";
    if (data.has_decision()) s += ",d";
    s += '\n';
    for (const auto& r : data.rows()) {
        s += x_fields(r.x) + std::to_string(r.action) + ',' + std::to_string(r.outcome);
        if (r.assignment) s += ',' + std::to_string(*r.assignment) + ',' + format_double(*r.propensity);
        if (r.decision) s += ',' + std::to_string(*r.decision);
        s += '\n';
    }
    return s;
}

void write_simulation(const std::vector<SimCell>& cells, const std::filesystem::path& dir) {
    auto out = open_out(dir, "simulation.csv");
    out << "n,multiplier,level,used,excluded,mean_improvement,se_improvement,mean_regret,se_regret\n";
    for (const auto& c : cells)
        out << c.n << ',' << format_double(c.multiplier) << ',' << format_double(c.level) << ',' << c.used << ','
            << c.excluded << ',' << format_double(c.mean_improvement) << ',' << format_double(c.se_improvement)
            << ',' << format_double(c.mean_regret) << ',' << format_double(c.se_regret) << '\n';
}

}  // namespace safepl::app
