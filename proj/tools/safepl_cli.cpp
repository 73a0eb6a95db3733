// safepl: batch front-end for safe policy learning.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// failure, 1 anything else.

#include "safepl/app.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace safepl;
using app::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

app::RunConfig load_config(const std::string& path, const std::string& input, const std::string& output) {
    auto cfg = app::load_run_config(path);
    if (!input.empty()) cfg.input = input;
    if (!output.empty()) cfg.output = output;
    return cfg;
}

Dataset load_data(const app::RunConfig& cfg) {
    return app::ingest(cfg.input, cfg.columns, cfg.actions, cfg.baseline);
}

int ingest_check(const std::string& config, const std::string& input) {
    const auto cfg = load_config(config, input, {});
    const auto data = load_data(cfg);
    std::size_t treated = 0;
    for (std::size_t j = 0; j < data.grid().size(); ++j) treated += data.baseline().at(j) != data.actions().label(0);
    json j = {{"input", cfg.input.string()},
              {"rows", data.size()},
              {"covariates", data.grid().dimension()},
              {"grid_points", data.grid().size()},
              {"baseline", describe_rule(data.baseline_rule())},
              {"grid_points_off_first_action", treated},
              {"has_assignment", data.has_assignment()},
              {"has_decision", data.has_decision()}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run(const std::string& config, const std::string& output) {
    const auto cfg = load_config(config, {}, output);
    const auto data = load_data(cfg);
    const auto res = app::run_pipeline(cfg, data, app::thread_count());
    app::write_run_outputs(cfg, res, cfg.output);
    std::size_t unsafe = 0;
    for (const auto& c : res.cells) unsafe += !c.safety_check;
    std::cout << "wrote " << res.cells.size() << " cells to " << cfg.output.string() << '\n';
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    if (unsafe) {
        std::cerr << "error: " << unsafe << " cells failed the safety check\n";
        return 4;
    }
    return 0;
}

int widths(const std::string& config, const std::string& output) {
    const auto cfg = load_config(config, {}, output);
    const auto res = app::compute_widths(cfg, load_data(cfg));
    app::write_width_outputs(res, cfg.output);
    json sizes = json::array();
    for (const auto& b : res.bounds)
        sizes.push_back({{"level", b.level}, {"quantity", b.quantity}, {"size", b.size.total}});
    std::cout << sizes.dump(2) << '\n';
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
}

int certify(const std::string& config) {
    auto cfg = load_config(config, {}, {});
    cfg.certificate.enabled = true;
    const auto res = app::run_pipeline(cfg, load_data(cfg), app::thread_count());
    json out = json::array();
    for (const auto& c : res.cells) {
        json cell = {{"gain", c.gain}, {"level", c.level}};
        if (c.safety) cell["safety"] = app::certificate_json(*c.safety);
        if (c.optimality) cell["optimality"] = app::certificate_json(*c.optimality);
        out.push_back(std::move(cell));
    }
    std::cout << out.dump(2) << '\n';
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
}

int simulate(const std::string& config, const std::string& output) {
    const std::filesystem::path path(config);
    auto cfg = app::parse_sim_config(load_json(config), path.parent_path());
    if (!output.empty()) cfg.output = output;
    const auto cells = app::run_simulation(cfg, app::thread_count());
    app::write_simulation(cells, cfg.output);
    std::cout << "wrote " << cells.size() << " cells to " << (cfg.output / "simulation.csv").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Safe policy learning under a deterministic baseline"};
    cli.require_subcommand(1);
    std::string config, input, output;

    auto* ic = cli.add_subcommand("ingest-check", "Validate a CSV against the configured baseline");
    ic->add_option("-c,--config", config, "Run configuration (JSON)")->required();
    ic->add_option("-i,--input", input, "Override the configured input CSV");

    auto* rc = cli.add_subcommand("run", "Learn safe policies over the configured sweep");
    rc->add_option("-c,--config", config, "Run configuration (JSON)")->required();
    rc->add_option("-o,--output", output, "Override the output directory");

    auto* sc = cli.add_subcommand("simulate", "Run the random Fourier feature simulation study");
    sc->add_option("-c,--config", config, "Simulation configuration (JSON)")->required();
    sc->add_option("-o,--output", output, "Override the output directory");

    auto* wc = cli.add_subcommand("widths", "Write bounds and model class sizes per level");
    wc->add_option("-c,--config", config, "Run configuration (JSON)")->required();
    wc->add_option("-o,--output", output, "Override the output directory");

    auto* cc = cli.add_subcommand("certify", "Print regret certificates per sweep cell");
    cc->add_option("-c,--config", config, "Run configuration (JSON)")->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_ = cli.exit(e);
        return rc_ == 0 ? 0 : 2;
    }

    try {
        if (*ic) return ingest_check(config, input);
        if (*rc) return run(config, output);
        if (*sc) return simulate(config, output);
        if (*wc) return widths(config, output);
        if (*cc) return certify(config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
