// safepl-fixture: writes synthetic datasets in the canonical CSV schema.

#include "safepl/app.hpp"
#include "safepl/simlab.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App cli{"Write synthetic datasets as CSV"};
    cli.require_subcommand(1);
    std::uint64_t seed = 1;
    std::size_t n = 1000;
    std::string out = "-";
    std::string view = "points";

    auto* psa = cli.add_subcommand("psa", "PSA-like pre-trial data");
    psa->add_option("--view", view, "points | factors | dmf")->check(CLI::IsMember({"points", "factors", "dmf"}));
    auto* rff = cli.add_subcommand("rff", "Random Fourier feature design");
    for (auto* sc : {psa, rff}) {
        sc->add_option("--seed", seed, "Seed");
        sc->add_option("-n,--rows", n, "Number of rows")->check(CLI::PositiveNumber);
        sc->add_option("-o,--output", out, "Output file, - for stdout");
    }
    CLI11_PARSE(cli, argc, argv);

    try {
        std::string csv;
        if (*psa) {
            const auto s = safepl::sim::gen_psa_like(seed, n);
            csv = safepl::app::to_csv(view == "points" ? s.nvca_points() : view == "factors" ? s.nvca_factors() : s.dmf());
        } else {
            csv = safepl::app::to_csv(safepl::sim::gen_rff_instance(seed, n).data);
        }
        if (out == "-") {
            std::cout << csv;
        } else {
            std::ofstream f(out, std::ios::binary);
            if (!f) throw safepl::DataError("cannot write " + out);
            f << csv;
        }
    } catch (const safepl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const safepl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
