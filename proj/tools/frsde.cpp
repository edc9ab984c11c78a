#include "frsde/runner.hpp"

#include <CLI11.hpp>

#include <array>
#include <iostream>

int main(int argc, char** argv)
{
    using namespace frsde;

    CLI::App app{"Galerkin simulator and hypothesis checks for fractional stochastic reaction-diffusion equations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version_info()["frsde"]));

    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 0;
    bool dump_operator = false;
    bool quiet = false;

    const std::array kinds = {ExperimentKind::Check,   ExperimentKind::Eig,    ExperimentKind::Simulate,
                              ExperimentKind::Moments, ExperimentKind::Aldous, ExperimentKind::Converge};
    const std::array help = {"sample the model hypotheses and report margins",
                             "assemble the operator and write its eigenvalues",
                             "simulate one Galerkin path",
                             "Monte Carlo moments across Galerkin levels",
                             "increment modulus of a tested path functional",
                             "coupled-noise differences between consecutive levels"};
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        CLI::App* sub = app.add_subcommand(to_string(kinds[i]), help[i]);
        sub->add_option("--config", config, "experiment config (TOML)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "master seed (overrides master_seed)");
        sub->add_option("--threads", threads, "worker threads (default: FRSDE_THREADS, then all cores)")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("--quiet", quiet, "suppress progress messages");
        if (kinds[i] == ExperimentKind::Eig)
            sub->add_flag("--dump-operator", dump_operator, "also write stiffness and mass triplets");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    std::size_t chosen = 0;
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed())
            chosen = i;
    const CLI::App* sub = subs[chosen];

    RunOptions opts;
    if (sub->count("--out") > 0)
        opts.out_dir = out;
    if (sub->count("--seed") > 0)
        opts.seed = seed;
    opts.threads = threads;
    opts.dump_operator = dump_operator;
    opts.log = quiet ? nullptr : &std::cerr;
    return run(kinds[chosen], config, opts, std::cerr);
}
