#include "frsde/runner.hpp"
#include "frsde/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace frsde;
namespace fs = std::filesystem;

namespace {

class Scratch {
public:
    Scratch()
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root_ = fs::temp_directory_path() / (std::string("frsde_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    ~Scratch() { fs::remove_all(root_); }

    std::string path(const std::string& name) const { return (root_ / name).string(); }

    std::string write(const std::string& name, const std::string& text) const
    {
        std::ofstream(path(name)) << text;
        return path(name);
    }

private:
    fs::path root_;
};

std::string read(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

nlohmann::json without_timing(nlohmann::json report)
{
    report.erase("timing");
    return report;
}

const char* kSmall = R"(
[space]
nodes = 24

[noise]
m = 4

[scheme]
dt = 0.01

[moments]
levels = [4, 8, 12]
paths = 8

[aldous]
n_modes = 8
paths = 8

[converge]
levels = [4, 8, 12]
paths = 8
)";

struct CliResult {
    int status = -1;
    std::string output;
};

CliResult run_cli(const std::string& args)
{
    const std::string cmd = std::string(FRSDE_CLI) + " " + args + " 2>&1";
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    char buf[512];
    while (fgets(buf, sizeof buf, pipe))
        r.output += buf;
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

} // namespace

TEST(Runner, CheckOnDefaultModelPasses)
{
    Scratch dir;
    RunOptions opts;
    opts.out_dir = dir.path("out");
    const RunResult res = run_experiment(parse_config("", ExperimentKind::Check), opts);
    EXPECT_TRUE(res.report["result"]["all_pass"].get<bool>());
    for (const auto& c : res.report["result"]["checks"]) {
        EXPECT_TRUE(c["pass"].get<bool>()) << c["condition"];
        for (const char* field : {"condition", "pass", "margin", "witness", "samples"})
            EXPECT_TRUE(c.contains(field));
    }
    EXPECT_EQ(res.report["config_hash"].get<std::string>().size(), 64u);
    EXPECT_TRUE(res.report["versions"].contains("frsde"));
    EXPECT_TRUE(res.report["timing"].contains("wall_time_s"));
    EXPECT_TRUE(fs::exists(dir.path("out/checks.csv")));
}

TEST(Runner, SpectralEigFirstEntryIsPi)
{
    Scratch dir;
    RunOptions opts;
    opts.out_dir = dir.path("eig");
    opts.dump_operator = true;
    run_experiment(parse_config("[space]\noperator = \"spectral\"\ns = 0.5\n", ExperimentKind::Eig), opts);
    std::ifstream csv(dir.path("eig/eigenvalues.csv"));
    std::string header, first;
    std::getline(csv, header);
    std::getline(csv, first);
    EXPECT_EQ(header, "k,lambda");
    EXPECT_NEAR(std::stod(first.substr(first.find(',') + 1)), M_PI, 1e-12);
    EXPECT_TRUE(fs::exists(dir.path("eig/operator.csv")));
}

TEST(Runner, ManifestMatchesFiles)
{
    Scratch dir;
    for (const char* kind : {"check", "eig", "simulate", "moments", "aldous", "converge"}) {
        RunOptions opts;
        opts.out_dir = dir.path(kind);
        opts.threads = 1;
        const RunResult res = run_experiment(parse_config(kSmall, experiment_kind_from_string(kind)), opts);
        EXPECT_EQ(res.files.back(), "MANIFEST.txt");
        std::istringstream manifest(read(dir.path(std::string(kind) + "/MANIFEST.txt")));
        std::string sum, name;
        std::size_t listed = 0;
        while (manifest >> sum >> name) {
            EXPECT_EQ(sum, sha256_file(dir.path(std::string(kind) + "/" + name))) << kind << " " << name;
            ++listed;
        }
        EXPECT_EQ(listed + 1, res.files.size()) << kind;
        EXPECT_GE(listed, 2u) << kind;
    }
}

TEST(Runner, ReportsAreDeterministicAcrossRunsAndThreads)
{
    Scratch dir;
    for (const char* kind : {"moments", "aldous", "converge"}) {
        const ExperimentConfig cfg = parse_config(kSmall, experiment_kind_from_string(kind));
        RunOptions a;
        a.out_dir = dir.path(std::string(kind) + "_a");
        a.threads = 1;
        RunOptions b = a;
        b.out_dir = dir.path(std::string(kind) + "_b");
        b.threads = 3;
        const RunResult ra = run_experiment(cfg, a);
        const RunResult rb = run_experiment(cfg, b);
        EXPECT_EQ(without_timing(ra.report), without_timing(rb.report)) << kind;
    }
}

TEST(Runner, SeedOverrideEntersHashAndResults)
{
    Scratch dir;
    const ExperimentConfig cfg = parse_config(kSmall, ExperimentKind::Simulate);
    RunOptions a;
    a.out_dir = dir.path("a");
    RunOptions b = a;
    b.out_dir = dir.path("b");
    b.seed = 99;
    const RunResult ra = run_experiment(cfg, a);
    const RunResult rb = run_experiment(cfg, b);
    EXPECT_NE(ra.report["config_hash"], rb.report["config_hash"]);
    EXPECT_EQ(rb.report["config"]["master_seed"], 99);
    EXPECT_NE(ra.report["result"]["final_state"], rb.report["result"]["final_state"]);
}

TEST(Runner, FailureRemovesPartialOutputs)
{
    Scratch dir;
    // finite at load, overflows in the cubic drift at the first evaluation
    const ExperimentConfig cfg = parse_config("[initial]\ncoefficients = [1e200]\n", ExperimentKind::Simulate);
    RunOptions opts;
    opts.out_dir = dir.path("fresh");
    EXPECT_THROW(
        {
            try {
                run_experiment(cfg, opts);
            } catch (const PathError& e) {
                EXPECT_EQ(e.index(), 0u);
                throw;
            }
        },
        PathError);
    EXPECT_FALSE(fs::exists(dir.path("fresh")));

    fs::create_directories(dir.path("kept"));
    dir.write("kept/notes.txt", "unrelated");
    opts.out_dir = dir.path("kept");
    EXPECT_THROW(run_experiment(cfg, opts), PathError);
    EXPECT_TRUE(fs::exists(dir.path("kept/notes.txt")));
    EXPECT_FALSE(fs::exists(dir.path("kept/report.json")));
}

TEST(Runner, RunReportsConfigErrorsWithExitCode)
{
    Scratch dir;
    const std::string path = dir.write("bad.toml", "[noise]\nq = 4.0\n[space]\nnodez = 3\n");
    std::ostringstream err;
    EXPECT_EQ(run(ExperimentKind::Check, path, {}, err), kExitConfig);
    EXPECT_NE(err.str().find("q must satisfy 2 ≤ q < p"), std::string::npos);
    EXPECT_NE(err.str().find("unknown key 'space.nodez'"), std::string::npos);
    std::ostringstream missing;
    EXPECT_EQ(run(ExperimentKind::Check, dir.path("absent.toml"), {}, missing), kExitConfig);
}

TEST(Cli, MalformedConfigExitsNonzero)
{
    Scratch dir;
    const std::string path = dir.write("bad.toml", "[drift]\np = 4.0\n[noise]\nq = 4.5\n");
    const CliResult r = run_cli("check --config " + path + " --out " + dir.path("out"));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("q must satisfy 2 ≤ q < p"), std::string::npos) << r.output;
    EXPECT_FALSE(fs::exists(dir.path("out")));
}

TEST(Cli, EigWritesArtifacts)
{
    Scratch dir;
    const std::string path = dir.write("eig.toml", "[space]\noperator = \"spectral\"\nnodes = 16\n");
    const CliResult r = run_cli("eig --config " + path + " --out " + dir.path("out") + " --quiet --dump-operator");
    EXPECT_EQ(r.status, 0) << r.output;
    for (const char* f : {"eigenvalues.csv", "operator.csv", "report.json", "MANIFEST.txt"})
        EXPECT_TRUE(fs::exists(dir.path(std::string("out/") + f))) << f;
}

TEST(Cli, SeedAndThreadsFlags)
{
    Scratch dir;
    const std::string path = dir.write("sim.toml", kSmall);
    const CliResult a = run_cli("simulate --config " + path + " --out " + dir.path("a") + " --seed 5 --threads 2 --quiet");
    ASSERT_EQ(a.status, 0) << a.output;
    const auto report = nlohmann::json::parse(read(dir.path("a/report.json")));
    EXPECT_EQ(report["config"]["master_seed"], 5);
    EXPECT_EQ(report["kind"], "simulate");
}

TEST(Cli, UsageErrors)
{
    EXPECT_NE(run_cli("").status, 0);
    EXPECT_NE(run_cli("plot --config x.toml").status, 0);
    EXPECT_NE(run_cli("check").status, 0);
    EXPECT_EQ(run_cli("--help").status, 0);
}
