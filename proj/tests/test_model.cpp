#include "frsde/basis.hpp"
#include "frsde/fracop.hpp"
#include "frsde/model.hpp"
#include "oracles/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

using namespace frsde;

namespace {

std::map<std::string, CheckReport> by_name(const std::vector<CheckReport>& reports)
{
    std::map<std::string, CheckReport> out;
    for (const auto& r : reports)
        out[r.condition] = r;
    return out;
}

SampleGrid small_grid()
{
    SampleGrid grid;
    grid.n_u = 401;
    grid.n_pair = 81;
    return grid;
}

const ModalBasis& default_basis()
{
    static const FracOperator op = assemble_operator(OperatorMode::IntegralFEM, SpaceConfig{});
    static const ModalBasis basis = ModalBasis::from_operator(op);
    return basis;
}

} // namespace

TEST(CheckF, PowerDecayPassesWithZeroMargins)
{
    const DriftF f;
    const auto r = by_name(check_f(f, small_grid()));
    for (const char* c : {"f0", "f1", "f2", "f3", "ff1"})
        EXPECT_TRUE(r.at(c).pass) << c;
    EXPECT_NEAR(r.at("f2").margin, 0.0, 1e-9);
    EXPECT_NEAR(r.at("f3").margin, 0.0, 1e-9);
    EXPECT_EQ(r.at("f2").samples, 401u * 15u);
}

TEST(CheckF, CubicGrowthMutantFailsCoercivity)
{
    DriftF mutant;
    mutant.delta1 = -1.0;  // f(u) = +u^3
    const DriftF claimed;
    SampleGrid grid = small_grid();
    grid.u_max = 1.0;
    const auto r = by_name(check_f(mutant, grid, &claimed));
    const CheckReport& f2 = r.at("f2");
    EXPECT_FALSE(f2.pass);
    EXPECT_NEAR(f2.margin, -2.0, 1e-12);
    ASSERT_TRUE(f2.witness.populated());
    EXPECT_NEAR(std::abs(f2.witness.u1), 1.0, 1e-12);
    EXPECT_FALSE(r.at("f1").pass);
}

TEST(CheckF, NonFiniteEvaluationIsFailure)
{
    DriftF f;
    f.family = DriftFamily::UserTabulated;
    f.table = Table1D{{-1.0, 0.0, 1.0}, {1.0, 0.0, std::numeric_limits<double>::quiet_NaN()}};
    const auto r = by_name(check_f(f, small_grid()));
    EXPECT_FALSE(r.at("f2").pass);
    EXPECT_TRUE(r.at("f2").witness.populated());
    EXPECT_EQ(r.at("f2").margin, -std::numeric_limits<double>::infinity());
}

TEST(CheckF, EmptyGridThrows)
{
    SampleGrid grid;
    grid.x.clear();
    EXPECT_THROW(check_f(DriftF{}, grid), std::invalid_argument);
}

TEST(CertifyDelta3, BisectionMatchesBruteForce)
{
    SampleGrid grid;
    grid.u_max = 3.0;
    grid.n_pair = 121;
    grid.t = {0.0};
    grid.x = {0.5};
    for (double delta1 : {1.0, 2.5}) {
        DriftF f;
        f.delta1 = delta1;
        const double certified = certify_delta3(f, grid);
        EXPECT_NEAR(certified, oracle::brute_force_delta3(delta1, 4.0, grid.u_values(grid.n_pair)), 1e-9);
        EXPECT_NEAR(certified, 0.5 * delta1, 1e-9);
        f.delta3 = certified;
        EXPECT_TRUE(by_name(check_f(f, grid)).at("ff1").pass);
        f.delta3 = certified * 1.01;
        EXPECT_FALSE(by_name(check_f(f, grid)).at("ff1").pass);
    }
}

TEST(CheckH, Examples)
{
    const SampleGrid grid = small_grid();
    const CheckReport sine = check_h(DriftH{}, grid);
    EXPECT_TRUE(sine.pass);
    EXPECT_GE(sine.margin, -1e-12);

    DriftH linear;
    linear.family = PerturbationFamily::Linear;
    linear.kappa = 2.0;
    linear.phi3 = Profile::uniform(1.0);
    const CheckReport fail = check_h(linear, grid);
    EXPECT_FALSE(fail.pass);
    EXPECT_NEAR(fail.margin, -1.0, 1e-9);
    EXPECT_TRUE(fail.witness.populated());
    EXPECT_NE(fail.witness.u1, fail.witness.u2);

    DriftH zero;
    zero.kappa = 0.0;
    zero.phi3 = Profile::uniform(0.0);
    EXPECT_TRUE(check_h(zero, grid).pass);
}

TEST(CheckSigma, DefaultPowerHalfQ)
{
    const auto r = by_name(check_sigma(NoiseModel{}, DriftF{}, small_grid()));
    for (const char* c : {"q_range", "sig1", "sig2", "sig3", "sig4", "ff2"})
        EXPECT_TRUE(r.at(c).pass) << c << ": " << r.at(c).message;
    // slack is beta_i, smallest for the last mode
    EXPECT_NEAR(r.at("sig3").margin, 0.01 / 64.0, 1e-15);

    NoiseModel no_beta;
    no_beta.beta = Sequence::power(0.0, 2.0);
    EXPECT_NEAR(by_name(check_sigma(no_beta, DriftF{}, small_grid())).at("sig3").margin, 0.0, 1e-12);
}

TEST(CheckSigma, QEqualToPIsRejected)
{
    NoiseModel nm;
    nm.q = 4.0;
    const auto r = by_name(check_sigma(nm, DriftF{}, small_grid()));
    EXPECT_FALSE(r.at("q_range").pass);
    EXPECT_NE(r.at("q_range").message.find("q < p"), std::string::npos);
    EXPECT_TRUE(r.at("q_range").witness.populated());
    EXPECT_FALSE(nm.validate(4.0).empty());
}

TEST(CheckSigma, QuadraticCaseFf2WithAlphaGamma)
{
    NoiseModel nm;
    nm.q = 2.0;
    nm.alpha = nm.gammas();
    const SampleGrid grid = small_grid();
    const auto r = by_name(check_sigma(nm, DriftF{}, grid));
    EXPECT_TRUE(r.at("ff2").pass);
    // slack is 2 gamma_i (u1 - u2)^2, smallest at the closest pair of the last mode
    const double du = 2.0 * grid.u_max / (grid.n_pair - 1);
    EXPECT_NEAR(r.at("ff2").margin, 2.0 * nm.gammas().back() * du * du, 1e-12);
}

TEST(CheckSigma, ViolatedGrowthBoundFails)
{
    NoiseModel nm;
    nm.sigma2_family = Sigma2Family::UserTabulated;
    nm.psi_table = Table1D{{-1.0, 0.0, 1.0}, {-10.0, 0.0, 10.0}};
    const auto r = by_name(check_sigma(nm, DriftF{}, small_grid()));
    EXPECT_FALSE(r.at("sig3").pass);
    EXPECT_TRUE(r.at("sig3").witness.populated());
}

TEST(Sequence, TailsMatchZeta)
{
    const Sequence s = Sequence::power(1.0, 2.0);
    EXPECT_NEAR(s.tail(0), std::numbers::pi * std::numbers::pi / 6.0, 1e-12);
    EXPECT_NEAR(s.tail(1), std::numbers::pi * std::numbers::pi / 6.0 - 1.0, 1e-12);
    EXPECT_TRUE(std::isinf(Sequence::power(1.0, 1.0).tail(3)));
    EXPECT_DOUBLE_EQ(Sequence::list({1.0, 2.0, 3.0}).tail(1), 5.0);
    EXPECT_DOUBLE_EQ(Sequence::list({1.0, 2.0}).tail_squares(0), 5.0);
}

TEST(HsNorm, ZeroSigma1AndZeroState)
{
    NoiseModel nm;
    nm.sigma1 = Sequence::power(0.0, 1.0);
    const HsNorm hs = hs_norm_B(nm, default_basis(), 0.0, Eigen::VectorXd::Zero(8), 4.0);
    EXPECT_DOUBLE_EQ(hs.value, 0.0);
}

TEST(HsNorm, SineSigma1Only)
{
    NoiseModel nm;
    nm.m = 3;
    nm.sigma1 = Sequence::power(1.0, 1.0);
    nm.gamma = Sequence::list({0.0, 0.0, 0.0});
    nm.beta = Sequence::list({0.0, 0.0, 0.0});
    const HsNorm hs = hs_norm_B(nm, default_basis(), 0.0, Eigen::VectorXd::Zero(4), 4.0);
    EXPECT_NEAR(hs.value, (1.0 + 0.25 + 1.0 / 9.0) / 2.0, 1e-7);
    EXPECT_NEAR(hs.value, 0.6805556, 1e-7);
}

TEST(HsNorm, ConstantStateSingleMode)
{
    NoiseModel nm;
    nm.m = 1;
    nm.q = 2.0;
    nm.sigma1 = Sequence::list({0.0});
    nm.beta = Sequence::list({0.0});
    nm.gamma = Sequence::list({1.0});
    const ModalBasis flat = ModalBasis::flat(1.0);
    for (double c : {0.3, 1.7}) {
        Eigen::VectorXd z(1);
        z[0] = c;  // v = c h_1 = c on (0,1)
        EXPECT_NEAR(hs_norm_B(nm, flat, 0.0, z, 4.0).value, c * c, 1e-12);
    }
}

TEST(HsNorm, BoundHoldsOnRandomStates)
{
    const NoiseModel nm;
    const ModalBasis& basis = default_basis();
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> logscale(std::log(1e-2), std::log(10.0));
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd z(32);
        const double scale = std::exp(logscale(rng));
        for (int j = 0; j < 32; ++j)
            z[j] = scale * normal(rng) / (j + 1.0);
        const HsNorm hs = hs_norm_B(nm, basis, 0.0, z, 4.0);
        EXPECT_LE(hs.value, hs.bound_rhs + 1e-9);
    }
}

TEST(HsNorm, DimensionMismatchThrows)
{
    const NoiseModel nm;
    const ModalBasis& basis = default_basis();
    EXPECT_THROW(hs_norm_B(nm, basis, 0.0, Eigen::VectorXd::Zero(basis.available() + 1), 4.0),
                 std::invalid_argument);
}

TEST(Profile, DefaultConstants)
{
    const DriftF f;
    const DriftH h;
    const NoiseModel nm;
    const HypothesisProfile prof = default_profile(f, h, nm, default_basis());
    EXPECT_TRUE(prof.validate().empty());
    EXPECT_DOUBLE_EQ(prof.alpha2, 1.0);
    EXPECT_DOUBLE_EQ(prof.q_tilde, 4.0);
    EXPECT_DOUBLE_EQ(prof.q_under, 2.0);

    // g(t) from an independent evaluation of each ingredient
    double sum_a2 = 0.0, sum_beta = 0.0, sum_gamma = 0.0;
    for (int i = 1; i <= 8; ++i) {
        sum_a2 += std::pow(0.5 / i, 2) * 0.5;
        sum_beta += 0.01 / (i * i);
        sum_gamma += 0.25 / (i * i);
    }
    const double growth = 2.0 * sum_gamma;
    // sup_X growth X^3 - X^4
    double young = 0.0;
    for (int k = 0; k <= 200000; ++k) {
        const double x = 3.0 * k / 200000.0;
        young = std::max(young, growth * x * x * x - x * x * x * x);
    }
    const double expected = 2.0 * 0.5 + 1.0 + 2.0 * sum_a2 + 2.0 * sum_beta + young;
    EXPECT_NEAR(prof.g(0.3), expected, 1e-8);
    EXPECT_NEAR(prof.alpha4, growth, 1e-14);
}

TEST(CheckAbstract, DefaultModelPasses)
{
    const DriftF f;
    const DriftH h;
    const NoiseModel nm;
    const HypothesisProfile prof = default_profile(f, h, nm, default_basis());
    StateSampling sampling;
    const auto reports = check_abstract(prof, f, h, nm, default_basis(), 32, sampling);
    ASSERT_EQ(reports.size(), 6u);
    for (const auto& r : reports) {
        EXPECT_TRUE(r.pass) << r.condition << " margin " << r.margin;
        EXPECT_GE(r.margin, -1e-9);
    }
}

TEST(CheckAbstract, NegativeDelta1FailsCoercivity)
{
    const DriftF f;
    DriftF mutant;
    mutant.delta1 = -1.0;
    const DriftH h;
    const NoiseModel nm;
    const HypothesisProfile prof = default_profile(f, h, nm, default_basis());
    const auto r = by_name(check_abstract(prof, mutant, h, nm, default_basis(), 32, StateSampling{}));
    EXPECT_FALSE(r.at("H3").pass);
    EXPECT_TRUE(r.at("H3").witness.populated());
    EXPECT_GT(r.at("H3").witness.u1, 0.0);
}

TEST(CheckAbstract, ZeroStateReducesToNoiseAtOrigin)
{
    const DriftF f;
    const DriftH h;
    const NoiseModel nm;
    const HypothesisProfile prof = default_profile(f, h, nm, default_basis());
    StateSampling zero_only;
    zero_only.scale_min = zero_only.scale_max = 1e-300;
    zero_only.n_states = 1;
    const auto r = by_name(check_abstract(prof, f, h, nm, default_basis(), 8, zero_only));
    EXPECT_TRUE(r.at("H3").pass);
    const HsNorm at_origin = hs_norm_B(nm, default_basis(), 0.0, Eigen::VectorXd::Zero(8), 4.0);
    EXPECT_LE(at_origin.value, prof.g(0.0));
    EXPECT_NEAR(r.at("H3").margin, std::min(prof.g(0.0) - at_origin.value, r.at("H3").margin), 1e-12);
}

TEST(CheckAbstract, VerdictStableUnderRefinement)
{
    const DriftF f;
    const DriftH h;
    const NoiseModel nm;
    const HypothesisProfile prof = default_profile(f, h, nm, default_basis());
    StateSampling coarse;
    coarse.n_states = 1000;
    StateSampling fine = coarse;
    fine.n_states = 10000;
    fine.seed = 99;
    const auto a = check_abstract(prof, f, h, nm, default_basis(), 16, coarse);
    const auto b = check_abstract(prof, f, h, nm, default_basis(), 16, fine);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(a[i].pass, b[i].pass) << a[i].condition;
}

TEST(NoiseModel, ValidationMessages)
{
    NoiseModel nm;
    EXPECT_TRUE(nm.validate(4.0).empty());
    nm.sigma1 = Sequence::power(1.0, 0.4);
    nm.beta = Sequence::power(1.0, 1.0);
    nm.q = 1.5;
    EXPECT_EQ(nm.validate(4.0).size(), 3u);
}

TEST(DriftF, ValidationMessages)
{
    DriftF f;
    EXPECT_TRUE(f.validate().empty());
    f.p = 2.0;
    f.delta1 = 0.0;
    f.phi1 = Profile::uniform(-1.0);
    EXPECT_EQ(f.validate().size(), 3u);
}

TEST(Profile, TabulatedInterpolationAndIntegral)
{
    Profile prof{0.0, {0.0, 1.0}, {0.0, 2.0}};
    EXPECT_DOUBLE_EQ(prof(0.0, 0.25), 0.5);
    EXPECT_DOUBLE_EQ(prof.sup(), 2.0);
    EXPECT_NEAR(prof.integral_pow(0.0, 1.0, 2.0), 4.0 / 3.0, 1e-12);
}
