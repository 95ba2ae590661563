#include "bt/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace bt;

namespace {

BanditInstance gaussians(std::vector<double> mu, std::vector<double> sd) {
    std::vector<ArmDistribution> arms;
    for (std::size_t i = 0; i < mu.size(); ++i) arms.push_back(ArmDistribution::gaussian(mu[i], sd[i]));
    return BanditInstance::with_means(std::move(arms));
}

}  // namespace

TEST(KlInf, UncappedClosedForm) {
    EXPECT_NEAR(kl_inf_gaussian(1.0, 1.0, 1e6), 0.5 * std::log(2.0), 1e-15);
    EXPECT_EQ(kl_inf_gaussian(0.0, 2.0, 1e6), 0.0);
}

TEST(KlInf, MonotoneInGapAndCapBinds) {
    double prev = 0.0;
    for (double d = 0.1; d < 3.0; d += 0.1) {
        const double v = kl_inf_gaussian(d, 0.5, 1e6);
        EXPECT_GT(v, prev);
        prev = v;
    }
    // Below the cap the minimizing variance is B^2, which costs more than the free optimum.
    EXPECT_GT(kl_inf_gaussian(1.0, 1.0, 1.0), kl_inf_gaussian(1.0, 1.0, 10.0));
    EXPECT_THROW(kl_inf_gaussian(1.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(kl_inf_gaussian(-1.0, 1.0, 1.0), DomainError);
}

TEST(LowerBound, TwoArmSingleTerm) {
    const auto r = lower_bound_constant(gaussians({1, 0}, {1, 1}), 1e6);
    EXPECT_NEAR(r.total, 2.0 / std::log(2.0), 1e-12);
    EXPECT_NEAR(r.total, 2.88539, 5e-6);
    EXPECT_TRUE(r.cap_ok);
}

TEST(LowerBound, ThreeArmTermsRecomputed) {
    const auto r = lower_bound_constant(gaussians({1, 0.5, 0}, {1, 1, 1}), 1e6);
    ASSERT_EQ(r.terms.size(), 3u);
    EXPECT_EQ(r.terms[0], 0.0);
    // 2 * 0.5 / ln(1.25) = 4.4814201177...
    EXPECT_NEAR(r.terms[1], 4.48142, 5e-6);
    EXPECT_NEAR(r.terms[2], 2.88539, 5e-6);
    EXPECT_NEAR(r.total, r.terms[1] + r.terms[2], 1e-12);
    EXPECT_FALSE(lower_bound_constant(gaussians({1, 0.5, 0}, {1, 1, 1}), 1.2).cap_ok);
}

TEST(LowerBound, RejectsNonGaussianArms) {
    const auto inst = BanditInstance::with_means({ArmDistribution::bernoulli(0.5), ArmDistribution::gaussian(0, 1)});
    EXPECT_THROW(lower_bound_constant(inst, 10.0), UnsupportedModel);
    const auto clipped = BanditInstance::with_means({ArmDistribution::gaussian(0, 1).clipped(2.0)});
    EXPECT_THROW(lower_bound_constant(clipped, 10.0), UnsupportedModel);
}

TEST(RegretCurve, DeterministicAndWellFormed) {
    const TaskDistribution dist{BernoulliFamily{0.1, 0.5}};
    const auto g = linear_grid(0.0, 1.0, 11);
    const auto a = regret_curve(dist, g, 8, 50, 3);
    const auto b = regret_curve(dist, g, 8, 50, 3, 2);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.stderr_, b.stderr_);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_GE(a.mean[i], 0.0);
        EXPECT_LE(a.mean[i], 1.0);
        EXPECT_GE(a.stderr_[i], 0.0);
    }
    std::ostringstream out;
    a.write_csv(out);
    EXPECT_EQ(out.str().substr(0, 22), "param,mean_loss,stderr");
    EXPECT_THROW(regret_curve(dist, g, 1, 50, 3), ConfigError);
}

TEST(RegretCurve, PointMassSingleArmIsFlatZero) {
    const auto dist = TaskDistribution::from_config("custom", {{"arms", "bernoulli(0.4)"}});
    const auto c = regret_curve(dist, linear_grid(0.0, 2.0, 5), 3, 20, 1);
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        EXPECT_EQ(c.mean[i], 0.0);
        EXPECT_EQ(c.stderr_[i], 0.0);
    }
}

TEST(Generalization, ShapesAndDeterminism) {
    const TaskDistribution dist{BernoulliFamily{0.1, 0.6}};
    GeneralizationConfig cfg;
    cfg.n_values = {2, 5, 10};
    cfg.trials = 3;
    cfg.T_o = 30;
    cfg.n_test = 4;
    cfg.T = 30;
    const auto a = generalization_curve(dist, cfg, 8);
    const auto b = generalization_curve(dist, cfg, 8);
    EXPECT_EQ(a.mean, b.mean);
    ASSERT_EQ(a.per_trial.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.per_trial[i].size(), 3u);
        for (double al : a.alphas[i]) {
            EXPECT_GE(al, 0.0);
            EXPECT_LE(al, 1.0);
        }
    }
    cfg.n_values = {5, 2};
    EXPECT_THROW(generalization_curve(dist, cfg, 8), ConfigError);
}

TEST(Transfer, SinglePointGridIsTheLearnedValue) {
    const TaskDistribution dist{BernoulliFamily{0.1, 0.7}};
    TransferConfig cfg;
    cfg.n_train = 5;
    cfg.search.grid = {2.0};
    cfg.corral_grid = {0.5, 2.0};
    cfg.T = 200;
    cfg.n_test = 3;
    cfg.stride = 50;
    cfg.corral.warn = false;
    const auto tr = transfer_experiment(dist, cfg, 4);
    EXPECT_EQ(tr.tuned.param, 2.0);
    EXPECT_EQ(tr.final_tuned.size(), 3u);
    EXPECT_EQ(tr.rows.size(), 12u);
    const auto again = transfer_experiment(dist, cfg, 4);
    EXPECT_EQ(tr.final_corral, again.final_corral);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_GE(tr.final_tuned[i], 0.0);
}
