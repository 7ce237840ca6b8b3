#include "cbo/dynamics.hpp"
#include "cbo/theory.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <random>

using namespace cbo;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
    Matrix m(static_cast<Index>(values.size()), static_cast<Index>(values.begin()->size()));
    Index i = 0;
    for (const auto& r : values) {
        Index k = 0;
        for (double v : r) m(i, k++) = v;
        ++i;
    }
    return m;
}

Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

// Objective wrapper counting evaluations.
struct Counted {
    std::shared_ptr<std::atomic<long>> calls = std::make_shared<std::atomic<long>>(0);
    Objective objective(Index d) const {
        auto c = calls;
        return Objective(d, [c](VectorCRef x, std::size_t) {
            ++*c;
            return x.squaredNorm();
        });
    }
};

}  // namespace

TEST(ConsensusPoint, SinglePointIsReturned) {
    const Matrix y = rows({{0.3, -1.2, 7.0}});
    for (double alpha : {1e-3, 1.0, 1e3, kInfinity}) {
        const Vector c = consensus_point(y, vec({42.0}), alpha);
        EXPECT_EQ(c, y.row(0).transpose());
    }
}

TEST(ConsensusPoint, EqualEnergiesGiveMidpoint) {
    const Matrix y = rows({{0.0, 2.0}, {4.0, -2.0}});
    const Vector c = consensus_point(y, vec({1.5, 1.5}), 100.0);
    EXPECT_DOUBLE_EQ(c[0], 2.0);
    EXPECT_DOUBLE_EQ(c[1], 0.0);
}

TEST(ConsensusPoint, ThreePointsMatchExtendedPrecision) {
    const Matrix y = rows({{0.0}, {1.0}, {2.0}});
    const Vector e = vec({0.0, 1.0, 2.0});
    const Vector got = consensus_point(y, e, 100.0);
    const Vector want = oracle::consensus(y, e, 100.0);
    EXPECT_NEAR(got[0], want[0], 1e-12);
    // e^-100 + 2 e^-200 over 1 + e^-100 + e^-200
    EXPECT_NEAR(got[0], 3.720075976020836e-44, 1e-56);
}

TEST(ConsensusPoint, ShiftedEnergiesGiveIdenticalOutput) {
    const Matrix y = rows({{0.5, 1.5}, {-2.0, 0.25}, {3.0, 3.0}});
    const Vector a = consensus_point(y, vec({1.0, 2.0, 3.0}), 2.0);
    const Vector b = consensus_point(y, vec({11.0, 12.0, 13.0}), 2.0);
    EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(ConsensusPoint, InfiniteAlphaAveragesMinimizers) {
    const Matrix y = rows({{1.0}, {3.0}, {-5.0}});
    const Vector c = consensus_point(y, vec({0.0, 0.0, 1.0}), kInfinity);
    EXPECT_DOUBLE_EQ(c[0], 2.0);
}

TEST(ConsensusPoint, HugeAlphaDoesNotOverflow) {
    const Matrix y = rows({{1.0}, {2.0}});
    const Vector c = consensus_point(y, vec({1.0, 1.0 + 1e-3}), 1e15);
    EXPECT_TRUE(c.allFinite());
    EXPECT_DOUBLE_EQ(c[0], 1.0);
}

TEST(ConsensusPoint, Errors) {
    const Matrix y = rows({{1.0}, {2.0}});
    std::vector<Index> none;
    try {
        consensus_point(y, vec({0.0, 1.0}), 1.0, std::span<const Index>(none));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("empty consensus set"), std::string::npos);
    }
    try {
        consensus_point(y, vec({0.0, std::nan("")}), 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("invalid energy"), std::string::npos);
    }
    EXPECT_THROW(consensus_point(y, vec({0.0, kInfinity}), 1.0), Error);
}

TEST(ConsensusPoint, SubsetRestrictsAverage) {
    const Matrix y = rows({{0.0}, {10.0}, {20.0}});
    const std::vector<Index> pick = {1, 2};
    const Vector c = consensus_point(y, vec({0.0, 5.0, 5.0}), 1.0, std::span<const Index>(pick));
    EXPECT_DOUBLE_EQ(c[0], 15.0);
}

TEST(ConsensusPointProperty, MatchesBruteForceAndStaysInHull) {
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<int> n_dist(1, 20), d_dist(1, 5);
    std::uniform_real_distribution<double> coord(-3.0, 3.0), energy(0.0, 2.0), log_alpha(-3.0, 3.0);
    for (int rep = 0; rep < 500; ++rep) {
        const int n = n_dist(gen), d = d_dist(gen);
        Matrix y(n, d);
        Vector e(n);
        for (int i = 0; i < n; ++i) {
            e[i] = energy(gen);
            for (int k = 0; k < d; ++k) y(i, k) = coord(gen);
        }
        const double alpha = std::pow(10.0, log_alpha(gen));
        const Vector got = consensus_point(y, e, alpha);
        const Vector want = oracle::consensus(y, e, alpha);
        EXPECT_LE(oracle::rel_err(got, want), 1e-12) << "rep " << rep;
        for (int k = 0; k < d; ++k) {
            EXPECT_GE(got[k], y.col(k).minCoeff() - 1e-12);
            EXPECT_LE(got[k], y.col(k).maxCoeff() + 1e-12);
        }
        // Naive unshifted double formula, where it does not underflow.
        Vector num = Vector::Zero(d);
        double den = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = std::exp(-alpha * e[i]);
            num += w * y.row(i).transpose();
            den += w;
        }
        if (den > 1e-250) {
            EXPECT_LE(oracle::rel_err(got, num / den), 1e-12);
        }
    }
}

TEST(MemorySwitch, Examples) {
    for (double beta : {0.0, 1.0, 50.0, kInfinity}) {
        EXPECT_DOUBLE_EQ(memory_switch(2.0, 2.0, beta, 0.3), 0.65);
    }
    EXPECT_DOUBLE_EQ(memory_switch(1.0, 2.0, kInfinity, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(memory_switch(2.0, 1.0, kInfinity, 0.0), 0.0);
    EXPECT_NEAR(memory_switch(0.0, std::log(3.0), 1.0, 0.0), 0.9, 1e-15);
}

TEST(MemorySwitchProperty, Range) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> e(-10.0, 10.0), beta(0.0, 100.0), theta(0.0, 3.0);
    for (int rep = 0; rep < 10000; ++rep) {
        const double t = theta(gen);
        const double s = memory_switch(e(gen), e(gen), beta(gen), t);
        EXPECT_GE(s, t / 2 - 1e-15);
        EXPECT_LE(s, 1 + t / 2 + 1e-15);
        const double ex = e(gen), ey = rep % 7 == 0 ? ex : e(gen);
        const double si = memory_switch(ex, ey, kInfinity, t);
        const double lo = std::abs(si - t / 2), mid = std::abs(si - (1 + t) / 2), hi = std::abs(si - 1 - t / 2);
        EXPECT_LE(std::min({lo, mid, hi}), 1e-15);
    }
}

TEST(ExactMemoryUpdate, StrictImprovementOnly) {
    const Objective obj = make_sphere(1);
    Ensemble ens = make_ensemble(rows({{1.0}, {2.0}, {3.0}}), obj);
    const Matrix moved = rows({{0.5}, {-2.0}, {3.5}});
    const Vector energies = vec({0.25, 4.0, 12.25});
    const Ensemble out = exact_memory_update(ens, moved, energies);
    EXPECT_EQ(out.memories(0, 0), 0.5);
    EXPECT_EQ(out.memory_energies[0], 0.25);
    EXPECT_EQ(out.memories(1, 0), 2.0);  // tie keeps the old memory
    EXPECT_EQ(out.memories(2, 0), 3.0);
    EXPECT_EQ(out.memory_energies[2], 9.0);
    EXPECT_THROW(exact_memory_update(ens, rows({{1.0}}), vec({1.0})), Error);
}

TEST(Step, SingleParticleIsFixedPoint) {
    const Objective obj = make_rastrigin(3);
    const Ensemble ens = make_ensemble(rows({{0.3, -0.7, 1.1}}), obj);
    CboParams p;
    p.sigma1 = 0.0;
    p.dt = 0.1;
    p.kappa = 10.0;
    const Ensemble next = step(ens, p, obj, RngStream(3));
    EXPECT_EQ(next.positions, ens.positions);
    EXPECT_EQ(next.memories, ens.memories);
    EXPECT_EQ(next.step_index, 1u);
}

TEST(Step, DeterministicTwoParticleStep) {
    const Objective obj = make_sphere(1);
    const Ensemble ens = make_ensemble(rows({{-1.0}, {2.0}}), obj);
    CboParams p;
    p.alpha = kInfinity;
    p.dt = 0.5;
    p.kappa = 2.0;
    ASSERT_TRUE(p.exact_memory_rule());
    const Ensemble next = step(ens, p, obj, RngStream(0));
    // y = -1; X1 = X - dt (X - y) = (-1, 2 - 1.5)
    EXPECT_DOUBLE_EQ(next.positions(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(next.positions(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(next.memories(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(next.memories(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(next.memory_energies[1], 0.25);
    EXPECT_DOUBLE_EQ(next.time, 0.5);
}

TEST(Step, ConsensusComesFromMemories) {
    const Objective obj = make_sphere(1);
    Ensemble ens = make_ensemble(rows({{5.0}, {6.0}}), obj);
    ens.memories = rows({{0.0}, {6.0}});
    ens.memory_energies = vec({0.0, 36.0});
    CboParams p;
    p.alpha = kInfinity;
    p.dt = 0.5;
    p.kappa = 2.0;
    const StepReport r = advance(ens, p, obj, RngStream(0));
    EXPECT_DOUBLE_EQ(r.consensus[0], 0.0);
    EXPECT_DOUBLE_EQ(ens.positions(0, 0), 2.5);
}

TEST(Step, AnisotropicNoiseVanishesInZeroCoordinate) {
    const Objective obj = make_sphere(2);
    // Both memories share coordinate 1 = 0.7, positions equal memories.
    const Ensemble ens = make_ensemble(rows({{0.0, 0.7}, {1.0, 0.7}, {-1.5, 0.7}}), obj);
    CboParams p;
    p.sigma1 = 2.0;
    p.sigma2 = 3.0;
    p.alpha = kInfinity;
    p.diffusion = Diffusion::Anisotropic;
    const Ensemble next = step(ens, p, obj, RngStream(9));
    for (Index i = 0; i < 3; ++i) EXPECT_EQ(next.positions(i, 1), 0.7);
    EXPECT_NE(next.positions(1, 0), ens.positions(1, 0) - p.dt * 1.0);

    p.diffusion = Diffusion::Isotropic;
    const Ensemble iso = step(ens, p, obj, RngStream(9));
    EXPECT_NE(iso.positions(1, 1), 0.7);
}

TEST(Step, NoiseMatchesIndependentlyDrawnIncrements) {
    const Objective obj = make_sphere(2);
    const Ensemble ens = make_ensemble(rows({{0.0, 0.0}, {1.0, -2.0}}), obj);
    CboParams p;
    p.sigma1 = 0.5;
    p.alpha = kInfinity;
    p.dt = 0.04;
    const RngStream rng(21, 4);
    const Ensemble next = step(ens, p, obj, rng);
    std::vector<double> b(2);
    rng.gaussian(1, 0, Channel::Consensus, std::sqrt(p.dt), b);
    const double x0 = 1.0 - p.dt * 1.0 + 0.5 * 1.0 * b[0];
    const double x1 = -2.0 - p.dt * -2.0 + 0.5 * -2.0 * b[1];
    EXPECT_DOUBLE_EQ(next.positions(1, 0), x0);
    EXPECT_DOUBLE_EQ(next.positions(1, 1), x1);
}

TEST(Step, GradientDrift) {
    const Objective obj = make_sphere(2);
    const Ensemble ens = make_ensemble(rows({{1.0, -1.0}}), obj);
    CboParams p;
    p.lambda3 = 1.0;
    p.dt = 0.1;
    p.kappa = 10.0;
    const Ensemble next = step(ens, p, obj, RngStream(0));
    EXPECT_DOUBLE_EQ(next.positions(0, 0), 1.0 - 0.1 * 2.0);
    EXPECT_DOUBLE_EQ(next.positions(0, 1), -1.0 + 0.1 * 2.0);

    const Objective no_grad(2, [](VectorCRef x, std::size_t) { return x.squaredNorm(); });
    EXPECT_THROW(step(make_ensemble(rows({{1.0, 1.0}}), no_grad), p, no_grad, RngStream(0)), Error);
}

TEST(Step, ExactRuleUsesNoExtraEvaluations) {
    Counted counted;
    const Objective obj = counted.objective(2);
    Ensemble ens = make_ensemble(rows({{1.0, 0.0}, {0.0, 2.0}, {3.0, 1.0}}), obj);
    CboParams p;
    p.sigma1 = 0.3;
    ASSERT_TRUE(p.exact_memory_rule());
    *counted.calls = 0;
    advance(ens, p, obj, RngStream(1));
    EXPECT_EQ(counted.calls->load(), 3);

    p.kappa = 50.0;  // smoothed rule re-evaluates the memories
    ASSERT_FALSE(p.exact_memory_rule());
    *counted.calls = 0;
    advance(ens, p, obj, RngStream(1));
    EXPECT_EQ(counted.calls->load(), 6);
}

TEST(Step, SmoothedRuleFollowsRelaxation) {
    const Objective obj = make_sphere(1);
    Ensemble ens = make_ensemble(rows({{2.0}, {-1.0}}), obj);
    CboParams p;
    p.dt = 0.1;
    p.kappa = 3.0;
    p.theta = 0.5;
    p.beta = 2.0;
    p.alpha = kInfinity;
    const Ensemble next = step(ens, p, obj, RngStream(0));
    // y = -1; particle 0 moves to 2 - 0.1 * 3 = 1.7
    const double x = 1.7;
    const double s = 0.5 * (1.0 + 0.5 + std::tanh(2.0 * (4.0 - x * x)));
    EXPECT_DOUBLE_EQ(next.positions(0, 0), x);
    EXPECT_NEAR(next.memories(0, 0), 2.0 + 0.1 * 3.0 * s * (x - 2.0), 1e-15);
    EXPECT_NEAR(next.memory_energies[0], next.memories(0, 0) * next.memories(0, 0), 1e-15);
}

TEST(Step, DivergenceCarriesStepIndex) {
    const Objective obj(1, [](VectorCRef x, std::size_t) { return -std::exp(x.squaredNorm()); },
                        [](VectorCRef x, std::size_t) -> Vector { return -2.0 * x * std::exp(x.squaredNorm()); });
    Ensemble ens = make_ensemble(rows({{5.0}}), obj);
    ens.step_index = 17;
    CboParams p;
    p.lambda3 = 1.0;
    p.dt = 1.0;
    p.kappa = 1.0;
    try {
        advance(ens, p, obj, RngStream(0));
        advance(ens, p, obj, RngStream(0));
        FAIL() << "expected divergence";
    } catch (const DivergedEnsemble& e) {
        EXPECT_GE(e.step(), 17u);
        EXPECT_NE(std::string(e.what()).find("diverged ensemble"), std::string::npos);
    }
}

TEST(Params, ValidationNamesField) {
    CboParams p;
    p.dt = -0.01;
    try {
        p.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("dt"), std::string::npos);
    }
    p = CboParams{};
    p.lambda1 = 0.0;
    EXPECT_THROW(p.validate(), Error);
    p = CboParams{};
    p.sigma2 = -1.0;
    EXPECT_THROW(p.validate(), Error);
    p = CboParams{};
    p.alpha = kInfinity;
    p.beta = kInfinity;
    EXPECT_NO_THROW(p.validate());
}

TEST(Params, ExactRuleDetection) {
    CboParams p;
    EXPECT_TRUE(p.exact_memory_rule());
    p.theta = 0.1;
    EXPECT_FALSE(p.exact_memory_rule());
    p = CboParams{};
    p.beta = 1e9;
    EXPECT_FALSE(p.exact_memory_rule());
    p = CboParams{};
    p.dt = 0.02;
    EXPECT_FALSE(p.exact_memory_rule());
    p.kappa = 50.0;
    EXPECT_TRUE(p.exact_memory_rule());
}

TEST(Schedule, CoolingAndDoubling) {
    CboParams base;
    base.alpha = 10.0;
    base.sigma1 = 1.0;
    base.sigma2 = 0.5;
    base.sigma3 = 0.25;
    Schedule s;
    s.alpha_rule = AlphaRule::DoublePerEpoch;
    s.sigma_rule = SigmaRule::Log2Cooling;
    s.epoch_length = 4;
    const CboParams e0 = s.apply(base, 3);
    EXPECT_EQ(e0.alpha, 10.0);
    EXPECT_EQ(e0.sigma1, 1.0);
    const CboParams e2 = s.apply(base, 8);
    EXPECT_EQ(e2.alpha, 40.0);
    EXPECT_DOUBLE_EQ(e2.sigma1, 1.0 / std::log2(4.0));
    EXPECT_DOUBLE_EQ(e2.sigma2, 0.25);
    EXPECT_EQ(e2.sigma3, 0.25);
    const CboParams e6 = s.apply(base, 24);
    EXPECT_DOUBLE_EQ(e6.sigma1, 1.0 / 3.0);
    EXPECT_TRUE(Schedule{}.is_constant());
}

TEST(Init, DegenerateGaussian) {
    const Objective obj = make_sphere(3);
    const Ensemble ens = init_ensemble(5, 3, InitSpec::gaussian(vec({1.0, 2.0, 3.0}), Vector::Zero(3)), obj, RngStream(4));
    for (Index i = 0; i < 5; ++i) {
        EXPECT_EQ(ens.positions.row(i), vec({1.0, 2.0, 3.0}).transpose());
        EXPECT_EQ(ens.memory_energies[i], 14.0);
    }
    EXPECT_EQ(ens.memories, ens.positions);
}

TEST(Init, UniformBoxAndReproducibility) {
    const Objective obj = make_sphere(4);
    const Ensemble a = init_ensemble(200, 4, InitSpec::uniform(4, -1.0, 1.0), obj, RngStream(8));
    EXPECT_LE(a.positions.maxCoeff(), 1.0);
    EXPECT_GE(a.positions.minCoeff(), -1.0);
    const Ensemble b = init_ensemble(200, 4, InitSpec::uniform(4, -1.0, 1.0), obj, RngStream(8));
    EXPECT_EQ(a.positions, b.positions);
    const Ensemble c = init_ensemble(200, 4, InitSpec::uniform(4, -1.0, 1.0), obj, RngStream(9));
    EXPECT_NE(a.positions, c.positions);
    for (Index i = 0; i < 200; ++i) EXPECT_DOUBLE_EQ(a.memory_energies[i], a.positions.row(i).squaredNorm());
}

TEST(Init, GaussianMoments) {
    const Objective obj = make_sphere(2);
    const Ensemble e = init_ensemble(20000, 2, InitSpec::gaussian(vec({1.0, -2.0}), vec({0.5, 2.0})), obj, RngStream(1));
    const Eigen::RowVectorXd mean = e.positions.colwise().mean();
    EXPECT_NEAR(mean[0], 1.0, 0.02);
    EXPECT_NEAR(mean[1], -2.0, 0.06);
    const double var1 = (e.positions.col(1).array() + 2.0).square().mean();
    EXPECT_NEAR(var1, 4.0, 0.15);
}

TEST(Init, Errors) {
    const Objective obj = make_sphere(2);
    EXPECT_THROW(init_ensemble(3, 2, InitSpec::gaussian(2, 0.0, -1.0), obj, RngStream()), Error);
    EXPECT_THROW(init_ensemble(3, 2, InitSpec::uniform(2, 1.0, -1.0), obj, RngStream()), Error);
    EXPECT_THROW(init_ensemble(0, 2, InitSpec::gaussian(2, 0.0, 1.0), obj, RngStream()), Error);
    EXPECT_THROW(init_ensemble(3, 3, InitSpec::gaussian(3, 0.0, 1.0), obj, RngStream()), Error);
}

TEST(Run, ZeroStepsReturnsInitial) {
    const Objective obj = make_rastrigin(2);
    const Ensemble init = init_ensemble(10, 2, InitSpec::gaussian(2, 0.0, 1.0), obj, RngStream(2));
    CboParams p;
    p.sigma1 = 1.0;
    const RunResult r = run(init, p, Schedule{}, obj, StoppingRule{0, std::nullopt}, RngStream(2));
    EXPECT_EQ(r.steps, 0u);
    EXPECT_EQ(r.final.positions, init.positions);
    EXPECT_EQ(r.final.memories, init.memories);
}

TEST(Run, SphereContractsToOrigin) {
    const Objective obj = make_sphere(3);
    const Ensemble init = init_ensemble(20, 3, InitSpec::gaussian(3, 1.0, 1.0), obj, RngStream(5));
    CboParams p;
    p.dt = 0.1;
    p.kappa = 10.0;
    p.lambda3 = 1.0;  // without noise, only the gradient moves the swarm off the initial hull
    RunOptions opt;
    opt.x_star = Vector::Zero(3);
    const RunResult r = run(init, p, Schedule{}, obj, StoppingRule{200, std::nullopt}, RngStream(5), opt);
    EXPECT_EQ(r.steps, 200u);
    EXPECT_LE(r.consensus.norm(), 1e-6);
    EXPECT_TRUE(r.memory_monotone);
    ASSERT_EQ(r.diagnostics.size(), 201u);
    EXPECT_NEAR(r.final.time, 20.0, 1e-9);
}

TEST(Run, SingleMovingParticleContractsGeometrically) {
    // One particle parked at the origin acts as the consensus point: the other
    // follows x_k = (1 - lambda1 dt)^k x_0.
    const Objective obj = make_sphere(2);
    const Ensemble init = make_ensemble(rows({{0.0, 0.0}, {1.5, -0.5}}), obj);
    CboParams p;
    p.alpha = kInfinity;
    p.dt = 0.05;
    p.kappa = 20.0;
    p.lambda1 = 2.0;
    const RunResult r = run(init, p, Schedule{}, obj, StoppingRule{40, std::nullopt}, RngStream(0));
    const double factor = std::pow(1.0 - 2.0 * 0.05, 40);
    EXPECT_NEAR(r.final.positions(1, 0), 1.5 * factor, 1e-14);
    EXPECT_NEAR(r.final.positions(1, 1), -0.5 * factor, 1e-14);
}

TEST(Run, IdenticalSeedIsBitIdentical) {
    const Objective obj = make_rastrigin(4);
    const Ensemble init = init_ensemble(30, 4, InitSpec::gaussian(4, 1.0, 2.0), obj, RngStream(77));
    CboParams p;
    p.sigma1 = std::sqrt(1.6);
    p.lambda2 = 1.0;
    p.sigma2 = 0.3;
    RunOptions opt;
    opt.x_star = Vector::Zero(4);
    const auto a = run(init, p, Schedule{}, obj, StoppingRule{300, std::nullopt}, RngStream(77), opt);
    const auto b = run(init, p, Schedule{}, obj, StoppingRule{300, std::nullopt}, RngStream(77), opt);
    EXPECT_EQ(a.final.positions, b.final.positions);
    EXPECT_EQ(a.final.memories, b.final.memories);
    EXPECT_EQ(a.consensus, b.consensus);
    ASSERT_EQ(a.diagnostics.size(), b.diagnostics.size());
    for (std::size_t i = 0; i < a.diagnostics.size(); ++i) EXPECT_EQ(a.diagnostics[i].lyapunov, b.diagnostics[i].lyapunov);
}

TEST(Run, ExactRuleMemoryEnergiesNeverIncrease) {
    const Objective obj = make_rastrigin(4);
    const Ensemble init = init_ensemble(40, 4, InitSpec::gaussian(4, 2.0, 2.0), obj, RngStream(3));
    CboParams p;
    p.sigma1 = std::sqrt(1.6);
    p.lambda2 = 1.0;
    Vector last = init.memory_energies;
    bool monotone = true;
    RunOptions opt;
    opt.observer = [&](const Ensemble& e, const StepReport&) {
        if ((e.memory_energies.array() > last.array()).any()) monotone = false;
        for (Index i = 0; i < e.size(); ++i) {
            if (e.memory_energies[i] != rastrigin(e.memories.row(i).transpose())) monotone = false;
        }
        last = e.memory_energies;
    };
    const RunResult r = run(init, p, Schedule{}, obj, StoppingRule{500, std::nullopt}, RngStream(3), opt);
    EXPECT_TRUE(monotone);
    EXPECT_TRUE(r.memory_monotone);
}

TEST(Run, ConsensusToleranceStopsEarly) {
    const Objective obj = make_sphere(2);
    const Ensemble init = init_ensemble(10, 2, InitSpec::gaussian(2, 1.0, 1.0), obj, RngStream(1));
    CboParams p;
    p.dt = 0.1;
    p.kappa = 10.0;
    const RunResult r = run(init, p, Schedule{}, obj, StoppingRule{100000, 1e-10}, RngStream(1));
    EXPECT_LT(r.steps, 100000u);
}

TEST(Run, RecordEvery) {
    const Objective obj = make_sphere(2);
    const Ensemble init = init_ensemble(10, 2, InitSpec::gaussian(2, 1.0, 1.0), obj, RngStream(1));
    RunOptions opt;
    opt.x_star = Vector::Zero(2);
    opt.record_every = 10;
    const RunResult r = run(init, CboParams{}, Schedule{}, obj, StoppingRule{95, std::nullopt}, RngStream(1), opt);
    ASSERT_EQ(r.diagnostics.size(), 11u);  // steps 0, 10, ..., 90 and the final step
    EXPECT_EQ(r.diagnostics.back().step, 95u);
}

TEST(MiniBatch, BatchAndSubsetAreSeeded) {
    const Objective obj = toy_stochastic_objective(2, 5);
    Ensemble a = init_ensemble(20, 2, InitSpec::gaussian(2, 0.0, 1.0), obj, RngStream(6));
    Ensemble b = a;
    CboParams p;
    p.sigma1 = 0.5;
    p.consensus_batch = 5;
    const StepReport ra = advance(a, p, obj, RngStream(6));
    const StepReport rb = advance(b, p, obj, RngStream(6));
    EXPECT_LT(ra.batch, 5u);
    EXPECT_EQ(ra.batch, rb.batch);
    EXPECT_EQ(a.positions, b.positions);
    for (Index i = 0; i < a.size(); ++i) {
        EXPECT_DOUBLE_EQ(a.memory_energies[i], obj.eval(a.memories.row(i).transpose(), ra.batch));
    }
}

TEST(MiniBatch, RunReportsNoMonotonicityClaim) {
    const Objective obj = toy_stochastic_objective(2, 4);
    const Ensemble init = init_ensemble(10, 2, InitSpec::gaussian(2, 0.0, 1.0), obj, RngStream(6));
    const RunResult r = run(init, CboParams{}, Schedule{}, obj, StoppingRule{10, std::nullopt}, RngStream(6));
    EXPECT_FALSE(r.memory_monotone);
}
