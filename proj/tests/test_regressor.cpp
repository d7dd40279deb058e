#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "poseuq/gradcheck.hpp"
#include "poseuq/regressor.hpp"

using namespace poseuq;

namespace {

Architecture small_arch(HeadKind head, double dropout = 0.0) {
    Architecture a;
    a.input_dim = 6;
    a.hidden1 = 8;
    a.hidden2 = 7;
    a.head = head;
    a.dropout_p = dropout;
    return a;
}

std::vector<double> random_input(std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    return x;
}

Sample random_sample(std::size_t dim, Rng& rng) {
    return Sample{random_input(dim, rng),
                  make_pose(Translation{rng.normal(), rng.normal(), rng.normal()},
                            EulerTriple{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)})};
}

// Toy regression: target pose is a fixed linear function of the input.
std::vector<Sample> toy_set(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto x = random_input(6, rng);
        out.push_back(Sample{x, make_pose(Translation{0.5 * x[0], -0.3 * x[1], 0.2 * x[2]},
                                          EulerTriple{0.05 * x[3], 0.05 * x[4], -0.05 * x[5]})});
    }
    return out;
}

}  // namespace

TEST(HeadConstraints, ZeroRaw) {
    const EvidentialPrediction p = apply_head_constraints(RawEvidentialOutput{});
    for (int c = 0; c < 6; ++c) {
        const NIGParams& n = p.component(c);
        EXPECT_EQ(n.gamma, 0.0);
        EXPECT_NEAR(n.nu, std::log(2.0) + 1e-6, 1e-15);
        EXPECT_NEAR(n.alpha, 1.0 + std::log(2.0) + 1e-6, 1e-15);
        EXPECT_NEAR(n.beta, std::log(2.0) + 1e-6, 1e-15);
    }
}

TEST(HeadConstraints, LargeRawNu) {
    RawEvidentialOutput raw;
    raw.raw[0][1] = 20.0;
    EXPECT_NEAR(apply_head_constraints(raw).component(0).nu, 20.0 + kHeadEps, 1e-8);
}

TEST(HeadConstraints, AlwaysValid) {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        RawEvidentialOutput raw;
        for (auto& c : raw.raw) {
            for (double& v : c) v = rng.uniform(-800.0, 800.0);
        }
        const auto p = apply_head_constraints(raw);
        for (int c = 0; c < 6; ++c) EXPECT_TRUE(is_valid(p.component(c)));
    }
}

TEST(Softplus, StableAtExtremes) {
    EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
    EXPECT_EQ(softplus(1000.0), 1000.0);
    EXPECT_GE(softplus(-1000.0), 0.0);
    EXPECT_TRUE(std::isfinite(softplus(-1000.0)));
}

TEST(Forward, ZeroNetworkGivesIdentity) {
    RegressorParams p{small_arch(HeadKind::Plain), {}};
    p.values.assign(p.arch.param_count(), 0.0);
    const Pose6 out = forward_plain(p, std::vector<double>(6, 1.0));
    EXPECT_EQ(out.translation, (Translation{0, 0, 0}));
    EXPECT_EQ(out.quaternion(), (UnitQuaternion{0, 0, 0, 1}));
}

TEST(Forward, DeterministicAndUnitQuaternion) {
    const auto p = init_params(small_arch(HeadKind::Plain), 5);
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const auto x = random_input(6, rng);
        const Pose6 a = forward_plain(p, x);
        const Pose6 b = forward_plain(p, x);
        EXPECT_EQ(a.translation, b.translation);
        EXPECT_EQ(a.quaternion(), b.quaternion());
        const auto q = std::get<UnitQuaternion>(a.rotation);
        EXPECT_NEAR(std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z + q.w * q.w), 1.0, 1e-9);
    }
}

TEST(Forward, EvidentialOutputsAlwaysValid) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        auto p = init_params(small_arch(HeadKind::Evidential), rng.next());
        for (double& v : p.values) v *= rng.uniform(0.0, 20.0);
        const auto out = forward_evidential(p, random_input(6, rng));
        for (int c = 0; c < 6; ++c) EXPECT_TRUE(is_valid(out.component(c)));
    }
}

TEST(Forward, DimensionMismatch) {
    const auto p = init_params(small_arch(HeadKind::Plain), 5);
    EXPECT_THROW(forward(p, std::vector<double>(5, 0.0)), std::invalid_argument);
}

TEST(Dropout, MaskScalingAndRate) {
    Rng rng(4);
    const auto m = sample_dropout_mask(100000, 0.3, rng);
    std::size_t dropped = 0;
    for (double v : m) {
        if (v == 0.0) ++dropped;
        else EXPECT_DOUBLE_EQ(v, 1.0 / 0.7);
    }
    EXPECT_NEAR(static_cast<double>(dropped) / 100000.0, 0.3, 0.01);
    EXPECT_THROW(sample_dropout_mask(10, 1.0, rng), std::invalid_argument);
    EXPECT_THROW(sample_dropout_mask(10, -0.1, rng), std::invalid_argument);
}

TEST(Init, FanInBoundsAndZeroBiases) {
    const auto p = init_params(small_arch(HeadKind::Evidential), 9);
    const auto o = p.offsets();
    EXPECT_EQ(o.end, p.values.size());
    for (std::size_t i = o.w1; i < o.b1; ++i) EXPECT_LE(std::abs(p.values[i]), std::sqrt(3.0 / 6.0));
    for (std::size_t i = o.b1; i < o.w2; ++i) EXPECT_EQ(p.values[i], 0.0);
    for (std::size_t i = o.br; i < o.end; ++i) EXPECT_EQ(p.values[i], 0.0);
    EXPECT_EQ(init_params(small_arch(HeadKind::Evidential), 9), p);
}

TEST(Gradient, EvidentialMatchesFiniteDifferences) {
    Rng rng(5);
    for (EvidentialVariant v : {EvidentialVariant::D, EvidentialVariant::NLL}) {
        for (bool geo : {true, false}) {
            LossConfig cfg;
            cfg.evd_variant = v;
            cfg.use_geometric = geo;
            for (int trial = 0; trial < 5; ++trial) {
                const auto p = init_params(small_arch(HeadKind::Evidential), rng.next());
                const Sample s = random_sample(6, rng);
                EXPECT_LT(finite_diff_check(p, s, cfg, 150, rng.next()), 1e-4);
            }
        }
    }
}

TEST(Gradient, PlainMatchesFiniteDifferences) {
    Rng rng(6);
    LossConfig cfg;
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = init_params(small_arch(HeadKind::Plain), rng.next());
        EXPECT_LT(finite_diff_check(p, random_sample(6, rng), cfg, 150, rng.next()), 1e-4);
    }
}

TEST(Gradient, WithDropoutMask) {
    Rng rng(7);
    const auto p = init_params(small_arch(HeadKind::Plain, 0.3), 11);
    const Sample s = random_sample(6, rng);
    const DropoutMask mask = sample_dropout_mask(p.arch, rng);
    std::vector<double> grad(p.values.size());
    LossConfig cfg;
    sample_loss_grad(p, s, cfg, &mask, grad);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.values.size(); i += 3) {
        auto f = [&](std::span<const double> v) {
            RegressorParams probe{p.arch, std::vector<double>(v.begin(), v.end())};
            return sample_loss(probe, s, cfg, &mask).total;
        };
        worst = std::max(worst, relative_error(grad[i], central_difference(f, std::span<const double>(p.values), i)));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Gradcheck, ExactOnQuadratic) {
    // The central difference is exact for quadratics, up to round-off.
    const std::vector<double> x{0.3, -1.2, 2.0};
    auto f = [](std::span<const double> v) { return 2.0 * v[0] * v[0] + v[0] * v[1] - 0.5 * v[2] * v[2] + v[2]; };
    const double analytic[] = {4.0 * x[0] + x[1], x[0], -x[2] + 1.0};
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(relative_error(analytic[i], central_difference(f, x, i)), 1e-8);
}

TEST(TrainStep, ZeroLearningRateLeavesParams) {
    auto p = init_params(small_arch(HeadKind::Evidential), 12);
    const auto before = p;
    Rng rng(8);
    const Sample s = random_sample(6, rng);
    const Sample* batch[] = {&s};
    AdamState adam = make_adam(p);
    train_step(p, batch, LossConfig{}, adam, 0.0);
    EXPECT_EQ(p.values, before.values);
}

TEST(TrainStep, SmallStepDecreasesLoss) {
    Rng rng(9);
    for (HeadKind h : {HeadKind::Plain, HeadKind::Evidential}) {
        auto p = init_params(small_arch(h), 13);
        const Sample s = random_sample(6, rng);
        const Sample* batch[] = {&s};
        const LossConfig cfg;
        AdamState adam = make_adam(p);
        const double before = train_step(p, batch, cfg, adam, 1e-4).total;
        EXPECT_LT(sample_loss(p, s, cfg).total, before);
    }
}

TEST(TrainStep, ReturnsPreUpdateBreakdown) {
    Rng rng(10);
    auto p = init_params(small_arch(HeadKind::Evidential), 14);
    const Sample s = random_sample(6, rng);
    const Sample* batch[] = {&s};
    const double expected = sample_loss(p, s, LossConfig{}).total;
    AdamState adam = make_adam(p);
    EXPECT_EQ(train_step(p, batch, LossConfig{}, adam, 1e-3).total, expected);
}

TEST(TrainStep, NonFiniteAborts) {
    auto p = init_params(small_arch(HeadKind::Plain), 15);
    Sample s{std::vector<double>(6, std::nan("")), make_pose(Translation{}, EulerTriple{})};
    const Sample* batch[] = {&s};
    AdamState adam = make_adam(p);
    EXPECT_THROW(train_step(p, batch, LossConfig{}, adam, 1e-3), std::exception);
}

TEST(TrainStep, DropoutNeedsRng) {
    auto p = init_params(small_arch(HeadKind::Plain, 0.3), 16);
    Rng rng(11);
    const Sample s = random_sample(6, rng);
    const Sample* batch[] = {&s};
    AdamState adam = make_adam(p);
    EXPECT_THROW(train_step(p, batch, LossConfig{}, adam, 1e-3), std::invalid_argument);
    EXPECT_NO_THROW(train_step(p, batch, LossConfig{}, adam, 1e-3, &rng));
}

TEST(Fit, TwoPhaseScheduleAndDeterminism) {
    const auto train = toy_set(96, 1);
    const auto val = toy_set(32, 2);
    TrainSchedule s;
    s.epochs_total = 6;
    s.epochs_phase1 = 4;
    s.batch_size = 16;
    s.seed = 77;
    const auto arch = small_arch(HeadKind::Evidential);
    const FitResult a = fit(arch, s, train, val, LossConfig{});
    ASSERT_EQ(a.log.size(), 6u);
    for (const auto& r : a.log) {
        EXPECT_EQ(r.phase, r.epoch <= 4 ? 1 : 2);
        EXPECT_EQ(r.s_evd, r.epoch <= 4 ? 0.1 : 5e-3);
        EXPECT_TRUE(std::isfinite(r.validation.evd_tr));
        EXPECT_TRUE(std::isfinite(r.validation.evd_rot));
    }
    const FitResult b = fit(arch, s, train, val, LossConfig{});
    EXPECT_EQ(a.params.values, b.params.values);
    EXPECT_EQ(a.log.back().validation.total, b.log.back().validation.total);
}

TEST(Fit, SinglePhaseWhenPhaseOneCoversAll) {
    const auto train = toy_set(48, 3);
    TrainSchedule s;
    s.epochs_total = 3;
    s.epochs_phase1 = 3;
    s.batch_size = 16;
    const FitResult r = fit(small_arch(HeadKind::Evidential), s, train, {}, LossConfig{});
    for (const auto& e : r.log) EXPECT_EQ(e.phase, 1);
}

TEST(Fit, LearnsToyProblem) {
    const auto train = toy_set(512, 4);
    const auto val = toy_set(128, 5);
    TrainSchedule s;
    s.epochs_total = 40;
    s.epochs_phase1 = 40;
    s.lr = 3e-3;
    s.batch_size = 16;
    const FitResult r = fit(small_arch(HeadKind::Plain), s, train, val, LossConfig{});
    EXPECT_LT(r.log.back().val_tr_error_mean, 0.5 * r.log.front().val_tr_error_mean);
}

TEST(Fit, RejectsBadSchedules) {
    const auto train = toy_set(8, 6);
    TrainSchedule s;
    s.epochs_phase1 = s.epochs_total + 1;
    EXPECT_THROW(fit(small_arch(HeadKind::Plain), s, train, {}, LossConfig{}), std::invalid_argument);
    LossConfig no_geo;
    no_geo.use_geometric = false;
    EXPECT_THROW(fit(small_arch(HeadKind::Plain), TrainSchedule{}, train, {}, no_geo), std::invalid_argument);
}

TEST(Checkpoint, ExactRoundTrip) {
    Checkpoint c{init_params(small_arch(HeadKind::Evidential, 0.2), 21), TrainSchedule{}, 99};
    c.schedule.seed = 1234567890123ULL;
    c.params.values[3] = 0.1 + 0.2;  // not exactly representable in short decimal
    const auto path = std::filesystem::temp_directory_path() / "poseuq_ckpt_test.json";
    save_checkpoint(path, c);
    const Checkpoint back = load_checkpoint(path);
    EXPECT_EQ(back.params, c.params);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.schedule.seed, c.schedule.seed);
    EXPECT_EQ(back.schedule.epochs_phase1, c.schedule.epochs_phase1);
    std::filesystem::remove(path);
}
