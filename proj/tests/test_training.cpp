#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dmsort/training.hpp"

using namespace dmsort;

namespace {

Trajectory line(int first, int n, double x0 = 0.3, double vx = 0.002) {
    Trajectory t;
    for (int i = 0; i < n; ++i) t.push_back({first + i, {x0 + vx * i, 0.4, 0.1, 0.2, 1.0}});
    return t;
}

// Normalized toy tracks: sinusoidal x, drifting y, breathing size.
std::vector<Trajectory> toy_tracks(std::mt19937_64& rng, int count, int length, bool stationary = false) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Trajectory> out;
    for (int k = 0; k < count; ++k) {
        const double x0 = 0.2 + 0.5 * u(rng), y0 = 0.2 + 0.4 * u(rng);
        const double amp = stationary ? 0.0 : 0.03 + 0.04 * u(rng);
        const double period = 30 + 30 * u(rng), phase = 2 * std::numbers::pi * u(rng);
        const double vy = stationary ? 0.0 : 0.002 * (u(rng) - 0.5);
        const double w0 = 0.05 + 0.05 * u(rng), h0 = 0.1 + 0.1 * u(rng);
        const double wob = stationary ? 0.0 : 0.05;
        Trajectory t;
        for (int i = 0; i < length; ++i) {
            const double s = 1.0 + wob * std::sin(2 * std::numbers::pi * i / 45.0 + phase);
            t.push_back({i, {x0 + amp * std::sin(2 * std::numbers::pi * i / period + phase), y0 + vy * i, w0 * s,
                             h0 * s, 1.0}});
        }
        out.push_back(std::move(t));
    }
    return out;
}

const TransFilterConfig kToyModel{16, 2, 1, 32, 8, 8};

TrainConfig toy_train(int epochs) {
    TrainConfig c;
    c.learning_rate = 3e-3;
    c.warmup_epochs = 1;
    c.decay_period = 1000;
    c.batch_size = 16;
    c.epochs = epochs;
    c.seed = 42;
    return c;
}

struct ToyModels {
    std::vector<TrainingWindow> train_windows, eval_windows;
    TransFilterModel clean, augmented;
    TrainResult clean_history;
};

const AugmentationConfig kToyAug{0.05, 0.2};

// Trained once and shared by the property tests below.
const ToyModels& toy_models() {
    static const ToyModels models = [] {
        ToyModels m;
        std::mt19937_64 rng(99);
        auto tracks = toy_tracks(rng, 40, 80);
        const auto still = toy_tracks(rng, 10, 80, true);
        tracks.insert(tracks.end(), still.begin(), still.end());
        m.train_windows = make_windows(tracks, kToyModel.history, kToyModel.horizon, 2);
        m.eval_windows = make_windows(toy_tracks(rng, 10, 80), kToyModel.history, kToyModel.horizon, 5);

        m.clean = TransFilterModel(kToyModel, fit_stats(std::span<const TrainingWindow>(m.train_windows)), 1);
        m.clean_history = train(m.clean, m.train_windows, toy_train(30), AugmentationConfig::none());

        m.augmented = TransFilterModel(
            kToyModel, fit_stats(std::span<const TrainingWindow>(m.train_windows), kToyAug, 42), 1);
        train(m.augmented, m.train_windows, toy_train(30), kToyAug);
        return m;
    }();
    return models;
}

}  // namespace

TEST(MakeWindows, CountsForExactLengthTrack) {
    // H + m_max boxes: the one full window plus the shorter leading ones.
    const std::vector<Trajectory> t{line(0, 10 + 30)};
    const auto w = make_windows(t, 10, 30, 1);
    ASSERT_EQ(w.size(), 10u);
    int full = 0;
    for (const auto& x : w) {
        EXPECT_EQ(x.target.size(), 30u);
        EXPECT_GT(x.target.front().frame, x.input.back().frame);
        full += x.input.size() == 10 ? 1 : 0;
    }
    EXPECT_EQ(full, 1);
    EXPECT_EQ(w.front().input.size(), 1u);
}

TEST(MakeWindows, ShortTracks) {
    EXPECT_TRUE(make_windows(std::vector<Trajectory>{line(0, 1)}, 10, 30, 1).empty());
    const auto w = make_windows(std::vector<Trajectory>{line(0, 5)}, 10, 30, 1);
    ASSERT_EQ(w.size(), 4u);
    EXPECT_EQ(w[0].target.size(), 4u);
    EXPECT_EQ(w[3].target.size(), 1u);
}

TEST(MakeWindows, StrideHalvesCount) {
    for (int n : {40, 57, 100, 131}) {
        const std::vector<Trajectory> t{line(3, n)};
        const auto a = make_windows(t, 10, 30, 1).size();
        const auto b = make_windows(t, 10, 30, 2).size();
        EXPECT_LE(std::abs(static_cast<long>(2 * b) - static_cast<long>(a)), 1) << n;
    }
}

TEST(MakeWindows, TargetsStopAtGaps) {
    Trajectory t = line(0, 10);
    Trajectory tail = line(14, 10);
    t.insert(t.end(), tail.begin(), tail.end());
    const auto w = make_windows(std::vector<Trajectory>{t}, 4, 6, 1);
    for (const auto& x : w) {
        for (std::size_t j = 0; j < x.target.size(); ++j) {
            EXPECT_EQ(x.target[j].frame, x.input.back().frame + static_cast<int>(j) + 1);
        }
    }
}

TEST(MakeWindows, RejectsBadArguments) {
    const std::vector<Trajectory> t{line(0, 5)};
    EXPECT_THROW(make_windows(t, 0, 3, 1), std::invalid_argument);
    EXPECT_THROW(make_windows(t, 3, 3, 0), std::invalid_argument);
    Trajectory bad = line(0, 3);
    bad[2].frame = 1;
    EXPECT_THROW(make_windows(std::vector<Trajectory>{bad}, 3, 3, 1), std::invalid_argument);
}

TEST(GroupTrajectories, SortsAndNormalizes) {
    const std::vector<MotRecord> r{{2, 5, {100, 50, 20, 40, 1}}, {0, 5, {90, 50, 20, 40, 1}}, {1, 3, {0, 0, 10, 10, 1}}};
    const auto t = group_trajectories(r, {200.0, 100.0});
    ASSERT_EQ(t.size(), 2u);
    ASSERT_EQ(t[0].size(), 1u);
    ASSERT_EQ(t[1].size(), 2u);
    EXPECT_EQ(t[1][0].frame, 0);
    EXPECT_DOUBLE_EQ(t[1][0].box.x, 0.45);
    EXPECT_DOUBLE_EQ(t[1][1].box.h, 0.4);
    const std::vector<MotRecord> far{{0, 1, {1000, 0, 10, 10, 1}}};
    EXPECT_THROW(group_trajectories(far, {200.0, 100.0}), std::invalid_argument);
}

TEST(Augment, IdentityConfigLeavesWindowUnchanged) {
    TrainingWindow w;
    const Trajectory t = line(0, 12);
    w.input.assign(t.begin(), t.begin() + 10);
    w.target.assign(t.begin() + 10, t.end());
    std::mt19937_64 rng(1);
    const TrainingWindow a = augment(w, AugmentationConfig::none(), rng);
    EXPECT_EQ(a.input, w.input);
    EXPECT_EQ(a.target, w.target);
}

TEST(Augment, LastPointSurvivesHeavyMasking) {
    TrainingWindow w;
    const Trajectory t = line(0, 11);
    w.input.assign(t.begin(), t.begin() + 10);
    w.target.assign(t.begin() + 10, t.end());
    std::mt19937_64 rng(2);
    for (int k = 0; k < 500; ++k) {
        const TrainingWindow a = augment(w, {0.0, 0.99}, rng);
        ASSERT_GE(a.input.size(), 1u);
        EXPECT_EQ(a.input.back(), w.input.back());
        EXPECT_EQ(a.target, w.target);
    }
}

TEST(Augment, NoiseStdMatchesScale) {
    TrainingWindow w;
    w.input = {{0, {0.3, 0.3, 0.1, 0.2, 1.0}}};
    w.target = {{1, {0.3, 0.3, 0.1, 0.2, 1.0}}};
    std::mt19937_64 rng(3);
    double sum = 0.0, sq = 0.0;
    const int n = 1000;
    for (int k = 0; k < n; ++k) {
        const double d = (augment(w, {0.05, 0.0}, rng).input[0].box.x - 0.3) / 0.1;
        sum += d;
        sq += d * d;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(sd, 0.05, 0.005);
}

TEST(Augment, ConfigValidation) {
    EXPECT_THROW((AugmentationConfig{-0.1, 0.0}.validate()), std::invalid_argument);
    EXPECT_THROW((AugmentationConfig{0.0, 1.0}.validate()), std::invalid_argument);
    EXPECT_NO_THROW(AugmentationConfig{}.validate());
}

TEST(MakeSample, ShapesAndMask) {
    const TransFilterModel m(kToyModel, FeatureStats::identity(), 1);
    TrainingWindow w;
    const Trajectory t = line(0, 6);
    w.input.assign(t.begin(), t.begin() + 3);
    w.target.assign(t.begin() + 3, t.end());
    std::mt19937_64 rng(4);
    const TrainingSample s = make_sample(w, m, AugmentationConfig::none(), rng);
    EXPECT_EQ(s.input.rows(), 3);
    EXPECT_EQ(s.target.rows(), kToyModel.horizon);
    EXPECT_EQ(s.valid_steps, 3);
    EXPECT_EQ(s.observations.rows(), 3);
    EXPECT_EQ(s.target.bottomRows(kToyModel.horizon - 3).norm(), 0.0);
    EXPECT_NEAR(s.target(1, 0), 0.004, 1e-15);
    EXPECT_EQ(s.observations.leftCols(4), s.target.topRows(3));
}

TEST(TrainConfig, ScheduleAndValidation) {
    TrainConfig c;
    EXPECT_DOUBLE_EQ(c.learning_rate_at(0), 5e-5 / 4);
    EXPECT_DOUBLE_EQ(c.learning_rate_at(3), 5e-5);
    EXPECT_DOUBLE_EQ(c.learning_rate_at(7), 5e-5);
    EXPECT_NEAR(c.learning_rate_at(8), 5e-6, 1e-20);
    EXPECT_NEAR(c.learning_rate_at(15), 5e-7, 1e-20);
    for (int e = 1; e < 16; ++e) {
        if (e >= c.warmup_epochs) EXPECT_LE(c.learning_rate_at(e), c.learning_rate_at(e - 1));
    }
    TrainConfig bad;
    bad.huber_delta = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = {};
    bad.epochs = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
    std::mt19937_64 rng(5);
    const auto windows = make_windows(toy_tracks(rng, 4, 40), 8, 8, 4);
    TransFilterModel m(kToyModel, fit_stats(std::span<const TrainingWindow>(windows)), 3);
    TrainConfig c = toy_train(4);
    c.learning_rate = 0.0;
    const auto r = train(m, windows, c, AugmentationConfig::none());
    ASSERT_EQ(r.epoch_loss.size(), 4u);
    for (double l : r.epoch_loss) EXPECT_NEAR(l, r.epoch_loss[0], 1e-9);
}

TEST(Train, SameSeedSameHistory) {
    std::mt19937_64 rng(6);
    const auto windows = make_windows(toy_tracks(rng, 4, 40), 8, 8, 4);
    const FeatureStats st = fit_stats(std::span<const TrainingWindow>(windows), kToyAug, 7);
    TransFilterModel a(kToyModel, st, 3), b(kToyModel, st, 3);
    const auto ra = train(a, windows, toy_train(3), kToyAug);
    const auto rb = train(b, windows, toy_train(3), kToyAug);
    EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
    std::vector<double> calls;
    TransFilterModel c(kToyModel, st, 3);
    train(c, windows, toy_train(3), kToyAug, [&](int epoch, double loss) {
        EXPECT_EQ(epoch, static_cast<int>(calls.size()) + 1);
        calls.push_back(loss);
    });
    EXPECT_EQ(calls, ra.epoch_loss);
}

TEST(Train, DivergenceNamesTheEpoch) {
    std::mt19937_64 rng(7);
    const auto windows = make_windows(toy_tracks(rng, 2, 30), 8, 8, 4);
    TransFilterModel m(kToyModel, fit_stats(std::span<const TrainingWindow>(windows)), 3);
    m.weights().head2.bias(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        train(m, windows, toy_train(2), AugmentationConfig::none());
        FAIL() << "expected divergence";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(train(m, std::vector<TrainingWindow>{}, toy_train(1), AugmentationConfig::none()),
                 std::invalid_argument);
}

TEST(ToyTraining, LossDropsBelowQuarterOfFirstEpoch) {
    const auto& h = toy_models().clean_history.epoch_loss;
    ASSERT_EQ(h.size(), 30u);
    EXPECT_LT(h.back(), 0.25 * h.front()) << "first " << h.front() << " last " << h.back();
}

TEST(ToyTraining, StationaryHistoryPredictsConstantBox) {
    const TransFilterModel& m = toy_models().clean;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.25, 0.6);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const BoundingBox b{u(rng), u(rng), 0.08, 0.15, 1.0};
        std::vector<TimedBox> h;
        for (int i = 0; i < kToyModel.history; ++i) h.push_back({i, b});
        for (const auto& p : m.predict(h, kToyModel.horizon)) {
            worst = std::max({worst, std::abs(p.x - b.x), std::abs(p.y - b.y), std::abs(p.w - b.w),
                              std::abs(p.h - b.h)});
        }
    }
    EXPECT_LT(worst, 0.02);
}

TEST(ToyTraining, FilterReproducesNoiselessObservation) {
    const ToyModels& t = toy_models();
    double worst = 0.0;
    for (const auto& w : t.eval_windows) {
        const EncoderContext ctx = t.clean.encode(w.input);
        const TimedBox& obs = w.target.front();
        const BoundingBox f = t.clean.filter(ctx, obs);
        worst = std::max({worst, std::abs(f.x - obs.box.x), std::abs(f.y - obs.box.y), std::abs(f.w - obs.box.w),
                          std::abs(f.h - obs.box.h)});
    }
    EXPECT_LT(worst, 0.05);
}

TEST(ToyTraining, FilterReducesObservationNoise) {
    const ToyModels& t = toy_models();
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    double raw = 0.0, corrected = 0.0;
    const int trials = 500;
    for (int k = 0; k < trials; ++k) {
        const auto& w = t.eval_windows[static_cast<std::size_t>(k) % t.eval_windows.size()];
        const TimedBox& truth = w.target.front();
        TimedBox noisy = truth;
        noisy.box.x += 0.05 * truth.box.w * g(rng);
        noisy.box.y += 0.05 * truth.box.h * g(rng);
        noisy.box.w += 0.05 * truth.box.w * g(rng);
        noisy.box.h += 0.05 * truth.box.h * g(rng);
        const BoundingBox f = t.augmented.filter(t.augmented.encode(w.input), noisy);
        auto err = [&](const BoundingBox& b) {
            return std::abs(b.x - truth.box.x) + std::abs(b.y - truth.box.y) + std::abs(b.w - truth.box.w) +
                   std::abs(b.h - truth.box.h);
        };
        raw += err(noisy.box);
        corrected += err(f);
    }
    EXPECT_LT(corrected / trials, raw / trials);
}

TEST(ToyTraining, AugmentationHelpsOnNoisyInputs) {
    const ToyModels& t = toy_models();
    std::vector<TrainingWindow> noisy;
    for (std::size_t i = 0; i < t.eval_windows.size(); ++i) {
        std::mt19937_64 rng = window_rng(2024, 0, i);
        noisy.push_back(augment(t.eval_windows[i], {0.05, 0.0}, rng));
    }
    const double with_aug = prediction_ade(t.augmented, noisy, kToyModel.horizon);
    const double without = prediction_ade(t.clean, noisy, kToyModel.horizon);
    EXPECT_LT(with_aug, without) << "augmented " << with_aug << " clean " << without;
}

TEST(ToyTraining, BeatsKalmanOnSinusoids) {
    const ToyModels& t = toy_models();
    EXPECT_LT(prediction_ade(t.clean, t.eval_windows, kToyModel.horizon),
              kalman_prediction_ade(t.eval_windows, kToyModel.horizon));
}
