#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "dmsort/metrics.hpp"
#include "dmsort/synth.hpp"
#include "dmsort/tracker.hpp"
#include "reference_sort.hpp"

using namespace dmsort;

namespace {

std::shared_ptr<const MotionModel> kalman() { return std::make_shared<KalmanMotionModel>(); }

SequenceInput single_object(int frames) {
    SequenceInput in;
    in.n_frames = frames;
    in.image = {640, 480};
    for (int f = 0; f < frames; ++f) in.detections[f] = {{100.0 + 2 * f, 100.0, 40.0, 80.0, 0.9}};
    return in;
}

SequenceInput from_synth(const SyntheticSequence& s, bool embeddings) {
    SequenceInput in;
    in.n_frames = s.n_frames;
    in.image = {static_cast<double>(s.image_width), static_cast<double>(s.image_height)};
    in.detections = detection_frames(s);
    if (embeddings) in.embeddings = embedding_table(s);
    if (s.cmc) {
        CmcTable t;
        for (int f = 1; f < s.n_frames; ++f) t.set(f, (*s.cmc)[f]);
        in.cmc = t;
    }
    return in;
}

ScenarioConfig crossing_scenario() {
    ScenarioConfig c;
    c.image_width = 800;
    c.image_height = 400;
    c.n_frames = 80;
    ObjectSpec a, b;
    a.kind = b.kind = MotionKind::linear;
    a.x0 = 100;
    b.x0 = 620;
    a.y0 = b.y0 = 120;
    a.w = b.w = 60;
    a.h = b.h = 150;
    a.vx = 6.0;
    b.vx = -6.0;
    c.objects = {a, b};
    // Hide both while they overlap so that motion alone cannot tell them apart.
    c.occlusions = {{0, 36, 10}, {1, 36, 10}};
    c.conf_low = c.conf_high;
    c.embedding_noise = 0.02;
    c.seed = 4;
    return c;
}

/// No overlap gate in the first cascade, for runs with an untrained filter.
TrackerConfig ungated() {
    TrackerConfig c = TrackerConfig::dancetrack();
    c.ha.dtiou = {0.0, 0.0, 0.0, 0.0, false};
    c.ha.weights.appearance = 0.0;
    return c;
}

}  // namespace

TEST(Tracker, FirstEmissionAfterInitTime) {
    const auto out = run_sequence(TrackerConfig::dancetrack(), kalman(), single_object(10));
    ASSERT_EQ(out.size(), 8u);
    EXPECT_EQ(out.front().frame, 2);
    EXPECT_EQ(out.back().frame, 9);
    for (const auto& r : out) EXPECT_EQ(r.id, 1);
}

TEST(Tracker, EmitsRawDetectionWithoutFiltering) {
    const SequenceInput in = single_object(6);
    const auto out = run_sequence(TrackerConfig::dancetrack(), kalman(), in);
    for (const auto& r : out) EXPECT_EQ(r.box, in.detections.at(r.frame)[0]);
    TrackerConfig c = TrackerConfig::dancetrack();
    c.apply_noise_filtering = true;
    SequenceInput jittered = in;
    jittered.detections[4][0].x += 7.0;
    const auto filtered = run_sequence(c, kalman(), jittered);
    bool differs = false;
    for (const auto& r : filtered) differs = differs || r.box.x != jittered.detections.at(r.frame)[0].x;
    EXPECT_TRUE(differs);
}

TEST(Tracker, EmptySequence) {
    SequenceInput in;
    in.image = {640, 480};
    EXPECT_TRUE(run_sequence(TrackerConfig::dancetrack(), kalman(), in).empty());
}

TEST(Tracker, TracksExpireAfterMaxTimeLost) {
    TrackerConfig c = TrackerConfig::dancetrack();
    c.track_max_time_lost = 5;
    Tracker t(c, kalman(), {640, 480});
    int f = 0;
    for (; f < 5; ++f) t.step(f, {{100.0, 100.0, 40.0, 80.0, 0.9}});
    ASSERT_EQ(t.tracks().size(), 1u);
    for (int k = 0; k < c.track_max_time_lost; ++k, ++f) {
        EXPECT_TRUE(t.step(f, {}).empty());
        ASSERT_EQ(t.tracks().size(), 1u);
        EXPECT_EQ(t.tracks()[0].status, TrackStatus::lost);
    }
    EXPECT_TRUE(t.step(f, {}).empty());
    EXPECT_TRUE(t.tracks().empty());
}

TEST(Tracker, LostTrackRecoversSameId) {
    Tracker t(TrackerConfig::dancetrack(), kalman(), {640, 480});
    for (int f = 0; f < 6; ++f) t.step(f, {{100.0 + 3 * f, 100.0, 40.0, 80.0, 0.9}});
    for (int f = 6; f < 9; ++f) t.step(f, {});
    const auto out = t.step(9, {{127.0, 100.0, 40.0, 80.0, 0.9}});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].id, 1);
    EXPECT_EQ(t.tracks()[0].frames_since_seen, 0);
}

TEST(Tracker, UnconfirmedTrackDiesOnFirstMiss) {
    Tracker t(TrackerConfig::dancetrack(), kalman(), {640, 480});
    t.step(0, {{100.0, 100.0, 40.0, 80.0, 0.9}});
    ASSERT_EQ(t.tracks().size(), 1u);
    EXPECT_EQ(t.tracks()[0].status, TrackStatus::fresh);
    t.step(1, {});
    EXPECT_TRUE(t.tracks().empty());
}

TEST(Tracker, ConfidenceRules) {
    Tracker t(TrackerConfig::dancetrack(), kalman(), {640, 480});
    // Below the ignore level, low, high but under the init level, high.
    t.step(0, {{10, 10, 40, 80, 0.05}, {100, 10, 40, 80, 0.4}, {200, 10, 40, 80, 0.65}, {300, 10, 40, 80, 0.9}});
    ASSERT_EQ(t.tracks().size(), 1u);
    EXPECT_DOUBLE_EQ(t.tracks()[0].current.x, 300.0);
}

TEST(Tracker, LowConfidenceDetectionKeepsTrackAlive) {
    Tracker t(TrackerConfig::dancetrack(), kalman(), {640, 480});
    for (int f = 0; f < 4; ++f) t.step(f, {{100.0, 100.0, 40.0, 80.0, 0.9}});
    const auto out = t.step(4, {{100.0, 100.0, 40.0, 80.0, 0.3}});
    ASSERT_EQ(out.size(), 1u);
    ASSERT_EQ(t.last_matches().size(), 1u);
    EXPECT_EQ(t.last_matches()[0].cascade, Cascade::low);
}

TEST(Tracker, InputErrors) {
    Tracker t(TrackerConfig::dancetrack(), kalman(), {640, 480});
    t.step(3, {});
    EXPECT_THROW(t.step(3, {}), std::invalid_argument);
    EXPECT_THROW(t.step(2, {}), std::invalid_argument);
    const std::vector<std::optional<Embedding>> one(1);
    EXPECT_THROW(t.step(4, {}, &one), std::invalid_argument);
    EXPECT_THROW(t.step(5, {{0, 0, -1, 4, 0.9}}), std::invalid_argument);
}

TEST(Tracker, IdsIncreaseAndEmittedTracksAreActive) {
    ScenarioConfig sc;
    sc.n_objects = 8;
    sc.random_occlusions = 2;
    sc.noise_scale = 0.03;
    sc.seed = 21;
    const SequenceInput in = from_synth(generate(sc), true);
    Tracker t(TrackerConfig::dancetrack(), kalman(), in.image);
    int max_id = 0;
    std::set<int> seen;
    for (int f = 0; f < in.n_frames; ++f) {
        const auto out = t.step(f, in.detections.count(f) ? in.detections.at(f) : std::vector<BoundingBox>{});
        std::map<int, TrackStatus> status;
        for (const auto& tr : t.tracks()) {
            status[tr.id] = tr.status;
            if (!seen.count(tr.id)) {
                EXPECT_GT(tr.id, max_id);
                max_id = tr.id;
                seen.insert(tr.id);
            }
            if (tr.status == TrackStatus::lost) EXPECT_GT(tr.frames_since_seen, 0);
        }
        for (const auto& r : out) {
            ASSERT_TRUE(status.count(r.id));
            EXPECT_EQ(status[r.id], TrackStatus::active);
        }
    }
}

TEST(Tracker, AppearanceSeparatesCrossingObjects) {
    const SyntheticSequence s = generate(crossing_scenario());
    const auto gt = ground_truth_records(s);
    const auto with = run_sequence(TrackerConfig::dancetrack(), kalman(), from_synth(s, true));
    const ClearMetrics m = clear_metrics(gt, with);
    EXPECT_EQ(m.idsw, 0);
    EXPECT_GT(m.matches, 0);
    EXPECT_GT(identity_metrics(gt, with).idf1, 0.9);
}

TEST(Tracker, DeterministicAcrossRunsAndThreadCounts) {
    ScenarioConfig sc;
    sc.n_objects = 10;
    sc.noise_scale = 0.04;
    sc.random_occlusions = 1;
    sc.seed = 8;
    const SequenceInput in = from_synth(generate(sc), true);
    TrackerConfig c = TrackerConfig::dancetrack();
    const std::string a = format_results(run_sequence(c, kalman(), in));
    EXPECT_EQ(a, format_results(run_sequence(c, kalman(), in)));
    c.threads = 4;
    EXPECT_EQ(a, format_results(run_sequence(c, kalman(), in)));

    auto model = std::make_shared<TransFilterModel>(TransFilterConfig{}, FeatureStats::identity(), 3);
    c = ungated();
    const std::string t1 = format_results(run_sequence(c, std::make_shared<TransFilterMotionModel>(model), in));
    EXPECT_NE(t1.find('\n'), std::string::npos);
    c.threads = 3;
    EXPECT_EQ(t1, format_results(run_sequence(c, std::make_shared<TransFilterMotionModel>(model), in)));
}

TEST(Tracker, EncoderRunsAtMostOncePerOcclusion) {
    auto model = std::make_shared<TransFilterModel>(TransFilterConfig{}, FeatureStats::identity(), 5);
    auto motion = std::make_shared<TransFilterMotionModel>(model);
    TrackerConfig c = ungated();
    c.track_max_time_lost = 60;
    Tracker t(c, motion, {640, 480});
    int f = 0;
    for (; f < 12; ++f) t.step(f, {{100.0, 100.0, 40.0, 80.0, 0.9}, {400.0, 200.0, 40.0, 80.0, 0.9}});
    ASSERT_EQ(t.tracks().size(), 2u);
    const long before = motion->encoder_passes();
    for (int k = 0; k < 40; ++k, ++f) t.step(f, {});
    ASSERT_EQ(t.tracks().size(), 2u);
    EXPECT_LE(motion->encoder_passes() - before, 2);
    EXPECT_GE(motion->encoder_passes() - before, 1);
}

TEST(Tracker, CameraCompensationModesAgree) {
    ScenarioConfig sc;
    sc.n_objects = 5;
    sc.camera_step = 4.0;
    sc.seed = 12;
    const SequenceInput in = from_synth(generate(sc), false);
    ASSERT_TRUE(in.cmc.has_value());
    TrackerConfig c = ungated();
    c.use_cmc = true;
    auto model = std::make_shared<TransFilterModel>(TransFilterConfig{}, FeatureStats::identity(), 6);
    const auto eager = run_sequence(c, std::make_shared<TransFilterMotionModel>(model), in);
    c.lazy_cmc = true;
    const auto lazy = run_sequence(c, std::make_shared<TransFilterMotionModel>(model), in);
    ASSERT_FALSE(eager.empty());
    ASSERT_EQ(eager.size(), lazy.size());
    for (std::size_t i = 0; i < eager.size(); ++i) {
        EXPECT_EQ(eager[i].id, lazy[i].id);
        EXPECT_NEAR(eager[i].box.x, lazy[i].box.x, 1e-6);
    }
}

TEST(Tracker, ReducesToSortOnRandomScenes) {
    std::mt19937_64 rng(77);
    for (int scene = 0; scene < 25; ++scene) {
        const auto frames = testutil::random_sort_scene(rng);
        testutil::ReferenceSort ref(0.3, 3);
        Tracker t(testutil::sort_equivalent_config(0.3, 3), kalman(), {640, 480});
        for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
            const auto expected = ref.step(frames[f]);
            t.step(f, frames[f]);
            std::set<std::pair<int, int>> got;
            for (const auto& m : t.last_matches()) got.insert({m.track_id, m.detection});
            ASSERT_EQ(got, expected) << "scene " << scene << " frame " << f;
        }
    }
}
