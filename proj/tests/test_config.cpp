#include <gtest/gtest.h>

#include "dmsort/config.hpp"

using namespace dmsort;

TEST(KeyValues, ParsesCommentsAndBlanks) {
    const auto kv = parse_key_values("# header\n\n a = 1 \nb=two # trailing\n");
    EXPECT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv.at("a"), "1");
    EXPECT_EQ(kv.at("b"), "two");
}

TEST(KeyValues, ErrorsNameTheLine) {
    try {
        parse_key_values("a=1\nnot a pair\n", "cfg");
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("cfg:2"), std::string::npos);
    }
    EXPECT_THROW(parse_key_values("a=1\na=2\n"), std::runtime_error);
    EXPECT_THROW(parse_key_values("=1\n"), std::runtime_error);
}

TEST(TrackerConfigFile, DefaultsAreTheDanceTrackColumn) {
    const TrackerConfig c = tracker_config_from({});
    EXPECT_DOUBLE_EQ(c.detection_confidence_threshold, 0.6);
    EXPECT_EQ(c.track_max_time_lost, 30);
    EXPECT_EQ(c.track_init_time, 3);
    EXPECT_DOUBLE_EQ(c.track_init_confidence, 0.7);
    EXPECT_DOUBLE_EQ(c.ha.dtiou.upper, 0.5);
    EXPECT_DOUBLE_EQ(c.ha.dtiou.lower, 0.25);
    EXPECT_DOUBLE_EQ(c.ha.dtiou.decay, 0.2);
    EXPECT_DOUBLE_EQ(c.ha.weights.hpc, 2.0);
    EXPECT_DOUBLE_EQ(c.ha.weights.atcm, 1.5);
    EXPECT_DOUBLE_EQ(c.ha.weights.appearance, 2.0);
    EXPECT_DOUBLE_EQ(c.la.dtiou.upper, 0.5);
    EXPECT_DOUBLE_EQ(c.na.dtiou.upper, 0.25);
    EXPECT_DOUBLE_EQ(c.la.weights.atcm, 1.0);
    EXPECT_DOUBLE_EQ(c.na.weights.atcm, 0.0);
    EXPECT_TRUE(c.uses_appearance());
}

TEST(TrackerConfigFile, OverridesAndRoundTrip) {
    const TrackerConfig c = tracker_config_from(parse_key_values(
        "track_max_time_lost=12\nha.reid.weight=0\napply_noise_filtering=yes\nla.iou.threshold=0.4\n"
        "buffer.policy=movesort\nthreads=4\n"));
    EXPECT_EQ(c.track_max_time_lost, 12);
    EXPECT_FALSE(c.uses_appearance());
    EXPECT_TRUE(c.apply_noise_filtering);
    EXPECT_DOUBLE_EQ(c.la.dtiou.lower, 0.4);
    EXPECT_EQ(c.buffer_policy, BufferPolicy::movesort);
    EXPECT_EQ(c.threads, 4);
    const TrackerConfig back = tracker_config_from(parse_key_values(to_key_values(c)));
    EXPECT_EQ(to_key_values(back), to_key_values(c));
}

TEST(TrackerConfigFile, RejectsUnknownKeysAndBadValues) {
    auto err = [](const std::string& text) {
        try {
            tracker_config_from(parse_key_values(text));
        } catch (const std::exception& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(err("ha.dtiou.treshold_upper=0.5\n").find("treshold_upper"), std::string::npos);
    EXPECT_NE(err("track_max_time_lost=ten\n").find("track_max_time_lost"), std::string::npos);
    EXPECT_NE(err("use_cmc=maybe\n").find("use_cmc"), std::string::npos);
    EXPECT_FALSE(err("detection_confidence_threshold=1.5\n").empty());
    EXPECT_FALSE(err("ha.enabled=no\n").empty());
    EXPECT_FALSE(err("ha.dtiou.threshold_lower=0.9\n").empty());
    EXPECT_FALSE(err("threads=0\n").empty());
    EXPECT_FALSE(err("ha.atcm.weight=-1\n").empty());
}

TEST(TrainingConfigFile, OverridesAndValidation) {
    const TrainingSetup s = training_setup_from(
        parse_key_values("epochs=3\nlearning_rate=0.001\nmodel.d_model=16\nmodel.n_heads=2\nwindow.stride=4\n"));
    EXPECT_EQ(s.train.epochs, 3);
    EXPECT_DOUBLE_EQ(s.train.learning_rate, 0.001);
    EXPECT_EQ(s.model.d_model, 16);
    EXPECT_EQ(s.window_stride, 4);
    EXPECT_EQ(to_key_values(training_setup_from(parse_key_values(to_key_values(s)))), to_key_values(s));
    EXPECT_THROW(training_setup_from(parse_key_values("epochs=0\n")), std::invalid_argument);
    EXPECT_THROW(training_setup_from(parse_key_values("model.n_heads=3\n")), std::invalid_argument);
    EXPECT_THROW(training_setup_from(parse_key_values("resume=yes\n")), std::invalid_argument);
}

TEST(ScenarioConfigFile, ParsesKindsAndOcclusions) {
    const ScenarioConfig s = scenario_config_from(
        parse_key_values("frames=120\nmotion_kinds=linear, circular\nocclusions=0:10:5,1:20:30\nseed=7\n"));
    EXPECT_EQ(s.n_frames, 120);
    ASSERT_EQ(s.kinds.size(), 2u);
    EXPECT_EQ(s.kinds[1], MotionKind::circular);
    ASSERT_EQ(s.occlusions.size(), 2u);
    EXPECT_EQ(s.occlusions[1].duration, 30);
    EXPECT_EQ(s.seed, 7u);
    EXPECT_EQ(to_key_values(scenario_config_from(parse_key_values(to_key_values(s)))), to_key_values(s));
    EXPECT_THROW(scenario_config_from(parse_key_values("occlusions=0-10-5\n")), std::invalid_argument);
    EXPECT_THROW(scenario_config_from(parse_key_values("motion_kinds=zigzag\n")), std::invalid_argument);
    EXPECT_THROW(scenario_config_from(parse_key_values("occlusions=0:190:20\n")), std::invalid_argument);
}
