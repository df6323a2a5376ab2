#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "dmsort/io.hpp"
#include "dmsort/metrics.hpp"
#include "helpers.hpp"

using namespace dmsort;
using dmsort::testutil::slurp;
using dmsort::testutil::temp_dir;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out, err;
};

CliRun cli(const std::string& args, const fs::path& scratch) {
    const fs::path o = scratch / "stdout.txt", e = scratch / "stderr.txt";
    const std::string cmd = std::string(DMSORT_CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// A small dataset shared by the tests below.
const fs::path& dataset() {
    static const fs::path root = [] {
        const fs::path d = temp_dir("cli-data");
        write_text(d / "scenario.cfg", "frames=60\nobjects=4\nnoise_scale=0.02\nrandom_occlusions=1\n");
        const CliRun r = cli("synth --scenario-config " + (d / "scenario.cfg").string() + " --out-dir " +
                              (d / "data").string() + " --sequences 2 --seed 5",
                          d);
        EXPECT_EQ(r.code, 0) << r.err;
        return d;
    }();
    return root;
}

}  // namespace

TEST(Cli, SingleObjectTrackGivesOneId) {
    const auto d = temp_dir("cli-single");
    std::string det;
    for (int f = 1; f <= 20; ++f) det += std::to_string(f) + ",-1," + std::to_string(100 + 3 * f) + ",50,40,80,0.95\n";
    write_text(d / "det.txt", det);
    write_text(d / "noreid.cfg", "ha.reid.weight=0\n");
    const CliRun r = cli("--config " + (d / "noreid.cfg").string() + " track --dets " + (d / "det.txt").string() +
                          " --image-size 640x480 --out " + (d / "res.txt").string(),
                      d);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = read_mot(d / "res.txt");
    ASSERT_FALSE(res.empty());
    for (const auto& rec : res) EXPECT_EQ(rec.id, 1);
    EXPECT_NE(r.out.find("tracks=1"), std::string::npos);
}

TEST(Cli, MissingEmbeddingsNamesTheFlag) {
    const auto d = temp_dir("cli-noemb");
    write_text(d / "det.txt", "1,-1,10,10,40,80,0.9\n");
    const CliRun r = cli("track --dets " + (d / "det.txt").string() + " --image-size 640x480 --out " +
                          (d / "res.txt").string(),
                      d);
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("--embeddings"), std::string::npos);
}

TEST(Cli, TrackIsReproducibleAcrossRunsAndThreads) {
    const fs::path& d = dataset();
    write_text(d / "t4.cfg", "threads=4\n");
    const CliRun a = cli("track --dets " + (d / "data").string() + " --out " + (d / "res-a").string(), d);
    const CliRun b = cli("track --dets " + (d / "data").string() + " --out " + (d / "res-b").string(), d);
    const CliRun c = cli("--config " + (d / "t4.cfg").string() + " track --dets " + (d / "data").string() + " --out " +
                          (d / "res-c").string(),
                      d);
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    ASSERT_EQ(c.code, 0) << c.err;
    for (const char* seq : {"synth-0001.txt", "synth-0002.txt"}) {
        const std::string ref = slurp(d / "res-a" / seq);
        EXPECT_FALSE(ref.empty());
        EXPECT_EQ(ref, slurp(d / "res-b" / seq));
        EXPECT_EQ(ref, slurp(d / "res-c" / seq));
    }
}

TEST(Cli, SynthIsByteIdenticalUnderSeed) {
    const fs::path& d = dataset();
    const CliRun r = cli("synth --scenario-config " + (d / "scenario.cfg").string() + " --out-dir " +
                          (d / "again").string() + " --sequences 2 --seed 5",
                      d);
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"gt/gt.txt", "det/det.txt", "embeddings.bin", "seqinfo.ini"}) {
        EXPECT_EQ(slurp(d / "data" / "synth-0001" / f), slurp(d / "again" / "synth-0001" / f)) << f;
    }
    EXPECT_NE(slurp(d / "data" / "synth-0001" / "det/det.txt"), slurp(d / "data" / "synth-0002" / "det/det.txt"));
}

TEST(Cli, EvalReportsIdentityAndEmpty) {
    const fs::path& d = dataset();
    const fs::path gt = d / "data" / "synth-0001" / "gt" / "gt.txt";
    const CliRun same = cli("eval --gt " + gt.string() + " --results " + gt.string(), d);
    ASSERT_EQ(same.code, 0) << same.err;
    EXPECT_NE(same.out.find("mota=1.000000"), std::string::npos);
    EXPECT_NE(same.out.find("idf1=1.000000"), std::string::npos);
    write_text(d / "empty.txt", "");
    const CliRun empty = cli("eval --gt " + gt.string() + " --results " + (d / "empty.txt").string(), d);
    ASSERT_EQ(empty.code, 0) << empty.err;
    EXPECT_NE(empty.out.find("idf1=0.000000"), std::string::npos);
}

TEST(Cli, EvalReproducesHandFixture) {
    const auto d = temp_dir("cli-fixture");
    std::vector<MotRecord> gt, pred;
    auto lane = [](int l, int f) { return BoundingBox{100.0 * l + 2.0 * f, 50.0, 40.0, 80.0, 1.0}; };
    for (int f = 0; f < 5; ++f) {
        gt.push_back({f, 1, lane(0, f)});
        gt.push_back({f, 2, lane(3, f)});
        pred.push_back({f, f < 3 ? 10 : 11, lane(0, f)});
        if (f < 4) pred.push_back({f, 20, lane(3, f)});
    }
    pred.push_back({2, 30, lane(7, 2)});
    write_results(d / "gt.txt", gt);
    write_results(d / "pred.txt", pred);
    const CliRun r = cli("eval --gt " + (d / "gt.txt").string() + " --results " + (d / "pred.txt").string(), d);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("mota=0.700000"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("idsw=1"), std::string::npos);
}

TEST(Cli, TrainInspectAndTrackWithModel) {
    const fs::path& d = dataset();
    write_text(d / "train.cfg",
               "epochs=1\nbatch_size=16\nlearning_rate=0.001\nmodel.d_model=16\nmodel.n_heads=2\nmodel.n_layers=1\n"
               "model.ff_dim=32\nmodel.history=8\nmodel.horizon=8\nwindow.stride=4\nwarmup_epochs=1\n");
    const fs::path model = d / "model.bin";
    const CliRun t = cli("train-filter --gt-dir " + (d / "data").string() + " --train-config " +
                          (d / "train.cfg").string() + " --out-model " + model.string(),
                      d);
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_TRUE(fs::exists(model));
    EXPECT_EQ(slurp(fs::path(model.string() + ".loss.txt")).substr(0, 2), "1 ");

    const CliRun i = cli("inspect-model --model " + model.string(), d);
    ASSERT_EQ(i.code, 0) << i.err;
    EXPECT_NE(i.out.find("d_model=16"), std::string::npos);
    EXPECT_NE(i.out.find("parameters="), std::string::npos);

    const CliRun a = cli("track --dets " + (d / "data").string() + " --model " + model.string() + " --out " +
                          (d / "tf-a").string(),
                      d);
    const CliRun b = cli("track --dets " + (d / "data").string() + " --model " + model.string() + " --out " +
                          (d / "tf-b").string(),
                      d);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_NE(a.out.find("filter=transfilter"), std::string::npos);
    EXPECT_EQ(slurp(d / "tf-a" / "synth-0001.txt"), slurp(d / "tf-b" / "synth-0001.txt"));

    std::string bytes = slurp(model);
    bytes[4] = static_cast<char>(bytes[4] + 7);
    write_text(d / "bad-model.bin", bytes);
    const CliRun bad = cli("inspect-model --model " + (d / "bad-model.bin").string(), d);
    EXPECT_NE(bad.code, 0);
    EXPECT_NE(bad.err.find("version"), std::string::npos);
}

TEST(Cli, TrainRejectsZeroEpochsAndResume) {
    const fs::path& d = dataset();
    write_text(d / "zero.cfg", "epochs=0\n");
    const CliRun z = cli("train-filter --gt-dir " + (d / "data").string() + " --train-config " +
                          (d / "zero.cfg").string() + " --out-model " + (d / "z.bin").string(),
                      d);
    EXPECT_NE(z.code, 0);
    EXPECT_NE(z.err.find("epochs"), std::string::npos);
    const CliRun r = cli("train-filter --resume --gt-dir " + (d / "data").string() + " --out-model " +
                          (d / "r.bin").string(),
                      d);
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("resume"), std::string::npos);
}

TEST(Cli, UsageErrorsExitNonZero) {
    const auto d = temp_dir("cli-usage");
    EXPECT_NE(cli("", d).code, 0);
    EXPECT_NE(cli("track --out x.txt", d).code, 0);
    EXPECT_NE(cli("track --dets " + (d / "missing.txt").string() + " --image-size 1x1 --out x.txt", d).code, 0);
    EXPECT_NE(cli("eval --gt " + (d / "missing").string() + " --results x", d).code, 0);
}
