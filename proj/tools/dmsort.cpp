// dmsort command-line front end.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dmsort/config.hpp"
#include "dmsort/io.hpp"
#include "dmsort/metrics.hpp"
#include "dmsort/synth.hpp"
#include "dmsort/tracker.hpp"
#include "dmsort/training.hpp"
#include "dmsort/transfilter.hpp"

namespace fs = std::filesystem;
using namespace dmsort;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool timing = false;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sequence directories below `root` (those holding `marker`), sorted by name.
std::vector<fs::path> sequence_dirs(const fs::path& root, const fs::path& marker) {
    std::vector<fs::path> out;
    if (fs::exists(root / marker)) return {root};
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory() && fs::exists(e.path() / marker)) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw UsageError("no sequences with " + marker.string() + " under " + root.string());
    return out;
}

ImageSize image_size_for(const std::optional<fs::path>& seqinfo, const std::string& fallback) {
    if (seqinfo) {
        if (const auto info = read_seqinfo(*seqinfo)) return {double(info->image_width), double(info->image_height)};
    }
    if (!fallback.empty()) {
        int w = 0, h = 0;
        char x = 0;
        std::istringstream is(fallback);
        if (!(is >> w >> x >> h) || x != 'x' || w <= 0 || h <= 0) {
            throw UsageError("--image-size expects WIDTHxHEIGHT, got '" + fallback + "'");
        }
        return {double(w), double(h)};
    }
    throw UsageError("image size unknown: provide seqinfo.ini or --image-size");
}

EmbeddingTable load_embeddings(const fs::path& p) {
    return p.extension() == ".csv" ? read_embeddings_csv(p) : read_embeddings(p);
}

void write_overlays(const fs::path& dir, const std::vector<MotRecord>& results, const FrameDetections& dets,
                    const ImageSize& image, int n_frames) {
    fs::create_directories(dir);
    std::map<int, std::vector<const MotRecord*>> by_frame;
    for (const auto& r : results) by_frame[r.frame].push_back(&r);
    static const char* palette[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
                                    "#42d4f4", "#f032e6", "#bfef45", "#469990", "#9a6324"};
    for (int f = 0; f < n_frames; ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "%06d.svg", f + 1);
        std::ofstream os(dir / name);
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << image.width << "\" height=\"" << image.height
           << "\" viewBox=\"0 0 " << image.width << " " << image.height << "\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"#202020\"/>\n";
        if (const auto it = dets.find(f); it != dets.end()) {
            for (const auto& d : it->second) {
                os << "<rect x=\"" << d.x << "\" y=\"" << d.y << "\" width=\"" << d.w << "\" height=\"" << d.h
                   << "\" fill=\"none\" stroke=\"#808080\" stroke-dasharray=\"4 3\"/>\n";
            }
        }
        if (const auto it = by_frame.find(f); it != by_frame.end()) {
            for (const auto* r : it->second) {
                const char* c = palette[r->id % 10];
                os << "<rect x=\"" << r->box.x << "\" y=\"" << r->box.y << "\" width=\"" << r->box.w
                   << "\" height=\"" << r->box.h << "\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n"
                   << "<text x=\"" << r->box.x << "\" y=\"" << r->box.y - 4 << "\" fill=\"" << c
                   << "\" font-size=\"14\" font-family=\"monospace\">" << r->id << "</text>\n";
            }
        }
        os << "<text x=\"8\" y=\"20\" fill=\"#ffffff\" font-size=\"16\" font-family=\"monospace\">frame " << f + 1
           << "</text>\n</svg>\n";
    }
}

// ---- track ----

struct TrackArgs {
    std::string dets, embeddings, cmc, model, out, overlay_dir, image_size, seqinfo;
    bool clip = false;
};

struct TrackJob {
    std::string name;
    fs::path dets;
    std::optional<fs::path> embeddings, cmc, seqinfo;
    fs::path out;
    std::optional<fs::path> overlay;
};

std::shared_ptr<const MotionModel> motion_from(const std::string& model_path) {
    if (model_path.empty()) return std::make_shared<KalmanMotionModel>();
    auto model = std::make_shared<TransFilterModel>(TransFilterModel::load(model_path));
    return std::make_shared<TransFilterMotionModel>(std::move(model));
}

int run_track(const Globals& g, const TrackArgs& a) {
    TrackerConfig cfg = g.config.empty() ? TrackerConfig::dancetrack() : tracker_config_from(read_key_values(g.config));
    const auto motion = motion_from(a.model);

    std::vector<TrackJob> jobs;
    if (fs::is_directory(a.dets)) {
        for (const auto& dir : sequence_dirs(a.dets, "det/det.txt")) {
            TrackJob j;
            j.name = dir.filename().string();
            j.dets = dir / "det" / "det.txt";
            if (fs::exists(dir / "embeddings.bin")) j.embeddings = dir / "embeddings.bin";
            else if (fs::exists(dir / "embeddings.csv")) j.embeddings = dir / "embeddings.csv";
            if (fs::exists(dir / "cmc.txt")) j.cmc = dir / "cmc.txt";
            if (fs::exists(dir / "seqinfo.ini")) j.seqinfo = dir / "seqinfo.ini";
            j.out = fs::path(a.out) / (j.name + ".txt");
            if (!a.overlay_dir.empty()) j.overlay = fs::path(a.overlay_dir) / j.name;
            jobs.push_back(j);
        }
    } else {
        TrackJob j;
        j.dets = a.dets;
        j.name = fs::path(a.dets).stem().string();
        if (!a.embeddings.empty()) j.embeddings = a.embeddings;
        if (!a.cmc.empty()) j.cmc = a.cmc;
        if (!a.seqinfo.empty()) {
            j.seqinfo = a.seqinfo;
        } else if (const auto guess = fs::path(a.dets).parent_path().parent_path() / "seqinfo.ini"; fs::exists(guess)) {
            j.seqinfo = guess;
        }
        j.out = a.out;
        if (!a.overlay_dir.empty()) j.overlay = fs::path(a.overlay_dir);
        jobs.push_back(j);
    }
    for (const auto& j : jobs) {
        if (cfg.uses_appearance() && !j.embeddings) {
            throw UsageError("--embeddings is required when ha.reid.weight > 0 (sequence " + j.name + ")");
        }
        if (cfg.use_cmc && !j.cmc) throw UsageError("--cmc is required when use_cmc=yes (sequence " + j.name + ")");
    }

    std::vector<std::string> summaries(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    auto work = [&](std::size_t i) {
        try {
            const TrackJob& j = jobs[i];
            SequenceInput in;
            in.detections = read_detections(j.dets);
            if (j.embeddings) in.embeddings = load_embeddings(*j.embeddings);
            if (j.cmc) in.cmc = read_cmc(*j.cmc);
            in.image = image_size_for(j.seqinfo, a.image_size);
            if (j.seqinfo) in.n_frames = read_seqinfo(*j.seqinfo)->length;
            const auto t0 = std::chrono::steady_clock::now();
            auto results = run_sequence(cfg, motion, in);
            if (a.clip) results = clip_to_image(std::move(results), in.image.width, in.image.height);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            write_results(j.out, results);
            int frames = in.n_frames;
            if (!in.detections.empty()) frames = std::max(frames, in.detections.rbegin()->first + 1);
            if (j.overlay) write_overlays(*j.overlay, results, in.detections, in.image, frames);
            std::vector<int> ids;
            for (const auto& r : results) ids.push_back(r.id);
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s: frames=%d tracks=%zu records=%zu filter=%s", j.name.c_str(), frames,
                          ids.size(), results.size(), motion->name());
            summaries[i] = buf;
            if (g.timing) {
                std::snprintf(buf, sizeof buf, " seconds=%.3f fps=%.1f", secs, secs > 0 ? frames / secs : 0.0);
                summaries[i] += buf;
            }
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs.size(), std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    std::mutex next_mutex;
    std::size_t next = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard lock(next_mutex);
                    if (next >= jobs.size()) return;
                    i = next++;
                }
                work(i);
            }
        });
    }
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        std::cout << summaries[i] << "\n";
    }
    return 0;
}

// ---- train-filter ----

struct TrainArgs {
    std::string gt_dir, train_config, out_model, loss_log, image_size;
    bool resume = false;
};

int run_train(const Globals& g, const TrainArgs& a) {
    if (a.resume) throw UsageError("--resume is not supported: training always starts from a fresh model");
    const std::string cfg_path = !a.train_config.empty() ? a.train_config : g.config;
    TrainingSetup setup = cfg_path.empty() ? TrainingSetup{} : training_setup_from(read_key_values(cfg_path));
    if (g.seed) setup.train.seed = *g.seed;

    std::vector<TrainingWindow> windows;
    int seq_index = 0;
    for (const auto& dir : sequence_dirs(a.gt_dir, "gt/gt.txt")) {
        const fs::path info = dir / "seqinfo.ini";
        const ImageSize image = image_size_for(fs::exists(info) ? std::optional(info) : std::nullopt, a.image_size);
        const auto list = group_trajectories(read_ground_truth(dir / "gt" / "gt.txt"), image);
        auto w = make_windows(list, setup.model.history, setup.model.horizon, setup.window_stride, seq_index++);
        windows.insert(windows.end(), w.begin(), w.end());
    }
    if (windows.empty()) throw UsageError("no training windows found under " + a.gt_dir);

    const FeatureStats stats =
        fit_stats(std::span<const TrainingWindow>(windows), setup.augmentation, setup.train.seed);
    TransFilterModel model(setup.model, stats, setup.train.seed);
    const fs::path log_path = a.loss_log.empty() ? fs::path(a.out_model + ".loss.txt") : fs::path(a.loss_log);
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("cannot open loss log: " + log_path.string());
    std::cout << "windows=" << windows.size() << " parameters=" << model.weights().parameter_count() << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    train(model, windows, setup.train, setup.augmentation, [&](int epoch, double loss) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d %.9g\n", epoch, loss);
        log << buf << std::flush;
        std::cout << "epoch " << buf;
    });
    model.save(a.out_model);
    if (g.timing) {
        std::printf("training seconds=%.2f\n",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return 0;
}

// ---- eval ----

int run_eval(const Globals&, const std::string& gt, const std::string& results) {
    struct Pair {
        std::string name;
        fs::path gt, res;
    };
    std::vector<Pair> pairs;
    if (fs::is_directory(gt)) {
        for (const auto& dir : sequence_dirs(gt, "gt/gt.txt")) {
            const std::string name = dir.filename().string();
            const fs::path res = fs::is_directory(results) ? fs::path(results) / (name + ".txt") : fs::path(results);
            pairs.push_back({name, dir / "gt" / "gt.txt", res});
        }
    } else {
        pairs.push_back({fs::path(gt).stem().string(), gt, results});
    }

    ClearMetrics total_c;
    IdentityMetrics total_i;
    for (const auto& p : pairs) {
        const auto g = read_ground_truth(p.gt);
        const auto r = fs::exists(p.res) ? read_mot(p.res) : throw UsageError("missing results file " + p.res.string());
        const EvalReport rep = evaluate(g, r);
        std::cout << rep.format(p.name);
        total_c.gt += rep.clear.gt;
        total_c.fp += rep.clear.fp;
        total_c.fn += rep.clear.fn;
        total_c.idsw += rep.clear.idsw;
        total_c.mean_iou += rep.clear.mean_iou * static_cast<double>(rep.clear.matches);
        total_c.matches += rep.clear.matches;
        total_i.idtp += rep.identity.idtp;
        total_i.idfp += rep.identity.idfp;
        total_i.idfn += rep.identity.idfn;
    }
    if (pairs.size() > 1) {
        EvalReport all;
        all.clear = total_c;
        all.clear.mota = 1.0 - double(total_c.fn + total_c.fp + total_c.idsw) / double(total_c.gt);
        all.clear.mean_iou = total_c.matches ? total_c.mean_iou / double(total_c.matches) : 0.0;
        all.identity = total_i;
        all.identity.idf1 = 2 * total_i.idtp / (2 * total_i.idtp + total_i.idfp + total_i.idfn);
        std::cout << all.format("COMBINED");
    }
    return 0;
}

// ---- synth ----

int run_synth(const Globals& g, const std::string& scenario, const std::string& out_dir, int sequences) {
    const std::string path = !scenario.empty() ? scenario : g.config;
    ScenarioConfig cfg = path.empty() ? ScenarioConfig{} : scenario_config_from(read_key_values(path));
    if (g.seed) cfg.seed = *g.seed;
    if (sequences < 1) throw UsageError("--sequences must be >= 1");
    const std::uint64_t base = cfg.seed;
    for (int i = 0; i < sequences; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "synth-%04d", i + 1);
        cfg.seed = base * 1000003ULL + static_cast<std::uint64_t>(i);
        write_sequence(generate(cfg), fs::path(out_dir) / name, name);
        std::cout << name << "\n";
    }
    return 0;
}

// ---- inspect-model ----

int run_inspect(const std::string& path) {
    TransFilterModel m = TransFilterModel::load(path);
    const auto& c = m.config();
    std::printf("format_version=%u\nd_model=%d\nn_heads=%d\nn_layers=%d\nff_dim=%d\nhistory=%d\nhorizon=%d\n",
                kModelFormatVersion, c.d_model, c.n_heads, c.n_layers, c.ff_dim, c.history, c.horizon);
    const FeatureStats& s = m.stats();
    auto group = [](const char* name, const Coords4& v) {
        std::printf("%s=%.6g,%.6g,%.6g,%.6g\n", name, v[0], v[1], v[2], v[3]);
    };
    group("stats.diff_mean", s.diff_mean);
    group("stats.diff_std", s.diff_std);
    group("stats.rel_mean", s.rel_mean);
    group("stats.rel_std", s.rel_std);
    group("stats.target_mean", s.target_mean);
    group("stats.target_std", s.target_std);
    m.weights().visit([](const std::string& name, nn::Mat& t) {
        std::printf("tensor %-40s %4ld x %-4ld\n", name.c_str(), static_cast<long>(t.rows()), static_cast<long>(t.cols()));
    });
    std::printf("parameters=%zu\n", m.weights().parameter_count());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dmsort: tracking-by-detection with a learned transformer filter"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Config file (tracker, training or scenario, by subcommand)");
    app.add_option("--seed", g.seed, "Random seed override");
    app.add_flag("--timing", g.timing, "Print timing figures");
    app.fallthrough();

    TrackArgs ta;
    auto* track = app.add_subcommand("track", "Track detections");
    track->add_option("--dets", ta.dets, "Detection file or directory of sequences")->required();
    track->add_option("--embeddings", ta.embeddings, "Embedding file (.bin or .csv)");
    track->add_option("--cmc", ta.cmc, "Camera motion file");
    track->add_option("--model", ta.model, "TransFilter model (Kalman filter when absent)");
    track->add_option("--out", ta.out, "Result file, or directory in sequence mode")->required();
    track->add_option("--overlay-dir", ta.overlay_dir, "Write per-frame SVG overlays here");
    track->add_option("--image-size", ta.image_size, "WIDTHxHEIGHT when no seqinfo.ini is available");
    track->add_option("--seqinfo", ta.seqinfo, "seqinfo.ini for a single detection file");
    track->add_flag("--clip", ta.clip, "Clip result boxes to the image");

    TrainArgs tr;
    auto* trainc = app.add_subcommand("train-filter", "Train a TransFilter on ground truth");
    trainc->add_option("--gt-dir", tr.gt_dir, "Sequence directory or dataset root")->required();
    trainc->add_option("--train-config", tr.train_config, "Training config file");
    trainc->add_option("--out-model", tr.out_model, "Output model file")->required();
    trainc->add_option("--loss-log", tr.loss_log, "Loss history file (default: <out-model>.loss.txt)");
    trainc->add_option("--image-size", tr.image_size, "WIDTHxHEIGHT when no seqinfo.ini is available");
    trainc->add_flag("--resume", tr.resume, "Not supported");

    std::string gt, results;
    auto* evalc = app.add_subcommand("eval", "Evaluate results against ground truth");
    evalc->add_option("--gt", gt, "Ground-truth file or dataset root")->required();
    evalc->add_option("--results", results, "Result file or directory")->required();

    std::string scenario, out_dir;
    int sequences = 1;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--scenario-config", scenario, "Scenario config file");
    synth->add_option("--out-dir", out_dir, "Output dataset root")->required();
    synth->add_option("--sequences", sequences, "Number of sequences");

    std::string model_path;
    auto* inspect = app.add_subcommand("inspect-model", "Describe a model file");
    inspect->add_option("--model", model_path, "Model file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*track) return run_track(g, ta);
        if (*trainc) return run_train(g, tr);
        if (*evalc) return run_eval(g, gt, results);
        if (*synth) return run_synth(g, scenario, out_dir, sequences);
        if (*inspect) return run_inspect(model_path);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
