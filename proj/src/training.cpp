#include "dmsort/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dmsort/kalman.hpp"

namespace dmsort {

namespace {

void add_window(std::vector<TrainingWindow>& out, const Trajectory& t, std::size_t e, int history, int horizon,
                int sequence, int track) {
    TrainingWindow w;
    w.sequence = sequence;
    w.track = track;
    const std::size_t begin = e + 1 > static_cast<std::size_t>(history) ? e + 1 - history : 0;
    w.input.assign(t.begin() + static_cast<std::ptrdiff_t>(begin), t.begin() + static_cast<std::ptrdiff_t>(e) + 1);
    const int anchor = t[e].frame;
    for (std::size_t k = e + 1; k < t.size() && static_cast<int>(w.target.size()) < horizon; ++k) {
        if (t[k].frame != anchor + static_cast<int>(w.target.size()) + 1) break;
        w.target.push_back(t[k]);
    }
    if (!w.target.empty()) out.push_back(std::move(w));
}

}  // namespace

std::vector<Trajectory> group_trajectories(std::span<const MotRecord> records, const ImageSize& image) {
    std::map<int, Trajectory> tracks;
    for (const auto& r : records) {
        TimedBox tb{r.frame, to_normalized(r.box, image)};
        tb.box.confidence = 1.0;
        validate_normalized(tb);
        tracks[r.id].push_back(tb);
    }
    std::vector<Trajectory> out;
    for (auto& [id, t] : tracks) {
        std::sort(t.begin(), t.end(), [](const TimedBox& x, const TimedBox& y) { return x.frame < y.frame; });
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<TrainingWindow> make_windows(std::span<const Trajectory> tracks, int history, int horizon, int stride,
                                         int sequence_id) {
    if (history < 1 || horizon < 1 || stride < 1) {
        throw std::invalid_argument("make_windows: history, horizon and stride must be positive");
    }
    std::vector<TrainingWindow> out;
    for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
        const Trajectory& t = tracks[ti];
        if (t.size() < 2) continue;
        for (std::size_t k = 1; k < t.size(); ++k) {
            if (t[k].frame <= t[k - 1].frame) throw std::invalid_argument("make_windows: frames must increase");
        }
        const int last = t.back().frame;
        const bool long_enough = t.front().frame + horizon <= last;
        for (std::size_t e = 0; e + 1 < t.size(); e += static_cast<std::size_t>(stride)) {
            if (long_enough && t[e].frame + horizon > last) break;
            add_window(out, t, e, history, horizon, sequence_id, static_cast<int>(ti));
        }
    }
    return out;
}

void AugmentationConfig::validate() const {
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("augmentation: noise scale must be >= 0");
    if (!(mask_probability >= 0.0 && mask_probability < 1.0)) {
        throw std::invalid_argument("augmentation: mask probability must lie in [0, 1)");
    }
}

namespace {

BoundingBox jitter(const BoundingBox& b, double scale, std::mt19937_64& rng) {
    if (scale == 0.0) return b;
    std::normal_distribution<double> n(0.0, 1.0);
    BoundingBox o = b;
    o.x += n(rng) * scale * b.w;
    o.y += n(rng) * scale * b.h;
    o.w = std::max(b.w + n(rng) * scale * b.w, 1e-6);
    o.h = std::max(b.h + n(rng) * scale * b.h, 1e-6);
    return o;
}

}  // namespace

TrainingWindow augment(const TrainingWindow& w, const AugmentationConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    TrainingWindow out;
    out.sequence = w.sequence;
    out.track = w.track;
    out.target = w.target;
    std::bernoulli_distribution drop(cfg.mask_probability);
    for (std::size_t i = 0; i < w.input.size(); ++i) {
        const bool last = i + 1 == w.input.size();
        if (!last && cfg.mask_probability > 0.0 && drop(rng)) continue;
        out.input.push_back({w.input[i].frame, jitter(w.input[i].box, cfg.noise_scale, rng)});
    }
    return out;
}

std::mt19937_64 window_rng(std::uint64_t seed, int epoch, std::size_t window) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(window),
                      static_cast<std::uint32_t>(static_cast<std::uint64_t>(window) >> 32)};
    return std::mt19937_64(seq);
}

TrainingSample make_sample(const TrainingWindow& w, const TransFilterModel& model, const AugmentationConfig& aug,
                           std::mt19937_64& rng) {
    const int horizon = model.config().horizon;
    if (w.input.empty() || w.target.empty()) throw std::invalid_argument("make_sample: empty window");
    const TrainingWindow a = augment(w, aug, rng);
    const std::size_t keep = std::min(a.target.size(), static_cast<std::size_t>(horizon));
    const std::span<const TimedBox> future(a.target.data(), keep);

    std::vector<TimedBox> observed(future.begin(), future.end());
    for (auto& o : observed) o.box = jitter(o.box, aug.noise_scale, rng);

    TrainingSample s;
    s.input = extract_input(a.input, model.stats());
    s.valid_steps = static_cast<int>(keep);
    s.target = FeatureMatrix::Zero(horizon, 4);
    s.target.topRows(s.valid_steps) = extract_target(a.input.back(), future, model.stats()).leftCols(4);
    s.observations = extract_target(a.input.back(), observed, model.stats());
    return s;
}

FeatureStats fit_stats(std::span<const TrainingWindow> windows, const AugmentationConfig& aug, std::uint64_t seed) {
    std::vector<std::vector<TimedBox>> histories, futures;
    histories.reserve(windows.size());
    futures.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        std::mt19937_64 rng = window_rng(seed, -1, i);
        TrainingWindow a = augment(windows[i], aug, rng);
        for (auto& t : a.target) t.box = jitter(t.box, aug.noise_scale, rng);
        histories.push_back(std::move(a.input));
        futures.push_back(std::move(a.target));
    }
    return dmsort::fit_stats(std::span<const std::vector<TimedBox>>(histories),
                             std::span<const std::vector<TimedBox>>(futures));
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("train config: learning rate must be >= 0");
    if (warmup_epochs < 0) throw std::invalid_argument("train config: warm-up epochs must be >= 0");
    if (!(decay_factor > 0.0) || decay_period < 1) throw std::invalid_argument("train config: invalid step decay");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("train config: weight decay must be >= 0");
    if (!(huber_delta > 0.0)) throw std::invalid_argument("train config: huber delta must be > 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw std::invalid_argument("train config: invalid optimizer coefficients");
    }
}

double TrainConfig::learning_rate_at(int epoch) const {
    if (epoch < warmup_epochs) return learning_rate * (epoch + 1) / static_cast<double>(warmup_epochs);
    return learning_rate * std::pow(decay_factor, (epoch - warmup_epochs) / decay_period);
}

namespace {

std::vector<nn::Mat*> tensors(TransFilterWeights& w) {
    std::vector<nn::Mat*> out;
    w.visit([&](const std::string&, nn::Mat& m) { out.push_back(&m); });
    return out;
}

}  // namespace

TrainResult train(TransFilterModel& model, std::span<const TrainingWindow> windows, const TrainConfig& cfg,
                  const AugmentationConfig& aug, const EpochCallback& on_epoch) {
    cfg.validate();
    aug.validate();
    if (windows.empty()) throw std::invalid_argument("train: no training windows");

    TransFilterWeights grad = model.weights().zeros_like();
    TransFilterWeights m1 = grad, m2 = grad;
    const auto params = tensors(model.weights());
    const auto g = tensors(grad);
    const auto v1 = tensors(m1);
    const auto v2 = tensors(m2);

    std::vector<std::size_t> order(windows.size());
    long step = 0;
    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng = window_rng(cfg.seed, epoch, ~std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = cfg.learning_rate_at(epoch);

        double epoch_sum = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
            const double scale = 1.0 / static_cast<double>(b1 - b0);
            grad.set_zero();
            for (std::size_t k = b0; k < b1; ++k) {
                std::mt19937_64 rng = window_rng(cfg.seed, epoch, order[k]);
                const TrainingSample s = make_sample(windows[order[k]], model, aug, rng);
                const double l = model.loss(s, cfg.huber_delta, &grad, scale);
                if (!std::isfinite(l)) {
                    throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1) +
                                             ": non-finite loss");
                }
                epoch_sum += l;
            }
            if (lr == 0.0) continue;
            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t t = 0; t < params.size(); ++t) {
                nn::Mat& p = *params[t];
                const nn::Mat& gt = *g[t];
                nn::Mat& a = *v1[t];
                nn::Mat& b = *v2[t];
                p *= 1.0 - lr * cfg.weight_decay;
                a = cfg.beta1 * a + (1.0 - cfg.beta1) * gt;
                b = cfg.beta2 * b + (1.0 - cfg.beta2) * gt.cwiseProduct(gt);
                p.array() -= lr * (a.array() / c1) / ((b.array() / c2).sqrt() + cfg.adam_eps);
            }
        }
        const double mean = epoch_sum / static_cast<double>(windows.size());
        if (!std::isfinite(mean)) {
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1) + ": non-finite loss");
        }
        bool finite = true;
        for (const nn::Mat* p : params) finite = finite && p->allFinite();
        if (!finite) {
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1) +
                                     ": non-finite parameters");
        }
        result.epoch_loss.push_back(mean);
        if (on_epoch) on_epoch(epoch + 1, mean);
    }
    return result;
}

namespace {

double l1(const BoundingBox& a, const BoundingBox& b) {
    return (std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.w - b.w) + std::abs(a.h - b.h)) / 4.0;
}

}  // namespace

double prediction_ade(const TransFilterModel& model, std::span<const TrainingWindow> windows, int max_steps) {
    double sum = 0.0;
    long count = 0;
    for (const auto& w : windows) {
        const int steps = std::min({max_steps, static_cast<int>(w.target.size()), model.config().horizon});
        if (steps <= 0) continue;
        const std::size_t h = static_cast<std::size_t>(model.config().history);
        const std::size_t begin = w.input.size() > h ? w.input.size() - h : 0;
        const auto pred = model.predict(std::span(w.input).subspan(begin), steps);
        for (int j = 0; j < steps; ++j) sum += l1(pred[j], w.target[j].box);
        count += steps;
    }
    if (count == 0) throw std::invalid_argument("prediction_ade: no valid steps");
    return sum / static_cast<double>(count);
}

double kalman_prediction_ade(std::span<const TrainingWindow> windows, int max_steps) {
    const BoxKalmanFilter kf;
    double sum = 0.0;
    long count = 0;
    for (const auto& w : windows) {
        const int steps = std::min(max_steps, static_cast<int>(w.target.size()));
        if (steps <= 0 || w.input.empty()) continue;
        KalmanState s = kf.initiate(w.input.front().box);
        for (std::size_t i = 1; i < w.input.size(); ++i) {
            for (int f = w.input[i - 1].frame; f < w.input[i].frame; ++f) s = kf.predict(s);
            s = kf.update(s, w.input[i].box);
        }
        const auto ahead = kf.predict_steps(s, steps);
        for (int j = 0; j < steps; ++j) sum += l1(BoxKalmanFilter::to_box(ahead[j]), w.target[j].box);
        count += steps;
    }
    if (count == 0) throw std::invalid_argument("kalman_prediction_ade: no valid steps");
    return sum / static_cast<double>(count);
}

}  // namespace dmsort
