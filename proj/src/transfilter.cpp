#include "dmsort/transfilter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace dmsort {

namespace {

constexpr char kModelMagic[4] = {'D', 'M', 'T', 'F'};
constexpr double kMinPredictedSize = 1e-6;

using nn::Mat;

BoundingBox floor_size(BoundingBox b) {
    b.w = std::max(b.w, kMinPredictedSize);
    b.h = std::max(b.h, kMinPredictedSize);
    return b;
}

}  // namespace

void TransFilterConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
        throw std::invalid_argument("transfilter: d_model must be a positive multiple of n_heads");
    }
    if (n_layers < 1 || ff_dim < 1 || history < 1 || horizon < 1) {
        throw std::invalid_argument("transfilter: layers, ff_dim, history and horizon must be positive");
    }
}

void TransFilterWeights::visit(const nn::TensorVisitor& f) {
    nn::visit(embed1, "embed1", f);
    nn::visit(embed2, "embed2", f);
    for (std::size_t i = 0; i < encoder.size(); ++i) nn::visit(encoder[i], "encoder." + std::to_string(i), f);
    nn::visit(head1, "head1", f);
    nn::visit(head2, "head2", f);
    nn::visit(obs_embed1, "obs_embed1", f);
    nn::visit(obs_embed2, "obs_embed2", f);
    nn::visit(decoder, "decoder", f);
    nn::visit(filter_out, "filter_out", f);
}

void TransFilterWeights::set_zero() {
    visit([](const std::string&, Mat& m) { m.setZero(); });
}

TransFilterWeights TransFilterWeights::zeros_like() const {
    TransFilterWeights z = *this;
    z.set_zero();
    return z;
}

std::size_t TransFilterWeights::parameter_count() const {
    std::size_t n = 0;
    const_cast<TransFilterWeights*>(this)->visit(
        [&](const std::string&, Mat& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

TransFilterModel::TransFilterModel(const TransFilterConfig& config, const FeatureStats& stats, std::uint64_t seed)
    : config_(config), stats_(stats) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const int d = config_.d_model;
    weights_.embed1 = nn::make_dense(kInputFeatureWidth, d, rng);
    weights_.embed2 = nn::make_dense(d, d, rng);
    for (int i = 0; i < config_.n_layers; ++i) {
        weights_.encoder.push_back(nn::make_transformer_layer(d, config_.ff_dim, rng));
    }
    weights_.head1 = nn::make_dense(d, d, rng);
    weights_.head2 = nn::make_linear(d, config_.horizon * 4, rng);
    weights_.obs_embed1 = nn::make_dense(kTargetFeatureWidth, d, rng);
    weights_.obs_embed2 = nn::make_dense(d, d, rng);
    weights_.decoder = nn::make_transformer_layer(d, config_.ff_dim, rng);
    weights_.filter_out = nn::make_linear(d, 4, rng);
}

Mat TransFilterModel::embed_input(const FeatureMatrix& features) const {
    Mat tokens = nn::dense_forward(weights_.embed2, nn::dense_forward(weights_.embed1, features, nullptr), nullptr);
    tokens += nn::reversed_positional_encoding(static_cast<int>(features.rows()), config_.d_model);
    return tokens;
}

EncoderContext TransFilterModel::encode(std::span<const TimedBox> history) const {
    if (history.empty()) throw std::invalid_argument("transfilter: empty history");
    const FeatureMatrix features = extract_input(history, stats_);
    Mat x = embed_input(features);
    for (const auto& layer : weights_.encoder) x = nn::transformer_forward(layer, config_.n_heads, x, x, nullptr);

    const Mat pooled = x.colwise().mean();
    const Mat flat = nn::linear_forward(weights_.head2, nn::dense_forward(weights_.head1, pooled, nullptr));
    EncoderContext ctx;
    ctx.last = history.back();
    ctx.encoded = std::move(x);
    ctx.head.resize(config_.horizon, 4);
    for (int j = 0; j < config_.horizon; ++j) ctx.head.row(j) = flat.block(0, 4 * j, 1, 4);
    return ctx;
}

std::vector<BoundingBox> TransFilterModel::predictions(const EncoderContext& ctx, int steps) const {
    if (steps < 0 || steps > config_.horizon) throw std::out_of_range("transfilter: prediction steps out of range");
    std::vector<BoundingBox> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int j = 0; j < steps; ++j) out.push_back(floor_size(target_row_to_box(ctx.last, ctx.head.row(j), stats_)));
    return out;
}

std::vector<BoundingBox> TransFilterModel::predict(std::span<const TimedBox> history, int steps) const {
    if (steps < 0 || steps > config_.horizon) throw std::out_of_range("transfilter: prediction steps out of range");
    if (steps == 0) return {};
    return predictions(encode(history), steps);
}

BoundingBox TransFilterModel::filter(const EncoderContext& ctx, const TimedBox& observation) const {
    if (ctx.encoded.size() == 0) throw std::invalid_argument("transfilter: missing encoder context");
    const FeatureMatrix row = extract_target(ctx.last, std::span(&observation, 1), stats_);
    const Mat token =
        nn::dense_forward(weights_.obs_embed2, nn::dense_forward(weights_.obs_embed1, row, nullptr), nullptr);
    const Mat decoded = nn::transformer_forward(weights_.decoder, config_.n_heads, token, ctx.encoded, nullptr);
    const Mat out = row.leftCols(4) + nn::linear_forward(weights_.filter_out, decoded);
    BoundingBox b = floor_size(target_row_to_box(ctx.last, out.row(0), stats_));
    b.confidence = observation.box.confidence;
    return b;
}

std::vector<std::vector<Mat>> TransFilterModel::encoder_attention(std::span<const TimedBox> history) const {
    const FeatureMatrix features = extract_input(history, stats_);
    Mat x = embed_input(features);
    std::vector<std::vector<Mat>> out;
    for (const auto& layer : weights_.encoder) {
        nn::TransformerCache cache;
        x = nn::transformer_forward(layer, config_.n_heads, x, x, &cache);
        out.push_back(cache.attention.probs);
    }
    return out;
}

double huber(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_grad(double r, double delta) {
    if (r > delta) return delta;
    if (r < -delta) return -delta;
    return r;
}

double e2e_loss(const FeatureMatrix& targets, const FeatureMatrix& predictions, const FeatureMatrix& filtered,
                int valid_steps, double delta) {
    if (valid_steps <= 0) throw std::invalid_argument("e2e_loss: no valid steps");
    if (targets.rows() < valid_steps || predictions.rows() < valid_steps || filtered.rows() < valid_steps ||
        targets.cols() < 4 || predictions.cols() < 4 || filtered.cols() < 4) {
        throw std::invalid_argument("e2e_loss: shape mismatch");
    }
    double lp = 0.0, lf = 0.0;
    for (int j = 0; j < valid_steps; ++j) {
        for (int c = 0; c < 4; ++c) {
            lp += huber(predictions(j, c) - targets(j, c), delta);
            lf += huber(filtered(j, c) - targets(j, c), delta);
        }
    }
    const double n = 4.0 * valid_steps;
    return lp / n + lf / n;
}

double TransFilterModel::loss(const TrainingSample& s, double delta, TransFilterWeights* grad,
                              double grad_scale) const {
    const int v = s.valid_steps;
    if (v <= 0 || v > config_.horizon) throw std::invalid_argument("loss: invalid number of valid steps");
    if (s.observations.rows() != v || s.target.rows() < v) throw std::invalid_argument("loss: shape mismatch");
    const int heads = config_.n_heads;
    const auto n = s.input.rows();

    // Encoder.
    nn::DenseCache ce1, ce2;
    Mat x = nn::dense_forward(weights_.embed2, nn::dense_forward(weights_.embed1, s.input, &ce1), &ce2);
    x += nn::reversed_positional_encoding(static_cast<int>(n), config_.d_model);
    std::vector<nn::TransformerCache> enc_caches(weights_.encoder.size());
    for (std::size_t l = 0; l < weights_.encoder.size(); ++l) {
        x = nn::transformer_forward(weights_.encoder[l], heads, x, x, &enc_caches[l]);
    }
    const Mat pooled = x.colwise().mean();
    nn::DenseCache ch1;
    const Mat h1 = nn::dense_forward(weights_.head1, pooled, &ch1);
    const Mat flat = nn::linear_forward(weights_.head2, h1);

    // Decoder.
    nn::DenseCache co1, co2;
    const Mat obs_tokens =
        nn::dense_forward(weights_.obs_embed2, nn::dense_forward(weights_.obs_embed1, s.observations, &co1), &co2);
    nn::TransformerCache cdec;
    const Mat decoded = nn::transformer_forward(weights_.decoder, heads, obs_tokens, x, &cdec);
    const Mat filtered = s.observations.leftCols(4) + nn::linear_forward(weights_.filter_out, decoded);

    Mat predicted(config_.horizon, 4);
    for (int j = 0; j < config_.horizon; ++j) predicted.row(j) = flat.block(0, 4 * j, 1, 4);
    const double value = e2e_loss(s.target, predicted, filtered, v, delta);
    if (!grad) return value;

    const double norm = grad_scale / (4.0 * v);
    Mat d_flat = Mat::Zero(1, flat.cols());
    Mat d_filtered(v, 4);
    for (int j = 0; j < v; ++j) {
        for (int c = 0; c < 4; ++c) {
            d_flat(0, 4 * j + c) = huber_grad(predicted(j, c) - s.target(j, c), delta) * norm;
            d_filtered(j, c) = huber_grad(filtered(j, c) - s.target(j, c), delta) * norm;
        }
    }

    TransFilterWeights& g = *grad;
    const Mat d_decoded = nn::linear_backward(weights_.filter_out, decoded, d_filtered, g.filter_out);
    auto [d_obs_tokens, d_enc] = nn::transformer_backward(weights_.decoder, heads, cdec, d_decoded, g.decoder);
    nn::dense_backward(weights_.obs_embed1, co1,
                       nn::dense_backward(weights_.obs_embed2, co2, d_obs_tokens, g.obs_embed2), g.obs_embed1);

    const Mat d_h1 = nn::linear_backward(weights_.head2, h1, d_flat, g.head2);
    const Mat d_pooled = nn::dense_backward(weights_.head1, ch1, d_h1, g.head1);
    d_enc.rowwise() += d_pooled.row(0) / static_cast<double>(n);

    Mat d_x = std::move(d_enc);
    for (std::size_t l = weights_.encoder.size(); l-- > 0;) {
        auto [dq, dkv] = nn::transformer_backward(weights_.encoder[l], heads, enc_caches[l], d_x, g.encoder[l]);
        d_x = dq + dkv;
    }
    nn::dense_backward(weights_.embed1, ce1, nn::dense_backward(weights_.embed2, ce2, d_x, g.embed2), g.embed1);
    return value;
}

void TransFilterModel::round_to_float() {
    weights_.visit([](const std::string&, Mat& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
    });
}

void TransFilterModel::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open model file for writing: " + path.string());
    using namespace detail;
    os.write(kModelMagic, 4);
    write_u32(os, kModelFormatVersion);
    write_u32(os, kFeatureLayoutTag);
    for (int v : {config_.d_model, config_.n_heads, config_.n_layers, config_.ff_dim, config_.history,
                  config_.horizon}) {
        write_u32(os, static_cast<std::uint32_t>(v));
    }
    for (const Coords4* group : {&stats_.diff_mean, &stats_.diff_std, &stats_.rel_mean, &stats_.rel_std,
                                 &stats_.target_mean, &stats_.target_std}) {
        for (double v : *group) write_f64(os, v);
    }
    std::vector<std::pair<std::string, const Mat*>> tensors;
    const_cast<TransFilterWeights&>(weights_).visit(
        [&](const std::string& name, Mat& m) { tensors.emplace_back(name, &m); });
    write_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(m->rows()));
        write_u32(os, static_cast<std::uint32_t>(m->cols()));
        for (Eigen::Index r = 0; r < m->rows(); ++r) {
            for (Eigen::Index c = 0; c < m->cols(); ++c) write_f32(os, static_cast<float>((*m)(r, c)));
        }
    }
    if (!os) throw std::runtime_error("failed writing model file: " + path.string());
}

TransFilterModel TransFilterModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model file: " + path.string());
    using namespace detail;
    char magic[4];
    read_exact(is, magic, 4);
    if (!std::equal(magic, magic + 4, kModelMagic)) throw std::runtime_error("not a transfilter model file");
    const std::uint32_t version = read_u32(is);
    if (version != kModelFormatVersion) {
        throw std::runtime_error("model format version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kModelFormatVersion) + ")");
    }
    if (read_u32(is) != kFeatureLayoutTag) throw std::runtime_error("model feature layout tag mismatch");
    TransFilterConfig cfg;
    cfg.d_model = static_cast<int>(read_u32(is));
    cfg.n_heads = static_cast<int>(read_u32(is));
    cfg.n_layers = static_cast<int>(read_u32(is));
    cfg.ff_dim = static_cast<int>(read_u32(is));
    cfg.history = static_cast<int>(read_u32(is));
    cfg.horizon = static_cast<int>(read_u32(is));
    FeatureStats stats;
    for (Coords4* group : {&stats.diff_mean, &stats.diff_std, &stats.rel_mean, &stats.rel_std, &stats.target_mean,
                           &stats.target_std}) {
        for (double& v : *group) v = read_f64(is);
    }
    TransFilterModel model(cfg, stats, 0);
    std::vector<std::pair<std::string, Mat*>> tensors;
    model.weights_.visit([&](const std::string& name, Mat& m) { tensors.emplace_back(name, &m); });
    const std::uint32_t count = read_u32(is);
    if (count != tensors.size()) throw std::runtime_error("model tensor count does not match its configuration");
    for (auto& [name, m] : tensors) {
        const std::uint32_t len = read_u32(is);
        std::string stored(len, '\0');
        read_exact(is, stored.data(), len);
        if (stored != name) throw std::runtime_error("model tensor '" + stored + "' found where '" + name + "' expected");
        const auto rows = static_cast<Eigen::Index>(read_u32(is));
        const auto cols = static_cast<Eigen::Index>(read_u32(is));
        if (rows != m->rows() || cols != m->cols()) throw std::runtime_error("model tensor '" + name + "' has wrong shape");
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                const float v = read_f32(is);
                if (!std::isfinite(v)) throw std::runtime_error("model tensor '" + name + "' holds a non-finite value");
                (*m)(r, c) = v;
            }
        }
    }
    return model;
}

}  // namespace dmsort
