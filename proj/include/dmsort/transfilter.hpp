#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmsort/features.hpp"
#include "dmsort/nn.hpp"

namespace dmsort {

struct TransFilterConfig {
    int d_model = 32;
    int n_heads = 4;
    int n_layers = 2;
    int ff_dim = 64;
    int history = 10;  // H: observations fed to the encoder
    int horizon = 30;  // m_max: steps emitted by the prediction head

    /// Six encoder layers at width 256.
    static TransFilterConfig reference() { return {256, 4, 6, 1024, 10, 30}; }

    void validate() const;
    bool operator==(const TransFilterConfig&) const = default;
};

/// All trainable tensors. Also used as the gradient and optimizer-moment
/// container, since those share the shapes.
struct TransFilterWeights {
    nn::DenseBlock embed1, embed2;              // 13 -> d -> d
    std::vector<nn::TransformerLayer> encoder;  // N post-norm self-attention layers
    nn::DenseBlock head1;                       // pooled d -> d
    nn::Linear head2;                           // d -> horizon * 4
    nn::DenseBlock obs_embed1, obs_embed2;      // 5 -> d -> d
    nn::TransformerLayer decoder;               // cross-attention only
    nn::Linear filter_out;                      // d -> 4

    /// Visits every tensor in a fixed order with its stable name.
    void visit(const nn::TensorVisitor& f);
    void set_zero();
    TransFilterWeights zeros_like() const;
    std::size_t parameter_count() const;
};

/// Retained encoder pass for one buffer state.
struct EncoderContext {
    TimedBox last;                 // anchor observation of the history
    nn::Mat encoded;               // n x d encoder outputs
    nn::Mat head;                  // horizon x 4 standardized relative coords
};

/// One supervised example in feature space.
struct TrainingSample {
    FeatureMatrix input;          // n x 13
    FeatureMatrix target;         // horizon x 4 standardized, rows past `valid_steps` ignored
    int valid_steps = 0;
    FeatureMatrix observations;   // valid_steps x 5 decoder inputs (possibly noisy)
};

class TransFilterModel {
public:
    TransFilterModel() = default;
    TransFilterModel(const TransFilterConfig& config, const FeatureStats& stats, std::uint64_t seed);

    const TransFilterConfig& config() const { return config_; }
    const FeatureStats& stats() const { return stats_; }
    void set_stats(const FeatureStats& s) { stats_ = s; }
    TransFilterWeights& weights() { return weights_; }
    const TransFilterWeights& weights() const { return weights_; }

    /// Runs the encoder and prediction head on a normalized history
    /// (already truncated to the last H observations).
    EncoderContext encode(std::span<const TimedBox> history) const;

    /// Boxes for the first `steps` horizon rows of a context. Width and
    /// height are floored at 1e-6.
    std::vector<BoundingBox> predictions(const EncoderContext& ctx, int steps) const;

    /// encode + predictions. `steps` must lie in [0, horizon].
    std::vector<BoundingBox> predict(std::span<const TimedBox> history, int steps) const;

    /// Corrects one observation against a retained encoder context.
    BoundingBox filter(const EncoderContext& ctx, const TimedBox& observation) const;

    /// Attention probabilities of every encoder layer for a history, for
    /// inspection.
    std::vector<std::vector<nn::Mat>> encoder_attention(std::span<const TimedBox> history) const;

    /// End-to-end loss of one sample; accumulates dLoss/dParam * `grad_scale`
    /// into `grad` when it is non-null.
    double loss(const TrainingSample& sample, double huber_delta, TransFilterWeights* grad,
                double grad_scale = 1.0) const;

    /// Rounds every parameter to float precision (what a saved file holds).
    void round_to_float();

    void save(const std::filesystem::path& path) const;
    static TransFilterModel load(const std::filesystem::path& path);

private:
    nn::Mat embed_input(const FeatureMatrix& features) const;

    TransFilterConfig config_;
    FeatureStats stats_;
    TransFilterWeights weights_;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Elementwise Huber with threshold `delta`.
double huber(double residual, double delta);
double huber_grad(double residual, double delta);

/// Mean over valid steps (and the 4 coordinates) of Huber(target, prediction)
/// plus the same for the filtered values. Rows at or beyond `valid_steps`
/// are ignored.
double e2e_loss(const FeatureMatrix& targets, const FeatureMatrix& predictions, const FeatureMatrix& filtered,
                int valid_steps, double delta);

}  // namespace dmsort
