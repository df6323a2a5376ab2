#pragma once

// Minimal dense layers with explicit forward caches and backward passes.
// Activations are row-major in the sense "one row per token".

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dmsort::nn {

using Mat = Eigen::MatrixXd;

struct Linear {
    Mat weight;  // out x in
    Mat bias;    // 1 x out
};

struct LayerNorm {
    Mat gamma;  // 1 x d
    Mat beta;   // 1 x d
};

/// Linear -> LayerNorm -> SiLU.
struct DenseBlock {
    Linear linear;
    LayerNorm norm;
};

struct Attention {
    Linear query, key, value, output;
};

/// Post-norm transformer block: attention + residual + norm, then
/// feed-forward (SiLU) + residual + norm. Self-attention when queries and
/// keys come from the same sequence, cross-attention otherwise.
struct TransformerLayer {
    Attention attention;
    LayerNorm norm1;
    Linear ff1, ff2;
    LayerNorm norm2;
};

// --- construction -----------------------------------------------------------

Linear make_linear(int in, int out, std::mt19937_64& rng);
LayerNorm make_layernorm(int d);
DenseBlock make_dense(int in, int out, std::mt19937_64& rng);
TransformerLayer make_transformer_layer(int d_model, int ff_dim, std::mt19937_64& rng);

// --- parameter enumeration ---------------------------------------------------

using TensorVisitor = std::function<void(const std::string& name, Mat& tensor)>;

void visit(Linear& l, const std::string& prefix, const TensorVisitor& f);
void visit(LayerNorm& l, const std::string& prefix, const TensorVisitor& f);
void visit(DenseBlock& b, const std::string& prefix, const TensorVisitor& f);
void visit(Attention& a, const std::string& prefix, const TensorVisitor& f);
void visit(TransformerLayer& t, const std::string& prefix, const TensorVisitor& f);

// --- forward / backward ------------------------------------------------------

Mat linear_forward(const Linear& l, const Mat& x);
/// Accumulates parameter gradients into `grad` and returns dL/dx.
Mat linear_backward(const Linear& l, const Mat& x, const Mat& dy, Linear& grad);

struct LayerNormCache {
    Mat normalized;
    Eigen::VectorXd inv_std;
};
inline constexpr double kLayerNormEps = 1e-5;
Mat layernorm_forward(const LayerNorm& l, const Mat& x, LayerNormCache* cache);
Mat layernorm_backward(const LayerNorm& l, const LayerNormCache& cache, const Mat& dy, LayerNorm& grad);

Mat silu(const Mat& x);
Mat silu_backward(const Mat& x, const Mat& dy);

struct DenseCache {
    Mat input;
    Mat pre_norm;
    LayerNormCache norm;
    Mat pre_act;
};
Mat dense_forward(const DenseBlock& b, const Mat& x, DenseCache* cache);
Mat dense_backward(const DenseBlock& b, const DenseCache& cache, const Mat& dy, DenseBlock& grad);

struct AttentionCache {
    Mat xq, xkv, q, k, v, concat;
    std::vector<Mat> probs;  // one (n_q x n_kv) row-stochastic matrix per head
};
Mat attention_forward(const Attention& a, int heads, const Mat& xq, const Mat& xkv, AttentionCache* cache);
/// Returns {dL/dxq, dL/dxkv}.
std::pair<Mat, Mat> attention_backward(const Attention& a, int heads, const AttentionCache& cache, const Mat& dy,
                                       Attention& grad);

struct TransformerCache {
    AttentionCache attention;
    LayerNormCache norm1;
    Mat h1;
    Mat ff_pre;
    Mat ff_act;
    LayerNormCache norm2;
};
Mat transformer_forward(const TransformerLayer& t, int heads, const Mat& xq, const Mat& xkv,
                        TransformerCache* cache);
std::pair<Mat, Mat> transformer_backward(const TransformerLayer& t, int heads, const TransformerCache& cache,
                                         const Mat& dy, TransformerLayer& grad);

/// Sinusoidal encoding of positions 0..n-1 (row i = position i).
Mat positional_encoding(int n, int d_model);

/// Reversed encoding: the last row always carries position 0.
Mat reversed_positional_encoding(int n, int d_model);

}  // namespace dmsort::nn
