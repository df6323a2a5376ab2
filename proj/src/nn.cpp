#include "dmsort/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dmsort::nn {

Linear make_linear(int in, int out, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Linear l;
    l.weight.resize(out, in);
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = u(rng);
    l.bias.resize(1, out);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = u(rng);
    return l;
}

LayerNorm make_layernorm(int d) { return {Mat::Ones(1, d), Mat::Zero(1, d)}; }

DenseBlock make_dense(int in, int out, std::mt19937_64& rng) { return {make_linear(in, out, rng), make_layernorm(out)}; }

TransformerLayer make_transformer_layer(int d_model, int ff_dim, std::mt19937_64& rng) {
    TransformerLayer t;
    t.attention.query = make_linear(d_model, d_model, rng);
    t.attention.key = make_linear(d_model, d_model, rng);
    t.attention.value = make_linear(d_model, d_model, rng);
    t.attention.output = make_linear(d_model, d_model, rng);
    t.norm1 = make_layernorm(d_model);
    t.ff1 = make_linear(d_model, ff_dim, rng);
    t.ff2 = make_linear(ff_dim, d_model, rng);
    t.norm2 = make_layernorm(d_model);
    return t;
}

void visit(Linear& l, const std::string& prefix, const TensorVisitor& f) {
    f(prefix + ".weight", l.weight);
    f(prefix + ".bias", l.bias);
}

void visit(LayerNorm& l, const std::string& prefix, const TensorVisitor& f) {
    f(prefix + ".gamma", l.gamma);
    f(prefix + ".beta", l.beta);
}

void visit(DenseBlock& b, const std::string& prefix, const TensorVisitor& f) {
    visit(b.linear, prefix + ".linear", f);
    visit(b.norm, prefix + ".norm", f);
}

void visit(Attention& a, const std::string& prefix, const TensorVisitor& f) {
    visit(a.query, prefix + ".query", f);
    visit(a.key, prefix + ".key", f);
    visit(a.value, prefix + ".value", f);
    visit(a.output, prefix + ".output", f);
}

void visit(TransformerLayer& t, const std::string& prefix, const TensorVisitor& f) {
    visit(t.attention, prefix + ".attention", f);
    visit(t.norm1, prefix + ".norm1", f);
    visit(t.ff1, prefix + ".ff1", f);
    visit(t.ff2, prefix + ".ff2", f);
    visit(t.norm2, prefix + ".norm2", f);
}

Mat linear_forward(const Linear& l, const Mat& x) {
    Mat y = x * l.weight.transpose();
    y.rowwise() += l.bias.row(0);
    return y;
}

Mat linear_backward(const Linear& l, const Mat& x, const Mat& dy, Linear& grad) {
    grad.weight.noalias() += dy.transpose() * x;
    grad.bias += dy.colwise().sum();
    return dy * l.weight;
}

Mat layernorm_forward(const LayerNorm& l, const Mat& x, LayerNormCache* cache) {
    const Eigen::Index n = x.rows();
    const double d = static_cast<double>(x.cols());
    Mat xhat(n, x.cols());
    Eigen::VectorXd inv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = x.row(i).sum() / d;
        const double var = (x.row(i).array() - mean).square().sum() / d;
        inv(i) = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(i) = (x.row(i).array() - mean) * inv(i);
    }
    Mat y = xhat.array().rowwise() * l.gamma.row(0).array();
    y.rowwise() += l.beta.row(0);
    if (cache) {
        cache->normalized = std::move(xhat);
        cache->inv_std = std::move(inv);
    }
    return y;
}

Mat layernorm_backward(const LayerNorm& l, const LayerNormCache& cache, const Mat& dy, LayerNorm& grad) {
    const Mat& xhat = cache.normalized;
    grad.gamma += (dy.array() * xhat.array()).colwise().sum().matrix();
    grad.beta += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * l.gamma.row(0).array();
    const double d = static_cast<double>(dy.cols());
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const double s1 = dxhat.row(i).sum();
        const double s2 = (dxhat.row(i).array() * xhat.row(i).array()).sum();
        dx.row(i) = (cache.inv_std(i) / d) * (d * dxhat.row(i).array() - s1 - xhat.row(i).array() * s2);
    }
    return dx;
}

Mat silu(const Mat& x) { return x.array() / (1.0 + (-x.array()).exp()); }

Mat silu_backward(const Mat& x, const Mat& dy) {
    const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x.array()).exp());
    return dy.array() * (s * (1.0 + x.array() * (1.0 - s)));
}

Mat dense_forward(const DenseBlock& b, const Mat& x, DenseCache* cache) {
    Mat pre = linear_forward(b.linear, x);
    LayerNormCache ln;
    Mat normed = layernorm_forward(b.norm, pre, cache ? &ln : nullptr);
    Mat out = silu(normed);
    if (cache) {
        cache->input = x;
        cache->pre_norm = std::move(pre);
        cache->norm = std::move(ln);
        cache->pre_act = std::move(normed);
    }
    return out;
}

Mat dense_backward(const DenseBlock& b, const DenseCache& cache, const Mat& dy, DenseBlock& grad) {
    const Mat d_norm = silu_backward(cache.pre_act, dy);
    const Mat d_pre = layernorm_backward(b.norm, cache.norm, d_norm, grad.norm);
    return linear_backward(b.linear, cache.input, d_pre, grad.linear);
}

namespace {

void softmax_rows(Mat& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
    }
}

}  // namespace

Mat attention_forward(const Attention& a, int heads, const Mat& xq, const Mat& xkv, AttentionCache* cache) {
    const Eigen::Index d = a.query.weight.rows();
    if (heads <= 0 || d % heads != 0) throw std::invalid_argument("attention: d_model not divisible by heads");
    const Eigen::Index dk = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    Mat q = linear_forward(a.query, xq);
    Mat k = linear_forward(a.key, xkv);
    Mat v = linear_forward(a.value, xkv);
    Mat concat(xq.rows(), d);
    std::vector<Mat> probs;
    if (cache) probs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Mat s = (q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose()) * scale;
        softmax_rows(s);
        concat.middleCols(h * dk, dk).noalias() = s * v.middleCols(h * dk, dk);
        if (cache) probs.push_back(std::move(s));
    }
    Mat y = linear_forward(a.output, concat);
    if (cache) {
        cache->xq = xq;
        cache->xkv = xkv;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->concat = std::move(concat);
        cache->probs = std::move(probs);
    }
    return y;
}

std::pair<Mat, Mat> attention_backward(const Attention& a, int heads, const AttentionCache& c, const Mat& dy,
                                       Attention& grad) {
    const Eigen::Index d = a.query.weight.rows();
    const Eigen::Index dk = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    const Mat dconcat = linear_backward(a.output, c.concat, dy, grad.output);
    Mat dq = Mat::Zero(c.q.rows(), d);
    Mat dk_all = Mat::Zero(c.k.rows(), d);
    Mat dv = Mat::Zero(c.v.rows(), d);
    for (int h = 0; h < heads; ++h) {
        const Mat& p = c.probs[static_cast<std::size_t>(h)];
        const auto dout = dconcat.middleCols(h * dk, dk);
        const Mat dp = dout * c.v.middleCols(h * dk, dk).transpose();
        dv.middleCols(h * dk, dk).noalias() += p.transpose() * dout;
        const Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
        const Mat ds = p.array() * (dp.array().colwise() - rowdot.array());
        dq.middleCols(h * dk, dk).noalias() += (ds * c.k.middleCols(h * dk, dk)) * scale;
        dk_all.middleCols(h * dk, dk).noalias() += (ds.transpose() * c.q.middleCols(h * dk, dk)) * scale;
    }
    Mat dxq = linear_backward(a.query, c.xq, dq, grad.query);
    Mat dxkv = linear_backward(a.key, c.xkv, dk_all, grad.key);
    dxkv += linear_backward(a.value, c.xkv, dv, grad.value);
    return {std::move(dxq), std::move(dxkv)};
}

Mat transformer_forward(const TransformerLayer& t, int heads, const Mat& xq, const Mat& xkv,
                        TransformerCache* cache) {
    Mat att = attention_forward(t.attention, heads, xq, xkv, cache ? &cache->attention : nullptr);
    Mat h1 = layernorm_forward(t.norm1, xq + att, cache ? &cache->norm1 : nullptr);
    Mat ff_pre = linear_forward(t.ff1, h1);
    Mat ff_act = silu(ff_pre);
    Mat out = layernorm_forward(t.norm2, h1 + linear_forward(t.ff2, ff_act), cache ? &cache->norm2 : nullptr);
    if (cache) {
        cache->h1 = std::move(h1);
        cache->ff_pre = std::move(ff_pre);
        cache->ff_act = std::move(ff_act);
    }
    return out;
}

std::pair<Mat, Mat> transformer_backward(const TransformerLayer& t, int heads, const TransformerCache& c,
                                         const Mat& dy, TransformerLayer& grad) {
    const Mat d_sum2 = layernorm_backward(t.norm2, c.norm2, dy, grad.norm2);
    const Mat d_act = linear_backward(t.ff2, c.ff_act, d_sum2, grad.ff2);
    const Mat d_pre = silu_backward(c.ff_pre, d_act);
    const Mat d_h1 = d_sum2 + linear_backward(t.ff1, c.h1, d_pre, grad.ff1);
    const Mat d_sum1 = layernorm_backward(t.norm1, c.norm1, d_h1, grad.norm1);
    auto [dxq, dxkv] = attention_backward(t.attention, heads, c.attention, d_sum1, grad.attention);
    dxq += d_sum1;
    return {std::move(dxq), std::move(dxkv)};
}

Mat positional_encoding(int n, int d_model) {
    Mat pe(n, d_model);
    for (int pos = 0; pos < n; ++pos) {
        for (int i = 0; i < d_model; ++i) {
            const int pair = i / 2;
            const double freq = std::pow(10000.0, -2.0 * pair / static_cast<double>(d_model));
            pe(pos, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
        }
    }
    return pe;
}

Mat reversed_positional_encoding(int n, int d_model) {
    const Mat pe = positional_encoding(n, d_model);
    return pe.colwise().reverse();
}

}  // namespace dmsort::nn
