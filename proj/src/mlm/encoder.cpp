#include "sotk/mlm/encoder.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"

#include "sotk/common/error.hpp"
#include "sotk/common/rng.hpp"

namespace sotk::mlm {

void EncoderConfig::validate() const {
    auto fail = [](const std::string& msg) { throw InvalidArgument("encoder config: " + msg); };
    if (hidden == 0) {
        fail("hidden must be positive");
    }
    if (n_heads == 0 || hidden % n_heads != 0) {
        fail("hidden (" + std::to_string(hidden) + ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    }
    if (ffn_mult == 0) {
        fail("ffn_mult must be positive");
    }
    if (max_positions == 0) {
        fail("max_positions must be at least 1");
    }
    if (vocab_size == 0) {
        fail("vocab_size must be positive");
    }
    if (!(init_std > 0.0)) {
        fail("init_std must be positive");
    }
}

std::string EncoderConfig::to_json() const {
    nlohmann::ordered_json j;
    j["n_layers"] = n_layers;
    j["hidden"] = hidden;
    j["n_heads"] = n_heads;
    j["ffn_mult"] = ffn_mult;
    j["max_positions"] = max_positions;
    j["vocab_size"] = vocab_size;
    j["tied_head"] = tied_head;
    j["attention"] = attention;
    j["feed_forward"] = feed_forward;
    j["seed"] = seed;
    return j.dump();
}

namespace {

constexpr double kLayerNormEps = 1e-5;

template <class S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x * S(std::numbers::sqrt2 / 2)));
}

template <class S>
S gelu_grad(S x) {
    const S cdf = S(0.5) * (S(1) + std::erf(x * S(std::numbers::sqrt2 / 2)));
    const S pdf = std::exp(S(-0.5) * x * x) * S(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    return cdf + x * pdf;
}

template <class Mat, class ColVec, class Gain, class Bias>
void layer_norm(const Mat& x, const Gain& g, const Bias& b, Mat& hat, ColVec& rstd, Mat& y) {
    using S = typename Mat::Scalar;
    const auto n = x.rows();
    const auto d = x.cols();
    hat.resize(n, d);
    rstd.resize(n);
    y.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const S mu = x.row(i).mean();
        const S var = (x.row(i).array() - mu).square().mean();
        const S r = S(1) / std::sqrt(var + S(kLayerNormEps));
        rstd(i) = r;
        hat.row(i) = (x.row(i).array() - mu) * r;
        y.row(i) = hat.row(i).cwiseProduct(g) + b;
    }
}

template <class Mat, class ColVec, class Gain, class GradVec>
Mat layer_norm_backward(const Mat& dy, const Mat& hat, const ColVec& rstd, const Gain& g, GradVec dg, GradVec db) {
    using S = typename Mat::Scalar;
    dg += dy.cwiseProduct(hat).colwise().sum();
    db += dy.colwise().sum();
    Mat dx(dy.rows(), dy.cols());
    const S inv_d = S(1) / static_cast<S>(dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const auto dhat = dy.row(i).cwiseProduct(g);
        const S mean_dhat = dhat.sum() * inv_d;
        const S mean_dhat_hat = dhat.cwiseProduct(hat.row(i)).sum() * inv_d;
        dx.row(i) = ((dhat.array() - mean_dhat) - hat.row(i).array() * mean_dhat_hat) * rstd(i);
    }
    return dx;
}

}  // namespace

template <class S>
std::size_t EncoderModel<S>::add_tensor(const std::string& name, std::size_t rows, std::size_t cols) {
    const std::size_t offset = specs_.empty() ? 0 : specs_.back().offset + specs_.back().size();
    specs_.push_back({name, offset, rows, cols});
    return offset;
}

template <class S>
EncoderModel<S>::EncoderModel(const EncoderConfig& config) : config_(config) {
    config_.validate();
    const std::size_t d = config_.hidden;
    const std::size_t f = d * config_.ffn_mult;
    const std::size_t V = config_.vocab_size;
    tok_emb_ = add_tensor("embed.tokens", V, d);
    pos_emb_ = add_tensor("embed.positions", config_.max_positions, d);
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerParams lp;
        if (config_.attention) {
            lp.ln1_g = add_tensor(p + "attn_norm.gain", 1, d);
            lp.ln1_b = add_tensor(p + "attn_norm.bias", 1, d);
            lp.wq = add_tensor(p + "attn.q.weight", d, d);
            lp.bq = add_tensor(p + "attn.q.bias", 1, d);
            lp.wk = add_tensor(p + "attn.k.weight", d, d);
            lp.bk = add_tensor(p + "attn.k.bias", 1, d);
            lp.wv = add_tensor(p + "attn.v.weight", d, d);
            lp.bv = add_tensor(p + "attn.v.bias", 1, d);
            lp.wo = add_tensor(p + "attn.out.weight", d, d);
            lp.bo = add_tensor(p + "attn.out.bias", 1, d);
        }
        if (config_.feed_forward) {
            lp.ln2_g = add_tensor(p + "ffn_norm.gain", 1, d);
            lp.ln2_b = add_tensor(p + "ffn_norm.bias", 1, d);
            lp.w1 = add_tensor(p + "ffn.in.weight", d, f);
            lp.b1 = add_tensor(p + "ffn.in.bias", 1, f);
            lp.w2 = add_tensor(p + "ffn.out.weight", f, d);
            lp.b2 = add_tensor(p + "ffn.out.bias", 1, d);
        }
        layers_.push_back(lp);
    }
    lnf_g_ = add_tensor("final_norm.gain", 1, d);
    lnf_b_ = add_tensor("final_norm.bias", 1, d);
    if (!config_.tied_head) {
        head_w_ = add_tensor("head.weight", d, V);
        head_b_ = add_tensor("head.bias", 1, V);
    }
    params_.assign(specs_.back().offset + specs_.back().size(), S(0));
    grads_.assign(params_.size(), S(0));

    Rng rng(config_.seed);
    for (const auto& spec : specs_) {
        const bool is_gain = spec.name.ends_with(".gain");
        const bool is_bias = spec.name.ends_with(".bias");
        for (std::size_t i = 0; i < spec.size(); ++i) {
            S value = S(0);
            if (is_gain) {
                value = S(1);
            } else if (!is_bias) {
                value = static_cast<S>(rng.normal() * config_.init_std);
            }
            params_[spec.offset + i] = value;
        }
    }
}

template <class S>
void EncoderModel<S>::zero_grad() {
    std::fill(grads_.begin(), grads_.end(), S(0));
}

template <class S>
const TensorSpec& EncoderModel<S>::spec(std::string_view name) const {
    for (const auto& s : specs_) {
        if (s.name == name) {
            return s;
        }
    }
    throw InvalidArgument("no tensor named '" + std::string(name) + "'");
}

template <class S>
typename EncoderModel<S>::MatrixMap EncoderModel<S>::tensor(std::string_view name) {
    const auto& s = spec(name);
    return MatrixMap(params_.data() + s.offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}

template <class S>
typename EncoderModel<S>::ConstMatrixMap EncoderModel<S>::tensor(std::string_view name) const {
    const auto& s = spec(name);
    return ConstMatrixMap(params_.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                          static_cast<Eigen::Index>(s.cols));
}

template <class S>
typename EncoderModel<S>::MatrixMap EncoderModel<S>::mat(std::size_t offset, std::size_t rows, std::size_t cols,
                                                         bool grad) {
    S* base = grad ? grads_.data() : params_.data();
    return MatrixMap(base + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <class S>
Eigen::Map<typename EncoderModel<S>::RowVector> EncoderModel<S>::vec(std::size_t offset, std::size_t n, bool grad) {
    S* base = grad ? grads_.data() : params_.data();
    return Eigen::Map<RowVector>(base + offset, static_cast<Eigen::Index>(n));
}

template <class S>
void EncoderModel<S>::validate_batch(const TokenBatch& batch) const {
    const std::size_t n = batch.batch_size * batch.seq_len;
    if (batch.ids.size() != n || batch.attention.size() != n) {
        throw InvalidArgument("token batch arrays do not match batch_size x seq_len");
    }
    if (batch.seq_len > config_.max_positions) {
        throw InvalidArgument("sequence length " + std::to_string(batch.seq_len) + " exceeds max_positions " +
                              std::to_string(config_.max_positions));
    }
    for (const auto id : batch.ids) {
        if (id >= config_.vocab_size) {
            throw InvalidArgument("token id " + std::to_string(id) + " outside model vocabulary of " +
                                  std::to_string(config_.vocab_size));
        }
    }
}

template <class S>
const typename EncoderModel<S>::Matrix& EncoderModel<S>::forward_hidden(const TokenBatch& batch) {
    validate_batch(batch);
    cached_batch_ = batch;
    const std::size_t B = batch.batch_size;
    const std::size_t T = batch.seq_len;
    const std::size_t N = B * T;
    const std::size_t d = config_.hidden;
    const std::size_t H = config_.n_heads;
    const std::size_t dh = config_.head_dim();
    const std::size_t f = d * config_.ffn_mult;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));

    Matrix x(N, d);
    {
        auto E = mat(tok_emb_, config_.vocab_size, d);
        auto P = mat(pos_emb_, config_.max_positions, d);
        for (std::size_t i = 0; i < N; ++i) {
            x.row(static_cast<Eigen::Index>(i)) =
                E.row(static_cast<Eigen::Index>(batch.ids[i])) + P.row(static_cast<Eigen::Index>(i % T));
        }
    }

    cache_.assign(config_.n_layers, LayerCache{});
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        const auto& lp = layers_[l];
        auto& c = cache_[l];
        if (config_.attention) {
            c.x_in = x;
            layer_norm(x, vec(lp.ln1_g, d), vec(lp.ln1_b, d), c.ln1_hat, c.ln1_rstd, c.a);
            c.q = (c.a * mat(lp.wq, d, d)).rowwise() + vec(lp.bq, d);
            c.k = (c.a * mat(lp.wk, d, d)).rowwise() + vec(lp.bk, d);
            c.v = (c.a * mat(lp.wv, d, d)).rowwise() + vec(lp.bv, d);
            c.o.setZero(N, d);
            c.probs.assign(B * H, Matrix());
            for (std::size_t b = 0; b < B; ++b) {
                const auto r0 = static_cast<Eigen::Index>(b * T);
                const auto Tn = static_cast<Eigen::Index>(T);
                for (std::size_t h = 0; h < H; ++h) {
                    const auto c0 = static_cast<Eigen::Index>(h * dh);
                    const auto dhn = static_cast<Eigen::Index>(dh);
                    Matrix scores = (c.q.block(r0, c0, Tn, dhn) * c.k.block(r0, c0, Tn, dhn).transpose()) * scale;
                    for (Eigen::Index i = 0; i < Tn; ++i) {
                        S mx = -std::numeric_limits<S>::infinity();
                        for (Eigen::Index j = 0; j < Tn; ++j) {
                            if (batch.attention[b * T + static_cast<std::size_t>(j)]) {
                                mx = std::max(mx, scores(i, j));
                            }
                        }
                        S total = S(0);
                        for (Eigen::Index j = 0; j < Tn; ++j) {
                            const bool keep = batch.attention[b * T + static_cast<std::size_t>(j)] != 0;
                            scores(i, j) = keep ? std::exp(scores(i, j) - mx) : S(0);
                            total += scores(i, j);
                        }
                        if (total > S(0)) {
                            scores.row(i) /= total;
                        }
                    }
                    c.o.block(r0, c0, Tn, dhn) = scores * c.v.block(r0, c0, Tn, dhn);
                    c.probs[b * H + h] = std::move(scores);
                }
            }
            x += (c.o * mat(lp.wo, d, d)).rowwise() + vec(lp.bo, d);
        }
        if (config_.feed_forward) {
            c.x_mid = x;
            layer_norm(x, vec(lp.ln2_g, d), vec(lp.ln2_b, d), c.ln2_hat, c.ln2_rstd, c.f);
            c.h = (c.f * mat(lp.w1, d, f)).rowwise() + vec(lp.b1, f);
            c.g = c.h.unaryExpr([](S v) { return gelu(v); });
            x += (c.g * mat(lp.w2, f, d)).rowwise() + vec(lp.b2, d);
        }
    }
    x_final_ = x;
    layer_norm(x_final_, vec(lnf_g_, d), vec(lnf_b_, d), lnf_hat_, lnf_rstd_, hidden_);
    return hidden_;
}

template <class S>
void EncoderModel<S>::backward_hidden(const Matrix& d_hidden) {
    const auto& batch = cached_batch_;
    const std::size_t B = batch.batch_size;
    const std::size_t T = batch.seq_len;
    const std::size_t N = B * T;
    const std::size_t d = config_.hidden;
    const std::size_t H = config_.n_heads;
    const std::size_t dh = config_.head_dim();
    const std::size_t f = d * config_.ffn_mult;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    if (static_cast<std::size_t>(d_hidden.rows()) != N || static_cast<std::size_t>(d_hidden.cols()) != d) {
        throw InvalidArgument("backward_hidden: gradient shape does not match the last forward pass");
    }

    Matrix dx = layer_norm_backward(d_hidden, lnf_hat_, lnf_rstd_, vec(lnf_g_, d), vec(lnf_g_, d, true),
                                    vec(lnf_b_, d, true));

    for (std::size_t li = config_.n_layers; li-- > 0;) {
        const auto& lp = layers_[li];
        const auto& c = cache_[li];
        if (config_.feed_forward) {
            mat(lp.w2, f, d, true).noalias() += c.g.transpose() * dx;
            vec(lp.b2, d, true) += dx.colwise().sum();
            Matrix dh_pre = (dx * mat(lp.w2, f, d).transpose()).cwiseProduct(c.h.unaryExpr([](S v) {
                return gelu_grad(v);
            }));
            mat(lp.w1, d, f, true).noalias() += c.f.transpose() * dh_pre;
            vec(lp.b1, f, true) += dh_pre.colwise().sum();
            const Matrix df = dh_pre * mat(lp.w1, d, f).transpose();
            dx += layer_norm_backward(df, c.ln2_hat, c.ln2_rstd, vec(lp.ln2_g, d), vec(lp.ln2_g, d, true),
                                      vec(lp.ln2_b, d, true));
        }
        if (config_.attention) {
            mat(lp.wo, d, d, true).noalias() += c.o.transpose() * dx;
            vec(lp.bo, d, true) += dx.colwise().sum();
            const Matrix d_o = dx * mat(lp.wo, d, d).transpose();
            Matrix dq = Matrix::Zero(N, d);
            Matrix dk = Matrix::Zero(N, d);
            Matrix dv = Matrix::Zero(N, d);
            for (std::size_t b = 0; b < B; ++b) {
                const auto r0 = static_cast<Eigen::Index>(b * T);
                const auto Tn = static_cast<Eigen::Index>(T);
                for (std::size_t h = 0; h < H; ++h) {
                    const auto c0 = static_cast<Eigen::Index>(h * dh);
                    const auto dhn = static_cast<Eigen::Index>(dh);
                    const Matrix& P = c.probs[b * H + h];
                    const auto dO = d_o.block(r0, c0, Tn, dhn);
                    dv.block(r0, c0, Tn, dhn).noalias() = P.transpose() * dO;
                    const Matrix dP = dO * c.v.block(r0, c0, Tn, dhn).transpose();
                    const ColVector row_dot = dP.cwiseProduct(P).rowwise().sum();
                    const Matrix dS = (P.array() * (dP.colwise() - row_dot).array()).matrix() * scale;
                    dq.block(r0, c0, Tn, dhn).noalias() = dS * c.k.block(r0, c0, Tn, dhn);
                    dk.block(r0, c0, Tn, dhn).noalias() = dS.transpose() * c.q.block(r0, c0, Tn, dhn);
                }
            }
            mat(lp.wq, d, d, true).noalias() += c.a.transpose() * dq;
            mat(lp.wk, d, d, true).noalias() += c.a.transpose() * dk;
            mat(lp.wv, d, d, true).noalias() += c.a.transpose() * dv;
            vec(lp.bq, d, true) += dq.colwise().sum();
            vec(lp.bk, d, true) += dk.colwise().sum();
            vec(lp.bv, d, true) += dv.colwise().sum();
            const Matrix da =
                dq * mat(lp.wq, d, d).transpose() + dk * mat(lp.wk, d, d).transpose() + dv * mat(lp.wv, d, d).transpose();
            dx += layer_norm_backward(da, c.ln1_hat, c.ln1_rstd, vec(lp.ln1_g, d), vec(lp.ln1_g, d, true),
                                      vec(lp.ln1_b, d, true));
        }
    }

    auto dE = mat(tok_emb_, config_.vocab_size, d, true);
    auto dP = mat(pos_emb_, config_.max_positions, d, true);
    for (std::size_t i = 0; i < N; ++i) {
        dE.row(static_cast<Eigen::Index>(batch.ids[i])) += dx.row(static_cast<Eigen::Index>(i));
        dP.row(static_cast<Eigen::Index>(i % T)) += dx.row(static_cast<Eigen::Index>(i));
    }
}

template <class S>
typename EncoderModel<S>::Matrix EncoderModel<S>::head_logits(const Matrix& rows) const {
    const auto d = static_cast<Eigen::Index>(config_.hidden);
    const auto V = static_cast<Eigen::Index>(config_.vocab_size);
    ConstMatrixMap E(params_.data() + tok_emb_, V, d);
    if (config_.tied_head) {
        return rows * E.transpose();
    }
    ConstMatrixMap W(params_.data() + head_w_, d, V);
    Eigen::Map<const RowVector> bias(params_.data() + head_b_, V);
    Matrix out = rows * W;
    out.rowwise() += bias;
    return out;
}

template <class S>
void EncoderModel<S>::head_backward(const Matrix& rows, const Matrix& d_logits, Matrix& d_rows) {
    const std::size_t d = config_.hidden;
    const std::size_t V = config_.vocab_size;
    if (config_.tied_head) {
        mat(tok_emb_, V, d, true).noalias() += d_logits.transpose() * rows;
        d_rows = d_logits * mat(tok_emb_, V, d);
    } else {
        mat(head_w_, d, V, true).noalias() += rows.transpose() * d_logits;
        vec(head_b_, V, true) += d_logits.colwise().sum();
        d_rows = d_logits * mat(head_w_, d, V).transpose();
    }
}

template <class S>
double EncoderModel<S>::forward_mlm(const MaskedBatch& batch, Matrix* logits) {
    if (batch.labels.size() != batch.tokens.ids.size()) {
        throw InvalidArgument("label array does not match batch shape");
    }
    const Matrix& hidden = forward_hidden(batch.tokens);
    if (logits != nullptr) {
        *logits = head_logits(hidden);
    }
    LossSum loss;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
        if (batch.labels[i] != kIgnoreLabel) {
            rows.push_back(static_cast<Eigen::Index>(i));
        }
    }
    if (rows.empty()) {
        throw DataError("batch has no labeled positions");
    }
    const Matrix sel = hidden(rows, Eigen::all);
    const Matrix z = logits != nullptr ? Matrix((*logits)(rows, Eigen::all)) : head_logits(sel);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const S mx = z.row(r).maxCoeff();
        const double lse = static_cast<double>(mx) + std::log(static_cast<double>((z.row(r).array() - mx).exp().sum()));
        loss.sum += lse - static_cast<double>(z(r, batch.labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])]));
    }
    loss.count = rows.size();
    return loss.mean();
}

template <class S>
LossSum EncoderModel<S>::accumulate_mlm(const MaskedBatch& batch, S scale) {
    if (batch.labels.size() != batch.tokens.ids.size()) {
        throw InvalidArgument("label array does not match batch shape");
    }
    const Matrix& hidden = forward_hidden(batch.tokens);
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
        if (batch.labels[i] != kIgnoreLabel) {
            rows.push_back(static_cast<Eigen::Index>(i));
        }
    }
    LossSum loss;
    loss.count = rows.size();
    if (rows.empty()) {
        return loss;
    }
    const Matrix sel = hidden(rows, Eigen::all);
    Matrix z = head_logits(sel);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const auto label = batch.labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])];
        const S mx = z.row(r).maxCoeff();
        const S target = z(r, label);
        z.row(r) = (z.row(r).array() - mx).exp();
        const S total = z.row(r).sum();
        loss.sum += static_cast<double>(mx) + std::log(static_cast<double>(total)) - static_cast<double>(target);
        z.row(r) /= total;
        z(r, label) -= S(1);
    }
    z *= scale;
    Matrix d_rows;
    head_backward(sel, z, d_rows);
    Matrix d_hidden = Matrix::Zero(hidden.rows(), hidden.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        d_hidden.row(rows[r]) = d_rows.row(static_cast<Eigen::Index>(r));
    }
    backward_hidden(d_hidden);
    return loss;
}

template <class S>
template <class T>
EncoderModel<T> EncoderModel<S>::cast() const {
    EncoderModel<T> out(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        out.params_[i] = static_cast<T>(params_[i]);
    }
    return out;
}

template class EncoderModel<float>;
template class EncoderModel<double>;
template EncoderModel<double> EncoderModel<float>::cast<double>() const;
template EncoderModel<float> EncoderModel<double>::cast<float>() const;
template EncoderModel<float> EncoderModel<float>::cast<float>() const;
template EncoderModel<double> EncoderModel<double>::cast<double>() const;

}  // namespace sotk::mlm
