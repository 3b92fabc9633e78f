#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sotk/mlm/batch.hpp"
#include "sotk/mlm/config.hpp"

namespace sotk::mlm {

struct TensorSpec {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

// Summed (not averaged) cross-entropy and the number of terms in it.
struct LossSum {
    double sum = 0.0;
    std::size_t count = 0;
    double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

// Pre-norm transformer encoder: every sublayer computes x + Sublayer(LayerNorm(x)),
// and a final LayerNorm feeds the heads. Parameters live in one flat buffer in
// declaration order (see tensors()); gradients mirror it.
//
// One instance is single-threaded: forward_hidden caches activations that
// backward_hidden consumes.
template <class S>
class EncoderModel {
public:
    using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;
    using ColVector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    using MatrixMap = Eigen::Map<Matrix>;
    using ConstMatrixMap = Eigen::Map<const Matrix>;

    explicit EncoderModel(const EncoderConfig& config);

    const EncoderConfig& config() const { return config_; }
    std::size_t parameter_count() const { return params_.size(); }
    const std::vector<TensorSpec>& tensors() const { return specs_; }

    std::span<S> parameters() { return params_; }
    std::span<const S> parameters() const { return params_; }
    std::span<S> gradients() { return grads_; }
    std::span<const S> gradients() const { return grads_; }
    void zero_grad();

    // Throws InvalidArgument for an unknown name.
    MatrixMap tensor(std::string_view name);
    ConstMatrixMap tensor(std::string_view name) const;
    const TensorSpec& spec(std::string_view name) const;

    // Final-normed hidden states, [batch*seq_len x hidden].
    const Matrix& forward_hidden(const TokenBatch& batch);
    // Backpropagates dL/dhidden from the last forward_hidden into gradients().
    void backward_hidden(const Matrix& d_hidden);

    // Mean cross-entropy over labeled positions plus full logits [B*T x V].
    // Throws DataError when no position is labeled.
    double forward_mlm(const MaskedBatch& batch, Matrix* logits = nullptr);
    // Adds scale * d(sum CE)/d(theta) to gradients(); returns the unscaled sum.
    LossSum accumulate_mlm(const MaskedBatch& batch, S scale);

    // MLM logits for the given hidden rows.
    Matrix head_logits(const Matrix& hidden_rows) const;

    template <class T>
    EncoderModel<T> cast() const;

private:
    template <class>
    friend class EncoderModel;

    struct LayerParams {
        std::size_t ln1_g = 0, ln1_b = 0, wq = 0, bq = 0, wk = 0, bk = 0, wv = 0, bv = 0, wo = 0, bo = 0;
        std::size_t ln2_g = 0, ln2_b = 0, w1 = 0, b1 = 0, w2 = 0, b2 = 0;
    };
    struct LayerCache {
        Matrix x_in, ln1_hat, a, q, k, v, o;
        ColVector ln1_rstd;
        std::vector<Matrix> probs;  // per (sequence, head), [T x T]
        Matrix x_mid, ln2_hat, f, h, g;
        ColVector ln2_rstd;
    };

    std::size_t add_tensor(const std::string& name, std::size_t rows, std::size_t cols);
    MatrixMap mat(std::size_t offset, std::size_t rows, std::size_t cols, bool grad = false);
    Eigen::Map<RowVector> vec(std::size_t offset, std::size_t n, bool grad = false);
    void validate_batch(const TokenBatch& batch) const;
    void head_backward(const Matrix& hidden_rows, const Matrix& d_logits, Matrix& d_hidden_rows);

    EncoderConfig config_;
    std::vector<TensorSpec> specs_;
    std::vector<S> params_;
    std::vector<S> grads_;
    std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
    std::vector<LayerParams> layers_;

    // Activations of the last forward pass.
    TokenBatch cached_batch_;
    std::vector<LayerCache> cache_;
    Matrix x_final_, lnf_hat_, hidden_;
    ColVector lnf_rstd_;
};

extern template class EncoderModel<float>;
extern template class EncoderModel<double>;

}  // namespace sotk::mlm
