#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sotk/metrics/metrics.hpp"
#include "sotk/mlm/encoder.hpp"
#include "sotk/mlm/train.hpp"

namespace sotk::mlm {

enum class HeadKind { Sequence, Token };
// Sequence heads read the <cls> position by default; Mean averages real tokens.
enum class Pooling { Cls, Mean };

// Sequence tasks: one label. Token tasks: one label per id, kIgnoreLabel allowed.
struct LabeledExample {
    std::vector<TokenId> ids;
    std::vector<int> labels;
};

template <class S>
class Classifier {
public:
    using Matrix = typename EncoderModel<S>::Matrix;

    Classifier(EncoderModel<S> encoder, HeadKind kind, std::size_t n_classes, std::uint64_t seed = 0,
               Pooling pooling = Pooling::Cls);

    EncoderModel<S>& encoder() { return encoder_; }
    const EncoderModel<S>& encoder() const { return encoder_; }
    HeadKind kind() const { return kind_; }
    Pooling pooling() const { return pooling_; }
    std::size_t n_classes() const { return n_classes_; }
    std::span<S> head_parameters() { return head_; }
    std::span<S> head_gradients() { return head_grad_; }

    // Weighted cross-entropy sum(w_y * CE) / sum(w_y) over labeled items; also
    // fills gradients for both encoder and head when `backward` is set.
    double loss(std::span<const LabeledExample> examples, std::span<const double> class_weights, bool backward);

    // One prediction per label slot: a single class for sequence tasks, one per
    // id for token tasks.
    std::vector<std::vector<int>> predict(std::span<const LabeledExample> examples, std::size_t batch_size = 32);

    void validate(std::span<const LabeledExample> examples) const;

private:
    Matrix logits(const TokenBatch& batch, Matrix* pooled_rows);

    EncoderModel<S> encoder_;
    HeadKind kind_;
    Pooling pooling_;
    std::size_t n_classes_;
    std::vector<S> head_;       // weight [hidden x n_classes] then bias [n_classes]
    std::vector<S> head_grad_;
};

template <class S>
Classifier<S> attach_head(EncoderModel<S> encoder, HeadKind kind, std::size_t n_classes, std::uint64_t seed = 0) {
    return Classifier<S>(std::move(encoder), kind, n_classes, seed);
}

struct FinetuneConfig {
    std::size_t batch_size = 32;
    double lr = 1e-5;
    double momentum = 0.9;
    std::size_t warmup_steps = 0;
    std::size_t epochs = 3;
    metrics::WeightMode weight_mode = metrics::WeightMode::InverseFrequency;
    std::uint64_t seed = 0;
};

struct FinetuneResult {
    LossTrace loss_trace;  // one entry per optimizer step
    metrics::ClassWeights weights;
};

// Class weights come from the training label counts; an absent class is an
// error under inverse-frequency weighting.
template <class S>
FinetuneResult finetune(Classifier<S>& classifier, std::span<const LabeledExample> train, const FinetuneConfig& config);

extern template class Classifier<float>;
extern template class Classifier<double>;

}  // namespace sotk::mlm
