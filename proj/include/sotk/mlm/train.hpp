#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sotk/corpus/writer.hpp"
#include "sotk/mlm/batch.hpp"
#include "sotk/mlm/encoder.hpp"

namespace sotk::mlm {

// SGD with heavy-ball momentum, linear warmup and optional global-norm clipping:
//   v <- momentum * v + g;  theta <- theta - lr_t * v,  lr_t = lr * min(1, (t+1)/warmup)
struct OptimizerConfig {
    double lr = 1e-3;
    double momentum = 0.9;
    std::size_t warmup_steps = 0;
    double clip_norm = 0.0;  // 0 disables clipping
};

template <class S>
class SgdMomentum {
public:
    SgdMomentum(std::size_t n_params, const OptimizerConfig& config) : config_(config), velocity_(n_params, S(0)) {}

    double lr_at(std::size_t step) const;
    // Applies one update and advances the step counter.
    void step(std::span<S> params, std::span<const S> grads);
    std::size_t steps_taken() const { return steps_; }

private:
    OptimizerConfig config_;
    std::vector<S> velocity_;
    std::size_t steps_ = 0;
};

// Supplies micro-batch `micro` of optimizer step `step`.
using MicroBatchFn = std::function<MaskedBatch(std::size_t step, std::size_t micro)>;

// Per-step mean loss over all labeled positions of that step's micro-batches.
using LossTrace = std::vector<double>;

// Each optimizer step sums gradients over `accumulation_steps` micro-batches and
// normalizes by their total labeled count, so a micro-batches equal one a-times
// larger batch. Throws DataError on a non-finite loss, naming the step.
template <class S>
LossTrace train_loop(EncoderModel<S>& model, const MicroBatchFn& batches, std::size_t accumulation_steps,
                     std::size_t steps, const OptimizerConfig& optimizer);

struct PretrainConfig {
    std::size_t steps = 100;
    OptimizerConfig optimizer;
    MaskOptions masking;
    std::uint64_t seed = 0;
    // When set, the shard must have been written under this vocabulary.
    std::optional<std::uint64_t> vocab_checksum;
};

// Draws micro-batches from a token shard: plan.micro_batch_seqs random samples,
// each cropped to a random window of at most plan.seq_len tokens, then masked.
template <class S>
LossTrace train_mlm(EncoderModel<S>& model, const corpus::TokenShard& shard, const BatchPlan& plan,
                    const PretrainConfig& config);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    std::size_t n_checked = 0;
};

// Central differences on every parameter of a double-precision model against
// the analytic gradient of the mean MLM loss. Relative error per parameter is
// |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(EncoderModel<double>& model, const MaskedBatch& batch, double epsilon = 1e-5,
                           double floor = 1e-6);

// Checkpoint: "SOTKCKPT", u32 version, config block, tensor table, f32 LE weights, FNV-1a trailer.
void save_checkpoint(const EncoderModel<float>& model, const std::filesystem::path& path);
EncoderModel<float> load_checkpoint(const std::filesystem::path& path);

void write_loss_csv(const LossTrace& trace, const std::filesystem::path& path);

extern template class SgdMomentum<float>;
extern template class SgdMomentum<double>;

}  // namespace sotk::mlm
