#include "sotk/mlm/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sotk/common/binary_io.hpp"
#include "sotk/common/error.hpp"
#include "sotk/common/rng.hpp"

namespace sotk::mlm {

namespace {

constexpr std::string_view kCheckpointMagic = "SOTKCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 over the combined words
    std::uint64_t z = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

template <class S>
double SgdMomentum<S>::lr_at(std::size_t step) const {
    if (config_.warmup_steps == 0) {
        return config_.lr;
    }
    return config_.lr * std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(config_.warmup_steps));
}

template <class S>
void SgdMomentum<S>::step(std::span<S> params, std::span<const S> grads) {
    if (params.size() != velocity_.size() || grads.size() != velocity_.size()) {
        throw InvalidArgument("optimizer was built for a different parameter count");
    }
    S clip = S(1);
    if (config_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto g : grads) {
            sq += static_cast<double>(g) * static_cast<double>(g);
        }
        const double norm = std::sqrt(sq);
        if (norm > config_.clip_norm) {
            clip = static_cast<S>(config_.clip_norm / norm);
        }
    }
    const auto lr = static_cast<S>(lr_at(steps_));
    const auto mu = static_cast<S>(config_.momentum);
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = mu * velocity_[i] + clip * grads[i];
        params[i] -= lr * velocity_[i];
    }
    ++steps_;
}

template <class S>
LossTrace train_loop(EncoderModel<S>& model, const MicroBatchFn& batches, std::size_t accumulation_steps,
                     std::size_t steps, const OptimizerConfig& optimizer) {
    if (accumulation_steps == 0) {
        throw InvalidArgument("accumulation_steps must be positive");
    }
    SgdMomentum<S> opt(model.parameter_count(), optimizer);
    LossTrace trace;
    trace.reserve(steps);
    std::vector<MaskedBatch> micro(accumulation_steps);
    for (std::size_t step = 0; step < steps; ++step) {
        std::size_t total = 0;
        for (std::size_t m = 0; m < accumulation_steps; ++m) {
            micro[m] = batches(step, m);
            total += micro[m].labeled();
        }
        if (total == 0) {
            throw DataError("step " + std::to_string(step) + ": no labeled positions in any micro-batch");
        }
        model.zero_grad();
        double loss = 0.0;
        const S scale = S(1) / static_cast<S>(total);
        for (const auto& b : micro) {
            loss += model.accumulate_mlm(b, scale).sum;
        }
        loss /= static_cast<double>(total);
        if (!std::isfinite(loss)) {
            throw DataError("non-finite loss at step " + std::to_string(step));
        }
        trace.push_back(loss);
        opt.step(model.parameters(), model.gradients());
    }
    return trace;
}

template <class S>
LossTrace train_mlm(EncoderModel<S>& model, const corpus::TokenShard& shard, const BatchPlan& plan,
                    const PretrainConfig& config) {
    if (config.vocab_checksum) {
        shard.require_vocab(*config.vocab_checksum);
    }
    if (plan.seq_len > model.config().max_positions) {
        throw InvalidArgument("batch plan seq_len exceeds the model's max_positions");
    }
    const auto maskable = [](std::span<const TokenId> ids) {
        return std::any_of(ids.begin(), ids.end(), [](TokenId id) { return !bpe::BpeVocab::is_special(id); });
    };
    // Samples whose leading window has something to mask.
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < shard.size(); ++i) {
        const auto s = shard.sample(i);
        if (maskable(s.first(std::min(plan.seq_len, s.size())))) {
            usable.push_back(i);
        }
        for (const auto id : s) {
            if (id >= model.config().vocab_size) {
                throw DataError("shard token id " + std::to_string(id) + " exceeds model vocab_size " +
                                std::to_string(model.config().vocab_size));
            }
        }
    }
    if (usable.empty()) {
        throw DataError("token shard has no maskable samples");
    }
    MaskOptions masking = config.masking;
    masking.vocab_size = model.config().vocab_size;
    const MicroBatchFn draw = [&](std::size_t step, std::size_t micro) {
        Rng rng(mix_seed(config.seed, step, micro));
        std::vector<std::vector<TokenId>> seqs;
        seqs.reserve(plan.micro_batch_seqs);
        for (std::size_t k = 0; k < plan.micro_batch_seqs; ++k) {
            const auto sample = shard.sample(usable[rng.below(usable.size())]);
            std::size_t start = 0;
            if (sample.size() > plan.seq_len) {
                start = rng.below(sample.size() - plan.seq_len + 1);
            }
            auto window = sample.subspan(start, std::min(plan.seq_len, sample.size()));
            if (!maskable(window)) {
                window = sample.first(window.size());
            }
            seqs.emplace_back(window.begin(), window.end());
        }
        return make_masked_batch(seqs, plan.seq_len, masking, rng);
    };
    return train_loop(model, draw, plan.accumulation_steps, config.steps, config.optimizer);
}

GradCheckResult grad_check(EncoderModel<double>& model, const MaskedBatch& batch, double epsilon, double floor) {
    const std::size_t labeled = batch.labeled();
    if (labeled == 0) {
        throw DataError("grad_check batch has no labeled positions");
    }
    model.zero_grad();
    model.accumulate_mlm(batch, 1.0 / static_cast<double>(labeled));
    const std::vector<double> analytic(model.gradients().begin(), model.gradients().end());
    auto params = model.parameters();
    GradCheckResult result;
    for (const auto& spec : model.tensors()) {
        for (std::size_t k = 0; k < spec.size(); ++k) {
            const std::size_t i = spec.offset + k;
            const double saved = params[i];
            params[i] = saved + epsilon;
            const double up = model.forward_mlm(batch);
            params[i] = saved - epsilon;
            const double down = model.forward_mlm(batch);
            params[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            const double rel = std::abs(analytic[i] - numeric) / denom;
            if (rel > result.max_relative_error || result.n_checked == 0) {
                result.max_relative_error = rel;
                result.worst_tensor = spec.name;
                result.worst_index = k;
            }
            ++result.n_checked;
        }
    }
    return result;
}

void save_checkpoint(const EncoderModel<float>& model, const std::filesystem::path& path) {
    const auto& c = model.config();
    ByteWriter w;
    w.put_bytes(kCheckpointMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    for (std::size_t v : {c.n_layers, c.hidden, c.n_heads, c.ffn_mult, c.max_positions, c.vocab_size}) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
    }
    w.put<std::uint8_t>(c.tied_head);
    w.put<std::uint8_t>(c.attention);
    w.put<std::uint8_t>(c.feed_forward);
    w.put<double>(c.init_std);
    w.put<std::uint64_t>(c.seed);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.tensors().size()));
    for (const auto& t : model.tensors()) {
        w.put_string(t.name);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rows));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.cols));
    }
    for (const float v : model.parameters()) {
        w.put<float>(v);
    }
    w.put<std::uint64_t>(fnv1a64(w.bytes()));
    write_file(path.string(), w.bytes());
}

EncoderModel<float> load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = read_file(path.string());
    if (bytes.size() < kCheckpointMagic.size() + 8) {
        throw DataError("checkpoint truncated: " + path.string());
    }
    const std::string_view all(bytes);
    const auto payload = all.substr(0, all.size() - 8);
    ByteReader trailer(all.substr(all.size() - 8), "checkpoint");
    if (trailer.get<std::uint64_t>() != fnv1a64(payload)) {
        throw DataError("checkpoint checksum mismatch: " + path.string());
    }
    ByteReader r(payload, "checkpoint " + path.string());
    if (r.get_bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
        throw DataError("not a checkpoint: " + path.string());
    }
    if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(v));
    }
    EncoderConfig c;
    c.n_layers = r.get<std::uint32_t>();
    c.hidden = r.get<std::uint32_t>();
    c.n_heads = r.get<std::uint32_t>();
    c.ffn_mult = r.get<std::uint32_t>();
    c.max_positions = r.get<std::uint32_t>();
    c.vocab_size = r.get<std::uint32_t>();
    c.tied_head = r.get<std::uint8_t>() != 0;
    c.attention = r.get<std::uint8_t>() != 0;
    c.feed_forward = r.get<std::uint8_t>() != 0;
    c.init_std = r.get<double>();
    c.seed = r.get<std::uint64_t>();
    EncoderModel<float> model(c);
    const auto n_tensors = r.get<std::uint32_t>();
    if (n_tensors != model.tensors().size()) {
        throw DataError("checkpoint tensor table does not match its config");
    }
    for (const auto& t : model.tensors()) {
        const auto name = r.get_string();
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        if (name != t.name || rows != t.rows || cols != t.cols) {
            throw DataError("checkpoint tensor '" + name + "' does not match the expected layout");
        }
    }
    for (auto& v : model.parameters()) {
        v = r.get<float>();
    }
    if (r.remaining() != 0) {
        throw DataError("checkpoint has trailing bytes");
    }
    return model;
}

void write_loss_csv(const LossTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, trace[i]);
        out << buf;
    }
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;
template LossTrace train_loop(EncoderModel<float>&, const MicroBatchFn&, std::size_t, std::size_t,
                              const OptimizerConfig&);
template LossTrace train_loop(EncoderModel<double>&, const MicroBatchFn&, std::size_t, std::size_t,
                              const OptimizerConfig&);
template LossTrace train_mlm(EncoderModel<float>&, const corpus::TokenShard&, const BatchPlan&, const PretrainConfig&);
template LossTrace train_mlm(EncoderModel<double>&, const corpus::TokenShard&, const BatchPlan&,
                             const PretrainConfig&);

}  // namespace sotk::mlm
