#include "sotk/mlm/batch.hpp"

#include <algorithm>

#include "sotk/common/error.hpp"

namespace sotk::mlm {

std::size_t MaskedBatch::labeled() const {
    return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != kIgnoreLabel; }));
}

MaskedRow mask_sequence(std::span<const TokenId> ids, const MaskOptions& options, Rng& rng) {
    if (!(options.rate > 0.0 && options.rate < 1.0)) {
        throw InvalidArgument("mask rate must be in (0, 1)");
    }
    if (options.vocab_size < bpe::kMinVocabSize) {
        throw InvalidArgument("masking needs a vocabulary that includes the special tokens");
    }
    if (std::all_of(ids.begin(), ids.end(), [](TokenId id) { return bpe::BpeVocab::is_special(id); })) {
        throw InvalidArgument("sequence has no maskable (non-special) positions");
    }
    const std::uint64_t n_regular = options.vocab_size - bpe::kSpecialCount;
    MaskedRow row;
    row.input.assign(ids.begin(), ids.end());
    row.labels.assign(ids.size(), kIgnoreLabel);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (bpe::BpeVocab::is_special(ids[i]) || !rng.bernoulli(options.rate)) {
            continue;
        }
        row.labels[i] = static_cast<std::int32_t>(ids[i]);
        const double u = rng.uniform();
        if (u < options.replace_with_mask) {
            row.input[i] = kMaskId;
        } else if (u < options.replace_with_mask + options.replace_with_random) {
            auto r = static_cast<TokenId>(rng.below(n_regular));
            if (r >= bpe::kFirstSpecialId) {
                r += static_cast<TokenId>(bpe::kSpecialCount);
            }
            row.input[i] = r;
        }
    }
    return row;
}

MaskedBatch make_masked_batch(std::span<const std::vector<TokenId>> sequences, std::size_t seq_len,
                              const MaskOptions& options, Rng& rng) {
    MaskedBatch b;
    b.mask_rate = options.rate;
    b.tokens.batch_size = sequences.size();
    b.tokens.seq_len = seq_len;
    b.tokens.ids.assign(sequences.size() * seq_len, kPadId);
    b.tokens.attention.assign(sequences.size() * seq_len, 0);
    b.labels.assign(sequences.size() * seq_len, kIgnoreLabel);
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto n = std::min(seq_len, sequences[s].size());
        const auto row = mask_sequence(std::span<const TokenId>(sequences[s]).first(n), options, rng);
        std::copy(row.input.begin(), row.input.end(), b.tokens.ids.begin() + static_cast<std::ptrdiff_t>(s * seq_len));
        std::copy(row.labels.begin(), row.labels.end(), b.labels.begin() + static_cast<std::ptrdiff_t>(s * seq_len));
        std::fill_n(b.tokens.attention.begin() + static_cast<std::ptrdiff_t>(s * seq_len), n, 1);
    }
    return b;
}

TokenBatch make_token_batch(std::span<const std::vector<TokenId>> sequences, std::size_t max_len) {
    TokenBatch b;
    b.batch_size = sequences.size();
    for (const auto& s : sequences) {
        b.seq_len = std::max(b.seq_len, std::min(max_len, s.size()));
    }
    b.ids.assign(b.batch_size * b.seq_len, kPadId);
    b.attention.assign(b.batch_size * b.seq_len, 0);
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto n = std::min(b.seq_len, sequences[s].size());
        for (std::size_t t = 0; t < n; ++t) {
            b.ids[s * b.seq_len + t] = sequences[s][t];
            b.attention[s * b.seq_len + t] = 1;
        }
    }
    return b;
}

MaskedBatch concat_batches(std::span<const MaskedBatch> parts) {
    MaskedBatch out;
    if (parts.empty()) {
        return out;
    }
    out.tokens.seq_len = parts[0].tokens.seq_len;
    out.mask_rate = parts[0].mask_rate;
    for (const auto& p : parts) {
        if (p.tokens.seq_len != out.tokens.seq_len) {
            throw InvalidArgument("cannot concatenate batches with different sequence lengths");
        }
        out.tokens.batch_size += p.tokens.batch_size;
        out.tokens.ids.insert(out.tokens.ids.end(), p.tokens.ids.begin(), p.tokens.ids.end());
        out.tokens.attention.insert(out.tokens.attention.end(), p.tokens.attention.begin(), p.tokens.attention.end());
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}

BatchPlan plan_batches(std::uint64_t target_tokens, std::size_t micro_batch_seqs, std::size_t seq_len,
                       std::size_t max_positions) {
    if (target_tokens == 0 || micro_batch_seqs == 0 || seq_len == 0) {
        throw InvalidArgument("plan_batches arguments must be positive");
    }
    if (seq_len > max_positions) {
        throw InvalidArgument("seq_len " + std::to_string(seq_len) + " exceeds max_positions " +
                              std::to_string(max_positions));
    }
    BatchPlan plan;
    plan.micro_batch_seqs = micro_batch_seqs;
    plan.seq_len = seq_len;
    const std::uint64_t per_micro = static_cast<std::uint64_t>(micro_batch_seqs) * seq_len;
    plan.accumulation_steps = static_cast<std::size_t>((target_tokens + per_micro - 1) / per_micro);
    plan.effective_tokens = per_micro * plan.accumulation_steps;
    return plan;
}

}  // namespace sotk::mlm
