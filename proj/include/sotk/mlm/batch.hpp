#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sotk/bpe/vocab.hpp"
#include "sotk/common/rng.hpp"

namespace sotk::mlm {

using bpe::TokenId;

inline constexpr std::int32_t kIgnoreLabel = -1;
inline constexpr TokenId kPadId = bpe::special_id(bpe::Special::Pad);
inline constexpr TokenId kMaskId = bpe::special_id(bpe::Special::Mask);
inline constexpr TokenId kClsId = bpe::special_id(bpe::Special::Cls);

// Row-major [batch_size x seq_len] ids with a key-padding mask (1 = real token).
struct TokenBatch {
    std::size_t batch_size = 0;
    std::size_t seq_len = 0;
    std::vector<TokenId> ids;
    std::vector<std::uint8_t> attention;
};

struct MaskedBatch {
    TokenBatch tokens;
    // Original id at masked positions, kIgnoreLabel elsewhere.
    std::vector<std::int32_t> labels;
    double mask_rate = 0.0;

    std::size_t labeled() const;
};

struct MaskOptions {
    double rate = 0.15;
    // Of the selected positions: this share becomes <mask>, the next share a
    // random non-special id, the remainder stays unchanged.
    double replace_with_mask = 0.8;
    double replace_with_random = 0.1;
    std::size_t vocab_size = bpe::kMinVocabSize;
};

struct MaskedRow {
    std::vector<TokenId> input;
    std::vector<std::int32_t> labels;
};

// Special ids are never selected. Throws on a rate outside (0, 1) or when no
// position is maskable.
MaskedRow mask_sequence(std::span<const TokenId> ids, const MaskOptions& options, Rng& rng);

// Pads (or crops) every sequence to `seq_len` and masks each row.
MaskedBatch make_masked_batch(std::span<const std::vector<TokenId>> sequences, std::size_t seq_len,
                              const MaskOptions& options, Rng& rng);

// Unmasked batch padded to the longest sequence (at most `max_len`).
TokenBatch make_token_batch(std::span<const std::vector<TokenId>> sequences, std::size_t max_len);

// Stacks batches with equal seq_len.
MaskedBatch concat_batches(std::span<const MaskedBatch> parts);

struct BatchPlan {
    std::size_t micro_batch_seqs = 0;
    std::size_t seq_len = 0;
    std::size_t accumulation_steps = 0;
    std::uint64_t effective_tokens = 0;
};

// Smallest accumulation count whose micro_batch_seqs * seq_len * a reaches target_tokens.
BatchPlan plan_batches(std::uint64_t target_tokens, std::size_t micro_batch_seqs, std::size_t seq_len,
                       std::size_t max_positions = 2048);

}  // namespace sotk::mlm
