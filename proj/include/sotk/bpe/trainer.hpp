#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "sotk/bpe/vocab.hpp"

namespace sotk::bpe {

struct TrainOptions {
    std::size_t vocab_size = 50'000;
    // Each corpus sample is kept independently with this probability.
    double sample_fraction = 0.10;
    std::uint64_t seed = 0;
    // Workers for the initial pair count; the merge list does not depend on it.
    unsigned threads = 1;
    PreSplit pre_split = PreSplit::None;
};

// Greedy BPE: repeatedly merges the most frequent adjacent pair until the
// vocabulary is full or no pair occurs at least twice. Frequency ties go to the
// lexicographically smallest (left bytes, right bytes).
BpeVocab train_bpe(std::span<const std::string> corpus, const TrainOptions& options);

}  // namespace sotk::bpe
