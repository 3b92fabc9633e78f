#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sotk/bpe/vocab.hpp"
#include "sotk/corpus/sample.hpp"

namespace sotk::corpus {

inline const std::vector<std::size_t> kDefaultBucketEdges = {512, 1024, 2048};

struct CorpusStats {
    std::size_t n_samples = 0;
    std::size_t n_comments_total = 0;
    double comments_per_post_mean = 0.0;
    // Lower median, so the value always occurs in the data.
    double comments_per_post_median = 0.0;
    // Buckets in ascending order; "0–512", "513–1024", ..., ">2048".
    std::vector<std::pair<std::string, std::uint64_t>> length_histogram;
    bool token_lengths = false;
    std::optional<std::uint64_t> total_tokens;
};

std::vector<std::string> bucket_labels(std::span<const std::size_t> edges);
// Index of the bucket holding `length`: first edge >= length, else the open bucket.
std::size_t bucket_index(std::size_t length, std::span<const std::size_t> edges);

// Histogram over token lengths when a tokenizer is given (or every sample already
// carries token_len), otherwise over character lengths.
CorpusStats corpus_stats(std::span<const PretrainSample> samples, const bpe::BpeVocab* tokenizer = nullptr,
                         std::span<const std::size_t> bucket_edges = kDefaultBucketEdges);

}  // namespace sotk::corpus
