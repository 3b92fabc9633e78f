#include "sotk/corpus/stats.hpp"

#include <algorithm>

#include "sotk/common/error.hpp"

namespace sotk::corpus {

std::vector<std::string> bucket_labels(std::span<const std::size_t> edges) {
    std::vector<std::string> labels;
    std::size_t lower = 0;
    for (const auto edge : edges) {
        labels.push_back(std::to_string(lower) + "\xE2\x80\x93" + std::to_string(edge));
        lower = edge + 1;
    }
    labels.push_back(">" + std::to_string(edges.empty() ? 0 : edges.back()));
    return labels;
}

std::size_t bucket_index(std::size_t length, std::span<const std::size_t> edges) {
    return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), length) - edges.begin());
}

CorpusStats corpus_stats(std::span<const PretrainSample> samples, const bpe::BpeVocab* tokenizer,
                         std::span<const std::size_t> bucket_edges) {
    for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
        if (bucket_edges[i] <= bucket_edges[i - 1]) {
            throw InvalidArgument("bucket edges must be strictly increasing");
        }
    }
    CorpusStats stats;
    stats.n_samples = samples.size();
    const bool all_tokenized =
        !samples.empty() && std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.token_len; });
    stats.token_lengths = tokenizer != nullptr || all_tokenized;

    const auto labels = bucket_labels(bucket_edges);
    std::vector<std::uint64_t> counts(labels.size(), 0);
    std::vector<std::size_t> comments;
    comments.reserve(samples.size());
    std::uint64_t tokens = 0;
    for (const auto& s : samples) {
        comments.push_back(s.n_comments);
        stats.n_comments_total += s.n_comments;
        std::size_t length = s.char_len;
        if (tokenizer != nullptr) {
            length = tokenizer->encode(s.text).size();
        } else if (all_tokenized) {
            length = *s.token_len;
        }
        tokens += length;
        ++counts[bucket_index(length, bucket_edges)];
    }
    if (stats.token_lengths) {
        stats.total_tokens = tokens;
    }
    for (std::size_t b = 0; b < labels.size(); ++b) {
        stats.length_histogram.emplace_back(labels[b], counts[b]);
    }
    if (!comments.empty()) {
        stats.comments_per_post_mean =
            static_cast<double>(stats.n_comments_total) / static_cast<double>(comments.size());
        const auto mid = comments.begin() + static_cast<std::ptrdiff_t>((comments.size() - 1) / 2);
        std::nth_element(comments.begin(), mid, comments.end());
        stats.comments_per_post_median = static_cast<double>(*mid);
    }
    return stats;
}

}  // namespace sotk::corpus
