#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sotk/bpe/vocab.hpp"
#include "sotk/corpus/sample.hpp"

namespace sotk::corpus {

enum class CorpusFormat { JsonLines, TokenShard };

// Written next to every corpus artifact as `<path>.manifest.json`.
struct CorpusManifest {
    CorpusFormat format = CorpusFormat::JsonLines;
    std::size_t n_samples = 0;
    std::size_t n_comments_total = 0;
    std::size_t n_skipped_empty = 0;
    std::optional<std::uint64_t> total_tokens;
    std::optional<std::uint64_t> vocab_checksum;
    std::uint64_t content_checksum = 0;  // FNV-1a over the artifact bytes
    std::uint64_t seed = 0;

    std::string to_json() const;
};

struct WriteOptions {
    std::size_t skipped_empty = 0;
    std::uint64_t seed = 0;
};

// JSON-Lines needs no vocab; token shards require one and also write `<path>.idx`.
CorpusManifest write_corpus(std::span<const PretrainSample> samples, const std::filesystem::path& path,
                            CorpusFormat format, const bpe::BpeVocab* vocab = nullptr,
                            const WriteOptions& options = {});

std::vector<PretrainSample> read_corpus_jsonl(const std::filesystem::path& path);

inline constexpr std::string_view kShardMagic = "SOTK1";

// Read-only view of a token shard plus its sidecar offset index.
class TokenShard {
public:
    static TokenShard open(const std::filesystem::path& path);

    std::size_t size() const { return offsets_.size(); }
    std::uint64_t vocab_checksum() const { return vocab_checksum_; }
    // Token offset of each sample within the concatenated id stream.
    std::span<const std::uint64_t> offsets() const { return offsets_; }
    std::span<const bpe::TokenId> sample(std::size_t i) const;
    std::uint64_t total_tokens() const { return ids_.size(); }

    // Throws DataError unless the shard was written under `vocab`.
    void require_vocab(std::uint64_t vocab_checksum) const;

private:
    std::uint64_t vocab_checksum_ = 0;
    std::vector<bpe::TokenId> ids_;
    std::vector<std::uint64_t> offsets_;
    std::vector<std::uint32_t> lengths_;
};

std::string encode_shard(std::span<const std::vector<bpe::TokenId>> sequences, std::uint64_t vocab_checksum);
std::string encode_shard_index(std::span<const std::vector<bpe::TokenId>> sequences);

}  // namespace sotk::corpus
