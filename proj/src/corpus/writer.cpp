#include "sotk/corpus/writer.hpp"

#include <fstream>

#include "json.hpp"

#include "sotk/common/binary_io.hpp"
#include "sotk/common/error.hpp"

namespace sotk::corpus {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kIndexMagic = "SOTKIDX1";

std::string path_with_suffix(const std::filesystem::path& path, std::string_view suffix) {
    return path.string() + std::string(suffix);
}

}  // namespace

std::string CorpusManifest::to_json() const {
    ordered_json j;
    j["format"] = format == CorpusFormat::JsonLines ? "jsonl" : "token-shard";
    j["n_samples"] = n_samples;
    j["n_comments_total"] = n_comments_total;
    j["n_skipped_empty"] = n_skipped_empty;
    if (total_tokens) {
        j["total_tokens"] = *total_tokens;
    }
    if (vocab_checksum) {
        j["vocab_checksum"] = hex64(*vocab_checksum);
    }
    j["content_checksum"] = hex64(content_checksum);
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

std::string encode_shard(std::span<const std::vector<bpe::TokenId>> sequences, std::uint64_t vocab_checksum) {
    ByteWriter w;
    w.put_bytes(kShardMagic);
    w.put<std::uint64_t>(vocab_checksum);
    for (const auto& seq : sequences) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(seq.size()));
        for (const auto id : seq) {
            w.put<std::uint32_t>(id);
        }
    }
    return w.take();
}

std::string encode_shard_index(std::span<const std::vector<bpe::TokenId>> sequences) {
    ByteWriter w;
    w.put_bytes(kIndexMagic);
    w.put<std::uint64_t>(sequences.size());
    std::uint64_t offset = 0;
    for (const auto& seq : sequences) {
        w.put<std::uint64_t>(offset);
        offset += seq.size();
    }
    w.put<std::uint64_t>(offset);
    return w.take();
}

CorpusManifest write_corpus(std::span<const PretrainSample> samples, const std::filesystem::path& path,
                            CorpusFormat format, const bpe::BpeVocab* vocab, const WriteOptions& options) {
    CorpusManifest manifest;
    manifest.format = format;
    manifest.n_samples = samples.size();
    manifest.n_skipped_empty = options.skipped_empty;
    manifest.seed = options.seed;
    for (const auto& s : samples) {
        manifest.n_comments_total += s.n_comments;
    }

    std::string content;
    if (format == CorpusFormat::JsonLines) {
        for (const auto& s : samples) {
            ordered_json line;
            line["answer_id"] = s.answer_id;
            line["text"] = s.text;
            line["n_comments"] = s.n_comments;
            content += line.dump(-1, ' ', false, json::error_handler_t::replace);
            content += '\n';
        }
    } else {
        if (vocab == nullptr) {
            throw InvalidArgument("token shards require a vocabulary");
        }
        std::vector<std::vector<bpe::TokenId>> sequences;
        sequences.reserve(samples.size());
        std::uint64_t tokens = 0;
        for (const auto& s : samples) {
            sequences.push_back(vocab->encode(s.text));
            tokens += sequences.back().size();
        }
        manifest.total_tokens = tokens;
        manifest.vocab_checksum = vocab->checksum();
        content = encode_shard(sequences, *manifest.vocab_checksum);
        write_file(path_with_suffix(path, ".idx"), encode_shard_index(sequences));
    }
    manifest.content_checksum = fnv1a64(content);
    write_file(path.string(), content);
    write_file(path_with_suffix(path, ".manifest.json"), manifest.to_json());
    return manifest;
}

std::vector<PretrainSample> read_corpus_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open corpus " + path.string());
    }
    std::vector<PretrainSample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            PretrainSample s;
            s.answer_id = j.at("answer_id").get<PostId>();
            s.text = j.at("text").get<std::string>();
            s.n_comments = j.at("n_comments").get<std::size_t>();
            s.char_len = s.text.size();
            samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return samples;
}

TokenShard TokenShard::open(const std::filesystem::path& path) {
    const auto bytes = read_file(path.string());
    const auto index_bytes = read_file(path_with_suffix(path, ".idx"));
    TokenShard shard;
    ByteReader r(bytes, "token shard " + path.string());
    if (r.get_bytes(kShardMagic.size()) != kShardMagic) {
        throw DataError("not a token shard: " + path.string());
    }
    shard.vocab_checksum_ = r.get<std::uint64_t>();
    while (r.remaining() > 0) {
        const auto n = r.get<std::uint32_t>();
        shard.offsets_.push_back(shard.ids_.size());
        shard.lengths_.push_back(n);
        for (std::uint32_t k = 0; k < n; ++k) {
            shard.ids_.push_back(r.get<std::uint32_t>());
        }
    }

    ByteReader idx(index_bytes, "shard index " + path.string());
    if (idx.get_bytes(kIndexMagic.size()) != kIndexMagic) {
        throw DataError("bad shard index magic: " + path.string());
    }
    const auto count = idx.get<std::uint64_t>();
    if (count != shard.offsets_.size()) {
        throw DataError("shard index disagrees with shard sample count: " + path.string());
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        if (idx.get<std::uint64_t>() != shard.offsets_[i]) {
            throw DataError("shard index offset mismatch at sample " + std::to_string(i));
        }
    }
    if (idx.get<std::uint64_t>() != shard.ids_.size()) {
        throw DataError("shard index total disagrees with shard: " + path.string());
    }
    return shard;
}

std::span<const bpe::TokenId> TokenShard::sample(std::size_t i) const {
    return std::span<const bpe::TokenId>(ids_).subspan(offsets_.at(i), lengths_.at(i));
}

void TokenShard::require_vocab(std::uint64_t vocab_checksum) const {
    if (vocab_checksum != vocab_checksum_) {
        throw DataError("token shard was written under vocab " + hex64(vocab_checksum_) + ", not " +
                        hex64(vocab_checksum));
    }
}

}  // namespace sotk::corpus
