#include "sotk/bpe/vocab.hpp"

#include <queue>

#include "sotk/common/binary_io.hpp"
#include "sotk/common/error.hpp"

namespace sotk::bpe {

namespace {

constexpr std::string_view kMagic = "SOTKBPE1";
constexpr std::uint32_t kVersion = 1;

std::uint64_t pair_key(TokenId left, TokenId right) { return (static_cast<std::uint64_t>(left) << 32) | right; }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::vector<TextPiece> split_for_bpe(std::string_view text, PreSplit pre_split) {
    std::vector<TextPiece> pieces;
    std::size_t start = 0;
    std::size_t i = 0;
    auto flush = [&](std::size_t end) {
        if (end > start) {
            pieces.push_back({text.substr(start, end - start), false, 0});
        }
    };
    while (i < text.size()) {
        const char c = text[i];
        if (c == '<' || c == '[') {
            bool matched = false;
            for (std::size_t s = 0; s < kSpecialCount; ++s) {
                if (text.compare(i, kSpecialLiterals[s].size(), kSpecialLiterals[s]) == 0) {
                    flush(i);
                    pieces.push_back({text.substr(i, kSpecialLiterals[s].size()), true,
                                      kFirstSpecialId + static_cast<TokenId>(s)});
                    i += kSpecialLiterals[s].size();
                    start = i;
                    matched = true;
                    break;
                }
            }
            if (matched) {
                continue;
            }
        }
        if (pre_split == PreSplit::Digits && is_digit(c)) {
            flush(i);
            pieces.push_back({text.substr(i, 1), false, 0});
            ++i;
            start = i;
            continue;
        }
        ++i;
    }
    flush(text.size());
    return pieces;
}

BpeVocab::BpeVocab(PreSplit pre_split) : pre_split_(pre_split) {
    tokens_.reserve(kFirstMergeId);
    for (std::size_t b = 0; b < kByteTokens; ++b) {
        tokens_.emplace_back(1, static_cast<char>(b));
    }
    for (auto literal : kSpecialLiterals) {
        tokens_.emplace_back(literal);
    }
}

TokenId BpeVocab::add_merge(TokenId left, TokenId right) {
    if (left >= tokens_.size() || right >= tokens_.size() || is_special(left) || is_special(right)) {
        throw InvalidArgument("merge operands must be existing non-special tokens");
    }
    const auto key = pair_key(left, right);
    if (merge_lookup_.contains(key)) {
        throw InvalidArgument("duplicate merge");
    }
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(tokens_[left] + tokens_[right]);
    merges_.emplace_back(left, right);
    merge_lookup_.emplace(key, id);
    return id;
}

void BpeVocab::encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const {
    const std::size_t n = chunk.size();
    if (n == 1 || merges_.empty()) {
        for (unsigned char c : chunk) {
            out.push_back(c);
        }
        return;
    }
    std::vector<TokenId> tok(n);
    std::vector<std::int32_t> next(n), prev(n);
    for (std::size_t i = 0; i < n; ++i) {
        tok[i] = static_cast<unsigned char>(chunk[i]);
        next[i] = i + 1 < n ? static_cast<std::int32_t>(i + 1) : -1;
        prev[i] = static_cast<std::int32_t>(i) - 1;
    }
    // (merged id, left position); lower merged id = higher priority, ties left-to-right.
    using Entry = std::pair<TokenId, std::int32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    auto consider = [&](std::int32_t pos) {
        if (pos < 0 || next[pos] < 0) {
            return;
        }
        const auto it = merge_lookup_.find(pair_key(tok[pos], tok[next[pos]]));
        if (it != merge_lookup_.end()) {
            heap.emplace(it->second, pos);
        }
    };
    for (std::size_t i = 0; i + 1 < n; ++i) {
        consider(static_cast<std::int32_t>(i));
    }
    constexpr TokenId kDead = ~TokenId{0};
    while (!heap.empty()) {
        const auto [merged, pos] = heap.top();
        heap.pop();
        if (tok[pos] == kDead || next[pos] < 0) {
            continue;
        }
        const auto right = next[pos];
        const auto it = merge_lookup_.find(pair_key(tok[pos], tok[right]));
        if (it == merge_lookup_.end() || it->second != merged) {
            continue;
        }
        tok[pos] = merged;
        tok[right] = kDead;
        next[pos] = next[right];
        if (next[pos] >= 0) {
            prev[next[pos]] = pos;
        }
        consider(prev[pos]);
        consider(pos);
    }
    for (std::int32_t i = 0; i >= 0; i = next[i]) {
        out.push_back(tok[i]);
    }
}

std::vector<TokenId> BpeVocab::encode(std::string_view text) const {
    std::vector<TokenId> out;
    out.reserve(text.size() / 3 + 1);
    for (const auto& piece : split_for_bpe(text, pre_split_)) {
        if (piece.special) {
            out.push_back(piece.special_token);
        } else {
            encode_chunk(piece.text, out);
        }
    }
    return out;
}

std::string BpeVocab::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (const auto id : ids) {
        if (id >= tokens_.size()) {
            throw InvalidArgument("token id " + std::to_string(id) + " out of range for vocabulary of " +
                                  std::to_string(tokens_.size()));
        }
        out.append(tokens_[id]);
    }
    return out;
}

std::string BpeVocab::serialize() const {
    ByteWriter w;
    w.put_bytes(kMagic);
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(vocab_size()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(pre_split_));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(kSpecialCount));
    for (std::size_t s = 0; s < kSpecialCount; ++s) {
        w.put<std::uint32_t>(kFirstSpecialId + static_cast<TokenId>(s));
        w.put_string(kSpecialLiterals[s]);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(merges_.size()));
    for (const auto& [left, right] : merges_) {
        w.put_string(tokens_[left]);
        w.put_string(tokens_[right]);
    }
    w.put<std::uint64_t>(fnv1a64(w.bytes()));
    return w.take();
}

BpeVocab BpeVocab::deserialize(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 8) {
        throw DataError("vocab file truncated");
    }
    const auto payload = bytes.substr(0, bytes.size() - 8);
    ByteReader trailer(bytes.substr(bytes.size() - 8), "vocab");
    if (trailer.get<std::uint64_t>() != fnv1a64(payload)) {
        throw DataError("vocab file checksum mismatch (truncated or corrupted)");
    }
    ByteReader r(payload, "vocab");
    if (r.get_bytes(kMagic.size()) != kMagic) {
        throw DataError("not a vocab file (bad magic)");
    }
    if (const auto version = r.get<std::uint32_t>(); version != kVersion) {
        throw DataError("unsupported vocab version " + std::to_string(version));
    }
    const auto size = r.get<std::uint32_t>();
    const auto pre = r.get<std::uint8_t>();
    if (pre > static_cast<std::uint8_t>(PreSplit::Digits)) {
        throw DataError("unknown pre-split mode in vocab file");
    }
    BpeVocab vocab(static_cast<PreSplit>(pre));
    if (r.get<std::uint32_t>() != kSpecialCount) {
        throw DataError("vocab specials table does not match this build");
    }
    for (std::size_t s = 0; s < kSpecialCount; ++s) {
        const auto id = r.get<std::uint32_t>();
        const auto literal = r.get_string();
        if (id != kFirstSpecialId + s || literal != kSpecialLiterals[s]) {
            throw DataError("vocab specials table does not match this build");
        }
    }
    std::unordered_map<std::string, TokenId> by_bytes;
    for (TokenId id = 0; id < kByteTokens; ++id) {
        by_bytes.emplace(vocab.tokens_[id], id);
    }
    const auto n_merges = r.get<std::uint32_t>();
    for (std::uint32_t m = 0; m < n_merges; ++m) {
        const auto left = by_bytes.find(r.get_string());
        const auto right = by_bytes.find(r.get_string());
        if (left == by_bytes.end() || right == by_bytes.end()) {
            throw DataError("vocab merge " + std::to_string(m) + " references an unknown token");
        }
        const auto id = vocab.add_merge(left->second, right->second);
        if (!by_bytes.emplace(vocab.tokens_[id], id).second) {
            throw DataError("vocab merge " + std::to_string(m) + " duplicates an existing token");
        }
    }
    if (r.remaining() != 0 || vocab.vocab_size() != size) {
        throw DataError("vocab size field disagrees with merge list");
    }
    return vocab;
}

void BpeVocab::save(const std::filesystem::path& path) const { write_file(path.string(), serialize()); }

BpeVocab BpeVocab::load(const std::filesystem::path& path) { return deserialize(read_file(path.string())); }

std::uint64_t BpeVocab::checksum() const {
    const auto bytes = serialize();
    ByteReader r(std::string_view(bytes).substr(bytes.size() - 8), "vocab");
    return r.get<std::uint64_t>();
}

}  // namespace sotk::bpe
