#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sotk::bpe {

using TokenId = std::uint32_t;

// Reserved tokens. Their ids are fixed: bytes occupy 0..255, specials follow,
// learned merges start at kFirstMergeId.
enum class Special : std::uint8_t { Pad, Mask, Cls, Separator, Url, Email };

inline constexpr std::size_t kByteTokens = 256;
inline constexpr std::size_t kSpecialCount = 6;
inline constexpr std::array<std::string_view, kSpecialCount> kSpecialLiterals = {
    "<pad>", "<mask>", "<cls>", "<RS>", "[URL]", "[EMAIL]"};
inline constexpr TokenId kFirstSpecialId = kByteTokens;
inline constexpr TokenId kFirstMergeId = kByteTokens + kSpecialCount;
inline constexpr std::size_t kMinVocabSize = kFirstMergeId;

constexpr TokenId special_id(Special s) { return kFirstSpecialId + static_cast<TokenId>(s); }

// Pre-tokenization applied identically in training and encoding.
// Digits: every ASCII digit stays a standalone token and never merges.
enum class PreSplit : std::uint8_t { None = 0, Digits = 1 };

// Byte-level BPE vocabulary: 256 byte tokens, the reserved specials, and an
// ordered merge list. Immutable once built; encode/decode are reentrant.
class BpeVocab {
public:
    explicit BpeVocab(PreSplit pre_split = PreSplit::None);

    // Appends a merge of two existing tokens and returns the new id.
    TokenId add_merge(TokenId left, TokenId right);

    std::size_t vocab_size() const { return tokens_.size(); }
    std::span<const std::pair<TokenId, TokenId>> merges() const { return merges_; }
    // Raw bytes of a token; specials return their literal text.
    std::string_view token_bytes(TokenId id) const { return tokens_.at(id); }
    static bool is_special(TokenId id) { return id >= kFirstSpecialId && id < kFirstMergeId; }
    PreSplit pre_split() const { return pre_split_; }

    // Every byte sequence encodes; special literals map to their reserved ids.
    std::vector<TokenId> encode(std::string_view text) const;
    // Throws InvalidArgument on an id >= vocab_size().
    std::string decode(std::span<const TokenId> ids) const;

    std::string serialize() const;
    static BpeVocab deserialize(std::string_view bytes);
    void save(const std::filesystem::path& path) const;
    static BpeVocab load(const std::filesystem::path& path);

    // Checksum of the serialized vocabulary; token shards record it.
    std::uint64_t checksum() const;

    bool operator==(const BpeVocab& other) const {
        return pre_split_ == other.pre_split_ && merges_ == other.merges_;
    }

private:
    void encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const;

    PreSplit pre_split_;
    std::vector<std::string> tokens_;
    std::vector<std::pair<TokenId, TokenId>> merges_;
    // (left << 32 | right) -> merged id; rank is id - kFirstMergeId.
    std::unordered_map<std::uint64_t, TokenId> merge_lookup_;
};

// Splits text into pieces no merge may cross: special literals become their own
// piece (flagged), and under PreSplit::Digits each digit is isolated.
struct TextPiece {
    std::string_view text;
    bool special = false;
    TokenId special_token = 0;
};
std::vector<TextPiece> split_for_bpe(std::string_view text, PreSplit pre_split);

}  // namespace sotk::bpe
