#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sotk/ingest/record_store.hpp"

namespace sotk::corpus {

using ingest::CommentRecord;
using ingest::PostId;
using ingest::PostRecord;
using ingest::RecordStore;

// Placed between the answer and each comment.
inline constexpr std::string_view kSeparator = " <RS> ";
inline constexpr std::string_view kSeparatorToken = "<RS>";

// One pre-training unit: an answer followed by all of its comments.
struct PretrainSample {
    PostId answer_id = 0;
    std::string text;
    std::size_t n_comments = 0;
    std::size_t char_len = 0;
    std::optional<std::size_t> token_len;

    bool operator==(const PretrainSample&) const = default;
};

struct FilterOptions {
    std::int64_t min_score = 1;
    std::size_t min_comments = 1;
};

struct AnswerThread {
    const PostRecord* answer = nullptr;
    std::span<const CommentRecord> comments;  // creation-date ascending
};

// Answers with score >= min_score and at least min_comments comments, by answer id.
std::vector<AnswerThread> filter_answers(const RecordStore& store, const FilterOptions& options = {});

// clean(answer) <RS> clean(c1) <RS> ... with comments put in creation-date order.
// nullopt when nothing survives cleaning.
std::optional<PretrainSample> assemble_sample(const PostRecord& answer, std::span<const CommentRecord> comments);

std::size_t count_separators(std::string_view text);

struct CorpusBuild {
    std::vector<PretrainSample> samples;
    std::size_t skipped_empty = 0;
};

CorpusBuild build_corpus(const RecordStore& store, const FilterOptions& options = {});

}  // namespace sotk::corpus
