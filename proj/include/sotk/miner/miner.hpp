#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "sotk/ingest/record_store.hpp"

namespace sotk::miner {

using ingest::PostId;

// Byte-level edit distance with unit insert, delete and substitute costs.
std::size_t levenshtein(std::string_view a, std::string_view b);

enum class Heuristic : std::uint8_t { KeywordComment, EditedAfterComment, LateAnswer };
inline constexpr std::size_t kHeuristicCount = 3;

std::string_view heuristic_name(Heuristic h);
Heuristic parse_heuristic(std::string_view name);

struct ObsoleteCandidate {
    PostId answer_id = 0;
    PostId question_id = 0;
    Heuristic heuristic = Heuristic::KeywordComment;
    std::string evidence;
    std::string answer_text;
    std::int64_t score = 0;

    bool operator==(const ObsoleteCandidate&) const = default;
};

struct MinerConfig {
    std::vector<std::string> keywords{"deprecated", "outdated", "obsolete", "out of date"};
    std::vector<std::string> reference_phrases{"'s answers", "answer by", "accepted answer", "other answer"};
    std::int64_t keyword_min_score = 1;
    std::int64_t edited_min_score = 1;
    std::int64_t late_min_score = 2;
    std::size_t min_code_distance = 100;
    // 547.5 days.
    std::int64_t late_after_ms = 547 * Timestamp::ms_per_day + Timestamp::ms_per_day / 2;
};

// Case-insensitive (ASCII) match of `phrase` whose neighbours are not letters,
// digits or underscores.
bool contains_whole_phrase(std::string_view text, std::string_view phrase);
bool contains_phrase(std::string_view text, std::string_view phrase);

using IdSet = std::unordered_set<PostId>;

// Results are ordered by answer id.
std::vector<ObsoleteCandidate> mine_keyword_comments(const ingest::RecordStore& store, const MinerConfig& config = {});

// Answers edited with an edit dated after their earliest comment, whose code
// moved by at least min_code_distance between the first and the latest
// revision. Answers that were edited but have no revision rows are skipped and
// listed in `skipped` when given.
std::vector<ObsoleteCandidate> mine_edited_after_comment(const ingest::RecordStore& store, const IdSet& exclusions,
                                                         const MinerConfig& config = {},
                                                         std::vector<PostId>* skipped = nullptr);

std::vector<ObsoleteCandidate> mine_late_answers(const ingest::RecordStore& store, const IdSet& exclusions = {},
                                                 const MinerConfig& config = {});

struct MiningResult {
    // KeywordComment, then EditedAfterComment, then LateAnswer; disjoint on answer id.
    std::vector<ObsoleteCandidate> candidates;
    std::array<std::size_t, kHeuristicCount> counts{};
    std::vector<PostId> skipped_missing_history;

    std::string report_json() const;
};

MiningResult mine_all(const ingest::RecordStore& store, const MinerConfig& config = {});

struct AnnotationSample {
    std::vector<ObsoleteCandidate> items;
    std::size_t per_heuristic = 0;
    // Requested minus available, per heuristic.
    std::array<std::size_t, kHeuristicCount> shortfall{};

    std::string report() const;
};

// Draws floor(n / 3) candidates per heuristic uniformly without replacement.
// Throws DataError when there are no candidates at all.
AnnotationSample sample_for_annotation(std::span<const ObsoleteCandidate> candidates, std::size_t n,
                                       std::uint64_t seed);

// Labels are arbitrary integers. Throws DataError on length mismatch, empty
// input, or chance agreement of 1.
double cohen_kappa(std::span<const int> a, std::span<const int> b);

enum class Label : std::uint8_t { Obsolete, NotObsolete };
std::string_view label_name(Label l);
Label parse_label(std::string_view name);

struct AnnotationRecord {
    PostId candidate_id = 0;
    Label label = Label::NotObsolete;
    std::string annotator;

    bool operator==(const AnnotationRecord&) const = default;
};

void export_candidates(std::span<const ObsoleteCandidate> candidates, const std::filesystem::path& path);
std::vector<ObsoleteCandidate> read_candidates(const std::filesystem::path& path);

void write_annotations(std::span<const AnnotationRecord> records, const std::filesystem::path& path);
// Validates the header, labels, candidate ids (when `known_ids` is given) and
// one label per (candidate, annotator).
std::vector<AnnotationRecord> import_annotations(const std::filesystem::path& path,
                                                 const IdSet* known_ids = nullptr);

struct PairedLabels {
    std::vector<PostId> ids;
    std::vector<int> a;
    std::vector<int> b;
};

// Labels of two annotators over the candidates both labeled, by ascending id.
PairedLabels pair_annotations(std::span<const AnnotationRecord> records, std::string_view annotator_a,
                              std::string_view annotator_b);

}  // namespace sotk::miner
