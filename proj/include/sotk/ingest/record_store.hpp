#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sotk/ingest/records.hpp"
#include "sotk/ingest/xml_rows.hpp"

namespace sotk::ingest {

inline constexpr int kStoreFormatVersion = 1;

// Accounting for one load: every parsed row is either loaded or listed as skipped.
struct LoadReport {
    struct Skip {
        TableKind table = TableKind::Posts;
        std::optional<std::int64_t> row_id;
        std::string reason;
    };

    std::array<std::uint64_t, 3> rows_read{};
    std::array<std::uint64_t, 3> rows_loaded{};
    std::vector<Skip> skipped;
    // Loaded records whose referenced post is not in the store.
    std::vector<std::int64_t> dangling_comment_ids;
    std::vector<std::int64_t> dangling_history_ids;
    std::vector<PostId> orphan_answer_ids;

    std::uint64_t skipped_in(TableKind table) const;
    std::string to_text() const;
};

class StoreBuilder;

// Sealed, read-only record tables with the secondary indices the miners and the
// corpus builder query: by id, answers by parent, comments and revisions by post.
class RecordStore {
public:
    RecordStore() = default;

    const PostRecord* find_post(PostId id) const;
    std::span<const PostRecord> posts() const { return posts_; }
    std::span<const CommentRecord> comments() const { return comments_; }
    std::span<const PostHistoryRecord> history() const { return history_; }

    // Answer ids for a question, ascending.
    std::span<const PostId> answers_of(PostId question) const;
    // Comments on a post, creation-date ascending with ties broken by id.
    std::span<const CommentRecord> comments_on(PostId post) const;
    // Revisions of a post, creation-date ascending with ties broken by id.
    std::span<const PostHistoryRecord> history_of(PostId post) const;

    bool sealed() const { return sealed_; }
    const LoadReport& report() const { return report_; }

    void save(const std::filesystem::path& dir) const;
    static RecordStore load(const std::filesystem::path& dir);

private:
    friend class StoreBuilder;
    using Range = std::pair<std::size_t, std::size_t>;

    void reindex();

    std::vector<PostRecord> posts_;
    std::vector<CommentRecord> comments_;
    std::vector<PostHistoryRecord> history_;
    std::vector<PostId> answer_ids_;
    std::unordered_map<PostId, std::size_t> post_index_;
    std::unordered_map<PostId, Range> answer_ranges_;
    std::unordered_map<PostId, Range> comment_ranges_;
    std::unordered_map<PostId, Range> history_ranges_;
    LoadReport report_;
    bool sealed_ = false;
};

// Single-writer accumulator. Duplicate primary ids are fatal; row-level parse
// failures are recorded as skips.
class StoreBuilder {
public:
    void add_post(PostRecord post);
    void add_comment(CommentRecord comment);
    void add_history(PostHistoryRecord revision);
    void record_skip(TableKind table, const RowError& error);
    void count_row(TableKind table) { ++report_.rows_read[static_cast<std::size_t>(table)]; }

    RecordStore seal() &&;

private:
    std::vector<PostRecord> posts_;
    std::vector<CommentRecord> comments_;
    std::vector<PostHistoryRecord> history_;
    std::unordered_set<std::int64_t> seen_[3];
    LoadReport report_;
};

// Streams whichever dump tables are present into a sealed store. When `dir` is
// non-empty the store and its plain-text load report are written there.
struct DumpSources {
    std::istream* posts = nullptr;
    std::istream* comments = nullptr;
    std::istream* history = nullptr;
};

RecordStore build_store(const DumpSources& sources, const std::filesystem::path& dir = {});

}  // namespace sotk::ingest
