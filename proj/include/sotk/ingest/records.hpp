#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sotk/common/error.hpp"
#include "sotk/common/timestamp.hpp"
#include "sotk/ingest/xml_rows.hpp"

namespace sotk::ingest {

using PostId = std::int64_t;

enum class PostType : std::uint8_t { Question, Answer, Other };

struct PostRecord {
    PostId id = 0;
    PostType post_type = PostType::Other;
    int post_type_code = 0;  // raw PostTypeId, meaningful for Other
    std::optional<PostId> parent_id;
    std::int64_t score = 0;
    std::optional<std::string> title;
    std::string body;
    std::optional<std::vector<std::string>> tags;
    Timestamp creation_date;
    std::optional<Timestamp> last_edit_date;
    std::optional<PostId> accepted_answer_id;

    bool operator==(const PostRecord&) const = default;
};

struct CommentRecord {
    std::int64_t id = 0;
    PostId post_id = 0;
    std::string text;
    std::int64_t score = 0;
    Timestamp creation_date;

    bool operator==(const CommentRecord&) const = default;
};

enum class HistoryType : std::uint8_t { InitialBody, EditBody, OtherKind };

struct PostHistoryRecord {
    std::int64_t id = 0;
    PostId post_id = 0;
    HistoryType history_type = HistoryType::OtherKind;
    int history_type_code = 0;
    std::string text;
    Timestamp creation_date;

    bool operator==(const PostHistoryRecord&) const = default;
};

// A single row could not be turned into a record. The loader skips and logs these.
class RowError : public DataError {
public:
    RowError(const std::string& what, std::optional<std::int64_t> row_id)
        : DataError(row_id ? "row " + std::to_string(*row_id) + ": " + what : what), row_id_(row_id) {}

    std::optional<std::int64_t> row_id() const { return row_id_; }

private:
    std::optional<std::int64_t> row_id_;
};

PostRecord parse_post(const AttributeMap& attrs);
CommentRecord parse_comment(const AttributeMap& attrs);
PostHistoryRecord parse_history(const AttributeMap& attrs);

// Splits `<python><pandas>` (and the newer `|python|pandas|`) tag strings.
std::vector<std::string> split_tags(std::string_view tags);

}  // namespace sotk::ingest
