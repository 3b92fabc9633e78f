#include "sotk/ingest/records.hpp"

#include <charconv>

namespace sotk::ingest {

namespace {

std::optional<std::int64_t> to_int(std::string_view text) {
    std::int64_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        return std::nullopt;
    }
    return value;
}

class RowFields {
public:
    RowFields(const AttributeMap& attrs, std::string_view table) : attrs_(attrs), table_(table) {
        if (const auto* id = attrs.find("Id")) {
            row_id_ = to_int(*id);
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw RowError(std::string(table_) + ": " + what, row_id_);
    }

    const std::string& required(std::string_view name) const {
        const auto* value = attrs_.find(name);
        if (value == nullptr) {
            fail("missing required attribute " + std::string(name));
        }
        return *value;
    }

    std::int64_t required_int(std::string_view name) const {
        auto value = to_int(required(name));
        if (!value) {
            fail("attribute " + std::string(name) + " is not an integer");
        }
        return *value;
    }

    std::optional<std::int64_t> optional_int(std::string_view name) const {
        const auto* raw = attrs_.find(name);
        if (raw == nullptr) {
            return std::nullopt;
        }
        auto value = to_int(*raw);
        if (!value) {
            fail("attribute " + std::string(name) + " is not an integer");
        }
        return value;
    }

    Timestamp required_time(std::string_view name) const {
        auto ts = parse_timestamp(required(name));
        if (!ts) {
            fail("attribute " + std::string(name) + " is not a timestamp");
        }
        return *ts;
    }

    std::optional<Timestamp> optional_time(std::string_view name) const {
        const auto* raw = attrs_.find(name);
        if (raw == nullptr) {
            return std::nullopt;
        }
        auto ts = parse_timestamp(*raw);
        if (!ts) {
            fail("attribute " + std::string(name) + " is not a timestamp");
        }
        return ts;
    }

    const std::string* optional(std::string_view name) const { return attrs_.find(name); }

private:
    const AttributeMap& attrs_;
    std::string_view table_;
    std::optional<std::int64_t> row_id_;
};

}  // namespace

std::vector<std::string> split_tags(std::string_view tags) {
    std::vector<std::string> out;
    if (tags.empty()) {
        return out;
    }
    if (tags.front() == '|') {
        std::size_t start = 1;
        while (start < tags.size()) {
            auto bar = tags.find('|', start);
            if (bar == std::string_view::npos) {
                bar = tags.size();
            }
            if (bar > start) {
                out.emplace_back(tags.substr(start, bar - start));
            }
            start = bar + 1;
        }
        return out;
    }
    std::size_t i = 0;
    while (i < tags.size()) {
        const auto open = tags.find('<', i);
        if (open == std::string_view::npos) {
            break;
        }
        const auto close = tags.find('>', open + 1);
        if (close == std::string_view::npos) {
            break;
        }
        if (close > open + 1) {
            out.emplace_back(tags.substr(open + 1, close - open - 1));
        }
        i = close + 1;
    }
    return out;
}

PostRecord parse_post(const AttributeMap& attrs) {
    const RowFields row(attrs, "Posts");
    PostRecord post;
    post.id = row.required_int("Id");
    post.post_type_code = static_cast<int>(row.required_int("PostTypeId"));
    post.post_type = post.post_type_code == 1   ? PostType::Question
                     : post.post_type_code == 2 ? PostType::Answer
                                                : PostType::Other;
    post.creation_date = row.required_time("CreationDate");
    post.body = row.required("Body");
    post.score = row.optional_int("Score").value_or(0);
    post.last_edit_date = row.optional_time("LastEditDate");

    const auto parent = row.optional_int("ParentId");
    if (post.post_type == PostType::Answer) {
        if (!parent) {
            row.fail("answer without ParentId");
        }
        post.parent_id = parent;
    } else if (post.post_type == PostType::Other) {
        post.parent_id = parent;
    }
    if (post.post_type == PostType::Question) {
        if (const auto* title = row.optional("Title")) {
            post.title = *title;
        }
        if (const auto* tags = row.optional("Tags")) {
            post.tags = split_tags(*tags);
        }
        post.accepted_answer_id = row.optional_int("AcceptedAnswerId");
    }
    if (post.last_edit_date && *post.last_edit_date < post.creation_date) {
        row.fail("LastEditDate precedes CreationDate");
    }
    return post;
}

CommentRecord parse_comment(const AttributeMap& attrs) {
    const RowFields row(attrs, "Comments");
    CommentRecord comment;
    comment.id = row.required_int("Id");
    comment.post_id = row.required_int("PostId");
    comment.text = row.required("Text");
    if (comment.text.empty()) {
        row.fail("empty comment text");
    }
    comment.score = row.optional_int("Score").value_or(0);
    comment.creation_date = row.required_time("CreationDate");
    return comment;
}

PostHistoryRecord parse_history(const AttributeMap& attrs) {
    const RowFields row(attrs, "PostHistory");
    PostHistoryRecord rev;
    rev.id = row.required_int("Id");
    rev.post_id = row.required_int("PostId");
    rev.history_type_code = static_cast<int>(row.required_int("PostHistoryTypeId"));
    rev.history_type = rev.history_type_code == 2   ? HistoryType::InitialBody
                       : rev.history_type_code == 5 ? HistoryType::EditBody
                                                    : HistoryType::OtherKind;
    if (const auto* text = row.optional("Text")) {
        rev.text = *text;
    }
    rev.creation_date = row.required_time("CreationDate");
    return rev;
}

}  // namespace sotk::ingest
