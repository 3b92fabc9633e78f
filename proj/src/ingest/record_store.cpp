#include "sotk/ingest/record_store.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "sotk/common/binary_io.hpp"

namespace sotk::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kPostsMagic = "SOSTPST1";
constexpr std::string_view kCommentsMagic = "SOSTCMT1";
constexpr std::string_view kHistoryMagic = "SOSTHIS1";

std::size_t slot(TableKind table) { return static_cast<std::size_t>(table); }

template <class Key, class Record, class KeyFn>
std::unordered_map<Key, std::pair<std::size_t, std::size_t>> group_ranges(const std::vector<Record>& items,
                                                                           KeyFn key) {
    std::unordered_map<Key, std::pair<std::size_t, std::size_t>> ranges;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i + 1;
        while (j < items.size() && key(items[j]) == key(items[i])) {
            ++j;
        }
        ranges.emplace(key(items[i]), std::make_pair(i, j));
        i = j;
    }
    return ranges;
}

void put_opt_i64(ByteWriter& w, const std::optional<std::int64_t>& v) {
    w.put<std::uint8_t>(v ? 1 : 0);
    if (v) {
        w.put<std::int64_t>(*v);
    }
}

std::optional<std::int64_t> get_opt_i64(ByteReader& r) {
    if (r.get<std::uint8_t>() == 0) {
        return std::nullopt;
    }
    return r.get<std::int64_t>();
}

std::string seal_bytes(std::string_view magic, std::uint64_t count, ByteWriter& body) {
    ByteWriter out;
    out.put_bytes(magic);
    out.put<std::uint64_t>(count);
    out.put_bytes(body.bytes());
    out.put<std::uint64_t>(fnv1a64(out.bytes()));
    return out.take();
}

ByteReader open_table(const std::string& bytes, std::string_view magic, const std::string& what,
                      std::uint64_t& count) {
    if (bytes.size() < magic.size() + 16) {
        throw DataError(what + ": file too short");
    }
    const std::string_view all(bytes);
    const auto payload = all.substr(0, all.size() - 8);
    ByteReader trailer(all.substr(all.size() - 8), what);
    if (trailer.get<std::uint64_t>() != fnv1a64(payload)) {
        throw DataError(what + ": checksum mismatch");
    }
    ByteReader r(payload, what);
    if (r.get_bytes(magic.size()) != magic) {
        throw DataError(what + ": bad magic");
    }
    count = r.get<std::uint64_t>();
    return r;
}

}  // namespace

std::uint64_t LoadReport::skipped_in(TableKind table) const {
    return static_cast<std::uint64_t>(
        std::count_if(skipped.begin(), skipped.end(), [&](const Skip& s) { return s.table == table; }));
}

std::string LoadReport::to_text() const {
    std::ostringstream out;
    out << "store format version " << kStoreFormatVersion << "\n";
    for (auto table : {TableKind::Posts, TableKind::Comments, TableKind::PostHistory}) {
        out << table_name(table) << ": read " << rows_read[slot(table)] << ", loaded " << rows_loaded[slot(table)]
            << ", skipped " << skipped_in(table) << "\n";
    }
    for (const auto& skip : skipped) {
        out << "skip " << table_name(skip.table) << " row "
            << (skip.row_id ? std::to_string(*skip.row_id) : std::string("?")) << ": " << skip.reason << "\n";
    }
    auto list = [&](std::string_view label, const std::vector<std::int64_t>& ids) {
        out << label << ": " << ids.size();
        for (auto id : ids) {
            out << " " << id;
        }
        out << "\n";
    };
    list("dangling comments", dangling_comment_ids);
    list("dangling history", dangling_history_ids);
    list("orphan answers", orphan_answer_ids);
    return out.str();
}

const PostRecord* RecordStore::find_post(PostId id) const {
    const auto it = post_index_.find(id);
    return it == post_index_.end() ? nullptr : &posts_[it->second];
}

std::span<const PostId> RecordStore::answers_of(PostId question) const {
    const auto it = answer_ranges_.find(question);
    if (it == answer_ranges_.end()) {
        return {};
    }
    return std::span<const PostId>(answer_ids_).subspan(it->second.first, it->second.second - it->second.first);
}

std::span<const CommentRecord> RecordStore::comments_on(PostId post) const {
    const auto it = comment_ranges_.find(post);
    if (it == comment_ranges_.end()) {
        return {};
    }
    return std::span<const CommentRecord>(comments_).subspan(it->second.first, it->second.second - it->second.first);
}

std::span<const PostHistoryRecord> RecordStore::history_of(PostId post) const {
    const auto it = history_ranges_.find(post);
    if (it == history_ranges_.end()) {
        return {};
    }
    return std::span<const PostHistoryRecord>(history_).subspan(it->second.first,
                                                                it->second.second - it->second.first);
}

void RecordStore::reindex() {
    std::sort(posts_.begin(), posts_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::sort(comments_.begin(), comments_.end(), [](const auto& a, const auto& b) {
        return std::tie(a.post_id, a.creation_date, a.id) < std::tie(b.post_id, b.creation_date, b.id);
    });
    std::sort(history_.begin(), history_.end(), [](const auto& a, const auto& b) {
        return std::tie(a.post_id, a.creation_date, a.id) < std::tie(b.post_id, b.creation_date, b.id);
    });

    post_index_.clear();
    post_index_.reserve(posts_.size());
    for (std::size_t i = 0; i < posts_.size(); ++i) {
        post_index_.emplace(posts_[i].id, i);
    }

    std::vector<std::pair<PostId, PostId>> by_parent;
    for (const auto& post : posts_) {
        if (post.post_type == PostType::Answer) {
            by_parent.emplace_back(*post.parent_id, post.id);
        }
    }
    std::sort(by_parent.begin(), by_parent.end());
    answer_ids_.clear();
    std::vector<PostId> parents;
    for (const auto& [parent, id] : by_parent) {
        answer_ids_.push_back(id);
        parents.push_back(parent);
    }
    answer_ranges_ = group_ranges<PostId>(parents, [](PostId p) { return p; });
    comment_ranges_ = group_ranges<PostId>(comments_, [](const CommentRecord& c) { return c.post_id; });
    history_ranges_ = group_ranges<PostId>(history_, [](const PostHistoryRecord& h) { return h.post_id; });
    sealed_ = true;
}

void StoreBuilder::add_post(PostRecord post) {
    if (!seen_[slot(TableKind::Posts)].insert(post.id).second) {
        throw DataError("duplicate post id " + std::to_string(post.id));
    }
    ++report_.rows_loaded[slot(TableKind::Posts)];
    posts_.push_back(std::move(post));
}

void StoreBuilder::add_comment(CommentRecord comment) {
    if (!seen_[slot(TableKind::Comments)].insert(comment.id).second) {
        throw DataError("duplicate comment id " + std::to_string(comment.id));
    }
    ++report_.rows_loaded[slot(TableKind::Comments)];
    comments_.push_back(std::move(comment));
}

void StoreBuilder::add_history(PostHistoryRecord revision) {
    if (!seen_[slot(TableKind::PostHistory)].insert(revision.id).second) {
        throw DataError("duplicate post history id " + std::to_string(revision.id));
    }
    ++report_.rows_loaded[slot(TableKind::PostHistory)];
    history_.push_back(std::move(revision));
}

void StoreBuilder::record_skip(TableKind table, const RowError& error) {
    report_.skipped.push_back({table, error.row_id(), error.what()});
}

RecordStore StoreBuilder::seal() && {
    RecordStore store;
    store.posts_ = std::move(posts_);
    store.comments_ = std::move(comments_);
    store.history_ = std::move(history_);
    store.reindex();

    const auto& post_ids = seen_[slot(TableKind::Posts)];
    for (const auto& c : store.comments_) {
        if (!post_ids.contains(c.post_id)) {
            report_.dangling_comment_ids.push_back(c.id);
        }
    }
    for (const auto& h : store.history_) {
        if (!post_ids.contains(h.post_id)) {
            report_.dangling_history_ids.push_back(h.id);
        }
    }
    for (const auto& p : store.posts_) {
        if (p.post_type == PostType::Answer && !post_ids.contains(*p.parent_id)) {
            report_.orphan_answer_ids.push_back(p.id);
        }
    }
    std::sort(report_.dangling_comment_ids.begin(), report_.dangling_comment_ids.end());
    std::sort(report_.dangling_history_ids.begin(), report_.dangling_history_ids.end());
    store.report_ = std::move(report_);
    return store;
}

RecordStore build_store(const DumpSources& sources, const fs::path& dir) {
    StoreBuilder builder;
    auto drain = [&](std::istream* in, TableKind table, auto&& parse, auto&& add) {
        if (in == nullptr) {
            return;
        }
        RowReader reader(*in, table);
        while (auto attrs = reader.next()) {
            builder.count_row(table);
            try {
                add(parse(*attrs));
            } catch (const RowError& e) {
                builder.record_skip(table, e);
            }
        }
    };
    drain(sources.posts, TableKind::Posts, parse_post, [&](PostRecord r) { builder.add_post(std::move(r)); });
    drain(sources.comments, TableKind::Comments, parse_comment,
          [&](CommentRecord r) { builder.add_comment(std::move(r)); });
    drain(sources.history, TableKind::PostHistory, parse_history,
          [&](PostHistoryRecord r) { builder.add_history(std::move(r)); });
    RecordStore store = std::move(builder).seal();
    if (!dir.empty()) {
        store.save(dir);
    }
    return store;
}

void RecordStore::save(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create store directory " + dir.string() + ": " + ec.message());
    }

    ByteWriter posts;
    for (const auto& p : posts_) {
        posts.put<std::int64_t>(p.id);
        posts.put<std::int32_t>(p.post_type_code);
        put_opt_i64(posts, p.parent_id);
        posts.put<std::int64_t>(p.score);
        posts.put<std::uint8_t>(p.title ? 1 : 0);
        if (p.title) {
            posts.put_string(*p.title);
        }
        posts.put_string(p.body);
        posts.put<std::uint8_t>(p.tags ? 1 : 0);
        if (p.tags) {
            posts.put<std::uint32_t>(static_cast<std::uint32_t>(p.tags->size()));
            for (const auto& t : *p.tags) {
                posts.put_string(t);
            }
        }
        posts.put<std::int64_t>(p.creation_date.ms_since_epoch);
        put_opt_i64(posts, p.last_edit_date ? std::optional<std::int64_t>(p.last_edit_date->ms_since_epoch)
                                            : std::nullopt);
        put_opt_i64(posts, p.accepted_answer_id);
    }
    ByteWriter comments;
    for (const auto& c : comments_) {
        comments.put<std::int64_t>(c.id);
        comments.put<std::int64_t>(c.post_id);
        comments.put_string(c.text);
        comments.put<std::int64_t>(c.score);
        comments.put<std::int64_t>(c.creation_date.ms_since_epoch);
    }
    ByteWriter history;
    for (const auto& h : history_) {
        history.put<std::int64_t>(h.id);
        history.put<std::int64_t>(h.post_id);
        history.put<std::int32_t>(h.history_type_code);
        history.put_string(h.text);
        history.put<std::int64_t>(h.creation_date.ms_since_epoch);
    }
    write_file((dir / "posts.bin").string(), seal_bytes(kPostsMagic, posts_.size(), posts));
    write_file((dir / "comments.bin").string(), seal_bytes(kCommentsMagic, comments_.size(), comments));
    write_file((dir / "history.bin").string(), seal_bytes(kHistoryMagic, history_.size(), history));

    json meta;
    meta["format"] = "sotk-store";
    meta["version"] = kStoreFormatVersion;
    meta["rows_read"] = report_.rows_read;
    meta["rows_loaded"] = report_.rows_loaded;
    json skips = json::array();
    for (const auto& s : report_.skipped) {
        skips.push_back({{"table", static_cast<int>(s.table)},
                         {"row_id", s.row_id ? json(*s.row_id) : json(nullptr)},
                         {"reason", s.reason}});
    }
    meta["skipped"] = skips;
    meta["dangling_comment_ids"] = report_.dangling_comment_ids;
    meta["dangling_history_ids"] = report_.dangling_history_ids;
    meta["orphan_answer_ids"] = report_.orphan_answer_ids;
    write_file((dir / "store.json").string(), meta.dump(2) + "\n");
    write_file((dir / "load_report.txt").string(), report_.to_text());
}

RecordStore RecordStore::load(const fs::path& dir) {
    const auto meta_path = dir / "store.json";
    json meta;
    try {
        meta = json::parse(read_file(meta_path.string()));
    } catch (const json::exception& e) {
        throw DataError("store metadata " + meta_path.string() + ": " + e.what());
    }
    if (meta.value("format", "") != "sotk-store" || meta.value("version", 0) != kStoreFormatVersion) {
        throw DataError("unsupported store layout in " + dir.string());
    }

    RecordStore store;
    std::uint64_t count = 0;
    {
        const auto bytes = read_file((dir / "posts.bin").string());
        auto r = open_table(bytes, kPostsMagic, "posts.bin", count);
        store.posts_.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            PostRecord p;
            p.id = r.get<std::int64_t>();
            p.post_type_code = r.get<std::int32_t>();
            p.post_type = p.post_type_code == 1   ? PostType::Question
                          : p.post_type_code == 2 ? PostType::Answer
                                                  : PostType::Other;
            p.parent_id = get_opt_i64(r);
            p.score = r.get<std::int64_t>();
            if (r.get<std::uint8_t>() != 0) {
                p.title = r.get_string();
            }
            p.body = r.get_string();
            if (r.get<std::uint8_t>() != 0) {
                std::vector<std::string> tags(r.get<std::uint32_t>());
                for (auto& t : tags) {
                    t = r.get_string();
                }
                p.tags = std::move(tags);
            }
            p.creation_date = Timestamp{r.get<std::int64_t>()};
            if (auto edit = get_opt_i64(r)) {
                p.last_edit_date = Timestamp{*edit};
            }
            p.accepted_answer_id = get_opt_i64(r);
            store.posts_.push_back(std::move(p));
        }
    }
    {
        const auto bytes = read_file((dir / "comments.bin").string());
        auto r = open_table(bytes, kCommentsMagic, "comments.bin", count);
        store.comments_.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            CommentRecord c;
            c.id = r.get<std::int64_t>();
            c.post_id = r.get<std::int64_t>();
            c.text = r.get_string();
            c.score = r.get<std::int64_t>();
            c.creation_date = Timestamp{r.get<std::int64_t>()};
            store.comments_.push_back(std::move(c));
        }
    }
    {
        const auto bytes = read_file((dir / "history.bin").string());
        auto r = open_table(bytes, kHistoryMagic, "history.bin", count);
        store.history_.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            PostHistoryRecord h;
            h.id = r.get<std::int64_t>();
            h.post_id = r.get<std::int64_t>();
            h.history_type_code = r.get<std::int32_t>();
            h.history_type = h.history_type_code == 2   ? HistoryType::InitialBody
                             : h.history_type_code == 5 ? HistoryType::EditBody
                                                        : HistoryType::OtherKind;
            h.text = r.get_string();
            h.creation_date = Timestamp{r.get<std::int64_t>()};
            store.history_.push_back(std::move(h));
        }
    }
    store.reindex();

    auto& rep = store.report_;
    rep.rows_read = meta.at("rows_read").get<std::array<std::uint64_t, 3>>();
    rep.rows_loaded = meta.at("rows_loaded").get<std::array<std::uint64_t, 3>>();
    for (const auto& s : meta.at("skipped")) {
        LoadReport::Skip skip;
        skip.table = static_cast<TableKind>(s.at("table").get<int>());
        if (!s.at("row_id").is_null()) {
            skip.row_id = s.at("row_id").get<std::int64_t>();
        }
        skip.reason = s.at("reason").get<std::string>();
        rep.skipped.push_back(std::move(skip));
    }
    rep.dangling_comment_ids = meta.at("dangling_comment_ids").get<std::vector<std::int64_t>>();
    rep.dangling_history_ids = meta.at("dangling_history_ids").get<std::vector<std::int64_t>>();
    rep.orphan_answer_ids = meta.at("orphan_answer_ids").get<std::vector<PostId>>();
    return store;
}

}  // namespace sotk::ingest
