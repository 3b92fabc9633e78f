#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>
#include <streambuf>

#include "doctest.h"
#include "dump_fixture.hpp"
#include "sotk/common/binary_io.hpp"
#include "sotk/ingest/record_store.hpp"

using namespace sotk;
using namespace sotk::ingest;
using sotk::testing::DumpWriter;

namespace {

std::vector<AttributeMap> read_all(const std::string& xml, TableKind table = TableKind::Posts,
                                   std::size_t chunk = 1 << 16) {
    std::istringstream in(xml);
    RowReader reader(in, table, chunk);
    std::vector<AttributeMap> rows;
    while (auto row = reader.next()) {
        rows.push_back(std::move(*row));
    }
    return rows;
}

AttributeMap attrs(std::initializer_list<std::pair<const char*, const char*>> items) {
    AttributeMap m;
    for (const auto& [k, v] : items) {
        m.add(k, v);
    }
    return m;
}

// Produces `<rows>` followed by identical rows until `total_bytes` is reached,
// without ever materializing the document.
class SyntheticDumpBuf : public std::streambuf {
public:
    SyntheticDumpBuf(std::uint64_t total_bytes, std::string row) : remaining_(total_bytes), row_(std::move(row)) {
        chunk_ = "<?xml version=\"1.0\"?>\n<rows>\n";
        setg(chunk_.data(), chunk_.data(), chunk_.data() + chunk_.size());
    }
    std::uint64_t rows_emitted() const { return rows_; }

protected:
    int_type underflow() override {
        if (finished_) {
            return traits_type::eof();
        }
        chunk_.clear();
        while (chunk_.size() < (1 << 16)) {
            if (remaining_ < row_.size()) {
                chunk_ += "</rows>\n";
                finished_ = true;
                break;
            }
            chunk_ += row_;
            remaining_ -= row_.size();
            ++rows_;
        }
        setg(chunk_.data(), chunk_.data(), chunk_.data() + chunk_.size());
        return chunk_.empty() ? traits_type::eof() : traits_type::to_int_type(chunk_[0]);
    }

private:
    std::uint64_t remaining_;
    std::string row_;
    std::string chunk_;
    std::uint64_t rows_ = 0;
    bool finished_ = false;
};

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("sotk_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("stream_rows yields rows in document order") {
    const std::string xml =
        "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<rows>\n"
        "  <row Id=\"1\" PostTypeId=\"1\" />\n"
        "  <!-- a comment -->\n"
        "  <row Id=\"2\" PostTypeId=\"2\" Extra='x'/>\n"
        "  <row Id=\"3\" PostTypeId=\"2\"></row>\n"
        "</rows>\n";
    // Tiny chunks force rows to straddle buffer refills.
    for (std::size_t chunk : {16u, 17u, 64u, 65536u}) {
        const auto rows = read_all(xml, TableKind::Posts, chunk);
        REQUIRE(rows.size() == 3);
        CHECK(*rows[0].find("Id") == "1");
        CHECK(*rows[1].find("Id") == "2");
        CHECK(*rows[2].find("Id") == "3");
        CHECK(*rows[1].find("Extra") == "x");
    }
}

TEST_CASE("attribute values are entity-decoded") {
    const auto rows = read_all("<rows><row Body=\"&lt;p&gt;hi&lt;/p&gt;\" T=\"a&amp;b&#xA;&#39;&quot;\"/></rows>");
    REQUIRE(rows.size() == 1);
    CHECK(*rows[0].find("Body") == "<p>hi</p>");
    CHECK(*rows[0].find("T") == "a&b\n'\"");
    CHECK(decode_xml_entities("&#x1F600;") == std::string("\xF0\x9F\x98\x80"));
    CHECK_FALSE(decode_xml_entities("&bogus;").has_value());
}

TEST_CASE("truncated dump reports the offset of the last complete row") {
    const std::string valid =
        "<rows>\n  <row Id=\"1\" Body=\"a\" />\n  <row Id=\"2\" Body=\"b\" />\n  <row Id=\"3\" Body=\"c\" />\n</rows>\n";
    // Cut inside the third row; the second row ends right after its "/>".
    const auto third = valid.find("<row Id=\"3\"");
    const auto expected_offset = valid.rfind("/>", third) + 2;
    const std::string truncated = valid.substr(0, third + 12);
    std::istringstream in(truncated);
    RowReader reader(in, TableKind::Posts, 16);
    CHECK(reader.next().has_value());
    CHECK(reader.next().has_value());
    try {
        reader.next();
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == expected_offset);
    }

    // Missing root close is also truncation.
    std::istringstream no_close("<rows><row Id=\"1\"/>");
    RowReader reader2(no_close, TableKind::Posts);
    CHECK(reader2.next().has_value());
    CHECK_THROWS_AS(reader2.next(), ParseError);
}

TEST_CASE("malformed XML is a parse error") {
    CHECK_THROWS_AS(read_all("<rows><row Id=1 /></rows>"), ParseError);
    CHECK_THROWS_AS(read_all("<rows><item Id=\"1\" /></rows>"), ParseError);
    CHECK_THROWS_AS(read_all("<rows>text<row Id=\"1\"/></rows>"), ParseError);
    CHECK_THROWS_AS(read_all("<rows><row A=\"&nope;\"/></rows>"), ParseError);
    CHECK_THROWS_AS(read_all(""), ParseError);
    CHECK(read_all("<rows/>").empty());
}

TEST_CASE("parse_post maps fields") {
    const auto answer = parse_post(attrs({{"Id", "7"},
                                          {"PostTypeId", "2"},
                                          {"ParentId", "3"},
                                          {"Score", "5"},
                                          {"Body", "<p>x</p>"},
                                          {"CreationDate", "2010-05-01T10:00:00.123"}}));
    CHECK(answer.post_type == PostType::Answer);
    CHECK(answer.parent_id == std::optional<PostId>(3));
    CHECK(answer.score == 5);
    CHECK_FALSE(answer.title.has_value());

    const auto question = parse_post(attrs({{"Id", "3"},
                                            {"PostTypeId", "1"},
                                            {"Title", "How?"},
                                            {"Tags", "<python><pandas>"},
                                            {"Body", "b"},
                                            {"AcceptedAnswerId", "7"},
                                            {"CreationDate", "2010-05-01T09:00:00.000"}}));
    CHECK(question.post_type == PostType::Question);
    CHECK_FALSE(question.parent_id.has_value());
    REQUIRE(question.tags.has_value());
    CHECK(*question.tags == std::vector<std::string>{"python", "pandas"});
    CHECK(question.accepted_answer_id == std::optional<PostId>(7));
    CHECK(split_tags("|c++|templates|") == std::vector<std::string>{"c++", "templates"});

    const auto wiki = parse_post(attrs({{"Id", "4"}, {"PostTypeId", "5"}, {"Body", ""}, {"CreationDate", "2010-05-01T09:00:00"}}));
    CHECK(wiki.post_type == PostType::Other);
    CHECK(wiki.post_type_code == 5);
}

TEST_CASE("parse_post row-level errors") {
    try {
        parse_post(attrs({{"Id", "9"}, {"PostTypeId", "2"}, {"ParentId", "1"}, {"CreationDate", "2010-05-01T09:00:00"}}));
        FAIL("missing Body accepted");
    } catch (const RowError& e) {
        CHECK(e.row_id() == std::optional<std::int64_t>(9));
    }
    CHECK_THROWS_AS(parse_post(attrs({{"Id", "x"}, {"PostTypeId", "1"}, {"Body", ""}, {"CreationDate", "2010-05-01T09:00:00"}})),
                    RowError);
    CHECK_THROWS_AS(parse_post(attrs({{"Id", "1"}, {"PostTypeId", "1"}, {"Body", ""}, {"CreationDate", "yesterday"}})),
                    RowError);
    CHECK_THROWS_AS(parse_post(attrs({{"Id", "1"}, {"PostTypeId", "2"}, {"Body", ""}, {"CreationDate", "2010-05-01T09:00:00"}})),
                    RowError);
    CHECK_THROWS_AS(parse_post(attrs({{"Id", "1"},
                                      {"PostTypeId", "1"},
                                      {"Body", ""},
                                      {"CreationDate", "2010-05-01T09:00:00"},
                                      {"LastEditDate", "2009-05-01T09:00:00"}})),
                    RowError);
}

TEST_CASE("parse_comment and parse_history") {
    const auto c = parse_comment(
        attrs({{"Id", "1"}, {"PostId", "7"}, {"Text", "deprecated since v2"}, {"CreationDate", "2011-01-01T00:00:00.000"}}));
    CHECK(c.post_id == 7);
    CHECK(c.text == "deprecated since v2");
    CHECK_THROWS_AS(parse_comment(attrs({{"Id", "1"}, {"PostId", "7"}, {"Text", ""}, {"CreationDate", "2011-01-01T00:00:00"}})),
                    RowError);

    const auto edit = parse_history(attrs(
        {{"Id", "2"}, {"PostId", "7"}, {"PostHistoryTypeId", "5"}, {"Text", "<p>new</p>"}, {"CreationDate", "2011-01-01T00:00:00"}}));
    CHECK(edit.history_type == HistoryType::EditBody);
    const auto initial = parse_history(attrs(
        {{"Id", "3"}, {"PostId", "7"}, {"PostHistoryTypeId", "2"}, {"Text", "<p>old</p>"}, {"CreationDate", "2011-01-01T00:00:00"}}));
    CHECK(initial.history_type == HistoryType::InitialBody);
    const auto other =
        parse_history(attrs({{"Id", "4"}, {"PostId", "7"}, {"PostHistoryTypeId", "4"}, {"CreationDate", "2011-01-01T00:00:00"}}));
    CHECK(other.history_type == HistoryType::OtherKind);
    CHECK(other.history_type_code == 4);
}

TEST_CASE("timestamps parse to UTC milliseconds") {
    const auto t = parse_timestamp("1970-01-02T00:00:01.5");
    REQUIRE(t);
    CHECK(t->ms_since_epoch == 86'400'000 + 1'500);
    CHECK(format_timestamp(*parse_timestamp("2022-03-07T12:34:56.789")) == "2022-03-07T12:34:56.789");
    CHECK_FALSE(parse_timestamp("2022-02-30T00:00:00").has_value());
}

TEST_CASE("build_store indexes answers and comments") {
    DumpWriter d;
    d.question(1, 3, "q1", "<p>one</p>", "2012-01-01T00:00:00.000");
    d.question(2, 0, "q2", "<p>two</p>", "2012-01-02T00:00:00.000");
    d.answer(10, 1, 1, "<p>a</p>", "2012-01-03T00:00:00.000");
    d.answer(11, 1, 0, "<p>b</p>", "2012-01-03T00:00:00.000");
    d.answer(12, 2, 4, "<p>c</p>", "2012-01-04T00:00:00.000");
    d.comment(100, 10, "late", "2012-02-03T00:00:00.000");
    d.comment(101, 10, "early", "2012-01-05T00:00:00.000");
    d.comment(102, 12, "x", "2012-01-05T00:00:00.000");
    d.comment(103, 1, "on question", "2012-01-05T00:00:00.000");
    const auto store = d.build();

    CHECK(store.sealed());
    CHECK(store.posts().size() == 5);
    const auto q1 = store.answers_of(1);
    CHECK(std::vector<PostId>(q1.begin(), q1.end()) == std::vector<PostId>{10, 11});
    CHECK(store.answers_of(2).size() == 1);
    CHECK(store.answers_of(10).empty());
    const auto on10 = store.comments_on(10);
    REQUIRE(on10.size() == 2);
    CHECK(on10[0].text == "early");
    CHECK(on10[1].text == "late");
    CHECK(store.find_post(12)->score == 4);
    CHECK(store.find_post(99) == nullptr);
}

TEST_CASE("build_store edge cases") {
    SUBCASE("empty inputs give a valid empty store") {
        std::istringstream p("<rows></rows>"), c("<rows/>"), h("<rows/>");
        const auto store = build_store({&p, &c, &h});
        CHECK(store.sealed());
        CHECK(store.posts().empty());
    }
    SUBCASE("duplicate post id names the id") {
        DumpWriter d;
        d.question(7, 0, "a", "b", "2012-01-01T00:00:00.000");
        d.question(7, 0, "a", "b", "2012-01-01T00:00:00.000");
        try {
            d.build();
            FAIL("duplicate accepted");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("7") != std::string::npos);
        }
    }
    SUBCASE("bad rows are skipped and reported, dangling comments flagged") {
        DumpWriter d;
        d.question(1, 0, "a", "b", "2012-01-01T00:00:00.000");
        d.raw_post_row("Id=\"9\" PostTypeId=\"2\" ParentId=\"1\" CreationDate=\"2012-01-01T00:00:00\"");
        d.comment(5, 1, "ok", "2012-01-01T00:00:00.000");
        d.comment(6, 404, "dangling", "2012-01-01T00:00:00.000");
        const auto store = d.build();
        const auto& report = store.report();
        CHECK(report.rows_read[0] == 2);
        CHECK(report.rows_loaded[0] == 1);
        REQUIRE(report.skipped.size() == 1);
        CHECK(report.skipped[0].row_id == std::optional<std::int64_t>(9));
        CHECK(report.dangling_comment_ids == std::vector<std::int64_t>{6});
        CHECK(store.comments().size() == 2);
        CHECK(report.to_text().find("skip Posts row 9") != std::string::npos);
    }
}

TEST_CASE("store persistence is idempotent and round-trips") {
    const auto dump = sotk::testing::random_dump(400, 11);
    const auto dir_a = temp_dir("store_a");
    const auto dir_b = temp_dir("store_b");
    const auto store = dump.build(dir_a);
    dump.build(dir_b);
    for (const char* file : {"posts.bin", "comments.bin", "history.bin", "store.json", "load_report.txt"}) {
        CHECK(read_file((dir_a / file).string()) == read_file((dir_b / file).string()));
    }
    const auto loaded = RecordStore::load(dir_a);
    REQUIRE(loaded.posts().size() == store.posts().size());
    CHECK(std::equal(loaded.posts().begin(), loaded.posts().end(), store.posts().begin()));
    CHECK(std::equal(loaded.comments().begin(), loaded.comments().end(), store.comments().begin()));
    CHECK(loaded.report().rows_read == store.report().rows_read);

    auto bytes = read_file((dir_a / "posts.bin").string());
    bytes[bytes.size() / 2] ^= 0x5a;
    write_file((dir_a / "posts.bin").string(), bytes);
    CHECK_THROWS_AS(RecordStore::load(dir_a), DataError);
}

TEST_CASE("roundtrip accounting and index coherence on random dumps") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto dump = sotk::testing::random_dump(600, seed);
        const auto store = dump.build();
        const auto& report = store.report();
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(report.rows_read[t] == report.rows_loaded[t] + report.skipped_in(static_cast<TableKind>(t)));
        }
        CHECK(store.posts().size() == report.rows_loaded[0]);
        CHECK(store.comments().size() == report.rows_loaded[1]);

        std::set<PostId> ids;
        for (const auto& p : store.posts()) {
            CHECK(ids.insert(p.id).second);
            if (p.post_type == PostType::Answer) {
                const auto siblings = store.answers_of(*p.parent_id);
                CHECK(std::find(siblings.begin(), siblings.end(), p.id) != siblings.end());
            }
        }
        for (const auto& c : store.comments()) {
            const auto list = store.comments_on(c.post_id);
            CHECK(std::any_of(list.begin(), list.end(), [&](const auto& x) { return x.id == c.id; }));
            CHECK(std::is_sorted(list.begin(), list.end(), [](const auto& a, const auto& b) {
                return std::tie(a.creation_date, a.id) < std::tie(b.creation_date, b.id);
            }));
        }
    }
}

TEST_CASE("stream_rows memory stays bounded on a large generated dump") {
    // 1 GiB by default; SOTK_STREAM_TEST_BYTES overrides for quick runs.
    std::uint64_t total = 1ULL << 30;
    if (const char* env = std::getenv("SOTK_STREAM_TEST_BYTES")) {
        total = std::strtoull(env, nullptr, 10);
    }
    const std::string row = "  <row Id=\"1\" PostTypeId=\"2\" ParentId=\"1\" Score=\"3\" Body=\"" +
                            std::string(900, 'x') + "&lt;code&gt;\" CreationDate=\"2012-01-01T00:00:00.000\" />\n";
    SyntheticDumpBuf buf(total, row);
    std::istream in(&buf);
    const std::size_t chunk = 1 << 16;
    RowReader reader(in, TableKind::Posts, chunk);
    std::uint64_t rows = 0;
    while (reader.next()) {
        ++rows;
    }
    CHECK(rows == buf.rows_emitted());
    // Unconsumed tail (< chunk) + one refill + the row being parsed.
    CHECK(reader.peak_buffer_bytes() <= 2 * chunk + 2 * row.size());
}
