#pragma once

// Builders for synthetic StackOverflow dump XML used across the test suites.

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sotk/common/timestamp.hpp"
#include "sotk/ingest/record_store.hpp"

namespace sotk::testing {

std::string xml_escape(std::string_view text);

// `2020-01-01T00:00:00.000` plus an offset in days (fractional allowed).
std::string date_after(double days, const std::string& origin = "2020-01-01T00:00:00.000");

class DumpWriter {
public:
    void question(std::int64_t id, std::int64_t score, const std::string& title, const std::string& body,
                  const std::string& date, const std::string& tags = "");
    void answer(std::int64_t id, std::int64_t parent, std::int64_t score, const std::string& body,
                const std::string& date, const std::optional<std::string>& last_edit = std::nullopt);
    void comment(std::int64_t id, std::int64_t post, const std::string& text, const std::string& date,
                 std::int64_t score = 0);
    void history(std::int64_t id, std::int64_t post, int type, const std::string& text, const std::string& date);
    // Verbatim row attributes, for malformed-row fixtures.
    void raw_post_row(const std::string& attributes);

    std::string posts_xml() const { return wrap(posts_); }
    std::string comments_xml() const { return wrap(comments_); }
    std::string history_xml() const { return wrap(history_); }

    ingest::RecordStore build(const std::filesystem::path& dir = {}) const;

private:
    static std::string wrap(const std::vector<std::string>& rows);
    std::vector<std::string> posts_;
    std::vector<std::string> comments_;
    std::vector<std::string> history_;
};

// Random dump of roughly `n_rows` rows over posts and comments, deterministic in seed.
DumpWriter random_dump(std::size_t n_rows, std::uint64_t seed);

}  // namespace sotk::testing
