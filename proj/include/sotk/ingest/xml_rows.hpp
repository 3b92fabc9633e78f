#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sotk::ingest {

enum class TableKind { Posts, Comments, PostHistory };

std::string_view table_name(TableKind table);

// Attributes of one `row` element in document order. Unknown attributes are kept.
class AttributeMap {
public:
    void add(std::string name, std::string value) { items_.emplace_back(std::move(name), std::move(value)); }

    const std::string* find(std::string_view name) const {
        for (const auto& [key, value] : items_) {
            if (key == name) {
                return &value;
            }
        }
        return nullptr;
    }

    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

// Decodes the five predefined XML entities and numeric character references.
// Returns nullopt on an unknown or malformed reference.
std::optional<std::string> decode_xml_entities(std::string_view raw);

// Pull parser for a dump table: a `rows` root holding `row` elements whose data
// lives entirely in attributes. Reads the source in fixed-size chunks and keeps
// only the unconsumed tail buffered, so memory tracks the largest single row.
class RowReader {
public:
    explicit RowReader(std::istream& source, TableKind table, std::size_t chunk_bytes = 1 << 16);

    // Next row, or nullopt after the closing `</rows>`. Throws ParseError.
    std::optional<AttributeMap> next();

    TableKind table() const { return table_; }
    std::uint64_t rows_read() const { return rows_read_; }
    // Byte offset just past the last fully parsed row.
    std::uint64_t last_complete_row_offset() const { return last_row_end_; }
    std::size_t peak_buffer_bytes() const { return peak_buffer_; }

private:
    bool fill();
    bool ensure(std::size_t n);
    std::uint64_t offset_of(std::size_t buffer_pos) const { return base_offset_ + buffer_pos; }
    [[noreturn]] void fail(const std::string& what, std::size_t buffer_pos) const;
    [[noreturn]] void fail_truncated() const;
    void skip_until(std::string_view terminator);
    AttributeMap parse_row_tag(std::size_t tag_end);
    std::size_t find_tag_end(std::size_t from);

    std::istream& source_;
    TableKind table_;
    std::size_t chunk_bytes_;
    std::string buffer_;
    std::size_t pos_ = 0;
    std::uint64_t base_offset_ = 0;
    bool eof_ = false;
    bool in_root_ = false;
    bool done_ = false;
    std::uint64_t rows_read_ = 0;
    std::uint64_t last_row_end_ = 0;
    std::size_t peak_buffer_ = 0;
};

}  // namespace sotk::ingest
