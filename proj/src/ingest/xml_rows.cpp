#include "sotk/ingest/xml_rows.hpp"

#include <algorithm>

#include "sotk/common/error.hpp"

namespace sotk::ingest {

std::string_view table_name(TableKind table) {
    switch (table) {
        case TableKind::Posts:
            return "Posts";
        case TableKind::Comments:
            return "Comments";
        case TableKind::PostHistory:
            return "PostHistory";
    }
    return "?";
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.' || c == ':';
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace

std::optional<std::string> decode_xml_entities(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        const auto amp = raw.find('&', i);
        if (amp == std::string_view::npos) {
            out.append(raw.substr(i));
            break;
        }
        out.append(raw.substr(i, amp - i));
        const auto semi = raw.find(';', amp);
        if (semi == std::string_view::npos || semi - amp > 12) {
            return std::nullopt;
        }
        const auto ref = raw.substr(amp + 1, semi - amp - 1);
        if (ref == "lt") {
            out.push_back('<');
        } else if (ref == "gt") {
            out.push_back('>');
        } else if (ref == "amp") {
            out.push_back('&');
        } else if (ref == "quot") {
            out.push_back('"');
        } else if (ref == "apos") {
            out.push_back('\'');
        } else if (ref.size() >= 2 && ref[0] == '#') {
            const bool hex = ref[1] == 'x' || ref[1] == 'X';
            const auto digits = ref.substr(hex ? 2 : 1);
            if (digits.empty()) {
                return std::nullopt;
            }
            std::uint32_t cp = 0;
            for (char c : digits) {
                int d;
                if (c >= '0' && c <= '9') {
                    d = c - '0';
                } else if (hex && c >= 'a' && c <= 'f') {
                    d = c - 'a' + 10;
                } else if (hex && c >= 'A' && c <= 'F') {
                    d = c - 'A' + 10;
                } else {
                    return std::nullopt;
                }
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
                if (cp > 0x10FFFF) {
                    return std::nullopt;
                }
            }
            if (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF)) {
                return std::nullopt;
            }
            append_utf8(out, cp);
        } else {
            return std::nullopt;
        }
        i = semi + 1;
    }
    return out;
}

RowReader::RowReader(std::istream& source, TableKind table, std::size_t chunk_bytes)
    : source_(source), table_(table), chunk_bytes_(std::max<std::size_t>(chunk_bytes, 16)) {}

bool RowReader::fill() {
    if (eof_) {
        return false;
    }
    const std::size_t old = buffer_.size();
    buffer_.resize(old + chunk_bytes_);
    source_.read(buffer_.data() + old, static_cast<std::streamsize>(chunk_bytes_));
    const auto got = static_cast<std::size_t>(source_.gcount());
    buffer_.resize(old + got);
    if (got < chunk_bytes_) {
        eof_ = true;
    }
    peak_buffer_ = std::max(peak_buffer_, buffer_.size());
    return got > 0;
}

bool RowReader::ensure(std::size_t n) {
    while (buffer_.size() - pos_ < n) {
        if (!fill()) {
            return false;
        }
    }
    return true;
}

void RowReader::fail(const std::string& what, std::size_t buffer_pos) const {
    throw ParseError(std::string(table_name(table_)) + " dump: " + what, offset_of(buffer_pos));
}

void RowReader::fail_truncated() const {
    throw ParseError(std::string(table_name(table_)) + " dump: input ends inside the document after " +
                         std::to_string(rows_read_) + " complete rows",
                     last_row_end_);
}

void RowReader::skip_until(std::string_view terminator) {
    std::size_t search_from = pos_;
    while (true) {
        const auto hit = buffer_.find(terminator, search_from);
        if (hit != std::string::npos) {
            pos_ = hit + terminator.size();
            return;
        }
        search_from = buffer_.size() >= terminator.size() ? buffer_.size() - terminator.size() + 1 : 0;
        search_from = std::max(search_from, pos_);
        if (!fill()) {
            fail_truncated();
        }
    }
}

std::size_t RowReader::find_tag_end(std::size_t from) {
    char quote = 0;
    std::size_t i = from;
    while (true) {
        for (; i < buffer_.size(); ++i) {
            const char c = buffer_[i];
            if (quote != 0) {
                if (c == quote) {
                    quote = 0;
                }
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '>') {
                return i;
            } else if (c == '<') {
                fail("unexpected '<' inside a tag", i);
            }
        }
        if (!fill()) {
            fail_truncated();
        }
    }
}

AttributeMap RowReader::parse_row_tag(std::size_t tag_end) {
    AttributeMap attrs;
    std::size_t i = pos_ + 4;  // past "<row"
    std::size_t body_end = tag_end;
    if (body_end > i && buffer_[body_end - 1] == '/') {
        --body_end;
    }
    while (true) {
        while (i < body_end && is_space(buffer_[i])) {
            ++i;
        }
        if (i >= body_end) {
            break;
        }
        const std::size_t name_start = i;
        while (i < body_end && is_name_char(buffer_[i])) {
            ++i;
        }
        if (i == name_start) {
            fail("bad attribute name", i);
        }
        std::string name = buffer_.substr(name_start, i - name_start);
        while (i < body_end && is_space(buffer_[i])) {
            ++i;
        }
        if (i >= body_end || buffer_[i] != '=') {
            fail("expected '=' after attribute " + name, i);
        }
        ++i;
        while (i < body_end && is_space(buffer_[i])) {
            ++i;
        }
        if (i >= body_end || (buffer_[i] != '"' && buffer_[i] != '\'')) {
            fail("expected quoted value for attribute " + name, i);
        }
        const char quote = buffer_[i];
        const auto close = buffer_.find(quote, i + 1);
        if (close == std::string::npos || close >= body_end) {
            fail("unterminated value for attribute " + name, i);
        }
        auto value = decode_xml_entities(std::string_view(buffer_).substr(i + 1, close - i - 1));
        if (!value) {
            fail("bad entity reference in attribute " + name, i);
        }
        attrs.add(std::move(name), std::move(*value));
        i = close + 1;
        if (i < body_end && !is_space(buffer_[i])) {
            fail("expected whitespace between attributes", i);
        }
    }
    return attrs;
}

std::optional<AttributeMap> RowReader::next() {
    if (done_) {
        return std::nullopt;
    }
    if (pos_ >= chunk_bytes_) {
        buffer_.erase(0, pos_);
        base_offset_ += pos_;
        pos_ = 0;
    }
    while (true) {
        while (true) {
            while (pos_ < buffer_.size() && is_space(buffer_[pos_])) {
                ++pos_;
            }
            if (pos_ < buffer_.size() || !fill()) {
                break;
            }
        }
        if (pos_ >= buffer_.size()) {
            if (rows_read_ == 0 && !in_root_) {
                fail("empty document", pos_);
            }
            fail_truncated();
        }
        if (buffer_[pos_] != '<') {
            fail("unexpected character data", pos_);
        }
        if (!ensure(2)) {
            fail_truncated();
        }
        const char second = buffer_[pos_ + 1];
        if (second == '?') {
            skip_until("?>");
            continue;
        }
        if (second == '!') {
            if (ensure(4) && buffer_.compare(pos_, 4, "<!--") == 0) {
                skip_until("-->");
            } else {
                skip_until(">");
            }
            continue;
        }
        const std::size_t tag_end = find_tag_end(pos_ + 1);
        const bool closing = second == '/';
        std::size_t name_start = pos_ + (closing ? 2 : 1);
        std::size_t name_end = name_start;
        while (name_end < tag_end && is_name_char(buffer_[name_end])) {
            ++name_end;
        }
        const std::string_view name(buffer_.data() + name_start, name_end - name_start);
        const bool self_closing = buffer_[tag_end - 1] == '/';

        if (closing) {
            if (name != "rows" || !in_root_) {
                fail("unexpected closing tag </" + std::string(name) + ">", pos_);
            }
            pos_ = tag_end + 1;
            done_ = true;
            return std::nullopt;
        }
        if (name == "rows") {
            if (in_root_) {
                fail("nested <rows> element", pos_);
            }
            in_root_ = true;
            pos_ = tag_end + 1;
            if (self_closing) {
                done_ = true;
                return std::nullopt;
            }
            continue;
        }
        if (name != "row") {
            fail("unexpected element <" + std::string(name) + ">", pos_);
        }
        if (!in_root_) {
            fail("<row> outside the <rows> root", pos_);
        }
        AttributeMap attrs = parse_row_tag(tag_end);
        pos_ = tag_end + 1;
        if (!self_closing) {
            while (true) {
                while (pos_ < buffer_.size() && is_space(buffer_[pos_])) {
                    ++pos_;
                }
                if (pos_ < buffer_.size() || !fill()) {
                    break;
                }
            }
            if (!ensure(6)) {
                fail_truncated();
            }
            if (buffer_.compare(pos_, 6, "</row>") != 0) {
                fail("expected </row>", pos_);
            }
            pos_ += 6;
        }
        ++rows_read_;
        last_row_end_ = offset_of(pos_);
        return attrs;
    }
}

}  // namespace sotk::ingest
