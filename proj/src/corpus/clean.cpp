#include "sotk/corpus/clean.hpp"

#include <array>
#include <cctype>

namespace sotk::corpus {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_alnum(char c) { return is_alpha(c) || (c >= '0' && c <= '9'); }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool starts_with_ci(std::string_view text, std::size_t pos, std::string_view prefix) {
    if (pos + prefix.size() > text.size()) {
        return false;
    }
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (lower(text[pos + i]) != prefix[i]) {
            return false;
        }
    }
    return true;
}

std::size_t find_ci(std::string_view text, std::string_view needle, std::size_t from) {
    for (std::size_t i = from; i + needle.size() <= text.size(); ++i) {
        if (starts_with_ci(text, i, needle)) {
            return i;
        }
    }
    return std::string_view::npos;
}

// Position just past an opening `<code ...>` tag at `pos`, or npos.
std::size_t code_open_end(std::string_view body, std::size_t pos) {
    if (!starts_with_ci(body, pos, "<code")) {
        return std::string_view::npos;
    }
    const std::size_t after = pos + 5;
    if (after >= body.size() || (body[after] != '>' && !is_space(body[after]))) {
        return std::string_view::npos;
    }
    const auto close = body.find('>', after);
    return close == std::string_view::npos ? std::string_view::npos : close + 1;
}

bool url_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u > 0x20 && u != 0x7f && c != '<' && c != '>' && c != '"' && c != '\'';
}

// Length of a URL starting at `pos`, or 0.
std::size_t url_length(std::string_view text, std::size_t pos) {
    if (pos > 0 && (is_alnum(text[pos - 1]) || text[pos - 1] == '_')) {
        return 0;
    }
    std::size_t head = 0;
    for (std::string_view scheme : {"https://", "http://", "ftp://"}) {
        if (starts_with_ci(text, pos, scheme)) {
            head = scheme.size();
            break;
        }
    }
    if (head == 0 && starts_with_ci(text, pos, "www.")) {
        head = 4;
    }
    if (head == 0 || pos + head >= text.size() || !is_alnum(text[pos + head])) {
        return 0;
    }
    std::size_t end = pos + head;
    int open_parens = 0;
    while (end < text.size() && url_char(text[end])) {
        if (text[end] == '(') {
            ++open_parens;
        } else if (text[end] == ')') {
            --open_parens;
        }
        ++end;
    }
    while (end > pos + head) {
        const char last = text[end - 1];
        if (last == '.' || last == ',' || last == ';' || last == ':' || last == '!' || last == '?') {
            --end;
        } else if (last == ')' && open_parens < 0) {
            ++open_parens;
            --end;
        } else {
            break;
        }
    }
    return end - pos;
}

bool email_local_char(char c) {
    return is_alnum(c) || c == '.' || c == '_' || c == '%' || c == '+' || c == '-';
}
bool email_domain_char(char c) { return is_alnum(c) || c == '.' || c == '-'; }

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    if (pending_space) {
        out.push_back(' ');
    }
    return out;
}

std::string strip_tags(std::string_view html) {
    std::string out;
    out.reserve(html.size());
    std::size_t i = 0;
    while (i < html.size()) {
        const char c = html[i];
        if (c == '<' && i + 1 < html.size() && (is_alpha(html[i + 1]) || html[i + 1] == '/' || html[i + 1] == '!')) {
            const auto close = html.find('>', i + 1);
            if (close != std::string_view::npos) {
                out.push_back(' ');
                i = close + 1;
                continue;
            }
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

// Reserved token literals that must only ever come from sample assembly.
constexpr std::array<std::string_view, 4> kReservedLiterals = {"<RS>", "<mask>", "<pad>", "<cls>"};

std::string drop_reserved_literals(std::string text) {
    for (auto literal : kReservedLiterals) {
        std::size_t pos = 0;
        while ((pos = text.find(literal, pos)) != std::string::npos) {
            text.replace(pos, literal.size(), " ");
        }
    }
    return text;
}

std::string clean_plain(std::string_view text) {
    return collapse_whitespace(drop_reserved_literals(replace_emails(replace_urls(text))));
}

void trim(std::string& s) {
    std::size_t b = 0;
    while (b < s.size() && is_space(s[b])) {
        ++b;
    }
    std::size_t e = s.size();
    while (e > b && is_space(s[e - 1])) {
        --e;
    }
    s = s.substr(b, e - b);
}

}  // namespace

CodeSplit split_code_spans(std::string_view body) {
    CodeSplit split;
    std::size_t text_start = 0;
    std::size_t i = 0;
    while (i < body.size()) {
        const auto open = find_ci(body, "<code", i);
        if (open == std::string_view::npos) {
            break;
        }
        const auto content_start = code_open_end(body, open);
        if (content_start == std::string_view::npos) {
            i = open + 1;
            continue;
        }
        if (open > text_start) {
            split.segments.push_back({false, body.substr(text_start, open - text_start)});
        }
        const auto close = find_ci(body, "</code>", content_start);
        if (close == std::string_view::npos) {
            split.segments.push_back({true, body.substr(content_start)});
            split.unbalanced = true;
            return split;
        }
        split.segments.push_back({true, body.substr(content_start, close - content_start)});
        text_start = close + 7;
        i = text_start;
    }
    if (text_start < body.size()) {
        split.segments.push_back({false, body.substr(text_start)});
    }
    return split;
}

std::string replace_urls(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = lower(text[i]);
        if (c == 'h' || c == 'f' || c == 'w') {
            if (const auto len = url_length(text, i); len > 0) {
                out.append(kUrlToken);
                i += len;
                continue;
            }
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

std::string replace_emails(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '@') {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        std::size_t local = out.size();
        while (local > 0 && email_local_char(out[local - 1])) {
            --local;
        }
        while (local < out.size() && out[local] == '.') {
            ++local;
        }
        std::size_t end = i + 1;
        while (end < text.size() && email_domain_char(text[end])) {
            ++end;
        }
        while (end > i + 1 && (text[end - 1] == '.' || text[end - 1] == '-')) {
            --end;
        }
        const auto domain = text.substr(i + 1, end - i - 1);
        const auto last_dot = domain.rfind('.');
        bool valid = local < out.size() && last_dot != std::string_view::npos && last_dot > 0 &&
                     domain.size() - last_dot - 1 >= 2;
        if (valid) {
            for (char t : domain.substr(last_dot + 1)) {
                valid = valid && is_alpha(t);
            }
        }
        if (!valid) {
            out.push_back('@');
            ++i;
            continue;
        }
        out.resize(local);
        out.append(kEmailToken);
        i = end;
    }
    return out;
}

std::string decode_html_entities(std::string_view text) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 8> named = {{
        {"lt", "<"},
        {"gt", ">"},
        {"amp", "&"},
        {"quot", "\""},
        {"apos", "'"},
        {"nbsp", " "},
        {"ndash", "\xE2\x80\x93"},
        {"hellip", "\xE2\x80\xA6"},
    }};
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '&') {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        const auto semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back('&');
            ++i;
            continue;
        }
        const auto ref = text.substr(i + 1, semi - i - 1);
        bool done = false;
        for (const auto& [name, value] : named) {
            if (ref == name) {
                out.append(value);
                done = true;
                break;
            }
        }
        if (!done && ref.size() >= 2 && ref[0] == '#') {
            const bool hex = ref[1] == 'x' || ref[1] == 'X';
            const auto digits = ref.substr(hex ? 2 : 1);
            std::uint32_t cp = 0;
            bool ok = !digits.empty();
            for (char d : digits) {
                int v = -1;
                if (d >= '0' && d <= '9') {
                    v = d - '0';
                } else if (hex && std::isxdigit(static_cast<unsigned char>(d))) {
                    v = lower(d) - 'a' + 10;
                }
                if (v < 0 || cp > 0x10FFFF) {
                    ok = false;
                    break;
                }
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
            }
            if (ok && cp > 0 && cp <= 0x10FFFF && (cp < 0xD800 || cp > 0xDFFF)) {
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
                done = true;
            }
        }
        if (done) {
            i = semi + 1;
        } else {
            out.push_back('&');
            ++i;
        }
    }
    return out;
}

std::string clean_text(std::string_view body) {
    const auto split = split_code_spans(body);
    std::string out;
    out.reserve(body.size());
    for (std::size_t k = 0; k < split.segments.size(); ++k) {
        const auto& seg = split.segments[k];
        if (seg.is_code) {
            out.append(seg.text);
            continue;
        }
        std::string text = clean_plain(decode_html_entities(strip_tags(seg.text)));
        if (k == 0) {
            while (!text.empty() && text.front() == ' ') {
                text.erase(text.begin());
            }
        }
        if (k + 1 == split.segments.size()) {
            while (!text.empty() && text.back() == ' ') {
                text.pop_back();
            }
        }
        out.append(text);
    }
    return out;
}

std::string clean_comment(std::string_view text) {
    std::string out = clean_plain(text);
    trim(out);
    return out;
}

std::string extract_code(std::string_view body) {
    std::string out;
    bool first = true;
    for (const auto& seg : split_code_spans(body).segments) {
        if (!seg.is_code) {
            continue;
        }
        if (!first) {
            out.push_back('\n');
        }
        out.append(seg.text);
        first = false;
    }
    return out;
}

}  // namespace sotk::corpus
