#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sotk::corpus {

inline constexpr std::string_view kUrlToken = "[URL]";
inline constexpr std::string_view kEmailToken = "[EMAIL]";

// A run of a post body that is either inside a `<code>` span or outside all of them.
struct BodySegment {
    bool is_code = false;
    std::string_view text;
};

struct CodeSplit {
    std::vector<BodySegment> segments;
    // A `<code>` opened without a matching `</code>`; the rest of the body is code.
    bool unbalanced = false;
};

// Splits HTML at `<code>` spans. A span closes at the first following `</code>`;
// nested opens inside a span are part of its content.
CodeSplit split_code_spans(std::string_view body);

// Replaces scheme-prefixed (http, https, ftp) and `www.`-prefixed URLs with [URL].
std::string replace_urls(std::string_view text);
// Replaces `local@domain.tld` addresses with [EMAIL].
std::string replace_emails(std::string_view text);

// Decodes HTML entities; unknown references are left as written.
std::string decode_html_entities(std::string_view text);

// HTML post body to pre-training text: tags dropped, entities decoded, URLs and
// emails abstracted, whitespace collapsed. `<code>` contents are kept byte-for-byte.
std::string clean_text(std::string_view body);

// Plain-text comment: URL/email pass plus whitespace collapse.
std::string clean_comment(std::string_view text);

// Concatenation of all code span contents, newline separated.
std::string extract_code(std::string_view body);

}  // namespace sotk::corpus
