#include "sotk/corpus/sample.hpp"

#include <algorithm>
#include <tuple>

#include "sotk/corpus/clean.hpp"

namespace sotk::corpus {

std::vector<AnswerThread> filter_answers(const RecordStore& store, const FilterOptions& options) {
    std::vector<AnswerThread> out;
    for (const auto& post : store.posts()) {
        if (post.post_type != ingest::PostType::Answer || post.score < options.min_score) {
            continue;
        }
        const auto comments = store.comments_on(post.id);
        if (comments.size() < options.min_comments || comments.empty()) {
            continue;
        }
        out.push_back({&post, comments});
    }
    return out;
}

std::optional<PretrainSample> assemble_sample(const PostRecord& answer, std::span<const CommentRecord> comments) {
    std::vector<const CommentRecord*> ordered;
    ordered.reserve(comments.size());
    for (const auto& c : comments) {
        ordered.push_back(&c);
    }
    std::stable_sort(ordered.begin(), ordered.end(), [](const CommentRecord* a, const CommentRecord* b) {
        return std::tie(a->creation_date, a->id) < std::tie(b->creation_date, b->id);
    });

    PretrainSample sample;
    sample.answer_id = answer.id;
    sample.n_comments = ordered.size();
    sample.text = clean_text(answer.body);
    bool any_content = !sample.text.empty();
    for (const auto* c : ordered) {
        const auto cleaned = clean_comment(c->text);
        any_content = any_content || !cleaned.empty();
        sample.text.append(kSeparator);
        sample.text.append(cleaned);
    }
    if (!any_content) {
        return std::nullopt;
    }
    sample.char_len = sample.text.size();
    return sample;
}

std::size_t count_separators(std::string_view text) {
    std::size_t count = 0;
    for (auto pos = text.find(kSeparatorToken); pos != std::string_view::npos;
         pos = text.find(kSeparatorToken, pos + kSeparatorToken.size())) {
        ++count;
    }
    return count;
}

CorpusBuild build_corpus(const RecordStore& store, const FilterOptions& options) {
    CorpusBuild build;
    for (const auto& thread : filter_answers(store, options)) {
        if (auto sample = assemble_sample(*thread.answer, thread.comments)) {
            build.samples.push_back(std::move(*sample));
        } else {
            ++build.skipped_empty;
        }
    }
    return build;
}

}  // namespace sotk::corpus
