#include "miner_fixture.hpp"

#include "sotk/common/rng.hpp"

namespace sotk::testing {

namespace {

constexpr int kInitialBody = 2;
constexpr int kEditBody = 5;

std::string code_body(const std::string& code) {
    return "<p>Try this:</p><pre><code>" + code + "</code></pre>";
}

// Two code strings exactly `k` edits apart: k of the n characters become 'z'.
std::pair<std::string, std::string> code_pair(std::size_t n, std::size_t k, std::int64_t tag) {
    const std::string prefix = "v" + std::to_string(tag) + " = ";
    return {prefix + std::string(n, 'a'), prefix + std::string(n - k, 'a') + std::string(k, 'z')};
}

}  // namespace

MinerFixture miner_fixture(std::size_t positives, std::size_t distractors, std::uint64_t seed) {
    Rng rng(seed);
    MinerFixture f;
    auto& d = f.dump;
    std::int64_t next_post = 1;
    std::int64_t next_comment = 1;
    std::int64_t next_rev = 1;
    static const char* keyword_comments[] = {"This API is deprecated since 2.0", "Outdated: use the new module",
                                             "this is OBSOLETE now", "Sadly out of date.",
                                             "deprecated; see the docs"};
    static const char* phrases[] = {"As Alice&#39;s answers show, this changed.", "The answer by Bob no longer works.",
                                    "The accepted answer is outdated; do this instead.",
                                    "Unlike the other answer, this uses the new API."};

    auto question = [&](const std::string& title = "How to merge lists", const std::string& body = "<p>I need help.</p>") {
        const auto id = next_post++;
        d.question(id, 3, title, body, date_after(0));
        return id;
    };
    auto answer = [&](std::int64_t q, std::int64_t score, const std::string& body, double day,
                      const std::optional<std::string>& edit = std::nullopt) {
        const auto id = next_post++;
        d.answer(id, q, score, body, date_after(day), edit);
        return id;
    };
    auto comment = [&](std::int64_t post, const std::string& text, double day) {
        d.comment(next_comment++, post, text, date_after(day));
    };
    auto revision = [&](std::int64_t post, int type, const std::string& text, double day) {
        d.history(next_rev++, post, type, text, date_after(day));
    };
    auto score_at_least = [&](std::int64_t floor) { return floor + static_cast<std::int64_t>(rng.below(4)); };

    // Keyword comments.
    for (std::size_t i = 0; i < positives; ++i) {
        const auto a = answer(question(), i == 0 ? 1 : score_at_least(1), "<p>Use merge.</p>", 3);
        comment(a, "thanks", 4);
        comment(a, keyword_comments[i % std::size(keyword_comments)], 5 + static_cast<double>(i % 3));
        f.planted[0].insert(a);
    }
    for (std::size_t i = 0; i < distractors; ++i) {
        switch (i % 6) {
            case 0: {
                const auto a = answer(question(), 0, "<p>Use merge.</p>", 3);
                comment(a, "deprecated", 4);
                break;
            }
            case 1: {
                const auto a = answer(question("Merge lists", "<p>Is concat obsolete?</p>"), 2, "<p>No.</p>", 3);
                comment(a, "deprecated anyway", 4);
                break;
            }
            case 2: {
                const auto a = answer(question("Outdated merge API"), 2, "<p>Use merge.</p>", 3);
                comment(a, "this is out of date", 4);
                break;
            }
            case 3: {
                const auto a = answer(question(), 2, "<p>Use merge.</p>", 3);
                comment(a, "undeprecated in 3.1, and not outdatedness either", 4);
                break;
            }
            case 4: {
                const auto q = question();
                answer(q, 2, "<p>Use merge.</p>", 3);
                comment(q, "the deprecated way", 4);
                break;
            }
            default: {
                const auto a = answer(question(), 2, "<p>Use merge.</p>", 3);
                comment(a, "deprecated_flag is a setting", 4);
                break;
            }
        }
    }

    // Edited after a comment.
    for (std::size_t i = 0; i < positives; ++i) {
        const std::size_t k = i == 0 ? 100 : 100 + rng.below(80);
        const auto [before, after] = code_pair(200, k, next_post);
        const auto a = answer(question(), i == 1 ? 1 : score_at_least(1), code_body(after), 3, date_after(30));
        comment(a, "does not compile for me", 10);
        revision(a, kInitialBody, code_body(before), 3);
        if (i % 2 == 0) {
            revision(a, kEditBody, code_body(before + " "), 5);
        }
        revision(a, kEditBody, code_body(after), 30);
        f.planted[1].insert(a);
        if (i == 0) {
            f.distance_100 = a;
        }
    }
    for (std::size_t i = 0; i < distractors; ++i) {
        const auto [before, after] = code_pair(200, i % 6 == 0 ? 99 : 150, next_post);
        double comment_day = 10;
        double edit_day = 30;
        std::int64_t score = 2;
        bool with_comment = true;
        bool with_history = true;
        switch (i % 6) {
            case 1: comment_day = 40; break;
            case 2: score = 0; break;
            case 3: comment_day = 30; break;
            case 4: with_comment = false; break;
            case 5: with_history = false; break;
            default: break;
        }
        const auto a = answer(question(), score, code_body(after), 3, date_after(edit_day));
        if (with_comment) {
            comment(a, "works now", comment_day);
        }
        if (with_history) {
            revision(a, kInitialBody, code_body(before), 3);
            revision(a, kEditBody, code_body(after), edit_day);
        } else {
            revision(a, 4, "new title", edit_day);
            f.missing_history.insert(a);
        }
        if (i % 6 == 0 && f.distance_99 == 0) {
            f.distance_99 = a;
        }
    }

    // Late answers.
    for (std::size_t i = 0; i < positives; ++i) {
        const double day = i == 0 ? 547.5 : 548.0 + static_cast<double>(rng.below(900));
        const auto a = answer(question(), i == 1 ? 2 : score_at_least(2),
                              "<p>" + std::string(phrases[i % std::size(phrases)]) + "</p>", day);
        f.planted[2].insert(a);
        if (i == 0) {
            f.late_boundary = a;
        }
    }
    for (std::size_t i = 0; i < distractors; ++i) {
        const double just_under = 547.5 - 1.0 / static_cast<double>(Timestamp::ms_per_day);
        switch (i % 5) {
            case 0: {
                const auto a = answer(question(), 3, "<p>The accepted answer is outdated.</p>", just_under);
                if (f.late_just_under == 0) {
                    f.late_just_under = a;
                }
                break;
            }
            case 1:
                answer(question(), 1, "<p>The accepted answer is outdated.</p>", 800);
                break;
            case 2:
                answer(question(), 5, "<p>Here is a modern approach.</p>", 800);
                break;
            case 3:
                answer(question(), 5, "<p>The other answer is fine.</p>", 365);
                break;
            default:
                answer(question(), 5, "<p>See <a title=\"accepted answer\" href=\"https://example.com/q/1\">this</a>.</p>", 800);
                break;
        }
    }
    return f;
}

}  // namespace sotk::testing
