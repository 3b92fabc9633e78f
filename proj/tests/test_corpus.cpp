#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "doctest.h"
#include "dump_fixture.hpp"
#include "sotk/bpe/vocab.hpp"
#include "sotk/common/binary_io.hpp"
#include "sotk/common/rng.hpp"
#include "sotk/corpus/clean.hpp"
#include "sotk/corpus/stats.hpp"
#include "sotk/corpus/writer.hpp"

using namespace sotk;
using namespace sotk::corpus;
using sotk::testing::DumpWriter;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("sotk_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

PostRecord make_answer(PostId id, const std::string& body) {
    PostRecord p;
    p.id = id;
    p.post_type = ingest::PostType::Answer;
    p.post_type_code = 2;
    p.parent_id = 1;
    p.score = 1;
    p.body = body;
    return p;
}

CommentRecord make_comment(std::int64_t id, const std::string& text, std::int64_t ms) {
    CommentRecord c;
    c.id = id;
    c.post_id = 2;
    c.text = text;
    c.creation_date = Timestamp{ms};
    return c;
}

PretrainSample make_sample(PostId id, std::size_t n_comments, std::size_t chars) {
    PretrainSample s;
    s.answer_id = id;
    s.n_comments = n_comments;
    s.text = std::string(chars, 'x');
    s.char_len = chars;
    return s;
}

}  // namespace

TEST_CASE("clean_text abstracts URLs and emails") {
    CHECK(clean_text("<p>see https://x.io/a?q=1 now</p>") == "see [URL] now");
    CHECK(clean_text("contact me@host.com") == "contact [EMAIL]");
    CHECK(clean_text("<p>go to www.example.org.</p>") == "go to [URL].");
    CHECK(clean_text("(see http://a.b/c)") == "(see [URL])");
    CHECK(clean_text("ftp://files.x/y and first.last+tag@sub.domain.io") == "[URL] and [EMAIL]");
    CHECK(clean_comment("ping  me@host.com\n about http://q.z") == "ping [EMAIL] about [URL]");
}

TEST_CASE("clean_text keeps code spans verbatim") {
    CHECK(clean_text("<code>requests.get(\"https://x.io\")</code>") == "requests.get(\"https://x.io\")");
    CHECK(clean_text("<p>Use   <code>a  &lt;  b</code> &amp; more</p>") == "Use a  &lt;  b & more");
    CHECK(clean_text("<pre><code>x = 1\n    y = 2\n</code></pre>") == "x = 1\n    y = 2\n");
    // Unbalanced: the remainder is code.
    const auto split = split_code_spans("a <code>b <b>c</b>");
    CHECK(split.unbalanced);
    CHECK(clean_text("a <code>b <b>c</b>") == "a b <b>c</b>");
}

TEST_CASE("clean_text decodes entities and collapses whitespace outside code") {
    CHECK(clean_text("<p>a&nbsp;&lt;b&gt;\n\n\tc&#39;s &#x41;</p>") == "a <b> c's A");
    CHECK(decode_html_entities("&unknown; &amp;") == "&unknown; &");
    CHECK(clean_text("") == "");
    CHECK(clean_text("<p>   </p>") == "");
}

TEST_CASE("extract_code joins spans with newlines") {
    CHECK(extract_code("<p><code>a</code> and <code>b</code></p>") == "a\nb");
    CHECK(extract_code("<p>no code here</p>") == "");
    CHECK(extract_code("x <code>one</code> y <code>two <code>three") == "one\ntwo <code>three");
}

TEST_CASE("property: code substrings survive cleaning exactly") {
    Rng rng(5);
    const std::string alphabet = "ab <>&;:/.@\n\t\"xyzhttps://w.io";
    auto random_text = [&](std::size_t n, bool allow_lt) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) {
            char c = alphabet[rng.below(alphabet.size())];
            if (!allow_lt && (c == '<' || c == '>' || c == '&')) {
                c = 'q';
            }
            s.push_back(c);
        }
        return s;
    };
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::string> codes;
        std::string body;
        const auto n_spans = 1 + rng.below(3);
        for (std::uint64_t k = 0; k < n_spans; ++k) {
            body += "<p>" + random_text(rng.below(20), false) + "</p>";
            std::string code = random_text(1 + rng.below(30), true);
            // A code span ends at the first "</code>"; keep that sequence out of content.
            while (code.find("</code>") != std::string::npos) {
                code = random_text(1 + rng.below(30), true);
            }
            codes.push_back(code);
            body += "<code>" + code + "</code>";
        }
        const auto cleaned = clean_text(body);
        std::size_t pos = 0;
        for (const auto& code : codes) {
            const auto at = cleaned.find(code, pos);
            REQUIRE_MESSAGE(at != std::string::npos, body);
            pos = at + code.size();
        }
        std::string joined;
        for (std::size_t k = 0; k < codes.size(); ++k) {
            joined += (k ? "\n" : "") + codes[k];
        }
        CHECK(extract_code(body) == joined);
    }
}

TEST_CASE("assemble_sample places separators and orders comments by date") {
    const auto answer = make_answer(2, "<p>A</p>");
    std::vector<CommentRecord> comments = {make_comment(11, "c2", 2000), make_comment(10, "c1", 1000)};
    auto sample = assemble_sample(answer, comments);
    REQUIRE(sample);
    CHECK(sample->text == "A <RS> c1 <RS> c2");
    CHECK(sample->n_comments == 2);
    CHECK(count_separators(sample->text) == 2);

    sample = assemble_sample(answer, std::vector<CommentRecord>{make_comment(10, "c", 5)});
    REQUIRE(sample);
    CHECK(count_separators(sample->text) == 1);

    // Ties on date fall back to id.
    std::vector<CommentRecord> tied = {make_comment(21, "second", 7), make_comment(20, "first", 7)};
    CHECK(assemble_sample(answer, tied)->text == "A <RS> first <RS> second");

    // Empty answer body still yields a sample when comments have text.
    CHECK(assemble_sample(make_answer(3, "<p> </p>"), tied)->text == " <RS> first <RS> second");
    // Literal separators in user text cannot inflate the count.
    const auto sneaky = assemble_sample(make_answer(4, "a &lt;RS&gt; b"), std::vector<CommentRecord>{make_comment(1, "x <RS> y", 1)});
    CHECK(count_separators(sneaky->text) == 1);
}

TEST_CASE("filter_answers applies score and comment floors") {
    DumpWriter d;
    d.question(1, 100, "q", "<p>q</p>", "2012-01-01T00:00:00.000");
    d.answer(2, 1, 1, "<p>keep</p>", "2012-01-02T00:00:00.000");
    d.answer(3, 1, 0, "<p>zero score</p>", "2012-01-02T00:00:00.000");
    d.answer(4, 1, 5, "<p>no comments</p>", "2012-01-02T00:00:00.000");
    d.comment(1, 1, "on question", "2012-01-03T00:00:00.000");
    d.comment(2, 2, "c", "2012-01-03T00:00:00.000");
    for (int k = 0; k < 3; ++k) {
        d.comment(10 + k, 3, "c", "2012-01-03T00:00:00.000");
    }
    const auto store = d.build();
    const auto threads = filter_answers(store);
    REQUIRE(threads.size() == 1);
    CHECK(threads[0].answer->id == 2);
    CHECK(threads[0].comments.size() == 1);
}

TEST_CASE("property: filter_answers equals brute-force scan") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto store = sotk::testing::random_dump(3000, seed).build();
        std::set<PostId> expected;
        for (const auto& p : store.posts()) {
            if (p.post_type != ingest::PostType::Answer || p.score < 1) {
                continue;
            }
            const auto n = std::count_if(store.comments().begin(), store.comments().end(),
                                         [&](const CommentRecord& c) { return c.post_id == p.id; });
            if (n >= 1) {
                expected.insert(p.id);
            }
        }
        std::set<PostId> got;
        for (const auto& t : filter_answers(store)) {
            got.insert(t.answer->id);
        }
        CHECK(got == expected);

        const auto built = build_corpus(store);
        CHECK(built.samples.size() + built.skipped_empty == expected.size());
        for (const auto& s : built.samples) {
            CHECK(count_separators(s.text) == s.n_comments);
            CHECK(s.n_comments >= 1);
        }
    }
}

TEST_CASE("corpus_stats worked example and buckets") {
    std::vector<PretrainSample> samples = {make_sample(1, 1, 10), make_sample(2, 2, 600), make_sample(3, 5, 5000)};
    const auto stats = corpus_stats(samples);
    CHECK(stats.n_samples == 3);
    CHECK(stats.n_comments_total == 8);
    CHECK(stats.comments_per_post_mean == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
    CHECK(stats.comments_per_post_median == 2.0);
    REQUIRE(stats.length_histogram.size() == 4);
    CHECK(stats.length_histogram[0].first == "0–512");
    CHECK(stats.length_histogram[1].first == "513–1024");
    CHECK(stats.length_histogram[3].first == ">2048");
    CHECK(stats.length_histogram[0].second == 1);
    CHECK(stats.length_histogram[1].second == 1);
    CHECK(stats.length_histogram[3].second == 1);

    CHECK(bucket_index(600, kDefaultBucketEdges) == 1);
    CHECK(bucket_index(512, kDefaultBucketEdges) == 0);
    CHECK(bucket_index(513, kDefaultBucketEdges) == 1);
    CHECK(bucket_index(2049, kDefaultBucketEdges) == 3);

    const auto empty = corpus_stats({});
    CHECK(empty.n_samples == 0);
    CHECK(empty.comments_per_post_mean == 0.0);
}

TEST_CASE("corpus_stats uses token lengths when a tokenizer is given") {
    bpe::BpeVocab vocab;
    std::vector<PretrainSample> samples = {make_sample(1, 1, 600)};
    const auto stats = corpus_stats(samples, &vocab);
    CHECK(stats.token_lengths);
    CHECK(stats.total_tokens == std::optional<std::uint64_t>(600));
    CHECK(stats.length_histogram[1].second == 1);
}

TEST_CASE("property: histogram partitions random corpora and median is attained") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<PretrainSample> samples;
        const auto n = rng.below(50);
        for (std::uint64_t i = 0; i < n; ++i) {
            samples.push_back(make_sample(static_cast<PostId>(i), 1 + rng.below(6), rng.below(4000)));
        }
        const auto stats = corpus_stats(samples);
        std::uint64_t total = 0;
        for (const auto& [label, count] : stats.length_histogram) {
            total += count;
        }
        CHECK(total == samples.size());
        if (!samples.empty()) {
            CHECK(std::any_of(samples.begin(), samples.end(), [&](const auto& s) {
                return static_cast<double>(s.n_comments) == stats.comments_per_post_median;
            }));
        }
    }
}

TEST_CASE("write_corpus JSON-Lines roundtrip and determinism") {
    const auto dir = temp_dir("corpus");
    std::vector<PretrainSample> samples = {make_sample(1, 1, 3), make_sample(2, 2, 4)};
    samples[0].text = "A \"quoted\" <RS> c\n";
    samples[0].char_len = samples[0].text.size();
    const auto m1 = write_corpus(samples, dir / "a.jsonl", CorpusFormat::JsonLines);
    const auto m2 = write_corpus(samples, dir / "b.jsonl", CorpusFormat::JsonLines);
    CHECK(read_file((dir / "a.jsonl").string()) == read_file((dir / "b.jsonl").string()));
    CHECK(m1.content_checksum == m2.content_checksum);
    const auto back = read_corpus_jsonl(dir / "a.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back == samples);
    CHECK(std::filesystem::exists(dir / "a.jsonl.manifest.json"));
}

TEST_CASE("token shard layout and index") {
    const std::vector<std::vector<bpe::TokenId>> seqs = {std::vector<bpe::TokenId>(10, 7),
                                                         std::vector<bpe::TokenId>(12, 9)};
    const auto shard = encode_shard(seqs, 0xabcdef);
    CHECK(shard.substr(0, 5) == "SOTK1");
    CHECK(shard.size() == 5 + 8 + (4 + 40) + (4 + 48));
    const auto index_bytes = encode_shard_index(seqs);
    ByteReader idx(index_bytes, "idx");
    CHECK(idx.get_bytes(8) == "SOTKIDX1");
    CHECK(idx.get<std::uint64_t>() == 2);
    CHECK(idx.get<std::uint64_t>() == 0);
    CHECK(idx.get<std::uint64_t>() == 10);
    CHECK(idx.get<std::uint64_t>() == 22);

    const auto dir = temp_dir("shard");
    bpe::BpeVocab vocab;
    std::vector<PretrainSample> samples = {make_sample(1, 1, 10), make_sample(2, 1, 12)};
    write_corpus(samples, dir / "s.bin", CorpusFormat::TokenShard, &vocab);
    const auto opened = TokenShard::open(dir / "s.bin");
    CHECK(opened.size() == 2);
    CHECK(opened.offsets()[0] == 0);
    CHECK(opened.offsets()[1] == 10);
    CHECK(opened.sample(1).size() == 12);
    CHECK(opened.vocab_checksum() == vocab.checksum());
    opened.require_vocab(vocab.checksum());
    bpe::BpeVocab other;
    other.add_merge('x', 'x');
    CHECK_THROWS_AS(opened.require_vocab(other.checksum()), DataError);
    CHECK_THROWS_AS(write_corpus(samples, dir / "t.bin", CorpusFormat::TokenShard, nullptr), InvalidArgument);
}
