#include "sotk/miner/miner.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

#include "sotk/common/error.hpp"
#include "sotk/common/rng.hpp"
#include "sotk/corpus/clean.hpp"

namespace sotk::miner {

namespace {

constexpr std::array<std::string_view, kHeuristicCount> kHeuristicNames{"keyword-comment", "edited-after-comment",
                                                                        "late-answer"};

char lower(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

std::optional<std::string> first_keyword(std::string_view text, const std::vector<std::string>& keywords) {
    for (const auto& k : keywords) {
        if (contains_whole_phrase(text, k)) {
            return k;
        }
    }
    return std::nullopt;
}

// Answers whose parent question is present, by ascending id.
std::vector<std::pair<const ingest::PostRecord*, const ingest::PostRecord*>> answers_with_question(
    const ingest::RecordStore& store) {
    std::vector<std::pair<const ingest::PostRecord*, const ingest::PostRecord*>> out;
    for (const auto& p : store.posts()) {
        if (p.post_type != ingest::PostType::Answer || !p.parent_id) {
            continue;
        }
        const auto* q = store.find_post(*p.parent_id);
        if (q != nullptr && q->post_type == ingest::PostType::Question) {
            out.emplace_back(&p, q);
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first->id < y.first->id; });
    return out;
}

ObsoleteCandidate make_candidate(const ingest::PostRecord& answer, const ingest::PostRecord& question, Heuristic h,
                                 std::string evidence) {
    return {answer.id, question.id, h, std::move(evidence), corpus::clean_text(answer.body), answer.score};
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return in;
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) {
        std::swap(a, b);
    }
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string_view heuristic_name(Heuristic h) {
    return kHeuristicNames[static_cast<std::size_t>(h)];
}

Heuristic parse_heuristic(std::string_view name) {
    for (std::size_t i = 0; i < kHeuristicCount; ++i) {
        if (kHeuristicNames[i] == name) {
            return static_cast<Heuristic>(i);
        }
    }
    throw DataError("unknown heuristic '" + std::string(name) + "'");
}

bool contains_phrase(std::string_view text, std::string_view phrase) {
    return to_lower(text).find(to_lower(phrase)) != std::string::npos;
}

bool contains_whole_phrase(std::string_view text, std::string_view phrase) {
    if (phrase.empty()) {
        return false;
    }
    const auto hay = to_lower(text);
    const auto needle = to_lower(phrase);
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
        const bool left = pos == 0 || !word_char(hay[pos - 1]);
        const std::size_t end = pos + needle.size();
        const bool right = end == hay.size() || !word_char(hay[end]);
        if (left && right) {
            return true;
        }
    }
    return false;
}

std::vector<ObsoleteCandidate> mine_keyword_comments(const ingest::RecordStore& store, const MinerConfig& config) {
    std::vector<ObsoleteCandidate> out;
    for (const auto& [answer, question] : answers_with_question(store)) {
        if (answer->score < config.keyword_min_score) {
            continue;
        }
        const auto q_text = question->title.value_or("") + "\n" + corpus::clean_text(question->body);
        if (first_keyword(q_text, config.keywords)) {
            continue;
        }
        for (const auto& c : store.comments_on(answer->id)) {
            auto text = corpus::clean_comment(c.text);
            if (first_keyword(text, config.keywords)) {
                out.push_back(make_candidate(*answer, *question, Heuristic::KeywordComment, std::move(text)));
                break;
            }
        }
    }
    return out;
}

std::vector<ObsoleteCandidate> mine_edited_after_comment(const ingest::RecordStore& store, const IdSet& exclusions,
                                                         const MinerConfig& config, std::vector<PostId>* skipped) {
    std::vector<ObsoleteCandidate> out;
    for (const auto& [answer, question] : answers_with_question(store)) {
        if (answer->score < config.edited_min_score || exclusions.contains(answer->id)) {
            continue;
        }
        const auto comments = store.comments_on(answer->id);
        if (comments.empty()) {
            continue;
        }
        const ingest::PostHistoryRecord* initial = nullptr;
        const ingest::PostHistoryRecord* earliest = nullptr;
        const ingest::PostHistoryRecord* latest_edit = nullptr;
        for (const auto& r : store.history_of(answer->id)) {
            if (r.history_type == ingest::HistoryType::OtherKind) {
                continue;
            }
            if (earliest == nullptr) {
                earliest = &r;
            }
            if (r.history_type == ingest::HistoryType::InitialBody && initial == nullptr) {
                initial = &r;
            }
            if (r.history_type == ingest::HistoryType::EditBody) {
                latest_edit = &r;
            }
        }
        if (latest_edit == nullptr) {
            if (answer->last_edit_date && skipped != nullptr) {
                skipped->push_back(answer->id);
            }
            continue;
        }
        // Comments are date-ordered, so the first is the earliest.
        if (!(latest_edit->creation_date > comments.front().creation_date)) {
            continue;
        }
        const auto* before = initial != nullptr ? initial : earliest;
        const auto distance =
            levenshtein(corpus::extract_code(before->text), corpus::extract_code(latest_edit->text));
        if (distance >= config.min_code_distance) {
            out.push_back(
                make_candidate(*answer, *question, Heuristic::EditedAfterComment, std::to_string(distance)));
        }
    }
    return out;
}

std::vector<ObsoleteCandidate> mine_late_answers(const ingest::RecordStore& store, const IdSet& exclusions,
                                                 const MinerConfig& config) {
    std::vector<ObsoleteCandidate> out;
    for (const auto& [answer, question] : answers_with_question(store)) {
        if (answer->score < config.late_min_score || exclusions.contains(answer->id)) {
            continue;
        }
        if (answer->creation_date.ms_since_epoch - question->creation_date.ms_since_epoch < config.late_after_ms) {
            continue;
        }
        auto candidate = make_candidate(*answer, *question, Heuristic::LateAnswer, "");
        for (const auto& phrase : config.reference_phrases) {
            if (contains_phrase(candidate.answer_text, phrase)) {
                candidate.evidence = phrase;
                out.push_back(std::move(candidate));
                break;
            }
        }
    }
    return out;
}

MiningResult mine_all(const ingest::RecordStore& store, const MinerConfig& config) {
    MiningResult result;
    auto keyword = mine_keyword_comments(store, config);
    IdSet taken;
    for (const auto& c : keyword) {
        taken.insert(c.answer_id);
    }
    auto edited = mine_edited_after_comment(store, taken, config, &result.skipped_missing_history);
    for (const auto& c : edited) {
        taken.insert(c.answer_id);
    }
    auto late = mine_late_answers(store, taken, config);
    result.counts = {keyword.size(), edited.size(), late.size()};
    for (auto* part : {&keyword, &edited, &late}) {
        std::move(part->begin(), part->end(), std::back_inserter(result.candidates));
    }
    return result;
}

std::string MiningResult::report_json() const {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < kHeuristicCount; ++i) {
        j["counts"][std::string(kHeuristicNames[i])] = counts[i];
    }
    j["total"] = candidates.size();
    j["skipped_missing_history"] = skipped_missing_history;
    return j.dump();
}

AnnotationSample sample_for_annotation(std::span<const ObsoleteCandidate> candidates, std::size_t n,
                                       std::uint64_t seed) {
    if (candidates.empty()) {
        throw DataError("no candidates to sample from");
    }
    AnnotationSample sample;
    sample.per_heuristic = n / kHeuristicCount;
    Rng rng(seed);
    for (std::size_t h = 0; h < kHeuristicCount; ++h) {
        std::vector<const ObsoleteCandidate*> pool;
        for (const auto& c : candidates) {
            if (static_cast<std::size_t>(c.heuristic) == h) {
                pool.push_back(&c);
            }
        }
        std::sort(pool.begin(), pool.end(), [](auto* x, auto* y) { return x->answer_id < y->answer_id; });
        pool.erase(std::unique(pool.begin(), pool.end(), [](auto* x, auto* y) { return x->answer_id == y->answer_id; }),
                   pool.end());
        const std::size_t take = std::min(sample.per_heuristic, pool.size());
        sample.shortfall[h] = sample.per_heuristic - take;
        // Partial Fisher-Yates: the first `take` slots are a uniform draw.
        for (std::size_t i = 0; i < take; ++i) {
            std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
            sample.items.push_back(*pool[i]);
        }
    }
    return sample;
}

std::string AnnotationSample::report() const {
    nlohmann::ordered_json j;
    j["per_heuristic"] = per_heuristic;
    j["drawn"] = items.size();
    for (std::size_t i = 0; i < kHeuristicCount; ++i) {
        j["shortfall"][std::string(kHeuristicNames[i])] = shortfall[i];
    }
    return j.dump();
}

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) {
        throw DataError("kappa: label vectors differ in length (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
    }
    if (a.empty()) {
        throw DataError("kappa: no items");
    }
    std::map<int, std::pair<std::size_t, std::size_t>> marginals;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++marginals[a[i]].first;
        ++marginals[b[i]].second;
        agree += a[i] == b[i];
    }
    const auto n = static_cast<double>(a.size());
    double pe = 0.0;
    for (const auto& [label, m] : marginals) {
        pe += (static_cast<double>(m.first) / n) * (static_cast<double>(m.second) / n);
    }
    if (pe >= 1.0) {
        throw DataError("kappa is undefined: chance agreement is 1 (both annotators use one identical label)");
    }
    const double po = static_cast<double>(agree) / n;
    return (po - pe) / (1.0 - pe);
}

std::string_view label_name(Label l) {
    return l == Label::Obsolete ? "obsolete" : "not_obsolete";
}

Label parse_label(std::string_view name) {
    if (name == "obsolete") {
        return Label::Obsolete;
    }
    if (name == "not_obsolete") {
        return Label::NotObsolete;
    }
    throw DataError("invalid label '" + std::string(name) + "' (expected obsolete or not_obsolete)");
}

void export_candidates(std::span<const ObsoleteCandidate> candidates, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& c : candidates) {
        nlohmann::ordered_json j;
        j["id"] = c.answer_id;
        j["question_id"] = c.question_id;
        j["heuristic"] = heuristic_name(c.heuristic);
        j["evidence"] = c.evidence;
        j["answer_text"] = c.answer_text;
        j["score"] = c.score;
        out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    }
}

std::vector<ObsoleteCandidate> read_candidates(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<ObsoleteCandidate> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            out.push_back({j.at("id").get<PostId>(), j.at("question_id").get<PostId>(),
                           parse_heuristic(j.at("heuristic").get<std::string>()), j.at("evidence").get<std::string>(),
                           j.at("answer_text").get<std::string>(), j.at("score").get<std::int64_t>()});
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_annotations(std::span<const AnnotationRecord> records, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "candidate_id\tlabel\tannotator\n";
    for (const auto& r : records) {
        out << r.candidate_id << '\t' << label_name(r.label) << '\t' << r.annotator << '\n';
    }
}

std::vector<AnnotationRecord> import_annotations(const std::filesystem::path& path, const IdSet* known_ids) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line != "candidate_id\tlabel\tannotator") {
        throw DataError(path.string() + ": expected header 'candidate_id<TAB>label<TAB>annotator'");
    }
    std::vector<AnnotationRecord> out;
    std::set<std::pair<PostId, std::string>> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
            throw DataError(where + "expected 3 tab-separated fields");
        }
        AnnotationRecord r;
        const auto id_text = line.substr(0, t1);
        std::size_t used = 0;
        try {
            r.candidate_id = std::stoll(id_text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != id_text.size()) {
            throw DataError(where + "invalid candidate id '" + id_text + "'");
        }
        try {
            r.label = parse_label(line.substr(t1 + 1, t2 - t1 - 1));
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        r.annotator = line.substr(t2 + 1);
        if (r.annotator.empty()) {
            throw DataError(where + "empty annotator");
        }
        if (known_ids != nullptr && !known_ids->contains(r.candidate_id)) {
            throw DataError(where + "unknown candidate id " + id_text);
        }
        if (!seen.emplace(r.candidate_id, r.annotator).second) {
            throw DataError(where + "candidate " + id_text + " labeled twice by " + r.annotator);
        }
        out.push_back(std::move(r));
    }
    return out;
}

PairedLabels pair_annotations(std::span<const AnnotationRecord> records, std::string_view annotator_a,
                              std::string_view annotator_b) {
    std::map<PostId, std::pair<std::optional<Label>, std::optional<Label>>> by_id;
    for (const auto& r : records) {
        if (r.annotator == annotator_a) {
            by_id[r.candidate_id].first = r.label;
        } else if (r.annotator == annotator_b) {
            by_id[r.candidate_id].second = r.label;
        }
    }
    PairedLabels out;
    for (const auto& [id, labels] : by_id) {
        if (labels.first && labels.second) {
            out.ids.push_back(id);
            out.a.push_back(static_cast<int>(*labels.first));
            out.b.push_back(static_cast<int>(*labels.second));
        }
    }
    return out;
}

}  // namespace sotk::miner
