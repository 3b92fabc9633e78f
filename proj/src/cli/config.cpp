#include "sotk/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace sotk::cli {

namespace {

constexpr std::int64_t kMaxInt = std::numeric_limits<std::int64_t>::max();

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) {
            out.emplace_back(item);
        }
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    text = trim(text);
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end && !text.empty();
}

template <class T>
std::string number_text(T v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const std::string& expected) {
    throw UsageError("invalid value '" + std::string(value) + "' for " + std::string(key) + ": expected " + expected);
}

// Applies `value` to the field named `key`.
struct Setter {
    std::string_view key;
    std::string_view value;
    bool found = false;

    bool match(std::string_view k) {
        if (k != key) {
            return false;
        }
        found = true;
        return true;
    }
    void text(std::string_view k, std::string& field) {
        if (match(k)) {
            field = std::string(trim(value));
        }
    }
    void integer(std::string_view k, std::int64_t& field, std::int64_t lo, std::int64_t hi) {
        if (!match(k)) {
            return;
        }
        std::int64_t v = 0;
        if (!parse_number(value, v) || v < lo || v > hi) {
            bad_value(k, value, "an integer in [" + std::to_string(lo) + ", " +
                                    (hi == kMaxInt ? std::string("inf") : std::to_string(hi)) + "]");
        }
        field = v;
    }
    void unsigned_integer(std::string_view k, std::uint64_t& field) {
        if (match(k) && !parse_number(value, field)) {
            bad_value(k, value, "a non-negative integer");
        }
    }
    void real(std::string_view k, double& field, const std::function<bool(double)>& ok, const std::string& range) {
        if (!match(k)) {
            return;
        }
        double v = 0.0;
        if (!parse_number(value, v) || !ok(v)) {
            bad_value(k, value, "a number " + range);
        }
        field = v;
    }
    void boolean(std::string_view k, bool& field) {
        if (!match(k)) {
            return;
        }
        const auto v = trim(value);
        if (v == "true" || v == "1" || v == "yes") {
            field = true;
        } else if (v == "false" || v == "0" || v == "no") {
            field = false;
        } else {
            bad_value(k, value, "true or false");
        }
    }
    void int_list(std::string_view k, std::vector<std::int64_t>& field) {
        if (!match(k)) {
            return;
        }
        std::vector<std::int64_t> out;
        for (const auto& item : split_list(value)) {
            std::int64_t v = 0;
            if (!parse_number(item, v) || v <= 0 || (!out.empty() && v <= out.back())) {
                bad_value(k, value, "a comma-separated, strictly increasing list of positive integers");
            }
            out.push_back(v);
        }
        if (out.empty()) {
            bad_value(k, value, "at least one value");
        }
        field = std::move(out);
    }
    void text_list(std::string_view k, std::vector<std::string>& field) {
        if (!match(k)) {
            return;
        }
        auto out = split_list(value);
        if (out.empty()) {
            bad_value(k, value, "at least one comma-separated entry");
        }
        field = std::move(out);
    }
    void choice(std::string_view k, std::string& field, std::initializer_list<std::string_view> options) {
        if (!match(k)) {
            return;
        }
        const auto v = trim(value);
        std::string expected;
        for (const auto o : options) {
            if (o == v) {
                field = std::string(v);
                return;
            }
            expected += (expected.empty() ? "" : " | ") + std::string(o);
        }
        bad_value(k, value, expected);
    }
};

// Collects the text form of every field.
struct Getter {
    std::vector<std::pair<std::string, std::string>> out;

    void text(std::string_view k, const std::string& f) { out.emplace_back(k, f); }
    void integer(std::string_view k, std::int64_t f, std::int64_t, std::int64_t) { out.emplace_back(k, number_text(f)); }
    void unsigned_integer(std::string_view k, std::uint64_t f) { out.emplace_back(k, number_text(f)); }
    void real(std::string_view k, double f, const std::function<bool(double)>&, const std::string&) {
        out.emplace_back(k, number_text(f));
    }
    void boolean(std::string_view k, bool f) { out.emplace_back(k, f ? "true" : "false"); }
    void int_list(std::string_view k, const std::vector<std::int64_t>& f) {
        std::string s;
        for (const auto v : f) {
            s += (s.empty() ? "" : ",") + number_text(v);
        }
        out.emplace_back(k, s);
    }
    void text_list(std::string_view k, const std::vector<std::string>& f) {
        std::string s;
        for (const auto& v : f) {
            s += (s.empty() ? "" : ",") + v;
        }
        out.emplace_back(k, s);
    }
    void choice(std::string_view k, const std::string& f, std::initializer_list<std::string_view>) {
        out.emplace_back(k, f);
    }
};

template <class C, class V>
void visit(C& c, V& v) {
    const auto positive = [](double x) { return x > 0.0; };
    const auto non_negative = [](double x) { return x >= 0.0; };

    v.text("paths.posts", c.paths.posts);
    v.text("paths.comments", c.paths.comments);
    v.text("paths.history", c.paths.history);
    v.text("paths.store", c.paths.store);
    v.text("paths.corpus", c.paths.corpus);
    v.text("paths.vocab", c.paths.vocab);
    v.text("paths.shard", c.paths.shard);
    v.text("paths.checkpoint", c.paths.checkpoint);
    v.text("paths.loss_csv", c.paths.loss_csv);
    v.text("paths.candidates", c.paths.candidates);
    v.text("paths.sample", c.paths.sample);
    v.text("paths.train_data", c.paths.train_data);
    v.text("paths.eval_data", c.paths.eval_data);
    v.text("paths.predictions", c.paths.predictions);
    v.text("paths.annotations", c.paths.annotations);

    v.integer("filter.min_score", c.filter.min_score, -kMaxInt, kMaxInt);
    v.integer("filter.min_comments", c.filter.min_comments, 0, kMaxInt);

    v.integer("tokenizer.vocab_size", c.tokenizer.vocab_size, 262, 1 << 24);
    v.real("tokenizer.sample_fraction", c.tokenizer.sample_fraction, [](double x) { return x > 0.0 && x <= 1.0; },
           "in (0, 1]");
    v.integer("tokenizer.threads", c.tokenizer.threads, 1, 256);
    v.boolean("tokenizer.digits", c.tokenizer.digits);

    v.integer("sequence.max_len", c.sequence.max_len, 1, 1 << 20);
    v.int_list("sequence.bucket_edges", c.sequence.bucket_edges);

    v.integer("batch.target_tokens", c.batch.target_tokens, 1, kMaxInt);
    v.integer("batch.micro_batch", c.batch.micro_batch, 1, 1 << 20);
    v.integer("batch.seq_len", c.batch.seq_len, 1, 1 << 20);
    v.real("batch.lr", c.batch.lr, non_negative, ">= 0");
    v.real("batch.momentum", c.batch.momentum, [](double x) { return x >= 0.0 && x < 1.0; }, "in [0, 1)");
    v.integer("batch.warmup", c.batch.warmup, 0, kMaxInt);
    v.real("batch.clip", c.batch.clip, non_negative, ">= 0");
    v.integer("batch.steps", c.batch.steps, 1, kMaxInt);

    v.integer("model.layers", c.model.layers, 0, 256);
    v.integer("model.hidden", c.model.hidden, 1, 1 << 16);
    v.integer("model.heads", c.model.heads, 1, 1 << 10);
    v.integer("model.ffn_mult", c.model.ffn_mult, 1, 64);
    v.integer("model.max_positions", c.model.max_positions, 1, 1 << 20);
    v.integer("model.vocab_size", c.model.vocab_size, 0, 1 << 24);
    v.boolean("model.tied", c.model.tied);
    v.real("model.init_std", c.model.init_std, positive, "> 0");

    v.integer("miner.levenshtein_min", c.miner.levenshtein_min, 0, kMaxInt);
    v.real("miner.late_years", c.miner.late_years, positive, "> 0");
    v.integer("miner.late_min_score", c.miner.late_min_score, -kMaxInt, kMaxInt);
    v.integer("miner.keyword_min_score", c.miner.keyword_min_score, -kMaxInt, kMaxInt);
    v.integer("miner.edited_min_score", c.miner.edited_min_score, -kMaxInt, kMaxInt);
    v.text_list("miner.keywords", c.miner.keywords);
    v.text_list("miner.reference_phrases", c.miner.reference_phrases);

    v.integer("annotation.n", c.annotation.n, 1, kMaxInt);

    v.choice("finetune.kind", c.finetune.kind, {"sequence", "token"});
    v.choice("finetune.pooling", c.finetune.pooling, {"cls", "mean"});
    v.integer("finetune.n_classes", c.finetune.n_classes, 2, 1 << 16);
    v.integer("finetune.batch_size", c.finetune.batch_size, 1, 1 << 20);
    v.real("finetune.lr", c.finetune.lr, non_negative, ">= 0");
    v.real("finetune.momentum", c.finetune.momentum, [](double x) { return x >= 0.0 && x < 1.0; }, "in [0, 1)");
    v.integer("finetune.epochs", c.finetune.epochs, 1, 1 << 20);
    v.integer("finetune.warmup", c.finetune.warmup, 0, kMaxInt);

    v.choice("metrics.mode", c.metrics.mode, {"inverse-frequency", "balanced", "uniform"});

    v.integer("plan.layers", c.plan.layers, 0, 1 << 10);
    v.integer("plan.hidden", c.plan.hidden, 2, 1 << 20);
    v.integer("plan.vocab_size", c.plan.vocab_size, 1, 1 << 24);
    v.integer("plan.max_positions", c.plan.max_positions, 1, 1 << 24);
    v.boolean("plan.tied", c.plan.tied);
    v.real("plan.gpu_hours", c.plan.gpu_hours, non_negative, ">= 0");
    v.real("plan.rate_per_hour", c.plan.rate_per_hour, positive, "> 0");
    v.real("plan.perf_ratio", c.plan.perf_ratio, positive, "> 0");
    v.real("plan.tokens_per_hour", c.plan.tokens_per_hour, non_negative, ">= 0");
    v.integer("plan.batch_tokens", c.plan.batch_tokens, 1, kMaxInt);

    v.unsigned_integer("run.seed", c.run.seed);
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
    Setter s{key, value};
    visit(*this, s);
    if (!s.found) {
        throw UsageError("unknown configuration key '" + std::string(key) + "'");
    }
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
    Getter g;
    visit(*this, g);
    return std::move(g.out);
}

std::string PipelineConfig::to_ini() const {
    std::string out;
    std::string section;
    for (const auto& [key, value] : entries()) {
        const auto dot = key.find('.');
        if (key.substr(0, dot) != section) {
            section = key.substr(0, dot);
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

PipelineConfig parse_config(std::string_view text, const std::string& origin) {
    PipelineConfig config;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') {
            continue;
        }
        const auto where = origin + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw UsageError(where + "unterminated section header");
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError(where + "expected 'key = value'");
        }
        if (section.empty()) {
            throw UsageError(where + "key outside of a [section]");
        }
        const auto key = section + "." + std::string(trim(line.substr(0, eq)));
        try {
            config.set(key, trim(line.substr(eq + 1)));
        } catch (const UsageError& e) {
            throw UsageError(where + e.what());
        }
    }
    return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UsageError("cannot read config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

}  // namespace sotk::cli
