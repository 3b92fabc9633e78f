#include "sotk/cli/app.hpp"

#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "sotk/bpe/trainer.hpp"
#include "sotk/corpus/sample.hpp"
#include "sotk/corpus/stats.hpp"
#include "sotk/corpus/writer.hpp"
#include "sotk/ingest/record_store.hpp"
#include "sotk/metrics/metrics.hpp"
#include "sotk/miner/miner.hpp"
#include "sotk/mlm/classifier.hpp"
#include "sotk/mlm/train.hpp"
#include "sotk/planner/planner.hpp"

namespace sotk::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// A subcommand flag that writes through to a configuration key.
struct Binding {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
};

class Bindings {
public:
    void option(CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        auto& b = items_.emplace_back(Binding{key, {}, nullptr});
        b.option = sub->add_option(flag, b.value, help + " [" + key + "]");
    }
    void flag(CLI::App* sub, const std::string& flag, const std::string& key, const std::string& value,
              const std::string& help) {
        auto& b = items_.emplace_back(Binding{key, value, nullptr});
        b.option = sub->add_flag(flag)->description(help + " [" + key + "=" + value + "]");
    }
    void apply(PipelineConfig& config) const {
        for (const auto& b : items_) {
            if (b.option->count() > 0) {
                config.set(b.key, b.value);
            }
        }
    }

private:
    std::deque<Binding> items_;
};

const std::string& require(const std::string& value, const std::string& key) {
    if (value.empty()) {
        throw UsageError("missing required key " + key);
    }
    return value;
}

fs::path require_file(const std::string& value, const std::string& key) {
    const fs::path path = require(value, key);
    if (!fs::exists(path)) {
        throw UsageError("input for " + key + " does not exist: " + path.string());
    }
    return path;
}

fs::path output_path(const std::string& value, const std::string& key) {
    const fs::path path = require(value, key);
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    return path;
}

ordered_json summary(const std::string& command, const PipelineConfig& config) {
    ordered_json j;
    j["command"] = command;
    j["seed"] = config.run.seed;
    return j;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") != std::string::npos) {
            lines.push_back(std::move(line));
        }
    }
    return lines;
}

json parse_line(const std::string& line, const fs::path& path, std::size_t n) {
    try {
        auto j = json::parse(line);
        if (!j.is_object()) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": expected a JSON object");
        }
        return j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
}

std::vector<std::size_t> bucket_edges(const PipelineConfig& config) {
    return {config.sequence.bucket_edges.begin(), config.sequence.bucket_edges.end()};
}

int cmd_ingest(const PipelineConfig& c, std::ostream& out) {
    const auto posts_path = require_file(c.paths.posts, "paths.posts");
    const auto store_dir = output_path(c.paths.store, "paths.store");
    std::ifstream posts(posts_path, std::ios::binary);
    std::ifstream comments;
    std::ifstream history;
    ingest::DumpSources sources{&posts, nullptr, nullptr};
    if (!c.paths.comments.empty()) {
        comments.open(require_file(c.paths.comments, "paths.comments"), std::ios::binary);
        sources.comments = &comments;
    }
    if (!c.paths.history.empty()) {
        history.open(require_file(c.paths.history, "paths.history"), std::ios::binary);
        sources.history = &history;
    }
    const auto store = ingest::build_store(sources, store_dir);
    const auto& report = store.report();
    auto j = summary("ingest", c);
    j["store"] = store_dir.string();
    for (const auto table : {ingest::TableKind::Posts, ingest::TableKind::Comments, ingest::TableKind::PostHistory}) {
        const auto i = static_cast<std::size_t>(table);
        j["tables"][std::string(ingest::table_name(table))] = {{"rows_read", report.rows_read[i]},
                                                               {"rows_loaded", report.rows_loaded[i]},
                                                               {"rows_skipped", report.skipped_in(table)}};
    }
    j["dangling_comments"] = report.dangling_comment_ids.size();
    j["dangling_history"] = report.dangling_history_ids.size();
    j["orphan_answers"] = report.orphan_answer_ids.size();
    out << j.dump() << '\n';
    return kExitOk;
}

int cmd_build_corpus(const PipelineConfig& c, std::ostream& out) {
    const auto store = ingest::RecordStore::load(require_file(c.paths.store, "paths.store"));
    const auto corpus_path = output_path(c.paths.corpus, "paths.corpus");
    const corpus::FilterOptions filter{c.filter.min_score, static_cast<std::size_t>(c.filter.min_comments)};
    const auto built = corpus::build_corpus(store, filter);
    const corpus::WriteOptions options{built.skipped_empty, c.run.seed};
    auto j = summary("build-corpus", c);
    j["corpus"] = corpus_path.string();
    j["manifest"] = ordered_json::parse(
        corpus::write_corpus(built.samples, corpus_path, corpus::CorpusFormat::JsonLines, nullptr, options).to_json());
    if (!c.paths.shard.empty()) {
        const auto vocab = bpe::BpeVocab::load(require_file(c.paths.vocab, "paths.vocab"));
        const auto shard_path = output_path(c.paths.shard, "paths.shard");
        j["shard"] = shard_path.string();
        j["shard_manifest"] = ordered_json::parse(
            corpus::write_corpus(built.samples, shard_path, corpus::CorpusFormat::TokenShard, &vocab, options)
                .to_json());
    }
    out << j.dump() << '\n';
    return kExitOk;
}

int cmd_train_tokenizer(const PipelineConfig& c, std::ostream& out) {
    const auto samples = corpus::read_corpus_jsonl(require_file(c.paths.corpus, "paths.corpus"));
    const auto vocab_path = output_path(c.paths.vocab, "paths.vocab");
    std::vector<std::string> texts;
    texts.reserve(samples.size());
    for (const auto& s : samples) {
        texts.push_back(s.text);
    }
    bpe::TrainOptions options;
    options.vocab_size = static_cast<std::size_t>(c.tokenizer.vocab_size);
    options.sample_fraction = c.tokenizer.sample_fraction;
    options.seed = c.run.seed;
    options.threads = static_cast<unsigned>(c.tokenizer.threads);
    options.pre_split = c.tokenizer.digits ? bpe::PreSplit::Digits : bpe::PreSplit::None;
    const auto vocab = bpe::train_bpe(texts, options);
    vocab.save(vocab_path);
    auto j = summary("train-tokenizer", c);
    j["vocab"] = vocab_path.string();
    j["vocab_size"] = vocab.vocab_size();
    j["merges"] = vocab.merges().size();
    j["requested_vocab_size"] = options.vocab_size;
    j["checksum"] = vocab.checksum();
    out << j.dump() << '\n';
    return kExitOk;
}

int cmd_stats(const PipelineConfig& c, std::ostream& out) {
    const auto samples = corpus::read_corpus_jsonl(require_file(c.paths.corpus, "paths.corpus"));
    std::optional<bpe::BpeVocab> vocab;
    if (!c.paths.vocab.empty()) {
        vocab = bpe::BpeVocab::load(require_file(c.paths.vocab, "paths.vocab"));
    }
    const auto edges = bucket_edges(c);
    const auto stats = corpus::corpus_stats(samples, vocab ? &*vocab : nullptr, edges);
    auto j = summary("stats", c);
    j["n_samples"] = stats.n_samples;
    j["n_comments_total"] = stats.n_comments_total;
    j["comments_per_post_mean"] = stats.comments_per_post_mean;
    j["comments_per_post_median"] = stats.comments_per_post_median;
    j["length_unit"] = stats.token_lengths ? "tokens" : "chars";
    if (stats.total_tokens) {
        j["total_tokens"] = *stats.total_tokens;
    }
    ordered_json histogram = ordered_json::array();
    for (const auto& [label, count] : stats.length_histogram) {
        histogram.push_back({{"bucket", label}, {"count", count}});
    }
    j["length_histogram"] = histogram;
    out << j.dump() << '\n';
    return kExitOk;
}

int cmd_plan(const PipelineConfig& c, std::ostream& out) {
    planner::ModelShape shape;
    shape.n_layers = static_cast<std::uint64_t>(c.plan.layers);
    shape.hidden = static_cast<std::uint64_t>(c.plan.hidden);
    shape.vocab_size = static_cast<std::uint64_t>(c.plan.vocab_size);
    shape.max_positions = static_cast<std::uint64_t>(c.plan.max_positions);
    shape.head_tied = c.plan.tied;
    const auto params = planner::estimate_params(shape);
    auto j = summary("plan", c);
    j["shape"] = ordered_json::parse(shape.to_json());
    j["params"] = params;
    j["min_tokens"] = planner::min_tokens(params);
    if (c.plan.gpu_hours > 0.0) {
        j["gpu_hours"] = c.plan.gpu_hours;
        j["dollars"] = planner::estimate_cost(c.plan.gpu_hours, c.plan.rate_per_hour, c.plan.perf_ratio);
    }
    if (c.plan.tokens_per_hour > 0.0) {
        j["hours_for_min_tokens"] = static_cast<double>(planner::min_tokens(params)) / c.plan.tokens_per_hour;
        if (c.plan.gpu_hours > 0.0) {
            const std::vector<planner::Candidate> candidates{{shape, c.plan.tokens_per_hour}};
            const auto plan = planner::plan_budget(c.plan.gpu_hours, candidates,
                                                   {c.plan.rate_per_hour, c.plan.perf_ratio},
                                                   static_cast<std::uint64_t>(c.plan.batch_tokens));
            j["fits_budget"] = plan.has_value();
            if (plan) {
                j["plan"] = ordered_json::parse(plan->to_json());
            }
        }
    }
    out << j.dump() << '\n';
    return kExitOk;
}

mlm::EncoderConfig encoder_config(const PipelineConfig& c, std::size_t vocab_size) {
    mlm::EncoderConfig e;
    e.n_layers = static_cast<std::size_t>(c.model.layers);
    e.hidden = static_cast<std::size_t>(c.model.hidden);
    e.n_heads = static_cast<std::size_t>(c.model.heads);
    e.ffn_mult = static_cast<std::size_t>(c.model.ffn_mult);
    e.max_positions = static_cast<std::size_t>(c.model.max_positions);
    e.vocab_size = c.model.vocab_size > 0 ? static_cast<std::size_t>(c.model.vocab_size) : vocab_size;
    e.tied_head = c.model.tied;
    e.init_std = c.model.init_std;
    e.seed = c.run.seed;
    return e;
}

int cmd_pretrain(const PipelineConfig& c, std::ostream& out) {
    const auto shard = corpus::TokenShard::open(require_file(c.paths.shard, "paths.shard"));
    const auto vocab = bpe::BpeVocab::load(require_file(c.paths.vocab, "paths.vocab"));
    const auto checkpoint = output_path(c.paths.checkpoint, "paths.checkpoint");
    const auto config = encoder_config(c, vocab.vocab_size());
    mlm::EncoderModel<float> model(config);
    const auto plan = mlm::plan_batches(static_cast<std::uint64_t>(c.batch.target_tokens),
                                        static_cast<std::size_t>(c.batch.micro_batch),
                                        static_cast<std::size_t>(c.batch.seq_len), config.max_positions);
    mlm::PretrainConfig pretrain;
    pretrain.steps = static_cast<std::size_t>(c.batch.steps);
    pretrain.optimizer = {c.batch.lr, c.batch.momentum, static_cast<std::size_t>(c.batch.warmup), c.batch.clip};
    pretrain.masking.vocab_size = config.vocab_size;
    pretrain.seed = c.run.seed;
    pretrain.vocab_checksum = vocab.checksum();
    const auto trace = mlm::train_mlm(model, shard, plan, pretrain);
    mlm::save_checkpoint(model, checkpoint);
    auto j = summary("pretrain", c);
    j["checkpoint"] = checkpoint.string();
    j["model"] = ordered_json::parse(config.to_json());
    j["params"] = model.parameter_count();
    j["micro_batch"] = plan.micro_batch_seqs;
    j["seq_len"] = plan.seq_len;
    j["accumulation_steps"] = plan.accumulation_steps;
    j["effective_tokens"] = plan.effective_tokens;
    j["steps"] = trace.size();
    j["initial_loss"] = trace.front();
    j["final_loss"] = trace.back();
    if (!c.paths.loss_csv.empty()) {
        const auto csv = output_path(c.paths.loss_csv, "paths.loss_csv");
        mlm::write_loss_csv(trace, csv);
        j["loss_csv"] = csv.string();
    }
    out << j.dump() << '\n';
    return kExitOk;
}

std::vector<mlm::LabeledExample> read_labeled(const fs::path& path, mlm::HeadKind kind, mlm::Pooling pooling,
                                              const bpe::BpeVocab* vocab, std::size_t max_len) {
    std::vector<mlm::LabeledExample> examples;
    const auto lines = read_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const auto j = parse_line(lines[n], path, n + 1);
        const auto where = path.string() + ":" + std::to_string(n + 1) + ": ";
        mlm::LabeledExample ex;
        try {
            if (j.contains("ids")) {
                ex.ids = j.at("ids").get<std::vector<mlm::TokenId>>();
            } else if (j.contains("text")) {
                if (kind == mlm::HeadKind::Token) {
                    throw DataError(where + "token tasks need explicit \"ids\"");
                }
                if (vocab == nullptr) {
                    throw UsageError("missing required key paths.vocab (data contains \"text\")");
                }
                if (pooling == mlm::Pooling::Cls) {
                    ex.ids.push_back(mlm::kClsId);
                }
                const auto encoded = vocab->encode(j.at("text").get<std::string>());
                ex.ids.insert(ex.ids.end(), encoded.begin(), encoded.end());
            } else {
                throw DataError(where + "expected \"ids\" or \"text\"");
            }
            if (kind == mlm::HeadKind::Sequence) {
                ex.labels = {j.at("label").get<int>()};
            } else {
                ex.labels = j.at("labels").get<std::vector<int>>();
            }
        } catch (const json::exception& e) {
            throw DataError(where + e.what());
        }
        if (ex.ids.size() > max_len) {
            ex.ids.resize(max_len);
            if (kind == mlm::HeadKind::Token && ex.labels.size() > max_len) {
                ex.labels.resize(max_len);
            }
        }
        examples.push_back(std::move(ex));
    }
    if (examples.empty()) {
        throw DataError(path.string() + ": no examples");
    }
    return examples;
}

struct FlatLabels {
    std::vector<int> y_true;
    std::vector<int> y_pred;
};

void append_labels(FlatLabels& flat, std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw DataError("y_true and y_pred differ in length");
    }
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] != mlm::kIgnoreLabel) {
            flat.y_true.push_back(y_true[i]);
            flat.y_pred.push_back(y_pred[i]);
        }
    }
}

int cmd_finetune(const PipelineConfig& c, std::ostream& out) {
    const auto kind = c.finetune.kind == "token" ? mlm::HeadKind::Token : mlm::HeadKind::Sequence;
    const auto pooling = c.finetune.pooling == "mean" ? mlm::Pooling::Mean : mlm::Pooling::Cls;
    auto encoder = mlm::load_checkpoint(require_file(c.paths.checkpoint, "paths.checkpoint"));
    const auto train_path = require_file(c.paths.train_data, "paths.train_data");
    const auto eval_path = require_file(c.paths.eval_data, "paths.eval_data");
    const auto predictions_path = output_path(c.paths.predictions, "paths.predictions");
    std::optional<bpe::BpeVocab> vocab;
    if (!c.paths.vocab.empty()) {
        vocab = bpe::BpeVocab::load(require_file(c.paths.vocab, "paths.vocab"));
    }
    const auto max_len = std::min(static_cast<std::size_t>(c.sequence.max_len), encoder.config().max_positions);
    const auto train = read_labeled(train_path, kind, pooling, vocab ? &*vocab : nullptr, max_len);
    const auto eval = read_labeled(eval_path, kind, pooling, vocab ? &*vocab : nullptr, max_len);

    const auto n_classes = static_cast<std::size_t>(c.finetune.n_classes);
    mlm::Classifier<float> classifier(std::move(encoder), kind, n_classes, c.run.seed, pooling);
    classifier.validate(eval);
    mlm::FinetuneConfig config;
    config.batch_size = static_cast<std::size_t>(c.finetune.batch_size);
    config.lr = c.finetune.lr;
    config.momentum = c.finetune.momentum;
    config.warmup_steps = static_cast<std::size_t>(c.finetune.warmup);
    config.epochs = static_cast<std::size_t>(c.finetune.epochs);
    config.weight_mode = metrics::parse_mode(c.metrics.mode);
    config.seed = c.run.seed;
    const auto result = mlm::finetune(classifier, train, config);

    const auto predictions = classifier.predict(eval, config.batch_size);
    std::ofstream pred_out(predictions_path, std::ios::binary);
    if (!pred_out) {
        throw IoError("cannot write " + predictions_path.string());
    }
    FlatLabels flat;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        json line;
        if (kind == mlm::HeadKind::Sequence) {
            line = {{"y_true", eval[i].labels[0]}, {"y_pred", predictions[i][0]}};
        } else {
            line = {{"y_true", eval[i].labels}, {"y_pred", predictions[i]}};
        }
        pred_out << line.dump() << '\n';
        append_labels(flat, eval[i].labels, predictions[i]);
    }
    pred_out.close();
    if (!pred_out) {
        throw IoError("failed writing " + predictions_path.string());
    }
    auto j = summary("finetune", c);
    j["predictions"] = predictions_path.string();
    j["train_examples"] = train.size();
    j["eval_examples"] = eval.size();
    j["steps"] = result.loss_trace.size();
    j["final_loss"] = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
    j["class_weights"] = result.weights.w;
    j["metrics"] = ordered_json::parse(metrics::evaluate(flat.y_true, flat.y_pred, n_classes, config.weight_mode).to_json());
    out << j.dump() << '\n';
    return kExitOk;
}

std::vector<int> label_vector(const json& v) {
    return v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()};
}

int cmd_eval(const PipelineConfig& c, std::ostream& out) {
    const auto path = require_file(c.paths.predictions, "paths.predictions");
    FlatLabels flat;
    const auto lines = read_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const auto j = parse_line(lines[n], path, n + 1);
        try {
            append_labels(flat, label_vector(j.at("y_true")), label_vector(j.at("y_pred")));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(n + 1) + ": " + e.what());
        }
    }
    const auto mode = metrics::parse_mode(c.metrics.mode);
    auto j = summary("eval", c);
    j["predictions"] = path.string();
    j["n"] = flat.y_true.size();
    j["report"] = ordered_json::parse(
        metrics::evaluate(flat.y_true, flat.y_pred, static_cast<std::size_t>(c.finetune.n_classes), mode).to_json());
    out << j.dump() << '\n';
    return kExitOk;
}

miner::MinerConfig miner_config(const PipelineConfig& c) {
    miner::MinerConfig m;
    m.keywords = c.miner.keywords;
    m.reference_phrases = c.miner.reference_phrases;
    m.keyword_min_score = c.miner.keyword_min_score;
    m.edited_min_score = c.miner.edited_min_score;
    m.late_min_score = c.miner.late_min_score;
    m.min_code_distance = static_cast<std::size_t>(c.miner.levenshtein_min);
    m.late_after_ms = std::llround(c.miner.late_years * 365.0 * static_cast<double>(Timestamp::ms_per_day));
    return m;
}

int cmd_mine(const PipelineConfig& c, std::ostream& out) {
    const auto store = ingest::RecordStore::load(require_file(c.paths.store, "paths.store"));
    const auto candidates_path = output_path(c.paths.candidates, "paths.candidates");
    const auto result = miner::mine_all(store, miner_config(c));
    miner::export_candidates(result.candidates, candidates_path);
    auto j = summary("mine", c);
    j["candidates"] = candidates_path.string();
    for (std::size_t h = 0; h < miner::kHeuristicCount; ++h) {
        j["counts"][std::string(miner::heuristic_name(static_cast<miner::Heuristic>(h)))] = result.counts[h];
    }
    j["total"] = result.candidates.size();
    j["skipped_missing_history"] = result.skipped_missing_history.size();
    out << j.dump() << '\n';
    return kExitOk;
}

int cmd_sample(const PipelineConfig& c, std::ostream& out) {
    const auto candidates = miner::read_candidates(require_file(c.paths.candidates, "paths.candidates"));
    const auto sample_path = output_path(c.paths.sample, "paths.sample");
    const auto sample =
        miner::sample_for_annotation(candidates, static_cast<std::size_t>(c.annotation.n), c.run.seed);
    miner::export_candidates(sample.items, sample_path);
    auto j = summary("sample-annotations", c);
    j["sample"] = sample_path.string();
    j["requested"] = c.annotation.n;
    j["per_heuristic"] = sample.per_heuristic;
    j["drawn"] = sample.items.size();
    for (std::size_t h = 0; h < miner::kHeuristicCount; ++h) {
        j["shortfall"][std::string(miner::heuristic_name(static_cast<miner::Heuristic>(h)))] = sample.shortfall[h];
    }
    out << j.dump() << '\n';
    return kExitOk;
}

int cmd_kappa(const PipelineConfig& c, const std::string& annotator_a, const std::string& annotator_b,
              std::ostream& out) {
    const auto path = require_file(c.paths.annotations, "paths.annotations");
    std::optional<miner::IdSet> known;
    if (!c.paths.sample.empty()) {
        known.emplace();
        for (const auto& cand : miner::read_candidates(require_file(c.paths.sample, "paths.sample"))) {
            known->insert(cand.answer_id);
        }
    }
    const auto records = miner::import_annotations(path, known ? &*known : nullptr);
    std::string a = annotator_a;
    std::string b = annotator_b;
    if (a.empty() || b.empty()) {
        std::set<std::string> names;
        for (const auto& r : records) {
            names.insert(r.annotator);
        }
        if (names.size() != 2) {
            throw UsageError("file has " + std::to_string(names.size()) +
                             " annotators; name two with --annotator-a and --annotator-b");
        }
        a = *names.begin();
        b = *names.rbegin();
    }
    const auto paired = miner::pair_annotations(records, a, b);
    auto j = summary("kappa", c);
    j["annotations"] = path.string();
    j["annotator_a"] = a;
    j["annotator_b"] = b;
    j["n_paired"] = paired.ids.size();
    j["kappa"] = miner::cohen_kappa(paired.a, paired.b);
    out << j.dump() << '\n';
    return kExitOk;
}

PipelineConfig base_config(const std::string& config_path) {
    if (!config_path.empty()) {
        return load_config(config_path);
    }
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') {
        return load_config(env);
    }
    return {};
}

void apply_overrides(PipelineConfig& config, const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--set expects key=value, got '" + kv + "'");
        }
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"StackOverflow text pipeline: ingest, corpus, tokenizer, MLM, planning, mining, evaluation"};
    app.name("sotk");
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, std::string("configuration file (default: $") + kConfigEnvVar + ")");
    app.add_option("--set", overrides, "override a configuration key, key=value (repeatable)");

    Bindings bind;
    const auto seed = [&](CLI::App* sub) { bind.option(sub, "--seed", "run.seed", "root seed"); };

    auto* ingest = app.add_subcommand("ingest", "stream dump XML into a record store");
    bind.option(ingest, "--posts", "paths.posts", "Posts.xml");
    bind.option(ingest, "--comments", "paths.comments", "Comments.xml");
    bind.option(ingest, "--history", "paths.history", "PostHistory.xml");
    bind.option(ingest, "--store", "paths.store", "output store directory");
    seed(ingest);

    auto* build = app.add_subcommand("build-corpus", "assemble answer+comment samples");
    bind.option(build, "--store", "paths.store", "record store directory");
    bind.option(build, "--corpus", "paths.corpus", "output JSON-Lines corpus");
    bind.option(build, "--shard", "paths.shard", "optional output token shard");
    bind.option(build, "--vocab", "paths.vocab", "vocabulary for the shard");
    bind.option(build, "--min-score", "filter.min_score", "minimum answer score");
    bind.option(build, "--min-comments", "filter.min_comments", "minimum comment count");
    seed(build);

    auto* tok = app.add_subcommand("train-tokenizer", "train a byte-level BPE vocabulary");
    bind.option(tok, "--corpus", "paths.corpus", "JSON-Lines corpus");
    bind.option(tok, "--vocab", "paths.vocab", "output vocabulary file");
    bind.option(tok, "--vocab-size", "tokenizer.vocab_size", "target vocabulary size");
    bind.option(tok, "--sample-fraction", "tokenizer.sample_fraction", "share of samples used");
    bind.option(tok, "--threads", "tokenizer.threads", "pair-count workers");
    bind.flag(tok, "--digits", "tokenizer.digits", "true", "keep digits unmerged");
    seed(tok);

    auto* stats = app.add_subcommand("stats", "corpus statistics and length histogram");
    bind.option(stats, "--corpus", "paths.corpus", "JSON-Lines corpus");
    bind.option(stats, "--vocab", "paths.vocab", "count tokens instead of characters");
    bind.option(stats, "--bucket-edges", "sequence.bucket_edges", "comma-separated bucket edges");
    seed(stats);

    auto* plan = app.add_subcommand("plan", "parameter, token and cost estimates");
    bind.option(plan, "--layers", "plan.layers", "encoder layers");
    bind.option(plan, "--hidden", "plan.hidden", "hidden size");
    bind.option(plan, "--vocab-size", "plan.vocab_size", "vocabulary size");
    bind.option(plan, "--max-positions", "plan.max_positions", "position table size");
    bind.flag(plan, "--untied", "plan.tied", "false", "separate output head");
    bind.option(plan, "--gpu-hours", "plan.gpu_hours", "GPU hours to price");
    bind.option(plan, "--rate", "plan.rate_per_hour", "dollars per GPU hour");
    bind.option(plan, "--perf-ratio", "plan.perf_ratio", "hardware speedup divisor");
    bind.option(plan, "--tokens-per-hour", "plan.tokens_per_hour", "training throughput");
    bind.option(plan, "--batch-tokens", "plan.batch_tokens", "tokens per optimizer step");
    seed(plan);

    auto* pretrain = app.add_subcommand("pretrain", "masked-LM pre-training on a token shard");
    bind.option(pretrain, "--shard", "paths.shard", "token shard");
    bind.option(pretrain, "--vocab", "paths.vocab", "vocabulary the shard was written with");
    bind.option(pretrain, "--checkpoint", "paths.checkpoint", "output checkpoint");
    bind.option(pretrain, "--loss-csv", "paths.loss_csv", "optional loss trace");
    bind.option(pretrain, "--steps", "batch.steps", "optimizer steps");
    bind.option(pretrain, "--lr", "batch.lr", "learning rate");
    bind.option(pretrain, "--target-tokens", "batch.target_tokens", "tokens per optimizer step");
    bind.option(pretrain, "--micro-batch", "batch.micro_batch", "sequences per micro-batch");
    bind.option(pretrain, "--seq-len", "batch.seq_len", "tokens per sequence");
    bind.option(pretrain, "--layers", "model.layers", "encoder layers");
    bind.option(pretrain, "--hidden", "model.hidden", "hidden size");
    bind.option(pretrain, "--heads", "model.heads", "attention heads");
    seed(pretrain);

    auto* finetune = app.add_subcommand("finetune", "train a classification head and predict");
    bind.option(finetune, "--checkpoint", "paths.checkpoint", "pre-trained checkpoint");
    bind.option(finetune, "--vocab", "paths.vocab", "vocabulary for \"text\" examples");
    bind.option(finetune, "--train", "paths.train_data", "training JSON-Lines");
    bind.option(finetune, "--eval", "paths.eval_data", "held-out JSON-Lines");
    bind.option(finetune, "--predictions", "paths.predictions", "output predictions");
    bind.option(finetune, "--kind", "finetune.kind", "sequence | token");
    bind.option(finetune, "--pooling", "finetune.pooling", "cls | mean");
    bind.option(finetune, "--classes", "finetune.n_classes", "number of classes");
    bind.option(finetune, "--epochs", "finetune.epochs", "training epochs");
    bind.option(finetune, "--lr", "finetune.lr", "learning rate");
    bind.option(finetune, "--mode", "metrics.mode", "class weighting");
    seed(finetune);

    auto* mine = app.add_subcommand("mine", "mine obsolete-answer candidates");
    bind.option(mine, "--store", "paths.store", "record store directory");
    bind.option(mine, "--candidates", "paths.candidates", "output candidates JSON-Lines");
    bind.option(mine, "--levenshtein-min", "miner.levenshtein_min", "minimum code edit distance");
    bind.option(mine, "--late-years", "miner.late_years", "answer delay in years");
    bind.option(mine, "--keywords", "miner.keywords", "comma-separated keywords");
    seed(mine);

    auto* sample = app.add_subcommand("sample-annotations", "draw a balanced annotation sample");
    bind.option(sample, "--candidates", "paths.candidates", "candidates JSON-Lines");
    bind.option(sample, "--sample", "paths.sample", "output sample JSON-Lines");
    bind.option(sample, "-n", "annotation.n", "sample size");
    seed(sample);

    std::string annotator_a;
    std::string annotator_b;
    auto* kappa = app.add_subcommand("kappa", "inter-annotator agreement");
    bind.option(kappa, "--annotations", "paths.annotations", "annotation TSV");
    bind.option(kappa, "--sample", "paths.sample", "sample to validate ids against");
    kappa->add_option("--annotator-a", annotator_a, "first annotator");
    kappa->add_option("--annotator-b", annotator_b, "second annotator");
    seed(kappa);

    auto* eval = app.add_subcommand("eval", "weighted metrics over a predictions file");
    bind.option(eval, "--predictions", "paths.predictions", "predictions JSON-Lines");
    bind.option(eval, "--mode", "metrics.mode", "inverse-frequency | balanced | uniform");
    bind.option(eval, "--classes", "finetune.n_classes", "number of classes");
    seed(eval);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        auto config = base_config(config_path);
        apply_overrides(config, overrides);
        bind.apply(config);
        const auto* sub = app.get_subcommands().front();
        const auto& name = sub->get_name();
        if (name == "ingest") return cmd_ingest(config, out);
        if (name == "build-corpus") return cmd_build_corpus(config, out);
        if (name == "train-tokenizer") return cmd_train_tokenizer(config, out);
        if (name == "stats") return cmd_stats(config, out);
        if (name == "plan") return cmd_plan(config, out);
        if (name == "pretrain") return cmd_pretrain(config, out);
        if (name == "finetune") return cmd_finetune(config, out);
        if (name == "mine") return cmd_mine(config, out);
        if (name == "sample-annotations") return cmd_sample(config, out);
        if (name == "kappa") return cmd_kappa(config, annotator_a, annotator_b, out);
        return cmd_eval(config, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace sotk::cli
