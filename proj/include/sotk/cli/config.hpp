#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sotk/common/error.hpp"

namespace sotk::cli {

// Bad flags or configuration; the CLI maps these to exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

struct PipelineConfig {
    struct Paths {
        std::string posts, comments, history, store, corpus, vocab, shard, checkpoint, loss_csv, candidates, sample,
            train_data, eval_data, predictions, annotations;
    } paths;
    struct Filter {
        std::int64_t min_score = 1;
        std::int64_t min_comments = 1;
    } filter;
    struct Tokenizer {
        std::int64_t vocab_size = 50'000;
        double sample_fraction = 0.10;
        std::int64_t threads = 1;
        bool digits = false;
    } tokenizer;
    struct Sequence {
        std::int64_t max_len = 2048;
        std::vector<std::int64_t> bucket_edges{512, 1024, 2048};
    } sequence;
    struct Batch {
        std::int64_t target_tokens = 500'000;
        std::int64_t micro_batch = 8;
        std::int64_t seq_len = 2048;
        double lr = 1e-3;
        double momentum = 0.9;
        std::int64_t warmup = 0;
        double clip = 0.0;
        std::int64_t steps = 100;
    } batch;
    struct Model {
        std::int64_t layers = 2;
        std::int64_t hidden = 64;
        std::int64_t heads = 4;
        std::int64_t ffn_mult = 4;
        std::int64_t max_positions = 2048;
        std::int64_t vocab_size = 0;  // 0: take it from the vocabulary file
        bool tied = true;
        double init_std = 0.02;
    } model;
    struct Miner {
        std::int64_t levenshtein_min = 100;
        double late_years = 1.5;
        std::int64_t late_min_score = 2;
        std::int64_t keyword_min_score = 1;
        std::int64_t edited_min_score = 1;
        std::vector<std::string> keywords{"deprecated", "outdated", "obsolete", "out of date"};
        std::vector<std::string> reference_phrases{"'s answers", "answer by", "accepted answer", "other answer"};
    } miner;
    struct Annotation {
        std::int64_t n = 999;
    } annotation;
    struct Finetune {
        std::string kind = "sequence";
        std::string pooling = "cls";
        std::int64_t n_classes = 2;
        std::int64_t batch_size = 32;
        double lr = 1e-5;
        double momentum = 0.9;
        std::int64_t epochs = 3;
        std::int64_t warmup = 0;
    } finetune;
    struct Metrics {
        std::string mode = "inverse-frequency";
    } metrics;
    struct Plan {
        std::int64_t layers = 12;
        std::int64_t hidden = 768;
        std::int64_t vocab_size = 50'000;
        std::int64_t max_positions = 2048;
        bool tied = true;
        double gpu_hours = 0.0;  // 0: no cost estimate
        double rate_per_hour = 1.0;
        double perf_ratio = 1.0;
        double tokens_per_hour = 0.0;  // 0: no feasibility check
        std::int64_t batch_tokens = 500'000;
    } plan;
    struct Run {
        std::uint64_t seed = 0;
    } run;

    // Sets `section.key` from its text form. Throws UsageError naming the key on
    // an unknown key or an out-of-bounds value.
    void set(std::string_view key, std::string_view value);
    // Every key with its current value, in declaration order.
    std::vector<std::pair<std::string, std::string>> entries() const;
    std::string to_ini() const;
};

// `key = value` lines under `[section]` headers; `#` and `;` start comments.
PipelineConfig parse_config(std::string_view text, const std::string& origin = "config");
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace sotk::cli
