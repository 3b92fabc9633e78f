#pragma once
// Drives the command-line pipeline in-process over the miner fixture dump.
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sotk::testing {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args);

// Writes Posts.xml, Comments.xml and PostHistory.xml of miner_fixture(20, 60, 7) into `dir`.
void write_fixture_dump(const std::filesystem::path& dir);

struct PipelineRun {
    std::vector<std::string> failures;  // "<command>: <stderr>" for every non-zero exit
    std::vector<CliResult> steps;
};

// ingest, build-corpus, train-tokenizer, shard, stats, pretrain, mine and
// sample-annotations under one config file in `dir`, all seeded by `seed`.
PipelineRun run_pipeline(const std::filesystem::path& dir, std::uint64_t seed);

// Relative path -> bytes of every regular file below `dir` except the config.
std::vector<std::pair<std::string, std::string>> artifact_bytes(const std::filesystem::path& dir);

}  // namespace sotk::testing
