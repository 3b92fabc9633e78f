#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace sotk::planner {

inline constexpr std::uint64_t kTokensPerParameter = 20;
inline constexpr std::uint64_t kDefaultBatchTokens = 500'000;

struct ModelShape {
    std::uint64_t n_layers = 12;
    std::uint64_t hidden = 768;
    std::uint64_t vocab_size = 50'000;
    std::uint64_t max_positions = 2048;
    bool head_tied = true;

    // Throws InvalidArgument unless d is positive and even and V, P are positive.
    void validate() const;
    std::string to_json() const;
};

// Encoder with 4x feed-forward: 12d^2 + 13d per layer, (V + P)d embeddings, 2d
// final norm, plus dV + V for an untied head.
std::uint64_t estimate_params(const ModelShape& shape);

std::uint64_t min_tokens(std::uint64_t params);

// Whole dollars, rounded up.
std::uint64_t estimate_cost(double gpu_hours, double rate_per_hour, double perf_ratio);

struct Candidate {
    ModelShape shape;
    double tokens_per_gpu_hour = 0.0;
};

struct CostRates {
    double rate_per_hour = 1.0;
    double perf_ratio = 1.0;
};

struct TrainPlan {
    ModelShape shape;
    std::uint64_t params = 0;
    std::uint64_t min_tokens = 0;
    double tokens_per_hour = 0.0;
    double gpu_hours = 0.0;
    std::uint64_t achievable_tokens = 0;
    std::uint64_t steps_for_budget = 0;
    std::uint64_t dollars = 0;

    std::string to_json() const;
};

// Largest-parameter candidate whose min_tokens fits in budget_gpu_hours at its
// throughput; nullopt when none fits. Throws InvalidArgument on an empty list or
// a non-positive throughput.
std::optional<TrainPlan> plan_budget(double budget_gpu_hours, std::span<const Candidate> candidates,
                                     const CostRates& rates = {}, std::uint64_t batch_tokens = kDefaultBatchTokens);

}  // namespace sotk::planner
