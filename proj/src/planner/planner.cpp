#include "sotk/planner/planner.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "sotk/common/error.hpp"

namespace sotk::planner {

void ModelShape::validate() const {
    if (hidden == 0 || hidden % 2 != 0) {
        throw InvalidArgument("model shape: hidden must be positive and even, got " + std::to_string(hidden));
    }
    if (vocab_size == 0 || max_positions == 0) {
        throw InvalidArgument("model shape: vocab_size and max_positions must be positive");
    }
}

std::string ModelShape::to_json() const {
    nlohmann::ordered_json j;
    j["n_layers"] = n_layers;
    j["hidden"] = hidden;
    j["vocab_size"] = vocab_size;
    j["max_positions"] = max_positions;
    j["head_tied"] = head_tied;
    return j.dump();
}

std::uint64_t estimate_params(const ModelShape& shape) {
    shape.validate();
    const std::uint64_t d = shape.hidden;
    const std::uint64_t V = shape.vocab_size;
    std::uint64_t total = shape.n_layers * (12 * d * d + 13 * d) + (V + shape.max_positions) * d + 2 * d;
    if (!shape.head_tied) {
        total += d * V + V;
    }
    return total;
}

std::uint64_t min_tokens(std::uint64_t params) {
    if (params == 0) {
        throw InvalidArgument("min_tokens needs a positive parameter count");
    }
    return kTokensPerParameter * params;
}

std::uint64_t estimate_cost(double gpu_hours, double rate_per_hour, double perf_ratio) {
    if (!(gpu_hours > 0.0 && rate_per_hour > 0.0 && perf_ratio > 0.0)) {
        throw InvalidArgument("estimate_cost arguments must be positive");
    }
    const double dollars = gpu_hours * rate_per_hour / perf_ratio;
    // Absorb representation error so an exact quotient such as 2880 / 1.8 is not bumped up.
    return static_cast<std::uint64_t>(std::ceil(dollars - 1e-9 * std::max(1.0, dollars)));
}

std::string TrainPlan::to_json() const {
    nlohmann::ordered_json j;
    j["shape"] = nlohmann::ordered_json::parse(shape.to_json());
    j["params"] = params;
    j["min_tokens"] = min_tokens;
    j["tokens_per_hour"] = tokens_per_hour;
    j["gpu_hours"] = gpu_hours;
    j["achievable_tokens"] = achievable_tokens;
    j["steps"] = steps_for_budget;
    j["dollars"] = dollars;
    return j.dump();
}

std::optional<TrainPlan> plan_budget(double budget_gpu_hours, std::span<const Candidate> candidates,
                                     const CostRates& rates, std::uint64_t batch_tokens) {
    if (candidates.empty()) {
        throw InvalidArgument("plan_budget needs at least one candidate shape");
    }
    if (batch_tokens == 0) {
        throw InvalidArgument("batch_tokens must be positive");
    }
    std::optional<TrainPlan> best;
    for (const auto& c : candidates) {
        if (!(c.tokens_per_gpu_hour > 0.0)) {
            throw InvalidArgument("candidate throughput must be positive");
        }
        const auto params = estimate_params(c.shape);
        const double achievable = budget_gpu_hours * c.tokens_per_gpu_hour;
        if (budget_gpu_hours <= 0.0 || static_cast<double>(min_tokens(params)) > achievable) {
            continue;
        }
        if (best && best->params >= params) {
            continue;
        }
        TrainPlan plan;
        plan.shape = c.shape;
        plan.params = params;
        plan.min_tokens = min_tokens(params);
        plan.tokens_per_hour = c.tokens_per_gpu_hour;
        plan.gpu_hours = budget_gpu_hours;
        plan.achievable_tokens = static_cast<std::uint64_t>(achievable);
        plan.steps_for_budget = plan.achievable_tokens / batch_tokens;
        plan.dollars = estimate_cost(budget_gpu_hours, rates.rate_per_hour, rates.perf_ratio);
        best = plan;
    }
    return best;
}

}  // namespace sotk::planner
