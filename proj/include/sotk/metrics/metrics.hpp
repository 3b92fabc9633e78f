#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sotk::metrics {

struct ConfusionStats {
    std::size_t n_classes = 0;
    std::vector<std::uint64_t> tp;  // true positives per class
    std::vector<std::uint64_t> ap;  // actual positives (support) per class
    std::vector<std::uint64_t> pp;  // predicted positives per class
    std::uint64_t n = 0;
};

ConfusionStats confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes);

enum class WeightMode { InverseFrequency, Balanced, Uniform };

std::string_view mode_name(WeightMode mode);
WeightMode parse_mode(std::string_view name);

struct ClassWeights {
    WeightMode mode = WeightMode::InverseFrequency;
    std::vector<double> w;  // sums to 1
};

// InverseFrequency: w_i proportional to n / n_i. Balanced: 1/N. Uniform: n_i / n,
// i.e. every instance counts the same, which turns the weighted metrics into
// micro averages (support-weighted F1 for weighted_f1).
ClassWeights class_weights(std::span<const std::uint64_t> counts, WeightMode mode);

// Sum of w_i * recall_i over classes present in the ground truth, with the
// weights of absent classes dropped and the rest renormalized.
double weighted_accuracy(const ConfusionStats& stats, const ClassWeights& weights);
// Sum over present classes of (n / n_i) * recall_i, as literally written in the
// usual definition. Not bounded by 1.
double weighted_accuracy_unnormalized(const ConfusionStats& stats);
// sum w_i TP_i / sum w_i AP_i
double weighted_recall(const ConfusionStats& stats, const ClassWeights& weights);
// sum w_i F1_i AP_i / sum w_i AP_i
double weighted_f1(const ConfusionStats& stats, const ClassWeights& weights);

double precision(const ConfusionStats& stats, std::size_t cls);
double recall(const ConfusionStats& stats, std::size_t cls);
double f1(const ConfusionStats& stats, std::size_t cls);

struct MetricReport {
    ConfusionStats stats;
    ClassWeights weights;
    double accuracy = 0.0;
    double weighted_accuracy = 0.0;
    double weighted_accuracy_unnormalized = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;

    std::string to_json() const;
};

// Weights default to the ground-truth supports under `mode`.
MetricReport evaluate(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                      WeightMode mode = WeightMode::InverseFrequency);

}  // namespace sotk::metrics
