#include "sotk/metrics/metrics.hpp"

#include <numeric>

#include "json.hpp"

#include "sotk/common/error.hpp"

namespace sotk::metrics {

namespace {

void require_shape(const ConfusionStats& stats, const ClassWeights& weights) {
    if (weights.w.size() != stats.n_classes) {
        throw InvalidArgument("class weights cover " + std::to_string(weights.w.size()) + " classes, stats have " +
                              std::to_string(stats.n_classes));
    }
}

double ratio(double num, double den, const char* what) {
    if (den <= 0.0) {
        throw DataError(std::string(what) + " is undefined: no class has ground-truth support");
    }
    return num / den;
}

// Recall and F1 already scale each class by its support, so every-instance-equal
// weighting (Uniform) means a constant class multiplier there.
double ratio_weight(const ClassWeights& weights, std::size_t c) {
    return weights.mode == WeightMode::Uniform ? 1.0 : weights.w[c];
}

}  // namespace

ConfusionStats confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes) {
    if (y_true.size() != y_pred.size()) {
        throw InvalidArgument("label vectors differ in length: " + std::to_string(y_true.size()) + " vs " +
                              std::to_string(y_pred.size()));
    }
    ConfusionStats s;
    s.n_classes = n_classes;
    s.tp.assign(n_classes, 0);
    s.ap.assign(n_classes, 0);
    s.pp.assign(n_classes, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes) {
            throw InvalidArgument("label out of range at index " + std::to_string(i));
        }
        ++s.ap[static_cast<std::size_t>(t)];
        ++s.pp[static_cast<std::size_t>(p)];
        if (t == p) {
            ++s.tp[static_cast<std::size_t>(t)];
        }
    }
    s.n = y_true.size();
    return s;
}

std::string_view mode_name(WeightMode mode) {
    switch (mode) {
        case WeightMode::InverseFrequency:
            return "inverse-frequency";
        case WeightMode::Balanced:
            return "balanced";
        case WeightMode::Uniform:
            return "uniform";
    }
    return "?";
}

WeightMode parse_mode(std::string_view name) {
    for (auto m : {WeightMode::InverseFrequency, WeightMode::Balanced, WeightMode::Uniform}) {
        if (name == mode_name(m)) {
            return m;
        }
    }
    throw InvalidArgument("unknown weight mode '" + std::string(name) +
                          "' (expected inverse-frequency, balanced or uniform)");
}

ClassWeights class_weights(std::span<const std::uint64_t> counts, WeightMode mode) {
    if (counts.empty()) {
        throw InvalidArgument("class_weights needs at least one class");
    }
    ClassWeights cw;
    cw.mode = mode;
    cw.w.assign(counts.size(), 0.0);
    const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
    switch (mode) {
        case WeightMode::InverseFrequency: {
            double total = 0.0;
            for (std::size_t i = 0; i < counts.size(); ++i) {
                if (counts[i] == 0) {
                    throw DataError("class " + std::to_string(i) +
                                    " has no instances; inverse-frequency weight is undefined");
                }
                cw.w[i] = n / static_cast<double>(counts[i]);
                total += cw.w[i];
            }
            for (auto& w : cw.w) {
                w /= total;
            }
            break;
        }
        case WeightMode::Balanced:
            for (auto& w : cw.w) {
                w = 1.0 / static_cast<double>(counts.size());
            }
            break;
        case WeightMode::Uniform:
            if (n == 0.0) {
                throw DataError("uniform weights need at least one instance");
            }
            for (std::size_t i = 0; i < counts.size(); ++i) {
                cw.w[i] = static_cast<double>(counts[i]) / n;
            }
            break;
    }
    return cw;
}

double precision(const ConfusionStats& s, std::size_t c) {
    return s.pp[c] == 0 ? 0.0 : static_cast<double>(s.tp[c]) / static_cast<double>(s.pp[c]);
}

double recall(const ConfusionStats& s, std::size_t c) {
    return s.ap[c] == 0 ? 0.0 : static_cast<double>(s.tp[c]) / static_cast<double>(s.ap[c]);
}

double f1(const ConfusionStats& s, std::size_t c) {
    const double p = precision(s, c);
    const double r = recall(s, c);
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double weighted_accuracy(const ConfusionStats& s, const ClassWeights& weights) {
    require_shape(s, weights);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < s.n_classes; ++c) {
        if (s.ap[c] > 0) {
            num += weights.w[c] * recall(s, c);
            den += weights.w[c];
        }
    }
    return ratio(num, den, "weighted accuracy");
}

double weighted_accuracy_unnormalized(const ConfusionStats& s) {
    double total = 0.0;
    bool any = false;
    for (std::size_t c = 0; c < s.n_classes; ++c) {
        if (s.ap[c] > 0) {
            any = true;
            total += static_cast<double>(s.n) / static_cast<double>(s.ap[c]) * recall(s, c);
        }
    }
    return ratio(total, any ? 1.0 : 0.0, "weighted accuracy");
}

double weighted_recall(const ConfusionStats& s, const ClassWeights& weights) {
    require_shape(s, weights);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < s.n_classes; ++c) {
        num += ratio_weight(weights, c) * static_cast<double>(s.tp[c]);
        den += ratio_weight(weights, c) * static_cast<double>(s.ap[c]);
    }
    return ratio(num, den, "weighted recall");
}

double weighted_f1(const ConfusionStats& s, const ClassWeights& weights) {
    require_shape(s, weights);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < s.n_classes; ++c) {
        num += ratio_weight(weights, c) * f1(s, c) * static_cast<double>(s.ap[c]);
        den += ratio_weight(weights, c) * static_cast<double>(s.ap[c]);
    }
    return ratio(num, den, "weighted F1");
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["n"] = stats.n;
    j["n_classes"] = stats.n_classes;
    j["weight_mode"] = mode_name(weights.mode);
    auto& per = j["per_class"] = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < stats.n_classes; ++c) {
        nlohmann::ordered_json row;
        row["class"] = c;
        row["support"] = stats.ap[c];
        row["predicted"] = stats.pp[c];
        row["precision"] = precision(stats, c);
        row["recall"] = recall(stats, c);
        row["f1"] = f1(stats, c);
        row["weight"] = weights.w[c];
        per.push_back(row);
    }
    j["accuracy"] = accuracy;
    j["weighted_accuracy"] = weighted_accuracy;
    j["weighted_accuracy_unnormalized"] = weighted_accuracy_unnormalized;
    j["weighted_recall"] = weighted_recall;
    j["weighted_f1"] = weighted_f1;
    return j.dump();
}

MetricReport evaluate(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                      WeightMode mode) {
    MetricReport r;
    r.stats = confusion(y_true, y_pred, n_classes);
    if (r.stats.n == 0) {
        throw DataError("cannot evaluate an empty prediction set");
    }
    if (mode == WeightMode::InverseFrequency) {
        // Absent classes carry no weight; the rest follow inverse frequency.
        std::vector<std::uint64_t> present;
        for (auto a : r.stats.ap) {
            if (a > 0) {
                present.push_back(a);
            }
        }
        const auto sub = class_weights(present, mode);
        r.weights.mode = mode;
        r.weights.w.assign(n_classes, 0.0);
        for (std::size_t c = 0, k = 0; c < n_classes; ++c) {
            if (r.stats.ap[c] > 0) {
                r.weights.w[c] = sub.w[k++];
            }
        }
    } else {
        r.weights = class_weights(r.stats.ap, mode);
    }
    r.accuracy = static_cast<double>(std::accumulate(r.stats.tp.begin(), r.stats.tp.end(), std::uint64_t{0})) /
                 static_cast<double>(r.stats.n);
    r.weighted_accuracy = metrics::weighted_accuracy(r.stats, r.weights);
    r.weighted_accuracy_unnormalized = metrics::weighted_accuracy_unnormalized(r.stats);
    r.weighted_recall = metrics::weighted_recall(r.stats, r.weights);
    r.weighted_f1 = metrics::weighted_f1(r.stats, r.weights);
    return r;
}

}  // namespace sotk::metrics
