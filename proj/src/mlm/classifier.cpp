#include "sotk/mlm/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sotk/common/error.hpp"
#include "sotk/common/rng.hpp"

namespace sotk::mlm {

template <class S>
Classifier<S>::Classifier(EncoderModel<S> encoder, HeadKind kind, std::size_t n_classes, std::uint64_t seed,
                          Pooling pooling)
    : encoder_(std::move(encoder)), kind_(kind), pooling_(pooling), n_classes_(n_classes) {
    if (n_classes < 2) {
        throw InvalidArgument("a classifier needs at least 2 classes");
    }
    const std::size_t d = encoder_.config().hidden;
    head_.assign(d * n_classes + n_classes, S(0));
    head_grad_.assign(head_.size(), S(0));
    Rng rng(seed);
    for (std::size_t i = 0; i < d * n_classes; ++i) {
        head_[i] = static_cast<S>(rng.normal() * encoder_.config().init_std);
    }
}

template <class S>
void Classifier<S>::validate(std::span<const LabeledExample> examples) const {
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        if (ex.ids.empty()) {
            throw DataError("example " + std::to_string(i) + " has no tokens");
        }
        if (kind_ == HeadKind::Sequence) {
            if (ex.labels.size() != 1) {
                throw DataError("sequence example " + std::to_string(i) + " must carry exactly one label");
            }
            if (pooling_ == Pooling::Cls && ex.ids.front() != kClsId) {
                throw DataError("sequence example " + std::to_string(i) + " does not start with <cls>");
            }
        } else if (ex.labels.size() != ex.ids.size()) {
            throw DataError("token example " + std::to_string(i) + " has " + std::to_string(ex.labels.size()) +
                            " labels for " + std::to_string(ex.ids.size()) + " tokens");
        }
        for (const int y : ex.labels) {
            if (y == kIgnoreLabel && kind_ == HeadKind::Token) {
                continue;
            }
            if (y < 0 || static_cast<std::size_t>(y) >= n_classes_) {
                throw DataError("label " + std::to_string(y) + " out of range for " + std::to_string(n_classes_) +
                                " classes (example " + std::to_string(i) + ")");
            }
        }
    }
}

template <class S>
typename Classifier<S>::Matrix Classifier<S>::logits(const TokenBatch& batch, Matrix* pooled_rows) {
    const auto& hidden = encoder_.forward_hidden(batch);
    const auto d = static_cast<Eigen::Index>(encoder_.config().hidden);
    const auto C = static_cast<Eigen::Index>(n_classes_);
    Eigen::Map<const Matrix> W(head_.data(), d, C);
    Eigen::Map<const typename EncoderModel<S>::RowVector> b(head_.data() + d * C, C);
    Matrix rows;
    if (kind_ == HeadKind::Token) {
        rows = hidden;
    } else {
        const auto T = static_cast<Eigen::Index>(batch.seq_len);
        rows.resize(static_cast<Eigen::Index>(batch.batch_size), d);
        for (Eigen::Index s = 0; s < rows.rows(); ++s) {
            if (pooling_ == Pooling::Cls) {
                rows.row(s) = hidden.row(s * T);
            } else {
                rows.row(s).setZero();
                S n = S(0);
                for (Eigen::Index t = 0; t < T; ++t) {
                    if (batch.attention[static_cast<std::size_t>(s * T + t)]) {
                        rows.row(s) += hidden.row(s * T + t);
                        n += S(1);
                    }
                }
                rows.row(s) /= n;
            }
        }
    }
    Matrix z = rows * W;
    z.rowwise() += b;
    if (pooled_rows != nullptr) {
        *pooled_rows = std::move(rows);
    }
    return z;
}

template <class S>
double Classifier<S>::loss(std::span<const LabeledExample> examples, std::span<const double> class_weights,
                           bool backward) {
    if (class_weights.size() != n_classes_) {
        throw InvalidArgument("class weight vector does not match n_classes");
    }
    std::vector<std::vector<TokenId>> seqs;
    for (const auto& ex : examples) {
        seqs.push_back(ex.ids);
    }
    const auto batch = make_token_batch(seqs, encoder_.config().max_positions);
    const std::size_t T = batch.seq_len;
    Matrix rows;
    Matrix z = logits(batch, &rows);

    // Target class per logit row, -1 where nothing is scored.
    std::vector<int> target(static_cast<std::size_t>(z.rows()), kIgnoreLabel);
    for (std::size_t s = 0; s < examples.size(); ++s) {
        if (kind_ == HeadKind::Sequence) {
            target[s] = examples[s].labels[0];
        } else {
            for (std::size_t t = 0; t < std::min(T, examples[s].labels.size()); ++t) {
                target[s * T + t] = examples[s].labels[t];
            }
        }
    }
    double weight_total = 0.0;
    for (const int y : target) {
        if (y != kIgnoreLabel) {
            weight_total += class_weights[static_cast<std::size_t>(y)];
        }
    }
    if (weight_total <= 0.0) {
        throw DataError("batch has no labeled items with positive class weight");
    }
    double total = 0.0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const int y = target[static_cast<std::size_t>(r)];
        if (y == kIgnoreLabel) {
            z.row(r).setZero();
            continue;
        }
        const double w = class_weights[static_cast<std::size_t>(y)];
        const S mx = z.row(r).maxCoeff();
        const S zy = z(r, y);
        z.row(r) = (z.row(r).array() - mx).exp();
        const S sum = z.row(r).sum();
        total += w * (static_cast<double>(mx) + std::log(static_cast<double>(sum)) - static_cast<double>(zy));
        z.row(r) /= sum;
        z(r, y) -= S(1);
        z.row(r) *= static_cast<S>(w / weight_total);
    }
    if (backward) {
        const auto d = static_cast<Eigen::Index>(encoder_.config().hidden);
        const auto C = static_cast<Eigen::Index>(n_classes_);
        Eigen::Map<Matrix> dW(head_grad_.data(), d, C);
        Eigen::Map<typename EncoderModel<S>::RowVector> db(head_grad_.data() + d * C, C);
        Eigen::Map<const Matrix> W(head_.data(), d, C);
        dW.noalias() += rows.transpose() * z;
        db += z.colwise().sum();
        const Matrix d_rows = z * W.transpose();
        Matrix d_hidden;
        if (kind_ == HeadKind::Token) {
            d_hidden = d_rows;
        } else {
            d_hidden = Matrix::Zero(static_cast<Eigen::Index>(batch.batch_size * T), d);
            for (Eigen::Index s = 0; s < d_rows.rows(); ++s) {
                const auto Ti = static_cast<Eigen::Index>(T);
                if (pooling_ == Pooling::Cls) {
                    d_hidden.row(s * Ti) = d_rows.row(s);
                } else {
                    S n = S(0);
                    for (Eigen::Index t = 0; t < Ti; ++t) {
                        n += batch.attention[static_cast<std::size_t>(s * Ti + t)] ? S(1) : S(0);
                    }
                    for (Eigen::Index t = 0; t < Ti; ++t) {
                        if (batch.attention[static_cast<std::size_t>(s * Ti + t)]) {
                            d_hidden.row(s * Ti + t) = d_rows.row(s) / n;
                        }
                    }
                }
            }
        }
        encoder_.backward_hidden(d_hidden);
    }
    return total / weight_total;
}

template <class S>
std::vector<std::vector<int>> Classifier<S>::predict(std::span<const LabeledExample> examples,
                                                     std::size_t batch_size) {
    std::vector<std::vector<int>> out;
    out.reserve(examples.size());
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        const auto chunk = examples.subspan(start, std::min(batch_size, examples.size() - start));
        std::vector<std::vector<TokenId>> seqs;
        for (const auto& ex : chunk) {
            seqs.push_back(ex.ids);
        }
        const auto batch = make_token_batch(seqs, encoder_.config().max_positions);
        const Matrix z = logits(batch, nullptr);
        for (std::size_t s = 0; s < chunk.size(); ++s) {
            std::vector<int> pred;
            auto argmax = [&](Eigen::Index r) {
                Eigen::Index best = 0;
                z.row(r).maxCoeff(&best);
                return static_cast<int>(best);
            };
            if (kind_ == HeadKind::Sequence) {
                pred.push_back(argmax(static_cast<Eigen::Index>(s)));
            } else {
                const std::size_t n = std::min(batch.seq_len, chunk[s].ids.size());
                for (std::size_t t = 0; t < n; ++t) {
                    pred.push_back(argmax(static_cast<Eigen::Index>(s * batch.seq_len + t)));
                }
            }
            out.push_back(std::move(pred));
        }
    }
    return out;
}

template <class S>
FinetuneResult finetune(Classifier<S>& classifier, std::span<const LabeledExample> train, const FinetuneConfig& config) {
    if (train.empty()) {
        throw DataError("fine-tuning needs at least one training example");
    }
    if (config.batch_size == 0) {
        throw InvalidArgument("batch_size must be positive");
    }
    classifier.validate(train);
    std::vector<std::uint64_t> counts(classifier.n_classes(), 0);
    for (const auto& ex : train) {
        for (const int y : ex.labels) {
            if (y != kIgnoreLabel) {
                ++counts[static_cast<std::size_t>(y)];
            }
        }
    }
    FinetuneResult result;
    result.weights = metrics::class_weights(counts, config.weight_mode);

    OptimizerConfig opt_config{config.lr, config.momentum, config.warmup_steps, 0.0};
    SgdMomentum<S> enc_opt(classifier.encoder().parameter_count(), opt_config);
    SgdMomentum<S> head_opt(classifier.head_parameters().size(), opt_config);
    Rng rng(config.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<LabeledExample> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
                batch.push_back(train[order[k]]);
            }
            classifier.encoder().zero_grad();
            std::fill(classifier.head_gradients().begin(), classifier.head_gradients().end(), S(0));
            const double loss = classifier.loss(batch, result.weights.w, true);
            if (!std::isfinite(loss)) {
                throw DataError("non-finite fine-tune loss at step " + std::to_string(result.loss_trace.size()));
            }
            result.loss_trace.push_back(loss);
            enc_opt.step(classifier.encoder().parameters(), classifier.encoder().gradients());
            head_opt.step(classifier.head_parameters(), classifier.head_gradients());
        }
    }
    return result;
}

template class Classifier<float>;
template class Classifier<double>;
template FinetuneResult finetune(Classifier<float>&, std::span<const LabeledExample>, const FinetuneConfig&);
template FinetuneResult finetune(Classifier<double>&, std::span<const LabeledExample>, const FinetuneConfig&);

}  // namespace sotk::mlm
