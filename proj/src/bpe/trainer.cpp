#include "sotk/bpe/trainer.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <queue>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "sotk/common/error.hpp"
#include "sotk/common/rng.hpp"

namespace sotk::bpe {

namespace {

using PairKey = std::uint64_t;
using Count = std::int64_t;

PairKey pair_key(TokenId left, TokenId right) { return (static_cast<std::uint64_t>(left) << 32) | right; }
TokenId left_of(PairKey key) { return static_cast<TokenId>(key >> 32); }
TokenId right_of(PairKey key) { return static_cast<TokenId>(key & 0xffffffffu); }

constexpr TokenId kDead = ~TokenId{0};

// All training symbols live in flat arrays; each deduplicated chunk is a doubly
// linked run of positions carrying the chunk's multiplicity.
struct SymbolTable {
    std::vector<TokenId> tok;
    std::vector<std::int32_t> prev;
    std::vector<std::int32_t> next;
    std::vector<Count> weight;
};

struct HeapEntry {
    Count count;
    PairKey key;
};

class MergeQueue {
public:
    explicit MergeQueue(const BpeVocab& vocab)
        : heap_([&vocab](const HeapEntry& a, const HeapEntry& b) {
              if (a.count != b.count) {
                  return a.count < b.count;
              }
              // Smaller (left bytes, right bytes) wins, so it must compare as "greater".
              const auto al = vocab.token_bytes(left_of(a.key));
              const auto bl = vocab.token_bytes(left_of(b.key));
              if (al != bl) {
                  return al > bl;
              }
              return vocab.token_bytes(right_of(a.key)) > vocab.token_bytes(right_of(b.key));
          }) {}

    void push(Count count, PairKey key) {
        if (count > 0) {
            heap_.push({count, key});
        }
    }
    bool empty() const { return heap_.empty(); }
    HeapEntry pop() {
        auto top = heap_.top();
        heap_.pop();
        return top;
    }

private:
    using Compare = std::function<bool(const HeapEntry&, const HeapEntry&)>;
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, Compare> heap_;
};

std::unordered_map<PairKey, Count> count_pairs(const SymbolTable& sym, unsigned threads) {
    const std::size_t n = sym.tok.size();
    threads = std::max(1u, threads);
    std::vector<std::unordered_map<PairKey, Count>> partial(threads);
    auto work = [&](unsigned t) {
        const std::size_t begin = n * t / threads;
        const std::size_t end = n * (t + 1) / threads;
        auto& local = partial[t];
        for (std::size_t i = begin; i < end; ++i) {
            if (sym.next[i] >= 0) {
                local[pair_key(sym.tok[i], sym.tok[static_cast<std::size_t>(sym.next[i])])] += sym.weight[i];
            }
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(work, t);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    std::unordered_map<PairKey, Count> total = std::move(partial[0]);
    for (unsigned t = 1; t < threads; ++t) {
        for (const auto& [key, count] : partial[t]) {
            total[key] += count;
        }
    }
    return total;
}

}  // namespace

BpeVocab train_bpe(std::span<const std::string> corpus, const TrainOptions& options) {
    if (options.vocab_size < kMinVocabSize) {
        throw InvalidArgument("vocab_size must be at least " + std::to_string(kMinVocabSize) +
                              " (256 byte tokens + " + std::to_string(kSpecialCount) + " specials)");
    }
    if (!(options.sample_fraction > 0.0 && options.sample_fraction <= 1.0)) {
        throw InvalidArgument("sample_fraction must be in (0, 1]");
    }

    // Seeded per-sample selection, then dedupe the merge-free chunks.
    Rng rng(options.seed);
    std::map<std::string_view, Count> chunks;
    std::size_t selected = 0;
    for (const auto& text : corpus) {
        if (options.sample_fraction < 1.0 && !rng.bernoulli(options.sample_fraction)) {
            continue;
        }
        ++selected;
        for (const auto& piece : split_for_bpe(text, options.pre_split)) {
            if (!piece.special) {
                chunks[piece.text] += 1;
            }
        }
    }
    if (selected == 0) {
        throw InvalidArgument("training corpus is empty after sampling");
    }

    BpeVocab vocab(options.pre_split);
    SymbolTable sym;
    for (const auto& [chunk, weight] : chunks) {
        const auto base = static_cast<std::int32_t>(sym.tok.size());
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            sym.tok.push_back(static_cast<unsigned char>(chunk[i]));
            sym.prev.push_back(i == 0 ? -1 : base + static_cast<std::int32_t>(i) - 1);
            sym.next.push_back(i + 1 < chunk.size() ? base + static_cast<std::int32_t>(i) + 1 : -1);
            sym.weight.push_back(weight);
        }
    }

    auto counts = count_pairs(sym, options.threads);
    std::unordered_map<PairKey, std::vector<std::int32_t>> where;
    for (std::size_t i = 0; i < sym.tok.size(); ++i) {
        if (sym.next[i] >= 0) {
            where[pair_key(sym.tok[i], sym.tok[static_cast<std::size_t>(sym.next[i])])].push_back(
                static_cast<std::int32_t>(i));
        }
    }

    MergeQueue queue(vocab);
    {
        // Insert in key order so heap construction does not depend on hash iteration.
        std::vector<std::pair<PairKey, Count>> initial(counts.begin(), counts.end());
        std::sort(initial.begin(), initial.end());
        for (const auto& [key, count] : initial) {
            queue.push(count, key);
        }
    }

    std::unordered_set<std::string> existing;
    for (TokenId id = 0; id < kByteTokens; ++id) {
        existing.emplace(vocab.token_bytes(id));
    }

    std::unordered_set<PairKey> banned;
    std::map<PairKey, Count> delta;
    auto bump = [&](TokenId left, TokenId right, Count by) { delta[pair_key(left, right)] += by; };

    while (vocab.vocab_size() < options.vocab_size && !queue.empty()) {
        const auto top = queue.pop();
        const auto current = counts.find(top.key);
        if (current == counts.end() || current->second != top.count) {
            continue;  // stale entry
        }
        if (top.count < 2) {
            break;
        }
        const TokenId a = left_of(top.key);
        const TokenId b = right_of(top.key);
        std::string merged_bytes = std::string(vocab.token_bytes(a)) + std::string(vocab.token_bytes(b));
        if (existing.contains(merged_bytes)) {
            // Same bytes already reachable through another merge path; a second id
            // would make the byte-pair file ambiguous.
            counts.erase(current);
            where.erase(top.key);
            banned.insert(top.key);
            continue;
        }
        const TokenId c = vocab.add_merge(a, b);
        existing.insert(std::move(merged_bytes));

        auto positions = std::move(where[top.key]);
        where.erase(top.key);
        std::sort(positions.begin(), positions.end());
        delta.clear();
        for (const auto pos : positions) {
            const auto p = static_cast<std::size_t>(pos);
            if (sym.tok[p] != a || sym.next[p] < 0) {
                continue;
            }
            const auto n = static_cast<std::size_t>(sym.next[p]);
            if (sym.tok[n] != b) {
                continue;
            }
            const Count w = sym.weight[p];
            if (sym.prev[p] >= 0) {
                const auto l = static_cast<std::size_t>(sym.prev[p]);
                bump(sym.tok[l], a, -w);
                bump(sym.tok[l], c, w);
                where[pair_key(sym.tok[l], c)].push_back(static_cast<std::int32_t>(l));
            }
            bump(a, b, -w);
            if (sym.next[n] >= 0) {
                const auto r = static_cast<std::size_t>(sym.next[n]);
                bump(b, sym.tok[r], -w);
                bump(c, sym.tok[r], w);
                where[pair_key(c, sym.tok[r])].push_back(pos);
                sym.prev[r] = pos;
            }
            sym.tok[p] = c;
            sym.next[p] = sym.next[n];
            sym.tok[n] = kDead;
            sym.next[n] = -1;
            sym.prev[n] = -1;
        }
        for (const auto& [key, change] : delta) {
            if (change == 0 || banned.contains(key)) {
                continue;
            }
            auto& count = counts[key];
            count += change;
            if (count <= 0) {
                counts.erase(key);
            } else {
                queue.push(count, key);
            }
        }
    }
    return vocab;
}

}  // namespace sotk::bpe
