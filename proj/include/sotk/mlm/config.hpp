#pragma once

#include <cstdint>
#include <string>

namespace sotk::mlm {

struct EncoderConfig {
    std::size_t n_layers = 2;
    std::size_t hidden = 64;
    std::size_t n_heads = 4;
    std::size_t ffn_mult = 4;
    std::size_t max_positions = 2048;
    std::size_t vocab_size = 0;
    // Output projection shares the token embedding matrix (no head bias).
    bool tied_head = true;
    // Sublayer switches, for probing one half of the block in isolation.
    bool attention = true;
    bool feed_forward = true;
    double init_std = 0.02;
    std::uint64_t seed = 0;

    // Throws InvalidArgument naming the offending field.
    void validate() const;
    std::size_t head_dim() const { return hidden / n_heads; }
    std::string to_json() const;
};

}  // namespace sotk::mlm
