#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pulseforge/tensor.hpp"

namespace pulseforge {

struct ModelConfig {
    std::size_t l_in = 12;
    std::size_t d_model = 128;
    std::size_t T = 48;
    std::size_t n_heads = 14;
    std::size_t d_head = 10;
    std::size_t n_blocks = 1;
    std::size_t d_ff = 256;
    double dropout_p = 0.15;
    std::size_t pool_factor = 4;

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

struct AttentionBlock {
    std::vector<tg::Tensor> w_q, w_k, w_v;  // per head, d_model x d_head
    tg::Tensor w_o;                         // (n_heads * d_head) x d_model
    tg::Tensor attn_lin_w, attn_lin_b;      // extra linear after W_O
    tg::Tensor ln1_gain, ln1_bias;
    tg::Tensor ffn_w1, ffn_b1;              // d_model x d_ff, d_ff
    tg::Tensor ffn_w2, ffn_b2;              // d_ff x d_model, d_model
    tg::Tensor ln2_gain, ln2_bias;
};

struct ModelParams {
    ModelConfig config;
    tg::Tensor embed_w;  // d_model x l_in (kernel-1 conv weight)
    tg::Tensor embed_b;  // d_model
    std::vector<AttentionBlock> blocks;
    tg::Tensor head_w;  // (d_model * T / pool_factor) x 2
    tg::Tensor head_b;  // 2

    std::vector<std::pair<std::string, tg::Tensor>> named() const;
    std::vector<tg::Tensor> all() const;
};

enum class Mode { kTrain, kEval };

// Output bias starts at a typical BP operating point so the regression
// head converges within the fixed epoch budget.
ModelParams init_params(const ModelConfig& config, Rng& rng,
                        std::array<double, 2> output_bias = {120.0, 80.0});

// Fixed sinusoidal positional encoding, T x d_model.
tg::Tensor positional_encoding(std::size_t T, std::size_t d_model);

tg::Tensor embed(const tg::Tensor& input, const ModelParams& params);  // N x l_in x T
tg::Tensor multi_head_attention(const tg::Tensor& x, const AttentionBlock& block,
                                const ModelConfig& config, Mode mode, Rng* rng);
tg::Tensor position_wise_ffn(const tg::Tensor& x, const AttentionBlock& block,
                             const ModelConfig& config, Mode mode, Rng* rng);
tg::Tensor time_compressor(const tg::Tensor& x, std::size_t pool_factor);
tg::Tensor head(const tg::Tensor& x, const ModelParams& params);

// Full network: embed -> +PE -> [MHA -> FFN] x n_blocks -> pool -> head.
// batch is N x T x l_in; output is N x 2 (SBP, DBP), non-negative.
// add_positional_encoding exists for the permutation-equivariance checks.
tg::Tensor forward(const tg::Tensor& batch, const ModelParams& params, Mode mode,
                   Rng* rng = nullptr, bool add_positional_encoding = true);

// Checkpoint: magic "PFCK", version u32, length-prefixed config JSON,
// named float64 tensors in declaration order, trailing CRC32.
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);
// Loads and validates the embedded config against an expected one.
ModelParams load_params(const std::string& path, const ModelConfig& expected);

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace pulseforge
