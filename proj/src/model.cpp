#include "pulseforge/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pulseforge {

using tg::Tensor;
using nlohmann::json;

void ModelConfig::validate() const {
    if (l_in == 0 || d_model == 0 || T == 0 || n_heads == 0 || d_head == 0 || n_blocks == 0 ||
        d_ff == 0)
        throw Error("InvalidConfig", "model dimensions must be positive");
    if (d_model % 2 != 0) throw Error("OddDimension", "d_model must be even for the PE");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw Error("InvalidConfig", "dropout_p must be in [0, 1)");
    if (pool_factor == 0 || T % pool_factor != 0)
        throw Error("InvalidConfig", "pool_factor must divide T");
}

std::string ModelConfig::to_json() const {
    json j;
    j["l_in"] = l_in;
    j["d_model"] = d_model;
    j["T"] = T;
    j["n_heads"] = n_heads;
    j["d_head"] = d_head;
    j["n_blocks"] = n_blocks;
    j["d_ff"] = d_ff;
    j["dropout_p"] = dropout_p;
    j["pool_factor"] = pool_factor;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error("MalformedFile", std::string("bad model config json: ") + e.what());
    }
    ModelConfig c;
    c.l_in = j.value("l_in", c.l_in);
    c.d_model = j.value("d_model", c.d_model);
    c.T = j.value("T", c.T);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_head = j.value("d_head", c.d_head);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.dropout_p = j.value("dropout_p", c.dropout_p);
    c.pool_factor = j.value("pool_factor", c.pool_factor);
    c.validate();
    return c;
}

namespace {

Tensor rand_tensor(std::vector<std::size_t> shape, double scale, Rng& rng) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> data(n);
    for (auto& v : data) v = scale * rng.normal();
    return Tensor::from_data(std::move(data), std::move(shape), true);
}

Tensor const_tensor(std::vector<std::size_t> shape, double value) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return Tensor::from_data(std::vector<double>(n, value), std::move(shape), true);
}

double keep_prob(const ModelConfig& config, Mode mode) {
    return mode == Mode::kTrain ? 1.0 - config.dropout_p : 1.0;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, Rng& rng,
                        std::array<double, 2> output_bias) {
    config.validate();
    ModelParams p;
    p.config = config;
    const double embed_scale = std::sqrt(2.0 / static_cast<double>(config.l_in));
    p.embed_w = rand_tensor({config.d_model, config.l_in}, embed_scale, rng);
    p.embed_b = const_tensor({config.d_model}, 0.0);
    const double qkv_scale = std::sqrt(1.0 / static_cast<double>(config.d_model));
    const std::size_t concat = config.n_heads * config.d_head;
    for (std::size_t b = 0; b < config.n_blocks; ++b) {
        AttentionBlock blk;
        for (std::size_t h = 0; h < config.n_heads; ++h) {
            blk.w_q.push_back(rand_tensor({config.d_model, config.d_head}, qkv_scale, rng));
            blk.w_k.push_back(rand_tensor({config.d_model, config.d_head}, qkv_scale, rng));
            blk.w_v.push_back(rand_tensor({config.d_model, config.d_head}, qkv_scale, rng));
        }
        blk.w_o = rand_tensor({concat, config.d_model},
                              std::sqrt(1.0 / static_cast<double>(concat)), rng);
        blk.attn_lin_w = rand_tensor({config.d_model, config.d_model}, qkv_scale, rng);
        blk.attn_lin_b = const_tensor({config.d_model}, 0.0);
        blk.ln1_gain = const_tensor({config.d_model}, 1.0);
        blk.ln1_bias = const_tensor({config.d_model}, 0.0);
        blk.ffn_w1 = rand_tensor({config.d_model, config.d_ff},
                                 std::sqrt(2.0 / static_cast<double>(config.d_model)), rng);
        blk.ffn_b1 = const_tensor({config.d_ff}, 0.0);
        blk.ffn_w2 = rand_tensor({config.d_ff, config.d_model},
                                 std::sqrt(1.0 / static_cast<double>(config.d_ff)), rng);
        blk.ffn_b2 = const_tensor({config.d_model}, 0.0);
        blk.ln2_gain = const_tensor({config.d_model}, 1.0);
        blk.ln2_bias = const_tensor({config.d_model}, 0.0);
        p.blocks.push_back(std::move(blk));
    }
    const std::size_t flat = config.d_model * config.T / config.pool_factor;
    p.head_w = rand_tensor({flat, 2}, std::sqrt(1.0 / static_cast<double>(flat)), rng);
    p.head_b = Tensor::from_data({output_bias[0], output_bias[1]}, {2}, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embed_w", embed_w);
    out.emplace_back("embed_b", embed_b);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& blk = blocks[b];
        const std::string pre = "block" + std::to_string(b) + ".";
        for (std::size_t h = 0; h < blk.w_q.size(); ++h) {
            const std::string hs = "h" + std::to_string(h);
            out.emplace_back(pre + "w_q." + hs, blk.w_q[h]);
            out.emplace_back(pre + "w_k." + hs, blk.w_k[h]);
            out.emplace_back(pre + "w_v." + hs, blk.w_v[h]);
        }
        out.emplace_back(pre + "w_o", blk.w_o);
        out.emplace_back(pre + "attn_lin_w", blk.attn_lin_w);
        out.emplace_back(pre + "attn_lin_b", blk.attn_lin_b);
        out.emplace_back(pre + "ln1_gain", blk.ln1_gain);
        out.emplace_back(pre + "ln1_bias", blk.ln1_bias);
        out.emplace_back(pre + "ffn_w1", blk.ffn_w1);
        out.emplace_back(pre + "ffn_b1", blk.ffn_b1);
        out.emplace_back(pre + "ffn_w2", blk.ffn_w2);
        out.emplace_back(pre + "ffn_b2", blk.ffn_b2);
        out.emplace_back(pre + "ln2_gain", blk.ln2_gain);
        out.emplace_back(pre + "ln2_bias", blk.ln2_bias);
    }
    out.emplace_back("head_w", head_w);
    out.emplace_back("head_b", head_b);
    return out;
}

std::vector<Tensor> ModelParams::all() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

Tensor positional_encoding(std::size_t T, std::size_t d_model) {
    if (d_model % 2 != 0) throw Error("OddDimension", "positional encoding needs even d_model");
    std::vector<double> data(T * d_model);
    for (std::size_t pos = 0; pos < T; ++pos)
        for (std::size_t i = 0; i < d_model / 2; ++i) {
            const double angle = static_cast<double>(pos) /
                                 std::pow(10000.0, 2.0 * static_cast<double>(i) /
                                                       static_cast<double>(d_model));
            data[pos * d_model + 2 * i] = std::sin(angle);
            data[pos * d_model + 2 * i + 1] = std::cos(angle);
        }
    return Tensor::from_data(std::move(data), {T, d_model});
}

Tensor embed(const Tensor& input, const ModelParams& params) {
    return tg::conv1d_k1(input, params.embed_w, params.embed_b);
}

Tensor multi_head_attention(const Tensor& x, const AttentionBlock& block,
                            const ModelConfig& config, Mode mode, Rng* rng) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.d_head));
    std::vector<Tensor> heads;
    heads.reserve(config.n_heads);
    for (std::size_t h = 0; h < config.n_heads; ++h) {
        Tensor q = tg::matmul(x, block.w_q[h]);
        Tensor k = tg::matmul(x, block.w_k[h]);
        Tensor v = tg::matmul(x, block.w_v[h]);
        Tensor scores = tg::mul_scalar(tg::matmul(q, tg::transpose_last2(k)), scale);
        Tensor attn = tg::softmax_lastdim(scores);
        heads.push_back(tg::matmul(attn, v));
    }
    Tensor cat = tg::concat_lastdim(heads);
    Tensor proj = tg::matmul(cat, block.w_o);
    Tensor lin = tg::add(tg::matmul(proj, block.attn_lin_w), block.attn_lin_b);
    const double kp = keep_prob(config, mode);
    if (kp < 1.0 && rng) lin = tg::dropout(lin, kp, *rng);
    return tg::layer_norm(tg::add(lin, x), block.ln1_gain, block.ln1_bias);
}

Tensor position_wise_ffn(const Tensor& x, const AttentionBlock& block,
                         const ModelConfig& config, Mode mode, Rng* rng) {
    Tensor h1 = tg::relu(tg::add(tg::matmul(x, block.ffn_w1), block.ffn_b1));
    Tensor h2 = tg::add(tg::matmul(h1, block.ffn_w2), block.ffn_b2);
    const double kp = keep_prob(config, mode);
    if (kp < 1.0 && rng) h2 = tg::dropout(h2, kp, *rng);
    return tg::layer_norm(tg::add(h2, x), block.ln2_gain, block.ln2_bias);
}

Tensor time_compressor(const Tensor& x, std::size_t pool_factor) {
    return tg::mean_pool_time(x, pool_factor);
}

Tensor head(const Tensor& x, const ModelParams& params) {
    const std::size_t N = x.shape()[0];
    const std::size_t flat = x.shape()[1] * x.shape()[2];
    Tensor f = tg::reshape(x, {N, flat});
    return tg::relu(tg::add(tg::matmul(f, params.head_w), params.head_b));
}

Tensor forward(const Tensor& batch, const ModelParams& params, Mode mode, Rng* rng,
               bool add_positional_encoding) {
    const ModelConfig& cfg = params.config;
    if (batch.shape().size() != 3 || batch.shape()[1] != cfg.T || batch.shape()[2] != cfg.l_in)
        throw Error("ShapeMismatch", "forward expects batch of shape N x T x l_in");
    if (mode == Mode::kTrain && cfg.dropout_p > 0.0 && rng == nullptr)
        throw Error("InvalidConfig", "train-mode forward with dropout needs an RNG");

    Tensor x = tg::transpose_last2(batch);  // N x l_in x T
    x = embed(x, params);                   // N x d_model x T
    x = tg::transpose_last2(x);             // N x T x d_model
    if (add_positional_encoding) x = tg::add(x, positional_encoding(cfg.T, cfg.d_model));
    for (const auto& blk : params.blocks) {
        x = multi_head_attention(x, blk, cfg, mode, rng);
        x = position_wise_ffn(x, blk, cfg, mode, rng);
    }
    x = time_compressor(x, cfg.pool_factor);
    return head(x, params);
}

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

namespace {

void append_u32(std::string& buf, std::uint32_t v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(v));
}
void append_u64(std::string& buf, std::uint64_t v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace

void save_params(const ModelParams& params, const std::string& path) {
    std::string buf;
    buf.append("PFCK", 4);
    append_u32(buf, 1u);
    const std::string cfg = params.config.to_json();
    append_u32(buf, static_cast<std::uint32_t>(cfg.size()));
    buf.append(cfg);
    for (const auto& [name, t] : params.named()) {
        append_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf.append(name);
        append_u32(buf, static_cast<std::uint32_t>(t.shape().size()));
        for (std::size_t d : t.shape()) append_u64(buf, d);
        buf.append(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(double));
    }
    const std::uint32_t crc = crc32(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
    append_u32(buf, crc);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoFailure", "cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("IoFailure", "write failed for " + path);
}

ModelParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoFailure", "cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || buf.compare(0, 4, "PFCK") != 0)
        throw Error("CorruptFile", path + ": bad checkpoint magic");
    const std::uint32_t stored_crc =
        *reinterpret_cast<const std::uint32_t*>(buf.data() + buf.size() - 4);
    const std::uint32_t actual_crc =
        crc32(reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 4);
    if (stored_crc != actual_crc) throw Error("CorruptFile", path + ": checksum mismatch");

    std::size_t pos = 4;
    auto read_u32 = [&](const char* what) {
        if (pos + 4 > buf.size() - 4) throw Error("CorruptFile", path + ": truncated " + what);
        std::uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    };
    auto read_u64 = [&](const char* what) {
        if (pos + 8 > buf.size() - 4) throw Error("CorruptFile", path + ": truncated " + what);
        std::uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    };

    const std::uint32_t version = read_u32("version");
    if (version != 1u) throw Error("VersionMismatch", path + ": unsupported checkpoint version");
    const std::uint32_t cfg_len = read_u32("config length");
    if (pos + cfg_len > buf.size() - 4) throw Error("CorruptFile", path + ": truncated config");
    const ModelConfig config = ModelConfig::from_json(buf.substr(pos, cfg_len));
    pos += cfg_len;

    Rng dummy(0);
    ModelParams params = init_params(config, dummy);
    for (auto& [name, t] : params.named()) {
        const std::uint32_t name_len = read_u32("tensor name");
        if (pos + name_len > buf.size() - 4)
            throw Error("CorruptFile", path + ": truncated tensor name");
        const std::string stored_name = buf.substr(pos, name_len);
        pos += name_len;
        if (stored_name != name)
            throw Error("ShapeMismatch", path + ": unexpected tensor '" + stored_name + "'");
        const std::uint32_t ndim = read_u32("tensor rank");
        std::vector<std::size_t> dims(ndim);
        for (auto& d : dims) d = static_cast<std::size_t>(read_u64("tensor dim"));
        if (dims != t.shape())
            throw Error("ShapeMismatch", path + ": tensor '" + name + "' has wrong shape");
        const std::size_t bytes = t.size() * sizeof(double);
        if (pos + bytes > buf.size() - 4)
            throw Error("CorruptFile", path + ": truncated tensor data");
        std::memcpy(t.data().data(), buf.data() + pos, bytes);
        pos += bytes;
    }
    if (pos != buf.size() - 4)
        throw Error("CorruptFile", path + ": trailing bytes in checkpoint");
    return params;
}

ModelParams load_params(const std::string& path, const ModelConfig& expected) {
    ModelParams params = load_params(path);
    const std::string got = params.config.to_json();
    if (got != expected.to_json())
        throw Error("ShapeMismatch", path + ": checkpoint config " + got +
                                         " does not match expected " + expected.to_json());
    return params;
}

}  // namespace pulseforge
