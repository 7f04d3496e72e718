#pragma once
// LSTM sequence autoencoder with independent discrete latent heads. The
// encoder's final state feeds one projection per latent; the concatenated
// relaxed samples set the decoder's initial state. Checkpoints are versioned
// binary files with a JSON header.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dctc/corpus.hpp"
#include "dctc/gumbel.hpp"
#include "dctc/optimizer.hpp"
#include "dctc/tensor.hpp"

namespace dctc {

struct LatentSpec {
    std::string name;
    int cardinality = 0;
};

struct ModelConfig {
    std::vector<LatentSpec> latent_specs;
    int embedding_dim = 64;
    int encoder_hidden_dim = 256;
    int decoder_hidden_dim = 256;
    int vocab_size = 0;
    int max_sequence_length = 16;

    int n_latents() const { return static_cast<int>(latent_specs.size()); }

    int latent_width() const {
        int w = 0;
        for (const auto& s : latent_specs) w += s.cardinality;
        return w;
    }

    void validate() const {
        if (latent_specs.empty()) throw std::invalid_argument("ModelConfig: need at least one latent");
        for (const auto& s : latent_specs)
            if (s.cardinality < 1)
                throw std::invalid_argument("ModelConfig: latent '" + s.name + "' has cardinality " +
                                            std::to_string(s.cardinality));
        if (embedding_dim < 1 || encoder_hidden_dim < 1 || decoder_hidden_dim < 1)
            throw std::invalid_argument("ModelConfig: dimensions must be positive");
        if (vocab_size <= Vocabulary::kUnk) throw std::invalid_argument("ModelConfig: vocab_size not set");
        if (max_sequence_length < 3) throw std::invalid_argument("ModelConfig: max_sequence_length too small");
    }

    static ModelConfig from_grammar(const GrammarSpec& g, int vocab_size, int max_len) {
        ModelConfig cfg;
        for (const auto& f : g.factors) cfg.latent_specs.push_back({f.name, f.cardinality});
        cfg.vocab_size = vocab_size;
        cfg.max_sequence_length = max_len;
        return cfg;
    }

    nlohmann::json to_json() const {
        nlohmann::json latents = nlohmann::json::array();
        for (const auto& s : latent_specs) latents.push_back({{"name", s.name}, {"cardinality", s.cardinality}});
        return {{"latent_specs", latents},
                {"embedding_dim", embedding_dim},
                {"encoder_hidden_dim", encoder_hidden_dim},
                {"decoder_hidden_dim", decoder_hidden_dim},
                {"vocab_size", vocab_size},
                {"max_sequence_length", max_sequence_length}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig cfg;
        for (const auto& s : j.at("latent_specs"))
            cfg.latent_specs.push_back({s.at("name").get<std::string>(), s.at("cardinality").get<int>()});
        cfg.embedding_dim = j.at("embedding_dim").get<int>();
        cfg.encoder_hidden_dim = j.at("encoder_hidden_dim").get<int>();
        cfg.decoder_hidden_dim = j.at("decoder_hidden_dim").get<int>();
        cfg.vocab_size = j.at("vocab_size").get<int>();
        cfg.max_sequence_length = j.at("max_sequence_length").get<int>();
        return cfg;
    }
};

// Gate layout along the 4H axis: input, forget, cell, output.
struct Model {
    ModelConfig config;
    ParamStore params;

    static Model init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        Model m;
        m.config = cfg;
        Rng rng = Rng::stream(seed, 0x1417);
        const int e = cfg.embedding_dim, he = cfg.encoder_hidden_dim, hd = cfg.decoder_hidden_dim;
        const int v = cfg.vocab_size, k = cfg.latent_width();

        auto scale = [](int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
        m.params.add_uniform("embedding", {v, e}, rng, scale(e));
        m.params.add_uniform("enc_wx", {e, 4 * he}, rng, scale(e));
        m.params.add_uniform("enc_wh", {he, 4 * he}, rng, scale(he));
        Param& enc_b = m.params.add("enc_b", {4 * he});
        for (int i = he; i < 2 * he; ++i) enc_b.value[static_cast<std::size_t>(i)] = 1.0;  // forget-gate bias
        for (int j = 0; j < cfg.n_latents(); ++j) {
            const std::string tag = "head" + std::to_string(j);
            m.params.add_uniform(tag + "_w", {he, cfg.latent_specs[static_cast<std::size_t>(j)].cardinality}, rng,
                                 scale(he));
            m.params.add(tag + "_b", {cfg.latent_specs[static_cast<std::size_t>(j)].cardinality});
        }
        m.params.add_uniform("lat2h_w", {k, hd}, rng, scale(k));
        m.params.add("lat2h_b", {hd});
        m.params.add_uniform("lat2c_w", {k, hd}, rng, scale(k));
        m.params.add("lat2c_b", {hd});
        // decoder consumes the token embedding with the latent samples
        // concatenated at every step
        m.params.add_uniform("dec_wx", {e + k, 4 * hd}, rng, scale(e + k));
        m.params.add_uniform("dec_wh", {hd, 4 * hd}, rng, scale(hd));
        Param& dec_b = m.params.add("dec_b", {4 * hd});
        for (int i = hd; i < 2 * hd; ++i) dec_b.value[static_cast<std::size_t>(i)] = 1.0;
        m.params.add_uniform("out_w", {hd, v}, rng, scale(hd));
        m.params.add("out_b", {v});
        return m;
    }
};

// One tape's view of the parameters; leaf order matches params.all().
struct ModelOnTape {
    std::vector<Tensor> leaves;
    Tensor embedding, enc_wx, enc_wh, enc_b;
    std::vector<Tensor> head_w, head_b;
    Tensor lat2h_w, lat2h_b, lat2c_w, lat2c_b;
    Tensor dec_wx, dec_wh, dec_b, out_w, out_b;

    static ModelOnTape bind(Tape& tape, const Model& m) {
        ModelOnTape on;
        for (const auto& p : m.params.all()) on.leaves.push_back(tape.leaf(p.shape, p.value));
        std::size_t i = 0;
        auto next = [&] { return on.leaves[i++]; };
        on.embedding = next();
        on.enc_wx = next();
        on.enc_wh = next();
        on.enc_b = next();
        for (int j = 0; j < m.config.n_latents(); ++j) {
            on.head_w.push_back(next());
            on.head_b.push_back(next());
        }
        on.lat2h_w = next();
        on.lat2h_b = next();
        on.lat2c_w = next();
        on.lat2c_b = next();
        on.dec_wx = next();
        on.dec_wh = next();
        on.dec_b = next();
        on.out_w = next();
        on.out_b = next();
        return on;
    }

    std::vector<const std::vector<double>*> gradients() const {
        std::vector<const std::vector<double>*> g;
        g.reserve(leaves.size());
        for (const auto& l : leaves) g.push_back(&l.grad());
        return g;
    }
};

// ----------------------------------------------------------------- batching

struct TokenBatch {
    int batch_size = 0;
    int steps = 0;                              // padded length
    std::vector<std::vector<int>> ids;          // [steps][batch]
    std::vector<std::vector<double>> mask;      // 1 for real tokens
};

inline TokenBatch make_token_batch(const std::vector<const Example*>& examples, int max_len) {
    TokenBatch b;
    b.batch_size = static_cast<int>(examples.size());
    for (const auto* ex : examples) {
        if (static_cast<int>(ex->tokens.size()) > max_len)
            throw std::invalid_argument("make_token_batch: sequence of " + std::to_string(ex->tokens.size()) +
                                        " tokens exceeds limit " + std::to_string(max_len));
        b.steps = std::max(b.steps, static_cast<int>(ex->tokens.size()));
    }
    b.ids.assign(static_cast<std::size_t>(b.steps), std::vector<int>(static_cast<std::size_t>(b.batch_size), Vocabulary::kPad));
    b.mask.assign(static_cast<std::size_t>(b.steps), std::vector<double>(static_cast<std::size_t>(b.batch_size), 0.0));
    for (int e = 0; e < b.batch_size; ++e)
        for (std::size_t t = 0; t < examples[static_cast<std::size_t>(e)]->tokens.size(); ++t) {
            b.ids[t][static_cast<std::size_t>(e)] = examples[static_cast<std::size_t>(e)]->tokens[t];
            b.mask[t][static_cast<std::size_t>(e)] = 1.0;
        }
    return b;
}

// ---------------------------------------------------------------- lstm core

struct LstmState {
    Tensor h, c;
};

inline LstmState lstm_step(Tape& tape, const Tensor& wx, const Tensor& wh, const Tensor& b, const Tensor& x,
                           const LstmState& prev, const std::vector<double>* step_mask = nullptr) {
    const int hidden = prev.h.shape()[1];
    Tensor pre = add(add(matmul(x, wx), matmul(prev.h, wh)), b);
    Tensor gi = sigmoid(slice_cols(pre, 0, hidden));
    Tensor gf = sigmoid(slice_cols(pre, hidden, hidden));
    Tensor gc = tanh_t(slice_cols(pre, 2 * hidden, hidden));
    Tensor go = sigmoid(slice_cols(pre, 3 * hidden, hidden));
    Tensor c = add(mul(gf, prev.c), mul(gi, gc));
    Tensor h = mul(go, tanh_t(c));
    if (!step_mask) return {h, c};

    // padded rows keep their previous state
    const int bsz = prev.h.shape()[0];
    std::vector<double> keep(step_mask->begin(), step_mask->end());
    std::vector<double> drop(static_cast<std::size_t>(bsz));
    for (int i = 0; i < bsz; ++i) drop[static_cast<std::size_t>(i)] = 1.0 - keep[static_cast<std::size_t>(i)];
    Tensor mk = tape.leaf({bsz}, keep);
    Tensor md = tape.leaf({bsz}, drop);
    return {add(scale_rows(h, mk), scale_rows(prev.h, md)), add(scale_rows(c, mk), scale_rows(prev.c, md))};
}

// ------------------------------------------------------------------ encoder

// Final encoder state projected through one independent head per latent.
inline std::vector<Tensor> encode_batch(Tape& tape, const ModelOnTape& on, const ModelConfig& cfg,
                                        const TokenBatch& batch) {
    if (batch.steps == 0) throw std::invalid_argument("encode_batch: empty batch");
    if (batch.steps > cfg.max_sequence_length)
        throw std::invalid_argument("encode_batch: " + std::to_string(batch.steps) + " steps exceed limit " +
                                    std::to_string(cfg.max_sequence_length));
    const int bsz = batch.batch_size;
    LstmState state{tape.leaf({bsz, cfg.encoder_hidden_dim}, std::vector<double>(static_cast<std::size_t>(bsz * cfg.encoder_hidden_dim), 0.0)),
                    tape.leaf({bsz, cfg.encoder_hidden_dim}, std::vector<double>(static_cast<std::size_t>(bsz * cfg.encoder_hidden_dim), 0.0))};
    for (int t = 0; t < batch.steps; ++t) {
        Tensor x = embedding_rows(on.embedding, batch.ids[static_cast<std::size_t>(t)]);
        state = lstm_step(tape, on.enc_wx, on.enc_wh, on.enc_b, x, state, &batch.mask[static_cast<std::size_t>(t)]);
    }
    std::vector<Tensor> logits;
    for (int j = 0; j < cfg.n_latents(); ++j)
        logits.push_back(add(matmul(state.h, on.head_w[static_cast<std::size_t>(j)]),
                             on.head_b[static_cast<std::size_t>(j)]));
    return logits;
}

// ------------------------------------------------------------------ latents

struct LatentCode {
    std::vector<Tensor> logits;  // [B, k_j]
    std::vector<Tensor> pi;      // softmax(logits)
    std::vector<Tensor> y;       // relaxed samples (one-hot when hard)
};

inline LatentCode sample_latents(Tape& tape, const std::vector<Tensor>& logits, double tau, Rng& rng, bool hard) {
    if (!(tau > 0.0)) throw std::invalid_argument("sample_latents: tau must be positive");
    LatentCode code;
    code.logits = logits;
    for (const auto& l : logits) {
        const int bsz = l.shape()[0], k = l.shape()[1];
        code.pi.push_back(softmax_rows(l));
        std::vector<double> noise(static_cast<std::size_t>(bsz * k));
        for (auto& g : noise) g = rng.gumbel();
        Tensor y = gumbel_softmax_on_tape(l, tape.leaf({bsz, k}, noise), tau);
        if (hard) {
            const auto& yv = y.value();
            std::vector<double> onehot(yv.size(), 0.0);
            for (int b = 0; b < bsz; ++b) {
                int best = 0;
                for (int v = 1; v < k; ++v)
                    if (yv[static_cast<std::size_t>(b * k + v)] > yv[static_cast<std::size_t>(b * k + best)]) best = v;
                onehot[static_cast<std::size_t>(b * k + best)] = 1.0;
            }
            y = tape.leaf({bsz, k}, onehot);
        }
        code.y.push_back(y);
    }
    return code;
}

// Deterministic mode code used by evaluation: argmax of the logits, no noise.
inline std::vector<int> argmax_code(const std::vector<std::vector<double>>& latent_logits) {
    std::vector<int> code;
    for (const auto& l : latent_logits) {
        int best = 0;
        for (std::size_t v = 1; v < l.size(); ++v)
            if (l[v] > l[static_cast<std::size_t>(best)]) best = static_cast<int>(v);
        code.push_back(best);
    }
    return code;
}

// ------------------------------------------------------------------ decoder

inline LstmState decoder_initial_state(Tape& tape, const ModelOnTape& on, const std::vector<Tensor>& y) {
    Tensor cat = concat_cols(y);
    (void)tape;
    return {tanh_t(add(matmul(cat, on.lat2h_w), on.lat2h_b)),
            tanh_t(add(matmul(cat, on.lat2c_w), on.lat2c_b))};
}

// Teacher-forced: logits for positions 1..steps-1 (inputs are tokens 0..steps-2).
inline std::vector<Tensor> decode_teacher_forced(Tape& tape, const ModelOnTape& on, const ModelConfig& cfg,
                                                 const std::vector<Tensor>& y, const TokenBatch& batch) {
    if (batch.steps < 2) throw std::invalid_argument("decode_teacher_forced: need at least two positions");
    LstmState state = decoder_initial_state(tape, on, y);
    Tensor code = concat_cols(y);
    std::vector<Tensor> logits;
    for (int t = 0; t + 1 < batch.steps; ++t) {
        Tensor x = concat_cols({embedding_rows(on.embedding, batch.ids[static_cast<std::size_t>(t)]), code});
        state = lstm_step(tape, on.dec_wx, on.dec_wh, on.dec_b, x, state, &batch.mask[static_cast<std::size_t>(t)]);
        logits.push_back(add(matmul(state.h, on.out_w), on.out_b));
    }
    (void)cfg;
    return logits;
}

// Greedy decode of a single hard code: argmax per step until EOS or the
// length limit. Returns tokens without BOS, with EOS when produced.
inline std::vector<int> greedy_decode(const Model& m, const std::vector<int>& code) {
    m.config.validate();
    if (static_cast<int>(code.size()) != m.config.n_latents())
        throw std::invalid_argument("greedy_decode: code has " + std::to_string(code.size()) + " latents, expected " +
                                    std::to_string(m.config.n_latents()));
    Tape tape;
    ModelOnTape on = ModelOnTape::bind(tape, m);
    std::vector<Tensor> y;
    for (int j = 0; j < m.config.n_latents(); ++j) {
        const int k = m.config.latent_specs[static_cast<std::size_t>(j)].cardinality;
        if (code[static_cast<std::size_t>(j)] < 0 || code[static_cast<std::size_t>(j)] >= k)
            throw std::out_of_range("greedy_decode: latent " + std::to_string(j) + " value out of range");
        std::vector<double> onehot(static_cast<std::size_t>(k), 0.0);
        onehot[static_cast<std::size_t>(code[static_cast<std::size_t>(j)])] = 1.0;
        y.push_back(tape.leaf({1, k}, onehot));
    }
    LstmState state = decoder_initial_state(tape, on, y);
    Tensor code_row = concat_cols(y);
    std::vector<int> out;
    int prev = Vocabulary::kBos;
    for (int t = 0; t + 1 < m.config.max_sequence_length; ++t) {
        Tensor x = concat_cols({embedding_rows(on.embedding, {prev}), code_row});
        state = lstm_step(tape, on.dec_wx, on.dec_wh, on.dec_b, x, state);
        Tensor logits = add(matmul(state.h, on.out_w), on.out_b);
        const auto& lv = logits.value();
        int best = 0;
        for (int v = 1; v < m.config.vocab_size; ++v)
            if (lv[static_cast<std::size_t>(v)] > lv[static_cast<std::size_t>(best)]) best = v;
        out.push_back(best);
        if (best == Vocabulary::kEos) break;
        prev = best;
    }
    return out;
}

// Per-latent logits for one sentence, as plain values.
inline std::vector<std::vector<double>> encode_logits(const Model& m, const std::vector<int>& tokens) {
    Example ex;
    ex.tokens = tokens;
    Tape tape;
    ModelOnTape on = ModelOnTape::bind(tape, m);
    const TokenBatch batch = make_token_batch({&ex}, m.config.max_sequence_length);
    const auto logits = encode_batch(tape, on, m.config, batch);
    std::vector<std::vector<double>> out;
    for (const auto& l : logits) out.push_back(l.value());
    return out;
}

// --------------------------------------------------------------- checkpoint

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Model model;
    std::string rng_state;
    long step = 0;
};

namespace detail {

inline void write_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t read_u32(std::ifstream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace detail

inline void save_checkpoint(const Model& m, const std::string& rng_state, long step, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint " + path);
    f.write("DCTCCKPT", 8);
    const nlohmann::json header = {{"format_version", kCheckpointVersion},
                                   {"model_config", m.config.to_json()},
                                   {"rng_state", rng_state},
                                   {"step", step}};
    const std::string hs = header.dump();
    detail::write_u32(f, static_cast<std::uint32_t>(hs.size()));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& p : m.params.all()) {
        detail::write_u32(f, static_cast<std::uint32_t>(p.name.size()));
        f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        detail::write_u32(f, static_cast<std::uint32_t>(p.shape.size()));
        for (int d : p.shape) detail::write_u32(f, static_cast<std::uint32_t>(d));
        f.write(reinterpret_cast<const char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("short write on checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint " + path);
    char magic[8] = {};
    f.read(magic, 8);
    if (std::string(magic, 8) != "DCTCCKPT") throw std::runtime_error(path + ": not a checkpoint file");
    const std::uint32_t hlen = detail::read_u32(f);
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    const nlohmann::json header = nlohmann::json::parse(hs);
    const std::uint32_t version = header.at("format_version").get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw std::runtime_error(path + ": checkpoint format version " + std::to_string(version) +
                                 " does not match supported version " + std::to_string(kCheckpointVersion));
    Checkpoint ck;
    ck.model.config = ModelConfig::from_json(header.at("model_config"));
    ck.rng_state = header.at("rng_state").get<std::string>();
    ck.step = header.at("step").get<long>();

    Model reference = Model::init(ck.model.config, 0);  // same layout, any seed
    for (const auto& ref : reference.params.all()) {
        const std::uint32_t nlen = detail::read_u32(f);
        std::string name(nlen, '\0');
        f.read(name.data(), nlen);
        if (name != ref.name) throw std::runtime_error(path + ": expected parameter '" + ref.name + "', found '" + name + "'");
        const std::uint32_t rank = detail::read_u32(f);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<int>(detail::read_u32(f));
        if (shape != ref.shape)
            throw std::runtime_error(path + ": parameter '" + name + "' has shape " + shape_str(shape) +
                                     ", config requires " + shape_str(ref.shape));
        Param& p = ck.model.params.add(name, shape);
        f.read(reinterpret_cast<char*>(p.value.data()),
               static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error(path + ": truncated checkpoint");
    return ck;
}

}  // namespace dctc
