#pragma once
// Seeded training loop wiring corpus, model, relaxation, objective, and
// optimizer, with CSV loss logging and checkpointing.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dctc/corpus.hpp"
#include "dctc/gumbel.hpp"
#include "dctc/model.hpp"
#include "dctc/objective.hpp"
#include "dctc/optimizer.hpp"

namespace dctc {

struct TrainConfig {
    std::uint64_t seed = 1;
    long total_steps = 30000;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double word_dropout = 0.0;  // teacher-input corruption rate (Bowman-style)
    long log_every = 50;
    long checkpoint_every = 0;  // 0: final checkpoint only
    ObjectiveConfig objective;
    GumbelConfig gumbel;
    ModelConfig model;
    std::string out_dir = "run";

    void validate() const {
        if (total_steps < 1) throw std::invalid_argument("TrainConfig: total_steps must be positive");
        if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be at least 2");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
        if (word_dropout < 0.0 || word_dropout >= 1.0)
            throw std::invalid_argument("TrainConfig: word_dropout must be in [0,1)");
        if (log_every < 1) throw std::invalid_argument("TrainConfig: log_every must be positive");
        objective.validate();
        gumbel.validate();
        model.validate();
    }

    nlohmann::json to_json() const {
        return {{"seed", seed},
                {"total_steps", total_steps},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"word_dropout", word_dropout},
                {"log_every", log_every},
                {"checkpoint_every", checkpoint_every},
                {"objective",
                 {{"mode", to_string(objective.mode)},
                  {"gamma", objective.gamma},
                  {"beta", objective.beta},
                  {"capacity_start", objective.capacity_start},
                  {"capacity_end", objective.capacity_end},
                  {"capacity_anneal_steps", objective.capacity_anneal_steps}}},
                {"gumbel",
                 {{"tau_start", gumbel.tau_start},
                  {"tau_end", gumbel.tau_end},
                  {"tau_anneal_steps", gumbel.tau_anneal_steps},
                  {"hard_eval", gumbel.hard_eval}}},
                {"model", model.to_json()},
                {"out_dir", out_dir}};
    }
};

struct TrainReport {
    LossBreakdown final_loss;
    double reconstruction_accuracy = 0.0;
    double wall_seconds = 0.0;  // console-only; never serialized
    long steps = 0;
    std::string checkpoint_path;
    std::string loss_csv_path;

    nlohmann::json to_json(const TrainConfig& cfg) const {
        return {{"config", cfg.to_json()},
                {"steps", steps},
                {"final_loss",
                 {{"reconstruction", final_loss.reconstruction},
                  {"mi", final_loss.mi},
                  {"dwkl", final_loss.dwkl},
                  {"tc", final_loss.tc},
                  {"ctc_penalty", final_loss.ctc_penalty},
                  {"capacity", final_loss.capacity},
                  {"total", final_loss.total}}},
                {"reconstruction_accuracy", reconstruction_accuracy},
                {"checkpoint_path", checkpoint_path},
                {"loss_csv_path", loss_csv_path}};
    }
};

struct TrainDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Greedy-decodes every sentence from its deterministic hard code and counts
// position-wise token matches against the reference (BOS excluded).
inline double evaluate_reconstruction(const Model& m, const Corpus& corpus) {
    long hits = 0, total = 0;
    for (const auto& ex : corpus.examples) {
        const auto code = argmax_code(encode_logits(m, ex.tokens));
        const auto decoded = greedy_decode(m, code);
        const std::vector<int> target(ex.tokens.begin() + 1, ex.tokens.end());
        for (std::size_t i = 0; i < target.size(); ++i) {
            total += 1;
            if (i < decoded.size() && decoded[i] == target[i]) hits += 1;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

namespace detail {

inline void write_loss_row(std::ofstream& f, long step, const LossBreakdown& lb, double tau) {
    f << step << ',' << lb.reconstruction << ',' << lb.mi << ',' << lb.dwkl << ',' << lb.tc << ',' << lb.capacity
      << ',' << lb.ctc_penalty << ',' << lb.total << ',' << tau << '\n';
}

}  // namespace detail

// Training entry point. Takes an already-initialized model so callers can
// resume or inject states; train(cfg, corpus) below covers the common path.
inline TrainReport train_model(Model& model, const TrainConfig& cfg, const Corpus& corpus) {
    cfg.validate();
    if (corpus.examples.empty()) throw std::invalid_argument("train: empty corpus");
    if (corpus.max_tokens > cfg.model.max_sequence_length)
        throw std::invalid_argument("train: corpus max length " + std::to_string(corpus.max_tokens) +
                                    " exceeds model limit " + std::to_string(cfg.model.max_sequence_length));
    if (cfg.total_steps < cfg.objective.capacity_anneal_steps)
        std::cerr << "warning: total_steps " << cfg.total_steps << " < capacity_anneal_steps "
                  << cfg.objective.capacity_anneal_steps << "; the capacity schedule will not complete\n";

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const std::string csv_path = (fs::path(cfg.out_dir) / "loss.csv").string();
    const std::string ckpt_path = (fs::path(cfg.out_dir) / "model.ckpt").string();

    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + csv_path);
    csv << "step,recon,mi,dwkl,tc,capacity,ctc_penalty,total,tau\n";
    csv.precision(17);

    Rng batch_rng = Rng::stream(cfg.seed, 1);
    Rng noise_rng = Rng::stream(cfg.seed, 2);
    Rng estimator_rng = Rng::stream(cfg.seed, 3);
    Rng dropout_rng = Rng::stream(cfg.seed, 4);
    Adam opt(AdamConfig{.lr = cfg.learning_rate});

    const auto t0 = std::chrono::steady_clock::now();
    LossBreakdown last{};
    Tape tape;
    for (long step = 0; step < cfg.total_steps; ++step) {
        std::vector<const Example*> batch;
        batch.reserve(static_cast<std::size_t>(cfg.batch_size));
        for (int i = 0; i < cfg.batch_size; ++i)
            batch.push_back(&corpus.examples[static_cast<std::size_t>(batch_rng.below(static_cast<int>(corpus.examples.size())))]);

        tape.reset();
        ModelOnTape on = ModelOnTape::bind(tape, model);
        const TokenBatch tokens = make_token_batch(batch, cfg.model.max_sequence_length);
        const auto logits = encode_batch(tape, on, cfg.model, tokens);
        const double tau = tau_at_step(step, cfg.gumbel);
        const LatentCode code = sample_latents(tape, logits, tau, noise_rng, false);

        TokenBatch teacher = tokens;
        if (cfg.word_dropout > 0.0) {
            for (int t = 1; t + 1 < teacher.steps; ++t)  // keep BOS; targets stay intact
                for (int b = 0; b < teacher.batch_size; ++b) {
                    const bool drop = dropout_rng.uniform() < cfg.word_dropout;
                    if (drop && teacher.mask[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] > 0.0)
                        teacher.ids[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = Vocabulary::kUnk;
                }
        }
        const auto step_logits = decode_teacher_forced(tape, on, cfg.model, code.y, teacher);

        std::vector<std::vector<int>> targets;
        std::vector<std::vector<double>> mask;
        for (int t = 1; t < tokens.steps; ++t) {
            targets.push_back(tokens.ids[static_cast<std::size_t>(t)]);
            mask.push_back(tokens.mask[static_cast<std::size_t>(t)]);
        }
        Tensor recon = reconstruction_loss_on_tape(tape, step_logits, targets, mask);
        const KlTerms terms = kl_terms_on_tape(tape, code.pi, &estimator_rng);
        Tensor total = total_loss_on_tape(tape, recon, terms, step, cfg.objective);

        last = total_loss(recon.scalar(), terms.mi.scalar(), terms.dwkl.scalar(), terms.tc.scalar(), step,
                          cfg.objective);
        if (!std::isfinite(last.total)) {
            save_checkpoint(model, noise_rng.state(), step, ckpt_path);
            std::ostringstream os;
            os << "non-finite loss at step " << step << " (recon=" << last.reconstruction << ", mi=" << last.mi
               << ", dwkl=" << last.dwkl << ", tc=" << last.tc << "); last-good checkpoint dumped to " << ckpt_path;
            throw TrainDivergence(os.str());
        }

        tape.backward(total);
        opt.step(model.params.all(), on.gradients());

        const long done = step + 1;
        if (done % cfg.log_every == 0 || done == cfg.total_steps) detail::write_loss_row(csv, done, last, tau);
        if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done != cfg.total_steps)
            save_checkpoint(model, noise_rng.state(), done, ckpt_path);
    }
    tape.reset();
    csv.close();

    save_checkpoint(model, noise_rng.state(), cfg.total_steps, ckpt_path);

    TrainReport report;
    report.final_loss = last;
    report.steps = cfg.total_steps;
    report.checkpoint_path = ckpt_path;
    report.loss_csv_path = csv_path;
    report.reconstruction_accuracy = evaluate_reconstruction(model, corpus);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

inline TrainReport train(const TrainConfig& cfg, const Corpus& corpus) {
    cfg.validate();
    Model model = Model::init(cfg.model, cfg.seed);
    return train_model(model, cfg, corpus);
}

// ------------------------------------------------------------- loss csv io

struct LossRow {
    long step = 0;
    double recon = 0, mi = 0, dwkl = 0, tc = 0, capacity = 0, ctc_penalty = 0, total = 0, tau = 0;
};

inline std::vector<LossRow> load_loss_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(f, line);  // header
    std::vector<LossRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        LossRow r;
        std::istringstream is(line);
        char comma;
        is >> r.step >> comma >> r.recon >> comma >> r.mi >> comma >> r.dwkl >> comma >> r.tc >> comma >>
            r.capacity >> comma >> r.ctc_penalty >> comma >> r.total >> comma >> r.tau;
        if (!is) throw std::runtime_error(path + ": malformed row \"" + line + "\"");
        rows.push_back(r);
    }
    return rows;
}

}  // namespace dctc
