#pragma once
// Loss decomposition for the discrete VAE: reconstruction, index-code mutual
// information, dimension-wise KL, and the controlled total-correlation
// penalty, with an exact enumeration oracle and a sampled estimator for
// joint supports too large to enumerate.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dctc/rng.hpp"
#include "dctc/tensor.hpp"

namespace dctc {

constexpr long kEnumerationLimit = 4096;

enum class ObjectiveMode { kDctc, kGammaZero, kBetaKl };

inline const char* to_string(ObjectiveMode m) {
    switch (m) {
        case ObjectiveMode::kDctc: return "dctc";
        case ObjectiveMode::kGammaZero: return "gamma-zero";
        case ObjectiveMode::kBetaKl: return "beta-kl";
    }
    return "?";
}

inline ObjectiveMode objective_mode_from_string(const std::string& s) {
    if (s == "dctc") return ObjectiveMode::kDctc;
    if (s == "gamma-zero") return ObjectiveMode::kGammaZero;
    if (s == "beta-kl") return ObjectiveMode::kBetaKl;
    throw std::invalid_argument("unknown objective mode '" + s + "' (expected dctc|gamma-zero|beta-kl)");
}

struct ObjectiveConfig {
    ObjectiveMode mode = ObjectiveMode::kDctc;
    double gamma = 50.0;
    double beta = 1.0;
    double capacity_start = 0.0;
    double capacity_end = 30.0;
    long capacity_anneal_steps = 25000;

    void validate() const {
        if (gamma < 0.0) throw std::invalid_argument("ObjectiveConfig: gamma must be >= 0");
        if (capacity_start < 0.0 || capacity_end < capacity_start)
            throw std::invalid_argument("ObjectiveConfig: need 0 <= capacity_start <= capacity_end");
        if (capacity_anneal_steps <= 0)
            throw std::invalid_argument("ObjectiveConfig: capacity_anneal_steps must be positive");
    }
};

// Linear interpolation capacity_start -> capacity_end, clamped afterwards.
inline double capacity_at_step(long step, const ObjectiveConfig& cfg) {
    cfg.validate();
    if (step <= 0) return cfg.capacity_start;
    if (step >= cfg.capacity_anneal_steps) return cfg.capacity_end;
    const double f = static_cast<double>(step) / static_cast<double>(cfg.capacity_anneal_steps);
    return cfg.capacity_start + f * (cfg.capacity_end - cfg.capacity_start);
}

// Per-example, per-latent class probabilities over a minibatch.
struct PosteriorBatch {
    std::vector<int> cardinalities;
    std::vector<std::vector<std::vector<double>>> pi;  // [batch][latent][class]

    int batch() const { return static_cast<int>(pi.size()); }
    int latents() const { return static_cast<int>(cardinalities.size()); }

    long support() const {
        long s = 1;
        for (int k : cardinalities) s *= k;
        return s;
    }

    void validate(double tol = 1e-6) const {
        if (cardinalities.empty()) throw std::invalid_argument("PosteriorBatch: no latents");
        for (const auto& row : pi) {
            if (static_cast<int>(row.size()) != latents())
                throw std::invalid_argument("PosteriorBatch: row with wrong latent count");
            for (int j = 0; j < latents(); ++j) {
                const auto& p = row[static_cast<std::size_t>(j)];
                if (static_cast<int>(p.size()) != cardinalities[static_cast<std::size_t>(j)])
                    throw std::invalid_argument("PosteriorBatch: latent " + std::to_string(j) + " has " +
                                                std::to_string(p.size()) + " classes, expected " +
                                                std::to_string(cardinalities[static_cast<std::size_t>(j)]));
                double sum = 0.0;
                for (double v : p) {
                    if (v < -tol) throw std::invalid_argument("PosteriorBatch: negative probability");
                    sum += v;
                }
                if (std::fabs(sum - 1.0) > tol)
                    throw std::invalid_argument("PosteriorBatch: row off the simplex, sum=" + std::to_string(sum));
            }
        }
    }
};

struct KlValues {
    double mi = 0.0;
    double dwkl = 0.0;
    double tc = 0.0;
};

struct LossBreakdown {
    double reconstruction = 0.0;
    double mi = 0.0;
    double dwkl = 0.0;
    double tc = 0.0;
    double ctc_penalty = 0.0;
    double capacity = 0.0;
    double total = 0.0;
};

namespace detail {

// mixed-radix digits of every joint assignment, last latent fastest
inline std::vector<std::vector<int>> support_digits(const std::vector<int>& cards) {
    long s = 1;
    for (int k : cards) s *= k;
    std::vector<std::vector<int>> digits(cards.size(), std::vector<int>(static_cast<std::size_t>(s)));
    for (long v = 0; v < s; ++v) {
        long rest = v;
        for (int j = static_cast<int>(cards.size()) - 1; j >= 0; --j) {
            digits[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)] =
                static_cast<int>(rest % cards[static_cast<std::size_t>(j)]);
            rest /= cards[static_cast<std::size_t>(j)];
        }
    }
    return digits;
}

inline double xlogratio(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }

}  // namespace detail

// Exact decomposition under the empirical batch distribution with factored
// per-example posteriors; the KL terms are evaluated in ratio form by full
// joint enumeration. Doubles as the test oracle for the tape estimators.
inline KlValues exact_kl_decomposition(const PosteriorBatch& batch) {
    batch.validate();
    if (batch.batch() < 1) throw std::invalid_argument("exact_kl_decomposition: empty batch");
    const long s = batch.support();
    if (s > kEnumerationLimit)
        throw std::invalid_argument("exact_kl_decomposition: joint support " + std::to_string(s) +
                                    " exceeds enumeration limit " + std::to_string(kEnumerationLimit));
    const int bsz = batch.batch();
    const int n = batch.latents();
    const auto digits = detail::support_digits(batch.cardinalities);

    std::vector<std::vector<double>> joint(static_cast<std::size_t>(bsz),
                                           std::vector<double>(static_cast<std::size_t>(s), 1.0));
    for (int b = 0; b < bsz; ++b)
        for (long v = 0; v < s; ++v)
            for (int j = 0; j < n; ++j)
                joint[static_cast<std::size_t>(b)][static_cast<std::size_t>(v)] *=
                    batch.pi[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)]
                            [static_cast<std::size_t>(digits[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)])];

    std::vector<double> aggregate(static_cast<std::size_t>(s), 0.0);
    for (long v = 0; v < s; ++v) {
        for (int b = 0; b < bsz; ++b) aggregate[static_cast<std::size_t>(v)] += joint[static_cast<std::size_t>(b)][static_cast<std::size_t>(v)];
        aggregate[static_cast<std::size_t>(v)] /= bsz;
    }

    std::vector<std::vector<double>> marginals(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        marginals[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(batch.cardinalities[static_cast<std::size_t>(j)]), 0.0);
        for (int b = 0; b < bsz; ++b)
            for (int v = 0; v < batch.cardinalities[static_cast<std::size_t>(j)]; ++v)
                marginals[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)] +=
                    batch.pi[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)][static_cast<std::size_t>(v)] / bsz;
    }

    KlValues out;
    for (int b = 0; b < bsz; ++b) {
        double kl = 0.0;
        for (long v = 0; v < s; ++v)
            kl += detail::xlogratio(joint[static_cast<std::size_t>(b)][static_cast<std::size_t>(v)],
                                    aggregate[static_cast<std::size_t>(v)]);
        out.mi += kl / bsz;
    }
    for (int j = 0; j < n; ++j) {
        const int k = batch.cardinalities[static_cast<std::size_t>(j)];
        for (int v = 0; v < k; ++v)
            out.dwkl += detail::xlogratio(marginals[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)], 1.0 / k);
    }
    for (long v = 0; v < s; ++v) {
        double prod = 1.0;
        for (int j = 0; j < n; ++j)
            prod *= marginals[static_cast<std::size_t>(j)]
                             [static_cast<std::size_t>(digits[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)])];
        out.tc += detail::xlogratio(aggregate[static_cast<std::size_t>(v)], prod);
    }
    return out;
}

// Batch mean of KL(q(d|x) || uniform prior), by direct joint enumeration.
inline double batch_mean_kl_to_uniform(const PosteriorBatch& batch) {
    batch.validate();
    const long s = batch.support();
    if (s > kEnumerationLimit)
        throw std::invalid_argument("batch_mean_kl_to_uniform: support too large");
    const auto digits = detail::support_digits(batch.cardinalities);
    double acc = 0.0;
    for (int b = 0; b < batch.batch(); ++b) {
        for (long v = 0; v < s; ++v) {
            double p = 1.0;
            for (int j = 0; j < batch.latents(); ++j)
                p *= batch.pi[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)]
                             [static_cast<std::size_t>(digits[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)])];
            acc += detail::xlogratio(p, 1.0 / static_cast<double>(s));
        }
    }
    return acc / batch.batch();
}

// ------------------------------------------------------------- tape builders

struct KlTerms {
    Tensor mi;
    Tensor dwkl;
    Tensor tc;
};

// Exact (enumeration) estimator on the tape, via the entropy identities
// mi = H(q) - mean_b sum_j H(pi_bj) and tc = sum_j H(qbar_j) - H(q).
inline KlTerms kl_terms_exact_on_tape(Tape& tape, const std::vector<Tensor>& pis) {
    if (pis.empty()) throw std::invalid_argument("kl_terms_exact_on_tape: no latents");
    const int bsz = pis[0].shape()[0];
    if (bsz < 2) throw std::invalid_argument("kl_terms_exact_on_tape: batch of " + std::to_string(bsz) +
                                             " (aggregates need >= 2 examples)");
    std::vector<int> cards;
    for (const auto& p : pis) cards.push_back(p.shape()[1]);
    long s = 1;
    for (int k : cards) s *= k;
    if (s > kEnumerationLimit)
        throw std::invalid_argument("kl_terms_exact_on_tape: joint support " + std::to_string(s) +
                                    " exceeds enumeration limit");

    const auto digits = detail::support_digits(cards);
    Tensor joint = gather_cols(pis[0], digits[0]);
    for (std::size_t j = 1; j < pis.size(); ++j) joint = mul(joint, gather_cols(pis[j], digits[j]));
    Tensor aggregate = col_means(joint);                    // q over the support
    Tensor neg_hq = xlogx_sum(aggregate);                   // -H(q)

    Tensor sum_neg_h_rows = xlogx_sum(pis[0]);              // -sum_b H(pi_b0)
    Tensor sum_neg_h_marg = xlogx_sum(col_means(pis[0]));   // -H(qbar_0)
    double log_card_sum = std::log(static_cast<double>(cards[0]));
    for (std::size_t j = 1; j < pis.size(); ++j) {
        sum_neg_h_rows = add(sum_neg_h_rows, xlogx_sum(pis[j]));
        sum_neg_h_marg = add(sum_neg_h_marg, xlogx_sum(col_means(pis[j])));
        log_card_sum += std::log(static_cast<double>(cards[j]));
    }

    KlTerms out;
    out.mi = sub(smul(sum_neg_h_rows, 1.0 / bsz), neg_hq);
    out.dwkl = add_scalar(sum_neg_h_marg, log_card_sum);
    out.tc = sub(neg_hq, sum_neg_h_marg);
    (void)tape;
    return out;
}

// Sampled estimator: one hard assignment per example, scored against the
// batch-mean plug-in aggregate. Differentiable in the probabilities; the
// assignments themselves are treated as constants.
inline KlTerms kl_terms_sampled_on_tape(Tape& tape, const std::vector<Tensor>& pis, Rng& rng) {
    if (pis.empty()) throw std::invalid_argument("kl_terms_sampled_on_tape: no latents");
    const int bsz = pis[0].shape()[0];
    if (bsz < 2) throw std::invalid_argument("kl_terms_sampled_on_tape: batch of " + std::to_string(bsz));

    std::vector<std::vector<int>> assign(pis.size(), std::vector<int>(static_cast<std::size_t>(bsz)));
    for (std::size_t j = 0; j < pis.size(); ++j) {
        const int k = pis[j].shape()[1];
        const auto& v = pis[j].value();
        for (int b = 0; b < bsz; ++b) {
            std::vector<double> row(v.begin() + static_cast<long>(b) * k, v.begin() + static_cast<long>(b + 1) * k);
            assign[j][static_cast<std::size_t>(b)] = rng.categorical(row);
        }
    }

    // M[b',b] = prod_j pi_{b'j}[a_bj]; plug-in aggregate = column means
    Tensor m = gather_cols(pis[0], assign[0]);
    for (std::size_t j = 1; j < pis.size(); ++j) m = mul(m, gather_cols(pis[j], assign[j]));
    Tensor log_qhat = log_t(col_means(m));  // [B]

    Tensor log_marg = log_t(index_select(col_means(pis[0]), assign[0]));
    Tensor log_own = log_t(pick_cols(pis[0], assign[0]));
    Tensor sum_neg_h_marg = xlogx_sum(col_means(pis[0]));
    double log_card_sum = std::log(static_cast<double>(pis[0].shape()[1]));
    for (std::size_t j = 1; j < pis.size(); ++j) {
        log_marg = add(log_marg, log_t(index_select(col_means(pis[j]), assign[j])));
        log_own = add(log_own, log_t(pick_cols(pis[j], assign[j])));
        sum_neg_h_marg = add(sum_neg_h_marg, xlogx_sum(col_means(pis[j])));
        log_card_sum += std::log(static_cast<double>(pis[j].shape()[1]));
    }

    KlTerms out;
    out.tc = mean_all(sub(log_qhat, log_marg));
    out.mi = mean_all(sub(log_own, log_qhat));
    out.dwkl = add_scalar(sum_neg_h_marg, log_card_sum);
    (void)tape;
    return out;
}

inline KlTerms kl_terms_on_tape(Tape& tape, const std::vector<Tensor>& pis, Rng* rng = nullptr) {
    long s = 1;
    for (const auto& p : pis) s *= p.shape()[1];
    if (s <= kEnumerationLimit) return kl_terms_exact_on_tape(tape, pis);
    if (!rng)
        throw std::invalid_argument("kl_terms_on_tape: support " + std::to_string(s) +
                                    " needs the sampled estimator; pass an rng");
    return kl_terms_sampled_on_tape(tape, pis, *rng);
}

// Value-level front end over the tape builders.
inline KlValues decompose_kl(const PosteriorBatch& batch, Rng* rng = nullptr) {
    batch.validate();
    if (batch.batch() < 2)
        throw std::invalid_argument("decompose_kl: batch of " + std::to_string(batch.batch()) +
                                    " (aggregates undefined)");
    Tape tape;
    std::vector<Tensor> pis;
    for (int j = 0; j < batch.latents(); ++j) {
        const int k = batch.cardinalities[static_cast<std::size_t>(j)];
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(batch.batch()) * static_cast<std::size_t>(k));
        for (int b = 0; b < batch.batch(); ++b)
            for (int v = 0; v < k; ++v)
                data.push_back(batch.pi[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)][static_cast<std::size_t>(v)]);
        pis.push_back(tape.leaf({batch.batch(), k}, std::move(data)));
    }
    const KlTerms terms = kl_terms_on_tape(tape, pis, rng);
    return {terms.mi.scalar(), terms.dwkl.scalar(), terms.tc.scalar()};
}

// -------------------------------------------------------------- reconstruction

// Mean over the batch of the summed per-token negative log-likelihood.
// logits[t] is [B,V]; mask[t][b] is 1 for real tokens, 0 for padding.
inline Tensor reconstruction_loss_on_tape(Tape& tape, const std::vector<Tensor>& logits,
                                          const std::vector<std::vector<int>>& targets,
                                          const std::vector<std::vector<double>>& mask) {
    if (logits.empty()) throw std::invalid_argument("reconstruction_loss: no positions");
    if (logits.size() != targets.size() || logits.size() != mask.size())
        throw ShapeError("reconstruction_loss", "positions disagree: " + std::to_string(logits.size()) + " logits, " +
                                                    std::to_string(targets.size()) + " targets, " +
                                                    std::to_string(mask.size()) + " masks");
    Tensor total{};
    for (std::size_t t = 0; t < logits.size(); ++t) {
        Tensor nll = smul(pick_cols(log_softmax_rows(logits[t]), targets[t]), -1.0);
        Tensor masked = mul(nll, tape.leaf({logits[t].shape()[0]}, mask[t]));
        total = t == 0 ? masked : add(total, masked);
    }
    return mean_all(total);  // mean over batch of per-example sums
}

// ---------------------------------------------------------------- total loss

inline LossBreakdown total_loss(double recon, double mi, double dwkl, double tc, long step,
                                const ObjectiveConfig& cfg) {
    cfg.validate();
    LossBreakdown out;
    out.reconstruction = recon;
    out.mi = mi;
    out.dwkl = dwkl;
    out.tc = tc;
    out.capacity = capacity_at_step(step, cfg);
    switch (cfg.mode) {
        case ObjectiveMode::kDctc:
            out.ctc_penalty = cfg.gamma * std::fabs(tc - out.capacity);
            out.total = recon + mi + dwkl + out.ctc_penalty;
            break;
        case ObjectiveMode::kGammaZero:
            out.ctc_penalty = 0.0;
            out.total = recon + mi + dwkl;
            break;
        case ObjectiveMode::kBetaKl:
            out.ctc_penalty = 0.0;
            out.total = recon + cfg.beta * (mi + dwkl + tc);
            break;
    }
    return out;
}

inline Tensor total_loss_on_tape(Tape& tape, const Tensor& recon, const KlTerms& terms, long step,
                                 const ObjectiveConfig& cfg) {
    cfg.validate();
    const double c = capacity_at_step(step, cfg);
    switch (cfg.mode) {
        case ObjectiveMode::kDctc:
            return add(add(recon, add(terms.mi, terms.dwkl)),
                       smul(abs_t(add_scalar(terms.tc, -c)), cfg.gamma));
        case ObjectiveMode::kGammaZero:
            return add(recon, add(terms.mi, terms.dwkl));
        case ObjectiveMode::kBetaKl:
            return add(recon, smul(add(add(terms.mi, terms.dwkl), terms.tc), cfg.beta));
    }
    (void)tape;
    throw std::logic_error("total_loss_on_tape: unreachable");
}

}  // namespace dctc
