#pragma once
// Gumbel-Softmax categorical relaxation: noise draws, the relaxed sample,
// the temperature schedule, and categorical KL against the uniform prior.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dctc/rng.hpp"
#include "dctc/tensor.hpp"

namespace dctc {

struct GumbelConfig {
    double tau_start = 1.0;
    double tau_end = 0.5;
    long tau_anneal_steps = 25000;
    bool hard_eval = true;

    void validate() const {
        if (!(tau_start > 0.0) || !(tau_end > 0.0))
            throw std::invalid_argument("GumbelConfig: temperatures must be positive");
        if (tau_end > tau_start)
            throw std::invalid_argument("GumbelConfig: tau_end must not exceed tau_start");
        if (tau_anneal_steps <= 0)
            throw std::invalid_argument("GumbelConfig: tau_anneal_steps must be positive");
    }
};

struct RelaxedSample {
    std::vector<double> y;       // relaxed one-hot, on the simplex
    std::vector<double> logits;  // log pi up to a constant
    std::vector<double> noise;   // the Gumbel draws
};

inline std::vector<double> sample_gumbel_noise(int k, Rng& rng) {
    if (k < 1) throw std::invalid_argument("sample_gumbel_noise: k must be >= 1");
    std::vector<double> g(static_cast<std::size_t>(k));
    for (auto& x : g) x = rng.gumbel();
    return g;
}

// y_i = exp((logits_i + noise_i)/tau) / sum_j exp((logits_j + noise_j)/tau),
// evaluated with max subtraction.
inline RelaxedSample gumbel_softmax(const std::vector<double>& logits, const std::vector<double>& noise,
                                    double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax: tau must be positive");
    if (logits.empty() || logits.size() != noise.size())
        throw std::invalid_argument("gumbel_softmax: logits/noise length mismatch");
    RelaxedSample s;
    s.logits = logits;
    s.noise = noise;
    s.y.resize(logits.size());
    double mx = (logits[0] + noise[0]) / tau;
    for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, (logits[i] + noise[i]) / tau);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        s.y[i] = std::exp((logits[i] + noise[i]) / tau - mx);
        z += s.y[i];
    }
    for (auto& v : s.y) v /= z;
    return s;
}

// Tape route used in training: differentiable w.r.t. logits, noise fixed.
inline Tensor gumbel_softmax_on_tape(const Tensor& logits, const Tensor& noise, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax_on_tape: tau must be positive");
    return softmax_rows(smul(add(logits, noise), 1.0 / tau));
}

// Exponential interpolation tau_start -> tau_end, constant afterwards.
inline double tau_at_step(long step, const GumbelConfig& cfg) {
    cfg.validate();
    if (step <= 0) return cfg.tau_start;
    if (step >= cfg.tau_anneal_steps) return cfg.tau_end;
    const double f = static_cast<double>(step) / static_cast<double>(cfg.tau_anneal_steps);
    return cfg.tau_start * std::pow(cfg.tau_end / cfg.tau_start, f);
}

// KL(probs || uniform over k) = log k - H(probs), with 0 log 0 := 0.
inline double categorical_kl_uniform(const std::vector<double>& probs, double tol = 1e-6) {
    if (probs.empty()) throw std::invalid_argument("categorical_kl_uniform: empty input");
    double sum = 0.0;
    for (double p : probs) {
        if (p < -tol)
            throw std::invalid_argument("categorical_kl_uniform: negative component " + std::to_string(p));
        sum += p;
    }
    if (std::fabs(sum - 1.0) > tol)
        throw std::invalid_argument("categorical_kl_uniform: probabilities sum to " + std::to_string(sum));
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    const double kl = std::log(static_cast<double>(probs.size())) - h;
    return kl < 0.0 ? 0.0 : kl;  // clamp the tiny negatives tol-level inputs can produce
}

}  // namespace dctc
