#pragma once
// Persistent parameters and the adaptive-moment optimizer. Parameters live
// outside the tape; each step registers them as leaves and reads the leaf
// gradients back.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dctc/rng.hpp"
#include "dctc/tensor.hpp"

namespace dctc {

struct Param {
    std::string name;
    Shape shape;
    std::vector<double> value;
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
};

class ParamStore {
public:
    Param& add(const std::string& name, Shape shape) {
        Param p;
        p.name = name;
        p.shape = std::move(shape);
        p.value.assign(static_cast<std::size_t>(numel(p.shape)), 0.0);
        p.m = p.value;
        p.v = p.value;
        params_.push_back(std::move(p));
        return params_.back();
    }

    Param& add_uniform(const std::string& name, Shape shape, Rng& rng, double scale) {
        Param& p = add(name, std::move(shape));
        for (auto& x : p.value) x = rng.uniform(-scale, scale);
        return p;
    }

    std::vector<Param>& all() { return params_; }
    const std::vector<Param>& all() const { return params_; }

    Param& by_name(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return p;
        throw std::out_of_range("no parameter named " + name);
    }

    long total_size() const {
        long n = 0;
        for (const auto& p : params_) n += numel(p.shape);
        return n;
    }

private:
    std::vector<Param> params_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // grads[i] pairs with params[i]; aborts on non-finite gradients.
    void step(std::vector<Param>& params, const std::vector<const std::vector<double>*>& grads) {
        if (grads.size() != params.size())
            throw std::invalid_argument("Adam::step: " + std::to_string(grads.size()) + " gradients for " +
                                        std::to_string(params.size()) + " parameters");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param& p = params[i];
            const std::vector<double>& g = *grads[i];
            if (g.size() != p.value.size())
                throw std::invalid_argument("Adam::step: gradient size mismatch for " + p.name);
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (!std::isfinite(g[j]))
                    throw std::runtime_error("Adam::step: non-finite gradient in parameter '" + p.name +
                                             "' at index " + std::to_string(j));
                p.m[j] = cfg_.beta1 * p.m[j] + (1.0 - cfg_.beta1) * g[j];
                p.v[j] = cfg_.beta2 * p.v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                const double mhat = p.m[j] / bc1;
                const double vhat = p.v[j] / bc2;
                p.value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    void set_step_count(long t) { t_ = t; }

private:
    AdamConfig cfg_;
    long t_ = 0;
};

}  // namespace dctc
