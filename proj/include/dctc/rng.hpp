#pragma once
// Deterministic random streams. Distribution transforms are hand-rolled on
// top of mt19937_64 so identical seeds give identical values on every
// platform (std::uniform_real_distribution makes no such promise).

#include <cstdint>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>
#include <random>

namespace dctc {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform on (0,1), strictly exclusive of both endpoints.
    double uniform() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int below(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
        return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
    }

    double gumbel() { return gumbel_from_uniform(uniform()); }

    static double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Inverse-CDF draw from an unnormalized weight vector.
    int categorical(const std::vector<double>& w) {
        double total = 0.0;
        for (double x : w) total += x;
        const double r = uniform() * total;
        double c = 0.0;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            c += w[i];
            if (r < c) return static_cast<int>(i);
        }
        return static_cast<int>(w.size()) - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent substream; stable derivation from (parent seed, id).
    static Rng stream(std::uint64_t seed, std::uint64_t id) {
        return Rng(splitmix64(seed ^ splitmix64(id + 0x51ed2701)));
    }

    std::string state() const {
        std::ostringstream os;
        os << gen_;
        return os.str();
    }

    void restore(const std::string& s) {
        std::istringstream is(s);
        is >> gen_;
        if (!is) throw std::runtime_error("Rng::restore: malformed state string");
        have_spare_ = false;
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dctc
