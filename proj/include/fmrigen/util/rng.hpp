#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fmrigen {

// Deterministic RNG wrapper. std::mt19937_64 is fully specified by the
// standard, but the std distributions are not, so the draws below are
// implemented by hand to make streams reproducible across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t raw() { return eng_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    uint64_t below(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller; the second draw is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // State round-trips through text so checkpoints can resume streams.
    std::string state() const {
        std::ostringstream os;
        os << eng_ << ' ' << (have_spare_ ? 1 : 0) << ' ' << spare_hex();
        return os.str();
    }

    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        int flag = 0;
        is >> flag;
        have_spare_ = flag != 0;
        std::string hex;
        is >> hex;
        if (!hex.empty()) {
            uint64_t bits = std::stoull(hex, nullptr, 16);
            std::memcpy(&spare_, &bits, sizeof bits);
        }
    }

    // Derive an independent stream (per subject, per epoch, ...).
    static uint64_t mix(uint64_t seed, uint64_t stream) {
        // splitmix64 over seed^stream
        uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::string spare_hex() const {
        uint64_t bits;
        std::memcpy(&bits, &spare_, sizeof bits);
        std::ostringstream os;
        os << std::hex << bits;
        return os.str();
    }

    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace fmrigen
