#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace wavefill {

// xoshiro256++ with a splitmix64 seeding stage. Self-contained so that
// streams are reproducible across platforms and standard library versions
// (std::uniform_real_distribution makes no such guarantee). State is
// serializable for checkpoint/resume equivalence.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& s : state_) {
            // splitmix64
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
    uint64_t uniform_int(uint64_t n) { return n ? next_u64() % n : 0; }

    int uniform_int(int lo, int hi) {  // inclusive range
        return lo + static_cast<int>(uniform_int(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Box-Muller; one value per call, cached pair for determinism.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Derive an independent stream, e.g. one per subsystem.
    Rng fork() { return Rng(next_u64()); }

    std::array<uint64_t, 4> state() const { return state_; }
    bool has_spare() const { return has_spare_; }
    double spare() const { return spare_; }

    void restore(const std::array<uint64_t, 4>& s, bool has_spare, double spare) {
        state_ = s;
        has_spare_ = has_spare;
        spare_ = spare;
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace wavefill
