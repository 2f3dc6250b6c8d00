#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <Eigen/Core>

namespace lbsimex {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Tags used to derive named substreams. Values are arbitrary distinct
// constants; the mixer decorrelates them.
namespace stream_tag {
constexpr std::uint64_t contaminate = 0x11;
constexpr std::uint64_t bootstrap = 0x22;
constexpr std::uint64_t replicate = 0x33;
constexpr std::uint64_t datagen = 0x44;
constexpr std::uint64_t calibration = 0x55;
}  // namespace stream_tag

// Hierarchical counter-based stream key. child(tag) derives a
// statistically independent key, so parallel tasks can be keyed by
// (seed, replicate, b, ...) instead of sharing one sequential generator.
struct StreamKey {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    static StreamKey root(std::uint64_t seed) {
        std::uint64_t s = seed;
        StreamKey k;
        k.hi = splitmix64(s);
        k.lo = splitmix64(s);
        return k;
    }

    StreamKey child(std::uint64_t tag) const {
        std::uint64_t s = hi ^ (tag * 0xd1342543de82ef95ULL);
        StreamKey k;
        k.hi = splitmix64(s);
        s ^= lo;
        k.lo = splitmix64(s);
        return k;
    }
};

// xoshiro256++ seeded from a StreamKey.
class Rng {
public:
    explicit Rng(StreamKey key) {
        std::uint64_t s = key.hi;
        state_[0] = splitmix64(s);
        state_[1] = splitmix64(s);
        s ^= key.lo;
        state_[2] = splitmix64(s);
        state_[3] = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0, 1); safe under log and logit.
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; avoids libm trig for reproducibility.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    // Row-major fill, one subject (row) at a time.
    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd out(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal();
        return out;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lbsimex
