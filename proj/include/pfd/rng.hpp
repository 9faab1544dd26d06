#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>

namespace pfd::rng {

namespace detail {

inline constexpr std::uint32_t kPhiloxMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxWeyl1 = 0xBB67AE85u;

// Philox4x32-10 counter-based block cipher (Salmon et al. 2011).
inline std::array<std::uint32_t, 4> philox4x32(std::uint64_t key,
                                               std::array<std::uint32_t, 4> ctr) {
    auto k0 = static_cast<std::uint32_t>(key);
    auto k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(kPhiloxMul0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(kPhiloxMul1) * ctr[2];
        const std::array<std::uint32_t, 4> next = {
            static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
            static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
            static_cast<std::uint32_t>(p0),
        };
        ctr = next;
        k0 += kPhiloxWeyl0;
        k1 += kPhiloxWeyl1;
    }
    return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Stateless stream of random draws keyed by (seed, child path). Every draw is a
// pure function of (key, index, slot), so parallel callers never share mutable
// state and enumeration order is irrelevant.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : key_(detail::splitmix64(seed)) {}

    // Derives an independent substream; used to separate purposes (noise,
    // component choice, ...) so slot spaces never collide.
    Stream child(std::uint64_t tag) const {
        return Stream(detail::splitmix64(key_ ^ detail::splitmix64(tag)), FromKey{});
    }

    std::uint64_t key() const { return key_; }

    // Uniform draw in (0, 1), never exactly 0 or 1.
    double uniform(std::uint64_t index, std::uint32_t slot = 0) const {
        const auto block = detail::philox4x32(key_, counter(index, slot, kDomainUniform));
        return to_unit(block[0], block[1]);
    }

    // Two standard normals per (index, slot) via Box-Muller.
    void normal_pair(std::uint64_t index, std::uint32_t slot, double& z0, double& z1) const {
        const auto block = detail::philox4x32(key_, counter(index, slot, kDomainNormal));
        const double u0 = to_unit(block[0], block[1]);
        const double u1 = to_unit(block[2], block[3]);
        const double r = std::sqrt(-2.0 * std::log(u0));
        const double theta = 2.0 * M_PI * u1;
        z0 = r * std::cos(theta);
        z1 = r * std::sin(theta);
    }

    Eigen::VectorXd standard_normal(std::uint64_t index, int dim) const {
        Eigen::VectorXd z(dim);
        for (int i = 0; i < dim; i += 2) {
            double a, b;
            normal_pair(index, static_cast<std::uint32_t>(i / 2), a, b);
            z[i] = a;
            if (i + 1 < dim) z[i + 1] = b;
        }
        return z;
    }

private:
    struct FromKey {};
    Stream(std::uint64_t key, FromKey) : key_(key) {}

    static constexpr std::uint32_t kDomainUniform = 1;
    static constexpr std::uint32_t kDomainNormal = 2;

    static std::array<std::uint32_t, 4> counter(std::uint64_t index, std::uint32_t slot,
                                                std::uint32_t domain) {
        return {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                slot, domain};
    }

    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = (std::uint64_t(hi) << 32) | lo;
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t key_;
};

// Hash-chains a master seed with a path of tags; used for per-(experiment,
// trial) seed derivation. Distinct paths give independent keys.
template <typename... Tags>
std::uint64_t derive_key(std::uint64_t seed, Tags... tags) {
    std::uint64_t k = detail::splitmix64(seed);
    ((k = detail::splitmix64(k ^ detail::splitmix64(static_cast<std::uint64_t>(tags)))), ...);
    return k;
}

}  // namespace pfd::rng
