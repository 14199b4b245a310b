#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace psketch {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

/// Derive a child seed from a parent seed and a label. Used for per-trial and
/// per-block sub-seeds so that no two consumers share a sequence.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept
{
    return detail::mix64(detail::mix64(seed ^ detail::kGolden) ^ detail::fnv1a(label));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
    return detail::mix64(detail::mix64(seed + detail::kGolden) ^ detail::mix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based random stream keyed by hash(seed, label).
///
/// The i-th draw is a pure function of (key, i), so a stream is a small value type
/// that can be copied into worker threads. Streams with distinct labels have
/// unrelated keys and therefore no shared prefix.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label)
        : seed_(seed), key_(derive_seed(seed, label)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t position() const noexcept { return counter_; }

    /// Independent child stream; does not advance this one.
    RngStream child(std::string_view label) const { return RngStream(key_, label); }
    RngStream child(std::uint64_t index) const { return RngStream(FromKey{}, key_, derive_seed(key_, index)); }

    std::uint64_t next_u64() noexcept
    {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::kGolden);
    }

    /// Uniform on the open interval (0, 1); both endpoints are unreachable.
    double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). Rejection sampling removes modulo bias.
    std::uint64_t uniform_index(std::uint64_t bound) noexcept
    {
        const std::uint64_t limit = bound * (UINT64_MAX / bound);
        std::uint64_t x = next_u64();
        while (x >= limit)
            x = next_u64();
        return x % bound;
    }

    double sign() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }

    bool bernoulli(double prob) noexcept { return uniform() < prob; }

    // Box-Muller, one variate per pair of uniforms.
    double gaussian() noexcept
    {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double exponential() noexcept { return -std::log(uniform()); }

    double laplace() noexcept { return sign() * exponential(); }

private:
    struct FromKey {};
    RngStream(FromKey, std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace psketch
