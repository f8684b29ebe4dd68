#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace kite {

/// SplitMix64 finalizer. Used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Labeled seed derivation: hash(base, label, indices...). Stable across
/// platforms and releases; every random component takes its seed from here.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::initializer_list<std::uint64_t> indices = {}) noexcept;

/// Deterministic generator. The engine (mt19937_64) has a standard-mandated
/// output sequence; the variate transforms below are implemented here because
/// std::*_distribution output differs between standard library vendors.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();
    /// Uniform integer in [0, bound), bias-free by rejection.
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace kite
