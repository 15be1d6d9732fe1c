#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace obcs {

/// Identifies one reproducible random stream. Every random quantity in the
/// library is derived from an RngSpec, never from global state.
struct RngSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    /// A child stream keyed by `key`; children of distinct keys never share
    /// engine state with each other or with the parent.
    RngSpec child(std::uint64_t key) const;

    friend bool operator==(const RngSpec&, const RngSpec&) = default;
};

/// Mixes a list of words into one 64-bit value (splitmix64 finalizer chain).
std::uint64_t mix_words(std::initializer_list<std::uint64_t> words);

/// Standard normal sampler over a 64-bit Mersenne twister.
///
/// The engine is seeded through std::seed_seq with the 32-bit halves of
/// (seed, stream_id, block), all of which the standard specifies exactly.
/// Uniforms use the top 53 bits of each engine output; normals use the
/// Marsaglia polar method, caching the second variate of each accepted pair.
/// Outputs are therefore bit-identical across platforms and runs.
class NormalSampler {
public:
    explicit NormalSampler(const RngSpec& spec, std::uint64_t block = 0);

    /// Uniform on [0, 1).
    double uniform();
    double normal();
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound) without modulo bias.
    std::uint64_t below(std::uint64_t bound);

    void fill_normal(double* out, std::size_t count);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// `n` iid standard normal values; identical for identical `rng`.
std::vector<double> gaussian_vector(const RngSpec& rng, std::size_t n);

}  // namespace obcs
