#include "obcs/rng.hpp"

#include <cmath>

namespace obcs {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_words(std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    for (auto w : words) h = splitmix64(h ^ splitmix64(w));
    return h;
}

RngSpec RngSpec::child(std::uint64_t key) const {
    return RngSpec{seed, mix_words({stream_id, key})};
}

NormalSampler::NormalSampler(const RngSpec& spec, std::uint64_t block) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffULL); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(spec.seed),      hi(spec.seed), lo(spec.stream_id),
                      hi(spec.stream_id), lo(block),     hi(block)};
    engine_.seed(seq);
}

double NormalSampler::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t NormalSampler::below(std::uint64_t bound) {
    // Lemire-style rejection on the top of the range.
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
    for (;;) {
        const std::uint64_t r = engine_();
        if (r >= limit) return r % bound;
    }
}

double NormalSampler::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, q;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
}

void NormalSampler::fill_normal(double* out, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) out[i] = normal();
}

std::vector<double> gaussian_vector(const RngSpec& rng, std::size_t n) {
    std::vector<double> out(n);
    NormalSampler sampler(rng);
    sampler.fill_normal(out.data(), n);
    return out;
}

}  // namespace obcs
