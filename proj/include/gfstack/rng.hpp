#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace gfstack {

/// Deterministic random stream identified by (base_seed, stream_id).
///
/// Streams are splittable: child(id) derives a new stream id by hashing the
/// parent id with `id`, so every stochastic component can own a stream that
/// is fixed by the seed and its position in the computation, never by thread
/// scheduling. Instances are single-owner and not thread safe.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t base_seed, std::uint64_t stream_id = 0);

    std::uint64_t base_seed() const { return base_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// Independent stream keyed by `id`; does not advance this stream.
    SeededRng child(std::uint64_t id) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Standard normal draw (Box-Muller, no cached second value).
    double normal();

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::uint64_t base_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive stream ids and engine seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace gfstack
