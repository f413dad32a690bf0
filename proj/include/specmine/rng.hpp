#ifndef SPECMINE_RNG_HPP
#define SPECMINE_RNG_HPP

#include <cstdint>
#include <random>

namespace specmine {

// mt19937_64 is fully specified by the standard; the std distributions are
// not. Mapping raw draws ourselves keeps runs reproducible across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : m_engine(seed) {}

    std::uint64_t next_u64() { return m_engine(); }

    // Uniform in [0, n). n must be > 0.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    // Uniform in [lo, hi] inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // Uniform in [0, 1).
    double real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return real() < p; }

  private:
    std::mt19937_64 m_engine;
};

} // namespace specmine

#endif // SPECMINE_RNG_HPP
