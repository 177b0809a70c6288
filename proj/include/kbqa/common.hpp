#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbqa {

// Scalar type for all tensors. 64-bit by default so gradient-check
// tolerances stay tight; -DKBQA_REAL_FLOAT switches to 32-bit.
#ifdef KBQA_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

inline constexpr int real_bits = static_cast<int>(sizeof(Real) * 8);

// Thrown when an input file is malformed. `line` is 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Dataset/checkpoint-level problems that are not usage errors.
class DataError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (exit code 3 in the CLI).
class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration (usage error, exit code 1 in the CLI).
class ConfigError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised when no gold answer survives subgraph extraction; callers skip the
// example and bump a counter.
class UnanswerableError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic RNG. All sampling goes through explicit formulas on the raw
// mt19937_64 stream so identical seeds give identical values everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of entropy.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is < 2^-53 for desk-scale n.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace kbqa
