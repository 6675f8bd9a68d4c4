#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

namespace moecov {

using RandomSource = std::mt19937_64;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Time source measured in seconds. Injectable so that timing-dependent
/// outputs (the evaluation-time objective) can be made fully deterministic.
using Clock = std::function<double()>;

inline Clock wall_clock() {
    return [] {
        using namespace std::chrono;
        return duration<double>(steady_clock::now().time_since_epoch()).count();
    };
}

/// Deterministic clock: advances by `step` seconds on every call.
inline Clock counter_clock(double step = 1.0) {
    auto state = std::make_shared<double>(0.0);
    return [state, step] {
        *state += step;
        return *state;
    };
}

/// splitmix64 finalizer; cheap bijective mixing for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a stream seed that is decorrelated from `master` and from any
/// other (a, b, c) tuple. Used to give every repetition/fold/individual its
/// own reproducible random stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix64(master);
    s = mix64(s ^ a);
    s = mix64(s ^ b);
    s = mix64(s ^ c);
    return s;
}

/// Error raised by readers of external file formats (embeddings, datasets,
/// fold files, archives). Carries the 1-based line of the offence.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& message, std::size_t line)
        : std::runtime_error(message + " (line " + std::to_string(line) + ")"),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace moecov
