#pragma once

#include <cstdint>
#include <random>

namespace bobw {

using Rng = std::mt19937_64;

/// Purpose tags keep the streams of one run independent of each other.
enum class StreamTag : std::uint64_t {
  environment = 0x656e76,
  losses = 0x6c6f7373,
  actions = 0x61637473,
  diagnostics = 0x64696167,
};

/// Seeds a stream from (master seed, run index, purpose) through seed_seq.
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t run_index, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(run_index), static_cast<std::uint32_t>(run_index >> 32),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(tag))};
  return Rng(seq);
}

/// Uniform draw on [0, 1) with 53 random bits. Unlike the std distributions the
/// mapping is fixed, so streams reproduce across standard library versions.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace bobw
