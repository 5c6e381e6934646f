#pragma once

#include <array>
#include <cstdint>

namespace vppsim {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

// Reproducible noise source for one Monte-Carlo run. Every variate is a pure
// function of (seed, stream_id, step, lane), so draws never depend on call
// order or thread schedule.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  // Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t step, std::uint32_t lane) const;

  bool operator==(const RngStream&) const = default;
};

}  // namespace vppsim
