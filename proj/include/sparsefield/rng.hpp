#pragma once

#include <array>
#include <cstdint>

namespace sparsefield {

/// Philox4x32-10 block function (Salmon et al., SC'11).  Maps a 128-bit
/// counter and a 64-bit key to 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Hierarchical substream key.  Children are derived by hashing, so the
/// stream for (seed, experiment, replication, cell) is a pure function of
/// that path and independent of the order in which streams are created.
class StreamKey {
 public:
  constexpr StreamKey() = default;
  explicit constexpr StreamKey(std::uint64_t seed) : value_(seed) {}

  StreamKey child(std::uint64_t id) const;
  constexpr std::uint64_t value() const { return value_; }

  friend constexpr bool operator==(StreamKey, StreamKey) = default;

 private:
  std::uint64_t value_ = 0;
};

/// Sequential generator over a counter-based stream.  Cheap to construct;
/// one is created per (replication, cell) or (replication, target).
class RandomStream {
 public:
  explicit RandomStream(StreamKey key);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

}  // namespace sparsefield
