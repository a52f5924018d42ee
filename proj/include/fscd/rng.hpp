#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace fscd {

namespace detail {

// SplitMix64 finalizer. Bijective on 64-bit words.
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

}  // namespace detail

// Counter-based splittable random stream. A draw is a pure function of
// (base_seed, stream_id, counter), so the same stream replays bit-identically
// on any host and under any thread count; distinct stream ids give
// independent sequences. Normal variates use Box-Muller rather than the
// standard library distributions, whose draw sequences are
// implementation-defined.
class RngStream {
 public:
  RngStream() = default;
  RngStream(uint64_t base_seed, uint64_t stream_id)
      : base_seed_(base_seed),
        stream_id_(stream_id),
        key_(detail::mix64(detail::mix64(base_seed + detail::kGolden) ^
                           detail::mix64(stream_id + 0x632BE59BD9B4E019ull))) {}

  uint64_t base_seed() const { return base_seed_; }
  uint64_t stream_id() const { return stream_id_; }
  uint64_t counter() const { return counter_; }

  uint64_t next_u64() {
    return detail::mix64(key_ + detail::kGolden * ++counter_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes two words per variate.
  double next_normal() {
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, bound) by 128-bit multiply-shift.
  uint64_t next_below(uint64_t bound) {
    return uint64_t((static_cast<__uint128_t>(next_u64()) * bound) >> 64);
  }

  // Child stream keyed off this stream's id and a caller label. Counter
  // starts fresh; the child never shares draws with the parent.
  RngStream split(uint64_t label) const {
    return RngStream(base_seed_,
                     detail::mix64(stream_id_ ^ detail::mix64(label + 1)));
  }

  // Stream id folded from a list of labels, for naming streams like
  // (purpose, epoch, batch) without nesting splits by hand.
  static RngStream derive(uint64_t base_seed,
                          std::initializer_list<uint64_t> labels) {
    uint64_t id = 0x1B873593E6546B64ull;
    for (uint64_t l : labels) id = detail::mix64(id ^ detail::mix64(l + 1));
    return RngStream(base_seed, id);
  }

 private:
  uint64_t base_seed_ = 0;
  uint64_t stream_id_ = 0;
  uint64_t counter_ = 0;
  uint64_t key_ = 0;
};

}  // namespace fscd
