#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lrcv::rng {

/// What a stream of random inputs is used for. Streams with different purposes
/// (or different levels) never share draws.
enum class PurposeKind : std::uint8_t {
  pilot = 0,
  main_y = 1,
  zbar = 2,
  oracle = 3,
};

struct Purpose {
  PurposeKind kind = PurposeKind::pilot;
  std::uint32_t level = 0;

  static Purpose pilot(std::uint32_t level) { return {PurposeKind::pilot, level}; }
  static Purpose main_y(std::uint32_t level) { return {PurposeKind::main_y, level}; }
  static Purpose zbar(std::uint32_t level) { return {PurposeKind::zbar, level}; }
  static Purpose oracle(std::uint32_t level = 0) { return {PurposeKind::oracle, level}; }

  friend bool operator==(const Purpose&, const Purpose&) = default;
};

struct StreamKey {
  std::uint64_t master_seed = 0;
  Purpose purpose;
  std::uint64_t sample_index = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Counter-based uniform stream (Philox4x32-10). The key fixes the stream; draws
/// are addressed by position, so evaluation order never changes the values.
class UniformStream {
 public:
  explicit UniformStream(const StreamKey& key);

  /// The `index`-th uniform of the stream, in the open interval (0, 1).
  double at(std::uint64_t index) const;

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 3> counter_base_;
};

/// Raw Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Inverse of the standard normal CDF (Wichura AS241, ~1e-16 relative accuracy).
/// Requires 0 < p < 1.
double normal_quantile(double p);

struct Distribution {
  enum class Kind { standard_gaussian, uniform };

  Kind kind = Kind::standard_gaussian;
  double lower = 0.0;
  double upper = 1.0;

  static Distribution standard_gaussian() { return {Kind::standard_gaussian, 0.0, 0.0}; }
  static Distribution uniform(double lower, double upper);

  bool in_support(double x) const;
  double from_uniform(double u) const;
  std::string describe() const;

  friend bool operator==(const Distribution&, const Distribution&) = default;
};

/// Parses "standard_gaussian" or "uniform(a,b)"; throws ConfigError otherwise.
Distribution parse_distribution(const std::string& tag);

struct InputSample {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Draws one input vector. Coordinate i consumes exactly uniform i of the stream.
InputSample draw_input(const StreamKey& key, std::span<const Distribution> dists);

}  // namespace lrcv::rng
