#include "lrcv/rng.hpp"

#include <cmath>
#include <limits>
#include <regex>
#include <sstream>

#include "lrcv/error.hpp"

namespace lrcv::rng {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox_round(const std::array<std::uint32_t, 4>& c,
                                                 const std::array<std::uint32_t, 2>& k) {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], hi0, lo0);
  mulhilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) {
  counter = philox_round(counter, key);
  for (int round = 1; round < 10; ++round) {
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
    counter = philox_round(counter, key);
  }
  return counter;
}

UniformStream::UniformStream(const StreamKey& key) {
  if (key.purpose.level >= (1u << 24)) {
    throw ConfigError("stream key level exceeds 2^24");
  }
  key_ = {static_cast<std::uint32_t>(key.master_seed),
          static_cast<std::uint32_t>(key.master_seed >> 32)};
  // Counter layout: [block, kind:8 | level:24, index_lo, index_hi].
  counter_base_ = {
      (static_cast<std::uint32_t>(key.purpose.kind) << 24) | key.purpose.level,
      static_cast<std::uint32_t>(key.sample_index),
      static_cast<std::uint32_t>(key.sample_index >> 32)};
}

double UniformStream::at(std::uint64_t index) const {
  const std::uint64_t block = index / 2;
  if (block > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError("uniform stream exhausted");
  }
  const auto words = philox4x32_10(
      {static_cast<std::uint32_t>(block), counter_base_[0], counter_base_[1], counter_base_[2]},
      key_);
  const std::size_t w = (index % 2) * 2;
  const std::uint64_t bits = (static_cast<std::uint64_t>(words[w]) << 32) | words[w + 1];
  // 53 high bits, shifted to the cell midpoint so that 0 and 1 are never produced.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DataError("normal_quantile requires 0 < p < 1");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

Distribution Distribution::uniform(double lower, double upper) {
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    throw ConfigError("uniform distribution requires finite lower < upper");
  }
  return {Kind::uniform, lower, upper};
}

bool Distribution::in_support(double x) const {
  switch (kind) {
    case Kind::standard_gaussian:
      return std::isfinite(x);
    case Kind::uniform:
      return x >= lower && x <= upper;
  }
  return false;
}

double Distribution::from_uniform(double u) const {
  switch (kind) {
    case Kind::standard_gaussian:
      return normal_quantile(u);
    case Kind::uniform:
      return lower + (upper - lower) * u;
  }
  throw ConfigError("unsupported distribution kind");
}

std::string Distribution::describe() const {
  if (kind == Kind::standard_gaussian) return "standard_gaussian";
  std::ostringstream os;
  os.precision(17);
  os << "uniform(" << lower << "," << upper << ")";
  return os.str();
}

Distribution parse_distribution(const std::string& tag) {
  if (tag == "standard_gaussian") return Distribution::standard_gaussian();
  static const std::regex uniform_re(
      R"(^\s*uniform\s*\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)\s*$)");
  std::smatch m;
  if (std::regex_match(tag, m, uniform_re)) {
    try {
      return Distribution::uniform(std::stod(m[1].str()), std::stod(m[2].str()));
    } catch (const std::invalid_argument&) {
    } catch (const std::out_of_range&) {
    }
  }
  throw ConfigError("unsupported distribution tag '" + tag + "'");
}

InputSample draw_input(const StreamKey& key, std::span<const Distribution> dists) {
  if (dists.empty()) {
    throw ConfigError("input distribution list is empty");
  }
  const UniformStream stream(key);
  InputSample sample;
  sample.values.resize(dists.size());
  for (std::size_t i = 0; i < dists.size(); ++i) {
    sample.values[i] = dists[i].from_uniform(stream.at(i));
  }
  return sample;
}

}  // namespace lrcv::rng
