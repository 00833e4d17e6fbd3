#include "lrcv/stats.hpp"

#include <algorithm>
#include <cmath>

#include "lrcv/error.hpp"

namespace lrcv::stats {

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

void CompensatedSum::merge(const CompensatedSum& other) {
  add(other.sum_);
  add(other.comp_);
}

void Moments::add(double y, double z) {
  if (n == 0) {
    shift_y = y;
    shift_z = z;
  }
  const double dy = y - shift_y;
  const double dz = z - shift_z;
  sy.add(dy);
  sz.add(dz);
  syy.add(dy * dy);
  szz.add(dz * dz);
  syz.add(dy * dz);
  ++n;
}

void Moments::merge(const Moments& other) {
  if (other.n == 0) return;
  if (n == 0) {
    *this = other;
    return;
  }
  // Re-express the other block's sums about this block's shift.
  const double a = other.shift_y - shift_y;
  const double b = other.shift_z - shift_z;
  const double m = static_cast<double>(other.n);
  const double oy = other.sy.value();
  const double oz = other.sz.value();
  sy.add(oy);
  sy.add(m * a);
  sz.add(oz);
  sz.add(m * b);
  syy.add(other.syy.value());
  syy.add(2.0 * a * oy);
  syy.add(m * a * a);
  szz.add(other.szz.value());
  szz.add(2.0 * b * oz);
  szz.add(m * b * b);
  syz.add(other.syz.value());
  syz.add(a * oz);
  syz.add(b * oy);
  syz.add(m * a * b);
  n += other.n;
}

double Moments::mean_y() const {
  if (n == 0) throw DataError("mean of an empty sample");
  return shift_y + sy.value() / static_cast<double>(n);
}

double Moments::mean_z() const {
  if (n == 0) throw DataError("mean of an empty sample");
  return shift_z + sz.value() / static_cast<double>(n);
}

namespace {

double central(const CompensatedSum& s_ab, const CompensatedSum& s_a, const CompensatedSum& s_b,
               std::size_t n) {
  if (n < 2) throw DataError("variance needs at least 2 samples");
  const double nn = static_cast<double>(n);
  return (s_ab.value() - s_a.value() * s_b.value() / nn) / (nn - 1.0);
}

}  // namespace

double Moments::var_y() const { return std::max(0.0, central(syy, sy, sy, n)); }
double Moments::var_z() const { return std::max(0.0, central(szz, sz, sz, n)); }
double Moments::cov_yz() const { return central(syz, sy, sz, n); }

Moments accumulate(std::span<const double> y, std::span<const double> z) {
  if (y.size() != z.size()) {
    throw DimensionError("paired samples have different lengths");
  }
  Moments total;
  for (std::size_t begin = 0; begin < y.size(); begin += kChunk) {
    const std::size_t end = std::min(y.size(), begin + kChunk);
    Moments chunk;
    for (std::size_t i = begin; i < end; ++i) chunk.add(y[i], z[i]);
    total.merge(chunk);
  }
  return total;
}

double mc_mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mc_mean: empty input");
  return accumulate(values, values).mean_y();
}

double sample_variance(std::span<const double> values) {
  return sample_covariance(values, values);
}

double sample_covariance(std::span<const double> y, std::span<const double> z) {
  if (y.size() != z.size()) {
    throw DimensionError("sample_covariance: misaligned lengths");
  }
  if (y.size() < 2) throw DataError("sample_covariance: need at least 2 samples");
  const double c = accumulate(y, z).cov_yz();
  // The paired formula is symmetric, so cov(y, y) is the variance; clamp its round-off.
  if (y.data() == z.data()) return std::max(0.0, c);
  return c;
}

RhoSquared rho_squared(double var_y, double var_z, double cov_yz) {
  if (!(var_y > 0.0) || !(var_z > 0.0)) return {0.0, true};
  const double r = cov_yz * cov_yz / (var_y * var_z);
  return {std::clamp(r, 0.0, 1.0), false};
}

RhoSquared rho_squared(std::span<const double> y, std::span<const double> z) {
  const Moments m = accumulate(y, z);
  if (m.n < 2) return {0.0, true};
  return rho_squared(m.var_y(), m.var_z(), m.cov_yz());
}

double mse_reduction_factor(double rho2, double ratio) {
  if (!(rho2 >= 0.0 && rho2 <= 1.0)) throw DataError("mse_reduction_factor: rho2 outside [0, 1]");
  if (!(ratio >= 0.0)) throw DataError("mse_reduction_factor: negative ratio");
  if (std::isinf(ratio)) return 1.0;
  return 1.0 - rho2 / (1.0 + ratio);
}

}  // namespace lrcv::stats
