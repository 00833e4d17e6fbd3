#pragma once

#include <cstddef>
#include <span>

namespace lrcv::stats {

/// Values are reduced in fixed chunks of this many elements, merged left to
/// right, so that a chunked parallel reduction reproduces the serial result bitwise.
inline constexpr std::size_t kChunk = 1024;

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x);
  void merge(const CompensatedSum& other);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Shifted one-pass moments of an aligned pair (y, z).
struct Moments {
  std::size_t n = 0;
  double shift_y = 0.0;
  double shift_z = 0.0;
  CompensatedSum sy, sz, syy, szz, syz;

  void add(double y, double z);
  void merge(const Moments& other);

  double mean_y() const;
  double mean_z() const;
  double var_y() const;
  double var_z() const;
  double cov_yz() const;
};

/// Moments of an aligned pair, accumulated chunk by chunk.
Moments accumulate(std::span<const double> y, std::span<const double> z);

double mc_mean(std::span<const double> values);
double sample_variance(std::span<const double> values);
double sample_covariance(std::span<const double> y, std::span<const double> z);

struct RhoSquared {
  double value = 0.0;
  bool degenerate = false;  // either variance was <= 0; CV should be disabled
};

RhoSquared rho_squared(std::span<const double> y, std::span<const double> z);
/// Same, from precomputed moments.
RhoSquared rho_squared(double var_y, double var_z, double cov_yz);

/// 1 - rho2 / (1 + ratio), ratio = N~ / N'.
double mse_reduction_factor(double rho2, double ratio);

}  // namespace lrcv::stats
