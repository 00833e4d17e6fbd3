#include "lrcv/models.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "lrcv/error.hpp"

namespace lrcv::models {

double coupled_cost(const LevelHierarchy& h, std::size_t level) {
  if (level >= h.num_levels()) throw DimensionError("level out of range");
  return level == 0 ? h.unit_cost(0) : h.unit_cost(level) + h.unit_cost(level - 1);
}

CoupledOutput evaluate_coupled(const LevelHierarchy& h, std::size_t level, const rng::InputSample& xi) {
  if (level < 1 || level >= h.num_levels()) {
    throw DimensionError("evaluate_coupled: level " + std::to_string(level) + " outside [1, " +
                         std::to_string(h.finest_level()) + "]");
  }
  CoupledOutput out;
  out.fine = h.evaluate(level, xi);
  out.coarse = h.evaluate(level - 1, xi);
  out.cost = coupled_cost(h, level);
  return out;
}

void validate(const LevelHierarchy& h) {
  if (h.num_levels() == 0) throw ConfigError("hierarchy has no levels");
  if (h.inputs().empty()) throw ConfigError("hierarchy declares no random inputs");
  for (std::size_t l = 0; l < h.num_levels(); ++l) {
    if (h.output_dim(l) == 0) throw ConfigError("output dimension must be >= 1");
    const double c = h.unit_cost(l);
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("level costs must be positive");
    if (l > 0 && h.dof(l) <= h.dof(l - 1)) {
      throw ConfigError("degrees of freedom must increase strictly with the level");
    }
  }
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

LevelSubset::LevelSubset(std::shared_ptr<const LevelHierarchy> base, std::vector<std::size_t> levels)
    : base_(std::move(base)), levels_(std::move(levels)) {
  if (!base_) throw ConfigError("level subset needs a base hierarchy");
  if (levels_.empty()) throw ConfigError("level subset is empty");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (levels_[i] >= base_->num_levels()) {
      throw ConfigError("level subset index " + std::to_string(levels_[i]) + " out of range");
    }
    if (i > 0 && levels_[i] <= levels_[i - 1]) {
      throw ConfigError("level subset must be strictly increasing");
    }
  }
}

std::size_t LevelSubset::map(std::size_t level) const {
  if (level >= levels_.size()) throw DimensionError("level out of range");
  return levels_[level];
}

std::size_t LevelSubset::dof(std::size_t level) const { return base_->dof(map(level)); }
std::size_t LevelSubset::output_dim(std::size_t level) const { return base_->output_dim(map(level)); }
double LevelSubset::unit_cost(std::size_t level) const { return base_->unit_cost(map(level)); }

LevelOutput LevelSubset::evaluate(std::size_t level, const rng::InputSample& xi) const {
  return base_->evaluate(map(level), xi);
}

double LevelSubset::qoi(std::size_t level, const Eigen::VectorXd& q) const {
  return base_->qoi(map(level), q);
}

std::string LevelSubset::fingerprint() const {
  std::ostringstream os;
  os << base_->fingerprint() << ";subset=";
  for (std::size_t i = 0; i < levels_.size(); ++i) os << (i ? "," : "") << levels_[i];
  return os.str();
}

CostOverride::CostOverride(std::shared_ptr<const LevelHierarchy> base, std::vector<double> costs)
    : base_(std::move(base)), costs_(std::move(costs)) {
  if (!base_) throw ConfigError("cost override needs a base hierarchy");
  if (costs_.size() != base_->num_levels()) {
    throw ConfigError("cost override needs one cost per level");
  }
  for (double c : costs_) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("level costs must be positive");
  }
}

double CostOverride::unit_cost(std::size_t level) const {
  if (level >= costs_.size()) throw DimensionError("level out of range");
  return costs_[level];
}

DeterministicHierarchy::DeterministicHierarchy(std::vector<double> values, std::size_t input_dim,
                                               std::size_t m0)
    : values_(std::move(values)),
      inputs_(input_dim, rng::Distribution::standard_gaussian()),
      m0_(m0) {
  if (values_.empty()) throw ConfigError("deterministic hierarchy needs at least one level");
  if (input_dim == 0 || m0 == 0) throw ConfigError("deterministic hierarchy dimensions must be >= 1");
}

std::size_t DeterministicHierarchy::dof(std::size_t level) const {
  if (level >= values_.size()) throw DimensionError("level out of range");
  return m0_ << level;
}

double DeterministicHierarchy::unit_cost(std::size_t level) const {
  return static_cast<double>(dof(level));
}

LevelOutput DeterministicHierarchy::evaluate(std::size_t level, const rng::InputSample& xi) const {
  if (xi.size() != inputs_.size()) throw DimensionError("input dimension mismatch");
  LevelOutput out;
  out.q = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dof(level)), values_[level]);
  out.value = qoi(level, out.q);
  return out;
}

double DeterministicHierarchy::qoi(std::size_t level, const Eigen::VectorXd& q) const {
  if (q.size() != static_cast<Eigen::Index>(dof(level))) throw DimensionError("q has the wrong length");
  return q.mean();
}

std::string DeterministicHierarchy::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << "deterministic;d=" << inputs_.size() << ";m0=" << m0_ << ";values=";
  for (std::size_t i = 0; i < values_.size(); ++i) os << (i ? "," : "") << values_[i];
  return os.str();
}

}  // namespace lrcv::models
