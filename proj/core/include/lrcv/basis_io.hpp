#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "lrcv/mlcv.hpp"

namespace lrcv::mlcv {

/// Identifies a cached basis. A file is reused only when every field matches.
struct BasisKey {
  std::string model_hash;
  std::size_t level = 0;
  std::uint64_t seed = 0;
  std::size_t n_pilot = 0;
  std::string termination;

  friend bool operator==(const BasisKey&, const BasisKey&) = default;
};

/// One JSON document per level:
///   {"format": "lrcv-basis", "version": 1, "key": {...}, "rank": r,
///    "selected": [...], "inputs": [[...], ...], "id_residual": x,
///    "coarse_basis": [[column], ...], "fine_basis": [[column], ...]}
/// rank 0 records a level on which the ID kept no column (CV disabled).
/// Doubles are written in shortest round-trip form, so loading is exact.
void save_basis(const std::filesystem::path& file, const BasisKey& key,
                const std::optional<ReducedBasisPair>& basis);

struct CachedBasis {
  bool found = false;  // file present and key matches
  std::optional<ReducedBasisPair> basis;
};

/// Reads a cached basis; found = false when the file is missing or its key differs.
/// Throws DataError on a malformed file.
CachedBasis load_basis(const std::filesystem::path& file, const BasisKey& key);

}  // namespace lrcv::mlcv
