#include "lrcv/basis_io.hpp"

#include <fstream>

#include <json.hpp>

#include "lrcv/error.hpp"

namespace lrcv::mlcv {

using nlohmann::json;

namespace {

json key_json(const BasisKey& k) {
  return {{"model_hash", k.model_hash},
          {"level", k.level},
          {"seed", k.seed},
          {"n_pilot", k.n_pilot},
          {"termination", k.termination}};
}

json columns(const linalg::DenseMatrix& m) {
  json out = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    json col = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) col.push_back(m(i, j));
    out.push_back(std::move(col));
  }
  return out;
}

linalg::DenseMatrix from_columns(const json& cols) {
  if (!cols.is_array() || cols.empty()) throw DataError("basis file: empty basis matrix");
  const std::size_t rows = cols[0].size();
  linalg::DenseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j].size() != rows) throw DataError("basis file: ragged basis matrix");
    for (std::size_t i = 0; i < rows; ++i) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i].get<double>();
    }
  }
  return m;
}

}  // namespace

void save_basis(const std::filesystem::path& file, const BasisKey& key,
                const std::optional<ReducedBasisPair>& basis) {
  json doc;
  doc["format"] = "lrcv-basis";
  doc["version"] = 1;
  doc["key"] = key_json(key);
  if (!basis) {
    doc["rank"] = 0;
  } else {
    doc["rank"] = basis->rank;
    doc["selected"] = basis->selected;
    json inputs = json::array();
    for (const auto& xi : basis->selected_inputs) inputs.push_back(xi.values);
    doc["inputs"] = std::move(inputs);
    doc["id_residual"] = basis->id_residual;
    doc["coarse_basis"] = columns(basis->coarse_basis);
    doc["fine_basis"] = columns(basis->fine_basis);
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write basis file " + file.string());
  os << doc.dump(1) << '\n';
}

CachedBasis load_basis(const std::filesystem::path& file, const BasisKey& key) {
  CachedBasis out;
  std::ifstream is(file, std::ios::binary);
  if (!is) return out;
  json doc;
  try {
    doc = json::parse(is);
    if (doc.at("format") != "lrcv-basis" || doc.at("version") != 1) {
      throw DataError("basis file " + file.string() + ": unknown format");
    }
    if (doc.at("key") != key_json(key)) return out;
    out.found = true;
    const auto rank = doc.at("rank").get<std::size_t>();
    if (rank == 0) return out;
    std::vector<rng::InputSample> inputs;
    for (const auto& v : doc.at("inputs")) inputs.push_back({v.get<std::vector<double>>()});
    out.basis = ReducedBasisPair::from_parts(
        key.level, from_columns(doc.at("coarse_basis")), from_columns(doc.at("fine_basis")),
        doc.at("selected").get<std::vector<std::size_t>>(), std::move(inputs),
        doc.at("id_residual").get<double>());
    if (out.basis->rank != rank) throw DataError("basis file " + file.string() + ": rank mismatch");
  } catch (const json::exception& e) {
    throw DataError("basis file " + file.string() + ": " + e.what());
  }
  return out;
}

}  // namespace lrcv::mlcv
