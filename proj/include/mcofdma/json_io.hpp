#pragma once

// JSON schema for ChannelSet / Allocation / PowerMatrix.
//
//   {"schema": "mcofdma.channels/1", "L": 2, "K": 2, "N": 2,
//    "H": [cell][subcarrier][user],
//    "G": [{"from": l, "to": j, "gains": [subcarrier][user]}, ...],
//    "metadata": {...}}
//   {"schema": "mcofdma.allocation/1", "L", "K", "N", "A": [cell][subcarrier][user]}
//   {"schema": "mcofdma.powers/1",     "L", "K", "N", "P": [cell][subcarrier][user]}
//
// Matrices are row-major (one array per subcarrier), values linear scale.

#include <cstddef>
#include <fstream>
#include <string>

#include <json.hpp>

#include "mcofdma/error.hpp"
#include "mcofdma/model.hpp"

namespace mcofdma {

using Json = nlohmann::json;

namespace detail {

template <typename M>
Json matrix_to_json(const M& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if constexpr (std::is_same_v<typename M::Scalar, std::uint8_t>) {
        row.push_back(static_cast<int>(m(r, c)));
      } else {
        row.push_back(m(r, c));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename M>
M matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows) throw UsageError(std::string("json: bad row count in ") + what);
  M m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const Json& row = j[r];
    if (!row.is_array() || row.size() != cols) throw UsageError(std::string("json: bad column count in ") + what);
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          static_cast<typename M::Scalar>(row[c].get<double>());
    }
  }
  return m;
}

inline void expect_schema(const Json& j, const char* schema) {
  if (!j.contains("schema") || j["schema"] != schema) {
    throw UsageError(std::string("json: expected schema ") + schema);
  }
}

inline std::size_t dim(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) throw UsageError(std::string("json: missing dimension ") + key);
  return j[key].get<std::size_t>();
}

}  // namespace detail

inline Json to_json(const ChannelSet& ch, const Json& metadata = Json::object()) {
  Json j;
  j["schema"] = "mcofdma.channels/1";
  j["L"] = ch.num_cells();
  j["K"] = ch.users_per_cell();
  j["N"] = ch.subcarriers();
  j["H"] = Json::array();
  for (std::size_t l = 0; l < ch.num_cells(); ++l) j["H"].push_back(detail::matrix_to_json(ch.direct(l)));
  j["G"] = Json::array();
  for (std::size_t l = 0; l < ch.num_cells(); ++l) {
    for (std::size_t t = 0; t < ch.num_cells(); ++t) {
      if (l == t) continue;
      j["G"].push_back({{"from", l}, {"to", t}, {"gains", detail::matrix_to_json(ch.cross(l, t))}});
    }
  }
  j["metadata"] = metadata;
  return j;
}

inline ChannelSet channels_from_json(const Json& j) {
  detail::expect_schema(j, "mcofdma.channels/1");
  const std::size_t L = detail::dim(j, "L"), K = detail::dim(j, "K"), N = detail::dim(j, "N");
  ChannelSet ch(L, K, N);
  if (!j["H"].is_array() || j["H"].size() != L) throw UsageError("json: H must hold L matrices");
  for (std::size_t l = 0; l < L; ++l) ch.direct(l) = detail::matrix_from_json<Matrix>(j["H"][l], N, K, "H");
  if (!j["G"].is_array() || j["G"].size() != L * (L - 1)) throw UsageError("json: G must hold L(L-1) matrices");
  for (const auto& entry : j["G"]) {
    const auto from = entry.at("from").get<std::size_t>();
    const auto to = entry.at("to").get<std::size_t>();
    ch.cross(from, to) = detail::matrix_from_json<Matrix>(entry.at("gains"), N, K, "G");
  }
  ch.check();
  return ch;
}

inline Json to_json(const Allocation& a) {
  Json j;
  j["schema"] = "mcofdma.allocation/1";
  j["L"] = a.num_cells();
  j["K"] = a.users_per_cell();
  j["N"] = a.subcarriers();
  j["A"] = Json::array();
  for (std::size_t l = 0; l < a.num_cells(); ++l) j["A"].push_back(detail::matrix_to_json(a.cell(l)));
  return j;
}

inline Allocation allocation_from_json(const Json& j) {
  detail::expect_schema(j, "mcofdma.allocation/1");
  const std::size_t L = detail::dim(j, "L"), K = detail::dim(j, "K"), N = detail::dim(j, "N");
  Allocation a(L, K, N);
  if (!j["A"].is_array() || j["A"].size() != L) throw UsageError("json: A must hold L matrices");
  for (std::size_t l = 0; l < L; ++l) a.cell(l) = detail::matrix_from_json<BinaryMatrix>(j["A"][l], N, K, "A");
  return a;
}

inline Json to_json(const PowerMatrix& p) {
  Json j;
  j["schema"] = "mcofdma.powers/1";
  j["L"] = p.num_cells();
  j["K"] = p.users_per_cell();
  j["N"] = p.subcarriers();
  j["P"] = Json::array();
  for (std::size_t l = 0; l < p.num_cells(); ++l) j["P"].push_back(detail::matrix_to_json(p.cell(l)));
  return j;
}

inline PowerMatrix powers_from_json(const Json& j) {
  detail::expect_schema(j, "mcofdma.powers/1");
  const std::size_t L = detail::dim(j, "L"), K = detail::dim(j, "K"), N = detail::dim(j, "N");
  PowerMatrix p(L, K, N);
  if (!j["P"].is_array() || j["P"].size() != L) throw UsageError("json: P must hold L matrices");
  for (std::size_t l = 0; l < L; ++l) p.cell(l) = detail::matrix_from_json<Matrix>(j["P"][l], N, K, "P");
  return p;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Json::parse(in);
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace mcofdma
