#include "reachguard/io.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace reachguard {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw FormatError(what + ": expected an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw FormatError(what + ": ragged row " + std::to_string(i));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<size_t>(c)];
      if (!v.is_number()) throw FormatError(what + ": non-numeric entry");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError(what + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

namespace {

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw FormatError("missing field " + path);
  return j.at(key);
}

Matrix mat(const json& j, const std::string& group, const std::string& key) {
  const auto path = group + "." + key;
  return matrix_from_json(field(field(j, group, group), key, path), path);
}

}  // namespace

json model_to_json(const SystemModel& m) {
  json j;
  j["plant"] = {{"A", matrix_to_json(m.plant.A)},
                {"B", matrix_to_json(m.plant.B)},
                {"C", matrix_to_json(m.plant.C)},
                {"D", matrix_to_json(m.plant.D)}};
  j["controller"] = {{"A", matrix_to_json(m.controller.A)},
                     {"B", matrix_to_json(m.controller.B)},
                     {"C", matrix_to_json(m.controller.C)},
                     {"D", matrix_to_json(m.controller.D)}};
  j["detector"] = {{"L", matrix_to_json(m.detector.L)}, {"Pi", matrix_to_json(m.detector.Pi)}};
  j["attack"] = {{"Gamma", matrix_to_json(m.attack.gamma())}};
  j["safe_set"] = {{"Psi_p", matrix_to_json(m.safe.Psi_p)},
                   {"psi_bar_p", vector_to_json(m.safe.psi_bar_p)}};
  return j;
}

SystemModel model_from_json(const json& j) {
  PlantModel plant{mat(j, "plant", "A"), mat(j, "plant", "B"), mat(j, "plant", "C"),
                   mat(j, "plant", "D")};
  ControllerModel ctrl{mat(j, "controller", "A"), mat(j, "controller", "B"),
                       mat(j, "controller", "C"), mat(j, "controller", "D")};
  DetectorModel det{mat(j, "detector", "L"), mat(j, "detector", "Pi")};
  AttackModel attack(mat(j, "attack", "Gamma"));
  const Matrix psi = mat(j, "safe_set", "Psi_p");
  const Vector psi_bar = vector_from_json(field(field(j, "safe_set", "safe_set"), "psi_bar_p",
                                                "safe_set.psi_bar_p"),
                                          "safe_set.psi_bar_p");
  SystemModel model{std::move(plant), std::move(ctrl), std::move(det), std::move(attack),
                    make_safe_set(psi, psi_bar)};
  check_dimensions(model.plant, model.controller, model.detector, model.attack);
  return model;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

json load_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

SystemModel load_model(const std::string& path) { return model_from_json(load_json(path)); }

std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string model_hash(const SystemModel& model) { return sha256_hex(model_to_json(model).dump()); }

}  // namespace reachguard
