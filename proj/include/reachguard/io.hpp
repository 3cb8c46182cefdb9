#pragma once

#include "reachguard/benchmark.hpp"

#include <json.hpp>

#include <string>

namespace reachguard {

/// Malformed JSON documents (missing keys, ragged rows, non-numbers).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json matrix_to_json(const Matrix& m);
nlohmann::json vector_to_json(const Vector& v);
/// `what` names the field in error messages, e.g. "plant.A".
Matrix matrix_from_json(const nlohmann::json& j, const std::string& what);
Vector vector_from_json(const nlohmann::json& j, const std::string& what);

/// Model file: {plant{A,B,C,D}, controller{A,B,C,D}, detector{L,Pi},
///              attack{Gamma}, safe_set{Psi_p, psi_bar_p}}.
nlohmann::json model_to_json(const SystemModel& model);
SystemModel model_from_json(const nlohmann::json& j);

SystemModel load_model(const std::string& path);
nlohmann::json load_json(const std::string& path);
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::string& data);

/// Hash of the model's canonical JSON dump, independent of file formatting.
std::string model_hash(const SystemModel& model);

}  // namespace reachguard
