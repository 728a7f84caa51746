#pragma once

#include "bec/model.hpp"

#include <optional>
#include <string>

#include <json.hpp>

namespace bec {

// Model file: {n, m, mu, a_harmonics, v, theta, edge}. Matrices are {m, re, im} with
// row-major nested arrays; theta carries {re, im, conjugate}.
struct ModelFile {
  ModelSpec model;
  std::optional<EdgeModelSpec> edge;
};

ModelFile parse_model_json(const std::string& text);
ModelFile load_model_file(const std::string& path);
nlohmann::json model_to_json(const ModelSpec& m, const EdgeModelSpec* edge = nullptr);

// Writes to path.tmp and renames, so readers never see a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

// Fixed 12 significant digits for every floating output.
std::string format_double(double x);

}  // namespace bec
