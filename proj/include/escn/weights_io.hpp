#pragma once

// Binary weight file:
//   bytes 0..7   magic "ESCNW001"
//   bytes 8..11  u32 little-endian length N of the JSON header
//   next N bytes JSON header {"format", "version", "config", "arrays"}
//                each array entry: name, shape [rows, cols], offset (in
//                doubles from the start of the data section), column-major
//   remainder    little-endian IEEE-754 float64 data

#include <escn/model.hpp>

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace escn::io {

nlohmann::json config_to_json(const model::ModelConfig& config);
/// Missing keys keep their defaults; unknown keys or bad values -> ConfigError.
model::ModelConfig config_from_json(const nlohmann::json& j);

void write_weights(std::ostream& out, const model::ModelWeights& w);
model::ModelWeights read_weights(std::istream& in);

void save_weights(const std::string& path, const model::ModelWeights& w);
model::ModelWeights load_weights(const std::string& path);

}  // namespace escn::io
