#include <escn/weights_io.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

namespace escn::io {

namespace {

constexpr char kMagic[8] = {'E', 'S', 'C', 'N', 'W', '0', '0', '1'};

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

}  // namespace

nlohmann::json config_to_json(const model::ModelConfig& c) {
  return {{"lmax", c.lmax},
          {"mmax", c.mmax},
          {"channels", c.channels},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"cutoff", c.cutoff},
          {"max_neighbors", c.max_neighbors},
          {"edge_channels", c.edge_channels},
          {"basis_spacing", c.basis_spacing},
          {"basis_width", c.basis_width},
          {"max_atomic_number", c.max_atomic_number},
          {"output_points", c.output_points},
          {"activation", model::to_string(c.activation)},
          {"aggregation", model::to_string(c.aggregation)},
          {"message_grid", {c.message_grid_theta(), c.message_grid_phi()}},
          {"aggregate_grid", {c.aggregate_grid(), c.aggregate_grid()}},
          {"edge_network_hidden", c.hidden},
          {"head_hidden", c.channels}};
}

model::ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  model::ModelConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lmax") c.lmax = value.get<int>();
      else if (key == "mmax") c.mmax = value.get<int>();
      else if (key == "channels") c.channels = value.get<int>();
      else if (key == "hidden") c.hidden = value.get<int>();
      else if (key == "layers") c.layers = value.get<int>();
      else if (key == "cutoff") c.cutoff = value.get<double>();
      else if (key == "max_neighbors") c.max_neighbors = value.get<int>();
      else if (key == "edge_channels") c.edge_channels = value.get<int>();
      else if (key == "basis_spacing") c.basis_spacing = value.get<double>();
      else if (key == "basis_width") c.basis_width = value.get<double>();
      else if (key == "max_atomic_number") c.max_atomic_number = value.get<int>();
      else if (key == "output_points") c.output_points = value.get<int>();
      else if (key == "activation") c.activation = model::activation_from_string(value.get<std::string>());
      else if (key == "aggregation") c.aggregation = model::aggregation_from_string(value.get<std::string>());
      else if (key == "message_grid" || key == "aggregate_grid" || key == "edge_network_hidden" ||
               key == "head_hidden")
        continue;  // derived, written for readers only
      else throw ConfigError("unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

void write_weights(std::ostream& out, const model::ModelWeights& w) {
  model::ModelWeights& mw = const_cast<model::ModelWeights&>(w);
  nlohmann::json arrays = nlohmann::json::array();
  std::vector<std::pair<const double*, std::size_t>> chunks;
  std::size_t offset = 0;
  model::for_each_array(mw, [&](const std::string& name, double* data, Eigen::Index rows,
                                Eigen::Index cols) {
    const auto n = static_cast<std::size_t>(rows * cols);
    arrays.push_back({{"name", name}, {"shape", {rows, cols}}, {"offset", offset}});
    chunks.emplace_back(data, n);
    offset += n;
  });
  const nlohmann::json header = {{"format", "escn-weights"},
                                 {"version", 1},
                                 {"byte_order", "little"},
                                 {"layout", "column-major"},
                                 {"config", config_to_json(w.config)},
                                 {"arrays", arrays}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t len = to_little(static_cast<std::uint32_t>(text.size()));
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [data, n] : chunks) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = to_little(data[i]);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  }
  if (!out) throw InputError("weights: write failed");
}

model::ModelWeights read_weights(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw InputError("weights: not an escn weight file");
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len)) throw InputError("weights: truncated header");
  len = to_little(len);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw InputError("weights: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("weights: bad header: ") + e.what());
  }
  if (header.value("format", "") != "escn-weights" || header.value("version", 0) != 1)
    throw InputError("weights: unsupported format or version");
  if (!header.contains("config") || !header.contains("arrays"))
    throw InputError("weights: header lacks config or arrays");

  model::ModelWeights w = model::ModelWeights::zeros(config_from_json(header["config"]));
  std::map<std::string, nlohmann::json> table;
  for (const auto& a : header["arrays"]) table[a.at("name").get<std::string>()] = a;

  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t total = data.size() / sizeof(double);
  if (data.size() % sizeof(double) != 0) throw InputError("weights: data section is misaligned");

  std::size_t seen = 0;
  try {
  model::for_each_array(w, [&](const std::string& name, double* dst, Eigen::Index rows,
                               Eigen::Index cols) {
    auto it = table.find(name);
    if (it == table.end()) throw ConfigError("weights: missing array " + name);
    const auto& shape = it->second.at("shape");
    if (shape.size() != 2 || shape[0].get<Eigen::Index>() != rows ||
        shape[1].get<Eigen::Index>() != cols)
      throw ConfigError("weights: shape mismatch for " + name);
    const auto offset = it->second.at("offset").get<std::size_t>();
    const auto n = static_cast<std::size_t>(rows * cols);
    if (offset + n > total) throw InputError("weights: data section too short for " + name);
    std::memcpy(dst, data.data() + offset * sizeof(double), n * sizeof(double));
    for (std::size_t i = 0; i < n; ++i) dst[i] = to_little(dst[i]);
    ++seen;
  });
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("weights: bad array table: ") + e.what());
  }
  if (seen != table.size()) throw ConfigError("weights: file holds arrays the config does not use");
  return w;
}

void save_weights(const std::string& path, const model::ModelWeights& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  write_weights(out, w);
}

model::ModelWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_weights(in);
}

}  // namespace escn::io
