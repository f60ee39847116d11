#include "support.hpp"

#include <escn/weights_io.hpp>
#include <escn/xyz.hpp>

#include <cstring>
#include <sstream>

using namespace escn;
using namespace escn::io;

namespace {

model::ModelConfig tiny() {
  model::ModelConfig c;
  c.lmax = 2;
  c.mmax = 1;
  c.channels = 4;
  c.hidden = 8;
  c.layers = 2;
  c.edge_channels = 8;
  c.max_atomic_number = 10;
  c.activation = model::Activation::identity;
  return c;
}

std::string serialise(const model::ModelWeights& w) {
  std::ostringstream out(std::ios::binary);
  write_weights(out, w);
  return out.str();
}

// Replace the JSON header of a serialised weight file.
std::string with_header(const std::string& blob, const std::function<void(nlohmann::json&)>& edit) {
  std::uint32_t len = 0;
  std::memcpy(&len, blob.data() + 8, 4);
  nlohmann::json h = nlohmann::json::parse(blob.substr(12, len));
  edit(h);
  const std::string text = h.dump();
  const auto n = static_cast<std::uint32_t>(text.size());
  std::string out = blob.substr(0, 8);
  out.append(reinterpret_cast<const char*>(&n), 4);
  out += text;
  out += blob.substr(12 + len);
  return out;
}

model::ModelWeights parse(const std::string& blob) {
  std::istringstream in(blob, std::ios::binary);
  return read_weights(in);
}

}  // namespace

TEST_CASE("weights round trip bit for bit") {
  const auto w = model::ModelWeights::random(tiny(), 11);
  const std::string blob = serialise(w);
  CHECK(blob.substr(0, 8) == "ESCNW001");
  auto back = parse(blob);
  CHECK(back.config.lmax == 2);
  CHECK(back.config.activation == model::Activation::identity);
  CHECK(back.parameter_count() == w.parameter_count());
  CHECK(serialise(back) == blob);
  auto copy = w;
  std::vector<std::vector<double>> a, b;
  model::for_each_array(copy, [&](const std::string&, double* p, Eigen::Index r, Eigen::Index c) {
    a.emplace_back(p, p + r * c);
  });
  model::for_each_array(back, [&](const std::string&, double* p, Eigen::Index r, Eigen::Index c) {
    b.emplace_back(p, p + r * c);
  });
  CHECK(a == b);
}

TEST_CASE("weight header documents derived sizes") {
  const std::string blob = serialise(model::ModelWeights::zeros(tiny()));
  with_header(blob, [](nlohmann::json& h) {
    CHECK(h["format"] == "escn-weights");
    CHECK(h["config"]["message_grid"] == nlohmann::json::array({5, 3}));
    CHECK(h["config"]["edge_network_hidden"] == 8);
    CHECK(h["arrays"][0]["name"] == "node_embedding");
    CHECK(h["arrays"][0]["shape"] == nlohmann::json::array({11, 4}));
  });
}

TEST_CASE("weight file errors") {
  const std::string blob = serialise(model::ModelWeights::random(tiny(), 1));
  CHECK_THROWS_AS(parse("NOTAFILE"), InputError);
  CHECK_THROWS_AS(parse(blob.substr(0, 10)), InputError);
  CHECK_THROWS_AS(parse(blob.substr(0, blob.size() - 8)), InputError);
  CHECK_THROWS_AS(parse(with_header(blob, [](nlohmann::json& h) { h["arrays"][0]["shape"][0] = 12; })),
                  ConfigError);
  CHECK_THROWS_AS(parse(with_header(blob, [](nlohmann::json& h) { h["config"]["colour"] = "red"; })),
                  ConfigError);
  CHECK_THROWS_AS(parse(with_header(blob, [](nlohmann::json& h) { h["config"]["layers"] = 3; })),
                  ConfigError);
  CHECK_THROWS_AS(parse(with_header(blob, [](nlohmann::json& h) { h["arrays"].erase(0); })),
                  ConfigError);
  CHECK_THROWS_AS(parse(with_header(blob, [](nlohmann::json& h) { h["version"] = 2; })), InputError);
  CHECK_THROWS_AS(load_weights("/nonexistent/weights.bin"), InputError);
}

TEST_CASE("config json round trip") {
  model::ModelConfig c = tiny();
  c.aggregation = model::Aggregation::mean;
  c.cutoff = 5.5;
  const auto back = config_from_json(config_to_json(c));
  CHECK(back.aggregation == model::Aggregation::mean);
  CHECK(back.cutoff == 5.5);
  CHECK(back.hidden == 8);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"lmax", "six"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"mmax", 9}}), ConfigError);
}

TEST_CASE("periodic table") {
  CHECK(atomic_number("H") == 1);
  CHECK(atomic_number("fe") == 26);
  CHECK(atomic_number("Og") == 118);
  CHECK(atomic_number("8") == 8);
  CHECK(element_symbol(79) == "Au");
  CHECK_THROWS_AS(atomic_number("Xx"), InputError);
  CHECK_THROWS_AS(atomic_number("0"), InputError);
  CHECK_THROWS_AS(atomic_number("119"), InputError);
  CHECK_THROWS_AS(element_symbol(0), InputError);
}

TEST_CASE("xyz parsing") {
  std::istringstream in("3\nwater molecule\nO 0.0 0.0 0.1173\nH 0.0 0.7572 -0.4692\nH 0.0 -0.7572 -0.4692\n");
  const XYZStructure s = parse_xyz(in);
  CHECK(s.size() == 3);
  CHECK(s.comment == "water molecule");
  CHECK(s.atomic_numbers == std::vector<int>{8, 1, 1});
  CHECK(s.positions[1].y() == 0.7572);

  std::ostringstream out;
  write_xyz(out, s);
  std::istringstream again(out.str());
  const XYZStructure t = parse_xyz(again);
  CHECK(t.positions == s.positions);
  CHECK(t.atomic_numbers == s.atomic_numbers);
}

TEST_CASE("xyz errors carry line numbers") {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_xyz(in);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("").find("line 1") != std::string::npos);
  CHECK(message("two\n").find("line 1") != std::string::npos);
  CHECK(message("2\nc\nH 0 0 0\n").find("line 4") != std::string::npos);
  CHECK(message("2\nc\nH 0 0 0\nH 0 zero 0\n").find("line 4") != std::string::npos);
  CHECK(message("1\nc\nQq 0 0 0\n").find("line 3") != std::string::npos);
  CHECK(message("1\nc\nH 0 0\n").find("line 3") != std::string::npos);
  CHECK(message("1\nc\nH 0 0 0\nH 1 1 1\n").find("line 4") != std::string::npos);
  CHECK(message("1\nc\nH 0 0 nan\n").find("line 3") != std::string::npos);
  CHECK(message("1\nc\nH 0 0 0\n\n") == "no error");
}
