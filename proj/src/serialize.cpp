#include "pcf/serialize.hpp"

#include <filesystem>
#include <fstream>

namespace pcf {

using nlohmann::json;

json mlp_to_json(const MlpParams& p) {
  json j;
  j["sizes"] = p.sizes();
  j["activation"] = activation_name(p.act);
  json layers = json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"weight", l.weight.to_vector()},
                      {"bias", l.bias.to_vector()}});
  }
  j["layers"] = std::move(layers);
  return j;
}

MlpParams mlp_from_json(const json& j) {
  try {
    const auto sizes = j.at("sizes").get<std::vector<std::int64_t>>();
    require(sizes.size() >= 2, "checkpoint: bad layer sizes");
    MlpParams p;
    p.act = activation_from_name(j.at("activation").get<std::string>());
    const auto& layers = j.at("layers");
    require(layers.size() == sizes.size() - 1,
            "checkpoint: layer count does not match sizes");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto w = layers[l].at("weight").get<std::vector<double>>();
      auto b = layers[l].at("bias").get<std::vector<double>>();
      const std::int64_t out = sizes[l + 1], in = sizes[l];
      require(static_cast<std::int64_t>(w.size()) == out * in,
              "checkpoint: weight size mismatch in layer " + std::to_string(l));
      require(static_cast<std::int64_t>(b.size()) == out,
              "checkpoint: bias size mismatch in layer " + std::to_string(l));
      p.layers.push_back(
          MlpLayer{Tensor({out, in}, std::move(w)), Tensor({out}, std::move(b))});
    }
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed mlp: ") + e.what());
  }
}

json solver_to_json(const SolverConfig& s) {
  return {{"solver", solver_name(s.method)},
          {"rtol", s.rtol},
          {"atol", s.atol},
          {"h0", s.h0},
          {"fixed_step", s.fixed_step}};
}

SolverConfig solver_from_json(const json& j) {
  try {
    SolverConfig s;
    if (j.contains("solver")) s.method = solver_from_name(j.at("solver").get<std::string>());
    s.rtol = j.value("rtol", s.rtol);
    s.atol = j.value("atol", s.atol);
    s.h0 = j.value("h0", s.h0);
    s.fixed_step = j.value("fixed_step", s.fixed_step);
    require(s.rtol > 0 && s.atol > 0 && s.h0 > 0,
            "solver config: tolerances and h0 must be positive");
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("solver config: ") + e.what());
  }
}

json load_json_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  require(is.good(), "cannot open " + file.string());
  try {
    json j;
    is >> j;
    return j;
  } catch (const json::exception& e) {
    throw ValidationError(file.string() + ": bad json: " + e.what());
  }
}

void save_json_file(const std::filesystem::path& file, const json& j) {
  if (file.has_parent_path()) {
    std::filesystem::create_directories(file.parent_path());
  }
  std::ofstream os(file);
  require(os.good(), "cannot open " + file.string() + " for writing");
  os << j.dump(2) << '\n';
  require(os.good(), "write failed for " + file.string());
}

}  // namespace pcf
