#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "drift/model.hpp"
#include "drift/projection.hpp"

namespace drift {

namespace fs = std::filesystem;

inline constexpr char kParamMagic[8] = {'D', 'R', 'F', 'T', 'P', 'A', 'R', '1'};

using ParameterFilter = std::function<bool(std::string_view group)>;

template <typename Model>
void write_parameters(const fs::path& path, const Model& model, const ParameterFilter& keep) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path.string());
  os.write(kParamMagic, sizeof kParamMagic);
  std::uint32_t count = 0;
  model.for_each_parameter([&](std::string_view g, const Parameter&) { count += keep(g) ? 1 : 0; });
  os.write(reinterpret_cast<const char*>(&count), sizeof count);
  model.for_each_parameter([&](std::string_view g, const Parameter& p) {
    if (!keep(g)) return;
    const auto n = static_cast<std::uint32_t>(p.name.size());
    const auto r = static_cast<std::uint32_t>(p.value.rows()), c = static_cast<std::uint32_t>(p.value.cols());
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(p.name.data(), n);
    os.write(reinterpret_cast<const char*>(&r), sizeof r);
    os.write(reinterpret_cast<const char*>(&c), sizeof c);
    os.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(float)));
  });
  require(static_cast<bool>(os), ErrorKind::IoError, "failed writing " + path.string());
}

/// Loads every stored tensor into the parameter of the same name; shapes
/// must match exactly.
template <typename Model>
void read_parameters(const fs::path& path, Model& model) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::IoError, "cannot read " + path.string());
  char magic[sizeof kParamMagic];
  is.read(magic, sizeof magic);
  require(is && std::equal(magic, magic + sizeof magic, kParamMagic), ErrorKind::ParseError,
          path.string() + " is not a parameter file");
  std::map<std::string, Parameter*> by_name;
  model.for_each_parameter([&](std::string_view, Parameter& p) { by_name[p.name] = &p; });
  std::uint32_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t n = 0, r = 0, c = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    std::string name(n, '\0');
    is.read(name.data(), n);
    is.read(reinterpret_cast<char*>(&r), sizeof r);
    is.read(reinterpret_cast<char*>(&c), sizeof c);
    require(static_cast<bool>(is), ErrorKind::IoError, "truncated parameter file " + path.string());
    const auto it = by_name.find(name);
    require(it != by_name.end(), ErrorKind::ParseError, "unknown parameter '" + name + "' in " + path.string());
    Parameter& p = *it->second;
    require(p.value.rows() == r && p.value.cols() == c, ErrorKind::ParseError, "shape mismatch for '" + name + "'");
    is.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    require(static_cast<bool>(is), ErrorKind::IoError, "truncated parameter file " + path.string());
  }
}

/// {dir}/{model_id}/weights, tokenizer, adapter and config.
inline void save_model(const fs::path& dir, const CausalLM& model) {
  const fs::path root = dir / model.model_id;
  fs::create_directories(root);
  write_parameters(root / "weights", model.net, [](std::string_view g) { return g != "adapter"; });
  if (model.net.adapter()) write_parameters(root / "adapter", model.net, [](std::string_view g) { return g == "adapter"; });
  std::ofstream(root / "tokenizer") << model.tokenizer.to_json().dump();
  nlohmann::json cfg = {{"model_id", model.model_id}, {"transformer", model.net.config().to_json()}};
  if (model.net.adapter()) cfg["adapter"] = model.net.adapter()->to_json();
  std::ofstream(root / "config.json") << cfg.dump(2);
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::IoError, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

inline CausalLM load_model(const fs::path& dir, const std::string& model_id) {
  const fs::path root = dir / model_id;
  const auto cfg = read_json(root / "config.json");
  auto tok = Tokenizer::from_json(read_json(root / "tokenizer"));
  std::optional<AdapterConfig> adapter;
  if (cfg.contains("adapter")) adapter = AdapterConfig::from_json(cfg.at("adapter"));
  const auto added = tok.added_count();
  CausalLM m(model_id, std::move(tok), TransformerConfig::from_json(cfg.at("transformer")), adapter);
  std::mt19937_64 rng(0);
  for (std::size_t i = 0; i < added; ++i) m.net.add_embedding_row(rng);
  read_parameters(root / "weights", m.net);
  if (adapter && fs::exists(root / "adapter")) read_parameters(root / "adapter", m.net);
  return m;
}

inline void save_projector(const fs::path& dir, const Projector& p) {
  fs::create_directories(dir / "projector");
  write_parameters(dir / "projector" / "weights", p, [](std::string_view) { return true; });
  std::ofstream(dir / "projector" / "config.json") << p.config_json().dump(2);
}

inline Projector load_projector(const fs::path& dir) {
  const auto cfg = read_json(dir / "projector" / "config.json");
  Projector p(cfg.at("in").get<int>(), cfg.at("out").get<int>(), 0);
  read_parameters(dir / "projector" / "weights", p);
  return p;
}

}  // namespace drift
