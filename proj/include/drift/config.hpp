#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "drift/datagen.hpp"
#include "drift/hash.hpp"
#include "drift/toy.hpp"
#include "drift/training.hpp"

namespace drift {

/// Everything a CLI run needs, loaded from one JSON document. Unknown keys
/// are rejected so typos surface as configuration errors.
struct RunConfig {
  std::filesystem::path work_dir = "drift-run";
  std::string knowledge_id = "knowledge";
  std::string reasoner_id = "reasoner";
  ToyConfig toy;
  std::vector<Bucket> buckets = BucketTable::default_table().ranges();
  TokenCount static_ratio = CompressionSpec::kStaticRatio;
  TokenCount dynamic_ratio = CompressionSpec::kDynamicRatio;
  OverlapConfig chunking;
  std::size_t parallelism = 1;
  StageConfig lfrp = StageConfig::defaults(Objective::Lfrp);
  StageConfig qaft_dc = StageConfig::defaults(Objective::QaftDc);
  StageConfig qaft_qa = StageConfig::defaults(Objective::QaftQa);
  std::uint64_t seed = 0;

  // Data generation.
  std::map<std::string, std::size_t> targets;
  double train = 0.8, val = 0.1, test = 0.1;
  std::string generator = "cloze";  // "cloze" or "http"
  std::string judge = "rule";       // "rule" or "http"
  std::size_t concurrency = 1;
  std::string http_host = "localhost";
  int http_port = 8000;
  std::string http_model;

  std::filesystem::path models_dir() const { return work_dir / "models"; }
  std::filesystem::path data_dir() const { return work_dir / "data"; }
  BucketTable table() const { return BucketTable(buckets); }

  void validate() const {
    auto check = [](bool ok, const std::string& msg) { require(ok, ErrorKind::ConfigError, msg); };
    check(static_ratio >= 1 && dynamic_ratio >= 1, "compression ratios must be >= 1");
    check(!buckets.empty(), "bucket table is empty");
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      check(buckets[i].lower < buckets[i].upper, "bucket " + to_string(buckets[i]) + " is empty");
      if (i) check(buckets[i].lower == buckets[i - 1].upper, "buckets must be contiguous");
    }
    check(chunking.chunk_size >= 1, "chunk_size must be >= 1");
    check(chunking.overlap >= 0 && chunking.overlap < chunking.chunk_size, "overlap must be in [0, chunk_size)");
    check(std::abs(train + val + test - 1.0) < 1e-9, "split ratios must sum to 1");
    check(generator == "cloze" || generator == "http", "generator must be cloze or http");
    check(judge == "rule" || judge == "http", "judge must be rule or http");
    check(toy.width % toy.heads == 0 && toy.reasoner_width % toy.heads == 0, "widths must divide by heads");
    try {
      lfrp.validate();
      qaft_dc.validate();
      qaft_qa.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, e.message());
    }
    check(lfrp.objective == Objective::Lfrp && qaft_dc.objective == Objective::QaftDc &&
              qaft_qa.objective == Objective::QaftQa,
          "stage objectives do not match their keys");
  }

  nlohmann::json to_json() const {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& r : buckets) b.push_back({r.lower, r.upper});
    return {{"work_dir", work_dir.string()},
            {"seed", seed},
            {"models", {{"knowledge", knowledge_id}, {"reasoner", reasoner_id}}},
            {"toy",
             {{"width", toy.width},
              {"layers", toy.layers},
              {"heads", toy.heads},
              {"knowledge_positions", toy.knowledge_positions},
              {"reasoner_positions", toy.reasoner_positions},
              {"reasoner_width", toy.reasoner_width},
              {"knowledge_pieces", toy.knowledge_pieces},
              {"reasoner_pieces", toy.reasoner_pieces},
              {"min_count", toy.min_count},
              {"adapter", toy.adapter.to_json()}}},
            {"buckets", b},
            {"compression", {{"static_ratio", static_ratio}, {"dynamic_ratio", dynamic_ratio}}},
            {"chunking",
             {{"chunk_size", chunking.chunk_size},
              {"overlap", chunking.overlap},
              {"snap_window", chunking.snap_window},
              {"parallelism", parallelism}}},
            {"stages", {{"lfrp", lfrp.to_json()}, {"qaft_dc", qaft_dc.to_json()}, {"qaft_qa", qaft_qa.to_json()}}},
            {"datagen",
             {{"targets", targets},
              {"splits", {train, val, test}},
              {"generator", generator},
              {"judge", judge},
              {"concurrency", concurrency},
              {"http", {{"host", http_host}, {"port", http_port}, {"model", http_model}}}}}};
  }

  /// Hash of the canonical JSON form; recorded in every artifact manifest.
  std::string hash() const { return content_hash(to_json().dump()); }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    auto known = [](const nlohmann::json& obj, std::initializer_list<const char*> keys, const std::string& where) {
      require(obj.is_object(), ErrorKind::ConfigError, where + " must be an object");
      for (const auto& [k, v] : obj.items()) {
        bool ok = false;
        for (const char* key : keys) ok = ok || k == key;
        require(ok, ErrorKind::ConfigError, "unknown key '" + k + "' in " + where);
      }
    };
    try {
      known(j, {"work_dir", "seed", "models", "toy", "buckets", "compression", "chunking", "stages", "datagen"}, "config");
      c.work_dir = j.value("work_dir", c.work_dir.string());
      c.seed = j.value("seed", c.seed);
      if (j.contains("models")) {
        const auto& m = j["models"];
        known(m, {"knowledge", "reasoner"}, "models");
        c.knowledge_id = m.value("knowledge", c.knowledge_id);
        c.reasoner_id = m.value("reasoner", c.reasoner_id);
      }
      if (j.contains("toy")) {
        const auto& t = j["toy"];
        known(t, {"width", "layers", "heads", "knowledge_positions", "reasoner_positions", "reasoner_width",
                  "knowledge_pieces", "reasoner_pieces", "min_count", "adapter"},
              "toy");
        c.toy.width = t.value("width", c.toy.width);
        c.toy.layers = t.value("layers", c.toy.layers);
        c.toy.heads = t.value("heads", c.toy.heads);
        c.toy.knowledge_positions = t.value("knowledge_positions", c.toy.knowledge_positions);
        c.toy.reasoner_positions = t.value("reasoner_positions", c.toy.reasoner_positions);
        c.toy.reasoner_width = t.value("reasoner_width", c.toy.reasoner_width);
        c.toy.knowledge_pieces = t.value("knowledge_pieces", c.toy.knowledge_pieces);
        c.toy.reasoner_pieces = t.value("reasoner_pieces", c.toy.reasoner_pieces);
        c.toy.min_count = t.value("min_count", c.toy.min_count);
        if (t.contains("adapter")) c.toy.adapter = AdapterConfig::from_json(t["adapter"]);
      }
      if (j.contains("buckets")) {
        c.buckets.clear();
        for (const auto& b : j["buckets"]) c.buckets.push_back({b.at(0).get<TokenCount>(), b.at(1).get<TokenCount>()});
      }
      if (j.contains("compression")) {
        const auto& m = j["compression"];
        known(m, {"static_ratio", "dynamic_ratio"}, "compression");
        c.static_ratio = m.value("static_ratio", c.static_ratio);
        c.dynamic_ratio = m.value("dynamic_ratio", c.dynamic_ratio);
      }
      if (j.contains("chunking")) {
        const auto& m = j["chunking"];
        known(m, {"chunk_size", "overlap", "snap_window", "parallelism"}, "chunking");
        c.chunking.chunk_size = m.value("chunk_size", c.chunking.chunk_size);
        c.chunking.overlap = m.value("overlap", c.chunking.overlap);
        c.chunking.snap_window = m.value("snap_window", c.chunking.snap_window);
        c.parallelism = m.value("parallelism", c.parallelism);
      }
      if (j.contains("stages")) {
        const auto& s = j["stages"];
        known(s, {"lfrp", "qaft_dc", "qaft_qa"}, "stages");
        auto stage = [&](const char* key, Objective o) {
          if (!s.contains(key)) return StageConfig::defaults(o);
          auto body = s[key];
          if (!body.contains("objective")) body["objective"] = to_string(o);
          return StageConfig::from_json(body);
        };
        c.lfrp = stage("lfrp", Objective::Lfrp);
        c.qaft_dc = stage("qaft_dc", Objective::QaftDc);
        c.qaft_qa = stage("qaft_qa", Objective::QaftQa);
      }
      if (j.contains("datagen")) {
        const auto& d = j["datagen"];
        known(d, {"targets", "splits", "generator", "judge", "concurrency", "http"}, "datagen");
        if (d.contains("targets")) c.targets = d["targets"].get<std::map<std::string, std::size_t>>();
        if (d.contains("splits")) {
          const auto& s = d["splits"];
          c.train = s.at(0).get<double>();
          c.val = s.at(1).get<double>();
          c.test = s.at(2).get<double>();
        }
        c.generator = d.value("generator", c.generator);
        c.judge = d.value("judge", c.judge);
        c.concurrency = d.value("concurrency", c.concurrency);
        if (d.contains("http")) {
          const auto& h = d["http"];
          known(h, {"host", "port", "model"}, "datagen.http");
          c.http_host = h.value("host", c.http_host);
          c.http_port = h.value("port", c.http_port);
          c.http_model = h.value("model", c.http_model);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, std::string("bad config: ") + e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConfigError) throw;
      throw Error(ErrorKind::ConfigError, e.message());
    }
    c.validate();
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorKind::ConfigError, "cannot read config " + path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
    return from_json(j);
  }
};

}  // namespace drift
