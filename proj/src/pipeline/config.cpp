#include "deepagent/pipeline/config.hpp"

#include <cmath>
#include <cstdlib>
#include <set>
#include <type_traits>

#include "deepagent/binary_io.hpp"

namespace deepagent::pipeline {

namespace {

using nlohmann::json;

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type: " + v.dump());
    }
  }

  const json* object(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key \"" + key + "\"");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_adam(ObjectReader& r, nn::AdamConfig& adam) {
  r.read("learning_rate", adam.learning_rate);
  r.read("beta1", adam.beta1);
  r.read("beta2", adam.beta2);
  r.read("epsilon", adam.epsilon);
}

json adam_json(const nn::AdamConfig& a) {
  return {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

}  // namespace

std::string to_string(FramePolicy p) { return p == FramePolicy::Interval5 ? "interval5" : "even"; }
std::string to_string(Precision p) { return p == Precision::F64 ? "f64" : "f32"; }
std::string to_string(FusionSamples s) { return s == FusionSamples::All ? "all" : "held_out"; }

FramePolicy parse_frame_policy(const std::string& s) {
  if (s == "interval5") return FramePolicy::Interval5;
  if (s == "even") return FramePolicy::Even;
  throw ConfigError("frame policy must be interval5 or even, got \"" + s + "\"");
}

Precision parse_precision(const std::string& s) {
  if (s == "f64") return Precision::F64;
  if (s == "f32") return Precision::F32;
  throw ConfigError("precision must be f64 or f32, got \"" + s + "\"");
}

FusionSamples parse_fusion_samples(const std::string& s) {
  if (s == "all") return FusionSamples::All;
  if (s == "held_out") return FusionSamples::HeldOut;
  throw ConfigError("fusion_samples must be all or held_out, got \"" + s + "\"");
}

void PipelineConfig::sync() {
  agent1.seed = seed;
  agent2.seed = seed;
  fusion.seed = seed;
  agent1.arch.input_size = agent1_input_size();
  agent2.arch.input_width = text::kFeatureDim;
}

void PipelineConfig::validate() const {
  const SplitFractions& f = splits;
  if (f.train < 0 || f.val < 0 || f.test < 0) throw ConfigError("split fractions must be non-negative");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1, got " + std::to_string(f.train + f.val + f.test));
  if (m < 1) throw ConfigError("m must be >= 1");
  if (meta_dims != 2 && meta_dims != 4) throw ConfigError("meta_dims must be 2 or 4");
  if (mel_filters < audio::kCoefficientCount)
    throw ConfigError("mel_filters must be >= " + std::to_string(audio::kCoefficientCount));
  if (agent1.epochs < 1 || agent2.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (agent1.batch_size < 2 || agent2.batch_size < 2) throw ConfigError("batch sizes must be >= 2");
  if (agent1.arch.width_divisor < 1) throw ConfigError("agent1.width_divisor must be >= 1");
  if (agent2.patience < 1 || agent2.lr_patience < 1) throw ConfigError("agent2 patience values must be >= 1");
  if (!(agent2.lr_factor > 0.0 && agent2.lr_factor < 1.0)) throw ConfigError("agent2.lr_factor must lie in (0, 1)");
  for (const auto* adam : {&agent1.adam, &agent2.adam})
    if (!(adam->learning_rate >= 0.0) || !(adam->epsilon > 0.0) || !(adam->beta1 >= 0.0 && adam->beta1 < 1.0) ||
        !(adam->beta2 >= 0.0 && adam->beta2 < 1.0))
      throw ConfigError("adam settings out of range");
  if (fusion.folds < 2) throw ConfigError("forest.folds must be >= 2");
  if (fusion.forest.trees < 1) throw ConfigError("forest.trees must be >= 1");
  if (fusion.forest.mtry < 1 || fusion.forest.mtry > meta_dims) throw ConfigError("forest.mtry must lie in [1, meta_dims]");
  if (agent1.augment) agent1.policy.validate();
}

PipelineConfig config_from_json(const json& j, const PipelineConfig& base) {
  PipelineConfig c = base;
  ObjectReader root(j, "config");
  root.read("seed", c.seed);
  if (const json* s = root.object("splits")) {
    ObjectReader r(*s, "config.splits");
    r.read("train", c.splits.train);
    r.read("val", c.splits.val);
    r.read("test", c.splits.test);
    r.finish();
  }
  std::string text = to_string(c.frame_policy);
  root.read("frame_policy", text);
  c.frame_policy = parse_frame_policy(text);
  root.read("m", c.m);
  root.read("meta_dims", c.meta_dims);
  root.read("mel_filters", c.mel_filters);
  root.read("desk_scale", c.desk_scale);
  text = to_string(c.precision);
  root.read("precision", text);
  c.precision = parse_precision(text);
  text = to_string(c.fusion_samples);
  root.read("fusion_samples", text);
  c.fusion_samples = parse_fusion_samples(text);

  if (const json* a = root.object("agent1")) {
    ObjectReader r(*a, "config.agent1");
    r.read("epochs", c.agent1.epochs);
    r.read("batch_size", c.agent1.batch_size);
    read_adam(r, c.agent1.adam);
    r.read("augment", c.agent1.augment);
    r.read("recalibrate_bn", c.agent1.recalibrate_bn);
    r.read("width_divisor", c.agent1.arch.width_divisor);
    if (const json* p = r.object("augment_policy")) {
      ObjectReader pr(*p, "config.agent1.augment_policy");
      auto& pol = c.agent1.policy;
      pr.read("rotation_deg", pol.rotation_deg);
      pr.read("shift_frac", pol.shift_frac);
      pr.read("zoom_frac", pol.zoom_frac);
      pr.read("brightness_min", pol.brightness_min);
      pr.read("brightness_max", pol.brightness_max);
      pr.read("horizontal_flip", pol.horizontal_flip);
      pr.finish();
    }
    r.finish();
  }
  if (const json* a = root.object("agent2")) {
    ObjectReader r(*a, "config.agent2");
    r.read("epochs", c.agent2.epochs);
    r.read("batch_size", c.agent2.batch_size);
    read_adam(r, c.agent2.adam);
    r.read("patience", c.agent2.patience);
    r.read("lr_patience", c.agent2.lr_patience);
    r.read("lr_factor", c.agent2.lr_factor);
    r.read("dropout", c.agent2.arch.dropout);
    r.read("standardize", c.agent2.arch.standardize);
    r.finish();
  }
  if (const json* f = root.object("forest")) {
    ObjectReader r(*f, "config.forest");
    r.read("trees", c.fusion.forest.trees);
    r.read("mtry", c.fusion.forest.mtry);
    r.read("bootstrap", c.fusion.forest.bootstrap);
    r.read("folds", c.fusion.folds);
    r.finish();
  }
  root.finish();
  c.sync();
  c.validate();
  return c;
}

json to_json(const PipelineConfig& c) {
  const auto& pol = c.agent1.policy;
  return {
      {"seed", c.seed},
      {"splits", {{"train", c.splits.train}, {"val", c.splits.val}, {"test", c.splits.test}}},
      {"frame_policy", to_string(c.frame_policy)},
      {"m", c.m},
      {"meta_dims", c.meta_dims},
      {"mel_filters", c.mel_filters},
      {"desk_scale", c.desk_scale},
      {"precision", to_string(c.precision)},
      {"fusion_samples", to_string(c.fusion_samples)},
      {"agent1",
       [&] {
         json a = adam_json(c.agent1.adam);
         a["epochs"] = c.agent1.epochs;
         a["batch_size"] = c.agent1.batch_size;
         a["augment"] = c.agent1.augment;
         a["recalibrate_bn"] = c.agent1.recalibrate_bn;
         a["width_divisor"] = c.agent1.arch.width_divisor;
         a["augment_policy"] = {{"rotation_deg", pol.rotation_deg},     {"shift_frac", pol.shift_frac},
                                {"zoom_frac", pol.zoom_frac},           {"brightness_min", pol.brightness_min},
                                {"brightness_max", pol.brightness_max}, {"horizontal_flip", pol.horizontal_flip}};
         return a;
       }()},
      {"agent2",
       [&] {
         json a = adam_json(c.agent2.adam);
         a["epochs"] = c.agent2.epochs;
         a["batch_size"] = c.agent2.batch_size;
         a["patience"] = c.agent2.patience;
         a["lr_patience"] = c.agent2.lr_patience;
         a["lr_factor"] = c.agent2.lr_factor;
         a["dropout"] = c.agent2.arch.dropout;
         a["standardize"] = c.agent2.arch.standardize;
         return a;
       }()},
      {"forest",
       {{"trees", c.fusion.forest.trees},
        {"mtry", c.fusion.forest.mtry},
        {"bootstrap", c.fusion.forest.bootstrap},
        {"folds", c.fusion.folds}}},
  };
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& path) {
  std::optional<std::filesystem::path> chosen = path;
  if (!chosen)
    if (const char* env = std::getenv(kConfigEnv); env && *env) chosen = std::filesystem::path(env);
  if (!chosen) {
    PipelineConfig c;
    c.sync();
    return c;
  }
  if (!std::filesystem::exists(*chosen)) throw ConfigError("config file not found: " + chosen->string());
  json j;
  try {
    j = json::parse(io::read_text(*chosen));
  } catch (const json::parse_error& e) {
    throw ConfigError(chosen->string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace deepagent::pipeline
