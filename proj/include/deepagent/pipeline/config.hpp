#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "deepagent/agents/agent1.hpp"
#include "deepagent/agents/agent2.hpp"
#include "deepagent/fusion/cross_validation.hpp"
#include "json.hpp"

namespace deepagent::pipeline {

enum class FramePolicy { Interval5, Even };
enum class Precision { F64, F32 };
// Which videos feed the meta-classifier's cross-validation. HeldOut uses val and
// test only, so agent scores on their own training videos stay out of it.
enum class FusionSamples { All, HeldOut };

struct SplitFractions {
  double train = 0.70;
  double val = 0.20;
  double test = 0.10;
};

inline constexpr int kDeskScaleInput = 64;
inline constexpr const char* kConfigEnv = "DEEPAGENT_CONFIG";

struct PipelineConfig {
  std::uint64_t seed = 42;
  SplitFractions splits;
  FramePolicy frame_policy = FramePolicy::Interval5;  // frames used to train Agent-1
  int m = 30;                                         // frames per video when scoring, and for the even policy
  int meta_dims = 2;
  int mel_filters = 13;
  bool desk_scale = false;
  Precision precision = Precision::F64;
  FusionSamples fusion_samples = FusionSamples::HeldOut;
  agents::Agent1Config agent1;
  agents::Agent2Config agent2;
  fusion::CrossValidationConfig fusion;

  int agent1_input_size() const { return desk_scale ? kDeskScaleInput : 224; }
  /// Pushes the shared seed and derived sizes into the per-stage configs.
  void sync();
  void validate() const;
};

/// Strict: unknown keys and wrong types are configuration errors.
PipelineConfig config_from_json(const nlohmann::json& j, const PipelineConfig& base = {});
nlohmann::json to_json(const PipelineConfig& c);

/// Resolution order: explicit path, then $DEEPAGENT_CONFIG, then defaults.
PipelineConfig load_config(const std::optional<std::filesystem::path>& path);

std::string to_string(FramePolicy p);
std::string to_string(Precision p);
std::string to_string(FusionSamples s);
FramePolicy parse_frame_policy(const std::string& s);
Precision parse_precision(const std::string& s);
FusionSamples parse_fusion_samples(const std::string& s);

}  // namespace deepagent::pipeline
