#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deepagent/pipeline/config.hpp"
#include "json.hpp"

namespace deepagent::pipeline {

enum class Split { Train, Val, Test, Unassigned };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct SampleRecord {
  std::string id;
  int label = 0;  // 0 real, 1 fake
  std::vector<std::filesystem::path> frames;
  std::optional<std::filesystem::path> audio;
  std::optional<std::filesystem::path> asr_text;
  std::optional<std::filesystem::path> ocr_text;
  Split split = Split::Unassigned;
};

/// Manifest: a JSON array of
///   {"id", "label": 0|1|"real"|"fake", "frames": [...], "audio"?, "asr"?, "ocr"?, "split"?}
/// Relative paths resolve against `base_dir`. When "asr"/"ocr" are omitted,
/// `<id>.asr.txt` / `<id>.ocr.txt` in `base_dir` are used if they exist.
/// Every violation found is reported in one IngestionError.
std::vector<SampleRecord> parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                         const std::string& source);
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);

/// Paths are written relative to `base_dir` where possible.
nlohmann::json manifest_to_json(const std::vector<SampleRecord>& records, const std::filesystem::path& base_dir);
void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

/// Per class, in manifest order: seeded shuffle, then floor(val * n) to
/// validation, floor(test * n) to test and the rest to train.
void assign_splits(std::vector<SampleRecord>& records, const SplitFractions& fractions, std::uint64_t seed);

std::vector<const SampleRecord*> select(const std::vector<SampleRecord>& records, Split split);

}  // namespace deepagent::pipeline
