#include "deepagent/pipeline/manifest.hpp"

#include <cmath>
#include <set>

#include "deepagent/binary_io.hpp"
#include "deepagent/rng.hpp"

namespace deepagent::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  if (s == "unassigned") return Split::Unassigned;
  throw IngestionError("unknown split \"" + s + "\"");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  const fs::path abs = fs::absolute(p).lexically_normal();
  const fs::path rel = abs.lexically_relative(fs::absolute(base).lexically_normal());
  if (rel.empty() || *rel.begin() == "..") return abs.generic_string();
  return rel.generic_string();
}

}  // namespace

std::vector<SampleRecord> parse_manifest(const json& j, const fs::path& base_dir, const std::string& source) {
  if (!j.is_array()) throw IngestionError(source + ": manifest must be a JSON array of records");
  std::vector<std::string> problems;
  std::vector<SampleRecord> records;
  std::set<std::string> ids;
  auto problem = [&](std::size_t i, const std::string& id, const std::string& what) {
    problems.push_back("record " + std::to_string(i) + (id.empty() ? "" : " (" + id + ")") + ": " + what);
  };

  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& r = j[i];
    SampleRecord rec;
    if (!r.is_object()) {
      problem(i, "", "not an object");
      continue;
    }
    for (const auto& [key, _] : r.items())
      if (key != "id" && key != "label" && key != "frames" && key != "audio" && key != "asr" && key != "ocr" &&
          key != "split")
        problem(i, "", "unknown key \"" + key + "\"");

    if (r.contains("id") && r["id"].is_string() && !r["id"].get<std::string>().empty()) {
      rec.id = r["id"].get<std::string>();
      if (!ids.insert(rec.id).second) problem(i, rec.id, "duplicate id \"" + rec.id + "\"");
    } else {
      problem(i, "", "missing or empty id");
    }

    const json label = r.value("label", json());
    if (label == 0 || label == "real") {
      rec.label = 0;
    } else if (label == 1 || label == "fake") {
      rec.label = 1;
    } else {
      problem(i, rec.id, "bad label " + label.dump() + " (expected 0, 1, \"real\" or \"fake\")");
    }

    auto check_file = [&](const fs::path& p, const char* what) {
      if (!fs::is_regular_file(p)) problem(i, rec.id, std::string("missing ") + what + " file " + p.string());
    };
    if (r.contains("frames")) {
      if (!r["frames"].is_array()) {
        problem(i, rec.id, "frames must be an array of paths");
      } else {
        for (const auto& f : r["frames"]) {
          if (!f.is_string()) {
            problem(i, rec.id, "frame entry " + f.dump() + " is not a path");
            continue;
          }
          rec.frames.push_back(resolve(base_dir, f.get<std::string>()));
          check_file(rec.frames.back(), "frame");
        }
      }
    }
    auto optional_path = [&](const char* key, const char* what) -> std::optional<fs::path> {
      if (!r.contains(key)) return std::nullopt;
      if (!r[key].is_string()) {
        problem(i, rec.id, std::string(key) + " must be a path");
        return std::nullopt;
      }
      fs::path p = resolve(base_dir, r[key].get<std::string>());
      check_file(p, what);
      return p;
    };
    rec.audio = optional_path("audio", "audio");
    rec.asr_text = optional_path("asr", "asr sidecar");
    rec.ocr_text = optional_path("ocr", "ocr sidecar");
    if (!rec.id.empty()) {
      if (!r.contains("asr") && fs::is_regular_file(base_dir / (rec.id + ".asr.txt")))
        rec.asr_text = base_dir / (rec.id + ".asr.txt");
      if (!r.contains("ocr") && fs::is_regular_file(base_dir / (rec.id + ".ocr.txt")))
        rec.ocr_text = base_dir / (rec.id + ".ocr.txt");
    }
    if (rec.frames.empty() && !r.contains("audio")) problem(i, rec.id, "has neither frames nor audio");
    if (r.contains("split")) {
      if (r["split"].is_string()) {
        try {
          rec.split = parse_split(r["split"].get<std::string>());
        } catch (const IngestionError& e) {
          problem(i, rec.id, e.what());
        }
      } else {
        problem(i, rec.id, "split must be a string");
      }
    }
    records.push_back(std::move(rec));
  }

  if (!problems.empty()) {
    std::string msg = source + ": " + std::to_string(problems.size()) + " manifest violation(s)";
    for (const auto& p : problems) msg += "\n  " + p;
    throw IngestionError(msg);
  }
  return records;
}

std::vector<SampleRecord> load_manifest(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IngestionError("manifest not found: " + path.string());
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
  return parse_manifest(j, fs::absolute(path).parent_path(), path.string());
}

json manifest_to_json(const std::vector<SampleRecord>& records, const fs::path& base_dir) {
  json out = json::array();
  const fs::path base = base_dir.lexically_normal();
  for (const auto& r : records) {
    json j{{"id", r.id}, {"label", r.label}};
    json frames = json::array();
    for (const auto& f : r.frames) frames.push_back(relative_to(f, base));
    j["frames"] = frames;
    if (r.audio) j["audio"] = relative_to(*r.audio, base);
    if (r.asr_text) j["asr"] = relative_to(*r.asr_text, base);
    if (r.ocr_text) j["ocr"] = relative_to(*r.ocr_text, base);
    if (r.split != Split::Unassigned) j["split"] = to_string(r.split);
    out.push_back(j);
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<SampleRecord>& records) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  io::write_text(path, manifest_to_json(records, base).dump(2) + "\n");
}

void assign_splits(std::vector<SampleRecord>& records, const SplitFractions& fractions, std::uint64_t seed) {
  const Rng root(seed);
  for (int c = 0; c < 2; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].label == c) members.push_back(i);
    if (members.empty()) continue;
    if (members.size() < 3)
      throw UsageError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                       " samples; at least 3 are needed to split");
    Rng rng = root.derive(static_cast<std::uint64_t>(7000 + c));
    rng.shuffle(members);
    const double n = static_cast<double>(members.size());
    // A small epsilon keeps exact products such as 0.2 * 10 from flooring to 1.
    const auto n_val = static_cast<std::size_t>(std::floor(fractions.val * n + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * n + 1e-9));
    for (std::size_t k = 0; k < members.size(); ++k) {
      Split s = Split::Train;
      if (k < n_val) s = Split::Val;
      else if (k < n_val + n_test) s = Split::Test;
      records[members[k]].split = s;
    }
  }
}

std::vector<const SampleRecord*> select(const std::vector<SampleRecord>& records, Split split) {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(&r);
  return out;
}

}  // namespace deepagent::pipeline
