#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "deepagent/audio/mfcc.hpp"

namespace deepagent::text {

enum class TokenSource { Asr, Ocr };

struct TokenSet {
  std::set<std::string> tokens;
  TokenSource source = TokenSource::Asr;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

inline constexpr int kFeatureDim = audio::kCoefficientCount + 1;
using FeatureVector = Eigen::Matrix<double, kFeatureDim, 1>;

struct MultimodalFeature {
  FeatureVector x = FeatureVector::Zero();
  bool audio_present = false;
  bool text_present = false;

  double similarity() const { return x[kFeatureDim - 1]; }
};

/// Lowercases ASCII letters and splits on every ASCII character that is not a
/// letter or digit. Bytes of multi-byte UTF-8 sequences count as word
/// characters and are kept verbatim.
TokenSet tokenize(std::string_view text, TokenSource source = TokenSource::Asr);

/// Reads a sidecar transcript; nullopt when the path is absent or missing.
std::optional<TokenSet> load_tokens(const std::optional<std::filesystem::path>& path, TokenSource source);

/// |a ∩ v| / max(|a|, 1). Not symmetric.
double lexical_similarity(const TokenSet& a, const TokenSet& v);

/// MFCC mean in x[0..12], similarity in x[13]; s = 0 when either transcript is absent.
MultimodalFeature build_feature(const audio::AudioEmbedding& audio, const std::optional<TokenSet>& a,
                                const std::optional<TokenSet>& v);

}  // namespace deepagent::text
