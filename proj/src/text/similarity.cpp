#include "deepagent/text/similarity.hpp"

#include <algorithm>

#include "deepagent/binary_io.hpp"

namespace deepagent::text {

namespace {

bool word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

TokenSet tokenize(std::string_view text, TokenSource source) {
  TokenSet out{{}, source};
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (word_char(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      out.tokens.insert(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.tokens.insert(std::move(current));
  return out;
}

std::optional<TokenSet> load_tokens(const std::optional<std::filesystem::path>& path, TokenSource source) {
  if (!path || !std::filesystem::exists(*path)) return std::nullopt;
  return tokenize(io::read_text(*path), source);
}

double lexical_similarity(const TokenSet& a, const TokenSet& v) {
  std::size_t shared = 0;
  for (const auto& t : a.tokens) shared += v.tokens.count(t);
  return static_cast<double>(shared) / static_cast<double>(std::max<std::size_t>(a.size(), 1));
}

MultimodalFeature build_feature(const audio::AudioEmbedding& audio, const std::optional<TokenSet>& a,
                                const std::optional<TokenSet>& v) {
  MultimodalFeature f;
  f.audio_present = audio.present;
  if (audio.present) f.x.head<audio::kCoefficientCount>() = audio.coeffs;
  f.text_present = a.has_value() && v.has_value();
  f.x[kFeatureDim - 1] = f.text_present ? lexical_similarity(*a, *v) : 0.0;
  return f;
}

}  // namespace deepagent::text
