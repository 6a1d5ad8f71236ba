#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "arl/data.hpp"
#include "arl/errors.hpp"

namespace arl {

// ---------------------------------------------------------------------------
// Speaker-disjoint splitting
// ---------------------------------------------------------------------------

/// Greedy seeded assignment of whole speakers to train/val/test. Each speaker
/// goes to the split with the largest remaining (size, per-dialect) deficit.
inline std::map<std::string, Split> speaker_disjoint_split(
    CorpusManifest& manifest, const std::array<double, 3>& ratios, std::uint64_t seed) {
  double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  if (!(ratios[0] > 0.0 && ratios[1] > 0.0 && ratios[2] > 0.0) ||
      std::abs(ratio_sum - 1.0) > 1e-9)
    throw ConfigError("split ratios must be positive and sum to 1");

  struct SpeakerInfo {
    std::string id;
    std::size_t count = 0;
    std::size_t dialect = 0;
  };
  std::map<std::string, SpeakerInfo> by_id;
  std::map<std::size_t, std::size_t> dialect_totals;
  for (const Sample& s : manifest.samples) {
    SpeakerInfo& info = by_id[s.speaker_id];
    info.id = s.speaker_id;
    info.count += 1;
    info.dialect = s.dialect;
    dialect_totals[s.dialect] += 1;
  }
  if (by_id.size() < 3)
    throw DataError("speaker-disjoint split needs at least 3 speakers, have " +
                    std::to_string(by_id.size()));

  std::vector<SpeakerInfo> speakers;
  for (auto& [id, info] : by_id) speakers.push_back(info);
  std::mt19937_64 rng(seed ^ 0x51b7a2e94dc6f305ull);
  std::shuffle(speakers.begin(), speakers.end(), rng);

  const double total = static_cast<double>(manifest.samples.size());
  std::array<std::size_t, 3> counts = {0, 0, 0};
  std::array<std::map<std::size_t, std::size_t>, 3> dialect_counts;
  constexpr std::array<Split, 3> kSplits = {Split::train, Split::val, Split::test};

  std::map<std::string, Split> assignment;
  for (const SpeakerInfo& spk : speakers) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < 3; ++s) {
      const double size_deficit =
          ratios[s] - static_cast<double>(counts[s]) / total;
      const double dia_total = static_cast<double>(dialect_totals[spk.dialect]);
      const double dia_deficit =
          ratios[s] -
          static_cast<double>(dialect_counts[s][spk.dialect]) / dia_total;
      const double score = size_deficit / ratios[s] + dia_deficit / ratios[s];
      if (score > best_score) {
        best_score = score;
        best = s;
      }
    }
    assignment[spk.id] = kSplits[best];
    counts[best] += spk.count;
    dialect_counts[best][spk.dialect] += spk.count;
  }
  for (Sample& s : manifest.samples) s.split = assignment.at(s.speaker_id);
  return assignment;
}

// ---------------------------------------------------------------------------
// Audio quality estimators
// ---------------------------------------------------------------------------

/// Frame-energy SNR: the lowest-energy decile of frames is taken as the noise
/// floor, the rest as signal. Returns +infinity when the floor is exactly 0.
inline double snr_estimate(const std::vector<double>& wave, std::size_t frame_len,
                           std::size_t hop) {
  if (frame_len < 1 || hop < 1) throw ConfigError("frame_len and hop must be >= 1");
  if (wave.size() < frame_len)
    throw DataError("waveform shorter than one frame (" + std::to_string(wave.size()) +
                    " < " + std::to_string(frame_len) + ")");
  std::vector<double> energies;
  for (std::size_t start = 0; start + frame_len <= wave.size(); start += hop) {
    double e = 0.0;
    for (std::size_t i = start; i < start + frame_len; ++i) e += wave[i] * wave[i];
    energies.push_back(e / static_cast<double>(frame_len));
  }
  std::sort(energies.begin(), energies.end());
  const std::size_t n_noise = std::max<std::size_t>(1, energies.size() / 10);
  if (n_noise >= energies.size())
    throw DataError("too few frames for an SNR estimate");
  double noise = 0.0, signal = 0.0;
  for (std::size_t i = 0; i < n_noise; ++i) noise += energies[i];
  for (std::size_t i = n_noise; i < energies.size(); ++i) signal += energies[i];
  noise /= static_cast<double>(n_noise);
  signal /= static_cast<double>(energies.size() - n_noise);
  if (signal == 0.0) throw DataError("all-zero waveform, SNR undefined");
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

/// Energy ratio of separately provided direct and reverberant components.
inline double srr_components(const std::vector<double>& direct,
                             const std::vector<double>& reverberant) {
  if (direct.size() != reverberant.size())
    throw DimensionError("srr: component lengths differ (" +
                         std::to_string(direct.size()) + " vs " +
                         std::to_string(reverberant.size()) + ")");
  double ed = 0.0, er = 0.0;
  for (double v : direct) ed += v * v;
  for (double v : reverberant) er += v * v;
  if (er == 0.0) throw DataError("zero reverberant energy, SRR undefined");
  return 10.0 * std::log10(ed / er);
}

// ---------------------------------------------------------------------------
// Inter-rater agreement
// ---------------------------------------------------------------------------

struct RaterTable {
  struct Item {
    std::string id;
    std::size_t rating_a = 0;
    std::size_t rating_b = 0;
  };
  std::vector<Item> items;
  std::size_t num_classes = 0;
};

/// Quadratic weighted kappa over an ordinal two-rater table.
inline double qwk(const RaterTable& table) {
  const std::size_t k = table.num_classes;
  if (k < 2) throw ConfigError("qwk needs at least 2 classes");
  if (table.items.empty()) throw DataError("qwk needs at least 1 item");
  std::vector<double> observed(k * k, 0.0);
  std::vector<double> marg_a(k, 0.0), marg_b(k, 0.0);
  for (const auto& item : table.items) {
    if (item.rating_a >= k || item.rating_b >= k)
      throw DataError("rating out of range for item " + item.id);
    observed[item.rating_a * k + item.rating_b] += 1.0;
    marg_a[item.rating_a] += 1.0;
    marg_b[item.rating_b] += 1.0;
  }
  const double n = static_cast<double>(table.items.size());
  const double denom_w = static_cast<double>((k - 1) * (k - 1));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      const double w = d * d / denom_w;
      num += w * observed[i * k + j];
      den += w * marg_a[i] * marg_b[j] / n;
    }
  if (den == 0.0) throw DataError("degenerate rating table, kappa undefined");
  return 1.0 - num / den;
}

// ---------------------------------------------------------------------------
// Text statistics
// ---------------------------------------------------------------------------

struct ScoredTerm {
  std::string term;
  double score = 0.0;
};

/// Per-class top-k TF-IDF terms, each class treated as one aggregate document.
/// tf is relative frequency within the class, idf = ln(classes / df).
/// Only positive scores are returned; ties break lexicographically.
inline std::map<std::string, std::vector<ScoredTerm>> tfidf_top_terms(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& docs,
    std::size_t top_k) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::map<std::string, std::size_t> totals;
  for (const auto& [label, tokens] : docs) {
    auto& c = counts[label];
    for (const std::string& t : tokens) c[t] += 1;
    totals[label] += tokens.size();
  }
  if (counts.size() < 2) throw DataError("tf-idf needs at least 2 classes");
  for (const auto& [label, total] : totals)
    if (total == 0) throw DataError("empty class document: " + label);

  std::map<std::string, std::size_t> df;
  for (const auto& [label, c] : counts)
    for (const auto& [term, cnt] : c) {
      (void)cnt;
      df[term] += 1;
    }

  const double n_classes = static_cast<double>(counts.size());
  std::map<std::string, std::vector<ScoredTerm>> out;
  for (const auto& [label, c] : counts) {
    std::vector<ScoredTerm> scored;
    for (const auto& [term, cnt] : c) {
      const double tf = static_cast<double>(cnt) / static_cast<double>(totals[label]);
      const double idf = std::log(n_classes / static_cast<double>(df[term]));
      const double score = tf * idf;
      if (score > 0.0) scored.push_back({term, score});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredTerm& a, const ScoredTerm& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.term < b.term;
    });
    if (scored.size() > top_k) scored.resize(top_k);
    out[label] = std::move(scored);
  }
  return out;
}

inline std::vector<std::string> whitespace_tokenize(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> tokens;
  std::string t;
  while (is >> t) tokens.push_back(t);
  return tokens;
}

struct TokenStats {
  std::size_t samples = 0;
  std::size_t tokens = 0;
  double avg_tokens_per_sample() const {
    return samples == 0 ? 0.0 : static_cast<double>(tokens) / static_cast<double>(samples);
  }
};

/// Per-dialect and overall token counts over transcripts. The tokenizer is
/// pluggable; the default counts the stored token lists as-is.
inline std::map<std::string, TokenStats> token_stats(
    const CorpusManifest& manifest,
    const std::function<std::vector<std::string>(const std::vector<std::string>&)>&
        tokenizer = {}) {
  std::map<std::string, TokenStats> out;
  for (const Sample& s : manifest.samples) {
    if (!s.transcript) throw DataError("sample " + s.id + " has no transcript");
    const std::vector<std::string> tokens =
        tokenizer ? tokenizer(*s.transcript) : *s.transcript;
    const std::string cls = class_names(Attribute::dialect)[s.dialect];
    out[cls].samples += 1;
    out[cls].tokens += tokens.size();
    out["overall"].samples += 1;
    out["overall"].tokens += tokens.size();
  }
  return out;
}

}  // namespace arl
