#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "arl/data.hpp"
#include "arl/errors.hpp"
#include "arl/tensor.hpp"

namespace arl {

/// Synthetic corpus with controllable per-attribute linear leakage.
struct SynthConfig {
  std::size_t num_speakers = 50;
  std::size_t samples_per_speaker = 20;
  std::size_t frames_min = 20;
  std::size_t frames_max = 40;
  std::size_t input_dim = 16;
  std::map<Attribute, double> leak_strengths = {
      {Attribute::dialect, 1.0}, {Attribute::gender, 1.0}, {Attribute::age, 0.0}};
  double noise_std = 0.5;
  double frame_rate = 50.0;  // frames per second, for duration bookkeeping
  std::uint64_t seed = 0;

  void validate() const {
    if (num_speakers < 1 || samples_per_speaker < 1)
      throw ConfigError("speaker and sample counts must be >= 1");
    if (frames_min < 1 || frames_max < frames_min)
      throw ConfigError("frames range invalid");
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    for (const auto& [attr, v] : leak_strengths) {
      (void)attr;
      if (v < 0.0) throw ConfigError("leak strengths must be >= 0");
    }
    if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  }

  double leak(Attribute a) const {
    auto it = leak_strengths.find(a);
    return it == leak_strengths.end() ? 0.0 : it->second;
  }
};

/// Fixed seeded class-direction matrix [D_in x C] for one attribute.
inline Tensor attribute_projection(const SynthConfig& cfg, Attribute a) {
  std::mt19937_64 rng(cfg.seed * 0x2545f4914f6cdd1dull +
                      static_cast<std::uint64_t>(a) * 0x9e3779b97f4a7c15ull + 17);
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor w = Tensor::zeros({cfg.input_dim, num_classes(a)});
  for (double& v : w.values) v = dist(rng);
  return w;
}

inline CorpusManifest generate(const SynthConfig& cfg) {
  cfg.validate();
  std::map<Attribute, Tensor> proj;
  for (Attribute a : kAttributes) proj[a] = attribute_projection(cfg, a);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> frames_dist(cfg.frames_min, cfg.frames_max);
  std::normal_distribution<double> noise(0.0, 1.0);

  CorpusManifest manifest;
  for (std::size_t spk = 0; spk < cfg.num_speakers; ++spk) {
    std::size_t dialect = rng() % num_classes(Attribute::dialect);
    std::size_t gender = rng() % num_classes(Attribute::gender);
    std::size_t age = rng() % num_classes(Attribute::age);
    for (std::size_t k = 0; k < cfg.samples_per_speaker; ++k) {
      Sample s;
      s.speaker_id = "spk" + std::to_string(spk);
      s.id = s.speaker_id + "_u" + std::to_string(k);
      s.dialect = dialect;
      s.gender = gender;
      s.age = age;
      const std::size_t t = frames_dist(rng);
      s.duration_seconds = static_cast<double>(t) / cfg.frame_rate;
      s.frames = Tensor::zeros({t, cfg.input_dim});
      // class mean: sum over attributes of leak * projection column
      std::vector<double> mean(cfg.input_dim, 0.0);
      for (Attribute a : kAttributes) {
        const double leak = cfg.leak(a);
        if (leak == 0.0) continue;
        for (std::size_t d = 0; d < cfg.input_dim; ++d)
          mean[d] += leak * proj[a].at(d, s.label(a));
      }
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t d = 0; d < cfg.input_dim; ++d)
          s.frames.at(i, d) =
              mean[d] + (cfg.noise_std > 0.0 ? cfg.noise_std * noise(rng) : 0.0);
      manifest.samples.push_back(std::move(s));
    }
  }
  return manifest;
}

struct DialectStats {
  std::map<Split, std::size_t> split_counts;
  std::size_t unsplit = 0;
  std::size_t total = 0;
  double hours = 0.0;
};

inline std::map<std::size_t, DialectStats> corpus_stats(const CorpusManifest& m) {
  if (m.samples.empty()) throw DataError("empty manifest");
  std::map<std::size_t, DialectStats> by_dialect;
  for (const Sample& s : m.samples) {
    DialectStats& d = by_dialect[s.dialect];
    d.total += 1;
    d.hours += s.duration_seconds / 3600.0;
    if (s.split)
      d.split_counts[*s.split] += 1;
    else
      d.unsplit += 1;
  }
  return by_dialect;
}

/// Per-dialect counts, train/val/test splits and total hours as a text table.
inline std::string render_stats(const CorpusManifest& m) {
  auto stats = corpus_stats(m);
  std::ostringstream os;
  os << std::left << std::setw(20) << "Dialect" << std::right << std::setw(9) << "Train"
     << std::setw(7) << "Val" << std::setw(7) << "Test" << std::setw(9) << "Total"
     << std::setw(10) << "# hours" << "\n";
  std::size_t tot[4] = {0, 0, 0, 0};
  double hours = 0.0;
  auto count = [](const DialectStats& d, Split s) {
    auto it = d.split_counts.find(s);
    return it == d.split_counts.end() ? std::size_t{0} : it->second;
  };
  for (const auto& [dia, d] : stats) {
    os << std::left << std::setw(20) << class_names(Attribute::dialect)[dia] << std::right
       << std::setw(9) << count(d, Split::train) << std::setw(7) << count(d, Split::val)
       << std::setw(7) << count(d, Split::test) << std::setw(9) << d.total << std::setw(10)
       << std::fixed << std::setprecision(2) << d.hours << "\n";
    tot[0] += count(d, Split::train);
    tot[1] += count(d, Split::val);
    tot[2] += count(d, Split::test);
    tot[3] += d.total;
    hours += d.hours;
  }
  os << std::left << std::setw(20) << "Overall" << std::right << std::setw(9) << tot[0]
     << std::setw(7) << tot[1] << std::setw(7) << tot[2] << std::setw(9) << tot[3]
     << std::setw(10) << std::fixed << std::setprecision(2) << hours << "\n";
  return os.str();
}

}  // namespace arl
