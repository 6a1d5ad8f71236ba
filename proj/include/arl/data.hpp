#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "arl/errors.hpp"
#include "arl/tensor.hpp"

namespace arl {

enum class Attribute { dialect, gender, age };

constexpr std::array<Attribute, 3> kAttributes = {Attribute::dialect, Attribute::gender,
                                                  Attribute::age};

inline std::size_t num_classes(Attribute a) {
  switch (a) {
    case Attribute::dialect: return 2;
    case Attribute::gender: return 2;
    case Attribute::age: return 5;
  }
  return 0;
}

inline std::string attribute_name(Attribute a) {
  switch (a) {
    case Attribute::dialect: return "dialect";
    case Attribute::gender: return "gender";
    case Attribute::age: return "age";
  }
  return "?";
}

inline Attribute attribute_from_name(const std::string& s) {
  for (Attribute a : kAttributes)
    if (attribute_name(a) == s) return a;
  throw ConfigError("unknown attribute: " + s);
}

inline const std::vector<std::string>& class_names(Attribute a) {
  static const std::vector<std::string> dialects = {"moldavian", "standard_romanian"};
  static const std::vector<std::string> genders = {"male", "female"};
  static const std::vector<std::string> ages = {"30-40", "40-50", "50-60", "60-70", "other"};
  switch (a) {
    case Attribute::dialect: return dialects;
    case Attribute::gender: return genders;
    case Attribute::age: return ages;
  }
  return dialects;
}

inline std::size_t class_index(Attribute a, const std::string& label) {
  const auto& names = class_names(a);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == label) return i;
  throw DataError("unknown " + attribute_name(a) + " label: " + label);
}

enum class Split { train, val, test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split: " + s);
}

/// One utterance: features plus attribute labels and speaker identity.
struct Sample {
  std::string id;
  std::string speaker_id;
  Tensor frames;  // [T x D_in]; may be empty when features live on disk
  std::size_t dialect = 0;
  std::size_t gender = 0;
  std::size_t age = 0;
  double duration_seconds = 0.0;
  std::optional<Split> split;
  std::optional<std::vector<std::string>> transcript;
  std::optional<std::string> features_path;

  std::size_t label(Attribute a) const {
    switch (a) {
      case Attribute::dialect: return dialect;
      case Attribute::gender: return gender;
      case Attribute::age: return age;
    }
    return 0;
  }
};

struct CorpusManifest {
  std::vector<Sample> samples;

  std::vector<const Sample*> in_split(Split s) const {
    std::vector<const Sample*> out;
    for (const Sample& smp : samples)
      if (smp.split && *smp.split == s) out.push_back(&smp);
    return out;
  }

  void check_integrity() const {
    std::set<std::string> ids;
    std::map<std::string, std::tuple<std::size_t, std::size_t, std::size_t>> spk_attrs;
    std::map<std::string, Split> spk_split;
    for (const Sample& s : samples) {
      if (!ids.insert(s.id).second)
        throw DataError("duplicate sample id: " + s.id);
      auto attrs = std::make_tuple(s.dialect, s.gender, s.age);
      auto [it, fresh] = spk_attrs.emplace(s.speaker_id, attrs);
      if (!fresh && it->second != attrs)
        throw DataError("speaker " + s.speaker_id + " has inconsistent attributes");
      if (s.split) {
        auto [sit, sfresh] = spk_split.emplace(s.speaker_id, *s.split);
        if (!sfresh && sit->second != *s.split)
          throw DataError("speaker " + s.speaker_id + " appears in more than one split");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Feature container: magic "MRVF1", u32 T, u32 D little-endian, then T*D f32.
// Waveforms use the same container with D = 1.
// ---------------------------------------------------------------------------

inline void write_features(const std::string& path, const Tensor& frames) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write("MRVF1", 5);
  const std::uint32_t t = static_cast<std::uint32_t>(frames.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(frames.cols());
  f.write(reinterpret_cast<const char*>(&t), 4);
  f.write(reinterpret_cast<const char*>(&d), 4);
  for (double v : frames.values) {
    const float fv = static_cast<float>(v);
    f.write(reinterpret_cast<const char*>(&fv), 4);
  }
  if (!f) throw IoError("write failed: " + path);
}

inline Tensor read_features(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[5];
  f.read(magic, 5);
  if (!f || std::string(magic, 5) != "MRVF1")
    throw ParseError("bad feature file magic in " + path);
  std::uint32_t t = 0, d = 0;
  f.read(reinterpret_cast<char*>(&t), 4);
  f.read(reinterpret_cast<char*>(&d), 4);
  if (!f) throw ParseError("truncated feature header in " + path);
  std::vector<double> vals(static_cast<std::size_t>(t) * d);
  for (double& v : vals) {
    float fv = 0.0f;
    f.read(reinterpret_cast<char*>(&fv), 4);
    v = static_cast<double>(fv);
  }
  if (!f) throw ParseError("truncated feature data in " + path);
  return Tensor({t, d}, std::move(vals));
}

// ---------------------------------------------------------------------------
// Manifest: JSONL, one sample per line.
// Fields: id, speaker_id, dialect, gender, age, duration_seconds,
//         split (optional), transcript (optional), features_path (optional).
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json sample_to_json(const Sample& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["speaker_id"] = s.speaker_id;
  j["dialect"] = class_names(Attribute::dialect)[s.dialect];
  j["gender"] = class_names(Attribute::gender)[s.gender];
  j["age"] = class_names(Attribute::age)[s.age];
  j["duration_seconds"] = s.duration_seconds;
  if (s.split) j["split"] = split_name(*s.split);
  if (s.transcript) j["transcript"] = *s.transcript;
  if (s.features_path) j["features_path"] = *s.features_path;
  return j;
}

inline Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.id = j.at("id").get<std::string>();
  s.speaker_id = j.at("speaker_id").get<std::string>();
  s.dialect = class_index(Attribute::dialect, j.at("dialect").get<std::string>());
  s.gender = class_index(Attribute::gender, j.at("gender").get<std::string>());
  s.age = class_index(Attribute::age, j.at("age").get<std::string>());
  s.duration_seconds = j.at("duration_seconds").get<double>();
  if (j.contains("split")) s.split = split_from_name(j.at("split").get<std::string>());
  if (j.contains("transcript"))
    s.transcript = j.at("transcript").get<std::vector<std::string>>();
  if (j.contains("features_path")) s.features_path = j.at("features_path").get<std::string>();
  return s;
}

inline void write_manifest(const CorpusManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  for (const Sample& s : m.samples) f << sample_to_json(s).dump() << "\n";
  if (!f) throw IoError("write failed: " + path);
}

inline CorpusManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  CorpusManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      m.samples.push_back(sample_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  m.check_integrity();
  return m;
}

/// Loads on-disk feature files for samples that reference one.
inline void load_features(CorpusManifest& m, const std::string& base_dir) {
  for (Sample& s : m.samples) {
    if (s.features_path && s.frames.size() == 0)
      s.frames = read_features(base_dir.empty() ? *s.features_path
                                                : base_dir + "/" + *s.features_path);
  }
}

}  // namespace arl
