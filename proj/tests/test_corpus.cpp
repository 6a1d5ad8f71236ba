#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "arl/corpus.hpp"
#include "arl/synth.hpp"

using namespace arl;

namespace {

CorpusManifest equal_speaker_corpus(std::size_t n_speakers, std::size_t per_speaker,
                                    std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_speakers = n_speakers;
  cfg.samples_per_speaker = per_speaker;
  cfg.input_dim = 2;
  cfg.noise_std = 0.0;
  cfg.leak_strengths = {};
  cfg.seed = seed;
  return generate(cfg);
}

// independently coded QWK reference: per-item observed weights against an
// expectation assembled from rater probability marginals
double qwk_reference(const RaterTable& t) {
  const double k1 = static_cast<double>(t.num_classes - 1);
  const double n = static_cast<double>(t.items.size());
  double observed = 0.0;
  std::vector<double> pa(t.num_classes, 0.0), pb(t.num_classes, 0.0);
  for (const auto& item : t.items) {
    const double d = (static_cast<double>(item.rating_a) -
                      static_cast<double>(item.rating_b)) / k1;
    observed += d * d / n;
    pa[item.rating_a] += 1.0 / n;
    pb[item.rating_b] += 1.0 / n;
  }
  double expected = 0.0;
  for (std::size_t i = 0; i < t.num_classes; ++i)
    for (std::size_t j = 0; j < t.num_classes; ++j) {
      const double d = (static_cast<double>(i) - static_cast<double>(j)) / k1;
      expected += pa[i] * pb[j] * d * d;
    }
  return 1.0 - observed / expected;
}

RaterTable table_from_counts(const std::vector<std::vector<std::size_t>>& counts) {
  RaterTable t;
  t.num_classes = counts.size();
  std::size_t id = 0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t j = 0; j < counts.size(); ++j)
      for (std::size_t r = 0; r < counts[i][j]; ++r)
        t.items.push_back({"i" + std::to_string(id++), i, j});
  return t;
}

}  // namespace

TEST_CASE("three speakers with equal ratios get one split each") {
  CorpusManifest m = equal_speaker_corpus(3, 4, 1);
  speaker_disjoint_split(m, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0);
  std::set<Split> seen;
  for (const Sample& s : m.samples) seen.insert(*s.split);
  CHECK(seen.size() == 3);
  m.check_integrity();
}

TEST_CASE("speaker sets across splits are always disjoint") {
  std::mt19937_64 rng(2);
  for (int iter = 0; iter < 5; ++iter) {
    CorpusManifest m = equal_speaker_corpus(5 + rng() % 40, 1 + rng() % 8, rng());
    speaker_disjoint_split(m, {0.8, 0.1, 0.1}, rng());
    std::map<Split, std::set<std::string>> speakers;
    for (const Sample& s : m.samples) speakers[*s.split].insert(s.speaker_id);
    for (const auto& [sa, seta] : speakers)
      for (const auto& [sb, setb] : speakers) {
        if (sa == sb) continue;
        for (const std::string& spk : seta) CHECK(setb.count(spk) == 0);
      }
  }
}

TEST_CASE("100 equal speakers land within 2pp of 88/6/6 and 5pp per dialect") {
  CorpusManifest m = equal_speaker_corpus(100, 10, 42);
  speaker_disjoint_split(m, {0.88, 0.06, 0.06}, 7);

  std::map<Split, double> counts;
  std::map<Split, std::map<std::size_t, double>> by_dialect;
  std::map<std::size_t, double> dialect_totals;
  for (const Sample& s : m.samples) {
    counts[*s.split] += 1;
    by_dialect[*s.split][s.dialect] += 1;
    dialect_totals[s.dialect] += 1;
  }
  const double total = static_cast<double>(m.samples.size());
  CHECK(std::abs(counts[Split::train] / total - 0.88) <= 0.02);
  CHECK(std::abs(counts[Split::val] / total - 0.06) <= 0.02);
  CHECK(std::abs(counts[Split::test] / total - 0.06) <= 0.02);
  for (const auto& [dia, dia_total] : dialect_totals) {
    const double global = dia_total / total;
    for (Split sp : {Split::train, Split::val, Split::test}) {
      const double local = by_dialect[sp][dia] / counts[sp];
      CHECK(std::abs(local - global) <= 0.05);
    }
  }
}

TEST_CASE("splitting fewer than three speakers is infeasible") {
  CorpusManifest m = equal_speaker_corpus(2, 3, 1);
  CHECK_THROWS_AS(speaker_disjoint_split(m, {0.8, 0.1, 0.1}, 0), DataError);
}

TEST_CASE("snr estimate recovers a constructed 20 dB mixture") {
  const std::size_t frame = 64;
  const std::size_t frames = 100;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  const double sigma2 = 0.01;
  const double amp = std::sqrt(2.0 * 100.0 * sigma2);  // tone power = 100x noise power
  std::vector<double> wave;
  for (std::size_t f = 0; f < frames; ++f) {
    const bool silent = f % 10 == 9;  // every tenth frame is a noise-only gap
    for (std::size_t i = 0; i < frame; ++i) {
      double v = noise(rng);
      if (!silent) v += amp * std::sin(0.37 * static_cast<double>(wave.size()));
      wave.push_back(v);
    }
  }
  const double est = snr_estimate(wave, frame, frame);
  CHECK_THAT(est, Catch::Matchers::WithinAbs(20.0, 2.0));

  // amplitude scaling cancels in the power ratio
  std::vector<double> doubled = wave;
  for (double& v : doubled) v *= 2.0;
  CHECK(snr_estimate(doubled, frame, frame) == est);
}

TEST_CASE("noise-free tone with silent gaps gives the infinity sentinel") {
  std::vector<double> wave;
  for (std::size_t f = 0; f < 20; ++f)
    for (std::size_t i = 0; i < 32; ++i)
      wave.push_back(f % 10 == 0 ? 0.0 : std::sin(0.2 * static_cast<double>(i)));
  CHECK(std::isinf(snr_estimate(wave, 32, 32)));
}

TEST_CASE("all-zero waveform has undefined snr") {
  std::vector<double> wave(512, 0.0);
  CHECK_THROWS_AS(snr_estimate(wave, 32, 32), DataError);
}

TEST_CASE("srr energy ratios") {
  std::vector<double> direct;
  for (int i = 0; i < 200; ++i) direct.push_back(std::sin(0.11 * i));
  CHECK_THAT(srr_components(direct, direct), Catch::Matchers::WithinAbs(0.0, 1e-12));

  std::vector<double> tenth = direct;
  for (double& v : tenth) v /= 10.0;
  CHECK_THAT(srr_components(direct, tenth), Catch::Matchers::WithinAbs(20.0, 1e-12));

  // convolution with a decaying impulse response, tail kept separate
  const std::vector<double> ir = {0.5, 0.25, 0.125};
  std::vector<double> reverberant(direct.size(), 0.0);
  for (std::size_t i = 0; i < direct.size(); ++i)
    for (std::size_t k = 0; k < ir.size(); ++k)
      if (i >= k + 1) reverberant[i] += ir[k] * direct[i - k - 1];
  double ed = 0.0, er = 0.0;
  for (double v : direct) ed += v * v;
  for (double v : reverberant) er += v * v;
  CHECK_THAT(srr_components(direct, reverberant),
             Catch::Matchers::WithinAbs(10.0 * std::log10(ed / er), 1e-9));

  CHECK_THROWS_AS(srr_components(direct, std::vector<double>(direct.size(), 0.0)),
                  DataError);
  CHECK_THROWS_AS(srr_components(direct, std::vector<double>(3, 1.0)), DimensionError);
}

TEST_CASE("qwk perfect agreement is exactly one") {
  RaterTable t = table_from_counts({{10, 0, 0}, {0, 7, 0}, {0, 0, 3}});
  CHECK(qwk(t) == 1.0);
}

TEST_CASE("qwk independence table is zero") {
  RaterTable t = table_from_counts({{25, 25}, {25, 25}});
  CHECK_THAT(qwk(t), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("qwk 3x3 example matches the independent reference") {
  RaterTable t = table_from_counts({{30, 5, 0}, {4, 40, 6}, {0, 5, 10}});
  CHECK_THAT(qwk(t), Catch::Matchers::WithinAbs(qwk_reference(t), 1e-12));
}

TEST_CASE("qwk bounds and order invariance") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 20; ++iter) {
    RaterTable t;
    t.num_classes = 2 + rng() % 4;
    const std::size_t n = 2 + rng() % 50;
    for (std::size_t i = 0; i < n; ++i)
      t.items.push_back({"i" + std::to_string(i),
                         static_cast<std::size_t>(rng() % t.num_classes),
                         static_cast<std::size_t>(rng() % t.num_classes)});
    double k;
    try {
      k = qwk(t);
    } catch (const DataError&) {
      continue;  // degenerate draw
    }
    CHECK(k >= -1.0 - 1e-12);
    CHECK(k <= 1.0 + 1e-12);
    std::shuffle(t.items.begin(), t.items.end(), rng);
    CHECK(qwk(t) == k);
  }
}

TEST_CASE("qwk rejects degenerate single-class tables") {
  RaterTable t = table_from_counts({{5, 0}, {0, 0}});
  CHECK_THROWS_AS(qwk(t), DataError);
}

TEST_CASE("tfidf hand-computed two-class example") {
  auto top = tfidf_top_terms({{"A", {"x", "x", "y"}}, {"B", {"y", "z"}}}, 10);
  REQUIRE(top.at("A").size() == 1);  // y is everywhere, idf 0
  CHECK(top.at("A")[0].term == "x");
  CHECK_THAT(top.at("A")[0].score,
             Catch::Matchers::WithinAbs((2.0 / 3.0) * std::log(2.0), 1e-12));
  REQUIRE(top.at("B").size() == 1);
  CHECK(top.at("B")[0].term == "z");
  for (const auto& [cls, terms] : top)
    for (const auto& t : terms) CHECK(t.score > 0.0);
  CHECK_THROWS_AS(tfidf_top_terms({{"A", {"x"}}, {"B", {}}}, 3), DataError);
}

TEST_CASE("token statistics") {
  CorpusManifest m;
  auto add = [&m](const std::string& id, std::size_t dialect,
                  std::vector<std::string> tokens) {
    Sample s;
    s.id = id;
    s.speaker_id = id;
    s.dialect = dialect;
    s.transcript = std::move(tokens);
    m.samples.push_back(std::move(s));
  };
  add("a1", 0, {"a", "b", "c"});
  auto single = token_stats(m);
  CHECK(single.at("overall").avg_tokens_per_sample() == 3.0);

  add("a2", 0, {"d", "e", "f"});
  add("b1", 1, {"1", "2", "3", "4", "5", "6"});
  auto stats = token_stats(m);
  CHECK(stats.at("moldavian").avg_tokens_per_sample() == 3.0);
  CHECK(stats.at("standard_romanian").avg_tokens_per_sample() == 6.0);
  CHECK(stats.at("overall").avg_tokens_per_sample() == 4.0);

  m.samples.push_back([] {
    Sample s;
    s.id = "no_transcript";
    s.speaker_id = "x";
    return s;
  }());
  CHECK_THROWS_WITH(token_stats(m), Catch::Matchers::ContainsSubstring("no_transcript"));
}

TEST_CASE("manifest round-trip is structurally lossless") {
  SynthConfig cfg;
  cfg.num_speakers = 6;
  cfg.samples_per_speaker = 3;
  cfg.seed = 9;
  CorpusManifest m = generate(cfg);
  m.samples[0].transcript = std::vector<std::string>{"ana", "are", "mere"};
  speaker_disjoint_split(m, {0.5, 0.25, 0.25}, 1);

  const std::string path = "manifest_roundtrip.jsonl";
  write_manifest(m, path);
  CorpusManifest back = read_manifest(path);
  REQUIRE(back.samples.size() == m.samples.size());
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    CHECK(back.samples[i].id == m.samples[i].id);
    CHECK(back.samples[i].speaker_id == m.samples[i].speaker_id);
    CHECK(back.samples[i].dialect == m.samples[i].dialect);
    CHECK(back.samples[i].gender == m.samples[i].gender);
    CHECK(back.samples[i].age == m.samples[i].age);
    CHECK(back.samples[i].duration_seconds == m.samples[i].duration_seconds);
    CHECK(back.samples[i].split == m.samples[i].split);
    CHECK(back.samples[i].transcript == m.samples[i].transcript);
  }
  std::remove(path.c_str());
}

TEST_CASE("manifest io rejects duplicates and malformed lines") {
  const std::string path = "manifest_bad.jsonl";
  {
    std::ofstream f(path);
    f << R"({"id":"a","speaker_id":"s","dialect":"moldavian","gender":"male","age":"other","duration_seconds":1.0})"
      << "\n";
    f << R"({"id":"a","speaker_id":"s","dialect":"moldavian","gender":"male","age":"other","duration_seconds":1.0})"
      << "\n";
  }
  CHECK_THROWS_WITH(read_manifest(path), Catch::Matchers::ContainsSubstring("a"));
  {
    std::ofstream f(path);
    f << "this is not json\n";
  }
  CHECK_THROWS_WITH(read_manifest(path), Catch::Matchers::ContainsSubstring(":1:"));
  {
    std::ofstream f(path);  // empty file
  }
  CHECK(read_manifest(path).samples.empty());
  std::remove(path.c_str());
}

TEST_CASE("feature files round-trip through the MRVF1 container") {
  Tensor t({3, 2}, {1.5, -2.25, 0.0, 4.5, -0.125, 7.0});  // exact in f32
  write_features("features_roundtrip.bin", t);
  Tensor back = read_features("features_roundtrip.bin");
  CHECK(back.shape == t.shape);
  CHECK(back.values == t.values);
  std::remove("features_roundtrip.bin");
}
