#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "arl/synth.hpp"
#include "arl/tensor.hpp"

using namespace arl;

namespace {

// independent softmax-regression probe on raw mean-pooled frames
double raw_probe_accuracy(const CorpusManifest& m, Attribute attr) {
  const std::size_t d = m.samples[0].frames.cols();
  const std::size_t c = num_classes(attr);
  const std::size_t n = m.samples.size();
  Tensor x = Tensor::zeros({n, d});
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& f = m.samples[i].frames;
    for (std::size_t t = 0; t < f.rows(); ++t)
      for (std::size_t j = 0; j < d; ++j) x.at(i, j) += f.at(t, j);
    for (std::size_t j = 0; j < d; ++j) x.at(i, j) /= static_cast<double>(f.rows());
    y[i] = m.samples[i].label(attr);
  }
  Tensor w = Tensor::zeros({d, c});
  Tensor b = Tensor::zeros({c});
  for (int epoch = 0; epoch < 150; ++epoch) {
    Graph g;
    auto logits = g.add_bias(g.matmul(g.constant(x), g.leaf(&w)), g.leaf(&b));
    w.zero_grad();
    b.zero_grad();
    g.backward(g.log_softmax_nll(logits, y));
    for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] -= 1.0 * (*w.grad)[i];
    for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] -= 1.0 * (*b.grad)[i];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_z = -1e300;
    for (std::size_t k = 0; k < c; ++k) {
      double z = b.values[k];
      for (std::size_t j = 0; j < d; ++j) z += x.at(i, j) * w.at(j, k);
      if (z > best_z) {
        best_z = z;
        best = k;
      }
    }
    if (best == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("zero leak and zero noise give all-zero frames") {
  SynthConfig cfg;
  cfg.num_speakers = 3;
  cfg.samples_per_speaker = 2;
  cfg.leak_strengths = {};
  cfg.noise_std = 0.0;
  for (const Sample& s : generate(cfg).samples)
    for (double v : s.frames.values) CHECK(v == 0.0);
}

TEST_CASE("same seed gives bit-identical corpora") {
  SynthConfig cfg;
  cfg.num_speakers = 5;
  cfg.samples_per_speaker = 4;
  cfg.seed = 77;
  CorpusManifest a = generate(cfg);
  CorpusManifest b = generate(cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(a.samples[i].frames.values == b.samples[i].frames.values);
    CHECK(a.samples[i].duration_seconds == b.samples[i].duration_seconds);
  }
}

TEST_CASE("speakers keep one attribute triple across all their samples") {
  SynthConfig cfg;
  cfg.num_speakers = 20;
  cfg.samples_per_speaker = 10;
  cfg.seed = 3;
  CorpusManifest m = generate(cfg);
  CHECK(m.samples.size() == 200);
  m.check_integrity();  // throws on any inconsistency
  for (const Sample& s : m.samples) {
    CHECK(s.duration_seconds >= 0.4);
    CHECK(s.duration_seconds <= 30.0);
  }
}

TEST_CASE("strong dialect leak is linearly recoverable from raw features") {
  SynthConfig cfg;
  cfg.num_speakers = 100;
  cfg.samples_per_speaker = 10;
  cfg.leak_strengths = {{Attribute::dialect, 2.0}};
  cfg.noise_std = 0.3;
  cfg.seed = 11;
  CorpusManifest m = generate(cfg);
  REQUIRE(m.samples.size() == 1000);
  CHECK(raw_probe_accuracy(m, Attribute::dialect) > 0.95);
}

TEST_CASE("probe accuracy does not decrease with leak strength") {
  double prev = 0.0;
  for (double leak : {0.05, 0.4, 2.0}) {
    SynthConfig cfg;
    cfg.num_speakers = 60;
    cfg.samples_per_speaker = 5;
    cfg.leak_strengths = {{Attribute::gender, leak}};
    cfg.noise_std = 0.5;
    cfg.seed = 13;
    const double acc = raw_probe_accuracy(generate(cfg), Attribute::gender);
    CHECK(acc >= prev);
    prev = acc;
  }
}

TEST_CASE("stats convert durations to hours and partition counts") {
  CorpusManifest m;
  for (int i = 0; i < 2; ++i) {
    Sample s;
    s.id = "s" + std::to_string(i);
    s.speaker_id = s.id;
    s.dialect = static_cast<std::size_t>(i);
    s.duration_seconds = 1800.0;
    s.split = i == 0 ? Split::train : Split::test;
    m.samples.push_back(std::move(s));
  }
  auto stats = corpus_stats(m);
  double hours = 0.0;
  std::size_t total = 0;
  for (const auto& [dia, d] : stats) {
    hours += d.hours;
    total += d.total;
  }
  CHECK_THAT(hours, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(total == m.samples.size());

  const std::string table = render_stats(m);
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("# hours"));
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("Train"));
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("moldavian"));
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("Overall"));
}
