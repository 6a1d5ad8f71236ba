#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arl/config.hpp"
#include "arl/corpus.hpp"
#include "arl/data.hpp"
#include "arl/errors.hpp"
#include "arl/eval.hpp"
#include "arl/meta.hpp"
#include "arl/model.hpp"
#include "arl/synth.hpp"
#include "arl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// write temp then rename, so partial output never lands under the final name
template <typename Fn>
void atomic_write(const std::string& path, Fn&& writer) {
  const std::string tmp = path + ".tmp";
  writer(tmp);
  fs::rename(tmp, path);
}

arl::ConfigFile load_config(const std::string& config_path,
                            const std::vector<std::string>& overrides) {
  arl::ConfigFile cfg;
  if (!config_path.empty()) cfg = arl::ConfigFile::parse_file(config_path);
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw arl::ConfigError("--set expects section.key=value, got: " + ov);
    cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  return cfg;
}

arl::CorpusManifest load_corpus(const std::string& manifest_path) {
  arl::CorpusManifest m = arl::read_manifest(manifest_path);
  arl::load_features(m, fs::path(manifest_path).parent_path().string());
  return m;
}

void require_features(const arl::CorpusManifest& m) {
  for (const arl::Sample& s : m.samples)
    if (s.frames.size() == 0)
      throw arl::DataError("sample " + s.id + " carries no features");
}

void write_eval_json(const std::string& path, const std::string& name,
                     const arl::RoleMap& roles, const arl::EvalReport& rep) {
  ordered_json j;
  j["name"] = name;
  j["roles"] = arl::roles_to_string(roles);
  j["accuracy"] = rep.accuracy;
  j["precision"] = rep.precision;
  j["recall"] = rep.recall;
  j["f1"] = rep.f1;
  atomic_write(path, [&](const std::string& p) {
    std::ofstream f(p);
    if (!f) throw arl::IoError("cannot open for write: " + p);
    f << j.dump(2) << "\n";
  });
}

void print_report(const arl::EvalReport& rep) {
  std::cout << "accuracy  " << rep.accuracy << "\n"
            << "precision " << rep.precision << "\n"
            << "recall    " << rep.recall << "\n"
            << "f1        " << rep.f1 << "\n";
}

int cmd_synth(const std::string& config_path, const std::vector<std::string>& overrides,
              long long seed, const std::string& out_dir) {
  arl::ConfigFile cfg = load_config(config_path, overrides);
  if (seed >= 0) cfg.set("synth.seed", std::to_string(seed));
  arl::RunConfig rc = arl::RunConfig::from(cfg);

  fs::create_directories(fs::path(out_dir) / "features");
  arl::CorpusManifest manifest = arl::generate(rc.synth);
  for (arl::Sample& s : manifest.samples) {
    const std::string rel = "features/" + s.id + ".bin";
    atomic_write((fs::path(out_dir) / rel).string(),
                 [&](const std::string& p) { arl::write_features(p, s.frames); });
    s.features_path = rel;
  }
  atomic_write((fs::path(out_dir) / "manifest.jsonl").string(),
               [&](const std::string& p) { arl::write_manifest(manifest, p); });
  std::cout << arl::render_stats(manifest);
  std::cout << "wrote " << manifest.samples.size() << " samples to " << out_dir << "\n";
  return 0;
}

int cmd_split(const std::string& manifest_path, const std::string& ratios_text,
              long long seed, const std::string& out_path) {
  std::array<double, 3> ratios{};
  std::istringstream is(ratios_text);
  std::string part;
  for (double& r : ratios) {
    if (!std::getline(is, part, ',')) throw arl::ConfigError("--ratios needs three values");
    r = std::stod(part);
  }
  arl::CorpusManifest m = arl::read_manifest(manifest_path);
  arl::speaker_disjoint_split(m, ratios, static_cast<std::uint64_t>(seed));
  atomic_write(out_path, [&](const std::string& p) { arl::write_manifest(m, p); });
  std::cout << arl::render_stats(m);
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::vector<std::string>& overrides, const std::string& mode,
              long long seed, const std::string& out_dir) {
  arl::ConfigFile cfg = load_config(config_path, overrides);
  if (!mode.empty()) cfg.set("train.mode", mode);
  if (seed >= 0) cfg.set("train.seed", std::to_string(seed));
  arl::RunConfig rc = arl::RunConfig::from(cfg);

  arl::CorpusManifest manifest = load_corpus(manifest_path);
  require_features(manifest);
  auto train_split = manifest.in_split(arl::Split::train);
  auto val_split = manifest.in_split(arl::Split::val);
  auto test_split = manifest.in_split(arl::Split::test);
  if (train_split.empty() || val_split.empty() || test_split.empty())
    throw arl::DataError("manifest needs non-empty train/val/test splits");
  if (manifest.samples.front().frames.cols() != rc.encoder.input_dim)
    throw arl::ConfigError("encoder.input_dim " + std::to_string(rc.encoder.input_dim) +
                           " does not match feature width " +
                           std::to_string(manifest.samples.front().frames.cols()));

  arl::ModelState state = arl::init_model(rc.encoder, rc.task.seed);
  arl::attach_gammas(state, rc.task);

  fs::create_directories(out_dir);
  std::ostringstream trace;
  arl::write_trace_header(trace, rc.task);
  for (std::size_t e = 0; e < rc.task.epochs; ++e) {
    std::vector<arl::TraceRow> rows =
        rc.mode == arl::TrainMode::meta
            ? arl::train_epoch_meta(train_split, val_split, state, rc.task, rc.meta)
            : arl::train_epoch(train_split, state, rc.task);
    arl::write_trace_rows(trace, rows);
    std::cout << "epoch " << e << " task_loss " << rows.back().losses.task_loss << "\n";
  }

  atomic_write((fs::path(out_dir) / "trace.csv").string(), [&](const std::string& p) {
    std::ofstream f(p);
    if (!f) throw arl::IoError("cannot open for write: " + p);
    f << trace.str();
  });
  atomic_write((fs::path(out_dir) / "checkpoint.bin").string(),
               [&](const std::string& p) { arl::save_checkpoint(state, p); });

  const arl::Attribute primary = arl::primary_attribute(rc.task.roles);
  arl::EvalReport rep = arl::evaluate_model(state, test_split, primary);
  write_eval_json((fs::path(out_dir) / "eval.json").string(),
                  fs::path(out_dir).filename().string(), rc.task.roles, rep);
  atomic_write((fs::path(out_dir) / "confusion.csv").string(), [&](const std::string& p) {
    arl::confusion_csv(rep, arl::class_names(primary), p);
  });
  std::cout << "test split (" << arl::attribute_name(primary) << "):\n";
  print_report(rep);
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& manifest_path,
             const std::string& split, const std::string& attribute,
             const std::string& out_csv) {
  arl::ModelState state = arl::load_checkpoint(checkpoint_path);
  arl::CorpusManifest manifest = load_corpus(manifest_path);
  require_features(manifest);
  const arl::Attribute attr = arl::attribute_from_name(attribute);
  auto samples = manifest.in_split(arl::split_from_name(split));
  arl::EvalReport rep = arl::evaluate_model(state, samples, attr);
  print_report(rep);
  if (!out_csv.empty())
    atomic_write(out_csv, [&](const std::string& p) {
      arl::confusion_csv(rep, arl::class_names(attr), p);
    });
  return 0;
}

int cmd_probe(const std::string& checkpoint_path, const std::string& manifest_path,
              const std::string& split, const std::string& attribute, long long seed) {
  arl::ModelState state = arl::load_checkpoint(checkpoint_path);
  arl::CorpusManifest manifest = load_corpus(manifest_path);
  require_features(manifest);
  const arl::Attribute attr = arl::attribute_from_name(attribute);
  auto samples = manifest.in_split(arl::split_from_name(split));
  const double acc =
      arl::probe(state, samples, attr, seed >= 0 ? static_cast<std::uint64_t>(seed) : 0);
  std::cout << "probe " << attribute << " accuracy " << acc << "\n";
  return 0;
}

int cmd_analyze_qwk(const std::string& ratings_path, long long classes) {
  std::ifstream f(ratings_path);
  if (!f) throw arl::IoError("cannot open: " + ratings_path);
  arl::RaterTable table;
  table.num_classes = static_cast<std::size_t>(classes);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    arl::RaterTable::Item item;
    std::string a, b;
    if (!std::getline(is, item.id, ',') || !std::getline(is, a, ',') ||
        !std::getline(is, b, ','))
      throw arl::ParseError(ratings_path + ":" + std::to_string(lineno) +
                            ": expected id,rating_a,rating_b");
    item.rating_a = std::stoul(a);
    item.rating_b = std::stoul(b);
    table.items.push_back(std::move(item));
  }
  std::cout << std::fixed << std::setprecision(4) << arl::qwk(table) << "\n";
  return 0;
}

int cmd_analyze_tfidf(const std::string& manifest_path, long long top) {
  arl::CorpusManifest m = arl::read_manifest(manifest_path);
  std::vector<std::pair<std::string, std::vector<std::string>>> docs;
  for (const arl::Sample& s : m.samples) {
    if (!s.transcript) throw arl::DataError("sample " + s.id + " has no transcript");
    docs.emplace_back(arl::class_names(arl::Attribute::dialect)[s.dialect], *s.transcript);
  }
  auto top_terms = arl::tfidf_top_terms(docs, static_cast<std::size_t>(top));
  std::cout << "class,word,score\n";
  for (const auto& [cls, terms] : top_terms)
    for (const auto& t : terms)
      std::cout << cls << "," << t.term << "," << t.score << "\n";
  return 0;
}

int cmd_analyze_snr(const std::string& wave_path, long long frame_len, long long hop) {
  arl::Tensor wave = arl::read_features(wave_path);
  if (wave.cols() != 1)
    throw arl::DataError("expected a single-channel waveform (D = 1), got D = " +
                         std::to_string(wave.cols()));
  const double snr = arl::snr_estimate(wave.values, static_cast<std::size_t>(frame_len),
                                       static_cast<std::size_t>(hop));
  std::cout << "snr_db " << snr << "\n";
  return 0;
}

int cmd_analyze_stats(const std::string& manifest_path) {
  arl::CorpusManifest m = arl::read_manifest(manifest_path);
  std::cout << arl::render_stats(m);
  return 0;
}

int cmd_report(const std::vector<std::string>& eval_paths) {
  std::vector<std::tuple<std::string, arl::RoleMap, arl::EvalReport>> rows;
  for (const std::string& path : eval_paths) {
    std::ifstream f(path);
    if (!f) throw arl::IoError("cannot open: " + path);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded()) throw arl::ParseError("invalid JSON in " + path);
    arl::EvalReport rep;
    rep.accuracy = j.at("accuracy").get<double>();
    rep.precision = j.at("precision").get<double>();
    rep.recall = j.at("recall").get<double>();
    rep.f1 = j.at("f1").get<double>();
    rows.emplace_back(j.at("name").get<std::string>(),
                      arl::parse_roles(j.at("roles").get<std::string>()), rep);
  }
  std::cout << arl::render_results_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial representation learning toolkit"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, out_path, mode, split = "test";
  std::string attribute = "dialect", ratios = "0.8,0.1,0.1", checkpoint_path;
  std::string wave_path, ratings_path;
  std::vector<std::string> overrides, eval_paths;
  long long seed = -1, classes = 5, top = 10, frame_len = 256, hop = 128;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--config", config_path);
  synth->add_option("--set", overrides, "override config keys, section.key=value");
  synth->add_option("--seed", seed);
  synth->add_option("--out", out_path)->required();

  auto* split_cmd = app.add_subcommand("split", "assign speaker-disjoint splits");
  split_cmd->add_option("--manifest", manifest_path)->required();
  split_cmd->add_option("--ratios", ratios, "train,val,test fractions");
  split_cmd->add_option("--seed", seed);
  split_cmd->add_option("--out", out_path)->required();

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--manifest", manifest_path)->required();
  train->add_option("--config", config_path);
  train->add_option("--set", overrides);
  train->add_option("--mode", mode)->check(CLI::IsMember({"fixed-gamma", "meta"}));
  train->add_option("--seed", seed);
  train->add_option("--out", out_path)->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
  eval_cmd->add_option("--manifest", manifest_path)->required();
  eval_cmd->add_option("--split", split);
  eval_cmd->add_option("--attribute", attribute);
  eval_cmd->add_option("--out", out_path, "confusion matrix CSV");

  auto* probe_cmd = app.add_subcommand("probe", "linear probe on frozen encoder");
  probe_cmd->add_option("--checkpoint", checkpoint_path)->required();
  probe_cmd->add_option("--manifest", manifest_path)->required();
  probe_cmd->add_option("--split", split);
  probe_cmd->add_option("--attribute", attribute)->required();
  probe_cmd->add_option("--seed", seed);

  auto* analyze = app.add_subcommand("analyze", "corpus analyses");
  analyze->require_subcommand(1);
  auto* qwk_cmd = analyze->add_subcommand("qwk", "quadratic weighted kappa");
  qwk_cmd->add_option("--ratings", ratings_path)->required();
  qwk_cmd->add_option("--classes", classes);
  auto* tfidf_cmd = analyze->add_subcommand("tfidf", "per-dialect distinctive terms");
  tfidf_cmd->add_option("--manifest", manifest_path)->required();
  tfidf_cmd->add_option("--top", top);
  auto* snr_cmd = analyze->add_subcommand("snr", "frame-energy SNR estimate");
  snr_cmd->add_option("--wave", wave_path)->required();
  snr_cmd->add_option("--frame-len", frame_len);
  snr_cmd->add_option("--hop", hop);
  auto* stats_cmd = analyze->add_subcommand("stats", "dataset statistics table");
  stats_cmd->add_option("--manifest", manifest_path)->required();

  auto* report = app.add_subcommand("report", "results table from eval JSON files");
  report->add_option("--eval", eval_paths, "eval.json files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(config_path, overrides, seed, out_path);
    if (split_cmd->parsed()) return cmd_split(manifest_path, ratios, seed, out_path);
    if (train->parsed())
      return cmd_train(manifest_path, config_path, overrides, mode, seed, out_path);
    if (eval_cmd->parsed())
      return cmd_eval(checkpoint_path, manifest_path, split, attribute, out_path);
    if (probe_cmd->parsed())
      return cmd_probe(checkpoint_path, manifest_path, split, attribute, seed);
    if (analyze->parsed()) {
      if (qwk_cmd->parsed()) return cmd_analyze_qwk(ratings_path, classes);
      if (tfidf_cmd->parsed()) return cmd_analyze_tfidf(manifest_path, top);
      if (snr_cmd->parsed()) return cmd_analyze_snr(wave_path, frame_len, hop);
      if (stats_cmd->parsed()) return cmd_analyze_stats(manifest_path);
    }
    if (report->parsed()) return cmd_report(eval_paths);
  } catch (const arl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const arl::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const arl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const arl::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
