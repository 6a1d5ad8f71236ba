#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "arl/errors.hpp"
#include "arl/meta.hpp"
#include "arl/model.hpp"
#include "arl/synth.hpp"
#include "arl/train.hpp"

namespace arl {

/// Flat key=value configuration with [section] headers. '#' starts a comment.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  static ConfigFile parse(const std::string& text, const std::string& origin = "<config>") {
    ConfigFile cfg;
    std::istringstream is(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ParseError(origin + ":" + std::to_string(lineno) + ": expected key=value");
      cfg.values_[section + "." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  /// Command-line overrides win over file contents.
  void set(const std::string& dotted_key, const std::string& value) {
    values_[dotted_key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": not a number: " + it->second);
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": not an integer: " + it->second);
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::string> values_;
};

/// "dialect:primary,gender:adversarial,age:off"
inline RoleMap parse_roles(const std::string& text) {
  RoleMap roles;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ',')) {
    const std::size_t colon = part.find(':');
    if (colon == std::string::npos)
      throw ConfigError("role entry needs attribute:role, got: " + part);
    const Attribute attr = attribute_from_name(part.substr(0, colon));
    const std::string role = part.substr(colon + 1);
    if (role == "primary")
      roles[attr] = Role::primary;
    else if (role == "adversarial")
      roles[attr] = Role::adversarial;
    else if (role == "off")
      roles[attr] = Role::off;
    else
      throw ConfigError("unknown role: " + role);
  }
  primary_attribute(roles);
  return roles;
}

inline std::string roles_to_string(const RoleMap& roles) {
  std::string out;
  for (Attribute a : kAttributes) {
    auto it = roles.find(a);
    const Role r = it == roles.end() ? Role::off : it->second;
    if (!out.empty()) out += ",";
    out += attribute_name(a) + ":" +
           (r == Role::primary ? "primary" : r == Role::adversarial ? "adversarial" : "off");
  }
  return out;
}

enum class TrainMode { fixed_gamma, meta };

/// Everything one run needs, assembled from a config file plus overrides.
struct RunConfig {
  EncoderConfig encoder;
  TaskConfig task;
  MetaConfig meta;
  SynthConfig synth;
  TrainMode mode = TrainMode::fixed_gamma;

  static RunConfig from(const ConfigFile& cfg) {
    RunConfig rc;
    rc.encoder.input_dim = cfg.get_int("encoder.input_dim", 16);
    rc.encoder.hidden_dim = cfg.get_int("encoder.hidden_dim", 32);
    rc.encoder.num_layers = cfg.get_int("encoder.num_layers", 2);

    rc.task.roles = parse_roles(cfg.get_string(
        "train.roles", "dialect:primary,gender:off,age:off"));
    rc.task.learning_rate = cfg.get_double("train.learning_rate", 0.05);
    rc.task.default_gamma_init = cfg.get_double("train.gamma_init", 0.1);
    for (Attribute a : kAttributes) {
      const std::string key = "train.gamma_init_" + attribute_name(a);
      if (cfg.has(key)) rc.task.gamma_init[a] = cfg.get_double(key, 0.1);
    }
    rc.task.gamma_max = cfg.get_double("train.gamma_max", 10.0);
    rc.task.epochs = cfg.get_int("train.epochs", 10);
    rc.task.batch_size = cfg.get_int("train.batch_size", 16);
    rc.task.seed = cfg.get_int("train.seed", 0);

    rc.meta.meta_learning_rate = cfg.get_double("meta.meta_learning_rate", 0.01);
    rc.meta.val_batch_size = cfg.get_int("meta.val_batch_size", 16);
    rc.meta.meta_every = cfg.get_int("meta.meta_every", 1);

    rc.synth.num_speakers = cfg.get_int("synth.num_speakers", 50);
    rc.synth.samples_per_speaker = cfg.get_int("synth.samples_per_speaker", 20);
    rc.synth.frames_min = cfg.get_int("synth.frames_min", 20);
    rc.synth.frames_max = cfg.get_int("synth.frames_max", 40);
    rc.synth.input_dim = cfg.get_int("synth.input_dim", 16);
    for (Attribute a : kAttributes)
      rc.synth.leak_strengths[a] =
          cfg.get_double("synth.leak_" + attribute_name(a), rc.synth.leak(a));
    rc.synth.noise_std = cfg.get_double("synth.noise_std", 0.5);
    rc.synth.seed = cfg.get_int("synth.seed", 0);

    const std::string mode = cfg.get_string("train.mode", "fixed-gamma");
    if (mode == "fixed-gamma")
      rc.mode = TrainMode::fixed_gamma;
    else if (mode == "meta")
      rc.mode = TrainMode::meta;
    else
      throw ConfigError("unknown train mode: " + mode);

    rc.encoder.validate();
    rc.task.validate();
    rc.meta.validate();
    rc.synth.validate();
    return rc;
  }
};

}  // namespace arl
