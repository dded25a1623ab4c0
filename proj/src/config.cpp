#include "dtmgp/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

class Entries {
 public:
  void add(std::string key, std::string value, std::size_t line) {
    if (auto it = map_.find(key); it != map_.end()) {
      throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "' (first set on line " +
                        std::to_string(it->second.line) + ")");
    }
    map_.emplace(std::move(key), Entry{std::move(value), line});
  }

  const Entry* find(const std::string& key) {
    auto it = map_.find(key);
    if (it == map_.end()) return nullptr;
    used_.push_back(key);
    return &it->second;
  }

  const Entry& require(const std::string& key) {
    const Entry* e = find(key);
    if (!e) throw ConfigError("missing required key '" + key + "'");
    return *e;
  }

  void reject_unused() const {
    for (const auto& [key, e] : map_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  std::map<std::string, Entry> map_;
  std::vector<std::string> used_;
};

std::string at_line(const Entry& e, const std::string& key) {
  return "line " + std::to_string(e.line) + ": " + key;
}

double get_double(Entries& entries, const std::string& key, double fallback) {
  const Entry* e = entries.find(key);
  return e ? parse_double(e->value, at_line(*e, key)) : fallback;
}

std::uint64_t get_uint(Entries& entries, const std::string& key, std::uint64_t fallback) {
  const Entry* e = entries.find(key);
  return e ? parse_uint(e->value, at_line(*e, key)) : fallback;
}

bool get_bool(Entries& entries, const std::string& key, bool fallback) {
  const Entry* e = entries.find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  throw ConfigError(at_line(*e, key) + ": expected true or false, got '" + e->value + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_double(std::string_view token, std::string_view what) {
  token = trim(token);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw ConfigError(std::string(what) + ": expected a number, got '" + std::string(token) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view token, std::string_view what) {
  token = trim(token);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw ConfigError(std::string(what) + ": expected a nonnegative integer, got '" + std::string(token) + "'");
  }
  return v;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig parse_config(std::string_view text) {
  Entries entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    entries.add(std::string(key), std::string(value), line_no);
  }

  RunConfig c;
  {
    const Entry& e = entries.require("seed");
    c.seed = parse_uint(e.value, at_line(e, "seed"));
  }
  {
    const Entry& e = entries.require("input_dim");
    c.input_dim = parse_uint(e.value, at_line(e, "input_dim"));
    if (c.input_dim == 0) throw ConfigError(at_line(e, "input_dim") + ": must be positive");
  }
  std::size_t n_layers = 0;
  {
    const Entry& e = entries.require("layers");
    n_layers = parse_uint(e.value, at_line(e, "layers"));
    if (n_layers == 0) throw ConfigError(at_line(e, "layers") + ": must be positive");
  }
  std::size_t width = c.input_dim;
  for (std::size_t h = 1; h <= n_layers; ++h) {
    const std::string p = "layer" + std::to_string(h) + ".";
    LayerSpec s;
    s.in_width = width;
    if (const Entry* e = entries.find(p + "in_width")) {
      const auto declared = parse_uint(e->value, at_line(*e, p + "in_width"));
      if (declared != width) {
        throw ConfigError(at_line(*e, p + "in_width") + ": width mismatch layer " + std::to_string(h) + " (receives " +
                          std::to_string(width) + ", declares " + std::to_string(declared) + ")");
      }
    }
    {
      const Entry& e = entries.require(p + "out_width");
      s.out_width = parse_uint(e.value, at_line(e, p + "out_width"));
      if (s.out_width == 0) throw ConfigError(at_line(e, p + "out_width") + ": must be positive");
    }
    {
      const Entry& e = entries.require(p + "level");
      const auto lv = parse_uint(e.value, at_line(e, p + "level"));
      if (lv < 1 || lv > static_cast<std::uint64_t>(kMaxLevel)) {
        throw ConfigError(at_line(e, p + "level") + ": must lie in [1, " + std::to_string(kMaxLevel) + "]");
      }
      s.level = static_cast<int>(lv);
    }
    {
      const Entry& e = entries.require(p + "kernel");
      try {
        s.kernel = TensorMarkovKernel::parse(e.value, s.in_width);
      } catch (const Error& err) {
        throw ConfigError(at_line(e, p + "kernel") + ": " + err.what());
      }
      for (std::size_t j = 0; j < s.kernel.dimension(); ++j) {
        if (!validate_markov(s.kernel.factor(j)).ok()) {
          throw ConfigError(at_line(e, p + "kernel") + ": factor " + std::to_string(j + 1) + " is not a Markov kernel");
        }
      }
    }
    if (sparse_grid_size(s.level, static_cast<int>(s.in_width)) > kMaxDesignSize) {
      throw ConfigError(p + "level: the sparse grid would exceed " + std::to_string(kMaxDesignSize) + " points");
    }
    width = s.out_width;
    c.layers.push_back(std::move(s));
  }
  if (const Entry* e = entries.find("interlayer")) {
    try {
      c.interlayer = parse_interlayer(e->value);
    } catch (const Error& err) {
      throw ConfigError(at_line(*e, "interlayer") + ": " + err.what());
    }
  }
  if (const Entry* e = entries.find("normalize")) {
    if (e->value == "minmax") {
      c.normalize = true;
    } else if (e->value == "none") {
      c.normalize = false;
    } else {
      throw ConfigError(at_line(*e, "normalize") + ": expected minmax or none, got '" + e->value + "'");
    }
  }
  c.prior.weight_mean = get_double(entries, "prior.weight_mean", c.prior.weight_mean);
  c.prior.weight_std = get_double(entries, "prior.weight_std", c.prior.weight_std);
  c.prior.bias_mean = get_double(entries, "prior.bias_mean", c.prior.bias_mean);
  c.train.mc_samples = get_uint(entries, "train.mc_samples", c.train.mc_samples);
  c.train.batch_size = get_uint(entries, "train.batch_size", c.train.batch_size);
  c.train.steps = get_uint(entries, "train.steps", c.train.steps);
  c.train.learning_rate = get_double(entries, "train.learning_rate", c.train.learning_rate);
  c.train.noise_var = get_double(entries, "train.noise_var", c.train.noise_var);
  c.train.learn_noise = get_bool(entries, "train.learn_noise", c.train.learn_noise);
  c.train.seed = c.seed;
  entries.reject_unused();
  c.prior.validate();
  c.train.validate();
  return c;
}

RunConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

std::string format_config(const RunConfig& c) {
  std::ostringstream out;
  out << "seed = " << c.seed << '\n';
  out << "input_dim = " << c.input_dim << '\n';
  out << "layers = " << c.layers.size() << '\n';
  for (std::size_t h = 0; h < c.layers.size(); ++h) {
    const std::string p = "layer" + std::to_string(h + 1) + ".";
    const auto& s = c.layers[h];
    out << p << "in_width = " << s.in_width << '\n';
    out << p << "out_width = " << s.out_width << '\n';
    out << p << "level = " << s.level << '\n';
    out << p << "kernel = " << s.kernel.spec() << '\n';
  }
  out << "interlayer = " << to_string(c.interlayer) << '\n';
  out << "normalize = " << (c.normalize ? "minmax" : "none") << '\n';
  out << "prior.weight_mean = " << format_double(c.prior.weight_mean) << '\n';
  out << "prior.weight_std = " << format_double(c.prior.weight_std) << '\n';
  out << "prior.bias_mean = " << format_double(c.prior.bias_mean) << '\n';
  out << "train.mc_samples = " << c.train.mc_samples << '\n';
  out << "train.batch_size = " << c.train.batch_size << '\n';
  out << "train.steps = " << c.train.steps << '\n';
  out << "train.learning_rate = " << format_double(c.train.learning_rate) << '\n';
  out << "train.noise_var = " << format_double(c.train.noise_var) << '\n';
  out << "train.learn_noise = " << (c.train.learn_noise ? "true" : "false") << '\n';
  return out.str();
}

Model build_model(const RunConfig& config) {
  Model model(config.layers, config.interlayer);
  model.initialize(0.5, config.prior.weight_mean, config.prior.bias_mean, config.train.noise_var);
  return model;
}

}  // namespace dtmgp
