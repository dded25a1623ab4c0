#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dtmgp/model.hpp"
#include "dtmgp/vi_train.hpp"

namespace dtmgp {

// Everything needed to build and train a model.
//
// Text form, one `key = value` per line, `#` starts a comment:
//
//   seed = 7
//   input_dim = 2
//   layers = 2
//   layer1.out_width = 1      # layerN.in_width is optional and must chain
//   layer1.level = 5
//   layer1.kernel = laplace:0.5
//   layer2.out_width = 1
//   layer2.level = 7
//   layer2.kernel = laplace:1
//   interlayer = logistic     # none | logistic
//   normalize = minmax        # minmax | none
//   prior.weight_mean = 0
//   prior.weight_std = 1
//   prior.bias_mean = 0
//   train.mc_samples = 8
//   train.batch_size = 0      # 0 = full batch
//   train.steps = 500
//   train.learning_rate = 0.01
//   train.noise_var = 0.01
//   train.learn_noise = true
//
// seed, input_dim, layers and layerN.{out_width,level,kernel} are required.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t input_dim = 0;
  std::vector<LayerSpec> layers;
  Interlayer interlayer = Interlayer::none;
  bool normalize = true;
  PriorSpec prior;
  TrainConfig train;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
// Canonical text; parse_config(format_config(c)) reproduces c exactly.
std::string format_config(const RunConfig& config);

// Model with the configured architecture and its initial parameters:
// sigma 0.5, weight and bias means from the prior, noise variance from train.
Model build_model(const RunConfig& config);

// Shortest round-trip-exact decimal with 17 significant digits.
std::string format_double(double v);
// Parses a whole token as a double; throws ConfigError naming `what`.
double parse_double(std::string_view token, std::string_view what);
std::uint64_t parse_uint(std::string_view token, std::string_view what);

std::string read_text_file(const std::string& path);

}  // namespace dtmgp
