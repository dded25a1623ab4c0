#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtmgp/features.hpp"
#include "dtmgp/kernels.hpp"
#include "dtmgp/rng.hpp"

namespace dtmgp {

struct LayerSpec {
  std::size_t in_width = 1;
  std::size_t out_width = 1;
  int level = 1;
  TensorMarkovKernel kernel;  // dimension in_width
};

enum class Interlayer { none, logistic };

std::string_view to_string(Interlayer mode);
Interlayer parse_interlayer(std::string_view text);

// Standard-normal weight noise, one W x m matrix (row-major) per layer.
using LayerNoise = std::vector<std::vector<double>>;

struct LayerTrace {
  std::vector<double> input;      // after the optional squash
  std::vector<double> pre_squash; // raw previous-layer output; empty for layer 1
  SparseFeatureJacobian phi;
  std::vector<double> output;
  std::size_t multiplies = 0;
};

struct ForwardTrace {
  LayerNoise noise;
  std::vector<LayerTrace> layers;
};

// Stacked hierarchical-expansion layers
//   t_h = (sigma_h .* Z_h + m_h) phi_h(t_{h-1}) + mu_h.
//
// All trainable values live in one flat vector. Per layer, in order:
// log sigma (W x m, row-major), weight means (W x m), bias (W). One final
// entry holds the log observation-noise variance.
class Model {
 public:
  struct LayerOffsets {
    std::size_t log_sigma = 0;
    std::size_t mean_w = 0;
    std::size_t bias = 0;
  };

  Model(std::vector<LayerSpec> specs, Interlayer interlayer = Interlayer::none);

  std::size_t depth() const { return specs_.size(); }
  const LayerSpec& spec(std::size_t h) const { return specs_[h]; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  const FeatureMap& features(std::size_t h) const { return *features_[h]; }
  std::size_t feature_count(std::size_t h) const { return features_[h]->size(); }
  std::size_t input_width() const { return specs_.front().in_width; }
  std::size_t output_width() const { return specs_.back().out_width; }
  Interlayer interlayer() const { return interlayer_; }

  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const LayerOffsets& offsets(std::size_t h) const { return offsets_[h]; }
  std::size_t log_noise_var_index() const { return params_.size() - 1; }
  double noise_var() const;

  std::span<double> log_sigma(std::size_t h);
  std::span<double> mean_w(std::size_t h);
  std::span<double> bias(std::size_t h);
  std::span<const double> log_sigma(std::size_t h) const;
  std::span<const double> mean_w(std::size_t h) const;
  std::span<const double> bias(std::size_t h) const;

  // log sigma = log(sigma0), weight means 0, biases 0, noise variance nv.
  void initialize(double sigma0 = 0.5, double weight_mean = 0.0, double bias_mean = 0.0, double noise_var = 0.01);

  LayerNoise draw_noise(Rng& rng) const;
  // Zero noise: the forward pass through the weight means.
  LayerNoise zero_noise() const;

  std::vector<double> forward(std::span<const double> x, const LayerNoise& noise) const;
  std::vector<double> forward(std::span<const double> x, const LayerNoise& noise, ForwardTrace& trace) const;

  // Accumulates dL/dparams into param_grad (size num_params) given dL/doutput.
  // Returns dL/dx. The noise-variance entry is not touched.
  std::vector<double> backward(const ForwardTrace& trace, std::span<const double> grad_output,
                               std::span<double> param_grad) const;

  // n independent forward passes with fresh weight noise. With
  // observation_noise, N(0, noise_var) is added to every output.
  std::vector<std::vector<double>> sample_predictive(std::span<const double> x, std::size_t n, Rng& rng,
                                                     bool observation_noise = false) const;

 private:
  std::vector<double> run(std::span<const double> x, const LayerNoise& noise, ForwardTrace* trace) const;

  std::vector<LayerSpec> specs_;
  Interlayer interlayer_;
  std::vector<std::shared_ptr<const FeatureMap>> features_;
  std::vector<LayerOffsets> offsets_;
  std::vector<double> params_;
};

double logistic(double t);

}  // namespace dtmgp
