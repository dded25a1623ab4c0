#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dtmgp/model.hpp"
#include "dtmgp/rng.hpp"

namespace dtmgp {

struct PriorSpec {
  double weight_mean = 0.0;
  double weight_std = 1.0;
  double bias_mean = 0.0;

  void validate() const;
};

struct TrainConfig {
  std::size_t mc_samples = 8;
  std::size_t batch_size = 0;  // 0 means the full data set
  std::size_t steps = 500;
  double learning_rate = 1e-2;
  double noise_var = 0.01;     // initial value
  bool learn_noise = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Row-major inputs (n x in_dim) and responses (n x out_dim).
struct Dataset {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return in_dim == 0 ? 0 : x.size() / in_dim; }
  std::span<const double> x_row(std::size_t i) const { return {x.data() + i * in_dim, in_dim}; }
  std::span<const double> y_row(std::size_t i) const { return {y.data() + i * out_dim, out_dim}; }
  void validate() const;
};

// KL(N(m, s^2) || N(mt, st^2)).
double kl_scalar(double m, double s, double mt, double st);

// Sum over all weights of every layer. Biases and the noise variance carry no
// penalty. The gradient overload accumulates dKL/dparams.
double kl_divergence(const Model& model, const PriorSpec& prior);
double kl_divergence(const Model& model, const PriorSpec& prior, std::span<double> grad);

using NoiseDraws = std::vector<LayerNoise>;

NoiseDraws draw_noise_set(const Model& model, std::size_t samples, Rng& rng);

// (n / |batch|) * mean over the draws of the Gaussian log-likelihood of the
// batch. The gradient overload accumulates d/dparams, including the
// log noise-variance entry.
double negative_energy(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                       const NoiseDraws& draws);
double negative_energy(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                       const NoiseDraws& draws, std::span<double> grad);
double negative_energy_mc(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                          std::size_t samples, Rng& rng);

struct ElboTerms {
  double elbo = 0.0;
  double energy = 0.0;
  double kl = 0.0;
};

ElboTerms elbo(const Model& model, const Dataset& data, std::span<const std::size_t> batch, std::size_t samples,
               const PriorSpec& prior, Rng& rng);
// Same draws in and out: the estimate is a deterministic function of the
// parameters, which makes finite differences meaningful.
ElboTerms elbo_with_gradient(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                             const NoiseDraws& draws, const PriorSpec& prior, std::span<double> grad);

std::vector<std::size_t> all_indices(std::size_t n);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Ascent step with bias-corrected moments, beta 0.9 / 0.999, eps 1e-8.
void adam_ascent(std::span<double> params, std::span<const double> grad, double learning_rate, AdamState& state);

struct TraceRow {
  std::uint64_t step = 0;
  double elbo = 0.0;
  double energy = 0.0;
  double kl = 0.0;
  double sigma_n = 0.0;
};

// Runs config.steps ascent steps continuing from state.step. Step s draws its
// minibatch and noise from the training stream with index s, so a run split
// in two with the state carried over matches an uninterrupted run.
std::vector<TraceRow> train(Model& model, const Dataset& data, const TrainConfig& config, const PriorSpec& prior,
                            AdamState& state);

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows);

// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(std::span<const double> values, std::size_t window);

}  // namespace dtmgp
