#include "dtmgp/vi_train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void check_batch(const Dataset& data, std::span<const std::size_t> batch) {
  if (batch.empty()) throw ConfigError("energy: empty batch");
  for (auto i : batch) {
    if (i >= data.size()) throw StructuralError("energy: batch index outside the data set");
  }
}

}  // namespace

void PriorSpec::validate() const {
  if (!(weight_std > 0.0) || !std::isfinite(weight_std)) throw ConfigError("prior.weight_std must be positive");
  if (!std::isfinite(weight_mean) || !std::isfinite(bias_mean)) throw ConfigError("prior means must be finite");
}

void TrainConfig::validate() const {
  if (mc_samples < 1) throw ConfigError("train.mc_samples must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(noise_var > 0.0)) throw ConfigError("train.noise_var must be positive");
}

void Dataset::validate() const {
  if (in_dim == 0 || out_dim == 0) throw StructuralError("dataset: zero dimension");
  if (x.size() % in_dim != 0 || y.size() % out_dim != 0 || x.size() / in_dim != y.size() / out_dim) {
    throw StructuralError("dataset: inputs and responses disagree in length");
  }
}

double kl_scalar(double m, double s, double mt, double st) {
  const double r = (s * s) / (st * st);
  const double dm = m - mt;
  return 0.5 * (dm * dm / (st * st) + r - 1.0 - std::log(r));
}

double kl_divergence(const Model& model, const PriorSpec& prior) {
  double kl = 0.0;
  const double st2 = prior.weight_std * prior.weight_std;
  for (std::size_t h = 0; h < model.depth(); ++h) {
    const auto ls = model.log_sigma(h);
    const auto mw = model.mean_w(h);
    for (std::size_t i = 0; i < ls.size(); ++i) {
      const double dm = mw[i] - prior.weight_mean;
      const double r = std::exp(2.0 * ls[i]) / st2;
      // log r written through log sigma keeps tiny sigmas exact.
      kl += 0.5 * (dm * dm / st2 + r - 1.0 - (2.0 * ls[i] - std::log(st2)));
    }
  }
  return kl;
}

double kl_divergence(const Model& model, const PriorSpec& prior, std::span<double> grad) {
  if (grad.size() != model.num_params()) throw StructuralError("kl: gradient buffer has the wrong size");
  const double st2 = prior.weight_std * prior.weight_std;
  for (std::size_t h = 0; h < model.depth(); ++h) {
    const auto ls = model.log_sigma(h);
    const auto mw = model.mean_w(h);
    const auto& off = model.offsets(h);
    for (std::size_t i = 0; i < ls.size(); ++i) {
      grad[off.mean_w + i] += (mw[i] - prior.weight_mean) / st2;
      grad[off.log_sigma + i] += std::exp(2.0 * ls[i]) / st2 - 1.0;
    }
  }
  return kl_divergence(model, prior);
}

NoiseDraws draw_noise_set(const Model& model, std::size_t samples, Rng& rng) {
  NoiseDraws draws;
  draws.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) draws.push_back(model.draw_noise(rng));
  return draws;
}

double negative_energy(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                       const NoiseDraws& draws) {
  check_batch(data, batch);
  if (draws.empty()) throw ConfigError("energy: at least one Monte-Carlo draw is required");
  const double v = model.noise_var();
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * v);
  double total = 0.0;
  for (const auto& noise : draws) {
    for (auto i : batch) {
      const auto f = model.forward(data.x_row(i), noise);
      const auto y = data.y_row(i);
      for (std::size_t o = 0; o < f.size(); ++o) {
        const double r = y[o] - f[o];
        total += log_norm - r * r / (2.0 * v);
      }
    }
  }
  const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size());
  return scale * total / static_cast<double>(draws.size());
}

double negative_energy(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                       const NoiseDraws& draws, std::span<double> grad) {
  check_batch(data, batch);
  if (draws.empty()) throw ConfigError("energy: at least one Monte-Carlo draw is required");
  if (grad.size() != model.num_params()) throw StructuralError("energy: gradient buffer has the wrong size");
  const double v = model.noise_var();
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * v);
  const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size()) /
                       static_cast<double>(draws.size());
  double total = 0.0;
  double dlogv = 0.0;
  std::vector<double> g_out(model.output_width());
  ForwardTrace trace;
  for (const auto& noise : draws) {
    for (auto i : batch) {
      const auto f = model.forward(data.x_row(i), noise, trace);
      const auto y = data.y_row(i);
      for (std::size_t o = 0; o < f.size(); ++o) {
        const double r = y[o] - f[o];
        total += log_norm - r * r / (2.0 * v);
        dlogv += -0.5 + r * r / (2.0 * v);
        g_out[o] = scale * r / v;
      }
      model.backward(trace, g_out, grad);
    }
  }
  grad[model.log_noise_var_index()] += scale * dlogv;
  return scale * total;
}

double negative_energy_mc(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                          std::size_t samples, Rng& rng) {
  return negative_energy(model, data, batch, draw_noise_set(model, samples, rng));
}

ElboTerms elbo(const Model& model, const Dataset& data, std::span<const std::size_t> batch, std::size_t samples,
               const PriorSpec& prior, Rng& rng) {
  ElboTerms t;
  t.energy = negative_energy_mc(model, data, batch, samples, rng);
  t.kl = kl_divergence(model, prior);
  t.elbo = t.energy - t.kl;
  return t;
}

ElboTerms elbo_with_gradient(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                             const NoiseDraws& draws, const PriorSpec& prior, std::span<double> grad) {
  if (grad.size() != model.num_params()) throw StructuralError("elbo: gradient buffer has the wrong size");
  ElboTerms t;
  t.energy = negative_energy(model, data, batch, draws, grad);
  std::vector<double> kl_grad(model.num_params(), 0.0);
  t.kl = kl_divergence(model, prior, kl_grad);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] -= kl_grad[i];
  t.elbo = t.energy - t.kl;
  return t;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void adam_ascent(std::span<double> params, std::span<const double> grad, double learning_rate, AdamState& state) {
  if (grad.size() != params.size()) throw StructuralError("adam: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw StructuralError("adam: optimizer state does not match the parameter count");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grad[i];
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    params[i] += learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + kEps);
  }
}

std::vector<TraceRow> train(Model& model, const Dataset& data, const TrainConfig& config, const PriorSpec& prior,
                            AdamState& state) {
  config.validate();
  prior.validate();
  data.validate();
  if (data.in_dim != model.input_width() || data.out_dim != model.output_width()) {
    throw StructuralError("train: data dimensions do not match the model");
  }
  if (data.size() == 0) throw ConfigError("train: empty data set");
  const std::size_t n = data.size();
  const std::size_t b = config.batch_size == 0 ? n : std::min(config.batch_size, n);

  std::vector<TraceRow> rows;
  rows.reserve(config.steps);
  std::vector<double> grad(model.num_params());
  std::vector<std::size_t> perm = all_indices(n);
  for (std::size_t k = 0; k < config.steps; ++k) {
    const std::uint64_t step = state.step;
    Rng rng = make_stream(config.seed, Stream::training, step);
    std::vector<std::size_t> batch;
    if (b == n) {
      batch = all_indices(n);
    } else {
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = 0; i < b; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(perm[i], perm[pick(rng)]);
      }
      batch.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(b));
      std::sort(batch.begin(), batch.end());
    }
    const NoiseDraws draws = draw_noise_set(model, config.mc_samples, rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    const ElboTerms t = elbo_with_gradient(model, data, batch, draws, prior, grad);
    if (!std::isfinite(t.elbo)) throw NumericalError("train: non-finite ELBO at step " + std::to_string(step));
    for (double g : grad) {
      if (!std::isfinite(g)) throw NumericalError("train: non-finite gradient at step " + std::to_string(step));
    }
    if (!config.learn_noise) grad[model.log_noise_var_index()] = 0.0;
    rows.push_back({step, t.elbo, t.energy, t.kl, std::sqrt(model.noise_var())});
    adam_ascent(model.params(), grad, config.learning_rate, state);
  }
  return rows;
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows) {
  const auto old = out.precision(17);
  out << "step,elbo,energy,kl,sigma_n\n";
  for (const auto& r : rows) out << r.step << ',' << r.elbo << ',' << r.energy << ',' << r.kl << ',' << r.sigma_n << '\n';
  out.precision(old);
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw ConfigError("moving_average: window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace dtmgp
