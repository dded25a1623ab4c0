#include "dtmgp/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

std::vector<std::vector<double>> model_samples_at(const Model& model, std::span<const double> points, std::size_t n,
                                                  Rng& rng, bool observation_noise, const AffineMap* y_map) {
  const std::size_t d = model.input_width();
  std::vector<std::vector<double>> out;
  for (std::size_t p = 0; p + d <= points.size(); p += d) {
    const auto draws = model.sample_predictive(points.subspan(p, d), n, rng, observation_noise);
    std::vector<double> col;
    col.reserve(n);
    for (const auto& y : draws) col.push_back(y[0]);
    if (y_map) y_map->invert(col);
    out.push_back(std::move(col));
  }
  return out;
}

void write_array(std::ostream& out, std::span<const double> v) {
  out << '[';
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
  out << ']';
}

}  // namespace

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("ks_two_sample: both samples must be nonempty");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double x = j == sb.size() || (i < sa.size() && sa[i] <= sb[j]) ? sa[i] : sb[j];
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

BrownianSheetSampler::BrownianSheetSampler(std::vector<double> points, std::size_t dim, double theta, double jitter)
    : dim_(dim),
      sampler_(TensorMarkovKernel::isotropic(MarkovKernel1D::brownian_sheet(theta), dim), std::move(points), jitter) {}

std::vector<double> random_field_sample(const BrownianSheetSampler& sheet, Rng& rng) {
  auto v = sheet.sample(rng);
  for (auto& b : v) b = 1.0 / (1.0 + std::exp(b));
  return v;
}

std::vector<double> random_field_sample(std::span<const double> points, std::size_t dim, Rng& rng) {
  for (double x : points) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("random_field_sample: points must lie in the unit cube");
  }
  return random_field_sample(BrownianSheetSampler({points.begin(), points.end()}, dim), rng);
}

AveragedKS averaged_ks(const std::vector<std::vector<double>>& model_samples,
                       const std::vector<std::vector<double>>& system_samples) {
  if (model_samples.empty() || model_samples.size() != system_samples.size()) {
    throw StructuralError("averaged_ks: sample lists must cover the same nonempty point set");
  }
  AveragedKS r;
  for (std::size_t p = 0; p < model_samples.size(); ++p) {
    r.per_point.push_back(ks_two_sample(model_samples[p], system_samples[p]));
    r.mean += r.per_point.back();
  }
  r.mean /= static_cast<double>(r.per_point.size());
  return r;
}

AveragedKS averaged_ks(const ProcessSampler& model, const ProcessSampler& system, std::span<const double> x_test,
                       std::size_t dim, std::size_t n_per_point, Rng& rng) {
  if (dim == 0 || x_test.empty() || x_test.size() % dim != 0) throw ConfigError("averaged_ks: empty test set");
  Rng model_rng(rng());
  Rng system_rng(rng());
  return averaged_ks(model(x_test, n_per_point, model_rng), system(x_test, n_per_point, system_rng));
}

void KSReport::write(std::ostream& out) const {
  const auto old = out.precision(17);
  out << "{\n  \"replications\": " << replications.size() << ",\n  \"D_r\": ";
  write_array(out, replications);
  out << ",\n  \"D_bar\": " << mean << ",\n  \"sigma_hat\": " << std << ",\n  \"D_x\": ";
  write_array(out, per_point);
  out << "\n}";
  out.precision(old);
}

KSReport summarize_replications(const std::vector<AveragedKS>& runs) {
  if (runs.empty()) throw ConfigError("summarize_replications: at least one replication is required");
  KSReport report;
  for (const auto& r : runs) report.replications.push_back(r.mean);
  report.per_point = runs.back().per_point;
  const double R = static_cast<double>(runs.size());
  const double ref = report.replications.front();
  double shift = 0.0;
  for (double v : report.replications) shift += v - ref;
  report.mean = ref + shift / R;
  double ss = 0.0;
  for (double v : report.replications) ss += (v - report.mean) * (v - report.mean);
  report.std = std::sqrt(ss / R);
  return report;
}

KSReport macro_replicate(const Experiment& experiment, std::size_t replications, std::uint64_t root_seed) {
  if (replications < 1) throw ConfigError("macro_replicate: at least one replication is required");
  std::vector<AveragedKS> runs;
  for (std::size_t r = 0; r < replications; ++r) {
    const std::uint64_t seed = derive_seed(root_seed, Stream::replication, r);
    const std::string where = "replication " + std::to_string(r) + " (seed " + std::to_string(seed) + ") failed: ";
    try {
      runs.push_back(experiment(seed));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const StructuralError& e) {
      throw StructuralError(where + e.what());
    } catch (const Error& e) {
      throw NumericalError(where + e.what());
    }
  }
  return summarize_replications(runs);
}

ProcessSampler model_sampler(const Model& model, bool observation_noise) {
  return [&model, observation_noise](std::span<const double> points, std::size_t n, Rng& rng) {
    return model_samples_at(model, points, n, rng, observation_noise, nullptr);
  };
}

ProcessSampler field_sampler(std::size_t dim) {
  return [dim](std::span<const double> points, std::size_t n, Rng& rng) {
    const BrownianSheetSampler sheet({points.begin(), points.end()}, dim);
    std::vector<std::vector<double>> out(sheet.size());
    for (std::size_t s = 0; s < n; ++s) {
      const auto y = random_field_sample(sheet, rng);
      for (std::size_t p = 0; p < y.size(); ++p) out[p].push_back(y[p]);
    }
    return out;
  };
}

Field2dConfig default_field2d_config(int level1, int level2) {
  Field2dConfig c;
  c.layers.push_back({2, 1, level1, TensorMarkovKernel::isotropic(MarkovKernel1D::laplace(0.5), 2)});
  c.layers.push_back({1, 1, level2, TensorMarkovKernel::isotropic(MarkovKernel1D::laplace(1.0), 1)});
  c.interlayer = Interlayer::logistic;
  c.prior = PriorSpec{0.0, 1.0, 0.0};
  c.train.mc_samples = 8;
  c.train.batch_size = 0;
  c.train.steps = 1500;
  c.train.learning_rate = 1e-2;
  c.train.noise_var = 0.01;
  return c;
}

Field2dResult run_field2d(const Field2dConfig& config, std::uint64_t seed) {
  constexpr std::size_t d = 2;
  if (config.layers.empty() || config.layers.front().in_width != d || config.layers.back().out_width != 1) {
    throw ConfigError("field2d: the model must map 2 inputs to 1 output");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset data{d, 1, {}, {}};
  Rng data_rng = make_stream(seed, Stream::data);
  for (std::size_t i = 0; i < config.n_train; ++i) {
    const double x0 = unif(data_rng), x1 = unif(data_rng);
    const double b = std::sqrt((1.0 + x0) * (1.0 + x1)) * normal(data_rng);
    data.x.insert(data.x.end(), {x0, x1});
    data.y.push_back(1.0 / (1.0 + std::exp(b)));
  }
  std::vector<double> x_test;
  Rng test_rng = make_stream(seed, Stream::test_points);
  for (std::size_t i = 0; i < config.n_test * d; ++i) x_test.push_back(unif(test_rng));

  Rng field_rng = make_stream(seed, Stream::field);
  const auto system = field_sampler(d)(x_test, config.n_samples, field_rng);

  const AffineMap x_map = AffineMap::fit_minmax(data.x, d);
  const AffineMap y_map = AffineMap::fit_minmax(data.y, 1);
  x_map.apply(data.x);
  y_map.apply(data.y);
  x_map.apply(x_test);

  Model trained(config.layers, config.interlayer);
  trained.initialize(0.5, config.prior.weight_mean, config.prior.bias_mean, config.train.noise_var);
  Model prior = trained;
  prior.initialize(config.prior.weight_std, config.prior.weight_mean, config.prior.bias_mean, config.train.noise_var);

  TrainConfig tc = config.train;
  tc.seed = seed;
  AdamState state;
  train(trained, data, tc, config.prior, state);

  Field2dResult result;
  Rng trained_rng = make_stream(seed, Stream::predictive, 0);
  Rng prior_rng = make_stream(seed, Stream::predictive, 1);
  result.trained = averaged_ks(
      model_samples_at(trained, x_test, config.n_samples, trained_rng, config.observation_noise, &y_map), system);
  result.prior = averaged_ks(
      model_samples_at(prior, x_test, config.n_samples, prior_rng, config.observation_noise, &y_map), system);
  return result;
}

}  // namespace dtmgp
