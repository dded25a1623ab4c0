#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "dtmgp/expansion.hpp"
#include "dtmgp/model.hpp"
#include "dtmgp/normalize.hpp"
#include "dtmgp/rng.hpp"
#include "dtmgp/vi_train.hpp"

namespace dtmgp {

// sup |F_a - F_b| over the merged support, right-continuous ECDFs.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// Zero-mean GP with covariance prod_d (1 + theta min(x_d, x'_d)) over a fixed
// point set, one dense factor reused across draws.
class BrownianSheetSampler {
 public:
  BrownianSheetSampler(std::vector<double> points, std::size_t dim, double theta = 1.0, double jitter = 1e-10);

  std::size_t size() const { return sampler_.size(); }
  std::size_t dimension() const { return dim_; }
  std::vector<double> sample(Rng& rng) const { return sampler_.sample(rng); }

 private:
  std::size_t dim_;
  DenseGaussianSampler sampler_;
};

// Y = 1 / (1 + exp(B)) for one joint draw of the sheet.
std::vector<double> random_field_sample(const BrownianSheetSampler& sheet, Rng& rng);
std::vector<double> random_field_sample(std::span<const double> points, std::size_t dim, Rng& rng);

// Draws n samples at each of the given points. Result is indexed
// [point][sample].
using ProcessSampler =
    std::function<std::vector<std::vector<double>>(std::span<const double> points, std::size_t n, Rng& rng)>;

struct AveragedKS {
  std::vector<double> per_point;
  double mean = 0.0;
};

// Mean over the test points of the KS distance between n model samples and
// n system samples. Model and system read separate child streams of rng.
AveragedKS averaged_ks(const ProcessSampler& model, const ProcessSampler& system, std::span<const double> x_test,
                       std::size_t dim, std::size_t n_per_point, Rng& rng);
// Same from precomputed [point][sample] lists.
AveragedKS averaged_ks(const std::vector<std::vector<double>>& model_samples,
                       const std::vector<std::vector<double>>& system_samples);

struct KSReport {
  std::vector<double> per_point;       // from the last replication
  std::vector<double> replications;    // D_r
  double mean = 0.0;                   // D bar
  double std = 0.0;                    // divisor R

  void write(std::ostream& out) const;
};

// Runs R replications, replication r with seed derive_seed(root, replication, r).
// The experiment returns (D_r, per-point values). Failures are rethrown with
// the replication seed attached.
using Experiment = std::function<AveragedKS(std::uint64_t seed)>;
KSReport summarize_replications(const std::vector<AveragedKS>& runs);
KSReport macro_replicate(const Experiment& experiment, std::size_t replications, std::uint64_t root_seed);

// Samplers over a model: each point gets n forward passes with fresh noise.
ProcessSampler model_sampler(const Model& model, bool observation_noise);
// Joint field paths: n independent realizations of Y over all points.
ProcessSampler field_sampler(std::size_t dim);

// Desk-scale random-field experiment on [0,1]^2. Training responses are
// pointwise draws, each from its own field realization; system samples at the
// test points are joint path draws. The trained DTMGP and the untrained model
// at the prior are scored against the same system samples.
struct Field2dConfig {
  std::size_t n_train = 200;
  std::size_t n_test = 100;
  std::size_t n_samples = 100;
  std::vector<LayerSpec> layers;
  Interlayer interlayer = Interlayer::logistic;
  PriorSpec prior;
  TrainConfig train;
  bool observation_noise = true;
};

// Two 1-wide layers: Laplace(1/2) on the 2-d input at level l1, Laplace(1) at level l2.
Field2dConfig default_field2d_config(int level1 = 5, int level2 = 7);

struct Field2dResult {
  AveragedKS trained;
  AveragedKS prior;
};

// Fresh training data, test points and system samples, all from `seed`.
Field2dResult run_field2d(const Field2dConfig& config, std::uint64_t seed);

}  // namespace dtmgp
