#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "dtmgp/error.hpp"
#include "dtmgp/vi_train.hpp"
#include "tiny_models.hpp"

namespace dtmgp {
namespace {

// KL(N(m, s^2) || N(mt, st^2)) by composite Simpson integration of q log(q/p)
// over m +- 12 s.
double kl_quadrature(double m, double s, double mt, double st) {
  const int n = 20000;
  const double a = m - 12.0 * s, b = m + 12.0 * s, h = (b - a) / n;
  auto f = [&](double x) {
    const double zq = (x - m) / s, zp = (x - mt) / st;
    const double log_q = -0.5 * zq * zq - std::log(s) - 0.5 * std::log(2.0 * M_PI);
    const double log_p = -0.5 * zp * zp - std::log(st) - 0.5 * std::log(2.0 * M_PI);
    return std::exp(log_q) * (log_q - log_p);
  };
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

Dataset constant_data(double value, std::size_t n) {
  Dataset d{1, 1, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    d.x.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    d.y.push_back(value);
  }
  return d;
}

// A model whose output is exactly its bias: sigma = 0, weight means 0.
Model constant_model(double bias, double noise_var) {
  Model m = testing::toy_model(3);
  m.initialize(0.5, 0.0, 0.0, noise_var);
  for (auto& v : m.log_sigma(0)) v = -1000.0;
  m.bias(0)[0] = bias;
  return m;
}

TEST(KL, Examples) {
  EXPECT_EQ(kl_scalar(0.3, 0.7, 0.3, 0.7), 0.0);
  EXPECT_NEAR(kl_scalar(0.0, 2.0, 0.0, 1.0), 0.5 * (4.0 - 1.0 - std::log(4.0)), 1e-15);
  EXPECT_NEAR(kl_scalar(0.0, 2.0, 0.0, 1.0), 0.806853, 5e-7);
  EXPECT_NEAR(kl_scalar(3.0, 1.0, 0.0, 1.0), 4.5, 1e-15);
}

TEST(KL, MatchesQuadrature) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> mean(-2.0, 2.0), sd(0.2, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double m = mean(gen), s = sd(gen), mt = mean(gen), st = sd(gen);
    EXPECT_NEAR(kl_scalar(m, s, mt, st), kl_quadrature(m, s, mt, st), 1e-6);
  }
}

TEST(KL, ZeroAtPriorAndPositiveOtherwise) {
  Model m({LayerSpec{2, 2, 3, TensorMarkovKernel::isotropic(MarkovKernel1D::laplace(1.0), 2)}});
  const PriorSpec prior{0.1, 0.2, 0.0};
  m.initialize(0.2, 0.1, 0.7);
  EXPECT_NEAR(kl_divergence(m, prior), 0.0, 1e-12);
  m.mean_w(0)[3] += 0.5;
  EXPECT_GT(kl_divergence(m, prior), 0.0);
}

TEST(KL, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(32);
  Model m = testing::random_tiny_model(gen);
  const PriorSpec prior{0.05, 0.7, 0.0};
  std::vector<double> grad(m.num_params(), 0.0);
  kl_divergence(m, prior, grad);
  const double h = 1e-6;
  std::vector<double> fd(m.num_params(), 0.0);
  for (std::size_t p = 0; p < m.num_params(); ++p) {
    Model a = m, b = m;
    a.params()[p] += h;
    b.params()[p] -= h;
    fd[p] = (kl_divergence(a, prior) - kl_divergence(b, prior)) / (2 * h);
  }
  EXPECT_LT(testing::relative_error(grad, fd), 1e-6);
  EXPECT_EQ(grad[m.log_noise_var_index()], 0.0);
  for (std::size_t h2 = 0; h2 < m.depth(); ++h2) {
    for (std::size_t w = 0; w < m.spec(h2).out_width; ++w) EXPECT_EQ(grad[m.offsets(h2).bias + w], 0.0);
  }
}

TEST(Energy, ExactFitUnitNoise) {
  const auto data = constant_data(0.4, 10);
  const Model m = constant_model(0.4, 1.0);
  Rng rng = make_stream(1, Stream::training);
  const auto batch = all_indices(data.size());
  EXPECT_NEAR(negative_energy_mc(m, data, batch, 4, rng), -0.5 * std::log(2.0 * M_PI) * 10.0, 1e-12);
}

TEST(Energy, DoublingNoiseLowersByHalfLogTwo) {
  const auto data = constant_data(0.4, 10);
  Rng a = make_stream(1, Stream::training), b = make_stream(1, Stream::training);
  const auto batch = all_indices(data.size());
  const double e1 = negative_energy_mc(constant_model(0.4, 0.3), data, batch, 2, a);
  const double e2 = negative_energy_mc(constant_model(0.4, 0.6), data, batch, 2, b);
  EXPECT_NEAR(e1 - e2, 0.5 * std::log(2.0) * 10.0, 1e-12);
}

TEST(Energy, MinibatchScaling) {
  const auto data = constant_data(0.4, 12);
  const Model m = constant_model(0.1, 0.5);
  const std::vector<std::size_t> half{0, 2, 4, 6, 8, 10};
  Rng a = make_stream(2, Stream::training), b = make_stream(2, Stream::training);
  EXPECT_NEAR(negative_energy_mc(m, data, half, 1, a), negative_energy_mc(m, data, all_indices(12), 1, b), 1e-12);
}

TEST(Energy, MonteCarloVarianceShrinksWithSamples) {
  const auto problem = testing::toy_sine_problem(3);
  const Model m = testing::toy_model(5);
  const auto batch = all_indices(problem.data.size());
  auto variance = [&](std::size_t samples, std::uint64_t seed) {
    Rng rng = make_stream(seed, Stream::training);
    std::vector<double> v;
    for (int r = 0; r < 200; ++r) v.push_back(negative_energy_mc(m, problem.data, batch, samples, rng));
    double mean = 0.0, s2 = 0.0;
    for (double e : v) mean += e;
    mean /= static_cast<double>(v.size());
    for (double e : v) s2 += (e - mean) * (e - mean);
    return s2 / static_cast<double>(v.size() - 1);
  };
  const double ratio = variance(1, 10) / variance(64, 11);
  EXPECT_GT(ratio, 40.0);
  EXPECT_LT(ratio, 100.0);
}

TEST(Energy, EmptyBatchRejected) {
  const auto data = constant_data(0.4, 4);
  Rng rng = make_stream(1, Stream::training);
  EXPECT_THROW(negative_energy_mc(constant_model(0.4, 1.0), data, std::vector<std::size_t>{}, 1, rng), ConfigError);
}

TEST(Elbo, AtPriorEqualsEnergy) {
  const auto problem = testing::toy_sine_problem(4);
  Model m = testing::toy_model(4);
  const PriorSpec prior{};
  m.initialize(prior.weight_std, prior.weight_mean, 0.2, 0.05);
  Rng rng = make_stream(4, Stream::training);
  const auto t = elbo(m, problem.data, all_indices(problem.data.size()), 4, prior, rng);
  EXPECT_EQ(t.kl, 0.0);
  EXPECT_EQ(t.elbo, t.energy);
}

TEST(Elbo, NeverAboveEnergy) {
  std::mt19937_64 gen(5);
  const auto problem = testing::toy_sine_problem(5);
  for (int i = 0; i < 10; ++i) {
    Model m = testing::toy_model(4);
    for (auto& v : m.mean_w(0)) v = std::normal_distribution<double>(0.0, 1.0)(gen);
    Rng rng = make_stream(static_cast<std::uint64_t>(i), Stream::training);
    const auto t = elbo(m, problem.data, all_indices(problem.data.size()), 2, PriorSpec{}, rng);
    EXPECT_LE(t.elbo, t.energy);
    EXPECT_NEAR(t.elbo, t.energy - t.kl, 1e-9 * std::abs(t.energy));
  }
}

double elbo_fd_error(const Model& m, const Dataset& data, std::span<const std::size_t> batch, const NoiseDraws& draws,
                     const PriorSpec& prior) {
  std::vector<double> grad(m.num_params(), 0.0);
  elbo_with_gradient(m, data, batch, draws, prior, grad);
  const double h = 1e-5;
  std::vector<double> fd(m.num_params(), 0.0);
  std::vector<double> scratch(m.num_params(), 0.0);
  for (std::size_t p = 0; p < m.num_params(); ++p) {
    Model a = m, b = m;
    a.params()[p] += h;
    b.params()[p] -= h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double ea = elbo_with_gradient(a, data, batch, draws, prior, scratch).elbo;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double eb = elbo_with_gradient(b, data, batch, draws, prior, scratch).elbo;
    fd[p] = (ea - eb) / (2 * h);
  }
  return testing::relative_error(grad, fd);
}

TEST(Elbo, GradientToyModel) {
  const auto problem = testing::toy_sine_problem(6, 16);
  Model m = testing::toy_model(3);
  std::mt19937_64 gen(6);
  for (auto& v : m.mean_w(0)) v = 0.3 * std::normal_distribution<double>(0.0, 1.0)(gen);
  Rng rng = make_stream(6, Stream::training);
  const auto draws = draw_noise_set(m, 3, rng);
  const std::vector<std::size_t> batch{1, 4, 5, 9, 12};
  EXPECT_LT(elbo_fd_error(m, problem.data, batch, draws, PriorSpec{0.0, 0.8, 0.0}), 1e-3);
}

TEST(Elbo, GradientRandomTinyModels) {
  std::mt19937_64 gen(7);
  int done = 0;
  while (done < 20) {
    Model m = testing::random_tiny_model(gen);
    Dataset data{m.input_width(), m.output_width(), {}, {}};
    for (int i = 0; i < 4; ++i) {
      for (double v : testing::uniform_point(gen, m.input_width())) data.x.push_back(v);
      for (double v : testing::uniform_point(gen, m.output_width())) data.y.push_back(v);
    }
    Rng rng = make_stream(static_cast<std::uint64_t>(done), Stream::training, 1);
    const auto draws = draw_noise_set(m, 2, rng);
    bool clear = true;
    for (const auto& noise : draws) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        ForwardTrace trace;
        m.forward(data.x_row(i), noise, trace);
        clear = clear && testing::clear_of_kinks(m, trace, 1e-4);
      }
    }
    if (!clear) continue;
    ++done;
    EXPECT_LT(elbo_fd_error(m, data, all_indices(data.size()), draws, PriorSpec{0.0, 0.7, 0.0}), 1e-3) << "model " << done;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> g{0.3, -4.0, 0.0};
  AdamState s;
  adam_ascent(p, g, 0.01, s);
  EXPECT_EQ(s.step, 1u);
  EXPECT_NEAR(p[0], 1.01, 1e-9);
  EXPECT_NEAR(p[1], -2.01, 1e-9);
  EXPECT_EQ(p[2], 0.5);
}

TEST(Adam, ClosedFormSecondStep) {
  std::vector<double> p{0.0};
  AdamState s;
  const std::vector<double> g1{1.0}, g2{-0.5};
  adam_ascent(p, g1, 0.1, s);
  adam_ascent(p, g2, 0.1, s);
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -0.5;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 0.25;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  const double p1 = 0.1 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(p[0], p1 + 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-12);
}

TEST(Train, ZeroStepsLeavesParameters) {
  const auto problem = testing::toy_sine_problem(8);
  Model m = testing::toy_model(4);
  const auto before = m.params();
  TrainConfig cfg;
  cfg.steps = 0;
  AdamState s;
  EXPECT_TRUE(train(m, problem.data, cfg, PriorSpec{}, s).empty());
  EXPECT_EQ(m.params(), before);
}

TEST(Train, SameSeedBitwiseIdentical) {
  const auto problem = testing::toy_sine_problem(9);
  TrainConfig cfg;
  cfg.steps = 40;
  cfg.batch_size = 16;
  cfg.seed = 9;
  Model a = testing::toy_model(4), b = testing::toy_model(4);
  AdamState sa, sb;
  const auto ta = train(a, problem.data, cfg, PriorSpec{}, sa);
  const auto tb = train(b, problem.data, cfg, PriorSpec{}, sb);
  EXPECT_EQ(a.params(), b.params());
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(ta[i].elbo, tb[i].elbo);
}

TEST(Train, SplitRunMatchesUninterrupted) {
  const auto problem = testing::toy_sine_problem(10);
  TrainConfig cfg;
  cfg.seed = 10;
  cfg.batch_size = 20;
  Model whole = testing::toy_model(4), split = testing::toy_model(4);
  AdamState sw, ss;
  cfg.steps = 20;
  train(whole, problem.data, cfg, PriorSpec{}, sw);
  cfg.steps = 10;
  train(split, problem.data, cfg, PriorSpec{}, ss);
  train(split, problem.data, cfg, PriorSpec{}, ss);
  EXPECT_EQ(whole.params(), split.params());
  EXPECT_EQ(sw, ss);
}

TEST(Train, FixedNoiseVariance) {
  const auto problem = testing::toy_sine_problem(11);
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.learn_noise = false;
  Model m = testing::toy_model(4);
  const double nv = m.params()[m.log_noise_var_index()];
  AdamState s;
  train(m, problem.data, cfg, PriorSpec{}, s);
  EXPECT_EQ(m.params()[m.log_noise_var_index()], nv);
}

TEST(Train, NonFiniteLossReportsStep) {
  auto problem = testing::toy_sine_problem(12);
  problem.data.y[3] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.steps = 5;
  Model m = testing::toy_model(4);
  AdamState s;
  try {
    train(m, problem.data, cfg, PriorSpec{}, s);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.mc_samples = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  PriorSpec p;
  p.weight_std = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Train, ToySmoke) {
  const auto problem = testing::toy_sine_problem(13);
  Model m = testing::toy_model(5);
  Model prior = m;
  prior.initialize(1.0, 0.0, 0.0, 0.01);
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.seed = 13;
  AdamState s;
  const auto trace = train(m, problem.data, cfg, PriorSpec{}, s);
  std::vector<double> e;
  for (const auto& r : trace) e.push_back(r.elbo);
  const auto smooth = moving_average(e, 50);
  EXPECT_GT(smooth.back(), smooth[49]);
  EXPECT_LT(testing::toy_rmse(m, problem, 13), testing::toy_rmse(prior, problem, 13));
}

// Over the last 80% of training the window-50 smoothed ELBO must never
// decrease, in at least 8 of 10 seeds. The toy model has one layer, so the
// ELBO at each iterate is evaluated in closed form.
TEST(Train, SmoothedElboNondecreasingLate) {
  int good = 0;
  std::ostringstream report;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto problem = testing::toy_sine_problem(seed);
    Model m = testing::toy_model(5);
    const PriorSpec prior{};
    TrainConfig cfg;
    cfg.steps = 1;
    cfg.seed = seed;
    AdamState s;
    std::vector<double> e;
    for (int step = 0; step < 500; ++step) {
      e.push_back(testing::closed_form_elbo(m, problem.data, prior));
      train(m, problem.data, cfg, prior, s);
    }
    const auto smooth = moving_average(e, 50);
    std::size_t drops = 0;
    for (std::size_t i = smooth.size() / 5 + 1; i < smooth.size(); ++i) drops += smooth[i] < smooth[i - 1];
    good += drops == 0;
    report << " seed" << seed << ":" << drops;
  }
  EXPECT_GE(good, 8) << "decreasing steps per seed:" << report.str();
}

TEST(MovingAverage, Trailing) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_EQ(moving_average(v, 2), (std::vector<double>{1.0, 1.5, 2.5, 3.5, 4.5}));
  EXPECT_EQ(moving_average(v, 10), (std::vector<double>{1.0, 1.5, 2.0, 2.5, 3.0}));
}

TEST(TraceCsv, Header) {
  std::ostringstream out;
  const std::vector<TraceRow> rows{{0, -1.5, -1.0, 0.5, 0.1}};
  write_trace_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "step,elbo,energy,kl,sigma_n");
}

// For one layer the ELBO has a closed form, and the exact log marginal
// likelihood is a Gaussian density; the bound must hold after training.
TEST(Elbo, BoundedByExactMarginalLikelihood) {
  const auto problem = testing::toy_sine_problem(14, 32);
  const auto& data = problem.data;
  const PriorSpec prior{0.0, 1.0, 0.0};
  Model m = testing::toy_model(4);
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.seed = 14;
  AdamState s;
  train(m, data, cfg, prior, s);
  const std::size_t n = data.size(), M = m.feature_count(0);
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(M));
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = m.features(0).evaluate(data.x_row(i));
    for (std::size_t k = 0; k < f.nnz(); ++k) Phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f.index[k])) = f.value[k];
  }
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.y.data(), static_cast<Eigen::Index>(n));
  const double mu = m.bias(0)[0], v = m.noise_var();

  auto analytic_elbo = [&](const Model& mm) { return testing::closed_form_elbo(mm, data, prior); };

  const Eigen::MatrixXd C = prior.weight_std * prior.weight_std * Phi * Phi.transpose() +
                            v * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const Eigen::LLT<Eigen::MatrixXd> llt(C);
  const Eigen::VectorXd r0 = y - Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), mu);
  const Eigen::VectorXd alpha = llt.matrixL().solve(r0);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < C.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const double log_ml = -0.5 * alpha.squaredNorm() - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);

  EXPECT_LE(analytic_elbo(m), log_ml + 1e-6);
  Model collapsed = m;
  for (auto& l : collapsed.log_sigma(0)) l = -30.0;
  EXPECT_LE(analytic_elbo(collapsed), log_ml + 1e-6);

  // The Monte-Carlo estimate targets the same closed form.
  Rng rng = make_stream(14, Stream::training, 99);
  double mc = 0.0;
  const int reps = 400;
  for (int i = 0; i < reps; ++i) mc += elbo(m, data, all_indices(n), 8, prior, rng).elbo;
  mc /= reps;
  EXPECT_NEAR(mc, analytic_elbo(m), 0.02 * std::abs(analytic_elbo(m)) + 1.0);
}

}  // namespace
}  // namespace dtmgp
