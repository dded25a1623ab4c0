#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dtmgp/config.hpp"
#include "dtmgp/error.hpp"
#include "dtmgp/eval_harness.hpp"
#include "dtmgp/expansion.hpp"
#include "dtmgp/features.hpp"
#include "dtmgp/hier_chol.hpp"
#include "dtmgp/model_io.hpp"
#include "dtmgp/sparse_grid.hpp"
#include "dtmgp/vi_train.hpp"

namespace {

using namespace dtmgp;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

// Writes to the named file, or stdout when the name is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw IoError("cannot open '" + path + "' for writing");
    }
    stream().precision(17);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw IoError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct GridArgs {
  std::string kernel = "laplace:1";
  std::size_t dim = 1;
  int level = 1;
};

void add_grid_args(CLI::App* cmd, GridArgs& a, bool with_kernel) {
  if (with_kernel) cmd->add_option("--kernel", a.kernel, "Kernel spec, e.g. laplace:1 or laplace:1;brownian:2");
  cmd->add_option("--dim", a.dim, "Input dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--level", a.level, "Sparse-grid level")->required()->check(CLI::Range(1, kMaxLevel));
}

std::vector<double> parse_point(const std::string& text, std::size_t dim) {
  const auto t = parse_table(text);
  if (t.rows() != 1 || t.cols != dim) {
    throw ConfigError("--x: expected " + std::to_string(dim) + " comma-separated coordinates");
  }
  return t.values;
}

std::vector<double> points_from(const std::string& file, std::size_t lattice, std::size_t dim) {
  if (!file.empty()) {
    const auto t = load_table(file);
    if (t.cols != dim) throw FormatError("point file has " + std::to_string(t.cols) + " columns, expected " + std::to_string(dim));
    return t.values;
  }
  if (lattice == 0) throw ConfigError("either --points or --lattice is required");
  return midpoint_lattice(lattice, dim);
}

void run_grid(const GridArgs& a, const std::string& format, const std::string& out_path) {
  const SparseGridDesign design(a.level, static_cast<int>(a.dim));
  Output out(out_path);
  auto& os = out.stream();
  if (format == "json") {
    os << "{\"level\": " << a.level << ", \"dim\": " << a.dim << ", \"size\": " << design.size() << ", \"points\": [";
    for (std::size_t i = 0; i < design.size(); ++i) {
      const auto label = design.label(i);
      os << (i ? "," : "") << "\n  {\"ordinal\": " << i << ", \"levels\": [";
      for (std::size_t j = 0; j < a.dim; ++j) os << (j ? ", " : "") << label.levels[j];
      os << "], \"offsets\": [";
      for (std::size_t j = 0; j < a.dim; ++j) os << (j ? ", " : "") << label.offsets[j];
      os << "], \"x\": [";
      const auto x = design.point(i);
      for (std::size_t j = 0; j < a.dim; ++j) os << (j ? ", " : "") << format_double(x[j]);
      os << "]}";
    }
    os << "\n]}\n";
    out.finish();
    return;
  }
  os << "# ordinal";
  for (std::size_t j = 0; j < a.dim; ++j) os << ",level_" << j + 1;
  for (std::size_t j = 0; j < a.dim; ++j) os << ",offset_" << j + 1;
  for (std::size_t j = 0; j < a.dim; ++j) os << ",x_" << j + 1;
  os << '\n';
  for (std::size_t i = 0; i < design.size(); ++i) {
    os << i;
    for (int l : design.levels_at(i)) os << ',' << l;
    for (auto o : design.offsets_at(i)) os << ',' << o;
    for (double x : design.point(i)) os << ',' << format_double(x);
    os << '\n';
  }
  out.finish();
}

void run_chol(const GridArgs& a, const std::string& out_path) {
  const auto kernel = TensorMarkovKernel::parse(a.kernel, a.dim);
  const auto r = inverse_cholesky_sg(kernel, SparseGridDesign(a.level, static_cast<int>(a.dim)));
  Output out(out_path);
  write_triplets(out.stream(), {r, a.dim, a.level, kernel.spec()});
  out.finish();
  std::cerr << "order " << r.order() << ", nnz " << r.nnz() << ", nnz/m "
            << static_cast<double>(r.nnz()) / static_cast<double>(r.order()) << '\n';
}

void run_features(const GridArgs& a, const std::string& x_text, bool gradient, bool dense,
                  const std::string& out_path) {
  const auto kernel = TensorMarkovKernel::parse(a.kernel, a.dim);
  const FeatureMap map(kernel, a.level);
  const auto x = parse_point(x_text, a.dim);
  const auto jac = map.evaluate_with_gradient(x);
  Output out(out_path);
  auto& os = out.stream();
  if (dense) {
    const auto v = features_dense_oracle(kernel, map.design(), inverse_cholesky_sg(kernel, map.design()), x);
    for (std::size_t k = 0; k < v.size(); ++k) os << k << ' ' << format_double(v[k]) << '\n';
    out.finish();
    return;
  }
  os << "# length " << jac.features.length << " nnz " << jac.features.nnz() << '\n';
  for (std::size_t k = 0; k < jac.features.nnz(); ++k) {
    os << jac.features.index[k] << ' ' << format_double(jac.features.value[k]);
    if (gradient) {
      for (double g : jac.gradient_row(k)) os << ' ' << format_double(g);
    }
    os << '\n';
  }
  out.finish();
}

void run_sample_prior(const GridArgs& a, const std::string& points_file, std::size_t lattice, double mean,
                      std::size_t samples, std::uint64_t seed, const std::string& out_path) {
  const HierarchicalBasis basis(TensorMarkovKernel::parse(a.kernel, a.dim), a.level, mean);
  const auto pts = points_from(points_file, lattice, a.dim);
  const std::size_t n = pts.size() / a.dim;
  std::vector<std::vector<double>> values(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng = make_stream(seed, Stream::prior, s);
    const auto z = sample_prior_coefficients(basis.size(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      values[s].push_back(evaluate_expansion(basis, z, std::span<const double>(pts).subspan(i * a.dim, a.dim)));
    }
  }
  Output out(out_path);
  auto& os = out.stream();
  os << "# x_1..x_" << a.dim << " then " << samples << " sample values\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < a.dim; ++j) os << (j ? " " : "") << format_double(pts[i * a.dim + j]);
    for (std::size_t s = 0; s < samples; ++s) os << ' ' << format_double(values[s][i]);
    os << '\n';
  }
  out.finish();
}

std::size_t default_lattice(std::size_t dim) { return dim == 1 ? 1000 : dim == 2 ? 64 : 16; }

void run_variance_gap(const GridArgs& a, int max_level, const std::string& points_file, std::size_t lattice,
                      bool per_point, const std::string& out_path) {
  const auto kernel = TensorMarkovKernel::parse(a.kernel, a.dim);
  const auto pts = points_from(points_file, lattice == 0 && points_file.empty() ? default_lattice(a.dim) : lattice, a.dim);
  Output out(out_path);
  auto& os = out.stream();
  const int last = std::max(a.level, max_level);
  if (per_point) {
    const HierarchicalBasis basis(kernel, last);
    for (std::size_t i = 0; i + a.dim <= pts.size(); i += a.dim) {
      for (std::size_t j = 0; j < a.dim; ++j) os << format_double(pts[i + j]) << ' ';
      os << format_double(variance_gap(basis, std::span<const double>(pts).subspan(i, a.dim))) << '\n';
    }
    out.finish();
    return;
  }
  os << "level,m,sup_gap\n";
  for (int l = a.level; l <= last; ++l) {
    const HierarchicalBasis basis(kernel, l);
    os << l << ',' << basis.size() << ',' << format_double(sup_variance_gap(basis, pts)) << '\n';
  }
  out.finish();
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string trace;
  std::string resume;
  std::int64_t steps = -1;
  std::int64_t seed = -1;
};

void run_train(const TrainArgs& a) {
  ModelFile file;
  Model model = [&] {
    if (!a.resume.empty()) {
      file = load_model(a.resume);
      return model_from_file(file);
    }
    if (a.config.empty()) throw ConfigError("train: --config or --resume is required");
    file.config = load_config(a.config);
    return build_model(file.config);
  }();
  if (a.seed >= 0) file.config.seed = file.config.train.seed = static_cast<std::uint64_t>(a.seed);
  if (a.steps >= 0) file.config.train.steps = static_cast<std::size_t>(a.steps);

  const auto table = load_table(a.data);
  const std::size_t d_in = model.input_width();
  const std::size_t d_out = model.output_width();
  if (table.cols != d_in + d_out) {
    throw FormatError("data file has " + std::to_string(table.cols) + " columns, expected " +
                      std::to_string(d_in + d_out) + " (inputs then responses)");
  }
  Dataset data{d_in, d_out, {}, {}};
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < d_in; ++j) data.x.push_back(table.values[i * table.cols + j]);
    for (std::size_t j = 0; j < d_out; ++j) data.y.push_back(table.values[i * table.cols + d_in + j]);
  }
  if (a.resume.empty()) {
    file.x_map = file.config.normalize ? AffineMap::fit_minmax(data.x, d_in) : AffineMap::identity(d_in);
    file.y_map = file.config.normalize ? AffineMap::fit_minmax(data.y, d_out) : AffineMap::identity(d_out);
  }
  file.x_map.apply(data.x);
  file.y_map.apply(data.y);

  const auto rows = train(model, data, file.config.train, file.config.prior, file.optimizer);
  file.params = model.params();
  save_model(a.out, file);
  if (!a.trace.empty()) {
    Output trace(a.trace);
    write_trace_csv(trace.stream(), rows);
    trace.finish();
  }
  if (!rows.empty()) {
    std::cerr << "steps " << rows.size() << ", final elbo " << rows.back().elbo << ", sigma_n " << rows.back().sigma_n
              << '\n';
  }
}

struct EvalArgs {
  std::string model;
  std::string system = "field2d";
  std::size_t ntest = 100;
  std::size_t nsamples = 100;
  std::size_t reps = 1;
  std::uint64_t seed = 0;
  std::int64_t steps = -1;
  bool no_obs_noise = false;
  std::string out;
};

void run_evaluate(const EvalArgs& a) {
  if (a.system != "field2d") throw ConfigError("evaluate: unknown system '" + a.system + "' (supported: field2d)");
  const ModelFile file = load_model(a.model);
  Field2dConfig cfg;
  cfg.n_test = a.ntest;
  cfg.n_samples = a.nsamples;
  cfg.layers = file.config.layers;
  cfg.interlayer = file.config.interlayer;
  cfg.prior = file.config.prior;
  cfg.train = file.config.train;
  if (a.steps >= 0) cfg.train.steps = static_cast<std::size_t>(a.steps);
  cfg.observation_noise = !a.no_obs_noise;

  std::vector<AveragedKS> trained, prior;
  for (std::size_t r = 0; r < a.reps; ++r) {
    const auto result = run_field2d(cfg, derive_seed(a.seed, Stream::replication, r));
    trained.push_back(result.trained);
    prior.push_back(result.prior);
    std::cerr << "replication " << r + 1 << "/" << a.reps << ": D trained " << result.trained.mean << ", D prior "
              << result.prior.mean << '\n';
  }
  Output out(a.out);
  auto& os = out.stream();
  os << "{\n\"system\": \"" << a.system << "\",\n\"seed\": " << a.seed << ",\n\"trained\": ";
  summarize_replications(trained).write(os);
  os << ",\n\"prior\": ";
  summarize_replications(prior).write(os);
  os << "\n}\n";
  out.finish();
}

std::vector<double> sample_column(const std::string& path) {
  const auto t = load_table(path);
  if (t.values.empty()) throw FormatError("'" + path + "' contains no numbers");
  return t.values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse expansions of deep tensor Markov Gaussian processes"};
  app.require_subcommand(1);

  GridArgs grid;
  std::string out_path;
  std::string format = "csv";
  auto* grid_cmd = app.add_subcommand("grid", "List sparse-grid points");
  add_grid_args(grid_cmd, grid, false);
  grid_cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  grid_cmd->add_option("--out", out_path, "Output file (default stdout)");

  auto* chol_cmd = app.add_subcommand("chol", "Sparse inverse Cholesky factor as triplets");
  add_grid_args(chol_cmd, grid, true);
  chol_cmd->add_option("--out", out_path, "Output file (default stdout)");

  std::string x_text;
  bool with_gradient = false;
  bool dense = false;
  auto* feat_cmd = app.add_subcommand("features", "Sparse hierarchical features at one input");
  add_grid_args(feat_cmd, grid, true);
  feat_cmd->add_option("--at,--x", x_text, "Input point, comma separated")->required();
  feat_cmd->add_flag("--dense", dense, "Print the dense vector from the reference evaluator");
  feat_cmd->add_flag("--gradient", with_gradient, "Also print d(phi)/dx");
  feat_cmd->add_option("--out", out_path, "Output file (default stdout)");

  std::string points_file;
  std::size_t lattice = 0;
  double mean = 0.0;
  std::size_t samples = 1;
  std::uint64_t seed = 0;
  auto* prior_cmd = app.add_subcommand("sample-prior", "Draw prior expansions at given points");
  add_grid_args(prior_cmd, grid, true);
  prior_cmd->add_option("--points", points_file, "Point file, one point per row");
  prior_cmd->add_option("--grid,--lattice", lattice, "Midpoint lattice with this many points per axis");
  prior_cmd->add_option("--mean", mean, "Constant mean");
  prior_cmd->add_option("--samples", samples, "Number of independent draws");
  prior_cmd->add_option("--seed", seed, "Root seed")->required();
  prior_cmd->add_option("--out", out_path, "Output file (default stdout)");

  bool per_point = false;
  int max_level = 0;
  auto* gap_cmd = app.add_subcommand("variance-gap", "k(x,x) - |phi(x)|^2 over a point set");
  add_grid_args(gap_cmd, grid, true);
  gap_cmd->add_option("--points", points_file, "Point file, one point per row");
  gap_cmd->add_option("--max-level", max_level, "Tabulate levels --level..--max-level");
  gap_cmd->add_option("--grid,--lattice", lattice, "Midpoint lattice per axis (default 1000, 64 or 16 by dim)");
  gap_cmd->add_flag("--per-point", per_point, "Print the gap at every point");
  gap_cmd->add_option("--out", out_path, "Output file (default stdout)");

  TrainArgs targs;
  auto* train_cmd = app.add_subcommand("train", "Variational training of a DTMGP");
  train_cmd->add_option("--config", targs.config, "Run configuration (key = value)");
  train_cmd->add_option("--data", targs.data, "Data table: inputs then responses per row")->required();
  train_cmd->add_option("--out", targs.out, "Model file to write")->required();
  train_cmd->add_option("--trace", targs.trace, "Loss trace CSV");
  train_cmd->add_option("--resume", targs.resume, "Continue from a saved model file");
  train_cmd->add_option("--steps", targs.steps, "Override the step count");
  train_cmd->add_option("--seed", targs.seed, "Override the configured seed");

  EvalArgs eargs;
  auto* eval_cmd = app.add_subcommand("evaluate", "Averaged KS statistics against a simulated system");
  eval_cmd->add_option("--model", eargs.model, "Model file providing architecture and training setup")->required();
  eval_cmd->add_option("--system", eargs.system, "System to compare with (field2d)");
  eval_cmd->add_option("--ntest", eargs.ntest, "Test points per replication")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--nsamples", eargs.nsamples, "Samples per test point")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--reps", eargs.reps, "Macro-replications")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eargs.seed, "Root seed")->required();
  eval_cmd->add_option("--steps", eargs.steps, "Override the training step count");
  eval_cmd->add_flag("--no-observation-noise", eargs.no_obs_noise, "Sample the model without observation noise");
  eval_cmd->add_option("--out", eargs.out, "Output file (default stdout)");

  std::string ks_a, ks_b;
  auto* ks_cmd = app.add_subcommand("ks", "Two-sample KS statistic of two number files");
  ks_cmd->add_option("--a", ks_a, "First sample file")->required();
  ks_cmd->add_option("--b", ks_b, "Second sample file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*grid_cmd) {
      run_grid(grid, format, out_path);
    } else if (*chol_cmd) {
      run_chol(grid, out_path);
    } else if (*feat_cmd) {
      run_features(grid, x_text, with_gradient, dense, out_path);
    } else if (*prior_cmd) {
      run_sample_prior(grid, points_file, lattice, mean, samples, seed, out_path);
    } else if (*gap_cmd) {
      run_variance_gap(grid, max_level, points_file, lattice, per_point, out_path);
    } else if (*train_cmd) {
      run_train(targs);
    } else if (*eval_cmd) {
      run_evaluate(eargs);
    } else if (*ks_cmd) {
      std::cout << format_double(ks_two_sample(sample_column(ks_a), sample_column(ks_b))) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const StructuralError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
