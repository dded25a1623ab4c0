#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "dtmgp/config.hpp"
#include "dtmgp/error.hpp"
#include "dtmgp/eval_harness.hpp"
#include "dtmgp/expansion.hpp"
#include "dtmgp/features.hpp"
#include "dtmgp/hier_chol.hpp"
#include "dtmgp/model_io.hpp"
#include "dtmgp/sparse_grid.hpp"

namespace py = pybind11;
using namespace dtmgp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Row-major copy of a (n, dim) or (dim,) array.
std::vector<double> rows_of(const Array& a, std::size_t dim) {
  if (a.ndim() == 1 && static_cast<std::size_t>(a.shape(0)) == dim) return {a.data(), a.data() + dim};
  if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(1)) != dim) {
    throw ConfigError("expected an array with " + std::to_string(dim) + " columns");
  }
  return {a.data(), a.data() + a.size()};
}

Array matrix(std::vector<double> values, std::size_t rows, std::size_t cols) {
  Array out({rows, cols});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

// Config-built model with its normalization, trained incrementally.
class Regressor {
 public:
  explicit Regressor(const std::string& config_text) : model_(build_model(parse_config(config_text))) {
    file_.config = parse_config(config_text);
  }
  explicit Regressor(ModelFile file) : file_(std::move(file)), model_(model_from_file(file_)), fitted_(true) {}

  static Regressor load(const std::string& path) { return Regressor(load_model(path)); }

  void save(const std::string& path) {
    file_.params = model_.params();
    save_model(path, file_);
  }

  Array fit(const Array& x, const Array& y, std::optional<std::size_t> steps) {
    const std::size_t d_in = model_.input_width(), d_out = model_.output_width();
    Dataset data{d_in, d_out, rows_of(x, d_in), rows_of(y, d_out)};
    if (data.y.size() / d_out != data.size()) throw ConfigError("x and y have different numbers of rows");
    if (!fitted_) {
      file_.x_map = file_.config.normalize ? AffineMap::fit_minmax(data.x, d_in) : AffineMap::identity(d_in);
      file_.y_map = file_.config.normalize ? AffineMap::fit_minmax(data.y, d_out) : AffineMap::identity(d_out);
      fitted_ = true;
    }
    file_.x_map.apply(data.x);
    file_.y_map.apply(data.y);
    auto cfg = file_.config.train;
    if (steps) cfg.steps = *steps;
    std::vector<TraceRow> rows;
    {
      py::gil_scoped_release release;
      rows = train(model_, data, cfg, file_.config.prior, file_.optimizer);
    }
    std::vector<double> out;
    for (const auto& r : rows) out.insert(out.end(), {static_cast<double>(r.step), r.elbo, r.energy, r.kl, r.sigma_n});
    return matrix(std::move(out), rows.size(), 5);
  }

  // (points, n, out_width) predictive draws in the original units.
  py::array_t<double> sample(const Array& x, std::size_t n, std::uint64_t seed, bool observation_noise) const {
    const std::size_t d_in = model_.input_width(), d_out = model_.output_width();
    auto pts = rows_of(x, d_in);
    if (fitted_) file_.x_map.apply(pts);
    const std::size_t count = pts.size() / d_in;
    py::array_t<double> out({count, n, d_out});
    double* dst = out.mutable_data();
    Rng rng = make_stream(seed, Stream::predictive);
    for (std::size_t i = 0; i < count; ++i) {
      auto draws = model_.sample_predictive(std::span<const double>(pts).subspan(i * d_in, d_in), n, rng, observation_noise);
      for (auto& v : draws) {
        if (fitted_) file_.y_map.invert(v);
        dst = std::copy(v.begin(), v.end(), dst);
      }
    }
    return out;
  }

  std::vector<double> params() const { return model_.params(); }
  double noise_var() const { return model_.noise_var(); }
  std::uint64_t step() const { return file_.optimizer.step; }

 private:
  ModelFile file_;
  Model model_;
  bool fitted_ = false;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse hierarchical expansions of deep tensor Markov Gaussian processes";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
  static py::exception<StructuralError> structural(m, "StructuralError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  static py::exception<FormatError> format(m, "FormatError", base.ptr());
  static py::exception<IoError> io(m, "IoError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config(e.what());
    } catch (const StructuralError& e) {
      structural(e.what());
    } catch (const NumericalError& e) {
      numerical(e.what());
    } catch (const FormatError& e) {
      format(e.what());
    } catch (const IoError& e) {
      io(e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def("sparse_grid_size", &sparse_grid_size, py::arg("level"), py::arg("dim"));

  m.def(
      "sparse_grid",
      [](int level, std::size_t dim) {
        const SparseGridDesign g(level, static_cast<int>(dim));
        return matrix(g.points(), g.size(), dim);
      },
      py::arg("level"), py::arg("dim"), "Sparse-grid points, one row per point, in feature order");

  m.def(
      "inverse_cholesky",
      [](const std::string& kernel, std::size_t dim, int level) {
        const auto r = inverse_cholesky_sg(TensorMarkovKernel::parse(kernel, dim), level);
        const auto t = r.triplets();
        py::array_t<std::int64_t> rows(t.size()), cols(t.size());
        Array values(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
          rows.mutable_at(i) = static_cast<std::int64_t>(t[i].row);
          cols.mutable_at(i) = static_cast<std::int64_t>(t[i].col);
          values.mutable_at(i) = t[i].value;
        }
        return py::make_tuple(rows, cols, values, r.order());
      },
      py::arg("kernel"), py::arg("dim"), py::arg("level"), "Sparse inverse Cholesky factor as (rows, cols, values, order)");

  m.def(
      "features",
      [](const std::string& kernel, std::size_t dim, int level, const Array& x) {
        const auto f = features_sg(TensorMarkovKernel::parse(kernel, dim), level, rows_of(x, dim));
        py::array_t<std::int64_t> index(f.nnz());
        Array value(f.nnz());
        for (std::size_t i = 0; i < f.nnz(); ++i) {
          index.mutable_at(i) = static_cast<std::int64_t>(f.index[i]);
          value.mutable_at(i) = f.value[i];
        }
        return py::make_tuple(index, value, f.length);
      },
      py::arg("kernel"), py::arg("dim"), py::arg("level"), py::arg("x"), "Nonzero hierarchical features at one point");

  m.def(
      "variance_gap",
      [](const std::string& kernel, std::size_t dim, int level, const Array& points) {
        const HierarchicalBasis basis(TensorMarkovKernel::parse(kernel, dim), level);
        const auto pts = rows_of(points, dim);
        Array out(pts.size() / dim);
        for (std::size_t i = 0; i < pts.size() / dim; ++i) {
          out.mutable_at(i) = variance_gap(basis, std::span<const double>(pts).subspan(i * dim, dim));
        }
        return out;
      },
      py::arg("kernel"), py::arg("dim"), py::arg("level"), py::arg("points"));

  m.def("midpoint_lattice", [](std::size_t n, std::size_t dim) { return matrix(midpoint_lattice(n, dim), midpoint_lattice(n, dim).size() / dim, dim); },
        py::arg("n_per_axis"), py::arg("dim"));

  m.def(
      "ks_two_sample", [](const Array& a, const Array& b) { return ks_two_sample({a.data(), static_cast<std::size_t>(a.size())}, {b.data(), static_cast<std::size_t>(b.size())}); },
      py::arg("a"), py::arg("b"));

  py::class_<Regressor>(m, "Regressor")
      .def(py::init<const std::string&>(), py::arg("config"), "Build from configuration text")
      .def_static("load", &Regressor::load, py::arg("path"))
      .def("save", &Regressor::save, py::arg("path"))
      .def("fit", &Regressor::fit, py::arg("x"), py::arg("y"), py::arg("steps") = py::none(),
           "Train further; returns rows (step, elbo, energy, kl, sigma_n)")
      .def("sample", &Regressor::sample, py::arg("x"), py::arg("n"), py::arg("seed") = 0,
           py::arg("observation_noise") = false)
      .def_property_readonly("params", &Regressor::params)
      .def_property_readonly("noise_var", &Regressor::noise_var)
      .def_property_readonly("step", &Regressor::step);
}
