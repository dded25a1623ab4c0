#include "dtmgp/model.hpp"

#include <cmath>

#include "dtmgp/error.hpp"

namespace dtmgp {

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::string_view to_string(Interlayer mode) { return mode == Interlayer::logistic ? "logistic" : "none"; }

Interlayer parse_interlayer(std::string_view text) {
  if (text == "none") return Interlayer::none;
  if (text == "logistic") return Interlayer::logistic;
  throw ConfigError("interlayer: expected 'none' or 'logistic', got '" + std::string(text) + "'");
}

Model::Model(std::vector<LayerSpec> specs, Interlayer interlayer)
    : specs_(std::move(specs)), interlayer_(interlayer) {
  if (specs_.empty()) throw StructuralError("model: at least one layer is required");
  std::size_t offset = 0;
  for (std::size_t h = 0; h < specs_.size(); ++h) {
    const auto& s = specs_[h];
    if (s.in_width == 0 || s.out_width == 0) throw StructuralError("model: layer widths must be positive");
    if (h > 0 && s.in_width != specs_[h - 1].out_width) {
      throw StructuralError("width mismatch layer " + std::to_string(h + 1));
    }
    if (s.kernel.dimension() != s.in_width) {
      throw StructuralError("model: layer " + std::to_string(h + 1) + " kernel dimension " +
                            std::to_string(s.kernel.dimension()) + " differs from its input width " +
                            std::to_string(s.in_width));
    }
    features_.push_back(std::make_shared<FeatureMap>(s.kernel, s.level));
    const std::size_t wm = s.out_width * features_.back()->size();
    offsets_.push_back({offset, offset + wm, offset + 2 * wm});
    offset += 2 * wm + s.out_width;
  }
  params_.assign(offset + 1, 0.0);
  initialize();
}

double Model::noise_var() const { return std::exp(params_.back()); }

std::span<double> Model::log_sigma(std::size_t h) {
  return {params_.data() + offsets_[h].log_sigma, specs_[h].out_width * feature_count(h)};
}
std::span<double> Model::mean_w(std::size_t h) {
  return {params_.data() + offsets_[h].mean_w, specs_[h].out_width * feature_count(h)};
}
std::span<double> Model::bias(std::size_t h) { return {params_.data() + offsets_[h].bias, specs_[h].out_width}; }
std::span<const double> Model::log_sigma(std::size_t h) const {
  return {params_.data() + offsets_[h].log_sigma, specs_[h].out_width * feature_count(h)};
}
std::span<const double> Model::mean_w(std::size_t h) const {
  return {params_.data() + offsets_[h].mean_w, specs_[h].out_width * feature_count(h)};
}
std::span<const double> Model::bias(std::size_t h) const {
  return {params_.data() + offsets_[h].bias, specs_[h].out_width};
}

void Model::initialize(double sigma0, double weight_mean, double bias_mean, double noise_var) {
  if (!(sigma0 > 0.0) || !(noise_var > 0.0)) throw ConfigError("model: sigma and noise variance must be positive");
  for (std::size_t h = 0; h < depth(); ++h) {
    for (auto& v : log_sigma(h)) v = std::log(sigma0);
    for (auto& v : mean_w(h)) v = weight_mean;
    for (auto& v : bias(h)) v = bias_mean;
  }
  params_.back() = std::log(noise_var);
}

LayerNoise Model::draw_noise(Rng& rng) const {
  LayerNoise noise;
  noise.reserve(depth());
  for (std::size_t h = 0; h < depth(); ++h) noise.push_back(standard_normals(specs_[h].out_width * feature_count(h), rng));
  return noise;
}

LayerNoise Model::zero_noise() const {
  LayerNoise noise;
  for (std::size_t h = 0; h < depth(); ++h) noise.emplace_back(specs_[h].out_width * feature_count(h), 0.0);
  return noise;
}

std::vector<double> Model::forward(std::span<const double> x, const LayerNoise& noise) const {
  return run(x, noise, nullptr);
}

std::vector<double> Model::forward(std::span<const double> x, const LayerNoise& noise, ForwardTrace& trace) const {
  return run(x, noise, &trace);
}

std::vector<double> Model::run(std::span<const double> x, const LayerNoise& noise, ForwardTrace* trace) const {
  if (x.size() != input_width()) {
    throw StructuralError("forward: input of size " + std::to_string(x.size()) + ", model expects " +
                          std::to_string(input_width()));
  }
  if (noise.size() != depth()) throw StructuralError("forward: noise has the wrong number of layers");
  for (std::size_t h = 0; h < depth(); ++h) {
    if (noise[h].size() != specs_[h].out_width * feature_count(h)) {
      throw StructuralError("forward: noise shape mismatch at layer " + std::to_string(h + 1));
    }
  }
  if (trace) {
    trace->noise = noise;
    trace->layers.assign(depth(), {});
  }

  std::vector<double> t(x.begin(), x.end());
  for (std::size_t h = 0; h < depth(); ++h) {
    const std::size_t w_out = specs_[h].out_width;
    const std::size_t m = feature_count(h);
    std::vector<double> pre;
    if (h > 0 && interlayer_ == Interlayer::logistic) {
      pre = t;
      for (auto& v : t) v = logistic(v);
    }
    SparseFeatureJacobian phi = trace ? features_[h]->evaluate_with_gradient(t)
                                      : SparseFeatureJacobian{features_[h]->evaluate(t), t.size(), {}};
    const auto ls = log_sigma(h);
    const auto mw = mean_w(h);
    const auto mu = bias(h);
    const auto& z = noise[h];
    const auto& fv = phi.features;
    std::vector<double> out(mu.begin(), mu.end());
    std::size_t multiplies = 0;
    for (std::size_t w = 0; w < w_out; ++w) {
      double s = 0.0;
      for (std::size_t k = 0; k < fv.nnz(); ++k) {
        const std::size_t idx = w * m + fv.index[k];
        const double weight = std::exp(ls[idx]) * z[idx] + mw[idx];
        s += weight * fv.value[k];
        ++multiplies;
      }
      out[w] += s;
    }
    if (trace) {
      auto& lt = trace->layers[h];
      lt.input = t;
      lt.pre_squash = std::move(pre);
      lt.phi = std::move(phi);
      lt.output = out;
      lt.multiplies = multiplies;
    }
    t = std::move(out);
  }
  return t;
}

std::vector<double> Model::backward(const ForwardTrace& trace, std::span<const double> grad_output,
                                    std::span<double> param_grad) const {
  if (trace.layers.size() != depth() || trace.noise.size() != depth()) {
    throw StructuralError("backward: trace depth does not match the model");
  }
  if (param_grad.size() != num_params()) throw StructuralError("backward: gradient buffer has the wrong size");
  if (grad_output.size() != output_width()) throw StructuralError("backward: output gradient has the wrong size");

  std::vector<double> g(grad_output.begin(), grad_output.end());
  for (std::size_t h = depth(); h-- > 0;) {
    const auto& lt = trace.layers[h];
    const auto& fv = lt.phi.features;
    const std::size_t w_out = specs_[h].out_width;
    const std::size_t m = feature_count(h);
    const std::size_t d = specs_[h].in_width;
    if (lt.input.size() != d || lt.output.size() != w_out || trace.noise[h].size() != w_out * m ||
        fv.length != m || lt.phi.gradient.size() != fv.nnz() * d) {
      throw StructuralError("backward: stale trace at layer " + std::to_string(h + 1));
    }
    const auto ls = log_sigma(h);
    const auto mw = mean_w(h);
    const auto& z = trace.noise[h];
    const auto& off = offsets_[h];

    std::vector<double> dphi(fv.nnz(), 0.0);
    for (std::size_t w = 0; w < w_out; ++w) {
      param_grad[off.bias + w] += g[w];
      if (g[w] == 0.0) continue;
      for (std::size_t k = 0; k < fv.nnz(); ++k) {
        const std::size_t idx = w * m + fv.index[k];
        const double sigma = std::exp(ls[idx]);
        const double dw = g[w] * fv.value[k];
        param_grad[off.mean_w + idx] += dw;
        param_grad[off.log_sigma + idx] += dw * z[idx] * sigma;
        dphi[k] += (sigma * z[idx] + mw[idx]) * g[w];
      }
    }
    std::vector<double> dx(d, 0.0);
    for (std::size_t k = 0; k < fv.nnz(); ++k) {
      const auto row = lt.phi.gradient_row(k);
      for (std::size_t j = 0; j < d; ++j) dx[j] += dphi[k] * row[j];
    }
    if (!lt.pre_squash.empty()) {
      for (std::size_t j = 0; j < d; ++j) dx[j] *= lt.input[j] * (1.0 - lt.input[j]);
    }
    g = std::move(dx);
  }
  return g;
}

std::vector<std::vector<double>> Model::sample_predictive(std::span<const double> x, std::size_t n, Rng& rng,
                                                          bool observation_noise) const {
  std::vector<std::vector<double>> out;
  out.reserve(n);
  const double sd = std::sqrt(noise_var());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t s = 0; s < n; ++s) {
    auto y = forward(x, draw_noise(rng));
    if (observation_noise) {
      for (auto& v : y) v += sd * normal(rng);
    }
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace dtmgp
