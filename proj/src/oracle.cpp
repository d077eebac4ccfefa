#include "varmaformer/oracle.hpp"

#include "varmaformer/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace varmaformer::oracle {

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major [rows][cols]

constexpr std::int64_t kSyntheticStart = 1467331200;  // 2016-07-01 00:00:00 UTC

// y = x W + b for a [rows][in] input and W stored [in, out] row-major.
Mat affine(const Mat& x, const NamedArray& weight, const NamedArray& bias) {
  const std::size_t in = weight.shape.at(0);
  const std::size_t out = weight.shape.at(1);
  Mat y(x.size(), Vec(out, 0.0));
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (x[r].size() != in) throw std::invalid_argument("reference: width mismatch in " + weight.name);
    for (std::size_t o = 0; o < out; ++o) {
      double s = bias.values[o];
      for (std::size_t i = 0; i < in; ++i) s += x[r][i] * weight.values[i * out + o];
      y[r][o] = s;
    }
  }
  return y;
}

Mat affine(const Mat& x, const ParameterSnapshot& params, const std::string& name) {
  return affine(x, find_array(params, name + ".weight"), find_array(params, name + ".bias"));
}

double gelu_scalar(double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); }
double sigmoid_scalar(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Mat norm_affine(const Mat& x, const NamedArray& gain, const NamedArray& bias) {
  Mat y = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double n = static_cast<double>(x[r].size());
    double m = 0.0;
    for (double v : x[r]) m += v;
    m /= n;
    double var = 0.0;
    for (double v : x[r]) var += (v - m) * (v - m);
    var /= n;
    const double denom = std::sqrt(var + 1e-5);
    for (std::size_t d = 0; d < x[r].size(); ++d) y[r][d] = (x[r][d] - m) / denom * gain.values[d] + bias.values[d];
  }
  return y;
}

// Cross-attention of queries [M][D] over keys/values [N][D] for one series.
Mat attention(const Mat& queries, const Mat& kv, const ParameterSnapshot& params, const std::string& prefix,
              std::size_t heads) {
  const Mat q = affine(queries, params, prefix + "attn.query");
  const Mat k = affine(kv, params, prefix + "attn.key");
  const Mat v = affine(kv, params, prefix + "attn.value");
  const std::size_t width = q[0].size();
  const std::size_t head_width = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));
  Mat merged(q.size(), Vec(width, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t lo = h * head_width;
    for (std::size_t m = 0; m < q.size(); ++m) {
      Vec score(k.size());
      double peak = -INFINITY;
      for (std::size_t n = 0; n < k.size(); ++n) {
        double s = 0.0;
        for (std::size_t i = 0; i < head_width; ++i) s += q[m][lo + i] * k[n][lo + i];
        score[n] = s * inv_sqrt;
        peak = std::max(peak, score[n]);
      }
      double total = 0.0;
      for (double& s : score) total += (s = std::exp(s - peak));
      for (std::size_t n = 0; n < k.size(); ++n) {
        const double a = score[n] / total;
        for (std::size_t i = 0; i < head_width; ++i) merged[m][lo + i] += a * v[n][lo + i];
      }
    }
  }
  return affine(merged, params, prefix + "attn.output");
}

}  // namespace

SyntheticKind parse_synthetic_kind(const std::string& text) {
  if (text == "ar") return SyntheticKind::Ar;
  if (text == "varma" || text == "arma") return SyntheticKind::Varma;
  if (text == "sine-plus-noise" || text == "sine") return SyntheticKind::SinePlusNoise;
  throw std::invalid_argument("unknown synthetic kind '" + text + "' (ar|varma|sine-plus-noise)");
}

double companion_spectral_radius(const std::vector<double>& ar) {
  if (ar.empty()) return 0.0;
  const auto p = static_cast<Eigen::Index>(ar.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) companion(0, i) = ar[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

Dataset generate(const SyntheticSpec& spec) {
  if (spec.length == 0 || spec.channels == 0) throw std::invalid_argument("synthetic series needs length and channels");
  if (spec.noise_std < 0.0) throw std::invalid_argument("noise_std must be non-negative");
  if (spec.kind != SyntheticKind::SinePlusNoise) {
    const double radius = companion_spectral_radius(spec.ar);
    if (radius >= 1.0) {
      throw std::invalid_argument("non-stationary AR coefficients: companion spectral radius " +
                                  std::to_string(radius) + " >= 1");
    }
  }
  if (spec.kind == SyntheticKind::SinePlusNoise && !(spec.period > 0.0)) {
    throw std::invalid_argument("sine period must be positive");
  }

  Dataset ds;
  ds.name = spec.name;
  ds.frequency = "1h";
  ds.values = Matrix(spec.length, spec.channels);
  for (std::size_t c = 0; c < spec.channels; ++c) ds.channel_names.push_back("x" + std::to_string(c));
  for (std::size_t t = 0; t < spec.length; ++t) ds.timestamps.push_back(kSyntheticStart + static_cast<std::int64_t>(t) * 3600);

  Rng rng(spec.seed);
  const std::size_t p = spec.ar.size();
  const std::size_t q = spec.kind == SyntheticKind::Varma ? spec.ma.size() : 0;
  // Per-channel histories, newest last.
  std::vector<Vec> x(spec.channels, Vec(p, spec.initial));
  std::vector<Vec> e(spec.channels, Vec(q, 0.0));
  const std::size_t total = spec.burn_in + spec.length;
  for (std::size_t step = 0; step < total; ++step) {
    for (std::size_t c = 0; c < spec.channels; ++c) {
      const double noise = spec.noise_std > 0.0 ? spec.noise_std * rng.normal() : 0.0;
      double value = 0.0;
      if (spec.kind == SyntheticKind::SinePlusNoise) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(spec.channels);
        value = spec.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(step) / spec.period + phase) +
                noise;
      } else {
        value = noise;
        for (std::size_t i = 0; i < p; ++i) value += spec.ar[i] * x[c][p - 1 - i];
        for (std::size_t j = 0; j < q; ++j) value += spec.ma[j] * e[c][q - 1 - j];
        if (p > 0) {
          x[c].erase(x[c].begin());
          x[c].push_back(value);
        }
        if (q > 0) {
          e[c].erase(e[c].begin());
          e[c].push_back(noise);
        }
      }
      if (step >= spec.burn_in) ds.values(step - spec.burn_in, c) = value;
    }
  }
  return ds;
}

Matrix reference_forward(const Matrix& lookback, const ModelConfig& cfg, const ParameterSnapshot& params) {
  const std::size_t channels = lookback.rows;
  const std::size_t length = lookback.cols;
  const std::size_t plen = cfg.patch_length;
  const std::size_t count = (length + plen - 1) / plen;
  const std::size_t width = cfg.d_model;
  const std::size_t half = width / 2;
  const std::size_t queries = cfg.horizon / plen;
  if (length != cfg.lookback) throw std::invalid_argument("reference_forward: lookback length mismatch");
  if (channels * count * width > kReferenceCeiling) {
    throw std::invalid_argument("reference_forward: C*N*D = " + std::to_string(channels * count * width) +
                                " exceeds the ceiling of " + std::to_string(kReferenceCeiling));
  }
  const bool use_vfe = cfg.p > 0 || cfg.q > 0;
  double alpha = cfg.alpha;
  if (cfg.alpha_trainable) alpha = find_array(params, "embed.alpha").values.at(0);

  Matrix out(channels, cfg.horizon);
  for (std::size_t c = 0; c < channels; ++c) {
    // instance normalization
    double mu = 0.0;
    for (std::size_t t = 0; t < length; ++t) mu += lookback(c, t);
    mu /= static_cast<double>(length);
    double var = 0.0;
    for (std::size_t t = 0; t < length; ++t) var += (lookback(c, t) - mu) * (lookback(c, t) - mu);
    const double sigma = std::max(std::sqrt(var / static_cast<double>(length)), 1e-5);

    // replication-padded patches [N][P]
    Mat x(count, Vec(plen));
    for (std::size_t n = 0; n < count; ++n) {
      for (std::size_t j = 0; j < plen; ++j) {
        const std::size_t t = std::min(n * plen + j, length - 1);
        x[n][j] = (lookback(c, t) - mu) / sigma;
      }
    }

    // VARMA features [N][D]
    Mat z;
    if (use_vfe) {
      Mat combined(count, Vec(width, 0.0));
      if (cfg.p > 0) {
        Mat lags(count, Vec(cfg.p * plen, 0.0));
        for (std::size_t n = 0; n < count; ++n) {
          for (std::size_t i = 1; i <= cfg.p; ++i) {
            if (n < i) continue;
            const double phi = find_array(params, "vfe.phi." + std::to_string(i)).values[0];
            for (std::size_t j = 0; j < plen; ++j) lags[n][(i - 1) * plen + j] = phi * x[n - i][j];
          }
        }
        const Mat zar = affine(lags, params, "vfe.proj_ar");
        for (std::size_t n = 0; n < count; ++n) {
          for (std::size_t d = 0; d < half; ++d) combined[n][d] = zar[n][d];
        }
      }
      if (cfg.q > 0) {
        Mat lags(count, Vec(cfg.q * plen, 0.0));
        for (std::size_t n = 0; n < count; ++n) {
          for (std::size_t k = 1; k <= cfg.q; ++k) {
            if (n < k + 1) continue;  // eps[n - k] is zero unless n - k >= 1
            const double theta = find_array(params, "vfe.theta." + std::to_string(k)).values[0];
            for (std::size_t j = 0; j < plen; ++j) {
              lags[n][(k - 1) * plen + j] = theta * (x[n - k][j] - x[n - k - 1][j]);
            }
          }
        }
        const Mat zma = affine(lags, params, "vfe.proj_ma");
        for (std::size_t n = 0; n < count; ++n) {
          for (std::size_t d = 0; d < half; ++d) combined[n][half + d] = zma[n][d];
        }
      }
      z = affine(combined, params, "vfe.fuse");
    }

    // keys = values = E [N][D]
    Mat e = affine(x, params, "embed.patch");
    const NamedArray& pe = find_array(params, "embed.positional");
    for (std::size_t n = 0; n < count; ++n) {
      for (std::size_t d = 0; d < width; ++d) {
        if (use_vfe) e[n][d] += alpha * z[n][d];
        e[n][d] += pe.values[n * width + d];
      }
    }

    // learnable queries [M][D]
    const NamedArray& dummy = find_array(params, "query.dummy");
    Mat qd(queries, Vec(width));
    for (std::size_t m = 0; m < queries; ++m) {
      for (std::size_t d = 0; d < width; ++d) qd[m][d] = dummy.values[m * width + d];
    }
    Mat q = affine(qd, params, "query.embed");

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      const std::string prefix = "decoder." + std::to_string(l) + ".";
      if (cfg.ve_atten) {
        Mat context(1, Vec(width, 0.0));
        for (std::size_t n = 0; n < count; ++n) {
          for (std::size_t d = 0; d < width; ++d) context[0][d] += e[n][d] / static_cast<double>(count);
        }
        Mat hidden = affine(context, params, prefix + "gate_in");
        for (double& v : hidden[0]) v = gelu_scalar(v);
        Mat gate = affine(hidden, params, prefix + "gate_out");
        for (double& v : gate[0]) v = sigmoid_scalar(v);
        for (std::size_t m = 0; m < queries; ++m) {
          for (std::size_t d = 0; d < width; ++d) {
            q[m][d] = cfg.beta * (q[m][d] * gate[0][d]) + (1.0 - cfg.beta) * q[m][d];
          }
        }
      }
      const Mat attended = attention(q, e, params, prefix, cfg.n_heads);
      Mat residual = q;
      for (std::size_t m = 0; m < queries; ++m) {
        for (std::size_t d = 0; d < width; ++d) residual[m][d] += attended[m][d];
      }
      const Mat x1 = norm_affine(residual, find_array(params, prefix + "norm1.gain"),
                                 find_array(params, prefix + "norm1.bias"));
      Mat hidden = affine(x1, params, prefix + "ffn.in");
      for (Vec& row : hidden) {
        for (double& v : row) v = gelu_scalar(v);
      }
      Mat ffn = affine(hidden, params, prefix + "ffn.out");
      for (std::size_t m = 0; m < queries; ++m) {
        for (std::size_t d = 0; d < width; ++d) ffn[m][d] += x1[m][d];
      }
      q = norm_affine(ffn, find_array(params, prefix + "norm2.gain"), find_array(params, prefix + "norm2.bias"));
    }

    const Mat patches_out = affine(q, params, "head");
    for (std::size_t m = 0; m < queries; ++m) {
      for (std::size_t j = 0; j < plen; ++j) out(c, m * plen + j) = patches_out[m][j] * sigma + mu;
    }
  }
  return out;
}

}  // namespace varmaformer::oracle
