#include "entangle/nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace entangle {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajorMatrix>;
using ConstMatMap = Eigen::Map<const RowMajorMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap mat(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MatMap mat(Tensor& t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

ConstVecMap vec(const Tensor& t) {
  return ConstVecMap(t.data(), static_cast<Eigen::Index>(t.size()));
}

VecMap vec(Tensor& t) { return VecMap(t.data(), static_cast<Eigen::Index>(t.size())); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

DenseLayer make_dense(ParamStore& params, const std::string& prefix, std::size_t in_dim,
                      std::size_t out_dim, Rng& rng) {
  DenseLayer layer{in_dim, out_dim, prefix + ".W", prefix + ".b"};
  params.add_uniform(layer.weight_name, {out_dim, in_dim}, in_dim, rng);
  params.add_uniform(layer.bias_name, {out_dim}, in_dim, rng);
  return layer;
}

DenseLayer make_dense_no_bias(ParamStore& params, const std::string& prefix, std::size_t in_dim,
                              std::size_t out_dim, Rng& rng) {
  DenseLayer layer{in_dim, out_dim, prefix + ".W", ""};
  params.add_uniform(layer.weight_name, {out_dim, in_dim}, in_dim, rng);
  return layer;
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x, const ParamStore& params) {
  require_vector(x, layer.in_dim, "dense_forward(" + layer.weight_name + ")");
  const Tensor& w = params.value(layer.weight_name);
  Tensor y = Tensor::zeros({layer.out_dim});
  vec(y).noalias() = mat(w) * vec(x);
  if (!layer.bias_name.empty()) vec(y) += vec(params.value(layer.bias_name));
  return y;
}

Tensor dense_backward(const DenseLayer& layer, const Tensor& x, const Tensor& dy,
                      ParamStore& params) {
  require_vector(x, layer.in_dim, "dense_backward(" + layer.weight_name + ")");
  require_vector(dy, layer.out_dim, "dense_backward(" + layer.weight_name + ")");
  auto& we = params.entry(layer.weight_name);
  mat(we.grad).noalias() += vec(dy) * vec(x).transpose();
  if (!layer.bias_name.empty()) vec(params.grad(layer.bias_name)).noalias() += vec(dy);
  Tensor dx = Tensor::zeros({layer.in_dim});
  vec(dx).noalias() = mat(we.value).transpose() * vec(dy);
  return dx;
}

Tensor prelu(const Tensor& x, double a) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = x[i];
    y[i] = std::max(0.0, v) + a * std::min(0.0, v);
  }
  return y;
}

Tensor prelu_backward(const Tensor& x, double a, const Tensor& dy, double& da_accum) {
  require_same_shape(x, dy, "prelu_backward");
  Tensor dx = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    dx[i] = dy[i] * (x[i] > 0.0 ? 1.0 : a);
    da_accum += dy[i] * std::min(0.0, x[i]);
  }
  return dx;
}

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1) throw std::invalid_argument("softmax: expected a rank-1 tensor");
  double m = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) m = std::max(m, x[i]);
  Tensor y = Tensor::zeros(x.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - m);
    sum += y[i];
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= sum;
  return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
  require_same_shape(y, dy, "softmax_backward");
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  Tensor dx = Tensor::zeros(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
  return dx;
}

double l2_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l2_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

Tensor l2_loss_backward(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l2_loss_backward");
  Tensor d = Tensor::zeros(pred.shape());
  double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) d[i] = scale * (pred[i] - target[i]);
  return d;
}

double gaussian_kl_to_standard(const Tensor& mu, const Tensor& sigma) {
  require_same_shape(mu, sigma, "gaussian_kl_to_standard");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (sigma[i] <= 0.0)
      throw std::domain_error("gaussian_kl_to_standard: sigma must be positive");
    double var = sigma[i] * sigma[i];
    s += mu[i] * mu[i] + var - std::log(var) - 1.0;
  }
  return 0.5 * s;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw std::invalid_argument("concat: expected rank-1 tensors");
  Tensor out = Tensor::zeros({a.size() + b.size()});
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[a.size() + i] = b[i];
  return out;
}

void LstmCell::reset() {
  h.fill(0.0);
  c.fill(0.0);
}

LstmCell make_lstm(ParamStore& params, const std::string& prefix, std::size_t input_dim,
                   std::size_t hidden_dim, Rng& rng) {
  LstmCell cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  cell.w_ih_name = prefix + ".W_ih";
  cell.w_hh_name = prefix + ".W_hh";
  cell.b_ih_name = prefix + ".b_ih";
  cell.b_hh_name = prefix + ".b_hh";
  params.add_uniform(cell.w_ih_name, {4 * hidden_dim, input_dim}, input_dim, rng);
  params.add_uniform(cell.w_hh_name, {4 * hidden_dim, hidden_dim}, hidden_dim, rng);
  params.add_uniform(cell.b_ih_name, {4 * hidden_dim}, input_dim, rng);
  params.add_uniform(cell.b_hh_name, {4 * hidden_dim}, hidden_dim, rng);
  cell.h = Tensor::zeros({hidden_dim});
  cell.c = Tensor::zeros({hidden_dim});
  return cell;
}

Tensor lstm_step(LstmCell& cell, const Tensor& x, const ParamStore& params) {
  return lstm_step(cell, x, params, nullptr);
}

Tensor lstm_step(LstmCell& cell, const Tensor& x, const ParamStore& params,
                 LstmStepCache* cache) {
  require_vector(x, cell.input_dim, "lstm_step(" + cell.w_ih_name + ")");
  const std::size_t H = cell.hidden_dim;

  Tensor pre = Tensor::zeros({4 * H});
  vec(pre).noalias() = mat(params.value(cell.w_ih_name)) * vec(x) +
                       mat(params.value(cell.w_hh_name)) * vec(cell.h) +
                       vec(params.value(cell.b_ih_name)) +
                       vec(params.value(cell.b_hh_name));

  Tensor gi = Tensor::zeros({H}), gf = Tensor::zeros({H}), gg = Tensor::zeros({H}),
         go = Tensor::zeros({H});
  for (std::size_t j = 0; j < H; ++j) {
    gi[j] = sigmoid(pre[j]);
    gf[j] = sigmoid(pre[H + j]);
    gg[j] = std::tanh(pre[2 * H + j]);
    go[j] = sigmoid(pre[3 * H + j]);
  }

  Tensor c_new = Tensor::zeros({H}), h_new = Tensor::zeros({H}), tc = Tensor::zeros({H});
  for (std::size_t j = 0; j < H; ++j) {
    c_new[j] = gf[j] * cell.c[j] + gi[j] * gg[j];
    tc[j] = std::tanh(c_new[j]);
    h_new[j] = go[j] * tc[j];
  }

  if (cache) {
    cache->x = x;
    cache->h_prev = cell.h;
    cache->c_prev = cell.c;
    cache->gate_i = gi;
    cache->gate_f = gf;
    cache->gate_g = gg;
    cache->gate_o = go;
    cache->c = c_new;
    cache->tanh_c = tc;
  }

  cell.h = h_new;
  cell.c = c_new;
  return h_new;
}

void lstm_step_backward(const LstmCell& cell, const LstmStepCache& cache, const Tensor& dh,
                        const Tensor& dc_out, ParamStore& params, Tensor* dx, Tensor* dh_prev,
                        Tensor* dc_prev) {
  const std::size_t H = cell.hidden_dim;
  require_vector(dh, H, "lstm_step_backward");

  Tensor dpre = Tensor::zeros({4 * H});
  Tensor dcp = Tensor::zeros({H});
  for (std::size_t j = 0; j < H; ++j) {
    double t = cache.tanh_c[j];
    double dc = dh[j] * cache.gate_o[j] * (1.0 - t * t);
    if (dc_out.size() == H) dc += dc_out[j];
    double di = dc * cache.gate_g[j];
    double df = dc * cache.c_prev[j];
    double dg = dc * cache.gate_i[j];
    double do_ = dh[j] * t;
    dcp[j] = dc * cache.gate_f[j];
    dpre[j] = di * cache.gate_i[j] * (1.0 - cache.gate_i[j]);
    dpre[H + j] = df * cache.gate_f[j] * (1.0 - cache.gate_f[j]);
    dpre[2 * H + j] = dg * (1.0 - cache.gate_g[j] * cache.gate_g[j]);
    dpre[3 * H + j] = do_ * cache.gate_o[j] * (1.0 - cache.gate_o[j]);
  }

  auto& w_ih = params.entry(cell.w_ih_name);
  auto& w_hh = params.entry(cell.w_hh_name);
  mat(w_ih.grad).noalias() += vec(dpre) * vec(cache.x).transpose();
  mat(w_hh.grad).noalias() += vec(dpre) * vec(cache.h_prev).transpose();
  vec(params.grad(cell.b_ih_name)).noalias() += vec(dpre);
  vec(params.grad(cell.b_hh_name)).noalias() += vec(dpre);

  if (dx) {
    *dx = Tensor::zeros({cell.input_dim});
    vec(*dx).noalias() = mat(w_ih.value).transpose() * vec(dpre);
  }
  if (dh_prev) {
    *dh_prev = Tensor::zeros({H});
    vec(*dh_prev).noalias() = mat(w_hh.value).transpose() * vec(dpre);
  }
  if (dc_prev) *dc_prev = dcp;
}

}  // namespace entangle
