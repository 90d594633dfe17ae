#pragma once

#include <cstddef>
#include <string>

#include "entangle/param_store.hpp"
#include "entangle/tensor.hpp"

namespace entangle {

/// Affine map y = W*x + b with parameters held in a ParamStore.
/// weight shape [out_dim, in_dim], bias shape [out_dim].
struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::string weight_name;
  std::string bias_name;
};

/// Registers `prefix`.W / `prefix`.b, uniform in [-s, s] with s = 1/sqrt(in_dim).
DenseLayer make_dense(ParamStore& params, const std::string& prefix, std::size_t in_dim,
                      std::size_t out_dim, Rng& rng);
/// Pure linear map y = W*x (empty bias_name marks the layer bias-free).
DenseLayer make_dense_no_bias(ParamStore& params, const std::string& prefix, std::size_t in_dim,
                              std::size_t out_dim, Rng& rng);

Tensor dense_forward(const DenseLayer& layer, const Tensor& x, const ParamStore& params);
/// Accumulates dW, db into the store; returns dL/dx.
Tensor dense_backward(const DenseLayer& layer, const Tensor& x, const Tensor& dy,
                      ParamStore& params);

/// Elementwise max(0, x) + a*min(0, x).
Tensor prelu(const Tensor& x, double a);
/// Returns dL/dx; adds d(loss)/d(slope) into da_accum.
Tensor prelu_backward(const Tensor& x, double a, const Tensor& dy, double& da_accum);

/// Probability vector, computed with max-subtraction.
Tensor softmax(const Tensor& x);
/// Backward through softmax given its output y and dL/dy.
Tensor softmax_backward(const Tensor& y, const Tensor& dy);

/// Sum of squared differences divided by element count.
double l2_loss(const Tensor& pred, const Tensor& target);
Tensor l2_loss_backward(const Tensor& pred, const Tensor& target);

/// 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1); sigma entries must be > 0.
double gaussian_kl_to_standard(const Tensor& mu, const Tensor& sigma);

Tensor concat(const Tensor& a, const Tensor& b);

/// Single LSTM cell with packed gates in order (input, forget, candidate, output).
/// Input and hidden biases are kept separate, so the parameter count is
/// 4*H*(I + H + 2).
struct LstmCell {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::string w_ih_name;  // [4H, I]
  std::string w_hh_name;  // [4H, H]
  std::string b_ih_name;  // [4H]
  std::string b_hh_name;  // [4H]
  Tensor h;
  Tensor c;

  void reset();
};

LstmCell make_lstm(ParamStore& params, const std::string& prefix, std::size_t input_dim,
                   std::size_t hidden_dim, Rng& rng);

/// Post-activation values of one step, kept for the backward pass.
struct LstmStepCache {
  Tensor x, h_prev, c_prev;
  Tensor gate_i, gate_f, gate_g, gate_o;
  Tensor c, tanh_c;
};

/// Standard gate update; returns the new h and advances (h, c) in the cell.
Tensor lstm_step(LstmCell& cell, const Tensor& x, const ParamStore& params);
Tensor lstm_step(LstmCell& cell, const Tensor& x, const ParamStore& params, LstmStepCache* cache);

/// Accumulates parameter gradients for one step. dh is dL/dh_out; dc_out may be
/// empty when no gradient arrives at the cell state. Optional outputs receive
/// dL/dx, dL/dh_prev, dL/dc_prev.
void lstm_step_backward(const LstmCell& cell, const LstmStepCache& cache, const Tensor& dh,
                        const Tensor& dc_out, ParamStore& params, Tensor* dx, Tensor* dh_prev,
                        Tensor* dc_prev);

}  // namespace entangle
