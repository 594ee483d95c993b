#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace d2k::learner {

/// One recurrent layer. Gate rows are stacked in the order i, f, g, o:
///   z = W x_t + U h_{t-1} + b
///   i, f, o = sigmoid(z_i, z_f, z_o),  g = tanh(z_g)
///   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)
struct LstmLayer {
  Eigen::MatrixXd W;  ///< 4H x inputs
  Eigen::MatrixXd U;  ///< 4H x H
  Eigen::VectorXd b;  ///< 4H

  Eigen::Index hidden() const { return U.cols(); }
  Eigen::Index inputs() const { return W.cols(); }
  bool operator==(const LstmLayer& o) const { return W == o.W && U == o.U && b == o.b; }
};

struct Readout {
  Eigen::MatrixXd W;  ///< outputs x H
  Eigen::VectorXd b;
  bool operator==(const Readout& o) const { return W == o.W && b == o.b; }
};

/// Stacked LSTM with a linear readout applied at every step.
///
/// Sequences are passed time-major: a batch of B windows of T steps is a
/// matrix with T*B columns, where column t*B + k is step t of window k.
struct Network {
  std::vector<LstmLayer> layers;
  Readout readout;

  /// Weights and biases uniform in +-1/sqrt(fan_in), where fan_in is
  /// inputs + H for a recurrent layer and H for the readout.
  static Network init(Eigen::Index n_inputs, Eigen::Index n_outputs, int n_layers, Eigen::Index hidden,
                      std::uint64_t seed);

  Eigen::Index n_inputs() const { return layers.front().inputs(); }
  Eigen::Index n_outputs() const { return readout.W.rows(); }
  /// Readout plus one group per recurrent layer.
  std::size_t n_groups() const { return layers.size() + 1; }
  bool operator==(const Network& o) const { return layers == o.layers && readout == o.readout; }

  /// Hidden sequence after layers [0, end) for inputs to layer 0.
  Eigen::MatrixXd hidden_after(const Eigen::MatrixXd& x, Eigen::Index batch, std::size_t end) const;
  /// Outputs for inputs entering at layer `first` (first == layers.size()
  /// means the inputs are already top-layer hidden states).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Eigen::Index batch, std::size_t first = 0) const;
};

/// Same shapes as Network, zero-initialized.
using Gradients = Network;
Gradients zeros_like(const Network& net);

/**
 * Mean absolute error between forward(x) and y over all elements, and its
 * gradient with respect to layers >= first and the readout. Gradients of
 * layers below `first` are left untouched.
 */
double loss_and_gradient(const Network& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::Index batch,
                         std::size_t first, Gradients& grad);

/// Scale the trainable gradients so that their joint L2 norm is at most
/// max_norm. Returns the norm before scaling.
double clip_gradients(Gradients& grad, std::size_t first, double max_norm);

/// Adaptive-moment optimizer over the trainable part of a network.
class Adam {
 public:
  Adam(const Network& shape, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Network& net, const Gradients& grad, std::size_t first);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Gradients m_, v_;
};

}  // namespace d2k::learner
