#include "d2k/learner/lstm.hpp"

#include <cmath>
#include <random>
#include <type_traits>

#include "d2k/common/error.hpp"

namespace d2k::learner {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

template <class T>
struct Span {
  T* data;
  Index size;
};

// Flat views of the trainable parameters: layers >= first, then the readout.
template <class Net>
auto spans(Net& net, std::size_t first) {
  using T = std::remove_pointer_t<decltype(net.readout.W.data())>;
  std::vector<Span<T>> out;
  for (std::size_t l = first; l < net.layers.size(); ++l) {
    auto& L = net.layers[l];
    out.push_back({L.W.data(), L.W.size()});
    out.push_back({L.U.data(), L.U.size()});
    out.push_back({L.b.data(), L.b.size()});
  }
  out.push_back({net.readout.W.data(), net.readout.W.size()});
  out.push_back({net.readout.b.data(), net.readout.b.size()});
  return out;
}

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

struct LayerTrace {
  MatrixXd gates;  // activated [i; f; g; o], 4H x TB
  MatrixXd c;      // cell state, H x TB
  MatrixXd h;      // output, H x TB
};

LayerTrace run_layer(const LstmLayer& layer, const MatrixXd& x, Index batch, bool keep_gates) {
  if (x.rows() != layer.inputs()) throw DimensionError("layer input size mismatch");
  const Index H = layer.hidden();
  const Index steps = x.cols() / batch;
  MatrixXd z_in = layer.W * x;
  z_in.colwise() += layer.b;

  LayerTrace tr;
  tr.h.resize(H, x.cols());
  if (keep_gates) {
    tr.gates.resize(4 * H, x.cols());
    tr.c.resize(H, x.cols());
  }
  MatrixXd h = MatrixXd::Zero(H, batch);
  MatrixXd c = MatrixXd::Zero(H, batch);
  MatrixXd z(4 * H, batch);
  for (Index t = 0; t < steps; ++t) {
    z = z_in.middleCols(t * batch, batch);
    if (t > 0) z.noalias() += layer.U * h;
    const MatrixXd i = sigmoid(z.topRows(H));
    const MatrixXd f = sigmoid(z.middleRows(H, H));
    const MatrixXd g = z.middleRows(2 * H, H).array().tanh().matrix();
    const MatrixXd o = sigmoid(z.bottomRows(H));
    c = (f.array() * c.array() + i.array() * g.array()).matrix();
    h = (o.array() * c.array().tanh()).matrix();
    tr.h.middleCols(t * batch, batch) = h;
    if (keep_gates) {
      auto gates = tr.gates.middleCols(t * batch, batch);
      gates.topRows(H) = i;
      gates.middleRows(H, H) = f;
      gates.middleRows(2 * H, H) = g;
      gates.bottomRows(H) = o;
      tr.c.middleCols(t * batch, batch) = c;
    }
  }
  return tr;
}

// Writes the parameter gradients into `grad`; returns dL/dx.
MatrixXd backward_layer(const LstmLayer& layer, const MatrixXd& x, const LayerTrace& tr, const MatrixXd& dh_out,
                        Index batch, LstmLayer& grad, bool need_dx) {
  const Index H = layer.hidden();
  const Index steps = x.cols() / batch;
  MatrixXd dz(4 * H, x.cols());
  MatrixXd dh_next = MatrixXd::Zero(H, batch);
  MatrixXd dc_next = MatrixXd::Zero(H, batch);
  for (Index t = steps - 1; t >= 0; --t) {
    const auto gates = tr.gates.middleCols(t * batch, batch);
    const auto i = gates.topRows(H).array();
    const auto f = gates.middleRows(H, H).array();
    const auto g = gates.middleRows(2 * H, H).array();
    const auto o = gates.bottomRows(H).array();
    const Eigen::ArrayXXd tc = tr.c.middleCols(t * batch, batch).array().tanh();
    const Eigen::ArrayXXd dh = dh_out.middleCols(t * batch, batch).array() + dh_next.array();
    const Eigen::ArrayXXd dc = dc_next.array() + dh * o * (1.0 - tc.square());
    auto dzt = dz.middleCols(t * batch, batch);
    dzt.topRows(H) = (dc * g * i * (1.0 - i)).matrix();
    if (t > 0) {
      dzt.middleRows(H, H) = (dc * tr.c.middleCols((t - 1) * batch, batch).array() * f * (1.0 - f)).matrix();
    } else {
      dzt.middleRows(H, H).setZero();
    }
    dzt.middleRows(2 * H, H) = (dc * i * (1.0 - g.square())).matrix();
    dzt.bottomRows(H) = (dh * tc * o * (1.0 - o)).matrix();
    dc_next = (dc * f).matrix();
    dh_next.noalias() = layer.U.transpose() * dzt;
  }
  grad.W.noalias() = dz * x.transpose();
  grad.b = dz.rowwise().sum();
  grad.U.setZero();
  if (steps > 1) {
    const Index n = (steps - 1) * batch;
    grad.U.noalias() = dz.rightCols(n) * tr.h.leftCols(n).transpose();
  }
  if (!need_dx) return {};
  return layer.W.transpose() * dz;
}

void check_batch(const MatrixXd& x, Index batch) {
  if (batch < 1 || x.cols() % batch != 0) throw DimensionError("sequence columns must be a multiple of the batch size");
  if (!x.allFinite()) throw NonFiniteError("non-finite network input");
}

}  // namespace

Network Network::init(Index n_inputs, Index n_outputs, int n_layers, Index hidden, std::uint64_t seed) {
  if (n_inputs < 1 || n_outputs < 1 || n_layers < 1 || hidden < 1) {
    throw ValidationError("network", "sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&](Index rows, Index cols, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    MatrixXd m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) m(r, c) = u(rng);
    }
    return m;
  };
  Network net;
  Index in = n_inputs;
  for (int l = 0; l < n_layers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in + hidden));
    LstmLayer layer;
    layer.W = uniform(4 * hidden, in, bound);
    layer.U = uniform(4 * hidden, hidden, bound);
    layer.b = uniform(4 * hidden, 1, bound);
    net.layers.push_back(std::move(layer));
    in = hidden;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  net.readout.W = uniform(n_outputs, hidden, bound);
  net.readout.b = uniform(n_outputs, 1, bound);
  return net;
}

MatrixXd Network::hidden_after(const MatrixXd& x, Index batch, std::size_t end) const {
  check_batch(x, batch);
  MatrixXd h = x;
  for (std::size_t l = 0; l < end && l < layers.size(); ++l) h = run_layer(layers[l], h, batch, false).h;
  return h;
}

MatrixXd Network::forward(const MatrixXd& x, Index batch, std::size_t first) const {
  check_batch(x, batch);
  MatrixXd h = x;
  for (std::size_t l = first; l < layers.size(); ++l) h = run_layer(layers[l], h, batch, false).h;
  if (h.rows() != readout.W.cols()) throw DimensionError("readout input size mismatch");
  MatrixXd y = readout.W * h;
  y.colwise() += readout.b;
  return y;
}

Gradients zeros_like(const Network& net) {
  Gradients g = net;
  for (auto& s : spans(g, 0)) Eigen::Map<Eigen::VectorXd>(s.data, s.size).setZero();
  return g;
}

double loss_and_gradient(const Network& net, const MatrixXd& x, const MatrixXd& y, Index batch, std::size_t first,
                         Gradients& grad) {
  check_batch(x, batch);
  const std::size_t L = net.layers.size();
  if (first > L) throw ValidationError("first", "beyond the recurrent stack");
  std::vector<MatrixXd> inputs{x};
  std::vector<LayerTrace> traces;
  for (std::size_t l = first; l < L; ++l) {
    traces.push_back(run_layer(net.layers[l], inputs.back(), batch, true));
    inputs.push_back(traces.back().h);
  }
  const MatrixXd& top = inputs.back();
  MatrixXd pred = net.readout.W * top;
  pred.colwise() += net.readout.b;
  if (pred.rows() != y.rows() || pred.cols() != y.cols()) throw DimensionError("target shape mismatch");

  const MatrixXd diff = pred - y;
  const double n = static_cast<double>(diff.size());
  const double loss = diff.cwiseAbs().sum() / n;
  const MatrixXd dy = diff.unaryExpr([n](double d) { return d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0); });

  grad.readout.W.noalias() = dy * top.transpose();
  grad.readout.b = dy.rowwise().sum();
  MatrixXd dh = net.readout.W.transpose() * dy;
  for (std::size_t l = L; l-- > first;) {
    const std::size_t k = l - first;
    dh = backward_layer(net.layers[l], inputs[k], traces[k], dh, batch, grad.layers[l], l > first);
  }
  return loss;
}

double clip_gradients(Gradients& grad, std::size_t first, double max_norm) {
  double sq = 0.0;
  const auto ss = spans(grad, first);
  for (const auto& s : ss) sq += Eigen::Map<Eigen::VectorXd>(s.data, s.size).squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& s : ss) Eigen::Map<Eigen::VectorXd>(s.data, s.size) *= scale;
  }
  return norm;
}

Adam::Adam(const Network& shape, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(zeros_like(shape)), v_(zeros_like(shape)) {}

void Adam::step(Network& net, const Gradients& grad, std::size_t first) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = spans(net, first);
  const auto g = spans(grad, first);
  auto m = spans(m_, first);
  auto v = spans(v_, first);
  for (std::size_t k = 0; k < p.size(); ++k) {
    Eigen::Map<Eigen::ArrayXd> P(p[k].data, p[k].size), M(m[k].data, m[k].size), V(v[k].data, v[k].size);
    const Eigen::Map<const Eigen::ArrayXd> G(g[k].data, g[k].size);
    M = beta1_ * M + (1.0 - beta1_) * G;
    V = beta2_ * V + (1.0 - beta2_) * G.square();
    P -= lr_ * (M / c1) / ((V / c2).sqrt() + eps_);
  }
}

}  // namespace d2k::learner
