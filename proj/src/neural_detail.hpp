#pragma once

#include "noshow/neural.hpp"

namespace noshow::neural::detail {

inline Vector row_weights(const Vector& labels, const ClassWeights& weights) {
  return labels.unaryExpr([&](double y) { return y > 0.5 ? weights.w_no_show : weights.w_show; });
}

// Buffers reused across passes; large temporaries otherwise dominate.
struct Workspace {
  Matrix post;  // relu(pre)
  Matrix dh;
  Vector out;
  Vector delta;
};

// Mean weighted cross-entropy of the batch X (dense or sparse). Fills the
// parameter gradient and, when asked, the gradient with respect to X.
template <typename Design>
double mlp_pass(const MlpModel& m, const Design& X, const Vector& labels, const Vector& w,
                MlpGradient* grad, Matrix* input_grad, Workspace& ws) {
  const double n = static_cast<double>(X.rows());
  ws.post.noalias() = X * m.W1.transpose();
  ws.post.rowwise() += m.b1.transpose();
  ws.post = ws.post.cwiseMax(0.0);
  ws.out.noalias() = ws.post * m.W2;
  ws.out.array() += m.b2;
  ws.delta.resize(ws.out.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < ws.out.size(); ++i) {
    const double z = ws.out[i];
    loss += w[i] * (softplus(z) - labels[i] * z);
    ws.delta[i] = w[i] * (sigmoid(z) - labels[i]) / n;
  }
  loss /= n;
  if (grad == nullptr && input_grad == nullptr) return loss;

  // relu'(pre) = 1 exactly where relu(pre) > 0
  ws.dh.noalias() = ws.delta * m.W2.transpose();
  ws.dh = (ws.post.array() > 0.0).select(ws.dh, 0.0);
  if (grad != nullptr) {
    grad->W2.noalias() = ws.post.transpose() * ws.delta;
    grad->b2 = ws.delta.sum();
    grad->b1.noalias() = ws.dh.colwise().sum().transpose();
    grad->W1.noalias() = ws.dh.transpose() * X;
  }
  if (input_grad != nullptr) input_grad->noalias() = ws.dh * m.W1;
  return loss;
}

template <typename Design>
double mlp_pass(const MlpModel& m, const Design& X, const Vector& labels, const Vector& w,
                MlpGradient* grad, Matrix* input_grad) {
  Workspace ws;
  return mlp_pass(m, X, labels, w, grad, input_grad, ws);
}

}  // namespace noshow::neural::detail
