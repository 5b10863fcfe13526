#pragma once

/**
 * Linear-sigmoid state-value head on pooled ambient vectors.
 *
 * f(h) = sigmoid(w . h + b), trained by MSE against shaped potentials with
 * plain full-batch gradient descent. Heads are cheap value objects; training
 * steps are pure and return a new head.
 */

#include "errors.hpp"
#include "geometry.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace hyptree {

struct ValueHead {
  Vec weights;
  double bias = 0.0;

  /// Zero-initialized head of dimension h: predicts 0.5 everywhere.
  static ValueHead zeros(std::size_t h) { return ValueHead{Vec(h, 0.0), 0.0}; }

  std::size_t dim() const { return weights.size(); }
};

struct ValueBatch {
  std::vector<Vec> inputs;
  std::vector<double> targets;  // in [0, 1]

  std::size_t size() const { return inputs.size(); }
};

struct ValueGrad {
  Vec grad_w;
  double grad_b = 0.0;
};

inline double sigmoid(double z) {
  // Split on sign to avoid overflow in exp.
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// sigmoid(w . h + b), strictly inside (0, 1) for finite parameters.
inline double predict(const ValueHead& head, const Vec& h) {
  check_same_dim(head.dim(), h.size(), "predict");
  double z = head.bias;
  for (std::size_t j = 0; j < h.size(); ++j) z += head.weights[j] * h[j];
  return sigmoid(z);
}

/// Mean squared error of predictions against targets.
inline double value_loss(const ValueHead& head, const ValueBatch& batch) {
  if (batch.size() == 0) throw EmptyBatch("value_loss: empty batch");
  if (batch.inputs.size() != batch.targets.size()) {
    throw DimensionMismatch("value_loss: " + std::to_string(batch.inputs.size()) +
                            " inputs vs " + std::to_string(batch.targets.size()) + " targets");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double r = predict(head, batch.inputs[i]) - batch.targets[i];
    total += r * r;
  }
  return total / static_cast<double>(batch.size());
}

/// Analytic gradient of value_loss: mean of 2 (f - V) f (1 - f) h per example.
inline ValueGrad value_grad(const ValueHead& head, const ValueBatch& batch) {
  if (batch.size() == 0) throw EmptyBatch("value_grad: empty batch");
  ValueGrad grad{Vec(head.dim(), 0.0), 0.0};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double f = predict(head, batch.inputs[i]);
    const double coeff = 2.0 * (f - batch.targets[i]) * f * (1.0 - f);
    for (std::size_t j = 0; j < head.dim(); ++j) {
      grad.grad_w[j] += coeff * batch.inputs[i][j];
    }
    grad.grad_b += coeff;
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad.grad_w) g *= inv_n;
  grad.grad_b *= inv_n;
  return grad;
}

/// One descent step: parameters decremented by lr * grad.
inline ValueHead sgd_step(ValueHead head, const ValueGrad& grad, double lr) {
  check_same_dim(head.dim(), grad.grad_w.size(), "sgd_step");
  for (std::size_t j = 0; j < head.dim(); ++j) head.weights[j] -= lr * grad.grad_w[j];
  head.bias -= lr * grad.grad_b;
  return head;
}

/// Full-batch gradient descent for a fixed number of steps.
inline ValueHead train_value_head(ValueHead head, const ValueBatch& batch, double lr,
                                  int steps) {
  for (int s = 0; s < steps; ++s) {
    const ValueGrad grad = value_grad(head, batch);
    head = sgd_step(std::move(head), grad, lr);
  }
  return head;
}

/// Joint objective L = L_policy + lambda * L_value.
inline double joint_loss(double policy_loss, double value_loss, double lambda) {
  return policy_loss + lambda * value_loss;
}

}  // namespace hyptree
