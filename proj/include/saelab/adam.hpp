#pragma once

#include "saelab/common.hpp"

namespace saelab {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Plain Adam with bias correction. One instance per parameter tensor.
class Adam {
 public:
  Adam(Eigen::Index rows, Eigen::Index cols, const AdamConfig& cfg)
      : cfg_(cfg), m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)) {}

  void step(Eigen::Ref<Matrix> param, const Eigen::Ref<const Matrix>& grad) {
    if (param.rows() != m_.rows() || param.cols() != m_.cols() ||
        grad.rows() != m_.rows() || grad.cols() != m_.cols()) {
      throw DimensionMismatch("adam step shape does not match optimizer state");
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_.array() = cfg_.beta2 * v_.array() + (1.0 - cfg_.beta2) * grad.array().square();
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    param.array() -=
        cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
  }

 private:
  AdamConfig cfg_;
  Matrix m_;
  Matrix v_;
  long t_ = 0;
};

}  // namespace saelab
