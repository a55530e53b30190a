#include "fleetsurv/survival/optim.hpp"

#include <cmath>

#include "fleetsurv/errors.hpp"

namespace fleetsurv::survival {

std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kAdamax: return "adamax";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& token) {
  if (token == "sgd") return OptimizerKind::kSgd;
  if (token == "adam") return OptimizerKind::kAdam;
  if (token == "adamax") return OptimizerKind::kAdamax;
  throw UsageError("unknown optimizer '" + token + "' (sgd|adam|adamax)");
}

std::string_view to_string(InitScheme s) {
  switch (s) {
    case InitScheme::kOrthogonal: return "orthogonal";
    case InitScheme::kGlorotUniform: return "glorot_uniform";
    case InitScheme::kZeros: return "zeros";
  }
  return "?";
}

InitScheme parse_init(const std::string& token) {
  if (token == "orthogonal") return InitScheme::kOrthogonal;
  if (token == "glorot_uniform" || token == "xav_uniform") return InitScheme::kGlorotUniform;
  if (token == "zeros") return InitScheme::kZeros;
  throw UsageError("unknown init '" + token + "' (orthogonal|glorot_uniform|zeros)");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, Eigen::Index size)
    : kind_(kind), lr_(learning_rate), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw UsageError("learning rate must be positive");
}

void Optimizer::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& g) {
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double eps = 1e-8;
  ++t_;
  switch (kind_) {
    case OptimizerKind::kSgd:
      params -= lr_ * g;
      break;
    case OptimizerKind::kAdam: {
      m_ = b1 * m_ + (1 - b1) * g;
      v_ = b2 * v_ + (1 - b2) * g.cwiseAbs2();
      const double c1 = 1 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1 - std::pow(b2, static_cast<double>(t_));
      params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
      break;
    }
    case OptimizerKind::kAdamax: {
      m_ = b1 * m_ + (1 - b1) * g;
      v_ = (b2 * v_).cwiseMax(g.cwiseAbs());
      const double c1 = 1 - std::pow(b1, static_cast<double>(t_));
      params.array() -= (lr_ / c1) * m_.array() / (v_.array() + eps);
      break;
    }
  }
}

void initialize(Eigen::Ref<Eigen::MatrixXd> w, InitScheme scheme, Rng& rng) {
  const auto rows = w.rows();
  const auto cols = w.cols();
  switch (scheme) {
    case InitScheme::kZeros:
      w.setZero();
      return;
    case InitScheme::kGlorotUniform: {
      const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = a * (2.0 * uniform01(rng) - 1.0);
      return;
    }
    case InitScheme::kOrthogonal: {
      // QR of a Gaussian matrix with the sign of diag(R) folded into Q.
      const bool tall = rows >= cols;
      const Eigen::Index r = tall ? rows : cols;
      const Eigen::Index c = tall ? cols : rows;
      Eigen::MatrixXd a(r, c);
      for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) a(i, j) = standard_normal(rng);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
      const Eigen::MatrixXd rr = qr.matrixQR();
      for (Eigen::Index j = 0; j < c; ++j) {
        if (rr(j, j) < 0) q.col(j) *= -1.0;
      }
      if (tall) w = q;
      else w = q.transpose();
      return;
    }
  }
}

}  // namespace fleetsurv::survival
