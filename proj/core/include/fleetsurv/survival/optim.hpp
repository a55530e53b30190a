#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "fleetsurv/rng.hpp"

namespace fleetsurv::survival {

enum class OptimizerKind { kSgd, kAdam, kAdamax };
std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& token);

enum class InitScheme { kOrthogonal, kGlorotUniform, kZeros };
std::string_view to_string(InitScheme s);
InitScheme parse_init(const std::string& token);

/// First-order update rule over one flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, Eigen::Index size);
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& gradient);

 private:
  OptimizerKind kind_;
  double lr_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

/// Fills a fan_out x fan_in weight matrix.
void initialize(Eigen::Ref<Eigen::MatrixXd> w, InitScheme scheme, Rng& rng);

}  // namespace fleetsurv::survival
