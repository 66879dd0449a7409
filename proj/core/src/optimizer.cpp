#include "leakaudit/optimizer.hpp"

#include <cmath>

namespace leakaudit {

Adam::Adam(const ParameterStore& store, AdamOptions options) : options_(options) {
  for (const auto& [name, p] : store.all()) {
    moments_.emplace(name, Moments{p, Matrix::Zero(p.rows(), p.cols()),
                                   Matrix::Zero(p.rows(), p.cols())});
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  const double step_size = options_.learning_rate / correction1;
  for (auto& [name, mom] : moments_) {
    const Matrix& g = mom.param.grad();
    mom.m = options_.beta1 * mom.m + (1.0 - options_.beta1) * g;
    mom.v = options_.beta2 * mom.v + (1.0 - options_.beta2) * g.cwiseAbs2();
    mom.param.mutable_value().array() -=
        step_size * mom.m.array() / ((mom.v.array() / correction2).sqrt() + options_.epsilon);
  }
}

}  // namespace leakaudit
