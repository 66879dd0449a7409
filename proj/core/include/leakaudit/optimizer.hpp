#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "leakaudit/layers.hpp"

namespace leakaudit {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer over every parameter of a store. Moment buffers
// mirror the parameter shapes.
class Adam {
 public:
  Adam(const ParameterStore& store, AdamOptions options);

  // Applies one update from the gradients currently held by the parameters.
  void step();
  std::int64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }

 private:
  struct Moments {
    Var param;
    Matrix m;
    Matrix v;
  };
  std::map<std::string, Moments> moments_;
  AdamOptions options_;
  std::int64_t steps_ = 0;
};

}  // namespace leakaudit
