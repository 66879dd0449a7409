#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "leakaudit/autograd.hpp"
#include "leakaudit/datamodel.hpp"

namespace leakaudit::testing {

using ag::Matrix;
using ag::Var;

// Norm-wise relative error between two gradient tensors.
inline double relative_error(const Matrix& analytic, const Matrix& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-10});
  return (analytic - numeric).norm() / scale;
}

struct GradReport {
  std::string name;
  double rel_error = 0.0;
};

// Central differences, one coordinate at a time, against the gradient from a
// single backward pass. `loss` must rebuild the graph from the current
// parameter values on every call.
inline std::vector<GradReport> check_gradients(const std::map<std::string, Var>& params,
                                               const std::function<Var()>& loss,
                                               double h = 1e-5) {
  for (const auto& [name, p] : params) Var(p).zero_grad();
  loss().backward();
  std::vector<GradReport> out;
  for (const auto& [name, p] : params) {
    Var handle = p;
    const Matrix analytic = handle.grad();
    Matrix numeric = Matrix::Zero(handle.rows(), handle.cols());
    ag::NoGradGuard guard;
    for (Eigen::Index i = 0; i < handle.value().size(); ++i) {
      double& x = handle.mutable_value().data()[i];
      const double saved = x;
      x = saved + h;
      const double up = loss().value()(0, 0);
      x = saved - h;
      const double down = loss().value()(0, 0);
      x = saved;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    out.push_back({name, relative_error(analytic, numeric)});
  }
  return out;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Random examples over `num_items` items with the given shapes.
inline std::vector<AttackExample> random_examples(int count, int num_items, int M, int N,
                                                  std::mt19937_64& rng, int users = 0) {
  std::uniform_int_distribution<int> item(0, num_items - 1);
  std::vector<AttackExample> out(static_cast<std::size_t>(count));
  for (int e = 0; e < count; ++e) {
    auto& ex = out[static_cast<std::size_t>(e)];
    ex.user = "u" + std::to_string(users > 0 ? e % users : e);
    for (int m = 0; m < M; ++m) ex.behavior.items.push_back(item(rng));
    for (int n = 0; n < N; ++n) ex.exposure.items.push_back(item(rng));
    ex.behavior.user = ex.exposure.user = ex.user;
    ex.exposure.timestamp = e;
  }
  return out;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("leakaudit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace leakaudit::testing
