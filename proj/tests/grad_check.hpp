#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "protoed/model.hpp"

namespace protoed::testing {

struct TensorGradError {
  std::string tensor;
  double rel_error = 0.0;  // |analytic - numeric| / max(|numeric|, |analytic|, floor)
};

// Central differences of the full loss for every entry of every model tensor.
inline std::vector<TensorGradError> model_grad_errors(Model& model, const StepBatch& batch, const CLQueue* queue,
                                                      double h = 1e-6, double floor = 1e-6) {
  double loss = 0.0;
  const std::vector<Vec> analytic = loss_gradients(model, batch, queue, &loss);
  std::vector<TensorGradError> out;
  const auto params = model.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor* t = params[k];
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double keep = t->value[i];
      t->value[i] = keep + h;
      const double fp = loss_value(model, batch, queue);
      t->value[i] = keep - h;
      const double fm = loss_value(model, batch, queue);
      t->value[i] = keep;
      const double num = (fp - fm) / (2 * h);
      diff += (analytic[k][i] - num) * (analytic[k][i] - num);
      na += analytic[k][i] * analytic[k][i];
      nn += num * num;
    }
    const double denom = std::max({std::sqrt(nn), std::sqrt(na), floor});
    out.push_back({t->name, std::sqrt(diff) / denom});
  }
  return out;
}

}  // namespace protoed::testing
