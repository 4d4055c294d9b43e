#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "tcs/rng.hpp"
#include "tcs/tensor.hpp"

namespace tcs {

struct GradCheckOptions {
  double h = 1e-5;
  // Coordinates probed per tensor; <=0 means all of them.
  int coords_per_tensor = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  // Set when the central second difference at any probed coordinate is far
  // too large for a smooth function, i.e. a probe straddles a kink.
  bool kink_suspected = false;
};

// Compares analytic gradients against central differences
// (f(x+h)-f(x-h))/(2h). `eval(true)` must return the loss and leave analytic
// gradients in each parameter's grad buffer; `eval(false)` must return the
// loss without touching gradients. Relative error per coordinate is
// |a-n| / max(1e-8, |a|+|n|).
inline GradCheckReport grad_check(const std::function<double(bool)>& eval,
                                  const std::vector<Tensor*>& params,
                                  const GradCheckOptions& opt = {}) {
  check(opt.h > 0.0, "grad_check: h must be positive");
  const double base = eval(true);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss at base point");
  std::vector<std::vector<double>> analytic(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    check(params[p]->grad.size() == params[p]->size(), "grad_check: missing analytic gradient");
    analytic[p] = params[p]->grad;
  }

  GradCheckReport report;
  Rng rng(opt.sample_seed);
  bool first_probe = true;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p];
    std::vector<std::size_t> coords;
    if (opt.coords_per_tensor <= 0 ||
        static_cast<std::size_t>(opt.coords_per_tensor) >= theta.size()) {
      coords.resize(theta.size());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      for (int k = 0; k < opt.coords_per_tensor; ++k)
        coords.push_back(static_cast<std::size_t>(rng.uniform_int(theta.size())));
    }
    for (std::size_t i : coords) {
      const double saved = theta.values[i];
      theta.values[i] = saved + opt.h;
      const double fp = eval(false);
      theta.values[i] = saved - opt.h;
      const double fm = eval(false);
      theta.values[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("grad_check: non-finite loss at probe point");
      const double numeric = (fp - fm) / (2.0 * opt.h);
      const double a = analytic[p][i];
      const double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      const double second = std::fabs(fp + fm - 2.0 * base);
      report.kink_suspected |= second > 1e3 * opt.h * opt.h * std::max(1.0, std::fabs(base));
      if (first_probe || rel > report.max_rel_error) {
        first_probe = false;
        report.max_rel_error = rel;
        report.worst_param = p;
        report.worst_coord = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace tcs
