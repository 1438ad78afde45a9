// Central-difference verification of tape gradients.

#ifndef GRAPHFIT_AD_GRADCHECK_HPP
#define GRAPHFIT_AD_GRADCHECK_HPP

#include <functional>
#include <string>
#include <vector>

#include "graphfit/ad/tape.hpp"

namespace graphfit::ad {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool pass = true;

  /// Name of the worst-offending parameter (empty when all pass).
  std::string worst() const {
    std::string name;
    double worst = -1.0;
    for (const auto& e : entries)
      if (!e.pass && e.max_rel_error > worst) {
        worst = e.max_rel_error;
        name = e.name;
      }
    return name;
  }
};

/// Compares tape gradients of a scalar function against central finite
/// differences with step h, per parameter component. The function must be
/// deterministic; it is re-evaluated on a fresh tape for every probe.
/// Relative error uses max(|analytic|, |numeric|, guard) as denominator
/// so near-zero gradients are judged on an absolute scale of tol*guard.
GradCheckReport gradient_check(const std::function<Tape::Id(Tape&)>& build_loss,
                               const std::vector<Parameter*>& params,
                               double tolerance, double h = 1e-6,
                               double guard = 1e-4);

}  // namespace graphfit::ad

#endif  // GRAPHFIT_AD_GRADCHECK_HPP
