#include "graphfit/ad/gradcheck.hpp"

#include <cmath>

namespace graphfit::ad {

GradCheckReport gradient_check(const std::function<Tape::Id(Tape&)>& build_loss,
                               const std::vector<Parameter*>& params,
                               double tolerance, double h, double guard) {
  GradCheckReport report;
  report.tolerance = tolerance;

  // One analytic pass.
  for (Parameter* p : params) p->zero_grad();
  std::vector<Tensor> analytic;
  {
    Tape tape;
    tape.backward(build_loss(tape));
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);
  }

  auto eval = [&]() {
    Tape tape;
    return tape.value(build_loss(tape)).item();
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    GradCheckEntry entry;
    entry.name = p->name;
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double f_plus = eval();
      p->value[i] = saved - h;
      const double f_minus = eval();
      p->value[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double exact = analytic[pi][i];
      const double denom =
          std::max({std::abs(exact), std::abs(numeric), guard});
      entry.max_rel_error =
          std::max(entry.max_rel_error, std::abs(exact - numeric) / denom);
    }
    entry.pass = entry.max_rel_error <= tolerance;
    if (!entry.pass) report.pass = false;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace graphfit::ad
