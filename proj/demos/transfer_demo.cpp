// Builds the designed schedule for a 1D Gaussian with variance 0.01, moves
// the linear-schedule drift onto it, and compares the averaged squared
// Lipschitz constant and few-step RK4 accuracy of both schedules.

#include "interp_lab/interp_lab.hpp"

#include <iostream>

int main() {
  using namespace ilab;
  const double lambda = 0.01;
  const auto target = GaussianTarget::diagonal({lambda});
  const auto linear = Schedule::linear();
  const auto designed = Schedule::designed_gaussian(lambda);
  const auto ref = gaussian_drift(linear, target);
  const auto moved = transfer_drift(ref, designed);

  for (const auto* s : {&linear, &designed}) {
    const auto drift = s->is_linear() ? ref : moved;
    const auto lip = avg_lip2(drift, *s, Target{target}, 128, 64, 1);
    IntegratorConfig cfg;
    cfg.steps = 5;
    const auto x0 = initial_noise(*s, Target{target}, cfg.t_min, 20000, 1);
    const auto x1 = integrate_ode(drift, x0, cfg);
    double var = 0.0;
    for (Eigen::Index i = 0; i < x1.size(); ++i) var += x1.states(i, 0) * x1.states(i, 0);
    var /= static_cast<double>(x1.size());
    std::cout << s->name() << "  A2=" << lip.a2 << "  var after 5 RK4 steps=" << var << " (target " << lambda
              << ")\n";
  }
}
