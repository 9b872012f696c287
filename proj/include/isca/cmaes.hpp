#ifndef ISCA_CMAES_HPP
#define ISCA_CMAES_HPP

#include <functional>
#include <span>
#include <vector>

namespace isca {

struct CmaesOptions {
  int lambda = 0;  // population size; 0 picks the default 4 + floor(3 ln n)
  int generations = 50;
  unsigned long long seed = 1;
  double sigma0 = 0.3;
};

// Reported after each generation; best_* is the best-ever solution.
struct GenerationInfo {
  int generation = 0;
  double best_value = 0.0;
  std::vector<double> best_point;
  double sigma = 0.0;
};

struct CmaesResult {
  std::vector<double> best_point;
  double best_value = 0.0;
  long long evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;
using GenerationCallback = std::function<void(const GenerationInfo&)>;

// Standard (mu/mu_w, lambda) covariance-matrix-adaptation evolution strategy
// with rank-based recombination weights, cumulative step-size control, and
// rank-one plus rank-mu covariance updates. Minimizes the objective;
// deterministic for a fixed seed. The initial point is evaluated too, so the
// result is never worse than it; generations = 0 returns it unchanged.
CmaesResult cmaes_minimize(const Objective& objective, std::span<const double> init,
                           const CmaesOptions& options,
                           const GenerationCallback& on_generation = nullptr);

}  // namespace isca

#endif
