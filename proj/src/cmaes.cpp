#include "isca/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "isca/common.hpp"

namespace isca {

namespace {

using Matrix = std::vector<std::vector<double>>;

struct Eigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // vectors[i][k]: component i of eigenvector k
};

// Cyclic Jacobi rotations; plenty for the 2- and 3-dimensional weight
// spaces this project tunes.
Eigen jacobi_eigen(Matrix a) {
  const int n = static_cast<int>(a.size());
  Matrix v(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t =
            (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double apq = a[p][q];
        a[p][p] -= t * apq;
        a[q][q] += t * apq;
        a[p][q] = a[q][p] = 0.0;
        for (int r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a[r][p];
          const double arq = a[r][q];
          a[r][p] = a[p][r] = arp - s * (arq + tau * arp);
          a[r][q] = a[q][r] = arq + s * (arp - tau * arq);
        }
        for (int r = 0; r < n; ++r) {
          const double vrp = v[r][p];
          const double vrq = v[r][q];
          v[r][p] = vrp - s * (vrq + tau * vrp);
          v[r][q] = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a[x][x] < a[y][y]; });
  Eigen eigen;
  eigen.values.resize(n);
  eigen.vectors.assign(n, std::vector<double>(n, 0.0));
  for (int k = 0; k < n; ++k) {
    eigen.values[k] = a[order[k]][order[k]];
    for (int i = 0; i < n; ++i) eigen.vectors[i][k] = v[i][order[k]];
  }
  return eigen;
}

}  // namespace

CmaesResult cmaes_minimize(const Objective& objective, std::span<const double> init,
                           const CmaesOptions& options,
                           const GenerationCallback& on_generation) {
  const int n = static_cast<int>(init.size());
  if (n < 1) throw InputError("optimization needs at least one variable");
  for (double v : init) {
    if (!std::isfinite(v)) throw InputError("initial point must be finite");
  }
  if (!(options.sigma0 > 0.0) || !std::isfinite(options.sigma0)) {
    throw InputError("initial step size must be positive and finite");
  }
  if (options.generations < 0) throw InputError("generation count must be non-negative");
  if (options.lambda != 0 && options.lambda < 4) {
    throw InputError("population size must be at least 4");
  }

  const int lambda =
      options.lambda != 0 ? options.lambda
                          : 4 + static_cast<int>(std::floor(3.0 * std::log(double(n))));
  const int mu = lambda / 2;
  std::vector<double> weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(double(i + 1));
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= weight_sum;
  double mueff = 0.0;
  for (double w : weights) mueff += w * w;
  mueff = 1.0 / mueff;

  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double ds =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) /
                                            ((n + 2.0) * (n + 2.0) + mueff));
  const double chi_n =
      std::sqrt(double(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * double(n) * n));

  std::vector<double> mean(init.begin(), init.end());
  double sigma = options.sigma0;
  Matrix cov(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) cov[i][i] = 1.0;
  std::vector<double> ps(n, 0.0), pc(n, 0.0);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto evaluate = [&](std::span<const double> point) {
    const double value = objective(point);
    return std::isnan(value) ? std::numeric_limits<double>::infinity() : value;
  };

  CmaesResult result;
  result.best_point = mean;
  result.best_value = evaluate(mean);
  result.evaluations = 1;

  for (int gen = 1; gen <= options.generations; ++gen) {
    const Eigen eigen = jacobi_eigen(cov);
    std::vector<double> scale(n);
    for (int k = 0; k < n; ++k) {
      if (!(eigen.values[k] > 0.0) || !std::isfinite(eigen.values[k])) {
        throw std::logic_error("covariance matrix is no longer positive definite");
      }
      scale[k] = std::sqrt(eigen.values[k]);
    }
    auto basis_combine = [&](const std::vector<double>& coeffs) {
      std::vector<double> out(n, 0.0);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) out[i] += eigen.vectors[i][k] * coeffs[k];
      }
      return out;
    };

    std::vector<std::vector<double>> ys(lambda);
    std::vector<double> values(lambda);
    for (int k = 0; k < lambda; ++k) {
      std::vector<double> coeffs(n);
      for (int i = 0; i < n; ++i) coeffs[i] = scale[i] * gauss(rng);
      ys[k] = basis_combine(coeffs);
      std::vector<double> x(n);
      for (int i = 0; i < n; ++i) x[i] = mean[i] + sigma * ys[k][i];
      values[k] = evaluate(x);
      ++result.evaluations;
      if (values[k] < result.best_value) {
        result.best_value = values[k];
        result.best_point = x;
      }
    }

    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return values[a] < values[b]; });

    std::vector<double> yw(n, 0.0);
    for (int i = 0; i < mu; ++i) {
      for (int d = 0; d < n; ++d) yw[d] += weights[i] * ys[order[i]][d];
    }
    for (int d = 0; d < n; ++d) mean[d] += sigma * yw[d];

    // C^(-1/2) yw = B diag(1/scale) B^T yw
    std::vector<double> projected(n, 0.0);
    for (int k = 0; k < n; ++k) {
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += eigen.vectors[i][k] * yw[i];
      projected[k] = dot / scale[k];
    }
    const std::vector<double> whitened = basis_combine(projected);

    double ps_norm_sq = 0.0;
    for (int d = 0; d < n; ++d) {
      ps[d] = (1.0 - cs) * ps[d] + std::sqrt(cs * (2.0 - cs) * mueff) * whitened[d];
      ps_norm_sq += ps[d] * ps[d];
    }
    const double ps_norm = std::sqrt(ps_norm_sq);
    const double expected =
        std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen)) * (1.4 + 2.0 / (n + 1.0)) * chi_n;
    const double hs = ps_norm < expected ? 1.0 : 0.0;

    for (int d = 0; d < n; ++d) {
      pc[d] = (1.0 - cc) * pc[d] + hs * std::sqrt(cc * (2.0 - cc) * mueff) * yw[d];
    }
    const double hs_correction = (1.0 - hs) * cc * (2.0 - cc);
    const double keep = 1.0 - c1 - cmu + c1 * hs_correction;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double rank_mu = 0.0;
        for (int k = 0; k < mu; ++k) {
          rank_mu += weights[k] * ys[order[k]][i] * ys[order[k]][j];
        }
        cov[i][j] = keep * cov[i][j] + c1 * pc[i] * pc[j] + cmu * rank_mu;
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double symmetric = 0.5 * (cov[i][j] + cov[j][i]);
        cov[i][j] = cov[j][i] = symmetric;
      }
    }

    sigma *= std::exp((cs / ds) * (ps_norm / chi_n - 1.0));
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::logic_error("step size left the positive finite range");
    }

    if (on_generation) {
      on_generation({gen, result.best_value, result.best_point, sigma});
    }
  }
  return result;
}

}  // namespace isca
