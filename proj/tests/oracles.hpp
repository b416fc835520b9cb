#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library routine they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

struct LinearFit {
  std::vector<double> beta;  // intercept first
  double rss = 0.0;
};

// Least squares with intercept from the normal equations, solved by
// Gauss-Jordan elimination with partial pivoting in long double.
inline LinearFit normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<int>& cols) {
  const std::size_t p = cols.size() + 1;
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
  auto col = [&](std::size_t i, std::size_t r) -> long double {
    return i == 0 ? 1.0L : static_cast<long double>(x(static_cast<Eigen::Index>(r), cols[i - 1]));
  };
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) a[i][j] += col(i, r) * col(j, r);
      a[i][p] += col(i, r) * static_cast<long double>(y(static_cast<Eigen::Index>(r)));
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
    }
  }
  LinearFit out;
  for (std::size_t i = 0; i < p; ++i) out.beta.push_back(static_cast<double>(a[i][p] / a[i][i]));
  long double rss = 0.0L;
  for (std::size_t r = 0; r < n; ++r) {
    long double fit = 0.0L;
    for (std::size_t i = 0; i < p; ++i) fit += col(i, r) * static_cast<long double>(out.beta[i]);
    const long double e = static_cast<long double>(y(static_cast<Eigen::Index>(r))) - fit;
    rss += e * e;
  }
  out.rss = static_cast<double>(rss);
  return out;
}

struct Subset {
  std::vector<int> columns;
  double rss = std::numeric_limits<double>::infinity();
};

// Best subset of every size 1..max_size by enumerating all 2^p - 1 column sets.
inline std::vector<Subset> exhaustive_best_subsets(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                   std::size_t max_size) {
  const auto p = static_cast<int>(x.cols());
  std::vector<Subset> best(max_size);
  for (std::uint32_t mask = 1; mask < (1u << p); ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < p; ++j) {
      if (mask & (1u << j)) cols.push_back(j);
    }
    if (cols.size() > max_size) continue;
    const double rss = normal_equations(x, y, cols).rss;
    auto& slot = best[cols.size() - 1];
    if (rss < slot.rss) slot = {cols, rss};
  }
  return best;
}

// Two-group split of 1-D data trying every cut of the sorted values; returns the
// size of the lower group.
inline std::size_t brute_force_split(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto wss = [](const std::vector<double>& g) {
    if (g.empty()) return 0.0;
    const double m = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    double s = 0.0;
    for (double x : g) s += (x - m) * (x - m);
    return s;
  };
  std::size_t cut = 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 1; c < v.size(); ++c) {
    const double cost = wss({v.begin(), v.begin() + static_cast<std::ptrdiff_t>(c)}) +
                        wss({v.begin() + static_cast<std::ptrdiff_t>(c), v.end()});
    if (cost < best) {
      best = cost;
      cut = c;
    }
  }
  return cut;
}

// Vote value from the brute-force split: the bigger group's mean, with population
// ties go to the lower mean (two equal groups are equidistant from the overall mean).
inline double brute_force_vote(std::vector<double> v) {
  if (v.size() == 1) return v[0];
  std::sort(v.begin(), v.end());
  const std::size_t cut = brute_force_split(v);
  const double lo = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cut), 0.0) / static_cast<double>(cut);
  const double hi = std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(cut), v.end(), 0.0) /
                    static_cast<double>(v.size() - cut);
  const std::size_t n_lo = cut;
  const std::size_t n_hi = v.size() - cut;
  if (n_lo != n_hi) return n_lo > n_hi ? lo : hi;
  // equal halves sit symmetrically about the overall mean
  return lo;
}

// Upper tail of Student's t by adaptive Gauss-Kronrod integration of the density.
inline double t_upper_tail(double t, double dof) {
  const double logc = std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0) - 0.5 * std::log(dof * M_PI);
  auto density = [&](double x) { return std::exp(logc - (dof + 1.0) / 2.0 * std::log1p(x * x / dof)); };
  double error = 0.0;
  if (t >= 0.0) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        density, t, std::numeric_limits<double>::infinity(), 20, 1e-15, &error);
  }
  return 0.5 + boost::math::quadrature::gauss_kronrod<double, 61>::integrate(density, t, 0.0, 20, 1e-15, &error);
}

// Correlation test p-value through the quadrature route.
inline double correlation_pvalue(double r, double dof) { return t_upper_tail(r * std::sqrt(dof / (1.0 - r * r)), dof); }

// Sample Pearson correlation in long double.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<long double>(a.size());
  long double ma = 0.0L;
  long double mb = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0.0L;
  long double saa = 0.0L;
  long double sbb = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

// Planted intermittent-model ensemble: every model tracks the truth with noise,
// and on each season each model independently fails (+shift) with probability
// `fail_rate`. Returns per-season predictions [season][model] and the truth.
struct PlantedEnsemble {
  std::vector<std::vector<double>> predictions;
  std::vector<double> truth;
};

inline PlantedEnsemble planted_intermittent(std::uint64_t seed, std::size_t seasons = 8, std::size_t models = 200,
                                            double fail_rate = 0.4, double shift = 5.0, double noise = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::bernoulli_distribution fails(fail_rate);
  PlantedEnsemble out;
  for (std::size_t t = 0; t < seasons; ++t) {
    const double g = n01(rng);
    out.truth.push_back(g);
    std::vector<double> row;
    for (std::size_t m = 0; m < models; ++m) row.push_back(g + noise * n01(rng) + (fails(rng) ? shift : 0.0));
    out.predictions.push_back(std::move(row));
  }
  return out;
}

}  // namespace oracle
