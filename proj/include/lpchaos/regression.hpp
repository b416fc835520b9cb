#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpchaos/error.hpp"

namespace lpchaos {

// Relative pivot threshold for declaring a column linearly dependent.
inline constexpr double kRankTolerance = 1e-10;

struct OlsFit {
  Eigen::VectorXd coefficients;  // one per input column; zero for dropped columns
  double intercept = 0.0;
  double rss = 0.0;
  std::vector<int> kept;     // independent columns used in the fit
  std::vector<int> dropped;  // linearly dependent (or constant) columns
};

// Least squares with intercept via column-pivoted Householder QR of the centered design.
[[nodiscard]] inline OlsFit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n == 0) throw ValidationError("ols_fit: zero rows");
  if (y.size() != n) throw ValidationError("ols_fit: response length mismatch");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("ols_fit: non-finite input");

  const Eigen::RowVectorXd xbar = x.colwise().mean();
  const double ybar = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - xbar;
  const Eigen::VectorXd yc = y.array() - ybar;

  OlsFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(p);
  if (p > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
    qr.setThreshold(kRankTolerance);
    const Eigen::Index rank = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = 0; i < p; ++i) {
      (i < rank ? fit.kept : fit.dropped).push_back(perm(i));
    }
    std::sort(fit.kept.begin(), fit.kept.end());
    std::sort(fit.dropped.begin(), fit.dropped.end());
    if (rank > 0) {
      if (n < rank + 1) throw ValidationError("ols_fit: need more rows than columns");
      Eigen::MatrixXd xk(n, rank);
      for (Eigen::Index j = 0; j < rank; ++j) xk.col(j) = xc.col(fit.kept[static_cast<std::size_t>(j)]);
      const Eigen::VectorXd beta = xk.colPivHouseholderQr().solve(yc);
      for (Eigen::Index j = 0; j < rank; ++j) fit.coefficients(fit.kept[static_cast<std::size_t>(j)]) = beta(j);
    }
  }
  const Eigen::VectorXd resid = yc - xc * fit.coefficients;
  fit.rss = resid.squaredNorm();
  fit.intercept = ybar - xbar.dot(fit.coefficients);
  return fit;
}

// Residual variance of the full model, rss_full / (n - p_full); p_full counts the intercept.
[[nodiscard]] inline double full_model_variance(double rss_full, std::size_t n, std::size_t p_full) {
  if (n <= p_full) throw ValidationError("cannot estimate residual variance: rows <= parameters");
  return rss_full / static_cast<double>(n - p_full);
}

// Mallows Cp = rss_p / sigma2_full - n + 2p.
[[nodiscard]] inline double mallows_cp(double rss_p, double sigma2_full, std::size_t n, std::size_t p) {
  if (!(sigma2_full > 0.0)) throw ValidationError("mallows_cp: residual variance must be positive");
  return rss_p / sigma2_full - static_cast<double>(n) + 2.0 * static_cast<double>(p);
}

// Fitted model over a subset of delay-map columns.
struct SubsetModel {
  std::vector<int> columns;          // ascending indices into the delay map
  std::vector<double> coefficients;  // aligned with `columns`
  double intercept = 0.0;
  double rss = 0.0;
  double cp = 0.0;
  std::size_t n_rows = 0;
  double fitted_sd = 0.0;  // sample sd of the in-sample fitted values

  // `row` holds every delay-map column; only `columns` are read.
  [[nodiscard]] double predict(std::span<const double> row) const {
    double v = intercept;
    for (std::size_t j = 0; j < columns.size(); ++j) v += coefficients[j] * row[static_cast<std::size_t>(columns[j])];
    return v;
  }
};

struct SubsetCandidate {
  std::vector<int> columns;
  double rss = std::numeric_limits<double>::infinity();
};

struct BestSubsets {
  std::vector<SubsetCandidate> by_size;  // by_size[k - 1] is the best k-column subset
  std::vector<int> dropped;              // columns excluded before the search
  std::size_t n_rows = 0;
  std::size_t nodes_visited = 0;
};

namespace detail {

// RSS of the centered regression on `cols` from the centered Gram matrix, by an
// in-place Cholesky factorization (no allocation per call).
class GramRss {
 public:
  GramRss(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double yty) : g_(gram), b_(xty), yy_(yty) {
    l_.resize(static_cast<std::size_t>(gram.rows() * gram.rows()));
    z_.resize(static_cast<std::size_t>(gram.rows()));
  }

  [[nodiscard]] double rss(std::span<const int> cols) {
    const std::size_t k = cols.size();
    if (k == 0) return yy_;
    double explained = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = g_(cols[i], cols[j]);
        for (std::size_t m = 0; m < j; ++m) s -= l_[i * k + m] * l_[j * k + m];
        if (i == j) {
          // dependent columns were removed up front; guard against round-off anyway
          l_[i * k + i] = std::sqrt(std::max(s, 1e-300));
        } else {
          l_[i * k + j] = s / l_[j * k + j];
        }
      }
      double zi = b_(cols[i]);
      for (std::size_t m = 0; m < i; ++m) zi -= l_[i * k + m] * z_[m];
      z_[i] = zi / l_[i * k + i];
      explained += z_[i] * z_[i];
    }
    return std::max(0.0, yy_ - explained);
  }

 private:
  const Eigen::MatrixXd& g_;
  const Eigen::VectorXd& b_;
  double yy_;
  std::vector<double> l_;
  std::vector<double> z_;
};

struct LeapsSearch {
  GramRss& rss;
  std::vector<int> columns;  // searchable columns, ascending
  std::size_t max_size;
  std::vector<SubsetCandidate>& best;
  std::size_t nodes = 0;
  std::vector<int> current{};
  std::vector<int> bound_set{};

  // Prune only when the bound strictly exceeds the incumbent by a relative margin,
  // so floating-point noise can never discard the true optimum.
  static constexpr double kSlack = 1e-12;

  void visit(std::size_t next) {
    ++nodes;
    if (!current.empty()) {
      const double r = rss.rss(current);
      auto& slot = best[current.size() - 1];
      if (r < slot.rss) slot = {current, r};
    }
    if (current.size() >= max_size || next >= columns.size()) return;

    // Bound: every descendant is a subset of current + columns[next..], whose RSS
    // is a lower bound on all of them (adding columns never increases RSS).
    bound_set = current;
    bound_set.insert(bound_set.end(), columns.begin() + static_cast<std::ptrdiff_t>(next), columns.end());
    std::sort(bound_set.begin(), bound_set.end());
    const double bound = rss.rss(bound_set);
    const std::size_t reachable = std::min(max_size, current.size() + (columns.size() - next));
    bool promising = false;
    for (std::size_t k = current.size() + 1; k <= reachable; ++k) {
      const double incumbent = best[k - 1].rss;
      if (!(bound > incumbent + kSlack * std::max(1.0, std::abs(incumbent)))) {
        promising = true;
        break;
      }
    }
    if (!promising) return;
    for (std::size_t j = next; j < columns.size(); ++j) {
      current.push_back(columns[j]);
      visit(j + 1);
      current.pop_back();
    }
  }
};

}  // namespace detail

// Columns that are constant or linearly dependent on earlier-pivoted columns.
[[nodiscard]] inline std::vector<int> dependent_columns(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) return {};
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
  qr.setThreshold(kRankTolerance);
  std::vector<int> dropped;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = qr.rank(); i < x.cols(); ++i) dropped.push_back(perm(i));
  std::sort(dropped.begin(), dropped.end());
  return dropped;
}

// Exact best subset of each size 1..max_size by branch and bound on RSS.
// Ties within a size resolve to the lexicographically smallest column set,
// because the search visits same-size subsets in lexicographic order.
[[nodiscard]] inline BestSubsets best_subsets(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t max_size) {
  const auto p = static_cast<std::size_t>(x.cols());
  const auto n = static_cast<std::size_t>(x.rows());
  if (p > 30) throw ValidationError("best_subsets: more than 30 columns");
  if (p == 0) throw ValidationError("best_subsets: no columns");
  if (n <= p) throw ValidationError("best_subsets: need more rows than columns");
  if (y.size() != x.rows()) throw ValidationError("best_subsets: response length mismatch");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("best_subsets: non-finite input");

  BestSubsets out;
  out.n_rows = n;
  out.dropped = dependent_columns(x);
  std::vector<int> usable;
  for (int j = 0; j < static_cast<int>(p); ++j) {
    if (!std::binary_search(out.dropped.begin(), out.dropped.end(), j)) usable.push_back(j);
  }
  if (usable.empty()) throw ValidationError("best_subsets: every column is constant or dependent");
  max_size = std::min(max_size, usable.size());
  if (max_size == 0) throw ValidationError("best_subsets: max_size must be at least 1");

  // Unit-norm centered columns keep the Gram matrix well conditioned; RSS is unchanged.
  Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  for (Eigen::Index j = 0; j < xc.cols(); ++j) {
    const double norm = xc.col(j).norm();
    if (norm > 0.0) xc.col(j) /= norm;
  }
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::VectorXd xty = xc.transpose() * yc;
  detail::GramRss rss(gram, xty, yc.squaredNorm());

  out.by_size.assign(max_size, SubsetCandidate{});
  detail::LeapsSearch search{rss, usable, max_size, out.by_size};
  search.visit(0);
  out.nodes_visited = search.nodes;
  return out;
}

struct ModelSelection {
  SubsetModel model;
  BestSubsets subsets;
  std::vector<double> cp_by_size;
};

// Fits `columns` of x and packages the result as a SubsetModel (cp left at 0).
[[nodiscard]] inline SubsetModel fit_subset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<int> columns) {
  std::sort(columns.begin(), columns.end());
  Eigen::MatrixXd xs(x.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) xs.col(static_cast<Eigen::Index>(j)) = x.col(columns[j]);
  const OlsFit fit = ols_fit(xs, y);
  SubsetModel m;
  m.columns = std::move(columns);
  m.coefficients.assign(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
  m.intercept = fit.intercept;
  m.rss = fit.rss;
  m.n_rows = static_cast<std::size_t>(x.rows());
  const double tss = (y.array() - y.mean()).square().sum();
  m.fitted_sd = m.n_rows > 1 ? std::sqrt(std::max(0.0, tss - fit.rss) / static_cast<double>(m.n_rows - 1)) : 0.0;
  return m;
}

// Per-size best subsets, then the minimum-Cp winner; ties go to fewer columns.
[[nodiscard]] inline ModelSelection select_model(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                 std::size_t max_size = 8) {
  ModelSelection sel;
  const auto n = static_cast<std::size_t>(x.rows());
  if (x.cols() == 1) {
    if (n <= 2) throw ValidationError("select_model: need more rows than parameters");
    if (!dependent_columns(x).empty()) throw ValidationError("select_model: the only column is constant");
    sel.model = fit_subset(x, y, {0});
    const double sigma2 = full_model_variance(sel.model.rss, n, 2);
    sel.model.cp = sigma2 > 0.0 ? mallows_cp(sel.model.rss, sigma2, n, 2) : 2.0;
    sel.cp_by_size = {sel.model.cp};
    sel.subsets.by_size = {{{0}, sel.model.rss}};
    sel.subsets.n_rows = n;
    return sel;
  }

  sel.subsets = best_subsets(x, y, std::max<std::size_t>(max_size, 1));
  std::vector<int> usable;
  for (int j = 0; j < static_cast<int>(x.cols()); ++j) {
    if (!std::binary_search(sel.subsets.dropped.begin(), sel.subsets.dropped.end(), j)) usable.push_back(j);
  }
  const std::size_t p_full = usable.size() + 1;
  const double rss_full = fit_subset(x, y, usable).rss;
  const double sigma2 = full_model_variance(rss_full, n, p_full);

  std::size_t winner = 0;
  double best_cp = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sel.subsets.by_size.size(); ++k) {
    // An exact full fit has no residual variance; Cp then prefers the smallest exact subset.
    const double cp = sigma2 > 0.0 ? mallows_cp(sel.subsets.by_size[k].rss, sigma2, n, k + 2)
                                   : (sel.subsets.by_size[k].rss > 0.0 ? std::numeric_limits<double>::infinity()
                                                                      : static_cast<double>(k + 2));
    sel.cp_by_size.push_back(cp);
    if (cp < best_cp) {
      best_cp = cp;
      winner = k;
    }
  }
  sel.model = fit_subset(x, y, sel.subsets.by_size[winner].columns);
  sel.model.cp = best_cp;
  return sel;
}

}  // namespace lpchaos
