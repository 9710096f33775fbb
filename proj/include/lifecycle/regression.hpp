#pragma once

// OLS with cluster-robust (CR1) standard errors.

#include "lifecycle/error.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lifecycle {

// Named columns with possibly missing entries plus one cluster label per row.
struct RegressionFrame {
  std::map<std::string, std::vector<std::optional<double>>> columns;
  std::vector<std::string> cluster;

  std::size_t rows() const noexcept { return cluster.size(); }
};

struct Formula {
  std::string response;
  std::vector<std::string> covariates;
  bool intercept = true;
};

struct RegressionResult {
  std::vector<std::string> terms;  // covariates, then "_cons" when an intercept is fitted
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  Eigen::VectorXd p;
  Eigen::MatrixXd vcov;
  std::size_t n = 0;
  std::size_t clusters = 0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
};

inline constexpr double kRankTolerance = 1e-10;

// Cluster-robust variance (X'X)^-1 [sum_g X_g' e_g e_g' X_g] (X'X)^-1, scaled
// by G/(G-1) * (N-1)/(N-k). p-values use a t distribution with G-1 degrees
// of freedom. Rows with any missing value in the formula are dropped.
inline RegressionResult ols_clustered(const RegressionFrame& frame, const Formula& formula) {
  auto column = [&](const std::string& name) -> const std::vector<std::optional<double>>& {
    const auto it = frame.columns.find(name);
    if (it == frame.columns.end()) throw Error(ErrorKind::Data, "regression column '" + name + "' not found");
    if (it->second.size() != frame.rows())
      throw Error(ErrorKind::Data, "regression column '" + name + "' has the wrong length");
    return it->second;
  };
  const auto& y_col = column(formula.response);
  std::vector<const std::vector<std::optional<double>>*> x_cols;
  for (const auto& name : formula.covariates) x_cols.push_back(&column(name));

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    bool complete = y_col[i].has_value();
    for (const auto* col : x_cols) complete = complete && (*col)[i].has_value();
    if (complete) keep.push_back(i);
  }

  RegressionResult res;
  res.terms = formula.covariates;
  if (formula.intercept) res.terms.push_back("_cons");
  const auto k = static_cast<Eigen::Index>(res.terms.size());
  const auto n = static_cast<Eigen::Index>(keep.size());
  res.n = keep.size();
  if (n <= k)
    throw Error(ErrorKind::Undefined, "regression needs more observations (" + std::to_string(n) +
                                          ") than parameters (" + std::to_string(k) + ")");

  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = keep[static_cast<std::size_t>(r)];
    y(r) = *y_col[i];
    for (std::size_t j = 0; j < x_cols.size(); ++j) X(r, static_cast<Eigen::Index>(j)) = *(*x_cols[j])[i];
    if (formula.intercept) X(r, k - 1) = 1.0;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < k) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < k; ++j)
      names += (names.empty() ? "" : ", ") + res.terms[static_cast<std::size_t>(perm(j))];
    throw Error(ErrorKind::Undefined, "design matrix is rank deficient; collinear column(s): " + names);
  }
  res.coef = qr.solve(y);
  const Eigen::VectorXd resid = y - X * res.coef;

  std::map<std::string, Eigen::VectorXd> scores;
  for (Eigen::Index r = 0; r < n; ++r) {
    auto& s = scores[frame.cluster[keep[static_cast<std::size_t>(r)]]];
    if (s.size() == 0) s = Eigen::VectorXd::Zero(k);
    s += X.row(r).transpose() * resid(r);
  }
  res.clusters = scores.size();
  if (res.clusters < 2) throw Error(ErrorKind::Undefined, "cluster-robust variance needs at least two clusters");

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [id, s] : scores) meat += s * s.transpose();
  const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  const double g = static_cast<double>(res.clusters);
  const double dn = static_cast<double>(n), dk = static_cast<double>(k);
  const double scale = g / (g - 1.0) * (dn - 1.0) / (dn - dk);
  res.vcov = scale * bread * meat * bread;

  res.se = res.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.t.resize(k);
  res.p.resize(k);
  const boost::math::students_t dist(g - 1.0);
  for (Eigen::Index j = 0; j < k; ++j) {
    res.t(j) = res.se(j) > 0.0 ? res.coef(j) / res.se(j) : std::nan("");
    res.p(j) = std::isfinite(res.t(j)) ? 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.t(j))))
                                       : std::nan("");
  }

  const double ssr = resid.squaredNorm();
  const double sst = formula.intercept ? (y.array() - y.mean()).square().sum() : y.squaredNorm();
  res.r2 = sst > 0.0 ? 1.0 - ssr / sst : std::nan("");
  const double df_model = formula.intercept ? dn - 1.0 : dn;
  res.adj_r2 = sst > 0.0 ? 1.0 - (1.0 - res.r2) * df_model / (dn - dk) : std::nan("");
  return res;
}

}  // namespace lifecycle
