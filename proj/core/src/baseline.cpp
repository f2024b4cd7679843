#include "upgnn/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "upgnn/errors.hpp"

namespace upgnn {

namespace {

// Ridge normal equations (intercept in the last column, unpenalized),
// solved by Gaussian elimination with partial pivoting. With lambda > 0 and
// at least one row the system is positive definite.
std::vector<double> ridge_fit(const std::vector<std::vector<double>>& rows,
                              const std::vector<double>& y, double lambda) {
  const std::size_t p = rows.front().size();
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i; j < p; ++j) {
        a[i][j] += rows[r][i] * rows[r][j];
      }
      a[i][p] += rows[r][i] * y[r];
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < i; ++j) a[i][j] = a[j][i];
    if (i + 1 < p) a[i][i] += lambda;
  }

  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (a[pivot][col] == 0.0) {
      throw ParameterError("baseline: singular normal equations");
    }
    std::swap(a[col], a[pivot]);
    for (std::size_t r = col + 1; r < p; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t j = col; j <= p; ++j) a[r][j] -= f * a[col][j];
    }
  }
  std::vector<double> w(p, 0.0);
  for (std::size_t i = p; i-- > 0;) {
    double acc = a[i][p];
    for (std::size_t j = i + 1; j < p; ++j) acc -= a[i][j] * w[j];
    w[i] = acc / a[i][i];
  }
  return w;
}

std::vector<double> feature_row(const Dataset& ds, std::size_t u) {
  std::vector<double> row(ds.x_u.cols() + 1);
  for (std::size_t j = 0; j < ds.x_u.cols(); ++j) row[j] = ds.x_u(u, j);
  row.back() = 1.0;  // intercept
  return row;
}

double dot(const std::vector<double>& w, const std::vector<double>& row) {
  double acc = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) acc += w[i] * row[i];
  return acc;
}

}  // namespace

BaselineModel fit_baseline(const Dataset& ds,
                           const std::vector<std::size_t>& labeled,
                           BaselineKind kind, double lambda) {
  if (labeled.empty()) throw ParameterError("baseline: labeled set is empty");
  if (!(lambda > 0.0)) throw ParameterError("baseline: lambda must be positive");
  for (const std::size_t u : labeled) {
    if (u >= ds.n()) throw ParameterError("baseline: index out of range");
  }

  BaselineModel model;
  model.kind = kind;
  model.lambda = lambda;

  if (kind == BaselineKind::kS) {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (const std::size_t u : labeled) {
      std::vector<double> row = feature_row(ds, u);
      // Treatment goes in front of the intercept.
      row.insert(row.end() - 1, ds.treatment[u] ? 1.0 : 0.0);
      rows.push_back(std::move(row));
      y.push_back(ds.outcome[u]);
    }
    model.coef_joint = ridge_fit(rows, y, lambda);
    return model;
  }

  std::vector<std::vector<double>> rows_t, rows_c;
  std::vector<double> y_t, y_c;
  for (const std::size_t u : labeled) {
    if (ds.treatment[u]) {
      rows_t.push_back(feature_row(ds, u));
      y_t.push_back(ds.outcome[u]);
    } else {
      rows_c.push_back(feature_row(ds, u));
      y_c.push_back(ds.outcome[u]);
    }
  }
  if (rows_t.empty() || rows_c.empty()) {
    throw ParameterError("baseline: T kind needs both treatment arms");
  }
  model.coef_treated = ridge_fit(rows_t, y_t, lambda);
  model.coef_control = ridge_fit(rows_c, y_c, lambda);
  return model;
}

std::vector<double> predict_baseline(const BaselineModel& model,
                                     const Dataset& ds,
                                     const std::vector<std::size_t>& users) {
  std::vector<double> tau;
  tau.reserve(users.size());
  for (const std::size_t u : users) {
    if (u >= ds.n()) throw ParameterError("baseline: index out of range");
    const std::vector<double> base = feature_row(ds, u);
    if (model.kind == BaselineKind::kS) {
      std::vector<double> treated = base;
      treated.insert(treated.end() - 1, 1.0);
      std::vector<double> control = base;
      control.insert(control.end() - 1, 0.0);
      tau.push_back(dot(model.coef_joint, treated) -
                    dot(model.coef_joint, control));
    } else {
      tau.push_back(dot(model.coef_treated, base) -
                    dot(model.coef_control, base));
    }
  }
  return tau;
}

}  // namespace upgnn
