#pragma once

// Reference computations used by the tests. Nothing here calls into the library's own
// derivative or statistics code.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

/// Central differences of f at x with step h.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / (||a|| + ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom < 1e-12 ? 0.0 : std::sqrt(diff) / denom;
}

/// Exhaustive best depth-1 Gini split: every feature, every midpoint between distinct sorted
/// values, weighted impurity computed from explicit class proportions.
struct Split {
  bool valid = false;
  long feature = 0;
  double threshold = 0.0;
  double impurity = 0.0;
};

inline Split brute_force_stump(const std::vector<std::vector<double>>& rows, const std::vector<int>& y) {
  Split best;
  const std::size_t n = rows.empty() ? 0 : rows[0].size();
  for (std::size_t f = 0; f < n; ++f) {
    std::vector<double> values;
    for (const auto& r : rows) values.push_back(r[f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double t = (values[k] + values[k + 1]) / 2.0;
      double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i][f] < t) {
          (y[i] ? l1 : l0) += 1;
        } else {
          (y[i] ? r1 : r0) += 1;
        }
      }
      auto g = [](double a, double b) {
        const double s = a + b;
        return s == 0 ? 0.0 : 1.0 - (a / s) * (a / s) - (b / s) * (b / s);
      };
      const double total = l0 + l1 + r0 + r1;
      const double imp = ((l0 + l1) * g(l0, l1) + (r0 + r1) * g(r0, r1)) / total;
      if (!best.valid || imp < best.impurity - 1e-12) best = {true, static_cast<long>(f), t, imp};
    }
  }
  return best;
}

/// Linear separability of labeled 2-D points by scanning normal directions on a fine angular
/// grid: for each direction, the classes separate iff their projections do not overlap.
inline bool separable_2d(const std::vector<std::array<double, 2>>& pts, const std::vector<int>& y,
                         int directions = 20000) {
  const double pi = std::acos(-1.0);
  for (int k = 0; k < directions; ++k) {
    const double a = pi * k / directions;
    const double c = std::cos(a), s = std::sin(a);
    double max0 = -1e300, min0 = 1e300, max1 = -1e300, min1 = 1e300;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double p = c * pts[i][0] + s * pts[i][1];
      if (y[i]) {
        max1 = std::max(max1, p);
        min1 = std::min(min1, p);
      } else {
        max0 = std::max(max0, p);
        min0 = std::min(min0, p);
      }
    }
    if (max0 < min1 || max1 < min0) return true;
  }
  return false;
}

/// Student t survival function by Simpson integration of the density from 0 to |t|.
inline double t_two_sided_p(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::acos(-1.0));
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const double upper = std::fabs(t);
  const int steps = 200000;
  const double h = upper / steps;
  double sum = pdf(0) + pdf(upper);
  for (int i = 1; i < steps; ++i) sum += pdf(i * h) * (i % 2 ? 4 : 2);
  const double half = sum * h / 3;  // P(0 <= T <= |t|)
  return 1.0 - 2.0 * half;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(INET_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
