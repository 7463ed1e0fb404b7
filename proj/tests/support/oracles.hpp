#pragma once

// Independent reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oracle {

// O(n^2) tau-a: every pair judged by its relative order in both lists.
inline double pair_count_tau(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> pos_b;
  for (std::size_t i = 0; i < b.size(); ++i) pos_b[b[i]] = static_cast<int>(i);
  int conc = 0, disc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) (pos_b[a[i]] < pos_b[a[j]] ? conc : disc)++;
  }
  return (conc - disc) / (a.size() * (a.size() - 1) / 2.0);
}

struct MultisetScore {
  int em = 0;
  double f1 = 0.0;
};

// Strikes matched tokens out of the gold list one at a time.
inline MultisetScore multiset_score(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  std::vector<std::string> rest = gold;
  int same = 0;
  for (const auto& t : pred) {
    auto it = std::find(rest.begin(), rest.end(), t);
    if (it != rest.end()) {
      ++same;
      rest.erase(it);
    }
  }
  MultisetScore s;
  s.em = same == static_cast<int>(pred.size()) && same == static_cast<int>(gold.size()) ? 1 : 0;
  if (pred.empty() && gold.empty()) {
    s.f1 = 1.0;
  } else if (same > 0) {
    const double p = static_cast<double>(same) / pred.size();
    const double r = static_cast<double>(same) / gold.size();
    s.f1 = 2 * p * r / (p + r);
  }
  return s;
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

// Softmax computed in long double, without the library's stabilization path.
inline std::vector<double> softmax_ld(const std::vector<double>& scores) {
  long double mx = scores[0];
  for (double s : scores) mx = std::max<long double>(mx, s);
  long double z = 0;
  for (double s : scores) z += std::exp(static_cast<long double>(s) - mx);
  std::vector<double> p;
  for (double s : scores) p.push_back(static_cast<double>(std::exp(static_cast<long double>(s) - mx) / z));
  return p;
}

}  // namespace oracle
