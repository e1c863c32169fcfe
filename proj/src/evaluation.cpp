#include "gencat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gencat/rng.hpp"

namespace gencat {

double accuracy(const std::vector<double>& probs, const std::vector<int>& outcomes,
                double threshold) {
  if (probs.empty()) throw validation_error("accuracy over empty predictions");
  if (probs.size() != outcomes.size())
    throw validation_error("prediction/outcome length mismatch");
  size_t hits = 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (outcomes[i] != 0 && outcomes[i] != 1)
      throw validation_error("accuracy expects binary outcomes");
    hits += (probs[i] >= threshold ? 1 : 0) == outcomes[i];
  }
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

double auc(const std::vector<double>& probs, const std::vector<int>& outcomes) {
  if (probs.size() != outcomes.size())
    throw validation_error("prediction/outcome length mismatch");
  double wins = 0.0;
  size_t pos = 0, neg = 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (outcomes[i] != 0 && outcomes[i] != 1)
      throw validation_error("auc expects binary outcomes");
    if (outcomes[i] == 1)
      ++pos;
    else
      ++neg;
  }
  if (pos == 0 || neg == 0)
    throw validation_error("auc undefined: outcomes contain a single class");
  for (size_t i = 0; i < probs.size(); ++i) {
    if (outcomes[i] != 1) continue;
    for (size_t j = 0; j < probs.size(); ++j) {
      if (outcomes[j] != 0) continue;
      if (probs[i] > probs[j])
        wins += 1.0;
      else if (probs[i] == probs[j])
        wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw validation_error("mean of empty list");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw validation_error("median of empty list");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::map<std::string, double> exposure_rates(
    const std::vector<std::vector<std::string>>& administered,
    const std::vector<std::string>& questions) {
  if (administered.empty()) throw validation_error("exposure over zero sessions");
  std::map<std::string, double> out;
  for (const auto& q : questions) out[q] = 0.0;
  for (const auto& session : administered) {
    std::set<std::string> unique(session.begin(), session.end());
    if (unique.size() != session.size())
      throw validation_error("session administered a question twice");
    for (const auto& q : unique) {
      auto it = out.find(q);
      if (it == out.end())
        throw validation_error("administered question outside the universe: " + q);
      it->second += 1.0;
    }
  }
  const double n = static_cast<double>(administered.size());
  for (auto& [_, v] : out) v = 100.0 * v / n;
  return out;
}

std::vector<double> overlap_rates(const std::vector<std::vector<std::string>>& administered) {
  if (administered.size() < 2) throw validation_error("overlap needs at least two sessions");
  const size_t t = administered.front().size();
  if (t == 0) throw validation_error("overlap at t=0 is undefined");
  std::vector<std::set<std::string>> sets;
  for (const auto& session : administered) {
    if (session.size() != t)
      throw validation_error("sessions compare at unequal test lengths");
    sets.emplace_back(session.begin(), session.end());
  }
  std::vector<double> out;
  for (size_t i = 0; i < sets.size(); ++i) {
    for (size_t j = i + 1; j < sets.size(); ++j) {
      size_t shared = 0;
      for (const auto& q : sets[i]) shared += sets[j].count(q);
      out.push_back(100.0 * static_cast<double>(shared) / static_cast<double>(t));
    }
  }
  return out;
}

double similarity_report(const std::vector<std::string>& generated,
                         const std::vector<std::string>& reference,
                         const std::function<double(const std::string&, const std::string&)>& sim) {
  if (generated.size() != reference.size())
    throw validation_error("similarity lists differ in length");
  if (generated.empty()) throw validation_error("similarity over empty lists");
  double total = 0.0;
  for (size_t i = 0; i < generated.size(); ++i) total += sim(generated[i], reference[i]);
  return total / static_cast<double>(generated.size());
}

std::map<std::string, int> kfold_assignment(const std::vector<std::string>& students, int k,
                                            uint64_t seed) {
  if (k < 2) throw config_error("need at least two folds");
  if (students.size() < static_cast<size_t>(k))
    throw validation_error("fewer students than folds");
  std::vector<std::string> order = students;
  std::sort(order.begin(), order.end());
  Rng rng(hash_seed(seed, "kfold"));
  rng.shuffle(order);
  std::map<std::string, int> out;
  for (size_t i = 0; i < order.size(); ++i) out[order[i]] = static_cast<int>(i % static_cast<size_t>(k));
  return out;
}

namespace {

// Regularized incomplete beta via the standard continued-fraction expansion;
// used for the Student-t tail probability.
double betacf(double a, double b, double x) {
  const double eps = 3e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// Two-sided p-value for a t statistic with nu degrees of freedom.
double t_pvalue(double t, double nu) { return betai(nu / 2.0, 0.5, nu / (nu + t * t)); }

}  // namespace

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                          double alpha) {
  if (a.size() != b.size()) throw validation_error("paired test needs equal-length samples");
  if (a.size() < 2) throw validation_error("paired test needs at least two pairs");
  std::vector<double> diff(a.size());
  for (size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double m = mean(diff);
  double ss = 0.0;
  for (double d : diff) ss += (d - m) * (d - m);
  const double n = static_cast<double>(diff.size());
  const double sd = std::sqrt(ss / (n - 1.0));
  TTestResult result;
  if (sd == 0.0) {
    result.t_stat = m == 0.0 ? 0.0 : std::copysign(HUGE_VAL, m);
    result.p_value = m == 0.0 ? 1.0 : 0.0;
  } else {
    result.t_stat = m / (sd / std::sqrt(n));
    result.p_value = t_pvalue(result.t_stat, n - 1.0);
  }
  result.significant = result.p_value < alpha;
  return result;
}

}  // namespace gencat
