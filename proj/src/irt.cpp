#include "gencat/irt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

using nlohmann::json;
using nlohmann::ordered_json;

namespace gencat {

double irt_prob(double theta, double b) { return 1.0 / (1.0 + std::exp(-(theta - b))); }

double fisher_info(double theta, double b) {
  const double p = irt_prob(theta, b);
  return p * (1.0 - p);
}

double IrtCalibration::b_of(const std::string& question_id) const {
  auto it = std::lower_bound(items.begin(), items.end(), question_id,
                             [](const IrtItem& a, const std::string& q) {
                               return a.question_id < q;
                             });
  if (it == items.end() || it->question_id != question_id)
    throw missing_artifact_error("question not calibrated: " + question_id);
  return it->b;
}

double IrtCalibration::theta_of(const std::string& student_id) const {
  auto it = std::lower_bound(abilities.begin(), abilities.end(), student_id,
                             [](const IrtAbility& a, const std::string& s) {
                               return a.student_id < s;
                             });
  if (it == abilities.end() || it->student_id != student_id)
    throw missing_artifact_error("student not calibrated: " + student_id);
  return it->theta;
}

IrtCalibration calibrate(const std::vector<const StudentResponse*>& responses,
                         const IrtConfig& config) {
  if (responses.empty()) throw validation_error("calibration needs responses");
  if (!(config.prior_sd > 0.0)) throw config_error("prior sd must be positive");

  std::map<std::string, int> sidx, qidx;
  for (const auto* r : responses) {
    if (r->score != 0.0 && r->score != 1.0)
      throw validation_error("calibration expects binarized scores, got " +
                             std::to_string(r->score) + " from " + r->student_id);
    sidx.emplace(r->student_id, 0);
    qidx.emplace(r->question_id, 0);
  }
  int i = 0;
  for (auto& [_, v] : sidx) v = i++;
  i = 0;
  for (auto& [_, v] : qidx) v = i++;

  // Dense index triples; duplicates impossible in a valid corpus.
  struct Obs {
    int s, q, y;
  };
  std::vector<Obs> obs;
  obs.reserve(responses.size());
  for (const auto* r : responses)
    obs.push_back({sidx[r->student_id], qidx[r->question_id],
                   static_cast<int>(r->score)});

  std::vector<double> theta(sidx.size(), 0.0), b(qidx.size(), 0.0);
  const double inv_var = 1.0 / (config.prior_sd * config.prior_sd);

  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    std::vector<double> g_theta(theta.size(), 0.0), h_theta(theta.size(), 0.0);
    std::vector<double> g_b(b.size(), 0.0), h_b(b.size(), 0.0);
    for (const auto& o : obs) {
      const double p = irt_prob(theta[o.s], b[o.q]);
      const double resid = static_cast<double>(o.y) - p;
      const double info = p * (1.0 - p);
      g_theta[o.s] += resid;
      h_theta[o.s] += info;
      g_b[o.q] -= resid;
      h_b[o.q] += info;
    }
    double max_step = 0.0;
    for (size_t s = 0; s < theta.size(); ++s) {
      const double step = (g_theta[s] - theta[s] * inv_var) / (h_theta[s] + inv_var);
      theta[s] += step;
      max_step = std::max(max_step, std::abs(step));
    }
    for (size_t q = 0; q < b.size(); ++q) {
      const double step = (g_b[q] - b[q] * inv_var) / (h_b[q] + inv_var);
      b[q] += step;
      max_step = std::max(max_step, std::abs(step));
    }
    if (max_step < config.tol) break;
  }

  IrtCalibration out;
  for (const auto& [sid, idx] : sidx) out.abilities.push_back({sid, theta[static_cast<size_t>(idx)]});
  for (const auto& [qid, idx] : qidx) out.items.push_back({qid, b[static_cast<size_t>(idx)]});
  return out;
}

double update_ability(const std::vector<std::pair<double, int>>& observations,
                      double prior_sd) {
  if (!(prior_sd > 0.0)) throw config_error("prior sd must be positive");
  if (observations.empty()) return 0.0;
  const double inv_var = 1.0 / (prior_sd * prior_sd);
  double theta = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    double grad = -theta * inv_var, hess = inv_var;
    for (const auto& [b, y] : observations) {
      if (y != 0 && y != 1) throw validation_error("ability update expects binary outcomes");
      const double p = irt_prob(theta, b);
      grad += static_cast<double>(y) - p;
      hess += p * (1.0 - p);
    }
    const double step = grad / hess;
    theta += step;
    if (std::abs(step) < 1e-6) break;
  }
  return theta;
}

std::vector<double> proxy_evaluate(const std::vector<std::pair<double, int>>& administered,
                                   const std::vector<IrtItem>& heldout, double prior_sd) {
  const double theta = update_ability(administered, prior_sd);
  std::vector<double> out;
  out.reserve(heldout.size());
  for (const auto& item : heldout) out.push_back(irt_prob(theta, item.b));
  return out;
}

void save_item_bank(const std::vector<IrtItem>& items, const std::string& path) {
  ordered_json bank = json::array();
  for (const auto& item : items)
    bank.push_back({{"question_id", item.question_id}, {"b", item.b}});
  std::ofstream out(path);
  if (!out) throw io_error("cannot write item bank: " + path);
  out << bank.dump(2) << '\n';
}

std::vector<IrtItem> load_item_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw missing_artifact_error("item bank not found: " + path);
  json doc = json::parse(in);
  if (!doc.is_array()) throw parse_error("item bank must be a JSON array: " + path);
  std::vector<IrtItem> out;
  for (const auto& item : doc)
    out.push_back({item.at("question_id").get<std::string>(), item.at("b").get<double>()});
  return out;
}

}  // namespace gencat
