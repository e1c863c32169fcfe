#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gencat/dataset.hpp"

namespace gencat {

struct IrtItem {
  std::string question_id;
  double b = 0.0;  // difficulty
};

struct IrtAbility {
  std::string student_id;
  double theta = 0.0;
};

// 1PL response probability sigma(theta - b).
double irt_prob(double theta, double b);

// Item information p(1-p) at the current ability.
double fisher_info(double theta, double b);

struct IrtConfig {
  double prior_sd = 2.0;  // Gaussian prior on theta and b
  int max_sweeps = 500;
  double tol = 1e-6;
};

struct IrtCalibration {
  std::vector<IrtItem> items;        // sorted by question id
  std::vector<IrtAbility> abilities; // sorted by student id

  double b_of(const std::string& question_id) const;
  double theta_of(const std::string& student_id) const;
};

// Joint MAP fit of all abilities and difficulties on binarized responses by
// coordinate-wise Newton sweeps. Deterministic; order-invariant in the input.
IrtCalibration calibrate(const std::vector<const StudentResponse*>& responses,
                         const IrtConfig& config = {});

// MAP ability estimate from observed (difficulty, outcome) pairs, solved to
// |step| < 1e-6. Zero observations return the prior mean 0.
double update_ability(const std::vector<std::pair<double, int>>& observations,
                      double prior_sd = 2.0);

// Proxy evaluation: ability from the administered sequence, then sigma(theta-b)
// per held-out item, in the held-out order.
std::vector<double> proxy_evaluate(const std::vector<std::pair<double, int>>& administered,
                                   const std::vector<IrtItem>& heldout, double prior_sd = 2.0);

// JSON array of {"question_id", "b"}.
void save_item_bank(const std::vector<IrtItem>& items, const std::string& path);
std::vector<IrtItem> load_item_bank(const std::string& path);

}  // namespace gencat
