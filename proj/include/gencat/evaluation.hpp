#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gencat/common.hpp"

namespace gencat {

// Fraction of thresholded predictions matching the binary outcomes.
double accuracy(const std::vector<double>& probs, const std::vector<int>& outcomes,
                double threshold = 0.5);

// Rank-based AUC: probability a random positive outranks a random negative,
// ties counted half. Throws when only one class is present.
double auc(const std::vector<double>& probs, const std::vector<int>& outcomes);

double mean(const std::vector<double>& values);
double median(std::vector<double> values);

// Percent of sessions (students) whose first-t administered set contains each
// question; one entry per question in the universe.
std::map<std::string, double> exposure_rates(
    const std::vector<std::vector<std::string>>& administered,
    const std::vector<std::string>& questions);

// Percent overlap |A ∩ B| / t per unordered session pair; every session must
// have administered exactly t questions.
std::vector<double> overlap_rates(const std::vector<std::vector<std::string>>& administered);

// Mean of the pluggable similarity over aligned response lists.
double similarity_report(const std::vector<std::string>& generated,
                         const std::vector<std::string>& reference,
                         const std::function<double(const std::string&, const std::string&)>& sim);

// Seeded fold assignment: returns fold index (0..k-1) per student, balanced
// within one of each other.
std::map<std::string, int> kfold_assignment(const std::vector<std::string>& students, int k,
                                            uint64_t seed);

struct TTestResult {
  double t_stat = 0.0;
  double p_value = 1.0;
  bool significant = false;  // two-sided at the supplied alpha
};

// Paired two-sided t-test across folds.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                          double alpha = 0.05);

}  // namespace gencat
