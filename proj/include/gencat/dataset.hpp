#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gencat/common.hpp"

namespace gencat {

struct KnowledgeComponent {
  std::string id;
  std::string name;
};

struct Question {
  std::string id;
  std::string text;
  std::vector<std::string> kc_ids;  // ordered, non-empty
};

struct StudentResponse {
  std::string student_id;
  std::string question_id;
  std::string code;
  double score = 0.0;  // in [0,1]
  std::optional<std::string> timestamp;
};

// Immutable after construction (validated by load/build). Sparse responses:
// not every (student, question) pair is observed.
struct Corpus {
  std::vector<std::string> students;               // sorted unique ids
  std::vector<Question> questions;                 // sorted by id
  std::vector<KnowledgeComponent> kcs;             // sorted by id
  std::vector<StudentResponse> responses;          // sorted by (student, question)

  const Question& question(const std::string& id) const;
  const StudentResponse* find_response(const std::string& student_id,
                                       const std::string& question_id) const;
  bool has_student(const std::string& id) const;
  bool has_kc(const std::string& id) const;
  std::vector<const StudentResponse*> responses_of(const std::string& student_id) const;
  std::vector<const StudentResponse*> responses_to(const std::string& question_id) const;
};

enum class CorpusFormat { Jsonl, Csv };

// Loads questions.json, kcs.json and responses.{jsonl|csv} from a directory
// and validates all corpus invariants. Duplicate (student, question) records
// are resolved by keeping the earliest timestamp; without timestamps they are
// rejected.
Corpus load_corpus(const std::string& dir, CorpusFormat format);
void save_corpus(const Corpus& corpus, const std::string& dir, CorpusFormat format);

// Validates invariants on an in-memory corpus and canonicalizes ordering.
Corpus build_corpus(std::vector<std::string> students, std::vector<Question> questions,
                    std::vector<KnowledgeComponent> kcs,
                    std::vector<StudentResponse> responses);

// Every score becomes 1 if >= threshold else 0. threshold must lie in (0,1].
Corpus binarize_scores(const Corpus& corpus, double threshold);

struct SplitConfig {
  double girt_fraction = 0.8;     // fraction of students in the girt group
  double train_ratio = 0.8;       // girt-group per-student question split
  double val_ratio = 0.1;
  double test_ratio = 0.1;
  int heldout_size = 10;          // cat-group held-out question count
  int min_candidates = 30;        // cat-group minimum candidate pool
  uint64_t seed = 0;
};

struct StudentSplit {
  std::vector<std::string> train;  // girt group: train; cat group: candidates
  std::vector<std::string> val;    // girt group only
  std::vector<std::string> test;   // girt group: test; cat group: held-out
};

struct SplitPlan {
  std::vector<std::string> girt_group;  // sorted student ids
  std::vector<std::string> cat_group;
  std::map<std::string, StudentSplit> by_student;
};

// Greedy set cover per Appendix-E style splitting: a minimal-by-greedy KC
// cover of each student's answered questions is forced into train/candidates;
// the remainder is shuffled into the target ratios. Cat-group students whose
// candidate pool would fall below min_candidates are reassigned to the girt
// group. Deterministic given (corpus, config).
SplitPlan greedy_set_cover_split(const Corpus& corpus, const SplitConfig& config);

void save_split(const SplitPlan& plan, const std::string& path);
SplitPlan load_split(const std::string& path);

enum class ResponseRule { OnePl, KcMastery };

struct SynthConfig {
  int n_students = 0;
  int n_questions = 0;
  int n_kcs = 0;
  double density = 1.0;          // fraction of (student, question) pairs observed
  ResponseRule rule = ResponseRule::KcMastery;
  double ability_sd = 2.0;       // spread of latent ability
  double difficulty_sd = 1.0;    // spread of KC / item difficulty
  int max_kcs_per_question = 2;
};

struct SynthGroundTruth {
  std::map<std::string, double> ability;           // per student
  std::map<std::string, double> item_difficulty;   // per question (1PL rule)
  std::map<std::string, double> kc_difficulty;     // per KC (mastery rule)
  // True mastery per (student, kc) under the mastery rule.
  std::map<std::string, std::map<std::string, double>> mastery;
};

struct SynthResult {
  Corpus corpus;
  SynthGroundTruth truth;
};

// Deterministic given seed. Generated code strings vary with correctness:
// correct responses use the question's reference template, incorrect ones a
// buggy variant with a partial score.
SynthResult synthesize_corpus(const SynthConfig& config, uint64_t seed);

}  // namespace gencat
