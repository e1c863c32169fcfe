#include "gencat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gencat/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace gencat {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write file: " + path);
  out << content;
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw parse_error(path + ": " + e.what());
  }
}

// Minimal RFC4180 reader: quoted fields, "" escapes, LF or CRLF rows.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  size_t line = 1;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
    } else if (c == '"') {
      if (!field.empty())
        throw parse_error(path + ":" + std::to_string(line) + ": stray quote in field");
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      ++line;
    } else {
      field += c;
    }
  }
  if (in_quotes) throw parse_error(path + ": unterminated quoted field");
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string format_score(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::vector<StudentResponse> load_responses_jsonl(const std::string& path) {
  std::vector<StudentResponse> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw parse_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    StudentResponse r;
    try {
      r.student_id = j.at("student_id").get<std::string>();
      r.question_id = j.at("question_id").get<std::string>();
      r.code = j.at("code").get<std::string>();
      r.score = j.at("score").get<double>();
      if (j.contains("timestamp") && !j["timestamp"].is_null())
        r.timestamp = j["timestamp"].get<std::string>();
    } catch (const json::exception& e) {
      throw parse_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StudentResponse> load_responses_csv(const std::string& path) {
  auto rows = parse_csv(read_file(path), path);
  if (rows.empty()) throw parse_error(path + ": missing header row");
  const std::vector<std::string> expect = {"student_id", "question_id", "code", "score",
                                           "timestamp"};
  if (rows[0] != expect)
    throw parse_error(path + ":1: unexpected header (want student_id,question_id,code,score,timestamp)");
  std::vector<StudentResponse> out;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 5)
      throw parse_error(path + ":" + std::to_string(i + 1) + ": expected 5 fields, got " +
                        std::to_string(row.size()));
    StudentResponse r;
    r.student_id = row[0];
    r.question_id = row[1];
    r.code = row[2];
    try {
      size_t pos = 0;
      r.score = std::stod(row[3], &pos);
      if (pos != row[3].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw parse_error(path + ":" + std::to_string(i + 1) + ": bad score '" + row[3] + "'");
    }
    if (!row[4].empty()) r.timestamp = row[4];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

const Question& Corpus::question(const std::string& id) const {
  auto it = std::lower_bound(questions.begin(), questions.end(), id,
                             [](const Question& q, const std::string& v) { return q.id < v; });
  if (it == questions.end() || it->id != id)
    throw validation_error("unknown question id: " + id);
  return *it;
}

const StudentResponse* Corpus::find_response(const std::string& student_id,
                                             const std::string& question_id) const {
  auto it = std::lower_bound(
      responses.begin(), responses.end(), std::make_pair(student_id, question_id),
      [](const StudentResponse& r, const std::pair<std::string, std::string>& key) {
        return std::tie(r.student_id, r.question_id) < std::tie(key.first, key.second);
      });
  if (it == responses.end() || it->student_id != student_id || it->question_id != question_id)
    return nullptr;
  return &*it;
}

bool Corpus::has_student(const std::string& id) const {
  return std::binary_search(students.begin(), students.end(), id);
}

bool Corpus::has_kc(const std::string& id) const {
  return std::binary_search(kcs.begin(), kcs.end(), id,
                            [](const auto& a, const auto& b) {
                              if constexpr (std::is_same_v<std::decay_t<decltype(a)>, std::string>)
                                return a < b.id;
                              else
                                return a.id < b;
                            });
}

std::vector<const StudentResponse*> Corpus::responses_of(const std::string& student_id) const {
  std::vector<const StudentResponse*> out;
  auto lo = std::lower_bound(responses.begin(), responses.end(), student_id,
                             [](const StudentResponse& r, const std::string& v) {
                               return r.student_id < v;
                             });
  for (auto it = lo; it != responses.end() && it->student_id == student_id; ++it)
    out.push_back(&*it);
  return out;
}

std::vector<const StudentResponse*> Corpus::responses_to(const std::string& question_id) const {
  std::vector<const StudentResponse*> out;
  for (const auto& r : responses)
    if (r.question_id == question_id) out.push_back(&r);
  return out;
}

Corpus build_corpus(std::vector<std::string> students, std::vector<Question> questions,
                    std::vector<KnowledgeComponent> kcs,
                    std::vector<StudentResponse> responses) {
  Corpus c;
  c.students = std::move(students);
  c.questions = std::move(questions);
  c.kcs = std::move(kcs);
  c.responses = std::move(responses);

  std::sort(c.students.begin(), c.students.end());
  c.students.erase(std::unique(c.students.begin(), c.students.end()), c.students.end());
  std::sort(c.questions.begin(), c.questions.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });
  std::sort(c.kcs.begin(), c.kcs.end(),
            [](const KnowledgeComponent& a, const KnowledgeComponent& b) { return a.id < b.id; });

  for (size_t i = 1; i < c.questions.size(); ++i)
    if (c.questions[i].id == c.questions[i - 1].id)
      throw validation_error("duplicate question id: " + c.questions[i].id);
  for (size_t i = 1; i < c.kcs.size(); ++i)
    if (c.kcs[i].id == c.kcs[i - 1].id)
      throw validation_error("duplicate KC id: " + c.kcs[i].id);
  for (const auto& kc : c.kcs)
    if (kc.name.empty()) throw validation_error("KC '" + kc.id + "' has an empty name");

  std::set<std::string> kc_ids;
  for (const auto& kc : c.kcs) kc_ids.insert(kc.id);
  for (const auto& q : c.questions) {
    if (q.text.empty()) throw validation_error("question '" + q.id + "' has empty text");
    if (q.kc_ids.empty()) throw validation_error("question '" + q.id + "' has no KCs");
    std::set<std::string> seen;
    for (const auto& k : q.kc_ids) {
      if (!kc_ids.count(k))
        throw validation_error("question '" + q.id + "' references unknown KC '" + k + "'");
      if (!seen.insert(k).second)
        throw validation_error("question '" + q.id + "' lists KC '" + k + "' twice");
    }
  }

  // First-submission filtering: duplicates with timestamps keep the earliest,
  // duplicates without are rejected.
  std::sort(c.responses.begin(), c.responses.end(),
            [](const StudentResponse& a, const StudentResponse& b) {
              if (a.student_id != b.student_id) return a.student_id < b.student_id;
              if (a.question_id != b.question_id) return a.question_id < b.question_id;
              const std::string ta = a.timestamp.value_or("");
              const std::string tb = b.timestamp.value_or("");
              return ta < tb;
            });
  std::vector<StudentResponse> kept;
  kept.reserve(c.responses.size());
  for (auto& r : c.responses) {
    if (!kept.empty() && kept.back().student_id == r.student_id &&
        kept.back().question_id == r.question_id) {
      if (!kept.back().timestamp || !r.timestamp)
        throw validation_error("duplicate response for (" + r.student_id + ", " +
                               r.question_id + ") without timestamps");
      continue;  // keep the earliest submission
    }
    kept.push_back(std::move(r));
  }
  c.responses = std::move(kept);

  for (const auto& r : c.responses) {
    if (!c.has_student(r.student_id))
      throw validation_error("response references unknown student '" + r.student_id + "'");
    bool has_q = std::binary_search(
        c.questions.begin(), c.questions.end(), r.question_id,
        [](const auto& a, const auto& b) {
          if constexpr (std::is_same_v<std::decay_t<decltype(a)>, std::string>)
            return a < b.id;
          else
            return a.id < b;
        });
    if (!has_q)
      throw validation_error("response references unknown question '" + r.question_id + "'");
    if (!(r.score >= 0.0 && r.score <= 1.0))
      throw validation_error("response (" + r.student_id + ", " + r.question_id +
                             ") has score outside [0,1]");
  }
  return c;
}

Corpus load_corpus(const std::string& dir, CorpusFormat format) {
  const fs::path base(dir);
  json qj = parse_json_file((base / "questions.json").string());
  json kj = parse_json_file((base / "kcs.json").string());
  std::vector<Question> questions;
  std::vector<KnowledgeComponent> kcs;
  try {
    for (const auto& q : qj) {
      Question question;
      question.id = q.at("id").get<std::string>();
      question.text = q.at("text").get<std::string>();
      question.kc_ids = q.at("kcs").get<std::vector<std::string>>();
      questions.push_back(std::move(question));
    }
    for (const auto& k : kj) {
      kcs.push_back({k.at("id").get<std::string>(), k.at("name").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw parse_error(dir + ": " + e.what());
  }

  std::vector<StudentResponse> responses =
      format == CorpusFormat::Jsonl
          ? load_responses_jsonl((base / "responses.jsonl").string())
          : load_responses_csv((base / "responses.csv").string());

  std::set<std::string> students;
  for (const auto& r : responses) students.insert(r.student_id);
  return build_corpus(std::vector<std::string>(students.begin(), students.end()),
                      std::move(questions), std::move(kcs), std::move(responses));
}

void save_corpus(const Corpus& corpus, const std::string& dir, CorpusFormat format) {
  fs::create_directories(dir);
  const fs::path base(dir);

  ordered_json qj = ordered_json::array();
  for (const auto& q : corpus.questions)
    qj.push_back({{"id", q.id}, {"text", q.text}, {"kcs", q.kc_ids}});
  write_file((base / "questions.json").string(), qj.dump(2) + "\n");

  ordered_json kj = ordered_json::array();
  for (const auto& k : corpus.kcs) kj.push_back({{"id", k.id}, {"name", k.name}});
  write_file((base / "kcs.json").string(), kj.dump(2) + "\n");

  if (format == CorpusFormat::Jsonl) {
    std::ostringstream out;
    for (const auto& r : corpus.responses) {
      ordered_json j = {{"student_id", r.student_id},
                        {"question_id", r.question_id},
                        {"code", r.code},
                        {"score", r.score}};
      if (r.timestamp) j["timestamp"] = *r.timestamp;
      out << j.dump() << "\n";
    }
    write_file((base / "responses.jsonl").string(), out.str());
  } else {
    std::ostringstream out;
    out << "student_id,question_id,code,score,timestamp\n";
    for (const auto& r : corpus.responses) {
      out << r.student_id << "," << r.question_id << "," << csv_quote(r.code) << ","
          << format_score(r.score) << "," << r.timestamp.value_or("") << "\n";
    }
    write_file((base / "responses.csv").string(), out.str());
  }
}

Corpus binarize_scores(const Corpus& corpus, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw config_error("binarization threshold must lie in (0,1]");
  Corpus out = corpus;
  for (auto& r : out.responses) r.score = r.score >= threshold ? 1.0 : 0.0;
  return out;
}

namespace {

// Greedy minimum KC cover over one student's answered questions; ties broken
// by lowest question id (the questions argument is sorted by id).
std::vector<std::string> greedy_cover(const Corpus& corpus,
                                      const std::vector<std::string>& question_ids) {
  std::set<std::string> uncovered;
  for (const auto& qid : question_ids)
    for (const auto& k : corpus.question(qid).kc_ids) uncovered.insert(k);

  std::vector<std::string> cover;
  std::set<std::string> used;
  while (!uncovered.empty()) {
    std::string best;
    size_t best_gain = 0;
    for (const auto& qid : question_ids) {
      if (used.count(qid)) continue;
      size_t gain = 0;
      for (const auto& k : corpus.question(qid).kc_ids)
        if (uncovered.count(k)) ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best = qid;
      }
    }
    if (best_gain == 0) break;  // unreachable: every KC comes from some question
    cover.push_back(best);
    used.insert(best);
    for (const auto& k : corpus.question(best).kc_ids) uncovered.erase(k);
  }
  std::sort(cover.begin(), cover.end());
  return cover;
}

StudentSplit split_girt_student(const Corpus& corpus, const std::string& student_id,
                                const std::vector<std::string>& answered,
                                const SplitConfig& config) {
  StudentSplit s;
  s.train = greedy_cover(corpus, answered);
  std::set<std::string> in_cover(s.train.begin(), s.train.end());
  std::vector<std::string> rest;
  for (const auto& qid : answered)
    if (!in_cover.count(qid)) rest.push_back(qid);
  Rng rng(hash_seed(config.seed, std::string("girt"), student_id));
  rng.shuffle(rest);

  const size_t n = answered.size();
  size_t n_val = static_cast<size_t>(std::llround(config.val_ratio * static_cast<double>(n)));
  size_t n_test = static_cast<size_t>(std::llround(config.test_ratio * static_cast<double>(n)));
  n_val = std::min(n_val, rest.size());
  n_test = std::min(n_test, rest.size() - n_val);
  s.val.assign(rest.begin(), rest.begin() + static_cast<long>(n_val));
  s.test.assign(rest.begin() + static_cast<long>(n_val),
                rest.begin() + static_cast<long>(n_val + n_test));
  s.train.insert(s.train.end(), rest.begin() + static_cast<long>(n_val + n_test), rest.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace

SplitPlan greedy_set_cover_split(const Corpus& corpus, const SplitConfig& config) {
  std::map<std::string, std::vector<std::string>> answered_by;
  for (const auto& sid : corpus.students) {
    auto rs = corpus.responses_of(sid);
    if (rs.empty())
      throw validation_error("student '" + sid + "' has no responses");
    std::vector<std::string> qids;
    for (const auto* r : rs) qids.push_back(r->question_id);
    std::sort(qids.begin(), qids.end());
    answered_by[sid] = std::move(qids);
  }

  std::vector<std::string> order = corpus.students;
  Rng rng(hash_seed(config.seed, std::string("groups")));
  rng.shuffle(order);
  const size_t n_girt = static_cast<size_t>(
      std::llround(config.girt_fraction * static_cast<double>(order.size())));

  SplitPlan plan;
  std::vector<std::string> cat_candidates_pending(order.begin() + static_cast<long>(std::min(n_girt, order.size())),
                                                  order.end());
  plan.girt_group.assign(order.begin(), order.begin() + static_cast<long>(std::min(n_girt, order.size())));

  for (const auto& sid : cat_candidates_pending) {
    const auto& answered = answered_by[sid];
    StudentSplit s;
    s.train = greedy_cover(corpus, answered);
    std::set<std::string> in_cover(s.train.begin(), s.train.end());
    std::vector<std::string> rest;
    for (const auto& qid : answered)
      if (!in_cover.count(qid)) rest.push_back(qid);
    Rng srng(hash_seed(config.seed, std::string("cat"), sid));
    srng.shuffle(rest);

    const size_t n_heldout = std::min<size_t>(static_cast<size_t>(config.heldout_size), rest.size());
    const size_t n_candidates = answered.size() - n_heldout;
    if (n_candidates < static_cast<size_t>(config.min_candidates)) {
      // Candidate pool too small: reassign to the girt group.
      plan.girt_group.push_back(sid);
      continue;
    }
    s.test.assign(rest.begin(), rest.begin() + static_cast<long>(n_heldout));
    s.train.insert(s.train.end(), rest.begin() + static_cast<long>(n_heldout), rest.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    plan.cat_group.push_back(sid);
    plan.by_student[sid] = std::move(s);
  }

  for (const auto& sid : plan.girt_group)
    plan.by_student[sid] = split_girt_student(corpus, sid, answered_by[sid], config);

  std::sort(plan.girt_group.begin(), plan.girt_group.end());
  std::sort(plan.cat_group.begin(), plan.cat_group.end());
  return plan;
}

void save_split(const SplitPlan& plan, const std::string& path) {
  ordered_json j;
  j["girt_group"] = plan.girt_group;
  j["cat_group"] = plan.cat_group;
  ordered_json by = ordered_json::object();
  for (const auto& [sid, s] : plan.by_student)
    by[sid] = {{"train", s.train}, {"val", s.val}, {"test", s.test}};
  j["by_student"] = by;
  write_file(path, j.dump(2) + "\n");
}

SplitPlan load_split(const std::string& path) {
  json j = parse_json_file(path);
  SplitPlan plan;
  try {
    plan.girt_group = j.at("girt_group").get<std::vector<std::string>>();
    plan.cat_group = j.at("cat_group").get<std::vector<std::string>>();
    for (const auto& [sid, s] : j.at("by_student").items()) {
      StudentSplit split;
      split.train = s.at("train").get<std::vector<std::string>>();
      split.val = s.at("val").get<std::vector<std::string>>();
      split.test = s.at("test").get<std::vector<std::string>>();
      plan.by_student[sid] = std::move(split);
    }
  } catch (const json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
  return plan;
}

namespace {

struct OpSpec {
  char symbol;
  const char* word;
};

constexpr OpSpec kOps[] = {{'+', "add"}, {'-', "sub"}, {'*', "mul"}, {'%', "mod"},
                           {'&', "and"}, {'|', "orr"}, {'^', "xor"}};

const char* kKcNames[] = {"loops",   "arrays",  "strings", "branching", "recursion",
                          "bitwise", "hashing", "sorting", "pointers",  "arithmetic"};

std::string pad_num(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

// Correct reference implementation plus graded buggy variants. The variant
// structure is shared across questions so a small model can learn the
// correctness signal; the operator varies by question.
std::string question_code(int qidx, int variant) {
  const OpSpec& op = kOps[qidx % (sizeof(kOps) / sizeof(kOps[0]))];
  const std::string name = "q" + pad_num(qidx, 2);
  std::string body;
  switch (variant) {
    case 0: body = std::string("a") + op.symbol + "b"; break;  // correct
    case 1: body = "a"; break;
    case 2: body = "b"; break;
    default: body = "0"; break;
  }
  return "int " + name + "(int a,int b){return " + body + ";}";
}

double variant_score(int variant) {
  switch (variant) {
    case 0: return 1.0;
    case 1: return 0.5;
    case 2: return 0.25;
    default: return 0.0;
  }
}

}  // namespace

SynthResult synthesize_corpus(const SynthConfig& config, uint64_t seed) {
  if (config.n_students <= 0 || config.n_questions <= 0 || config.n_kcs <= 0)
    throw config_error("synth config requires positive student/question/KC counts");
  if (!(config.density > 0.0 && config.density <= 1.0))
    throw config_error("synth density must lie in (0,1]");

  SynthResult out;
  std::vector<KnowledgeComponent> kcs;
  for (int k = 0; k < config.n_kcs; ++k) {
    const std::string id = "K" + pad_num(k, 2);
    kcs.push_back({id, kKcNames[k % (sizeof(kKcNames) / sizeof(kKcNames[0]))]});
  }

  Rng rng(hash_seed(seed, std::string("synth")));
  std::vector<Question> questions;
  std::map<std::string, double> item_b;
  for (int q = 0; q < config.n_questions; ++q) {
    Question question;
    question.id = "q" + pad_num(q, 2);
    const OpSpec& op = kOps[q % (sizeof(kOps) / sizeof(kOps[0]))];
    question.text = question.id + " " + op.word + " a b";
    question.kc_ids.push_back("K" + pad_num(q % config.n_kcs, 2));
    if (config.max_kcs_per_question > 1 && rng.bernoulli(0.4) && config.n_kcs > 1) {
      int second = (q * 7 + 3) % config.n_kcs;
      if (second == q % config.n_kcs) second = (second + 1) % config.n_kcs;
      question.kc_ids.push_back("K" + pad_num(second, 2));
    }
    item_b[question.id] = rng.uniform(-2.0 * config.difficulty_sd, 2.0 * config.difficulty_sd);
    questions.push_back(std::move(question));
  }

  std::map<std::string, double> kc_d;
  for (const auto& kc : kcs) kc_d[kc.id] = rng.normal(0.0, config.difficulty_sd);

  std::vector<std::string> students;
  std::map<std::string, double> ability;
  for (int s = 0; s < config.n_students; ++s) {
    const std::string sid = "s" + pad_num(s, 3);
    students.push_back(sid);
    ability[sid] = rng.normal(0.0, config.ability_sd);
  }

  std::map<std::string, std::map<std::string, double>> mastery;
  if (config.rule == ResponseRule::KcMastery) {
    for (const auto& sid : students)
      for (const auto& kc : kcs)
        mastery[sid][kc.id] = sigmoid(ability[sid] - kc_d[kc.id]);
  }

  std::vector<StudentResponse> responses;
  for (const auto& sid : students) {
    for (size_t qi = 0; qi < questions.size(); ++qi) {
      const Question& q = questions[qi];
      // Per-pair stream so structure is stable under config tweaks.
      Rng pair_rng(hash_seed(seed, sid, q.id));
      if (config.density < 1.0 && !pair_rng.bernoulli(config.density)) continue;
      double p;
      if (config.rule == ResponseRule::OnePl) {
        p = sigmoid(ability[sid] - item_b[q.id]);
      } else {
        double sum = 0.0;
        for (const auto& k : q.kc_ids) sum += mastery[sid][k];
        p = sum / static_cast<double>(q.kc_ids.size());
      }
      const bool correct = pair_rng.bernoulli(p);
      int variant = 0;
      if (!correct) variant = 1 + static_cast<int>(pair_rng.below(3));
      StudentResponse r;
      r.student_id = sid;
      r.question_id = q.id;
      r.code = question_code(static_cast<int>(qi), variant);
      r.score = variant_score(variant);
      responses.push_back(std::move(r));
    }
  }

  out.corpus = build_corpus(students, std::move(questions), std::move(kcs), std::move(responses));
  out.truth.ability = std::move(ability);
  out.truth.item_difficulty = std::move(item_b);
  out.truth.kc_difficulty = std::move(kc_d);
  out.truth.mastery = std::move(mastery);
  return out;
}

}  // namespace gencat
