// SPDX-License-Identifier: Apache-2.0
#include "gapfinder/rater.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "gapfinder/apportion.hpp"
#include "gapfinder/error.hpp"
#include "gapfinder/random.hpp"

namespace gapfinder::rater {

std::string_view to_string(Dimension d) noexcept {
  switch (d) {
    case Dimension::correct:
      return "correct";
    case Dimension::diagnostic:
      return "diagnostic";
    case Dimension::positive:
      return "positive";
  }
  return "?";
}

Dimension parse_dimension(std::string_view s) {
  for (auto d : kDimensions) {
    if (to_string(d) == s) return d;
  }
  throw ConfigError("unknown rubric dimension \"" + std::string(s) + "\"");
}

bool RubricLabel::get(Dimension d) const noexcept {
  switch (d) {
    case Dimension::correct:
      return correct;
    case Dimension::diagnostic:
      return diagnostic;
    case Dimension::positive:
      return positive;
  }
  return false;
}

json to_json(const Sample& s) {
  return json{{"sample_id", s.sample_id},
              {"response_id", s.response_id},
              {"language", s.language},
              {"kind", s.kind},
              {"model", s.model},
              {"method", s.method},
              {"code", s.code},
              {"student_explanation", s.student_explanation},
              {"gold_feedback", s.gold_feedback},
              {"model_feedback", s.model_feedback}};
}

Sample sample_from_json(const json& r) {
  const std::initializer_list<std::string_view> fields = {
      "sample_id", "response_id", "language",      "kind",          "model",
      "method",    "code",        "student_explanation", "gold_feedback", "model_feedback"};
  io::check_fields(r, fields, fields, "sample");
  try {
    return Sample{r.at("sample_id").get<std::string>(), r.at("response_id").get<std::string>(),
                  r.at("language").get<std::string>(), r.at("kind").get<std::string>(),
                  r.at("model").get<std::string>(), r.at("method").get<std::string>(),
                  r.at("code").get<std::string>(), r.at("student_explanation").get<std::string>(),
                  r.at("gold_feedback").get<std::string>(), r.at("model_feedback").get<std::string>()};
  } catch (const json::exception& e) {
    throw DataError(std::string("sample: ") + e.what());
  }
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
  std::vector<Sample> out;
  std::set<std::string> ids;
  io::for_each_record(path, [&](std::size_t line, const json& r) {
    out.push_back(sample_from_json(r));
    if (!ids.insert(out.back().sample_id).second) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": duplicate sample id \"" + out.back().sample_id + "\"");
    }
  });
  return out;
}

void save_samples(const std::filesystem::path& path, std::span<const Sample> samples) {
  std::string content;
  for (const auto& s : samples) content += to_json(s).dump() + "\n";
  io::write_file_atomic(path, content);
}

json to_json(const RubricLabel& l) {
  return json{{"sample_id", l.sample_id},   {"annotator_id", l.annotator_id}, {"correct", l.correct},
              {"diagnostic", l.diagnostic}, {"positive", l.positive},         {"timestamp", l.timestamp}};
}

RubricLabel label_from_json(const json& r) {
  io::check_fields(r, {"sample_id", "annotator_id", "correct", "diagnostic", "positive", "timestamp"},
                   {"sample_id", "annotator_id", "correct", "diagnostic", "positive"}, "rubric label");
  try {
    return RubricLabel{r.at("sample_id").get<std::string>(), r.at("annotator_id").get<std::string>(),
                       r.at("correct").get<bool>(),          r.at("diagnostic").get<bool>(),
                       r.at("positive").get<bool>(),         r.value("timestamp", std::string())};
  } catch (const json::exception& e) {
    throw DataError(std::string("rubric label: ") + e.what());
  }
}

std::vector<RubricLabel> load_labels(const std::filesystem::path& path) {
  std::vector<RubricLabel> out;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return out;
  std::set<std::pair<std::string, std::string>> seen;
  io::for_each_record(path, [&](std::size_t line, const json& r) {
    out.push_back(label_from_json(r));
    if (!seen.emplace(out.back().sample_id, out.back().annotator_id).second) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": second label for sample \"" +
                      out.back().sample_id + "\" by annotator \"" + out.back().annotator_id + "\"");
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> stratified_sample(std::span<const std::string> strata, std::size_t n, std::uint64_t seed) {
  if (n > strata.size()) {
    throw ConfigError("sample size " + std::to_string(n) + " exceeds population " + std::to_string(strata.size()));
  }
  std::vector<std::string> keys;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    if (members.find(strata[i]) == members.end()) keys.push_back(strata[i]);
    members[strata[i]].push_back(i);
  }
  std::vector<std::size_t> quota(keys.size(), 0);
  std::vector<bool> full(keys.size(), false);
  std::size_t remaining = n;
  // Apportion over strata that still have room; cap and repeat on overflow.
  while (remaining > 0) {
    std::vector<double> weights(keys.size(), 0.0);
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (!full[k]) weights[k] = static_cast<double>(members[keys[k]].size() - quota[k]);
    }
    const auto extra = largest_remainder(remaining, weights);
    remaining = 0;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const std::size_t room = members[keys[k]].size() - quota[k];
      if (extra[k] > room) {
        log::warn("stratum \"" + keys[k] + "\" cannot supply " + std::to_string(extra[k]) +
                  " samples; reallocating the excess");
        remaining += extra[k] - room;
        quota[k] += room;
        full[k] = true;
      } else {
        quota[k] += extra[k];
        if (quota[k] == members[keys[k]].size()) full[k] = true;
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    auto pool = members[keys[k]];
    Pcg32 rng = Pcg32::for_key(seed, "sample/" + keys[k]);
    shuffle(std::span<std::size_t>(pool), rng);
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota[k]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const Session& s) {
  return json{{"annotator_id", s.annotator_id},
              {"cursor", s.cursor},
              {"completed", s.completed},
              {"blind", s.blind},
              {"samples_path", s.samples_path.string()},
              {"labels_path", s.labels_path.string()}};
}

void save_session(const std::filesystem::path& session_path, const Session& session) {
  io::write_file_atomic(session_path, to_json(session).dump() + "\n");
}

Session open_session(const std::filesystem::path& session_path, const std::string& annotator_id,
                     const std::filesystem::path& samples_path, const std::filesystem::path& labels_path, bool blind) {
  Session s;
  s.annotator_id = annotator_id;
  s.samples_path = samples_path;
  s.labels_path = labels_path;
  s.blind = blind;
  std::error_code ec;
  if (std::filesystem::exists(session_path, ec)) {
    try {
      const json r = json::parse(io::read_file(session_path));
      if (r.at("annotator_id").get<std::string>() != annotator_id) {
        throw ConfigError("session " + session_path.string() + " belongs to annotator \"" +
                          r.at("annotator_id").get<std::string>() + "\"");
      }
      s.cursor = r.at("cursor").get<std::size_t>();
      s.completed = r.at("completed").get<bool>();
      s.blind = r.value("blind", blind);
    } catch (const json::exception& e) {
      throw DataError("corrupt session file " + session_path.string() + ": " + e.what());
    }
  }
  const auto samples = load_samples(samples_path);
  std::set<std::string> done;
  for (const auto& l : load_labels(labels_path)) {
    if (l.annotator_id == annotator_id) done.insert(l.sample_id);
  }
  for (std::size_t i = samples.size(); i > s.cursor; --i) {
    if (done.count(samples[i - 1].sample_id) > 0) {
      s.cursor = i;
      break;
    }
  }
  if (s.cursor >= samples.size()) s.completed = true;
  return s;
}

std::string render_sample(const Sample& sample, std::size_t position, std::size_t total, bool blind) {
  std::ostringstream out;
  out << "==== Sample " << position + 1 << " of " << total << " [" << sample.sample_id << "] ====\n";
  out << "Language: " << sample.language << "\n";
  if (!blind) out << "Model: " << sample.model << "  Method: " << sample.method << "\n";
  out << "\n--- Code ---\n" << sample.code << "\n";
  out << "\n--- Student explanation ---\n" << sample.student_explanation << "\n";
  if (!blind) out << "\n--- Gold feedback ---\n" << sample.gold_feedback << "\n";
  out << "\n--- Model feedback ---\n" << sample.model_feedback << "\n\n";
  return out.str();
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Next non-whitespace key, or nullopt at end of input.
std::optional<char> next_key(std::istream& in) {
  char c = 0;
  while (in.get(c)) {
    if (c != ' ' && c != '\n' && c != '\r' && c != '\t') return c;
  }
  return std::nullopt;
}

}  // namespace

AnnotateOutcome annotate(Session& session, const std::filesystem::path& session_path, std::span<const Sample> samples,
                         std::istream& keys, std::ostream& screen, const std::function<std::string()>& clock) {
  AnnotateOutcome outcome;
  if (session.completed || session.cursor >= samples.size()) {
    session.completed = true;
    screen << "Session already complete.\n";
    return outcome;
  }
  const char* questions[] = {"Correct (accurate and relevant)?", "Diagnostic (identifies the error or gap)?",
                             "Positive (constructive and supportive)?"};
  while (session.cursor < samples.size()) {
    const Sample& sample = samples[session.cursor];
    screen << render_sample(sample, session.cursor, samples.size(), session.blind);
    bool answers[3] = {false, false, false};
    bool skip = false;
    for (int q = 0; q < 3 && !skip; ++q) {
      for (;;) {
        screen << questions[q] << " [y/n/s/q] " << std::flush;
        const auto key = next_key(keys);
        if (!key || *key == 'q') {
          screen << "\nSaved; resume later at sample " << session.cursor + 1 << ".\n";
          save_session(session_path, session);
          outcome.quit = true;
          return outcome;
        }
        if (*key == 'y' || *key == 'n') {
          answers[q] = *key == 'y';
          screen << *key << "\n";
          break;
        }
        if (*key == 's') {
          skip = true;
          screen << "skipped\n";
          break;
        }
        screen << "\ninvalid key '" << *key << "'; use y, n, s or q\n";
      }
    }
    if (skip) {
      ++outcome.skipped;
    } else {
      RubricLabel label{sample.sample_id, session.annotator_id, answers[0], answers[1], answers[2],
                        clock ? clock() : utc_now()};
      io::append_line(session.labels_path, to_json(label).dump());
      ++outcome.labeled;
    }
    ++session.cursor;
    session.completed = session.cursor >= samples.size();
    save_session(session_path, session);
  }
  screen << "Session complete.\n";
  return outcome;
}

// ---------------------------------------------------------------------------

Contingency contingency(std::span<const RubricLabel> a, std::span<const RubricLabel> b, Dimension d) {
  std::map<std::string, bool> av, bv;
  for (const auto& l : a) av[l.sample_id] = l.get(d);
  for (const auto& l : b) bv[l.sample_id] = l.get(d);
  if (av.size() != bv.size() ||
      !std::equal(av.begin(), av.end(), bv.begin(), [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw DataError("kappa needs both annotators to label the same sample set");
  }
  Contingency t;
  for (const auto& [id, x] : av) {
    const bool y = bv.at(id);
    if (x && y) ++t.yy;
    if (x && !y) ++t.yn;
    if (!x && y) ++t.ny;
    if (!x && !y) ++t.nn;
  }
  return t;
}

double cohen_kappa(const Contingency& t) {
  const long long n = t.yy + t.yn + t.ny + t.nn;
  if (n == 0) throw DataError("kappa over an empty label set");
  const long long agree = t.yy + t.nn;
  const long long s = (t.yy + t.yn) * (t.yy + t.ny) + (t.ny + t.nn) * (t.yn + t.nn);
  const long long num = n * agree - s;
  const long long den = n * n - s;
  if (den == 0) {
    if (agree == n) return 1.0;
    throw DataError("kappa undefined: chance agreement is 1 but observed agreement is not");
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double cohen_kappa(std::span<const RubricLabel> a, std::span<const RubricLabel> b, Dimension d) {
  return cohen_kappa(contingency(a, b, d));
}

AgreementReport agreement(std::span<const RubricLabel> labels) {
  std::map<std::string, std::vector<RubricLabel>> by_annotator;
  for (const auto& l : labels) by_annotator[l.annotator_id].push_back(l);
  if (by_annotator.size() < 2) throw DataError("agreement needs labels from at least two annotators");
  // Samples labeled by everyone.
  std::map<std::string, std::size_t> coverage;
  for (const auto& [annotator, ls] : by_annotator) {
    for (const auto& l : ls) ++coverage[l.sample_id];
  }
  std::set<std::string> common;
  for (const auto& [id, c] : coverage) {
    if (c == by_annotator.size()) common.insert(id);
  }
  if (common.empty()) throw DataError("no sample was labeled by every annotator");
  if (common.size() != coverage.size()) {
    log::warn("agreement uses the " + std::to_string(common.size()) + " samples labeled by every annotator (of " +
              std::to_string(coverage.size()) + ")");
  }
  AgreementReport report;
  for (auto& [annotator, ls] : by_annotator) {
    report.annotators.push_back(annotator);
    std::erase_if(ls, [&](const RubricLabel& l) { return common.count(l.sample_id) == 0; });
  }
  for (std::size_t i = 0; i < report.annotators.size(); ++i) {
    for (std::size_t j = i + 1; j < report.annotators.size(); ++j) {
      PairwiseKappa p{report.annotators[i], report.annotators[j], {}};
      for (auto d : kDimensions) {
        p.kappa[d] = cohen_kappa(by_annotator[p.annotator_a], by_annotator[p.annotator_b], d);
      }
      report.pairs.push_back(p);
    }
  }
  for (auto d : kDimensions) {
    double sum = 0;
    for (const auto& p : report.pairs) sum += p.kappa.at(d);
    report.mean[d] = sum / static_cast<double>(report.pairs.size());
  }
  return report;
}

std::vector<RubricRow> aggregate_rubric(std::span<const RubricLabel> labels, std::span<const Sample> samples) {
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id[s.sample_id] = &s;
  struct PerSample {
    double sums[3] = {0, 0, 0};
    std::size_t n = 0;
  };
  std::map<std::string, PerSample> per_sample;
  for (const auto& l : labels) {
    if (by_id.find(l.sample_id) == by_id.end()) throw DataError("label for unknown sample \"" + l.sample_id + "\"");
    auto& p = per_sample[l.sample_id];
    for (int d = 0; d < 3; ++d) p.sums[d] += l.get(kDimensions[d]) ? 1.0 : 0.0;
    ++p.n;
  }
  std::vector<RubricRow> rows;
  for (const auto& s : samples) {
    const auto it = per_sample.find(s.sample_id);
    if (it == per_sample.end()) continue;
    auto row = std::find_if(rows.begin(), rows.end(), [&](const RubricRow& r) {
      return r.model == s.model && r.method == s.method && r.language == s.language;
    });
    if (row == rows.end()) {
      rows.push_back(RubricRow{s.model, s.method, s.language, 0, 0, 0, 0});
      row = rows.end() - 1;
    }
    const auto n = static_cast<double>(it->second.n);
    row->correct += it->second.sums[0] / n;
    row->diagnostic += it->second.sums[1] / n;
    row->positive += it->second.sums[2] / n;
    ++row->samples;
  }
  for (auto& r : rows) {
    const auto n = static_cast<double>(r.samples);
    r.correct /= n;
    r.diagnostic /= n;
    r.positive /= n;
  }
  return rows;
}

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_table2(std::span<const RubricRow> rows) {
  std::vector<std::pair<std::string, std::string>> systems;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.model, r.method);
    if (std::find(systems.begin(), systems.end(), key) == systems.end()) systems.push_back(key);
  }
  std::size_t mw = 5, aw = 6;
  for (const auto& [m, a] : systems) {
    mw = std::max(mw, m.size());
    aw = std::max(aw, a.size());
  }
  const char* kCols[] = {"Correct", "Diagnostic", "Positive"};
  std::ostringstream out;
  std::string group_line = pad("", mw) + " | " + pad("", aw);
  std::string header = pad("Model", mw) + " | " + pad("Method", aw);
  for (const char* lang : {"Java", "Python"}) {
    group_line += " | " + pad(lang, 3 * 11 + 2);
    header += " |";
    for (const char* c : kCols) header += " " + pad(c, 11);
  }
  out << group_line << "\n" << header << "\n" << std::string(header.size(), '-') << "\n";
  for (const auto& [model, method] : systems) {
    std::string line = pad(model, mw) + " | " + pad(method, aw);
    for (const char* lang : {"java", "python"}) {
      const auto it = std::find_if(rows.begin(), rows.end(), [&](const RubricRow& r) {
        return r.model == model && r.method == method && r.language == lang;
      });
      line += " |";
      if (it == rows.end()) {
        for (int i = 0; i < 3; ++i) line += " " + pad("-", 11);
      } else {
        line += " " + pad(fixed2(it->correct), 11) + " " + pad(fixed2(it->diagnostic), 11) + " " +
                pad(fixed2(it->positive), 11);
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << "\n";
  }
  return out.str();
}

std::string rubric_csv(std::span<const RubricRow> rows) {
  std::ostringstream out;
  out << "model,method,language,samples,correct,diagnostic,positive\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f", r.samples, r.correct, r.diagnostic, r.positive);
    out << r.model << ',' << r.method << ',' << r.language << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace gapfinder::rater
