// SPDX-License-Identifier: Apache-2.0
#include "gapfinder/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "gapfinder/text.hpp"

namespace gapfinder::metrics {

namespace {

using Gram = std::u32string;

std::map<Gram, std::size_t> ngrams(const std::u32string& s, std::size_t n) {
  std::map<Gram, std::size_t> out;
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[s.substr(i, n)];
  return out;
}

std::size_t total(const std::map<Gram, std::size_t>& grams) {
  std::size_t t = 0;
  for (const auto& [g, c] : grams) t += c;
  return t;
}

}  // namespace

double chrf(std::string_view hypothesis, std::string_view reference, int max_n, double beta) {
  if (max_n < 1) throw ConfigError("chrF max_n must be >= 1");
  const auto h_cps = text::utf8_decode(text::normalize_whitespace(hypothesis));
  const auto r_cps = text::utf8_decode(text::normalize_whitespace(reference));
  const std::u32string h(h_cps.begin(), h_cps.end());
  const std::u32string r(r_cps.begin(), r_cps.end());
  if (r.empty()) return h.empty() ? 1.0 : 0.0;

  double p_sum = 0, r_sum = 0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    const auto rg = ngrams(r, static_cast<std::size_t>(n));
    const std::size_t r_total = total(rg);
    if (r_total == 0) continue;
    const auto hg = ngrams(h, static_cast<std::size_t>(n));
    const std::size_t h_total = total(hg);
    std::size_t match = 0;
    for (const auto& [g, c] : hg) {
      const auto it = rg.find(g);
      if (it != rg.end()) match += std::min(c, it->second);
    }
    p_sum += h_total == 0 ? 0.0 : static_cast<double>(match) / static_cast<double>(h_total);
    r_sum += static_cast<double>(match) / static_cast<double>(r_total);
    ++orders;
  }
  const double p = p_sum / orders;
  const double rr = r_sum / orders;
  if (p == 0.0 && rr == 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1 + b2) * p * rr / (b2 * p + rr);
}

std::vector<std::string> meteor_tokenize(std::string_view input) {
  const std::string s = text::to_lower(input);
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 || c >= 0x80) {
      word.push_back(ch);
    } else if (text::is_space(ch)) {
      flush();
    } else {
      flush();
      out.emplace_back(1, ch);
    }
  }
  flush();
  return out;
}

namespace {

struct SuffixRule {
  std::string_view suffix;
  std::string_view replacement;
};

// Longest suffixes first; the remaining stem must keep at least 3 bytes.
constexpr SuffixRule kSuffixRules[] = {
    {"ational", "ate"}, {"ization", "ize"}, {"fulness", "ful"}, {"iveness", "ive"}, {"ations", "ate"},
    {"ation", "ate"},   {"ingly", ""},      {"ments", ""},      {"ness", ""},       {"ment", ""},
    {"edly", ""},       {"ies", "y"},       {"ied", "y"},       {"ing", ""},        {"ers", ""},
    {"er", ""},         {"ed", ""},         {"es", ""},         {"ly", ""},         {"s", ""},
};

}  // namespace

std::string stem(std::string_view word) {
  for (const auto& rule : kSuffixRules) {
    if (word.size() < rule.suffix.size() + 3) continue;
    if (word.substr(word.size() - rule.suffix.size()) != rule.suffix) continue;
    if (rule.suffix == "s" && word.size() >= 2 && word[word.size() - 2] == 's') continue;  // "class"
    return std::string(word.substr(0, word.size() - rule.suffix.size())) + std::string(rule.replacement);
  }
  return std::string(word);
}

MeteorDetail meteor_detail(std::string_view hypothesis, std::string_view reference) {
  const auto h = meteor_tokenize(hypothesis);
  const auto r = meteor_tokenize(reference);
  MeteorDetail d;
  if (h.empty() || r.empty()) return d;

  std::vector<std::ptrdiff_t> link(h.size(), -1);
  std::vector<bool> used(r.size(), false);
  auto stage = [&](auto&& key) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (link[i] >= 0) continue;
      const auto hk = key(h[i]);
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (!used[j] && key(r[j]) == hk) {
          link[i] = static_cast<std::ptrdiff_t>(j);
          used[j] = true;
          break;
        }
      }
    }
  };
  stage([](const std::string& w) { return w; });
  stage([](const std::string& w) { return stem(w); });

  std::ptrdiff_t prev = -2;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (link[i] < 0) {
      prev = -2;
      continue;
    }
    ++d.matches;
    if (link[i] != prev + 1) ++d.chunks;
    prev = link[i];
  }
  if (d.matches == 0) return d;
  const auto m = static_cast<double>(d.matches);
  d.precision = m / static_cast<double>(h.size());
  d.recall = m / static_cast<double>(r.size());
  d.fmean = 10 * d.precision * d.recall / (d.recall + 9 * d.precision);
  d.penalty = 0.5 * std::pow(static_cast<double>(d.chunks) / m, 3);
  d.score = d.fmean * (1 - d.penalty);
  return d;
}

double meteor(std::string_view hypothesis, std::string_view reference) {
  return meteor_detail(hypothesis, reference).score;
}

namespace {

double norm(const Vector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DataError("embedding size mismatch");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DataError("zero embedding vector");
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

}  // namespace

PRF bertscore(std::span<const Vector> hyp, std::span<const Vector> ref) {
  if (hyp.empty() || ref.empty()) throw DataError("BERTScore needs at least one token on each side");
  std::vector<std::vector<double>> sim(hyp.size(), std::vector<double>(ref.size()));
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) sim[i][j] = cosine(hyp[i], ref[j]);
  }
  PRF out;
  for (std::size_t i = 0; i < hyp.size(); ++i) out.precision += *std::max_element(sim[i].begin(), sim[i].end());
  out.precision /= static_cast<double>(hyp.size());
  for (std::size_t j = 0; j < ref.size(); ++j) {
    double best = -1.0;
    for (std::size_t i = 0; i < hyp.size(); ++i) best = std::max(best, sim[i][j]);
    out.recall += best;
  }
  out.recall /= static_cast<double>(ref.size());
  const double denom = out.precision + out.recall;
  out.f1 = denom == 0.0 ? 0.0 : 2 * out.precision * out.recall / denom;
  return out;
}

double use_similarity(const Vector& hypothesis, const Vector& reference) { return cosine(hypothesis, reference); }

MetricScore score_pair(std::string_view generated, std::string_view gold, const EmbeddingProvider* provider) {
  MetricScore s;
  s.chrf = chrf(generated, gold);
  s.meteor = meteor(generated, gold);
  if (provider == nullptr) return s;
  s.use_sim = use_similarity(provider->sentence_embed(generated), provider->sentence_embed(gold));
  const auto ht = provider->token_embed(generated);
  const auto rt = provider->token_embed(gold);
  if (ht.empty() || rt.empty()) {
    s.bertscore_f1 = ht.empty() && rt.empty() ? 1.0 : 0.0;
  } else {
    std::vector<Vector> hv, rv;
    for (const auto& [tok, v] : ht) hv.push_back(v);
    for (const auto& [tok, v] : rt) rv.push_back(v);
    s.bertscore_f1 = bertscore(hv, rv).f1;
  }
  return s;
}

MetricReport evaluate_run(std::span<const FeedbackRecord> records, const EmbeddingProvider* provider,
                          unsigned threads) {
  std::vector<MetricScore> scores(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        scores[i] = score_pair(records[i].generated, records[i].gold, provider);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto n_workers = std::min<std::size_t>(threads, records.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  struct Acc {
    ReportRow row;
    double use_sum = 0, bert_sum = 0;
    std::size_t use_n = 0, bert_n = 0;
  };
  std::vector<Acc> groups;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto key = std::make_tuple(r.model, r.method, r.language);
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) {
      Acc a;
      a.row.model = r.model;
      a.row.method = r.method;
      a.row.language = r.language;
      groups.push_back(a);
    }
    Acc& a = groups[it->second];
    ++a.row.count;
    a.row.chrf += scores[i].chrf;
    a.row.meteor += scores[i].meteor;
    if (scores[i].use_sim) {
      a.use_sum += *scores[i].use_sim;
      ++a.use_n;
    }
    if (scores[i].bertscore_f1) {
      a.bert_sum += *scores[i].bertscore_f1;
      ++a.bert_n;
    }
  }
  MetricReport report;
  for (auto& a : groups) {
    const auto n = static_cast<double>(a.row.count);
    a.row.chrf /= n;
    a.row.meteor /= n;
    if (a.use_n == a.row.count) a.row.use_sim = a.use_sum / n;
    if (a.bert_n == a.row.count) a.row.bertscore_f1 = a.bert_sum / n;
    report.rows.push_back(a.row);
  }
  return report;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string report_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "model,method,language,n,chrf,meteor,use,bertscore\n";
  for (const auto& r : report.rows) {
    out << csv_field(r.model) << ',' << csv_field(r.method) << ',' << csv_field(r.language) << ',' << r.count << ','
        << fixed(r.chrf, 6) << ',' << fixed(r.meteor, 6) << ',' << (r.use_sim ? fixed(*r.use_sim, 6) : "") << ','
        << (r.bertscore_f1 ? fixed(*r.bertscore_f1, 6) : "") << '\n';
  }
  return out.str();
}

std::string render_table1(const MetricReport& report) {
  std::vector<std::pair<std::string, std::string>> systems;
  for (const auto& r : report.rows) {
    const auto key = std::make_pair(r.model, r.method);
    if (std::find(systems.begin(), systems.end(), key) == systems.end()) systems.push_back(key);
  }
  std::size_t mw = 5, aw = 8;
  for (const auto& [m, a] : systems) {
    mw = std::max(mw, m.size());
    aw = std::max(aw, a.size());
  }
  const char* kCols[] = {"chrF", "METEOR", "USE", "BERTScr"};
  auto cell = [](const std::optional<double>& v) { return v ? fixed(*v, 2) : std::string("n/a"); };

  std::ostringstream out;
  std::string group_line = pad("", mw) + " | " + pad("", aw);
  std::string header = pad("Model", mw) + " | " + pad("Approach", aw);
  for (const char* lang : {"Python", "Java"}) {
    group_line += " | " + pad(lang, 4 * 8 + 3);
    header += " |";
    for (const char* c : kCols) header += " " + pad(c, 8);
  }
  out << group_line << "\n" << header << "\n" << std::string(header.size(), '-') << "\n";
  for (const auto& [model, method] : systems) {
    std::string line = pad(model, mw) + " | " + pad(method, aw);
    for (const char* lang : {"python", "java"}) {
      const auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](const ReportRow& r) {
        return r.model == model && r.method == method && r.language == lang;
      });
      line += " |";
      if (it == report.rows.end()) {
        for (int i = 0; i < 4; ++i) line += " " + pad("-", 8);
        continue;
      }
      line += " " + pad(fixed(it->chrf, 2), 8) + " " + pad(fixed(it->meteor, 2), 8) + " " + pad(cell(it->use_sim), 8) +
              " " + pad(cell(it->bertscore_f1), 8);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << "\n";
  }
  return out.str();
}

}  // namespace gapfinder::metrics
