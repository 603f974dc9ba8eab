#include "intent_rnnt/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/subword.hpp"

namespace intent_rnnt {

using nlohmann::json;

EditCounts edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditCounts counts;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++counts.substitutions;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

std::vector<std::string> scoring_words(std::string_view text) { return split_words(normalize_text(text)); }

std::vector<RefRecord> references(std::span<const Utterance> utts, std::span<const std::string> intent_names) {
  std::vector<RefRecord> refs;
  refs.reserve(utts.size());
  for (const auto& u : utts) {
    const auto label = u.annotation();
    refs.push_back({u.id, u.transcript, label ? intent_names[*label] : std::string(kUnannotatedGroup)});
  }
  return refs;
}

double WerCounts::wer() const {
  if (ref_words == 0) throw ArgumentError("WER needs at least one reference word");
  return static_cast<double>(edits.total()) / static_cast<double>(ref_words);
}

namespace {

std::unordered_map<std::string, const HypRecord*> index_hyps(std::span<const HypRecord> hyps) {
  std::unordered_map<std::string, const HypRecord*> index;
  for (const auto& h : hyps) index[h.id] = &h;
  return index;
}

WerCounts score_one(const RefRecord& ref, const std::unordered_map<std::string, const HypRecord*>& index) {
  const auto it = index.find(ref.id);
  if (it == index.end()) throw EvaluationError("no hypothesis for utterance " + ref.id);
  const auto r = scoring_words(ref.text);
  const auto h = scoring_words(it->second->text);
  return {edit_distance(r, h), r.size(), 1};
}

void add(WerCounts& acc, const WerCounts& x) {
  acc.edits.substitutions += x.edits.substitutions;
  acc.edits.insertions += x.edits.insertions;
  acc.edits.deletions += x.edits.deletions;
  acc.ref_words += x.ref_words;
  acc.utterances += x.utterances;
}

}  // namespace

WerCounts score(std::span<const RefRecord> refs, std::span<const HypRecord> hyps) {
  const auto index = index_hyps(hyps);
  WerCounts total;
  for (const auto& r : refs) add(total, score_one(r, index));
  return total;
}

double wer(std::span<const RefRecord> refs, std::span<const HypRecord> hyps) { return score(refs, hyps).wer(); }

double relative_werr(double baseline_wer, double new_wer) {
  if (!(baseline_wer > 0.0)) throw ArgumentError("relative WERR needs a positive baseline WER");
  return 100.0 * (baseline_wer - new_wer) / baseline_wer;
}

std::vector<IntentRow> per_intent_breakdown(std::span<const RefRecord> refs, std::span<const HypRecord> hyps) {
  const auto index = index_hyps(hyps);
  std::map<std::string, WerCounts> groups;
  for (const auto& r : refs) add(groups[r.group], score_one(r, index));
  std::vector<IntentRow> rows;
  for (const auto& [name, c] : groups) {
    IntentRow row;
    row.group = name;
    row.utterances = c.utterances;
    row.ref_words = c.ref_words;
    row.errors = c.edits.total();
    row.wer = c.ref_words ? c.wer() : 0.0;
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const IntentRow& a, const IntentRow& b) { return a.utterances > b.utterances; });
  return rows;
}

EvalReport evaluate(std::span<const RefRecord> refs, std::span<const HypRecord> hyps, std::string system,
                    bool streamable, const EvalReport* baseline) {
  EvalReport report;
  report.system = std::move(system);
  report.streamable = streamable;
  report.overall = score(refs, hyps);
  report.rows = per_intent_breakdown(refs, hyps);
  if (baseline) {
    report.baseline_system = baseline->system;
    report.werr = relative_werr(baseline->overall.wer(), report.overall.wer());
    for (auto& row : report.rows) {
      const auto it = std::find_if(baseline->rows.begin(), baseline->rows.end(),
                                   [&](const IntentRow& b) { return b.group == row.group; });
      if (it != baseline->rows.end() && it->wer > 0.0) row.werr = relative_werr(it->wer, row.wer);
    }
  }
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::string EvalReport::to_tsv() const {
  std::ostringstream out;
  out << "group\tutterances\tref_words\terrors\twer\twerr_pct\n";
  auto werr_cell = [](const std::optional<double>& w) { return w ? fixed(*w, 4) : std::string("NA"); };
  out << "ALL\t" << overall.utterances << '\t' << overall.ref_words << '\t' << overall.edits.total() << '\t'
      << fixed(overall.wer(), 6) << '\t' << werr_cell(werr) << '\n';
  for (const auto& r : rows)
    out << r.group << '\t' << r.utterances << '\t' << r.ref_words << '\t' << r.errors << '\t' << fixed(r.wer, 6)
        << '\t' << werr_cell(r.werr) << '\n';
  return out.str();
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << "system: " << system << " (streamable: " << (streamable ? "yes" : "no") << ")\n";
  if (werr) out << "relative WERR vs " << baseline_system << ": " << fixed(*werr, 2) << "%\n";
  out << "overall WER: " << fixed(100.0 * overall.wer(), 2) << "% (" << overall.edits.total() << " errors / "
      << overall.ref_words << " words; S=" << overall.edits.substitutions << " I=" << overall.edits.insertions
      << " D=" << overall.edits.deletions << ")\n\n";
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.group.size());
  out << std::left << std::setw(static_cast<int>(width)) << "Intent" << "  " << std::right << std::setw(6) << "#utt"
      << "  " << std::setw(8) << "WER(%)" << "  " << std::setw(9) << "WERR(%)" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.group << "  " << std::right << std::setw(6)
        << r.utterances << "  " << std::setw(8) << fixed(100.0 * r.wer, 2) << "  " << std::setw(9)
        << (r.werr ? fixed(*r.werr, 2) : std::string("-")) << '\n';
  }
  return out.str();
}

std::string EvalReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"group", r.group},
                         {"utterances", r.utterances},
                         {"ref_words", r.ref_words},
                         {"errors", r.errors},
                         {"wer", r.wer},
                         {"werr", r.werr ? json(*r.werr) : json(nullptr)}});
  }
  json j{{"system", system},
         {"streamable", streamable},
         {"overall",
          {{"substitutions", overall.edits.substitutions},
           {"insertions", overall.edits.insertions},
           {"deletions", overall.edits.deletions},
           {"ref_words", overall.ref_words},
           {"utterances", overall.utterances},
           {"wer", overall.wer()}}},
         {"rows", rows_json},
         {"baseline_system", baseline_system},
         {"werr", werr ? json(*werr) : json(nullptr)}};
  return j.dump(2);
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.system = j.at("system").get<std::string>();
    r.streamable = j.at("streamable").get<bool>();
    const json& o = j.at("overall");
    r.overall.edits = {o.at("substitutions").get<std::size_t>(), o.at("insertions").get<std::size_t>(),
                       o.at("deletions").get<std::size_t>()};
    r.overall.ref_words = o.at("ref_words").get<std::size_t>();
    r.overall.utterances = o.at("utterances").get<std::size_t>();
    for (const json& row : j.at("rows")) {
      IntentRow ir;
      ir.group = row.at("group").get<std::string>();
      ir.utterances = row.at("utterances").get<std::size_t>();
      ir.ref_words = row.at("ref_words").get<std::size_t>();
      ir.errors = row.at("errors").get<std::size_t>();
      ir.wer = row.at("wer").get<double>();
      if (!row.at("werr").is_null()) ir.werr = row.at("werr").get<double>();
      r.rows.push_back(ir);
    }
    r.baseline_system = j.value("baseline_system", std::string());
    if (j.contains("werr") && !j.at("werr").is_null()) r.werr = j.at("werr").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("evaluation report: ") + e.what());
  }
}

void write_hypotheses(const std::filesystem::path& path, std::span<const HypRecord> hyps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  for (const auto& h : hyps) {
    out << h.id << '\t' << h.text << '\t' << h.log_prob << '\t';
    for (std::size_t i = 0; i < h.frames.size(); ++i) out << (i ? "," : "") << h.frames[i];
    out << '\n';
  }
}

std::vector<HypRecord> read_hypotheses(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open hypothesis file '" + path.string() + "'");
  std::vector<HypRecord> hyps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find('\t', start)) != std::string::npos; start = pos + 1)
      fields.push_back(line.substr(start, pos - start));
    fields.push_back(line.substr(start));
    const std::string where = path.string() + " line " + std::to_string(line_no) + ": ";
    if (fields.size() != 4) throw ParseError(where + "expected 4 tab-separated fields");
    HypRecord h;
    h.id = fields[0];
    h.text = fields[1];
    try {
      h.log_prob = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw ParseError(where + "bad log-probability");
    }
    std::string_view frames = fields[3];
    while (!frames.empty()) {
      const auto comma = frames.find(',');
      const auto item = frames.substr(0, comma);
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size()) throw ParseError(where + "bad frame index");
      h.frames.push_back(v);
      frames = comma == std::string_view::npos ? std::string_view() : frames.substr(comma + 1);
    }
    hyps.push_back(std::move(h));
  }
  return hyps;
}

}  // namespace intent_rnnt
