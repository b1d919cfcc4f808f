#pragma once

// File formats: CSV corpora, model and ledger JSON, detection reports.
// Positions and recipients are 1-based in every file.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "corrfp/core.hpp"
#include "corrfp/correlation.hpp"
#include "corrfp/detection.hpp"

namespace corrfp::io {

using nlohmann::json;

inline constexpr const char* kLedgerSchema = "corrfp.ledger/1";
inline constexpr const char* kModelSchema = "corrfp.model/1";
inline constexpr const char* kReportSchema = "corrfp.detection/1";

class FormatError : public Error {
 public:
  using Error::Error;
};

// ---- CSV -------------------------------------------------------------------

inline std::vector<State> parse_csv_row(std::string_view line, std::size_t line_no) {
  std::vector<State> row;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find(',', start);
    if (end == std::string_view::npos) end = line.size();
    std::string_view cell = line.substr(start, end - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
      cell.remove_suffix(1);
    State v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
      throw FormatError("line " + std::to_string(line_no) + ": bad state '" + std::string(cell) + "'");
    row.push_back(v);
    start = end + 1;
  }
  return row;
}

/// Reads one sequence per non-empty line. With m = 0 the alphabet size is
/// inferred as max state + 1 (at least 2). -1 is accepted as a removed point.
inline std::vector<Sequence> read_corpus(std::istream& in, int m = 0) {
  std::vector<std::vector<State>> rows;
  std::string line;
  std::size_t line_no = 0;
  State max_state = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(parse_csv_row(line, line_no));
    if (rows.size() > 1 && rows.back().size() != rows.front().size())
      throw FormatError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(rows.front().size()) + " values, got " +
                        std::to_string(rows.back().size()));
    for (State v : rows.back()) max_state = std::max(max_state, v);
  }
  if (rows.empty()) throw FormatError("corpus is empty");
  const Alphabet alphabet(m > 0 ? m : std::max(2, max_state + 1));
  std::vector<Sequence> out;
  out.reserve(rows.size());
  for (auto& r : rows) {
    out.emplace_back(alphabet, std::move(r));
    out.back().validate(/*allow_removed=*/true);
  }
  return out;
}

inline std::vector<Sequence> read_corpus_file(const std::string& path, int m = 0) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path);
  return read_corpus(in, m);
}

/// Row `row` (1-based) of a corpus file.
inline Sequence read_sequence_file(const std::string& path, std::size_t row = 1, int m = 0) {
  std::vector<Sequence> corpus = read_corpus_file(path, m);
  if (row < 1 || row > corpus.size())
    throw NotFoundError(path + " has no row " + std::to_string(row));
  return corpus[row - 1];
}

inline void write_corpus(std::ostream& out, std::span<const Sequence> corpus) {
  for (const Sequence& s : corpus) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j) out << ',';
      out << s[j];
    }
    out << '\n';
  }
}

inline void write_corpus_file(const std::string& path, std::span<const Sequence> corpus) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_corpus(out, corpus);
  if (!out) throw Error("write failed: " + path);
}

// ---- JSON helpers ----------------------------------------------------------

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path);
}

namespace detail {

inline void expect_schema(const json& j, const char* schema) {
  if (!j.is_object() || !j.contains("schema") || j.at("schema") != schema)
    throw FormatError(std::string("expected schema ") + schema);
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(e.what());
  }
}

}  // namespace detail

// ---- Model -----------------------------------------------------------------

inline json model_to_json(const CorrelationModel& model) {
  return json{{"schema", kModelSchema},
              {"l", model.length()},
              {"m", model.states()},
              {"marginal_first", std::vector<double>(model.marginal_first().begin(),
                                                     model.marginal_first().end())},
              {"cond", std::vector<double>(model.raw().begin(), model.raw().end())}};
}

inline CorrelationModel model_from_json(const json& j) {
  detail::expect_schema(j, kModelSchema);
  return detail::guarded([&] {
    return CorrelationModel(j.at("l").get<std::size_t>(), j.at("m").get<int>(),
                            j.at("marginal_first").get<std::vector<double>>(),
                            j.at("cond").get<std::vector<double>>());
  });
}

// ---- Ledger ----------------------------------------------------------------

inline json ledger_to_json(const SharingLedger& ledger) {
  json records = json::array();
  for (const FingerprintRecord& rec : ledger.records) {
    std::vector<std::size_t> positions;
    for (Position p : rec.positions) positions.push_back(p + 1);
    json r{{"sp_index", rec.sp_index + 1},
           {"seed", rec.seed},
           {"positions", positions},
           {"values", rec.values}};
    r["codeword_index"] = rec.codeword_index ? json(*rec.codeword_index) : json(nullptr);
    records.push_back(std::move(r));
  }
  json j{{"schema", kLedgerSchema},
         {"m", ledger.original.alphabet.size()},
         {"original", ledger.original.values},
         {"params",
          {{"p", ledger.params.p}, {"theta", ledger.params.theta}, {"tau", ledger.params.tau}}},
         {"records", std::move(records)}};
  if (ledger.layout) {
    std::vector<std::size_t> positions;
    for (Position p : ledger.layout->positions) positions.push_back(p + 1);
    j["layout"] = {{"c", ledger.layout->config.c},
                   {"r", ledger.layout->config.r},
                   {"positions", positions},
                   {"fp_values", ledger.layout->fp_values},
                   {"orig_values", ledger.layout->orig_values}};
  } else {
    j["layout"] = nullptr;
  }
  std::vector<std::size_t> overlap;
  for (Position p : ledger.overlap) overlap.push_back(p + 1);
  j["overlap"] = overlap;
  return j;
}

namespace detail {

inline std::vector<Position> from_one_based(const std::vector<std::size_t>& v, std::size_t l,
                                            const char* what) {
  std::vector<Position> out;
  out.reserve(v.size());
  for (std::size_t p : v) {
    if (p < 1 || p > l) throw FormatError(std::string(what) + ": position " + std::to_string(p) +
                                          " outside 1.." + std::to_string(l));
    out.push_back(p - 1);
  }
  return out;
}

}  // namespace detail

inline SharingLedger ledger_from_json(const json& j) {
  detail::expect_schema(j, kLedgerSchema);
  return detail::guarded([&] {
    SharingLedger ledger;
    ledger.original = Sequence(Alphabet(j.at("m").get<int>()), j.at("original").get<std::vector<State>>());
    ledger.original.validate();
    const std::size_t l = ledger.original.size();
    const json& params = j.at("params");
    ledger.params.p = params.at("p").get<double>();
    ledger.params.theta = params.at("theta").get<double>();
    ledger.params.tau = params.at("tau").get<double>();
    for (const json& r : j.at("records")) {
      FingerprintRecord rec;
      const auto sp = r.at("sp_index").get<std::size_t>();
      if (sp != ledger.records.size() + 1)
        throw FormatError("records must be listed in recipient order 1..n");
      rec.sp_index = sp - 1;
      rec.seed = r.at("seed").get<std::uint64_t>();
      rec.positions = detail::from_one_based(r.at("positions").get<std::vector<std::size_t>>(), l,
                                             "record");
      rec.values = r.at("values").get<std::vector<State>>();
      if (rec.values.size() != rec.positions.size())
        throw FormatError("record " + std::to_string(sp) + ": positions/values length mismatch");
      for (std::size_t k = 0; k < rec.positions.size(); ++k) {
        if (k > 0 && rec.positions[k] <= rec.positions[k - 1])
          throw FormatError("record " + std::to_string(sp) + ": positions not increasing");
        if (!ledger.original.alphabet.contains(rec.values[k]) ||
            rec.values[k] == ledger.original[rec.positions[k]])
          throw FormatError("record " + std::to_string(sp) + ": invalid fingerprint value");
      }
      if (r.contains("codeword_index") && !r.at("codeword_index").is_null())
        rec.codeword_index = r.at("codeword_index").get<int>();
      ledger.records.push_back(std::move(rec));
    }
    if (j.contains("layout") && !j.at("layout").is_null()) {
      const json& lj = j.at("layout");
      CodeLayout layout;
      layout.config = {lj.at("c").get<int>(), lj.at("r").get<int>()};
      layout.config.validate();
      layout.positions =
          detail::from_one_based(lj.at("positions").get<std::vector<std::size_t>>(), l, "layout");
      layout.fp_values = lj.at("fp_values").get<std::vector<State>>();
      layout.orig_values = lj.at("orig_values").get<std::vector<State>>();
      if (layout.positions.size() != layout.config.f1() ||
          layout.fp_values.size() != layout.config.f1() ||
          layout.orig_values.size() != layout.config.f1())
        throw FormatError("layout must hold (c-1)*r entries");
      ledger.layout = std::move(layout);
    }
    if (j.contains("overlap"))
      ledger.overlap =
          detail::from_one_based(j.at("overlap").get<std::vector<std::size_t>>(), l, "overlap");
    return ledger;
  });
}

inline void write_ledger_file(const std::string& path, const SharingLedger& ledger) {
  write_json_file(path, ledger_to_json(ledger));
}

inline SharingLedger read_ledger_file(const std::string& path) {
  return ledger_from_json(read_json_file(path));
}

inline void write_model_file(const std::string& path, const CorrelationModel& model) {
  write_json_file(path, model_to_json(model));
}

inline CorrelationModel read_model_file(const std::string& path) {
  return model_from_json(read_json_file(path));
}

// ---- Detection report ------------------------------------------------------

inline json report_to_json(const DetectionResult& r) {
  std::vector<std::size_t> suspects;
  for (std::size_t sp : r.suspects) suspects.push_back(sp + 1);
  json evidence = json::array();
  for (const SuspectEvidence& e : r.block_evidence) {
    json item{{"sp", e.sp + 1}, {"codeword", e.codeword}, {"passed", e.passed}};
    item["block"] = e.block ? json(to_string(*e.block)) : json(nullptr);
    item["previous_block"] = e.previous_block ? json(to_string(*e.previous_block)) : json(nullptr);
    evidence.push_back(std::move(item));
  }
  return json{{"schema", kReportSchema},
              {"method", to_string(r.method)},
              {"accused", r.accused + 1},
              {"scores", r.scores},
              {"suspects", suspects},
              {"block_evidence", std::move(evidence)},
              {"fallback", r.fallback}};
}

}  // namespace corrfp::io
