#pragma once

// Deterministic Monte Carlo experiment runner.
//
// Seeding: every (cell, trial) pair owns trial_seed = derive_seed(master,
// {cell, trial}); sharing, coalition choice and the attack draw from child
// streams of it. The individual whose data is shared in trial t depends on
// (master, t) only, so every cell sees the same individuals, and the
// synthetic model depends on the corpus seed and (l, m) only. Results are
// therefore independent of thread count and of how many trials follow.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "corrfp/attacks.hpp"
#include "corrfp/boneh_shaw.hpp"
#include "corrfp/core.hpp"
#include "corrfp/correlation.hpp"
#include "corrfp/detection.hpp"
#include "corrfp/fingerprint.hpp"
#include "corrfp/io.hpp"
#include "corrfp/metrics.hpp"
#include "corrfp/privacy.hpp"
#include "corrfp/rng.hpp"

namespace corrfp::harness {

using nlohmann::json;

enum class Scheme { kClean, kNaive, kAlg1, kBonehShaw, kStandalone, kHybrid, kRR };
enum class AttackKind { kNone, kFlip, kSubset, kCorrelation, kMajority, kPMajority };
enum class Detector { kAuto, kNone, kSimilarity, kProbabilistic, kCombined, kStandalone };

namespace detail {

template <typename E>
struct Names {
  std::vector<std::pair<E, const char*>> items;

  const char* name(E e) const {
    for (auto& [k, v] : items)
      if (k == e) return v;
    return "?";
  }
  E parse(const std::string& s, const char* what) const {
    for (auto& [k, v] : items)
      if (s == v) return k;
    std::string all;
    for (auto& [k, v] : items) all += std::string(all.empty() ? "" : ", ") + v;
    throw ConfigurationError(std::string("unknown ") + what + " '" + s + "' (expected " + all + ")");
  }
};

inline const Names<Scheme>& scheme_names() {
  static const Names<Scheme> n{{{Scheme::kClean, "clean"},
                                {Scheme::kNaive, "naive"},
                                {Scheme::kAlg1, "alg1"},
                                {Scheme::kBonehShaw, "bs"},
                                {Scheme::kStandalone, "bs-standalone"},
                                {Scheme::kHybrid, "hybrid"},
                                {Scheme::kRR, "rr"}}};
  return n;
}

inline const Names<AttackKind>& attack_names() {
  static const Names<AttackKind> n{{{AttackKind::kNone, "none"},
                                    {AttackKind::kFlip, "flip"},
                                    {AttackKind::kSubset, "subset"},
                                    {AttackKind::kCorrelation, "corr"},
                                    {AttackKind::kMajority, "majority"},
                                    {AttackKind::kPMajority, "pmajority"}}};
  return n;
}

inline const Names<Detector>& detector_names() {
  static const Names<Detector> n{{{Detector::kAuto, "auto"},
                                  {Detector::kNone, "none"},
                                  {Detector::kSimilarity, "sim"},
                                  {Detector::kProbabilistic, "prob"},
                                  {Detector::kCombined, "combined"},
                                  {Detector::kStandalone, "bs-standalone"}}};
  return n;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace detail

inline const char* to_string(Scheme s) { return detail::scheme_names().name(s); }
inline const char* to_string(AttackKind a) { return detail::attack_names().name(a); }
inline const char* to_string(Detector d) { return detail::detector_names().name(d); }

/// One grid cell. Keys in spec files use the names in `CellParams::keys()`.
struct CellParams {
  Scheme scheme = Scheme::kBonehShaw;
  std::size_t l = 1000;
  int m = 3;
  double p = 0.1;
  double theta = 0.5;
  double tau = 0.05;
  std::size_t sps = 100;
  int bs_c = 10;
  int bs_r = 0;  // 0: auto
  double lambda = 0.0;
  double rr_keep = 0.9;
  AttackKind attack = AttackKind::kNone;
  double p_f = 0.0;
  double p_s = 0.0;
  double tau_c = 0.0;
  double p_e = -1.0;  // negative: use p
  std::size_t colluders = 1;
  Detector detector = Detector::kAuto;

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{
        "scheme", "l",      "m",   "p",   "theta", "tau",       "sps",     "bs_c",    "bs_r",
        "lambda", "rr_keep", "attack", "p_f", "p_s", "tau_c", "p_e", "colluders", "detector"};
    return k;
  }

  void set(const std::string& key, const json& v) {
    try {
      if (key == "scheme") scheme = detail::scheme_names().parse(v.get<std::string>(), "scheme");
      else if (key == "l") l = v.get<std::size_t>();
      else if (key == "m") m = v.get<int>();
      else if (key == "p") p = v.get<double>();
      else if (key == "theta") theta = v.get<double>();
      else if (key == "tau") tau = v.get<double>();
      else if (key == "sps") sps = v.get<std::size_t>();
      else if (key == "bs_c") bs_c = v.get<int>();
      else if (key == "bs_r") bs_r = v.is_string() && v.get<std::string>() == "auto" ? 0 : v.get<int>();
      else if (key == "lambda") lambda = v.get<double>();
      else if (key == "rr_keep") rr_keep = v.get<double>();
      else if (key == "rr_epsilon") rr_keep = keep_prob_from_epsilon(v.get<double>(), m);
      else if (key == "attack") attack = detail::attack_names().parse(v.get<std::string>(), "attack");
      else if (key == "p_f") p_f = v.get<double>();
      else if (key == "p_s") p_s = v.get<double>();
      else if (key == "tau_c") tau_c = v.get<double>();
      else if (key == "p_e") p_e = v.get<double>();
      else if (key == "colluders") colluders = v.get<std::size_t>();
      else if (key == "detector") detector = detail::detector_names().parse(v.get<std::string>(), "detector");
      else throw ConfigurationError("unknown cell parameter '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigurationError("cell parameter '" + key + "': " + e.what());
    }
  }

  std::string get(const std::string& key) const {
    if (key == "scheme") return to_string(scheme);
    if (key == "l") return std::to_string(l);
    if (key == "m") return std::to_string(m);
    if (key == "p") return detail::format_double(p);
    if (key == "theta") return detail::format_double(theta);
    if (key == "tau") return detail::format_double(tau);
    if (key == "sps") return std::to_string(sps);
    if (key == "bs_c") return std::to_string(bs_c);
    if (key == "bs_r") return bs_r == 0 ? "auto" : std::to_string(bs_r);
    if (key == "lambda") return detail::format_double(lambda);
    if (key == "rr_keep") return detail::format_double(rr_keep);
    if (key == "rr_epsilon") return detail::format_double(epsilon_from_keep_prob(rr_keep, m));
    if (key == "attack") return to_string(attack);
    if (key == "p_f") return detail::format_double(p_f);
    if (key == "p_s") return detail::format_double(p_s);
    if (key == "tau_c") return detail::format_double(tau_c);
    if (key == "p_e") return detail::format_double(effective_p_e());
    if (key == "colluders") return std::to_string(colluders);
    if (key == "detector") return to_string(detector);
    throw ConfigurationError("unknown cell parameter '" + key + "'");
  }

  double effective_p_e() const { return p_e < 0.0 ? p : p_e; }

  FingerprintParams params() const { return {p, theta, tau}; }

  void validate() const {
    params().validate();
    if (l < 2) throw ConfigurationError("l must be >= 2");
    if (m < 2) throw ConfigurationError("m must be >= 2");
    if (sps < 1) throw ConfigurationError("sps must be >= 1");
    if (colluders < 1 || colluders > sps)
      throw ConfigurationError("colluders must lie in 1..sps");
    const bool collusion = attack == AttackKind::kMajority || attack == AttackKind::kPMajority;
    if (collusion && colluders < 2) throw ConfigurationError(std::string(to_string(attack)) +
                                                             " needs colluders >= 2");
    if (!collusion && colluders != 1)
      throw ConfigurationError(std::string(to_string(attack)) + " uses a single copy; set colluders = 1");
    AttackConfig{p_f, p_s, tau_c, effective_p_e(), {}}.validate(sps);
    if (attack == AttackKind::kPMajority && !(effective_p_e() > 0.0 && effective_p_e() < 1.0))
      throw ConfigurationError("p_e must lie in (0,1)");
    if (scheme == Scheme::kBonehShaw || scheme == Scheme::kStandalone || scheme == Scheme::kHybrid)
      BSConfig{bs_c, std::max(bs_r, 1)}.validate();
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigurationError("lambda must lie in [0,1]");
    if (scheme == Scheme::kRR) epsilon_from_keep_prob(rr_keep, m);
    if ((detector == Detector::kCombined || detector == Detector::kStandalone) &&
        !(scheme == Scheme::kBonehShaw || scheme == Scheme::kStandalone || scheme == Scheme::kHybrid))
      throw ConfigurationError(std::string(to_string(detector)) + " detection needs a Boneh-Shaw scheme");
  }
};

struct CorpusSource {
  // Synthetic when `file` is empty.
  SyntheticModelSpec synthetic;
  std::string file;
  double smoothing = 1.0;
};

struct ExperimentSpec {
  std::string name = "experiment";
  CorpusSource corpus;
  CellParams base;
  std::vector<CellParams> cells;
  std::vector<std::string> index;  // parameters that vary across cells
  std::size_t trials = 200;
  std::uint64_t master_seed = 1;
  std::string output = ".";

  void validate() const {
    if (trials < 1) throw ConfigurationError("trials must be >= 1");
    if (cells.empty()) throw ConfigurationError("experiment '" + name + "' has an empty grid");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        cells[i].validate();
      } catch (const Error& e) {
        throw ConfigurationError("cell " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
};

/// Spec file layout:
///   {"name", "trials", "master_seed", "output",
///    "corpus": {"synthetic": {"strong_fraction", "strong_leak", "seed"}} |
///              {"file": path, "smoothing": k},
///    "base": {cell parameters},
///    "grid": [{overrides}, ...],       // explicit cells
///    "sweep": {"key": [values], ...}}  // cartesian product applied to each grid cell
/// At least one of grid/sweep must produce a cell.
inline ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigurationError("experiment spec must be a JSON object");
  ExperimentSpec spec;
  try {
    spec.name = j.value("name", spec.name);
    spec.trials = j.value("trials", spec.trials);
    spec.master_seed = j.value("master_seed", spec.master_seed);
    spec.output = j.value("output", spec.output);
    if (j.contains("corpus")) {
      const json& c = j.at("corpus");
      if (c.contains("file")) {
        spec.corpus.file = c.at("file").get<std::string>();
        spec.corpus.smoothing = c.value("smoothing", spec.corpus.smoothing);
      }
      if (c.contains("synthetic")) {
        const json& s = c.at("synthetic");
        spec.corpus.synthetic.strong_fraction = s.value("strong_fraction", spec.corpus.synthetic.strong_fraction);
        spec.corpus.synthetic.strong_leak = s.value("strong_leak", spec.corpus.synthetic.strong_leak);
        spec.corpus.synthetic.seed = s.value("seed", spec.corpus.synthetic.seed);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("experiment spec: ") + e.what());
  }
  if (j.contains("base"))
    for (auto& [k, v] : j.at("base").items()) spec.base.set(k, v);

  std::vector<json> grid;
  if (j.contains("grid")) {
    if (!j.at("grid").is_array()) throw ConfigurationError("grid must be an array");
    for (const json& g : j.at("grid")) grid.push_back(g);
    if (grid.empty()) throw ConfigurationError("experiment '" + spec.name + "' has an empty grid");
  } else {
    grid.push_back(json::object());
  }
  std::vector<std::pair<std::string, std::vector<json>>> sweep;
  if (j.contains("sweep")) {
    for (auto& [k, v] : j.at("sweep").items()) {
      if (!v.is_array() || v.empty()) throw ConfigurationError("sweep '" + k + "' must be a non-empty array");
      sweep.emplace_back(k, std::vector<json>(v.begin(), v.end()));
    }
  }
  if (!j.contains("grid") && sweep.empty())
    throw ConfigurationError("experiment '" + spec.name + "' has an empty grid");

  std::set<std::string> varying;
  for (const json& g : grid) {
    std::vector<std::size_t> at(sweep.size(), 0);
    while (true) {
      CellParams cell = spec.base;
      for (auto& [k, v] : g.items()) {
        cell.set(k, v);
        varying.insert(k);
      }
      for (std::size_t s = 0; s < sweep.size(); ++s) {
        cell.set(sweep[s].first, sweep[s].second[at[s]]);
        varying.insert(sweep[s].first);
      }
      spec.cells.push_back(cell);
      bool done = true;
      for (std::size_t s = sweep.size(); s-- > 0;) {
        if (++at[s] < sweep[s].second.size()) {
          done = false;
          break;
        }
        at[s] = 0;
      }
      if (done) break;
    }
  }
  if (j.contains("index")) {
    spec.index = j.at("index").get<std::vector<std::string>>();
  } else {
    for (const std::string& k : CellParams::keys())
      if (varying.count(k)) spec.index.push_back(k);
    if (varying.count("rr_epsilon")) spec.index.push_back("rr_epsilon");
  }
  spec.validate();
  return spec;
}

struct TrialResult {
  std::size_t cell = 0;
  std::size_t trial = 0;
  std::vector<std::size_t> coalition;  // 0-based
  std::size_t accused = 0;             // 0-based; meaningless without a detector
  bool detected = false;               // a detector ran
  bool guilty = false;
  double fp_count = 0.0;               // fingerprints in the first colluder's copy
  double owner_utility = 0.0;          // of the first colluder's copy
  double attacker_utility = 0.0;
  double estimation_error = std::nan("");
  double max_similarity = std::nan("");
  std::size_t majority_fallbacks = 0;
  double generation_ms = 0.0;
  double detection_ms = 0.0;
  std::string error;
};

struct CellSummary {
  std::size_t cell = 0;
  std::size_t trials = 0;
  double accuracy = std::nan("");
  double fp_count_mean = 0.0, fp_count_std = 0.0;
  double owner_utility_mean = 0.0;
  double attacker_utility_mean = 0.0, attacker_utility_std = 0.0;
  double estimation_error_mean = std::nan(""), estimation_error_std = std::nan("");
  double max_similarity_mean = std::nan("");
};

struct ExperimentResults {
  ExperimentSpec spec;
  std::vector<TrialResult> trials;  // sorted by (cell, trial)

  std::vector<CellSummary> summarize() const;
};

class ExperimentError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline constexpr std::uint64_t kIndividualStream = 0x1D1D;
inline constexpr std::uint64_t kModelStream = 0x30DE1;

struct StreamIds {
  static constexpr std::uint64_t kShare = 1, kCoalition = 2, kAttack = 3;
};

/// Models and individuals, shared read-only by every worker.
class CorpusCache {
 public:
  CorpusCache(const ExperimentSpec& spec) : spec_(spec) {
    if (!spec.corpus.file.empty()) {
      file_corpus_ = io::read_corpus_file(spec.corpus.file);
      file_model_ = estimate_from_corpus(file_corpus_, spec.corpus.smoothing);
    }
    for (const CellParams& c : spec.cells) model(c);
  }

  const CorrelationModel& model(const CellParams& c) {
    if (file_model_) {
      if (file_model_->length() != c.l || file_model_->states() != c.m)
        throw ConfigurationError("corpus file has l=" + std::to_string(file_model_->length()) +
                                 ", m=" + std::to_string(file_model_->states()) +
                                 " but the cell asks for l=" + std::to_string(c.l) +
                                 ", m=" + std::to_string(c.m));
      return *file_model_;
    }
    const auto key = std::make_pair(c.l, c.m);
    auto it = models_.find(key);
    if (it != models_.end()) return it->second;
    SyntheticModelSpec s = spec_.corpus.synthetic;
    s.length = c.l;
    s.states = c.m;
    s.seed = derive_seed(spec_.corpus.synthetic.seed,
                         {kModelStream, c.l, static_cast<std::uint64_t>(c.m)});
    return models_.emplace(key, make_synthetic_model(s)).first->second;
  }

  const CorrelationModel& model_const(const CellParams& c) const {
    if (file_model_) return *file_model_;
    return models_.at(std::make_pair(c.l, c.m));
  }

  Sequence individual(const CellParams& c, std::size_t trial) const {
    if (!file_corpus_.empty()) return file_corpus_[trial % file_corpus_.size()];
    return sample_sequence(model_const(c), derive_seed(spec_.master_seed, {kIndividualStream, trial}));
  }

 private:
  const ExperimentSpec& spec_;
  std::vector<Sequence> file_corpus_;
  std::optional<CorrelationModel> file_model_;
  std::map<std::pair<std::size_t, int>, CorrelationModel> models_;
};

}  // namespace detail

/// Builds the sharing ledger a cell describes.
inline SharingLedger make_ledger(const CellParams& c, const Sequence& x, const CorrelationModel& model,
                                 std::uint64_t seed) {
  const FingerprintParams params = c.params();
  const BSConfig bs{c.bs_c, c.bs_r > 0 ? c.bs_r : auto_block_size(c.p, c.l, c.bs_c)};
  switch (c.scheme) {
    case Scheme::kClean: {
      SharingLedger ledger;
      ledger.original = x;
      ledger.params = params;
      for (std::size_t sp = 0; sp < c.sps; ++sp) {
        ledger.records.emplace_back();
        ledger.records.back().sp_index = sp;
      }
      return ledger;
    }
    case Scheme::kNaive: {
      SharingLedger ledger;
      ledger.original = x;
      ledger.params = params;
      for (std::size_t sp = 0; sp < c.sps; ++sp) {
        FingerprintRecord rec =
            fingerprint_naive(x, c.p, derive_seed(seed, {streams::kRecipient, sp})).record;
        rec.sp_index = sp;
        ledger.records.push_back(std::move(rec));
      }
      return ledger;
    }
    case Scheme::kAlg1:
      return share_independent(x, params, model, c.sps, seed);
    case Scheme::kBonehShaw:
      if (bs.r < 1) throw ConfigurationError("auto r is 0; raise p or l, or lower c");
      return share_all(x, params, model, bs, c.sps, seed);
    case Scheme::kStandalone:
      if (bs.r < 1) throw ConfigurationError("auto r is 0; raise p or l, or lower c");
      return share_standalone(x, params, model, bs, c.sps, seed);
    case Scheme::kHybrid: {
      HybridConfig hc{c.lambda, params, BSConfig{c.bs_c, c.bs_r}};
      return hybrid_share(x, hc, model, c.sps, seed);
    }
    case Scheme::kRR:
      return rr_share(x, epsilon_from_keep_prob(c.rr_keep, c.m), c.sps, seed, c.m != 3);
  }
  throw ConfigurationError("unknown scheme");
}

inline Sequence run_attack(const CellParams& c, const SharingLedger& ledger,
                           const std::vector<std::size_t>& coalition, const CorrelationModel& model,
                           std::uint64_t seed, AttackDiagnostics& diag) {
  const Sequence first = reconstruct_copy(ledger, coalition.front());
  switch (c.attack) {
    case AttackKind::kNone: return first;
    case AttackKind::kFlip: return flipping_attack(first, c.p_f, seed);
    case AttackKind::kSubset: return subset_attack(first, c.p_s, seed);
    case AttackKind::kCorrelation: return correlation_attack(first, model, c.tau_c, c.p_f, seed);
    case AttackKind::kMajority:
    case AttackKind::kPMajority: {
      std::vector<Sequence> copies;
      for (std::size_t sp : coalition) copies.push_back(reconstruct_copy(ledger, sp));
      if (c.attack == AttackKind::kMajority) return standard_majority(copies, seed);
      if (c.tau_c > 0.0) {
        // Correlation repair after the vote; the repair pass also flips.
        Sequence voted = probabilistic_majority(copies, model, c.effective_p_e(), 0.0,
                                                derive_seed(seed, {1}), &diag);
        return correlation_attack(voted, model, c.tau_c, c.p_f, derive_seed(seed, {2}));
      }
      return probabilistic_majority(copies, model, c.effective_p_e(), c.p_f, seed, &diag);
    }
  }
  throw ConfigurationError("unknown attack");
}

inline std::optional<DetectionResult> run_detector(const CellParams& c, const SharingLedger& ledger,
                                                   const Sequence& leaked) {
  Detector d = c.detector;
  if (d == Detector::kAuto) {
    if (c.scheme == Scheme::kClean) d = Detector::kNone;
    else d = ledger.layout ? Detector::kCombined : Detector::kSimilarity;
  }
  switch (d) {
    case Detector::kAuto:
    case Detector::kNone: return std::nullopt;
    case Detector::kSimilarity: return detect_similarity(ledger, leaked);
    case Detector::kProbabilistic: return detect_probabilistic(ledger, leaked);
    case Detector::kCombined: return detect_combined(ledger, leaked);
    case Detector::kStandalone: {
      if (!ledger.layout) throw ConfigurationError("standalone detection needs a code layout");
      const int w = bs_standalone_detect(leaked, *ledger.layout);
      DetectionResult r;
      r.method = DetectionMethod::kCombined;
      r.accused = static_cast<std::size_t>(w - 1);
      if (r.accused >= ledger.records.size()) r.accused = 0;
      r.suspects = {r.accused};
      return r;
    }
  }
  return std::nullopt;
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

inline TrialResult run_trial(const ExperimentSpec& spec, const CorpusCache& cache, std::size_t cell,
                             std::size_t trial) {
  const CellParams& c = spec.cells[cell];
  TrialResult out;
  out.cell = cell;
  out.trial = trial;
  const std::uint64_t trial_seed = derive_seed(spec.master_seed, {cell, trial});
  const CorrelationModel& model = cache.model_const(c);
  const Sequence x = cache.individual(c, trial);

  Rng pick(derive_seed(trial_seed, {StreamIds::kCoalition}));
  std::vector<std::size_t> members(c.sps);
  std::iota(members.begin(), members.end(), std::size_t{0});
  for (std::size_t k = 0; k < c.colluders; ++k)
    std::swap(members[k], members[k + pick.below(c.sps - k)]);
  out.coalition.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(c.colluders));

  auto t0 = std::chrono::steady_clock::now();
  const SharingLedger ledger = make_ledger(c, x, model, derive_seed(trial_seed, {StreamIds::kShare}));
  out.generation_ms = elapsed_ms(t0);

  const FingerprintRecord& rec = ledger.records[out.coalition.front()];
  out.fp_count = static_cast<double>(rec.positions.size());
  out.owner_utility = owner_utility(x, apply_record(x, rec));

  AttackDiagnostics diag;
  const Sequence leaked = run_attack(c, ledger, out.coalition, model,
                                     derive_seed(trial_seed, {StreamIds::kAttack}), diag);
  out.majority_fallbacks = diag.majority_fallbacks;
  out.attacker_utility = attacker_utility(x, leaked);
  try {
    out.estimation_error = estimation_error(x, leaked);
  } catch (const UndefinedError&) {
  }

  t0 = std::chrono::steady_clock::now();
  const std::optional<DetectionResult> det = run_detector(c, ledger, leaked);
  out.detection_ms = elapsed_ms(t0);
  if (det) {
    out.detected = true;
    out.accused = det->accused;
    out.guilty = std::find(out.coalition.begin(), out.coalition.end(), det->accused) != out.coalition.end();
    if (c.scheme != Scheme::kClean) {
      const std::vector<double> sim = similarity_scores(ledger, leaked);
      out.max_similarity = *std::max_element(sim.begin(), sim.end());
    }
  }
  return out;
}

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

inline std::vector<CellSummary> ExperimentResults::summarize() const {
  std::vector<CellSummary> out(spec.cells.size());
  std::vector<std::vector<double>> fp(spec.cells.size()), ou(spec.cells.size()), au(spec.cells.size()),
      ee(spec.cells.size()), ms(spec.cells.size());
  std::vector<std::size_t> hits(spec.cells.size(), 0), detected(spec.cells.size(), 0);
  for (const TrialResult& t : trials) {
    CellSummary& s = out[t.cell];
    s.cell = t.cell;
    ++s.trials;
    fp[t.cell].push_back(t.fp_count);
    ou[t.cell].push_back(t.owner_utility);
    au[t.cell].push_back(t.attacker_utility);
    if (!std::isnan(t.estimation_error)) ee[t.cell].push_back(t.estimation_error);
    if (!std::isnan(t.max_similarity)) ms[t.cell].push_back(t.max_similarity);
    if (t.detected) {
      ++detected[t.cell];
      if (t.guilty) ++hits[t.cell];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    CellSummary& s = out[i];
    s.cell = i;
    if (detected[i] > 0) s.accuracy = static_cast<double>(hits[i]) / static_cast<double>(detected[i]);
    std::tie(s.fp_count_mean, s.fp_count_std) = detail::mean_std(fp[i]);
    s.owner_utility_mean = detail::mean_std(ou[i]).first;
    std::tie(s.attacker_utility_mean, s.attacker_utility_std) = detail::mean_std(au[i]);
    std::tie(s.estimation_error_mean, s.estimation_error_std) = detail::mean_std(ee[i]);
    s.max_similarity_mean = detail::mean_std(ms[i]).first;
  }
  return out;
}

/// Runs every (cell, trial) on `threads` workers (0: hardware concurrency).
/// Throws ExperimentError naming the first failing cell and trial.
inline ExperimentResults run(const ExperimentSpec& spec, unsigned threads = 1) {
  spec.validate();
  detail::CorpusCache cache(spec);
  const std::size_t total = spec.cells.size() * spec.trials;
  ExperimentResults results;
  results.spec = spec;
  results.trials.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const std::size_t cell = k / spec.trials, trial = k % spec.trials;
      try {
        results.trials[k] = detail::run_trial(spec, cache, cell, trial);
      } catch (const std::exception& e) {
        results.trials[k].cell = cell;
        results.trials[k].trial = trial;
        results.trials[k].error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const TrialResult& t : results.trials)
    if (!t.error.empty())
      throw ExperimentError("experiment '" + spec.name + "', cell " + std::to_string(t.cell + 1) +
                            " (" + spec.cells[t.cell].get("scheme") + "), trial " +
                            std::to_string(t.trial + 1) + ": " + t.error);
  return results;
}

// ---- Reporting -------------------------------------------------------------

struct ReportPaths {
  std::filesystem::path trials, aggregate, columns, timing;
};

inline ReportPaths report_paths(const std::filesystem::path& dir, const std::string& name) {
  return {dir / (name + "_trials.csv"), dir / (name + "_aggregate.csv"), dir / (name + "_columns.txt"),
          dir / (name + "_timing.csv")};
}

namespace detail {

inline std::string join_one_based(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + std::to_string(v[k] + 1);
  return s;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

}  // namespace detail

inline void write_trials_csv(std::ostream& out, const ExperimentResults& r) {
  using detail::format_double;
  out << "cell,trial";
  for (const std::string& k : r.spec.index) out << ',' << k;
  out << ",coalition,accused,guilty,fp_count,owner_utility,attacker_utility,estimation_error,"
         "max_similarity,majority_fallbacks\n";
  for (const TrialResult& t : r.trials) {
    out << t.cell + 1 << ',' << t.trial + 1;
    for (const std::string& k : r.spec.index) out << ',' << r.spec.cells[t.cell].get(k);
    out << ',' << detail::join_one_based(t.coalition) << ','
        << (t.detected ? std::to_string(t.accused + 1) : "") << ',' << (t.detected ? (t.guilty ? "1" : "0") : "")
        << ',' << format_double(t.fp_count) << ',' << format_double(t.owner_utility) << ','
        << format_double(t.attacker_utility) << ',' << format_double(t.estimation_error) << ','
        << format_double(t.max_similarity) << ',' << t.majority_fallbacks << '\n';
  }
}

inline void write_aggregate_csv(std::ostream& out, const ExperimentResults& r) {
  using detail::format_double;
  out << "cell";
  for (const std::string& k : r.spec.index) out << ',' << k;
  out << ",trials,accuracy,fp_count_mean,fp_count_std,owner_utility_mean,attacker_utility_mean,"
         "attacker_utility_std,estimation_error_mean,estimation_error_std,max_similarity_mean\n";
  for (const CellSummary& s : r.summarize()) {
    out << s.cell + 1;
    for (const std::string& k : r.spec.index) out << ',' << r.spec.cells[s.cell].get(k);
    out << ',' << s.trials << ',' << format_double(s.accuracy) << ',' << format_double(s.fp_count_mean)
        << ',' << format_double(s.fp_count_std) << ',' << format_double(s.owner_utility_mean) << ','
        << format_double(s.attacker_utility_mean) << ',' << format_double(s.attacker_utility_std) << ','
        << format_double(s.estimation_error_mean) << ',' << format_double(s.estimation_error_std) << ','
        << format_double(s.max_similarity_mean) << '\n';
  }
}

inline void write_timing_csv(std::ostream& out, const ExperimentResults& r) {
  out << "cell,trial,generation_ms,detection_ms\n";
  for (const TrialResult& t : r.trials)
    out << t.cell + 1 << ',' << t.trial + 1 << ',' << detail::format_double(t.generation_ms) << ','
        << detail::format_double(t.detection_ms) << '\n';
}

inline void write_columns(std::ostream& out, const ExperimentResults& r) {
  out << "# " << r.spec.name << ": " << r.spec.cells.size() << " cells x " << r.spec.trials
      << " trials, master_seed " << r.spec.master_seed << "\n\n"
      << "Index columns (cell parameters that vary):\n";
  for (const std::string& k : r.spec.index) out << "  " << k << '\n';
  out << "\n_trials.csv\n"
         "  cell, trial         1-based cell and trial numbers\n"
         "  coalition           recipients whose copies were used, ';'-separated, 1-based\n"
         "  accused             recipient accused by the detector (empty when none ran)\n"
         "  guilty              1 if the accused recipient is in the coalition\n"
         "  fp_count            fingerprints in the first coalition member's copy\n"
         "  owner_utility       owner-side utility of that copy, unit weights\n"
         "  attacker_utility    utility of the leaked copy, unit weights (d0 counts as a mismatch)\n"
         "  estimation_error    mean |x_j - y_j| over points present in the leak\n"
         "  max_similarity      largest similarity score over all recipients\n"
         "  majority_fallbacks  positions where every collusion weight vanished\n"
         "\n_aggregate.csv\n"
         "  trials              trials in the cell\n"
         "  accuracy            fraction of trials with a guilty accusation\n"
         "  *_mean, *_std       mean and sample standard deviation of the trial columns\n"
         "\n_timing.csv\n"
         "  generation_ms       wall time to build the ledger for every recipient\n"
         "  detection_ms        wall time of the detector\n";
}

/// Writes the four report files into `dir`, creating it if needed.
inline ReportPaths report(const ExperimentResults& r, const std::filesystem::path& dir) {
  if (r.spec.cells.empty()) throw ConfigurationError("nothing to report: empty grid");
  std::filesystem::create_directories(dir);
  const ReportPaths paths = report_paths(dir, r.spec.name);
  {
    auto out = detail::open_out(paths.trials);
    write_trials_csv(out, r);
  }
  {
    auto out = detail::open_out(paths.aggregate);
    write_aggregate_csv(out, r);
  }
  {
    auto out = detail::open_out(paths.columns);
    write_columns(out, r);
  }
  {
    auto out = detail::open_out(paths.timing);
    write_timing_csv(out, r);
  }
  return paths;
}

// ---- Bundled specs -----------------------------------------------------------

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"table2", "fig5",  "fig6", "fig7", "table3", "table4",
                                              "table5", "table6", "fig8", "fig9", "rr-baseline"};
  return names;
}

inline json builtin_json(const std::string& name) {
  const json flip_rates = {0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6};
  if (name == "table2")
    return {{"name", name},
            {"trials", 500},
            {"base", {{"scheme", "alg1"}, {"sps", 1}, {"detector", "none"}}},
            {"sweep", {{"theta", {0.0, 0.25, 0.5, 0.75}}}}};
  if (name == "fig5") {
    // Flip and subset sweep different ranges.
    json grid = json::array();
    for (double v : {0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6})
      grid.push_back({{"attack", "flip"}, {"p_f", v}, {"p_s", 0.0}});
    for (double v : {0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7, 0.8, 0.9})
      grid.push_back({{"attack", "subset"}, {"p_f", 0.0}, {"p_s", v}});
    return {{"name", name}, {"trials", 200}, {"base", {{"scheme", "bs"}}}, {"grid", grid}};
  }
  if (name == "table3")
    return {{"name", name},
            {"trials", 200},
            {"base", {{"scheme", "bs"}, {"attack", "flip"}}},
            {"sweep", {{"p_f", flip_rates}}}};
  if (name == "fig6")
    return {{"name", name},
            {"trials", 200},
            {"base", {{"attack", "corr"}, {"sps", 1000}}},
            {"sweep",
             {{"scheme", {"bs", "naive"}},
              {"p_f", {0.0, 0.2}},
              {"tau_c", {0.0, 0.025, 0.05, 0.1, 0.15, 0.2, 0.25}}}}};
  if (name == "table4")
    return {{"name", name},
            {"trials", 200},
            {"base", {{"scheme", "bs"}, {"attack", "corr"}, {"tau_c", 0.25}, {"p_f", 0.2}}},
            {"sweep", {{"p", {0.02, 0.06, 0.10, 0.16}}}}};
  if (name == "fig7" || name == "table5")
    return {{"name", name},
            {"trials", 200},
            {"base",
             {{"scheme", "bs"}, {"sps", 10}, {"bs_c", 10}, {"bs_r", 5}, {"p_f", 0.1}, {"tau_c", 0.1}}},
            {"sweep", {{"attack", {"majority", "pmajority"}}, {"colluders", {2, 3, 4}}}}};
  if (name == "table6")
    return {{"name", name},
            {"trials", 200},
            {"base",
             {{"scheme", "bs"}, {"attack", "pmajority"}, {"colluders", 3}, {"p_f", 0.1}, {"tau_c", 0.1}}},
            {"sweep", {{"l", {1000, 3000, 5000}}}}};
  if (name == "fig8")
    return {{"name", name},
            {"trials", 200},
            {"base",
             {{"sps", 10}, {"bs_c", 10}, {"bs_r", 5}, {"attack", "pmajority"}, {"colluders", 2},
              {"p_f", 0.1}, {"tau_c", 0.1}}},
            {"grid",
             {{{"scheme", "bs"}, {"detector", "combined"}},
              {{"scheme", "bs-standalone"}, {"detector", "bs-standalone"}}}}};
  if (name == "fig9")
    return {{"name", name},
            {"trials", 200},
            {"base",
             {{"scheme", "hybrid"}, {"sps", 10}, {"attack", "pmajority"}, {"colluders", 3}, {"p_f", 0.1},
              {"tau_c", 0.1}}},
            {"sweep", {{"lambda", {0.0, 0.25, 0.5, 0.75, 1.0}}}}};
  if (name == "rr-baseline")
    return {{"name", name},
            {"trials", 200},
            {"base",
             {{"scheme", "rr"}, {"sps", 10}, {"rr_keep", 0.9}, {"attack", "pmajority"}, {"colluders", 3},
              {"p_f", 0.1}, {"tau_c", 0.1}}},
            {"grid", json::array({json::object()})}};
  throw NotFoundError("no bundled experiment named '" + name + "'");
}

inline ExperimentSpec builtin(const std::string& name) { return spec_from_json(builtin_json(name)); }

}  // namespace corrfp::harness
