// corrfp: command-line front end.
//
//   corrfp model      --length 1000 --states 3 --seed 7 --out model.json
//   corrfp estimate   --corpus data.csv --smoothing 1 --out model.json
//   corrfp synth      --model model.json --count 99 --seed 3 --out data.csv
//   corrfp share      --original data.csv --row 1 --model model.json --sps 100 --ledger ledger.json
//   corrfp attack     --ledger ledger.json --model model.json --kind flip --coalition 3 --out leaked.csv
//   corrfp detect     --ledger ledger.json --leaked leaked.csv --method combined
//   corrfp rr         --epsilon 2.0 | --keep 0.9
//   corrfp experiment run --spec fig6 --out results/
//
// Recipients, positions and rows are 1-based on the command line and in
// every file written here.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "corrfp/corrfp.hpp"

namespace {

using namespace corrfp;
using corrfp::io::json;

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string corpus_text(std::span<const Sequence> rows) {
  std::ostringstream s;
  io::write_corpus(s, rows);
  return s.str();
}

std::vector<std::size_t> parse_coalition(const std::vector<std::size_t>& one_based) {
  std::vector<std::size_t> out;
  for (std::size_t sp : one_based) {
    if (sp < 1) throw ArgumentError("recipients are numbered from 1");
    out.push_back(sp - 1);
  }
  return out;
}

struct ModelOpts {
  std::size_t length = 1000;
  int states = 3;
  double strong_fraction = 0.3, strong_leak = 0.04;
  std::uint64_t seed = 1;
  std::string out;
};

struct EstimateOpts {
  std::string corpus, out;
  int states = 0;
  double smoothing = 1.0;
};

struct SynthOpts {
  std::string model, out;
  std::size_t count = 10;
  std::uint64_t seed = 1;
};

struct ShareOpts {
  std::string original, model, ledger = "ledger.json", scheme = "bs", bs_r = "auto";
  std::size_t row = 1, sps = 10;
  double p = 0.1, theta = 0.5, tau = 0.05, lambda = 0.0;
  int bs_c = 10, states = 0;
  std::uint64_t seed = 1;
};

struct AttackOpts {
  std::string ledger, model, kind = "flip", out;
  std::vector<std::size_t> coalition{1};
  double p_f = 0.0, p_s = 0.0, tau_c = 0.0, p_e = -1.0;
  std::uint64_t seed = 1;
};

struct DetectOpts {
  std::string ledger, leaked, method = "combined", out;
  int states = 0;
};

struct RrOpts {
  double epsilon = -1.0, keep = -1.0;
  int states = 3;
};

struct ExperimentOpts {
  std::string spec, out;
  unsigned threads = 1;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
};

void cmd_model(const ModelOpts& o) {
  const CorrelationModel model =
      make_synthetic_model({o.length, o.states, o.strong_fraction, o.strong_leak, o.seed});
  write_or_print(o.out, io::model_to_json(model).dump(1) + "\n");
}

void cmd_estimate(const EstimateOpts& o) {
  const std::vector<Sequence> corpus = io::read_corpus_file(o.corpus, o.states);
  write_or_print(o.out, io::model_to_json(estimate_from_corpus(corpus, o.smoothing)).dump(1) + "\n");
}

void cmd_synth(const SynthOpts& o) {
  const CorrelationModel model = io::read_model_file(o.model);
  std::vector<Sequence> rows;
  for (std::size_t k = 0; k < o.count; ++k) rows.push_back(sample_sequence(model, derive_seed(o.seed, {k})));
  write_or_print(o.out, corpus_text(rows));
}

void cmd_share(const ShareOpts& o) {
  const CorrelationModel model = io::read_model_file(o.model);
  const Sequence x = io::read_sequence_file(o.original, o.row, o.states ? o.states : model.states());
  if (x.size() != model.length()) throw DimensionError("original and model differ in length");
  harness::CellParams cell;
  cell.set("scheme", o.scheme);
  cell.l = x.size();
  cell.m = model.states();
  cell.p = o.p;
  cell.theta = o.theta;
  cell.tau = o.tau;
  cell.sps = o.sps;
  cell.bs_c = o.bs_c;
  cell.set("bs_r", o.bs_r == "auto" ? json("auto") : json(std::stoi(o.bs_r)));
  cell.lambda = o.lambda;
  cell.detector = harness::Detector::kNone;
  cell.validate();
  const SharingLedger ledger = harness::make_ledger(cell, x, model, o.seed);
  io::write_ledger_file(o.ledger, ledger);
  std::size_t total = 0;
  for (const FingerprintRecord& r : ledger.records) total += r.count();
  std::cerr << ledger.num_sps() << " copies, mean "
            << static_cast<double>(total) / static_cast<double>(ledger.num_sps()) << " fingerprints"
            << (ledger.layout ? ", code embedded" : "") << "\n";
}

void cmd_attack(const AttackOpts& o) {
  const SharingLedger ledger = io::read_ledger_file(o.ledger);
  harness::CellParams cell;
  cell.set("attack", o.kind);
  cell.p_f = o.p_f;
  cell.p_s = o.p_s;
  cell.tau_c = o.tau_c;
  cell.p_e = o.p_e;
  cell.p = ledger.params.p;
  const std::vector<std::size_t> coalition = parse_coalition(o.coalition);
  if (coalition.empty()) throw ArgumentError("coalition is empty");
  AttackConfig{o.p_f, o.p_s, o.tau_c, cell.effective_p_e(), coalition}.validate(ledger.num_sps());
  const bool collusion = cell.attack == harness::AttackKind::kMajority ||
                         cell.attack == harness::AttackKind::kPMajority;
  if (collusion && coalition.size() < 2) throw ArgumentError(o.kind + " needs at least two colluders");
  const bool needs_model = cell.attack == harness::AttackKind::kCorrelation ||
                           cell.attack == harness::AttackKind::kPMajority;
  if (needs_model && o.model.empty()) throw ArgumentError(o.kind + " needs --model");
  const CorrelationModel model = o.model.empty() ? CorrelationModel::uniform(ledger.original.size(),
                                                                             ledger.original.alphabet.size())
                                                 : io::read_model_file(o.model);
  AttackDiagnostics diag;
  const Sequence leaked = harness::run_attack(cell, ledger, coalition, model, o.seed, diag);
  write_or_print(o.out, corpus_text(std::span<const Sequence>(&leaked, 1)));
  if (diag.majority_fallbacks) std::cerr << diag.majority_fallbacks << " positions fell back to plain majority\n";
}

void cmd_detect(const DetectOpts& o) {
  const SharingLedger ledger = io::read_ledger_file(o.ledger);
  const Sequence leaked =
      io::read_sequence_file(o.leaked, 1, o.states ? o.states : ledger.original.alphabet.size());
  DetectionResult r;
  if (o.method == "sim" || o.method == "similarity") r = detect_similarity(ledger, leaked);
  else if (o.method == "prob" || o.method == "probabilistic") r = detect_probabilistic(ledger, leaked);
  else if (o.method == "combined") r = detect_combined(ledger, leaked);
  else throw ArgumentError("unknown method '" + o.method + "'");
  write_or_print(o.out, io::report_to_json(r).dump(1) + "\n");
  if (!o.out.empty() && o.out != "-") std::cout << "accused SP " << r.accused + 1 << "\n";
}

void cmd_rr(const RrOpts& o) {
  if ((o.epsilon >= 0.0) == (o.keep >= 0.0)) throw ArgumentError("give exactly one of --epsilon and --keep");
  if (o.epsilon >= 0.0)
    std::cout << "keep " << harness::detail::format_double(keep_prob_from_epsilon(o.epsilon, o.states)) << "\n";
  else
    std::cout << "epsilon " << harness::detail::format_double(epsilon_from_keep_prob(o.keep, o.states)) << "\n";
}

harness::ExperimentSpec load_spec(const std::string& name) {
  for (const std::string& b : harness::builtin_names())
    if (b == name) return harness::builtin(name);
  return harness::spec_from_json(io::read_json_file(name));
}

void cmd_experiment_run(const ExperimentOpts& o) {
  harness::ExperimentSpec spec = load_spec(o.spec);
  if (o.trials) spec.trials = o.trials;
  if (o.seed) spec.master_seed = o.seed;
  if (!o.out.empty()) spec.output = o.out;
  const harness::ExperimentResults results = harness::run(spec, o.threads);
  const harness::ReportPaths paths = harness::report(results, spec.output);
  std::cout << "wrote " << paths.aggregate.string() << "\n";
  harness::write_aggregate_csv(std::cout, results);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlation-aware fingerprinting of shared sequence data"};
  app.require_subcommand(1);

  ModelOpts mo;
  auto* model = app.add_subcommand("model", "Generate a synthetic correlation model");
  model->add_option("--length", mo.length, "Sequence length")->check(CLI::PositiveNumber);
  model->add_option("--states", mo.states, "Alphabet size")->check(CLI::Range(2, 64));
  model->add_option("--strong-fraction", mo.strong_fraction, "Share of near-deterministic transitions");
  model->add_option("--strong-leak", mo.strong_leak, "Mass off the dominant state at those transitions");
  model->add_option("--seed", mo.seed);
  model->add_option("--out", mo.out, "Output JSON (stdout if omitted)");

  EstimateOpts eo;
  auto* estimate = app.add_subcommand("estimate", "Estimate a model from a CSV corpus");
  estimate->add_option("--corpus", eo.corpus, "CSV, one sequence per row")->required()->check(CLI::ExistingFile);
  estimate->add_option("--states", eo.states, "Alphabet size (inferred if omitted)");
  estimate->add_option("--smoothing", eo.smoothing, "Additive smoothing");
  estimate->add_option("--out", eo.out);

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Sample sequences from a model");
  synth->add_option("--model", so.model)->required()->check(CLI::ExistingFile);
  synth->add_option("--count", so.count)->check(CLI::PositiveNumber);
  synth->add_option("--seed", so.seed);
  synth->add_option("--out", so.out);

  ShareOpts sh;
  auto* share = app.add_subcommand("share", "Fingerprint copies of one sequence for many recipients");
  share->add_option("--original", sh.original, "CSV holding the sequence")->required()->check(CLI::ExistingFile);
  share->add_option("--row", sh.row, "Row of the CSV (1-based)")->check(CLI::PositiveNumber);
  share->add_option("--model", sh.model)->required()->check(CLI::ExistingFile);
  share->add_option("--states", sh.states);
  share->add_option("--scheme", sh.scheme, "bs | alg1 | naive | bs-standalone | hybrid | rr | clean");
  share->add_option("--p", sh.p);
  share->add_option("--theta", sh.theta);
  share->add_option("--tau", sh.tau);
  share->add_option("--sps", sh.sps, "Number of recipients")->check(CLI::PositiveNumber);
  share->add_option("--bs-c", sh.bs_c, "Codewords in the code");
  share->add_option("--bs-r", sh.bs_r, "Block size, or auto");
  share->add_option("--lambda", sh.lambda, "Overlap fraction for the hybrid scheme");
  share->add_option("--seed", sh.seed);
  share->add_option("--ledger", sh.ledger, "Output ledger JSON");

  AttackOpts ao;
  auto* attack = app.add_subcommand("attack", "Produce a leaked copy from a ledger");
  attack->add_option("--ledger", ao.ledger)->required()->check(CLI::ExistingFile);
  attack->add_option("--model", ao.model)->check(CLI::ExistingFile);
  attack->add_option("--kind", ao.kind, "none | flip | subset | corr | majority | pmajority");
  attack->add_option("--coalition", ao.coalition, "Recipients (1-based)")->delimiter(',');
  attack->add_option("--pf", ao.p_f);
  attack->add_option("--ps", ao.p_s);
  attack->add_option("--tauc", ao.tau_c);
  attack->add_option("--pe", ao.p_e, "Assumed fingerprint rate (defaults to the ledger's p)");
  attack->add_option("--seed", ao.seed);
  attack->add_option("--out", ao.out);

  DetectOpts dopt;
  auto* detect = app.add_subcommand("detect", "Identify the source of a leaked copy");
  detect->add_option("--ledger", dopt.ledger)->required()->check(CLI::ExistingFile);
  detect->add_option("--leaked", dopt.leaked)->required()->check(CLI::ExistingFile);
  detect->add_option("--states", dopt.states);
  detect->add_option("--method", dopt.method, "sim | prob | combined");
  detect->add_option("--out", dopt.out);

  RrOpts ro;
  auto* rr = app.add_subcommand("rr", "Convert between epsilon and keep probability");
  rr->add_option("--epsilon", ro.epsilon);
  rr->add_option("--keep", ro.keep);
  rr->add_option("--states", ro.states);

  ExperimentOpts xo;
  auto* experiment = app.add_subcommand("experiment", "Run experiment grids");
  experiment->require_subcommand(1);
  auto* xrun = experiment->add_subcommand("run", "Run a spec file or bundled experiment");
  xrun->add_option("--spec", xo.spec, "Spec JSON or bundled name")->required();
  xrun->add_option("--threads", xo.threads)->check(CLI::PositiveNumber);
  xrun->add_option("--trials", xo.trials, "Override the trial count");
  xrun->add_option("--seed", xo.seed, "Override the master seed");
  xrun->add_option("--out", xo.out, "Output directory");
  auto* xlist = experiment->add_subcommand("list", "List bundled experiments");
  std::string show_name;
  auto* xshow = experiment->add_subcommand("show", "Print a bundled experiment spec");
  xshow->add_option("name", show_name)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*model) cmd_model(mo);
    else if (*estimate) cmd_estimate(eo);
    else if (*synth) cmd_synth(so);
    else if (*share) cmd_share(sh);
    else if (*attack) cmd_attack(ao);
    else if (*detect) cmd_detect(dopt);
    else if (*rr) cmd_rr(ro);
    else if (*xrun) cmd_experiment_run(xo);
    else if (*xlist) for (const std::string& n : harness::builtin_names()) std::cout << n << "\n";
    else if (*xshow) std::cout << harness::builtin_json(show_name).dump(1) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "corrfp: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
