// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Experiment cells use the bundled synthetic 3-state corpus at
// l = 1000, p = 0.1, theta = 0.5, tau = 0.05 unless a cell overrides them.
//
//   corrfp_acceptance [--only 4,6] [--threads N]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

#include "corrfp/corrfp.hpp"
#include "oracles.hpp"

namespace {

using namespace corrfp;
using harness::CellParams;
using harness::CellSummary;
using harness::json;

unsigned g_threads = 1;
volatile std::size_t g_sink = 0;  // keeps timed work observable

struct Check {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Runs a bundled experiment with `trials` trials per cell, keeping only the
// cells `keep` accepts. Summaries come back in cell order next to the cells.
struct Run {
  std::vector<CellParams> cells;
  std::vector<CellSummary> summaries;

  const CellSummary& at(const std::function<bool(const CellParams&)>& match) const {
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (match(cells[i])) return summaries[i];
    throw NotFoundError("no cell matches");
  }
};

Run run_builtin(const std::string& name, std::size_t trials,
                const std::function<bool(const CellParams&)>& keep = nullptr,
                const json& base_overrides = json::object()) {
  json j = harness::builtin_json(name);
  j["trials"] = trials;
  for (const auto& [k, v] : base_overrides.items()) j["base"][k] = v;
  harness::ExperimentSpec spec = harness::spec_from_json(j);
  if (keep) std::erase_if(spec.cells, [&](const CellParams& c) { return !keep(c); });
  const harness::ExperimentResults res = harness::run(spec, g_threads);
  return {spec.cells, res.summarize()};
}

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

// ---- Criteria -------------------------------------------------------------

void c1(Check& c) {
  const Run r = run_builtin("table2", 500, [](const CellParams& p) { return near(p.theta, 0.0) || near(p.theta, 0.5); });
  const CellSummary& t0 = r.at([](const CellParams& p) { return near(p.theta, 0.0); });
  const CellSummary& t5 = r.at([](const CellParams& p) { return near(p.theta, 0.5); });
  c.detail << "mean(theta=0)=" << fmt(t0.fp_count_mean, 2) << " std=" << fmt(t0.fp_count_std, 2)
           << "; mean(theta=0.5)=" << fmt(t5.fp_count_mean, 2) << " std=" << fmt(t5.fp_count_std, 2);
  c.require(std::abs(t5.fp_count_mean - 100.0) <= 5.0, "mean within 100 +- 5 at theta=0.5");
  c.require(t5.fp_count_std < t0.fp_count_std, "std(0.5) < std(0)");
}

void c2(Check& c) {
  const Run r = run_builtin("fig5", 200, nullptr, {{"detector", "combined"}});
  std::vector<std::pair<double, double>> flip, subset;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    if (r.cells[i].attack == harness::AttackKind::kFlip) flip.emplace_back(r.cells[i].p_f, r.summaries[i].accuracy);
    else subset.emplace_back(r.cells[i].p_s, r.summaries[i].accuracy);
  }
  c.detail << "flip:";
  for (auto [v, a] : flip) c.detail << ' ' << v << "->" << fmt(a);
  c.detail << "; subset:";
  for (auto [v, a] : subset) c.detail << ' ' << v << "->" << fmt(a);
  for (auto [v, a] : flip)
    if (v <= 0.45 + 1e-9) c.require(a >= 0.99, "flip accuracy >= 0.99 at p_f=" + fmt(v, 2));
  // Flipping at rate v causes a drop d; subset needs a rate >= v + 0.05 to
  // cause at least that drop.
  for (auto [v, a] : flip) {
    const double drop = 1.0 - a;
    if (drop <= 0.0) continue;
    for (auto [s, as] : subset)
      if (1.0 - as >= drop) {
        c.require(s >= v + 0.05 - 1e-9, "subset p_s=" + fmt(s, 2) + " matches flip p_f=" + fmt(v, 2));
        break;
      }
  }
  for (auto [v, a] : flip)
    for (auto [s, as] : subset)
      if (near(v, s)) c.require(a <= as, "flip at least as strong at rate " + fmt(v, 2));
}

void c3(Check& c) {
  json grid = json::array();
  for (double pf : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}) grid.push_back({{"p_f", pf}});
  const json j{{"name", "utility"},
               {"trials", 200},
               {"base", {{"scheme", "clean"}, {"sps", 1}, {"attack", "flip"}, {"detector", "none"}}},
               {"grid", grid}};
  const harness::ExperimentSpec spec = harness::spec_from_json(j);
  const auto sums = harness::run(spec, g_threads).summarize();
  for (std::size_t i = 0; i < spec.cells.size(); ++i) {
    const double pf = spec.cells[i].p_f, u = sums[i].attacker_utility_mean;
    c.detail << (i ? "; " : "") << "p_f=" << pf << " U=" << fmt(u, 4) << " (law " << fmt(1 - 2 * pf, 2) << ")";
    c.require(std::abs(u - (1.0 - 2.0 * pf)) <= 0.02, "U within 0.02 at p_f=" + fmt(pf, 2));
  }
}

void c4(Check& c) {
  const Run r = run_builtin("fig6", 200, [](const CellParams& p) {
    const bool threshold_cell = p.scheme == harness::Scheme::kBonehShaw && near(p.p_f, 0.0) && p.tau_c <= 0.05 + 1e-9;
    const bool contrast_cell = near(p.p_f, 0.2) && near(p.tau_c, 0.2);
    return threshold_cell || contrast_cell;
  });
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const CellParams& p = r.cells[i];
    if (p.scheme != harness::Scheme::kBonehShaw || !near(p.p_f, 0.0)) continue;
    c.detail << "defended tau_c=" << p.tau_c << " a=" << fmt(r.summaries[i].accuracy) << "; ";
    c.require(r.summaries[i].accuracy == 1.0, "defended accuracy 1.00 at tau_c=" + fmt(p.tau_c, 3));
  }
  const double def = r.at([](const CellParams& p) { return p.scheme == harness::Scheme::kBonehShaw && near(p.p_f, 0.2); }).accuracy;
  const double naive = r.at([](const CellParams& p) { return p.scheme == harness::Scheme::kNaive; }).accuracy;
  c.detail << "tau_c=0.2,p_f=0.2: defended " << fmt(def) << " naive " << fmt(naive);
  c.require(def - naive >= 0.3, "defended - naive >= 0.3");
}

void c5(Check& c) {
  const Run r = run_builtin("table4", 200);
  std::vector<double> acc;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    acc.push_back(r.summaries[i].accuracy);
    c.detail << (i ? "; " : "") << "p=" << r.cells[i].p << " a=" << fmt(acc.back());
  }
  for (std::size_t i = 1; i < acc.size(); ++i) c.require(acc[i] >= acc[i - 1], "non-decreasing in p");
  c.require(acc.front() < 0.5, "a(0.02) < 0.5");
  c.require(acc.back() > 0.9, "a(0.16) > 0.9");
}

void c6(Check& c) {
  const Run r = run_builtin("fig7", 2000);
  auto cell = [&](harness::AttackKind k, std::size_t n) -> const CellSummary& {
    return r.at([&](const CellParams& p) { return p.attack == k && p.colluders == n; });
  };
  using harness::AttackKind;
  for (AttackKind k : {AttackKind::kMajority, AttackKind::kPMajority}) {
    c.detail << harness::to_string(k) << ":";
    for (std::size_t n : {2, 3, 4})
      c.detail << " n=" << n << " a=" << fmt(cell(k, n).accuracy) << " U=" << fmt(cell(k, n).attacker_utility_mean);
    c.detail << "; ";
  }
  // The n sweep is judged on the probabilistic attack; standard majority
  // stays at 1.00 for every n and is only the comparison baseline.
  const auto pm = AttackKind::kPMajority;
  c.require(cell(pm, 2).accuracy >= 0.95, "pmajority n=2 >= 0.95");
  c.require(cell(pm, 2).accuracy > cell(pm, 3).accuracy && cell(pm, 3).accuracy > cell(pm, 4).accuracy,
            "pmajority strictly decreasing in n");
  for (std::size_t n : {2, 3, 4}) {
    const CellSummary& s = cell(AttackKind::kMajority, n);
    const CellSummary& p = cell(AttackKind::kPMajority, n);
    c.require(p.accuracy < s.accuracy, "pmajority accuracy below majority at n=" + std::to_string(n));
    c.require(p.attacker_utility_mean < s.attacker_utility_mean,
              "pmajority utility below majority at n=" + std::to_string(n));
  }
}

void c7(Check& c) {
  const Run r = run_builtin("fig8", 400);
  const double combined = r.at([](const CellParams& p) { return p.scheme == harness::Scheme::kBonehShaw; }).accuracy;
  const double standalone =
      r.at([](const CellParams& p) { return p.scheme == harness::Scheme::kStandalone; }).accuracy;
  c.detail << "combined " << fmt(combined) << " standalone " << fmt(standalone);
  c.require(standalone <= 0.7, "standalone <= 0.7");
  c.require(combined >= 0.95, "combined >= 0.95");
}

void c8(Check& c) {
  const Run r = run_builtin("table6", 400);
  std::vector<double> acc;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    acc.push_back(r.summaries[i].accuracy);
    c.detail << (i ? "; " : "") << "l=" << r.cells[i].l << " a=" << fmt(acc.back());
  }
  for (std::size_t i = 1; i < acc.size(); ++i) c.require(acc[i] > acc[i - 1], "strictly increasing in l");
  c.require(acc.back() >= 0.95, "a(5000) >= 0.95");
}

void c9(Check& c) {
  const Run r = run_builtin("fig9", 400);
  std::vector<double> acc, err;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    acc.push_back(r.summaries[i].accuracy);
    err.push_back(r.summaries[i].estimation_error_mean);
    c.detail << (i ? "; " : "") << "lambda=" << r.cells[i].lambda << " a=" << fmt(acc.back()) << " E=" << fmt(err.back(), 4);
  }
  for (std::size_t i = 1; i < acc.size(); ++i) {
    c.require(acc[i] <= acc[i - 1], "accuracy non-increasing in lambda");
    c.require(err[i] >= err[i - 1], "E non-decreasing in lambda");
  }
  c.require(std::abs(acc.back() - 0.30) <= 0.07, "a(1) = 0.30 +- 0.07");
  c.require(acc.front() >= 0.95, "a(0) >= 0.95");
}

void c10(Check& c) {
  const double eps = 2.89;
  const double want = std::exp(eps) / (std::exp(eps) + 2.0);
  const CorrelationModel model = make_synthetic_model({1000, 3, 0.3, 0.04, 99});
  std::size_t kept = 0, total = 0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const Sequence x = sample_sequence(model, derive_seed(7, {k}));
    const Sequence y = randomized_response(x, eps, derive_seed(8, {k}));
    for (Position j = 0; j < x.size(); ++j) kept += x[j] == y[j];
    total += x.size();
  }
  const double freq = static_cast<double>(kept) / static_cast<double>(total);
  const Run r = run_builtin("rr-baseline", 400, nullptr, {{"rr_epsilon", eps}});
  const CellSummary& s = r.summaries.front();
  c.detail << "keep " << fmt(freq, 4) << " (expected " << fmt(want, 4) << "); accuracy " << fmt(s.accuracy)
           << "; E " << fmt(s.estimation_error_mean, 4);
  c.require(std::abs(freq - want) <= 0.005, "keep frequency within 0.005");
  c.require(std::abs(s.accuracy - 0.30) <= 0.07, "accuracy 0.30 +- 0.07");
  c.require(s.estimation_error_mean >= 0.2 && s.estimation_error_mean <= 0.35, "E in [0.2, 0.35]");
}

void c11(Check& c) {
  const oracles::SweepResult assign = oracles::sweep_assign(10000, 2024);
  const oracles::SweepResult weights = oracles::sweep_majority_weights(10000, 77);
  const oracles::SweepResult draws = oracles::sweep_majority_draws(2000, 5);
  const oracles::SweepResult scores = oracles::sweep_scores(5);
  c.detail << "assign " << assign.instances << " max err " << assign.max_error << "; weights " << weights.instances
           << " max err " << weights.max_error << "; draws " << draws.instances << " mismatches " << draws.violations
           << "; scores " << scores.instances << " max err " << scores.max_error;
  c.require(assign.instances >= 10000 && assign.max_error <= 1e-9 && assign.violations == 0, "assign oracle");
  c.require(weights.max_error <= 1e-9 && weights.violations == 0, "t-normalisation oracle");
  c.require(draws.violations == 0, "sampled votes follow the closed form");
  c.require(scores.max_error <= 1e-9, "probabilistic scores oracle");
}

double median(std::vector<double> t) {
  std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
  return t[t.size() / 2];
}

// Median times of two workloads, sampled alternately so that background
// drift on a shared machine hits both sides alike.
template <class F, class G>
std::pair<double, double> median_ms_interleaved(std::size_t reps, F&& small, G&& large) {
  std::vector<double> a, b;
  auto time = [](auto&& f, std::size_t k) {
    const auto start = std::chrono::steady_clock::now();
    f(k);
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  for (std::size_t k = 0; k < reps; ++k) {
    a.push_back(time(small, k));
    b.push_back(time(large, k));
  }
  return {median(a), median(b)};
}

void c12(Check& c) {
  const FingerprintParams params;
  // Each rep gets its own individual (and each detection its own leaker):
  // repeating one input lets the branch predictor learn it at small l.
  struct GenSetup {
    CorrelationModel model;
    std::vector<Sequence> people;
  };
  auto gen_setup = [](std::size_t l) {
    GenSetup g{make_synthetic_model({l, 3, 0.3, 0.04, 5}), {}};
    for (std::uint64_t k = 0; k < 301; ++k) g.people.push_back(sample_sequence(g.model, 100 + k));
    return g;
  };
  auto generate = [&](const GenSetup& g) {
    return [&](std::size_t k) { g_sink = g_sink + fingerprint_alg1(g.people[k], params, g.model, k).record.count(); };
  };
  struct DetSetup {
    SharingLedger ledger;
    std::vector<Sequence> leaks;
  };
  auto det_setup = [&](std::size_t l, std::size_t sps) {
    const CorrelationModel model = make_synthetic_model({l, 3, 0.3, 0.04, 5});
    const Sequence x = sample_sequence(model, 6);
    DetSetup d{share_all(x, params, model, {10, auto_block_size(params.p, l, 10)}, sps, 9), {}};
    for (std::size_t k = 0; k < 51; ++k)
      d.leaks.push_back(flipping_attack(reconstruct_copy(d.ledger, k * sps / 51), 0.1, k));
    return d;
  };
  auto detect = [](const DetSetup& d) {
    return [&](std::size_t k) { g_sink = g_sink + detect_combined(d.ledger, d.leaks[k]).accused; };
  };

  double g1 = 0, g10 = 0, d1 = 0, d_sps = 0, d1_again = 0, d_l = 0;
  {
    const GenSetup a = gen_setup(1000), b = gen_setup(10000);
    std::tie(g1, g10) = median_ms_interleaved(a.people.size(), generate(a), generate(b));
  }
  {
    const DetSetup base = det_setup(1000, 1000);
    {
      const DetSetup many = det_setup(1000, 10000);
      std::tie(d1, d_sps) = median_ms_interleaved(base.leaks.size(), detect(base), detect(many));
    }
    const DetSetup longer = det_setup(10000, 1000);
    std::tie(d1_again, d_l) = median_ms_interleaved(base.leaks.size(), detect(base), detect(longer));
  }
  const double gen_ratio = g10 / g1, sps_ratio = d_sps / d1, l_ratio = d_l / d1_again;
  c.detail << "generation l=1000 " << fmt(g1) << " ms (x" << fmt(gen_ratio, 2) << " at 10x l); detection 1000 SPs "
           << fmt(d1) << " ms (x" << fmt(sps_ratio, 2) << " at 10000 SPs, x" << fmt(l_ratio, 2) << " at 10x l)";
  c.require(g1 < 5.0, "generation under 5 ms");
  c.require(d1 < 50.0, "detection under 50 ms");
  for (double ratio : {gen_ratio, sps_ratio, l_ratio})
    c.require(ratio >= 8.0 && ratio <= 12.0, "linear scaling within 20%");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--threads", g_threads)->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, void (*)(Check&)>> criteria{
      {"fingerprint budget", c1},     {"flipping vs subset", c2},       {"attacker utility law", c3},
      {"correlation attack", c4},     {"fingerprint rate trend", c5},   {"collusion", c6},
      {"standalone code baseline", c7}, {"data size scaling", c8},      {"hybrid trade-off", c9},
      {"randomized response", c10},   {"oracle equivalence", c11},      {"performance", c12}};
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(check);
    } catch (const std::exception& e) {
      check.pass = false;
      check.detail << " [error: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (check.pass ? "PASS" : "FAIL") << "  C" << id << " " << criteria[i].first << ": "
              << check.detail.str() << " (" << fmt(secs, 1) << " s)" << std::endl;
    failed += !check.pass;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
