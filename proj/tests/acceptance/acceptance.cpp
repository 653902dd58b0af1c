// Acceptance runner: one PASS/FAIL line per criterion.
//   rfrel_acceptance [--only 1,4,8] [--workdir DIR] [--keep]

#include <CLI11.hpp>

#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "../oracles.hpp"
#include "rfrel/pipeline.hpp"
#include "rfrel/rng.hpp"
#include "rfrel/stats.hpp"

using namespace rfrel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

DissimilarityMatrix random_matrix(int tx, int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> step(16, 40);
  return DissimilarityMatrix::from_function(tx, n, [&](int, int) { return step(rng) / 40.0; });
}

std::vector<double> tau_grid() { return AnalyticsConfig::default_tau_grid(); }

// 1. Binning oracle.
Outcome binning_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> lo(-2.0, -0.2), width(0.3, 3.0);
  std::normal_distribution<float> normal(0.0f, 0.6f);
  int mismatches = 0;
  for (int seg = 0; seg < 50; ++seg) {
    const double i0 = lo(rng), q0 = lo(rng);
    const Extent e{i0, i0 + width(rng), q0, q0 + width(rng)};
    std::uniform_real_distribution<float> ui(static_cast<float>(e.i_min - 0.1), static_cast<float>(e.i_max + 0.1));
    std::uniform_real_distribution<float> uq(static_cast<float>(e.q_min - 0.1), static_cast<float>(e.q_max + 0.1));
    std::vector<Sample> s(10000);
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = i % 2 ? Sample{ui(rng), uq(rng)} : Sample{normal(rng), normal(rng)};
    // Samples sitting exactly on bin edges and on the closing edges.
    for (int k = 0; k < 20; ++k) {
      const int b = static_cast<int>(rng() % (kTileGrid + 1));
      s[static_cast<std::size_t>(k)] = {static_cast<float>(bin_edge(e.i_min, e.i_max, b)),
                                        static_cast<float>(bin_edge(e.q_min, e.q_max, kTileGrid - b))};
    }
    mismatches += iq_to_image(s, e).counts != oracle::bin(s, e);
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0,
          std::to_string(50 - mismatches) + "/50 segments exact, " + fmt(t, 2) + " s (limit 10 s)"};
}

// Deltas of 20 synthetic pairs at the desk profile; same or separated state.
std::vector<double> synthetic_pair_deltas(bool separated, double& max_distance, double& min_distance) {
  const MutationModel model;
  max_distance = 0.0;
  min_distance = 1e300;
  std::vector<double> deltas;
  for (int p = 0; p < 20; ++p) {
    const auto base = static_cast<std::uint64_t>(separated ? 2000 + p : 1000 + p);
    const auto states = sample_state_set(model, base);
    const int other = separated ? 1 : 0;
    const double d = state_distance(states[0].params, states[static_cast<std::size_t>(other)].params);
    max_distance = std::max(max_distance, d);
    min_distance = std::min(min_distance, d);
    std::vector<MeasurementFeatures> features;
    for (int m = 0; m < 2; ++m) {
      Rng rng(derive_seed(base, Stream::measurement, {static_cast<std::uint64_t>(m)}));
      const auto samples = synth_measurement(states[static_cast<std::size_t>(m == 0 ? 0 : other)], model, 1000000, rng);
      features.push_back(extract_features(segment_measurement(samples, 10000, 100), 28));
    }
    const ReferencePairDiscriminator disc(std::move(features), SplitSpec{}, TrainConfig{});
    deltas.push_back(disc.run({1, 1, 2, pair_seed(base, 1, 1, 2)}).delta);
  }
  return deltas;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt(x);
  return s;
}

// 2. Same-state calibration.
Outcome calibration() {
  const auto t0 = Clock::now();
  double dmax = 0, dmin = 0;
  auto deltas = synthetic_pair_deltas(false, dmax, dmin);
  const double t = seconds_since(t0);
  std::sort(deltas.begin(), deltas.end());
  const double median = quantile_sorted(deltas, 0.5);
  return {median >= 0.45 && median <= 0.60 && t < 300.0 && dmax == 0.0,
          "median delta " + fmt(median) + " (band [0.45, 0.60]), " + fmt(t, 1) + " s; deltas: " + list(deltas)};
}

// 3. Separated-state discrimination.
Outcome separation() {
  const auto t0 = Clock::now();
  double dmax = 0, dmin = 0;
  const auto deltas = synthetic_pair_deltas(true, dmax, dmin);
  const double t = seconds_since(t0);
  const double worst = *std::min_element(deltas.begin(), deltas.end());
  return {worst >= 0.95 && t < 300.0 && dmin > 0.0,
          "min delta " + fmt(worst) + " (>= 0.95), state distance >= " + fmt(dmin, 2) + ", " + fmt(t, 1) +
              " s; deltas: " + list(deltas)};
}

// Full default-profile pipeline runs, shared by criteria 4 and 8.
struct PipelineRun {
  fs::path dir;
  double seconds = 0.0;
  nlohmann::json summary;
};

class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) {}

  const PipelineRun& run(int workers) {
    auto it = runs_.find(workers);
    if (it != runs_.end()) return it->second;
    RunSpec spec;
    spec.seed = 20240607;
    spec.workers = workers;
    spec.output_dir = root_ / ("run_w" + std::to_string(workers));
    fs::remove_all(spec.output_dir);
    const auto t0 = Clock::now();
    cmd_simulate(spec);
    const auto m = cmd_matrix(spec);
    if (m.exit_code != kExitOk) throw Error("matrix run incomplete");
    auto bundle = cmd_report(spec);
    PipelineRun r{spec.output_dir, seconds_since(t0), std::move(bundle.summary)};
    return runs_.emplace(workers, std::move(r)).first->second;
  }

 private:
  fs::path root_;
  std::map<int, PipelineRun> runs_;
};

// 4. Structure recovery on the default acceptance corpus.
Outcome structure_recovery(Workspace& ws) {
  const auto& r = ws.run(8);
  int two = 0;
  bool ari_ok = true;
  std::string per_tx;
  for (const auto& p : r.summary.at("partitions")) {
    const double ari = p.at("adjusted_rand_index").get<double>();
    const int clusters = p.at("clusters").get<int>();
    ari_ok = ari_ok && ari >= 0.9;
    two += clusters == 2;
    per_tx += " tx" + std::to_string(p.at("tx_id").get<int>()) + ":ARI=" + fmt(ari) + ",k=" + std::to_string(clusters);
  }
  const bool five = r.summary.at("partitions").size() == 5;
  return {five && ari_ok && two >= 4 && r.seconds < 1800.0,
          std::to_string(two) + "/5 with 2 clusters," + per_tx + "; " + fmt(r.seconds, 1) + " s"};
}

// 5. Graph analytics against brute force.
Outcome graph_oracles() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(2, 12);
  std::uniform_int_distribution<int> tau_step(0, 20);
  const auto grid = tau_grid();
  int failures = 0;
  std::size_t closures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    const auto m = random_matrix(1, n, rng);
    const double tau = tau_step(rng) / 20.0;
    const auto g = build_graph(m, tau);
    bool ok = clusters(g).labels == oracle::components(g);

    const std::vector<DissimilarityMatrix> one{m};
    const std::vector<double> taus{tau};
    const auto pdf = degree_pdf(one, taus).front();
    std::vector<std::size_t> tally(static_cast<std::size_t>(n), 0);
    for (int x = 1; x <= n; ++x) ++tally[static_cast<std::size_t>(oracle::degree(m, x, tau))];
    tally.resize(pdf.tally.size());
    ok = ok && pdf.tally == tally;

    const auto possible = static_cast<double>(n * (n - 1) / 2);
    const auto fractions = edge_fraction_vs_tau(m, grid);
    for (const auto& f : fractions) {
      ok = ok && f.edges == oracle::edge_count(m, f.tau) && f.fraction == f.edges / possible;
      ok = ok && fully_connected_ratio(m, f.tau, 2).ratio == f.fraction;
    }
    for (int k = 2; k <= std::min(4, n); ++k) {
      const auto r = fully_connected_ratio(g, k);
      ok = ok && r.exact && r.complete == oracle::cliques(g, k) &&
           r.ratio == static_cast<double>(oracle::cliques(g, k)) / static_cast<double>(binomial_exact(n, k));
    }
    for (auto mode : {ObservabilityMode::component_closure, ObservabilityMode::adjacency}) {
      const auto curve = observability_curve(g, mode);
      for (int k = 1; k <= n; ++k) {
        bool exact = false;
        std::vector<double> cov;
        for (const auto& s : subsets_for_size(n, k, {}, exact)) {
          const double c = static_cast<double>(oracle::closure(g, s, mode).size()) / n;
          ok = ok && coverage(g, s, mode) == c;
          cov.push_back(c);
          ++closures;
        }
        const auto& row = curve[static_cast<std::size_t>(k - 1)];
        for (std::size_t i = 0; i < row.quantiles.size(); ++i)
          ok = ok && std::abs(row.quantiles[i] - oracle::type7(cov, kDefaultQuantiles[i])) < 1e-12;
      }
    }
    failures += !ok;
  }
  return {failures == 0, std::to_string(100 - failures) + "/100 graphs match (" + std::to_string(closures) +
                             " closures checked)"};
}

// 6. Combinatorial identities for a 5x25 layout.
Outcome combinatorics() {
  std::mt19937_64 rng(6);
  std::vector<DissimilarityMatrix> ms;
  for (int tx = 1; tx <= 5; ++tx) ms.push_back(random_matrix(tx, 25, rng));
  const auto k2 = fully_connected_ratio(ms[0], 0.75, 2).subsets;
  const auto k3 = fully_connected_ratio(ms[0], 0.75, 3).subsets;
  const auto k4 = fully_connected_ratio(ms[0], 0.75, 4);
  bool exact = false;
  const auto enumerated = subsets_for_size(25, 4, {}, exact).size();
  const auto rows = temporal_quantiles(ms);
  const auto d1 = rows.front().pairs, d24 = rows.back().pairs;
  const bool ok = k2 == 300 && k3 == 2300 && k4.subsets == 12650 && k4.exact && enumerated == 12650 && exact &&
                  edge_fraction_vs_tau(ms[0], tau_grid()).front().possible == 300 && rows.size() == 24 &&
                  d1 == 120 && d24 == 5;
  return {ok, "C(25,k) = " + std::to_string(k2) + "/" + std::to_string(k3) + "/" + std::to_string(k4.subsets) +
                  ", temporal pairs d=1: " + std::to_string(d1) + ", d=24: " + std::to_string(d24)};
}

// 7. Monotonicity in tau under the strict rule.
Outcome monotonicity() {
  std::mt19937_64 rng(7);
  const auto grid = tau_grid();
  int violations = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_matrix(trial + 1, 25, rng);
    std::optional<ReliabilityGraph> prev;
    std::vector<double> prev_median, prev_ratio(5, 0.0);
    int prev_clusters = m.n() + 1;
    for (double tau : grid) {
      const auto g = build_graph(m, tau);
      const int count = clusters(g).count;
      violations += count > prev_clusters;
      prev_clusters = count;
      std::vector<double> ratio(5, 0.0);
      for (int k = 2; k <= 4; ++k) {
        ratio[static_cast<std::size_t>(k)] = fully_connected_ratio(g, k).ratio;
        violations += ratio[static_cast<std::size_t>(k)] < prev_ratio[static_cast<std::size_t>(k)];
      }
      prev_ratio = ratio;
      std::vector<double> median;
      for (const auto& row : observability_curve(g, ObservabilityMode::component_closure))
        median.push_back(row.quantiles[1]);
      if (prev) {
        violations += g.edge_count() < prev->edge_count();
        for (int x = 1; x <= m.n(); ++x) violations += g.degree(x) < prev->degree(x);
        for (std::size_t k = 0; k < median.size(); ++k) violations += median[k] < prev_median[k];
      }
      prev = g;
      prev_median = median;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over 10 matrices x 21 tau"};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root);
    if (*rel.begin() == "logs") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[rel.string()] = os.str();
  }
  return out;
}

// 8. Worker-count independence.
Outcome determinism(Workspace& ws) {
  const auto& a = ws.run(1);
  const auto& b = ws.run(8);
  const auto ta = tree(a.dir), tb = tree(b.dir);
  std::size_t matrices = 0, reports = 0, differing = 0;
  std::set<std::string> names;
  for (const auto& [k, _] : ta) names.insert(k);
  for (const auto& [k, _] : tb) names.insert(k);
  for (const auto& name : names) {
    const auto ia = ta.find(name), ib = tb.find(name);
    if (ia == ta.end() || ib == tb.end() || ia->second != ib->second) ++differing;
    matrices += name.rfind("matrices/", 0) == 0;
    reports += name.rfind("report/", 0) == 0;
  }
  return {differing == 0 && matrices == 5 && reports == 9,
          std::to_string(names.size()) + " files compared (" + std::to_string(matrices) + " matrices, " +
              std::to_string(reports) + " report files), " + std::to_string(differing) + " differ; runs " +
              fmt(a.seconds, 1) + " s (1 worker) / " + fmt(b.seconds, 1) + " s (8 workers)"};
}

// 9. Trace round trips and corruption classes.
Outcome persistence(const fs::path& root) {
  const auto dir = root / "persistence";
  fs::create_directories(dir);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> len(1, 4096);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::size_t exact = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Sample> s(len(rng));
    for (auto& v : s) {
      // Any finite float bit pattern, including subnormals and -0.
      auto draw = [&] {
        std::uint32_t b;
        float f;
        do {
          b = bits(rng);
          std::memcpy(&f, &b, sizeof f);
        } while (!std::isfinite(f));
        return f;
      };
      v = {draw(), draw()};
    }
    const auto path = dir / "trace.iq";
    write_iq_samples(s, path);
    const auto back = read_iq(path, s.size());
    exact += back.size() == s.size() && std::memcmp(back.data(), s.data(), s.size() * sizeof(Sample)) == 0;
  }

  MutationModel model;
  const auto corpus_dir = dir / "corpus";
  const auto manifest_file = synth_corpus(model, 2, 3, 2000, corpus_dir, 1).manifest_path;
  const auto pristine = read_manifest(manifest_file);
  std::string detail;
  int classes = 0;
  auto expect = [&]<typename E>(const char* name, int tx, int meas) {
    try {
      (void)load_corpus(manifest_file);
      detail += std::string(" ") + name + ":accepted";
    } catch (const E& e) {
      const bool named = e.entry() && e.entry()->transmitter_id == tx && e.entry()->measurement_index == meas;
      classes += named;
      detail += std::string(" ") + name + (named ? ":rejected" : ":wrong-entry");
    } catch (const std::exception& e) {
      detail += std::string(" ") + name + ":wrong-error(" + e.what() + ")";
    }
  };
  const auto trace_file = [&](int tx, int meas) {
    for (const auto& t : pristine.transmitters)
      if (t.transmitter_id == tx)
        for (const auto& d : t.measurements)
          if (d.measurement_index == meas) return corpus_dir / d.path;
    return fs::path();
  };
  const auto backup = dir / "backup.iq";

  fs::copy_file(trace_file(2, 2), backup, fs::copy_options::overwrite_existing);
  fs::resize_file(trace_file(2, 2), fs::file_size(backup) - 8);
  expect.operator()<CorruptCorpusError>("size", 2, 2);
  fs::copy_file(backup, trace_file(2, 2), fs::copy_options::overwrite_existing);

  fs::copy_file(trace_file(1, 3), backup, fs::copy_options::overwrite_existing);
  {
    std::fstream f(trace_file(1, 3), std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(100);
    char c = 0;
    f.read(&c, 1);
    c = static_cast<char>(c ^ 0x01);
    f.seekp(100);
    f.write(&c, 1);
  }
  expect.operator()<ChecksumMismatchError>("checksum", 1, 3);
  fs::copy_file(backup, trace_file(1, 3), fs::copy_options::overwrite_existing);

  auto gap = pristine;
  gap.transmitters[0].measurements.erase(gap.transmitters[0].measurements.begin() + 1);  // {1, 3}
  save_manifest(gap, manifest_file);
  expect.operator()<IndexGapError>("index-gap", 1, 3);
  save_manifest(pristine, manifest_file);
  const bool clean = load_corpus(manifest_file).size() == 6;

  return {exact == 1000 && classes == 3 && clean,
          std::to_string(exact) + "/1000 traces bit-exact; corruption:" + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rfrel acceptance criteria"};
  std::vector<int> only;
  std::string workdir;
  bool keep = false;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--workdir", workdir, "Scratch directory (default: a fresh temp dir)");
  app.add_flag("--keep", keep, "Keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  const bool own_dir = workdir.empty();
  const fs::path root = own_dir ? fs::temp_directory_path() / ("rfrel_acceptance_" + std::to_string(::getpid()))
                                : fs::path(workdir);
  fs::create_directories(root);
  Workspace ws(root);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"binning oracle", binning_oracle},
      {"same-state calibration", calibration},
      {"separated-state discrimination", separation},
      {"end-to-end structure recovery", [&] { return structure_recovery(ws); }},
      {"graph analytics oracles", graph_oracles},
      {"combinatorial identities", combinatorics},
      {"monotonicity sweep", monotonicity},
      {"determinism across worker counts", [&] { return determinism(ws); }},
      {"round-trip persistence", [&] { return persistence(root); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  if (own_dir && !keep) fs::remove_all(root);
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
