#include "rfrel/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <map>
#include <sstream>

#include "rfrel/plugin.hpp"
#include "rfrel/stats.hpp"

namespace rfrel {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> AnalyticsConfig::default_tau_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  return grid;
}

fs::path RunSpec::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

std::size_t RunSpec::samples_per_measurement() const {
  if (corpus.samples_per_measurement > 0) return corpus.samples_per_measurement;
  return imaging.samples_per_image * imaging.images_per_measurement;
}

MutationModel RunSpec::synth_model() const {
  MutationModel m = corpus.model;
  m.seed = seed;
  return m;
}

namespace {

void check_tau(double tau, const char* what) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

void RunSpec::validate() const {
  // Nested config checks throw ArgumentError; a bad spec is a validation failure.
  try {
    if (corpus.kind == CorpusSource::Kind::synth) {
      corpus.model.validate();
      if (corpus.n_tx < 1 || corpus.n_meas < 2)
        throw ValidationError("synthetic corpus needs n_tx >= 1 and n_meas >= 2");
    } else {
      if (corpus.manifest.empty()) throw ValidationError("corpus.manifest is required for a path corpus");
      if (!fs::exists(resolve(corpus.manifest)))
        throw ValidationError("corpus manifest not found: " + resolve(corpus.manifest).string());
      if (!corpus.ground_truth.empty() && !fs::exists(resolve(corpus.ground_truth)))
        throw ValidationError("ground-truth sidecar not found: " + resolve(corpus.ground_truth).string());
    }
    if (imaging.samples_per_image == 0 || imaging.images_per_measurement == 0)
      throw ValidationError("imaging budgets must be positive");
    if (samples_per_measurement() < imaging.samples_per_image * imaging.images_per_measurement)
      throw ValidationError("samples_per_measurement cannot cover the image budget");
    if (imaging.png_channels != 1 && imaging.png_channels != 3) throw ValidationError("png_channels must be 1 or 3");
    imaging.extent.validate();
    discriminator.split.validate();
    discriminator.reference.validate();
    (void)split_counts(imaging.images_per_measurement, discriminator.split);
    if (discriminator.kind == DiscriminatorConfig::Kind::plugin && discriminator.plugin_command.empty())
      throw ValidationError("discriminator.command is required for a plugin discriminator");
    const auto& a = analytics;
    if (a.tau_grid.empty() || !std::is_sorted(a.tau_grid.begin(), a.tau_grid.end()))
      throw ValidationError("analytics.tau_grid must be non-empty and ascending");
    for (double t : a.tau_grid) check_tau(t, "tau_grid values");
    for (double t : a.degree_taus) check_tau(t, "degree_taus values");
    check_tau(a.cluster_tau, "cluster_tau");
    check_tau(a.observability.tau, "observability.tau");
    for (int k : a.k_list)
      if (k < 2) throw ValidationError("k_list entries must be >= 2");
    if (!(a.eps_hi >= 0.0 && a.eps_hi < 0.25 && a.eps_lo >= 0.0 && a.eps_lo < 0.25))
      throw ValidationError("region tolerances must lie in [0, 0.25)");
    for (double q : a.temporal_quantiles)
      if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile levels must lie in [0, 1]");
    for (double q : a.observability.quantiles)
      if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile levels must lie in [0, 1]");
    if (a.observability.samples == 0) throw ValidationError("observability.samples must be positive");
  } catch (const ArgumentError& e) {
    throw ValidationError(std::string("invalid run spec: ") + e.what());
  }
}

json to_json(const RunSpec& spec, bool include_execution) {
  json corpus;
  if (spec.corpus.kind == CorpusSource::Kind::synth) {
    json model = to_json(spec.corpus.model);
    model.erase("seed");
    corpus = {{"source", "synth"},
              {"n_tx", spec.corpus.n_tx},
              {"n_meas", spec.corpus.n_meas},
              {"samples_per_measurement", spec.samples_per_measurement()},
              {"model", std::move(model)}};
  } else {
    corpus = {{"source", "path"}, {"manifest", spec.corpus.manifest}};
    if (!spec.corpus.ground_truth.empty()) corpus["ground_truth"] = spec.corpus.ground_truth;
  }
  json disc = {{"kind", spec.discriminator.kind == DiscriminatorConfig::Kind::reference ? "reference" : "plugin"},
               {"split", to_json(spec.discriminator.split)},
               {"reference", to_json(spec.discriminator.reference)}};
  if (spec.discriminator.kind == DiscriminatorConfig::Kind::plugin)
    disc["command"] = spec.discriminator.plugin_command;
  const auto& a = spec.analytics;
  json analytics = {
      {"tau_grid", a.tau_grid},
      {"degree_taus", a.degree_taus},
      {"k_list", a.k_list},
      {"cluster_tau", a.cluster_tau},
      {"edge_rule", to_string(a.edge_rule)},
      {"regions", {{"eps_hi", a.eps_hi}, {"eps_lo", a.eps_lo}}},
      {"temporal_quantiles", a.temporal_quantiles},
      {"observability",
       {{"tau", a.observability.tau},
        {"mode", to_string(a.observability.mode)},
        {"enumeration_budget", a.observability.enumeration_budget},
        {"samples", a.observability.samples},
        {"quantiles", a.observability.quantiles},
        {"coverage_target", a.observability.coverage_target}}}};
  json doc = {{"schema_version", kRunSpecSchemaVersion},
              {"seed", spec.seed},
              {"corpus", std::move(corpus)},
              {"imaging",
               {{"samples_per_image", spec.imaging.samples_per_image},
                {"images_per_measurement", spec.imaging.images_per_measurement},
                {"extent", to_json(spec.imaging.extent)},
                {"png_channels", spec.imaging.png_channels},
                {"export_csv", spec.imaging.export_csv}}},
              {"discriminator", std::move(disc)},
              {"analytics", std::move(analytics)}};
  if (include_execution) {
    doc["output_dir"] = spec.output_dir.string();
    doc["workers"] = spec.workers;
  }
  return doc;
}

RunSpec run_spec_from_json(const json& doc, const fs::path& base_dir) {
  RunSpec spec;
  spec.base_dir = base_dir;
  try {
    const int version = doc.value("schema_version", kRunSpecSchemaVersion);
    if (version != kRunSpecSchemaVersion)
      throw ValidationError("unsupported run-spec schema_version " + std::to_string(version));
    spec.seed = doc.value("seed", spec.seed);
    spec.output_dir = doc.value("output_dir", spec.output_dir.string());
    spec.workers = doc.value("workers", spec.workers);

    if (doc.contains("corpus")) {
      const auto& c = doc.at("corpus");
      const auto source = c.value("source", std::string("synth"));
      if (source == "synth") {
        spec.corpus.kind = CorpusSource::Kind::synth;
        spec.corpus.n_tx = c.value("n_tx", spec.corpus.n_tx);
        spec.corpus.n_meas = c.value("n_meas", spec.corpus.n_meas);
        if (c.contains("samples_per_measurement") && !c.at("samples_per_measurement").is_null())
          spec.corpus.samples_per_measurement = c.at("samples_per_measurement").get<std::size_t>();
        if (c.contains("model")) spec.corpus.model = model_from_json(c.at("model"));
      } else if (source == "path") {
        spec.corpus.kind = CorpusSource::Kind::path;
        spec.corpus.manifest = c.at("manifest").get<std::string>();
        spec.corpus.ground_truth = c.value("ground_truth", std::string());
      } else {
        throw ValidationError("corpus.source must be 'synth' or 'path'");
      }
    }
    if (doc.contains("imaging")) {
      const auto& i = doc.at("imaging");
      spec.imaging.samples_per_image = i.value("samples_per_image", spec.imaging.samples_per_image);
      spec.imaging.images_per_measurement = i.value("images_per_measurement", spec.imaging.images_per_measurement);
      if (i.contains("extent")) spec.imaging.extent = extent_policy_from_json(i.at("extent"));
      spec.imaging.png_channels = i.value("png_channels", spec.imaging.png_channels);
      spec.imaging.export_csv = i.value("export_csv", spec.imaging.export_csv);
    }
    if (doc.contains("discriminator")) {
      const auto& d = doc.at("discriminator");
      const auto kind = d.value("kind", std::string("reference"));
      if (kind == "reference") spec.discriminator.kind = DiscriminatorConfig::Kind::reference;
      else if (kind == "plugin") spec.discriminator.kind = DiscriminatorConfig::Kind::plugin;
      else throw ValidationError("discriminator.kind must be 'reference' or 'plugin'");
      if (d.contains("split")) spec.discriminator.split = split_spec_from_json(d.at("split"));
      if (d.contains("reference")) spec.discriminator.reference = train_config_from_json(d.at("reference"));
      spec.discriminator.plugin_command = d.value("command", std::string());
    }
    if (doc.contains("analytics")) {
      const auto& a = doc.at("analytics");
      auto& out = spec.analytics;
      if (a.contains("tau_grid")) {
        const auto& g = a.at("tau_grid");
        if (g.is_array()) {
          out.tau_grid = g.get<std::vector<double>>();
        } else {
          const double start = g.at("start").get<double>();
          const double stop = g.at("stop").get<double>();
          const int count = g.at("count").get<int>();
          if (count < 2) throw ValidationError("tau_grid.count must be >= 2");
          out.tau_grid.clear();
          for (int k = 0; k < count; ++k) out.tau_grid.push_back(start + (stop - start) * k / (count - 1));
        }
      }
      out.degree_taus = a.value("degree_taus", out.degree_taus);
      out.k_list = a.value("k_list", out.k_list);
      out.cluster_tau = a.value("cluster_tau", out.cluster_tau);
      if (a.contains("edge_rule")) out.edge_rule = edge_rule_from_string(a.at("edge_rule").get<std::string>());
      if (a.contains("regions")) {
        out.eps_hi = a.at("regions").value("eps_hi", out.eps_hi);
        out.eps_lo = a.at("regions").value("eps_lo", out.eps_lo);
      }
      out.temporal_quantiles = a.value("temporal_quantiles", out.temporal_quantiles);
      if (a.contains("observability")) {
        const auto& o = a.at("observability");
        auto& obs = out.observability;
        obs.tau = o.value("tau", obs.tau);
        if (o.contains("mode")) obs.mode = observability_mode_from_string(o.at("mode").get<std::string>());
        obs.enumeration_budget = o.value("enumeration_budget", obs.enumeration_budget);
        obs.samples = o.value("samples", obs.samples);
        obs.quantiles = o.value("quantiles", obs.quantiles);
        obs.coverage_target = o.value("coverage_target", obs.coverage_target);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed run spec: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ValidationError(std::string("invalid run spec: ") + e.what());
  }
  return spec;
}

RunSpec load_run_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("run spec not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("run spec is not valid JSON: " + std::string(e.what()));
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return run_spec_from_json(doc, base);
}

RunLayout::RunLayout(const fs::path& output_dir)
    : root(output_dir),
      corpus_dir(output_dir / "corpus"),
      images_dir(output_dir / "images"),
      matrices_dir(output_dir / "matrices"),
      report_dir(output_dir / "report"),
      graphs_dir(output_dir / "graphs"),
      logs_dir(output_dir / "logs"),
      jobs_dir(output_dir / "jobs") {}

fs::path RunLayout::matrix_file(int tx_id) const {
  char name[32];
  std::snprintf(name, sizeof name, "tx%02d.json", tx_id);
  return matrices_dir / name;
}

fs::path RunLayout::image_file(int tx_id, int measurement_index, std::size_t segment) const {
  char name[64];
  std::snprintf(name, sizeof name, "tx%02d/m%03d/img_%04zu.png", tx_id, measurement_index, segment);
  return images_dir / name;
}

fs::path manifest_path(const RunSpec& spec) {
  if (spec.corpus.kind == CorpusSource::Kind::path) return spec.resolve(spec.corpus.manifest);
  return RunLayout(spec.resolve(spec.output_dir)).corpus_dir / kManifestFile;
}

std::optional<fs::path> ground_truth_path(const RunSpec& spec) {
  if (spec.corpus.kind == CorpusSource::Kind::synth)
    return RunLayout(spec.resolve(spec.output_dir)).corpus_dir / kGroundTruthFile;
  if (spec.corpus.ground_truth.empty()) return std::nullopt;
  return spec.resolve(spec.corpus.ground_truth);
}

RunLog::RunLog(const fs::path& dir, const std::string& command) {
  fs::create_directories(dir);
  out_.open(dir / (command + ".jsonl"), std::ios::app);
  if (!out_) throw PersistenceError("cannot open log", dir / (command + ".jsonl"));
}

void RunLog::write(json event) {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm utc{};
  gmtime_r(&t, &utc);
  char ts[32];
  std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", &utc);
  event["ts"] = ts;
  std::lock_guard lock(mutex_);
  out_ << event.dump() << '\n';
  out_.flush();
}

std::vector<TileImage> measurement_images(const Corpus& corpus, int tx_id, int measurement_index,
                                          const ImagingConfig& imaging, int workers) {
  const auto trace = corpus.trace(tx_id, measurement_index);
  return segment_measurement(trace.samples, imaging.samples_per_image, imaging.images_per_measurement,
                             imaging.extent, TileSource{tx_id, measurement_index, 0}, workers);
}

std::unique_ptr<PairDiscriminator> make_discriminator(const Corpus& corpus, int tx_id, const RunSpec& spec) {
  const auto& cfg = spec.discriminator;
  if (cfg.kind == DiscriminatorConfig::Kind::plugin) {
    const RunLayout layout(spec.resolve(spec.output_dir));
    const auto per_meas = spec.imaging.images_per_measurement;
    ImagePathResolver resolver = [layout, per_meas](int tx, int m) {
      std::vector<fs::path> paths;
      for (std::size_t s = 0; s < per_meas; ++s) {
        auto p = layout.image_file(tx, m, s);
        if (!fs::exists(p)) throw PluginError("image missing (run `images` first): " + p.string());
        paths.push_back(fs::absolute(p));
      }
      return paths;
    };
    return std::make_unique<PluginDiscriminator>(cfg.plugin_command, resolver, cfg.split, layout.jobs_dir);
  }
  std::vector<MeasurementFeatures> features;
  for (const auto& d : corpus.measurements(tx_id)) {
    const auto images = measurement_images(corpus, tx_id, d.measurement_index, spec.imaging, spec.workers);
    features.push_back(extract_features(images, cfg.reference.pool_grid, spec.workers));
  }
  return std::make_unique<ReferencePairDiscriminator>(std::move(features), cfg.split, cfg.reference);
}

MatrixRunStats dissimilarity_matrix(DissimilarityMatrix& matrix, const PairDiscriminator& disc, const RunSpec& spec,
                                    MatrixOptions options) {
  if (options.workers == 0) options.workers = spec.workers;
  return fill_matrix(matrix, disc, spec.seed, options);
}

fs::path cmd_simulate(const RunSpec& spec) {
  spec.validate();
  if (spec.corpus.kind != CorpusSource::Kind::synth)
    throw ValidationError("simulate requires corpus.source = synth");
  const RunLayout layout(spec.resolve(spec.output_dir));
  RunLog log(layout.logs_dir, "simulate");
  log.write({{"event", "start"}, {"n_tx", spec.corpus.n_tx}, {"n_meas", spec.corpus.n_meas}});
  const auto result = synth_corpus(spec.synth_model(), spec.corpus.n_tx, spec.corpus.n_meas,
                                   spec.samples_per_measurement(), layout.corpus_dir, spec.workers);
  log.write({{"event", "done"},
             {"manifest", result.manifest_path.string()},
             {"measurements", result.manifest.size()},
             {"labels", result.labels.size()}});
  return result.manifest_path;
}

std::size_t cmd_images(const RunSpec& spec) {
  spec.validate();
  const auto corpus = load_corpus(manifest_path(spec));
  const RunLayout layout(spec.resolve(spec.output_dir));
  RunLog log(layout.logs_dir, "images");
  std::size_t written = 0;
  for (int tx : corpus.transmitter_ids()) {
    for (const auto& d : corpus.measurements(tx)) {
      const auto images = measurement_images(corpus, tx, d.measurement_index, spec.imaging, spec.workers);
      fs::create_directories(layout.image_file(tx, d.measurement_index, 0).parent_path());
      for (std::size_t s = 0; s < images.size(); ++s) {
        const auto png = layout.image_file(tx, d.measurement_index, s);
        export_png(images[s], png, spec.imaging.png_channels);
        if (spec.imaging.export_csv) export_csv(images[s], fs::path(png).replace_extension(".csv"));
        ++written;
      }
      log.write({{"event", "measurement"}, {"tx_id", tx}, {"measurement_index", d.measurement_index},
                 {"images", images.size()}});
    }
  }
  return written;
}

MatrixCommandResult cmd_matrix(const RunSpec& spec, const MatrixCommandOptions& options) {
  spec.validate();
  const auto corpus = load_corpus(manifest_path(spec));
  const RunLayout layout(spec.resolve(spec.output_dir));
  fs::create_directories(layout.matrices_dir);
  RunLog log(layout.logs_dir, "matrix");

  if (spec.discriminator.kind == DiscriminatorConfig::Kind::plugin) {
    bool have_images = true;
    for (int tx : corpus.transmitter_ids())
      for (const auto& d : corpus.measurements(tx))
        have_images = have_images && fs::exists(layout.image_file(tx, d.measurement_index, 0));
    if (!have_images) cmd_images(spec);
  }

  MatrixCommandResult result;
  std::size_t budget = options.max_new_entries;
  for (int tx : corpus.transmitter_ids()) {
    const int n = static_cast<int>(corpus.measurements(tx).size());
    const auto file = layout.matrix_file(tx);
    DissimilarityMatrix matrix = fs::exists(file) ? DissimilarityMatrix::load(file) : DissimilarityMatrix(tx, n);
    if (matrix.tx_id() != tx || matrix.n() != n)
      throw ValidationError("existing matrix " + file.string() + " does not match the corpus layout");
    if (matrix.complete()) {
      result.skipped += matrix.entry_count();
      log.write({{"event", "skip"}, {"tx_id", tx}, {"reason", "complete"}});
      continue;
    }
    if (budget == 0) break;
    const auto disc = make_discriminator(corpus, tx, spec);
    MatrixOptions mo;
    mo.workers = spec.workers;
    mo.max_new_entries = budget;
    mo.checkpoint = file;
    mo.on_entry = [&](const DissimilarityRecord& r, std::chrono::duration<double> elapsed) {
      log.write({{"event", "pair"}, {"tx_id", r.tx_id}, {"x", r.x}, {"y", r.y}, {"delta", r.delta},
                 {"elapsed_s", elapsed.count()}});
    };
    mo.on_failure = [&](int x, int y, const std::string& msg) {
      log.write({{"event", "pair_failed"}, {"tx_id", tx}, {"x", x}, {"y", y}, {"error", msg}});
    };
    const auto stats = dissimilarity_matrix(matrix, *disc, spec, mo);
    matrix.save(file);
    budget -= std::min(budget, stats.computed + stats.failed);
    result.computed += stats.computed;
    result.skipped += stats.skipped;
    result.failed += stats.failed;
    log.write({{"event", "matrix"}, {"tx_id", tx}, {"computed", stats.computed}, {"skipped", stats.skipped},
               {"failed", stats.failed}, {"complete", matrix.complete()}});
  }

  bool all_complete = true;
  for (int tx : corpus.transmitter_ids()) {
    const auto file = layout.matrix_file(tx);
    all_complete = all_complete && fs::exists(file) && DissimilarityMatrix::load(file).complete();
  }
  result.exit_code = all_complete ? kExitOk : kExitIncomplete;
  return result;
}

std::vector<DissimilarityMatrix> load_matrices(const RunSpec& spec, const std::vector<int>& tx_ids) {
  const RunLayout layout(spec.resolve(spec.output_dir));
  std::vector<DissimilarityMatrix> matrices;
  for (int tx : tx_ids) {
    const auto file = layout.matrix_file(tx);
    if (!fs::exists(file))
      throw IncompleteMatrixError("transmitter " + std::to_string(tx) + ": matrix file missing (" + file.string() + ")");
    matrices.push_back(DissimilarityMatrix::load(file));
    matrices.back().require_complete();
  }
  return matrices;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, std::uint64_t seed, const std::string& header) : path_(path), out_(path) {
    if (!out_) throw PersistenceError("cannot open for writing", path);
    out_ << "# rfrel " << kVersion << " seed=" << seed << '\n' << header << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cells, first = false), ...);
    out_ << '\n';
  }
  fs::path close() {
    out_.close();
    if (!out_) throw PersistenceError("write failed", path_);
    return path_;
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::string quantile_header(const std::vector<double>& qs) {
  std::string h;
  for (double q : qs) h += ",q" + num(q);
  return h;
}

}  // namespace

ReportBundle cmd_report(const RunSpec& spec) {
  spec.validate();
  const auto manifest = read_manifest(manifest_path(spec));
  check_manifest_structure(manifest);
  std::vector<int> tx_ids;
  for (const auto& t : manifest.transmitters) tx_ids.push_back(t.transmitter_id);
  std::sort(tx_ids.begin(), tx_ids.end());
  const auto matrices = load_matrices(spec, tx_ids);

  const RunLayout layout(spec.resolve(spec.output_dir));
  fs::create_directories(layout.report_dir);
  fs::create_directories(layout.graphs_dir);
  RunLog log(layout.logs_dir, "report");
  const auto& a = spec.analytics;
  const auto seed = spec.seed;
  ReportBundle bundle;
  json summary = {{"toolkit", "rfrel"}, {"version", kVersion}, {"seed", seed},
                  {"run_spec", to_json(spec, false)}, {"transmitters", tx_ids}};

  // Regions and the sorted hit-rate series.
  const auto regions = region_decomposition(matrices, a.eps_hi, a.eps_lo);
  {
    CsvFile f(layout.report_dir / "regions.csv", seed, "region,count,fraction");
    const auto total = static_cast<double>(regions.total());
    f.row("R1", regions.r1_count, num(regions.r1_count / total));
    f.row("R2", regions.r2_count, num(regions.r2_count / total));
    f.row("R3", regions.r3_count, num(regions.r3_count / total));
    f.row("total", regions.total(), num(1.0));
    bundle.files.push_back(f.close());
  }
  {
    CsvFile f(layout.report_dir / "hit_rate.csv", seed, "rank,delta");
    for (std::size_t i = 0; i < regions.sorted_delta.size(); ++i) f.row(i + 1, num(regions.sorted_delta[i]));
    bundle.files.push_back(f.close());
  }
  summary["regions"] = {{"r1", regions.r1_count}, {"r2", regions.r2_count}, {"r3", regions.r3_count},
                        {"total", regions.total()}, {"eps_hi", a.eps_hi}, {"eps_lo", a.eps_lo}};

  {
    CsvFile f(layout.report_dir / "clusters_vs_tau.csv", seed, "tx_id,tau,clusters");
    for (const auto& m : matrices)
      for (const auto& r : cluster_count_vs_tau(m, a.tau_grid, a.edge_rule)) f.row(m.tx_id(), num(r.tau), r.clusters);
    bundle.files.push_back(f.close());
  }
  {
    CsvFile f(layout.report_dir / "edge_fraction_vs_tau.csv", seed, "tx_id,tau,edges,possible,fraction");
    for (const auto& m : matrices)
      for (const auto& r : edge_fraction_vs_tau(m, a.tau_grid, a.edge_rule))
        f.row(m.tx_id(), num(r.tau), r.edges, r.possible, num(r.fraction));
    bundle.files.push_back(f.close());
  }
  {
    CsvFile f(layout.report_dir / "degree_pdf.csv", seed, "tau,degree,count,probability");
    for (const auto& pdf : degree_pdf(matrices, a.degree_taus, a.edge_rule))
      for (std::size_t d = 0; d < pdf.tally.size(); ++d) f.row(num(pdf.tau), d, pdf.tally[d], num(pdf.mass[d]));
    bundle.files.push_back(f.close());
  }
  {
    CsvFile f(layout.report_dir / "temporal_quantiles.csv", seed,
              "distance,pairs" + quantile_header(a.temporal_quantiles));
    for (const auto& row : temporal_quantiles(matrices, a.temporal_quantiles)) {
      std::string qs;
      for (double q : row.quantiles) qs += (qs.empty() ? "" : ",") + num(q);
      f.row(row.distance, row.pairs, qs);
    }
    bundle.files.push_back(f.close());
  }

  const SubsetSampler sampler{a.observability.enumeration_budget, a.observability.samples, seed};
  {
    CsvFile f(layout.report_dir / "fully_connected.csv", seed, "tx_id,tau,k,subsets,examined,complete,ratio,exact");
    for (const auto& m : matrices) {
      for (double tau : a.tau_grid) {
        const auto g = build_graph(m, tau, a.edge_rule);
        for (int k : a.k_list) {
          if (k > g.n()) continue;
          const auto r = fully_connected_ratio(g, k, sampler);
          f.row(m.tx_id(), num(tau), k, r.subsets, r.examined, r.complete, num(r.ratio), r.exact ? 1 : 0);
        }
      }
    }
    bundle.files.push_back(f.close());
  }

  json obs_summary = {{"tau", a.observability.tau}, {"mode", to_string(a.observability.mode)}};
  {
    CsvFile f(layout.report_dir / "observability.csv", seed,
              "tx_id,subset_size,subsets,exact" + quantile_header(a.observability.quantiles));
    std::map<int, std::vector<double>> pooled;
    std::map<int, bool> pooled_exact;
    for (const auto& m : matrices) {
      const auto g = build_graph(m, a.observability.tau, a.edge_rule);
      for (int k = 1; k <= g.n(); ++k) {
        bool exact = true;
        auto values = coverage_values(g, k, a.observability.mode, sampler, exact, spec.workers);
        const auto qs = quantiles(values, a.observability.quantiles);
        std::string qcells;
        for (double q : qs) qcells += (qcells.empty() ? "" : ",") + num(q);
        f.row(m.tx_id(), k, values.size(), exact ? 1 : 0, qcells);
        auto& pool = pooled[k];
        pool.insert(pool.end(), values.begin(), values.end());
        pooled_exact.try_emplace(k, true);
        pooled_exact[k] = pooled_exact[k] && exact;
      }
    }
    std::vector<ObservabilityRow> pooled_rows;
    for (auto& [k, values] : pooled) {
      ObservabilityRow row{k, values.size(), pooled_exact[k], quantiles(values, a.observability.quantiles)};
      std::string qcells;
      for (double q : row.quantiles) qcells += (qcells.empty() ? "" : ",") + num(q);
      f.row("all", k, row.subsets, row.exact ? 1 : 0, qcells);
      pooled_rows.push_back(std::move(row));
    }
    bundle.files.push_back(f.close());
    // The middle requested quantile is reported as the "median" level.
    const std::size_t level = a.observability.quantiles.size() / 2;
    if (!pooled_rows.empty() && level < pooled_rows.front().quantiles.size())
      obs_summary["single_node_coverage"] = pooled_rows.front().quantiles[level];
    obs_summary["coverage_target"] = a.observability.coverage_target;
    obs_summary["min_subset_for_target"] =
        min_subset_for_coverage(pooled_rows, a.observability.coverage_target, level);
  }
  summary["observability"] = std::move(obs_summary);

  // Partition at the cluster threshold, graph exports, sidecar agreement.
  std::map<std::pair<int, int>, int> truth;
  const auto sidecar = ground_truth_path(spec);
  const bool have_truth = sidecar && fs::exists(*sidecar);
  if (have_truth)
    for (const auto& l : read_ground_truth(*sidecar)) truth[{l.transmitter_id, l.measurement_index}] = l.latent_id;

  json per_tx = json::array();
  double ari_sum = 0.0;
  for (const auto& m : matrices) {
    const auto g = build_graph(m, a.cluster_tau, a.edge_rule);
    const auto p = clusters(g);
    json entry = {{"tx_id", m.tx_id()}, {"clusters", p.count}, {"edges", g.edge_count()}, {"labels", p.labels}};
    if (have_truth) {
      std::vector<int> latent;
      for (int x = 1; x <= m.n(); ++x) {
        const auto it = truth.find({m.tx_id(), x});
        if (it == truth.end())
          throw ValidationError("ground-truth sidecar lacks an entry", EntryRef{m.tx_id(), x});
        latent.push_back(it->second);
      }
      const double ari = adjusted_rand_index(p.labels, latent);
      entry["latent_labels"] = latent;
      entry["adjusted_rand_index"] = ari;
      ari_sum += ari;
    }
    per_tx.push_back(std::move(entry));

    char stem[48];
    std::snprintf(stem, sizeof stem, "tx%02d_tau%s", m.tx_id(), num(a.cluster_tau).c_str());
    std::ofstream dot(layout.graphs_dir / (std::string(stem) + ".dot"));
    write_dot(g, m, dot);
    std::ofstream edges(layout.graphs_dir / (std::string(stem) + ".edges.csv"));
    write_edge_list(g, m, edges);
  }
  summary["cluster_tau"] = a.cluster_tau;
  summary["partitions"] = std::move(per_tx);
  if (have_truth)
    summary["partition_agreement"] = {{"metric", "adjusted_rand_index"},
                                      {"mean", ari_sum / static_cast<double>(matrices.size())}};

  const auto summary_path = layout.report_dir / "summary.json";
  {
    std::ofstream out(summary_path);
    if (!out) throw PersistenceError("cannot open for writing", summary_path);
    out << summary.dump(2) << '\n';
    if (!out) throw PersistenceError("write failed", summary_path);
  }
  bundle.files.push_back(summary_path);
  bundle.summary = std::move(summary);
  log.write({{"event", "report"}, {"files", bundle.files.size()}});
  return bundle;
}

Corpus cmd_validate(const RunSpec& spec) {
  spec.validate();
  return load_corpus(manifest_path(spec));
}

}  // namespace rfrel
