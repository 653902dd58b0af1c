#include "rfrel/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "rfrel/parallel.hpp"

namespace rfrel {

namespace {

using Array = std::array<double, kNumImpairments>;

// Spread of the per-transmitter nominal operating point.
constexpr Array kNominalSpread{0.02, 0.02, 0.02, 0.02, 1e-8, 0.2, 0.02};
constexpr Array kStateUnit{0.05, 0.05, 0.05, 0.05, 1e-8, 0.05, 0.05};

}  // namespace

Array ImpairmentParams::as_array() const {
  return {dc_offset_i, dc_offset_q, gain_imbalance, quad_skew_rad, cfo_frac, phase_rad, nl3};
}

ImpairmentParams ImpairmentParams::from_array(const Array& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
}

void ImpairmentParams::validate() const {
  for (double v : as_array())
    if (!std::isfinite(v)) throw ArgumentError("impairment parameter is not finite");
  if (!(gain_imbalance > 0.0)) throw ArgumentError("gain_imbalance must be positive");
  if (!(std::abs(cfo_frac) < 0.5)) throw ArgumentError("|cfo_frac| must be below 0.5");
}

Array ParamSpread::as_array() const {
  return {dc_offset_i, dc_offset_q, gain_imbalance, quad_skew_rad, cfo_frac, phase_rad, nl3};
}

ParamSpread ParamSpread::from_array(const Array& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
}

ParamSpread state_unit_scale() { return ParamSpread::from_array(kStateUnit); }

ParamSpread MutationModel::default_jitter() {
  return {2e-4, 2e-4, 2e-4, 2e-4, 0.0, 2e-4, 2e-4};
}

void MutationModel::validate() const {
  if (num_latent_states < 1) throw ArgumentError("num_latent_states must be >= 1");
  if (!(stay_prob >= 0.0 && stay_prob <= 1.0)) throw ArgumentError("stay_prob must lie in [0, 1]");
  if (!(state_separation >= 0.0) || !std::isfinite(state_separation))
    throw ArgumentError("state_separation must be finite and non-negative");
  for (double s : jitter_sigma.as_array())
    if (!(s >= 0.0) || !std::isfinite(s)) throw ArgumentError("jitter_sigma entries must be finite and >= 0");
  if (std::isnan(snr_db) || snr_db == -INFINITY) throw ArgumentError("snr_db must be a number or +inf");
}

std::vector<std::vector<double>> MutationModel::transition_kernel() const {
  const auto k = static_cast<std::size_t>(num_latent_states);
  std::vector<std::vector<double>> kernel(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (k == 1) kernel[i][j] = 1.0;
      else kernel[i][j] = (i == j) ? stay_prob : (1.0 - stay_prob) / static_cast<double>(k - 1);
    }
  }
  return kernel;
}

nlohmann::json to_json(const ParamSpread& s) {
  return {{"dc_offset_i", s.dc_offset_i}, {"dc_offset_q", s.dc_offset_q},
          {"gain_imbalance", s.gain_imbalance}, {"quad_skew_rad", s.quad_skew_rad},
          {"cfo_frac", s.cfo_frac}, {"phase_rad", s.phase_rad}, {"nl3", s.nl3}};
}

ParamSpread spread_from_json(const nlohmann::json& j) {
  ParamSpread s;
  s.dc_offset_i = j.value("dc_offset_i", s.dc_offset_i);
  s.dc_offset_q = j.value("dc_offset_q", s.dc_offset_q);
  s.gain_imbalance = j.value("gain_imbalance", s.gain_imbalance);
  s.quad_skew_rad = j.value("quad_skew_rad", s.quad_skew_rad);
  s.cfo_frac = j.value("cfo_frac", s.cfo_frac);
  s.phase_rad = j.value("phase_rad", s.phase_rad);
  s.nl3 = j.value("nl3", s.nl3);
  return s;
}

nlohmann::json to_json(const ImpairmentParams& p) {
  return {{"dc_offset_i", p.dc_offset_i}, {"dc_offset_q", p.dc_offset_q},
          {"gain_imbalance", p.gain_imbalance}, {"quad_skew_rad", p.quad_skew_rad},
          {"cfo_frac", p.cfo_frac}, {"phase_rad", p.phase_rad}, {"nl3", p.nl3}};
}

nlohmann::json to_json(const MutationModel& m) {
  nlohmann::json snr = std::isinf(m.snr_db) ? nlohmann::json("inf") : nlohmann::json(m.snr_db);
  return {{"num_latent_states", m.num_latent_states},
          {"stay_prob", m.stay_prob},
          {"jitter_sigma", to_json(m.jitter_sigma)},
          {"state_separation", m.state_separation},
          {"snr_db", snr},
          {"seed", m.seed}};
}

MutationModel model_from_json(const nlohmann::json& j) {
  MutationModel m;
  m.num_latent_states = j.value("num_latent_states", m.num_latent_states);
  m.stay_prob = j.value("stay_prob", m.stay_prob);
  if (j.contains("jitter_sigma")) m.jitter_sigma = spread_from_json(j.at("jitter_sigma"));
  m.state_separation = j.value("state_separation", m.state_separation);
  if (j.contains("snr_db")) {
    const auto& s = j.at("snr_db");
    m.snr_db = s.is_string() && s.get<std::string>() == "inf" ? INFINITY : s.get<double>();
  }
  m.seed = j.value("seed", m.seed);
  m.validate();
  return m;
}

std::vector<FingerprintState> sample_state_set(const MutationModel& model, std::uint64_t rng_seed) {
  model.validate();
  Rng rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Array nominal = ImpairmentParams{}.as_array();
  for (std::size_t p = 0; p < kNumImpairments; ++p) nominal[p] += kNominalSpread[p] * normal(rng);

  std::vector<FingerprintState> states;
  states.reserve(static_cast<std::size_t>(model.num_latent_states));
  for (int k = 0; k < model.num_latent_states; ++k) {
    Array a = nominal;
    for (std::size_t p = 0; p < kNumImpairments; ++p)
      a[p] += model.state_separation * kStateUnit[p] * normal(rng);
    FingerprintState s{k, ImpairmentParams::from_array(a)};
    s.params.validate();
    states.push_back(s);
  }
  return states;
}

double state_distance(const ImpairmentParams& a, const ImpairmentParams& b) {
  const auto x = a.as_array();
  const auto y = b.as_array();
  double sum = 0.0;
  for (std::size_t p = 0; p < kNumImpairments; ++p) {
    const double d = (x[p] - y[p]) / kStateUnit[p];
    sum += d * d;
  }
  return std::sqrt(sum);
}

int mutate_state(int current, const MutationModel& model, Rng& rng) {
  const int k = model.num_latent_states;
  if (current < 0 || current >= k) throw ArgumentError("latent state out of range");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < model.stay_prob || k == 1) return current;
  std::uniform_int_distribution<int> other(0, k - 2);
  const int j = other(rng);
  return j < current ? j : j + 1;
}

ImpairmentParams jitter_params(const ImpairmentParams& base, const ParamSpread& sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto a = base.as_array();
  const auto s = sigma.as_array();
  for (std::size_t p = 0; p < kNumImpairments; ++p) a[p] += s[p] * normal(rng);
  return ImpairmentParams::from_array(a);
}

std::vector<std::complex<double>> impaired_bpsk(const ImpairmentParams& params, std::size_t n_samples,
                                                Rng& rng) {
  std::vector<std::complex<double>> out(n_samples);
  const double sin_skew = std::sin(params.quad_skew_rad);
  const double cos_skew = std::cos(params.quad_skew_rad);
  const std::complex<double> dc{params.dc_offset_i, params.dc_offset_q};
  std::uint64_t bits = 0;
  for (std::size_t n = 0; n < n_samples; ++n) {
    if (n % 64 == 0) bits = rng();
    const double symbol = ((bits >> (n % 64)) & 1u) ? 1.0 : -1.0;
    std::complex<double> x{symbol, 0.0};
    x += params.nl3 * x * x * x;
    x = {x.real(), params.gain_imbalance * (sin_skew * x.real() + cos_skew * x.imag())};
    const double angle = params.phase_rad +
                         2.0 * std::numbers::pi * params.cfo_frac * static_cast<double>(n);
    x *= std::polar(1.0, angle);
    out[n] = x + dc;
  }
  return out;
}

std::vector<Sample> synth_measurement(const FingerprintState& state, const MutationModel& model,
                                      std::size_t n_samples, Rng& rng) {
  if (n_samples == 0) throw ArgumentError("n_samples must be >= 1");
  const auto params = jitter_params(state.params, model.jitter_sigma, rng);
  const auto clean = impaired_bpsk(params, n_samples, rng);

  double power = 0.0;
  for (const auto& s : clean) power += std::norm(s);
  power /= static_cast<double>(n_samples);
  const double sigma = std::isinf(model.snr_db)
                           ? 0.0
                           : std::sqrt(power * std::pow(10.0, -model.snr_db / 10.0) / 2.0);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Sample> out(n_samples);
  for (std::size_t n = 0; n < n_samples; ++n) {
    const double ni = normal(rng);
    const double nq = normal(rng);
    out[n] = Sample(static_cast<float>(clean[n].real() + sigma * ni),
                    static_cast<float>(clean[n].imag() + sigma * nq));
  }
  return out;
}

nlohmann::json to_json(const std::vector<GroundTruthLabel>& labels) {
  auto arr = nlohmann::json::array();
  for (const auto& l : labels)
    arr.push_back({{"transmitter_id", l.transmitter_id},
                   {"measurement_index", l.measurement_index},
                   {"latent_id", l.latent_id}});
  return arr;
}

std::vector<GroundTruthLabel> labels_from_json(const nlohmann::json& j) {
  std::vector<GroundTruthLabel> labels;
  for (const auto& e : j)
    labels.push_back({e.at("transmitter_id").get<int>(), e.at("measurement_index").get<int>(),
                      e.at("latent_id").get<int>()});
  return labels;
}

void save_ground_truth(const std::vector<GroundTruthLabel>& labels, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PersistenceError("cannot open for writing", path);
  out << to_json(labels).dump(2) << '\n';
  if (!out) throw PersistenceError("write failed", path);
}

std::vector<GroundTruthLabel> read_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open", path);
  try {
    return labels_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed ground-truth sidecar " + path.string() + ": " + e.what());
  }
}

std::vector<int> latent_chain(const MutationModel& model, int transmitter_id, int n_meas) {
  model.validate();
  auto rng = make_rng(model.seed, Stream::chain, {static_cast<std::uint64_t>(transmitter_id)});
  std::vector<int> chain;
  chain.reserve(static_cast<std::size_t>(std::max(n_meas, 0)));
  if (n_meas <= 0) return chain;
  std::uniform_int_distribution<int> initial(0, model.num_latent_states - 1);
  chain.push_back(initial(rng));
  for (int m = 1; m < n_meas; ++m) chain.push_back(mutate_state(chain.back(), model, rng));
  return chain;
}

std::uint64_t measurement_seed(const MutationModel& model, int transmitter_id, int measurement_index) {
  return derive_seed(model.seed, Stream::measurement,
                     {static_cast<std::uint64_t>(transmitter_id), static_cast<std::uint64_t>(measurement_index)});
}

SynthCorpus synth_corpus(const MutationModel& model, int n_tx, int n_meas, std::size_t samples_per_meas,
                         const fs::path& out_dir, int workers) {
  model.validate();
  if (n_tx < 1 || n_meas < 1 || samples_per_meas < 1)
    throw ArgumentError("n_tx, n_meas and samples_per_meas must all be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw PersistenceError("cannot create directory", out_dir);

  struct Job {
    int tx;
    int meas;
    FingerprintState state;
    std::string rel_path;
    std::uint32_t crc = 0;
  };

  SynthCorpus result;
  std::vector<Job> jobs;
  for (int tx = 1; tx <= n_tx; ++tx) {
    const auto states = sample_state_set(
        model, derive_seed(model.seed, Stream::states, {static_cast<std::uint64_t>(tx)}));
    const auto chain = latent_chain(model, tx, n_meas);
    char dir[32];
    std::snprintf(dir, sizeof dir, "tx%02d", tx);
    fs::create_directories(out_dir / dir, ec);
    if (ec) throw PersistenceError("cannot create directory", out_dir / dir);
    for (int m = 1; m <= n_meas; ++m) {
      char name[64];
      std::snprintf(name, sizeof name, "%s/m%03d.iq", dir, m);
      const int latent = chain[static_cast<std::size_t>(m - 1)];
      jobs.push_back({tx, m, states[static_cast<std::size_t>(latent)], name});
      result.labels.push_back({tx, m, latent});
    }
  }

  ExceptionSlot errors;
#pragma omp parallel for schedule(dynamic) num_threads(resolve_workers(workers))
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    errors.run([&] {
      auto& job = jobs[i];
      Rng rng(measurement_seed(model, job.tx, job.meas));
      const auto samples = synth_measurement(job.state, model, samples_per_meas, rng);
      const fs::path file = out_dir / job.rel_path;
      write_iq_samples(samples, file);
      job.crc = crc32_file(file);
    });
  }
  errors.rethrow();

  result.manifest.capture.notes["generator"] = "rfrel synth";
  result.manifest.capture.notes["model"] = to_json(model).dump();
  for (int tx = 1; tx <= n_tx; ++tx) {
    TransmitterEntry entry{tx, {}};
    for (const auto& job : jobs) {
      if (job.tx != tx) continue;
      entry.measurements.push_back({job.meas, job.rel_path, samples_per_meas, job.crc});
    }
    result.manifest.transmitters.push_back(std::move(entry));
  }
  result.manifest_path = out_dir / kManifestFile;
  result.ground_truth_path = out_dir / kGroundTruthFile;
  save_manifest(result.manifest, result.manifest_path);
  save_ground_truth(result.labels, result.ground_truth_path);
  return result;
}

}  // namespace rfrel
