#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "rfrel/dataset.hpp"
#include "rfrel/rng.hpp"

namespace rfrel {

inline constexpr std::size_t kNumImpairments = 7;

/// Transmitter hardware impairments. Field order matches as_array().
struct ImpairmentParams {
  double dc_offset_i = 0.0;
  double dc_offset_q = 0.0;
  double gain_imbalance = 1.0;  // Q-branch gain ratio
  double quad_skew_rad = 0.0;
  double cfo_frac = 0.0;  // cycles per sample
  double phase_rad = 0.0;
  double nl3 = 0.0;

  std::array<double, kNumImpairments> as_array() const;
  static ImpairmentParams from_array(const std::array<double, kNumImpairments>& a);
  void validate() const;
  bool operator==(const ImpairmentParams&) const = default;
};

/// Per-parameter spreads (standard deviations). All zero by default.
struct ParamSpread {
  double dc_offset_i = 0.0;
  double dc_offset_q = 0.0;
  double gain_imbalance = 0.0;
  double quad_skew_rad = 0.0;
  double cfo_frac = 0.0;
  double phase_rad = 0.0;
  double nl3 = 0.0;

  std::array<double, kNumImpairments> as_array() const;
  static ParamSpread from_array(const std::array<double, kNumImpairments>& a);
};

/// Displacement of a latent state per unit of state_separation, per
/// parameter. Distances in parameter space are measured in these units.
ParamSpread state_unit_scale();

struct FingerprintState {
  int latent_id = 0;
  ImpairmentParams params;
};

struct MutationModel {
  int num_latent_states = 2;
  double stay_prob = 0.6;
  ParamSpread jitter_sigma = default_jitter();
  double state_separation = 1.0;
  double snr_db = 25.0;  // +inf disables noise
  std::uint64_t seed = 1;

  static ParamSpread default_jitter();
  void validate() const;
  /// K x K kernel: stay_prob on the diagonal, the rest spread uniformly.
  std::vector<std::vector<double>> transition_kernel() const;
};

nlohmann::json to_json(const ParamSpread& s);
ParamSpread spread_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MutationModel& m);
MutationModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ImpairmentParams& p);

/// Nominal parameters plus K displaced states, deterministic in rng_seed.
/// State k = nominal + state_separation * z_k (elementwise with the unit
/// scale), so pairwise distances scale linearly with the separation.
std::vector<FingerprintState> sample_state_set(const MutationModel& model, std::uint64_t rng_seed);

/// Euclidean distance in unit-scale coordinates.
double state_distance(const ImpairmentParams& a, const ImpairmentParams& b);

/// One reload: stay with stay_prob, else uniform over the other K-1 ids.
/// Consumes one uniform real, plus one uniform integer when leaving.
int mutate_state(int current, const MutationModel& model, Rng& rng);

/// Per-measurement copy of the state parameters with Gaussian jitter.
/// Always consumes exactly kNumImpairments normal draws.
ImpairmentParams jitter_params(const ImpairmentParams& base, const ParamSpread& sigma, Rng& rng);

/// Noise-free impaired BPSK waveform for already-jittered parameters.
/// Consumes one 64-bit draw per 64 symbols.
std::vector<std::complex<double>> impaired_bpsk(const ImpairmentParams& params, std::size_t n_samples, Rng& rng);

/// Jitter, impairment chain, then AWGN scaled to the mean power of the
/// noise-free waveform.
std::vector<Sample> synth_measurement(const FingerprintState& state, const MutationModel& model,
                                      std::size_t n_samples, Rng& rng);

struct GroundTruthLabel {
  int transmitter_id = 0;
  int measurement_index = 0;
  int latent_id = 0;
};

nlohmann::json to_json(const std::vector<GroundTruthLabel>& labels);
std::vector<GroundTruthLabel> labels_from_json(const nlohmann::json& j);
void save_ground_truth(const std::vector<GroundTruthLabel>& labels, const fs::path& path);
std::vector<GroundTruthLabel> read_ground_truth(const fs::path& path);

/// Latent ids for measurements 1..n_meas of one transmitter. The first
/// state is uniform over K; each later measurement follows one reload.
std::vector<int> latent_chain(const MutationModel& model, int transmitter_id, int n_meas);

/// Seed of the RNG that synthesizes one measurement.
std::uint64_t measurement_seed(const MutationModel& model, int transmitter_id, int measurement_index);

struct SynthCorpus {
  CorpusManifest manifest;
  std::vector<GroundTruthLabel> labels;
  fs::path manifest_path;
  fs::path ground_truth_path;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kGroundTruthFile = "ground_truth.json";

/// Writes n_tx x n_meas traces, manifest.json and ground_truth.json into
/// out_dir. Transmitter ids are 1..n_tx. workers <= 0 means all threads.
SynthCorpus synth_corpus(const MutationModel& model, int n_tx, int n_meas, std::size_t samples_per_meas,
                         const fs::path& out_dir, int workers = 0);

}  // namespace rfrel
