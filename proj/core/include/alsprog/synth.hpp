#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace alsprog {

// One additive term of a question's score-transition signal. The next
// latent score is previous + sum(term contributions) + Gaussian noise,
// quantized to {0..4}; channel summaries are computed over the inter-visit
// window exactly as the extractor will see them.
struct SignalTerm {
  enum class Kind {
    previous_value,   // coef * previous score
    channel_mean,     // coef * window mean of a channel
    channel_below,    // coef * [window mean of a channel < threshold]
    static_field,     // coef * static numeric field value
  };
  Kind kind = Kind::previous_value;
  double coef = 0;
  int channel = 0;          // channel index for the channel_* kinds
  double threshold = 0;     // channel_below only
  std::string field;        // static_field only
};

struct SynthConfig {
  int n_patients = 20;
  int visits_min = 3;
  int visits_max = 5;
  double visit_gap_mean = 100;
  double visit_gap_jitter = 15;
  int n_channels = 4;
  // shared across questions; a per-question tweak is not needed at desk
  // scale
  std::vector<SignalTerm> signal;
  double noise_std = 0;
  double sensor_gap_frac = 0.05;  // daily sample dropout
  double self_fraction = 0;       // patients with a self-assessment series
  double disagreement_fraction = 0;  // of those, fraction drawn shifted
  double self_gap_mean = 30;
  std::uint64_t seed = 0;
};

struct SynthOutput {
  std::filesystem::path static_csv;
  std::filesystem::path visits_csv;
  std::filesystem::path sensors_csv;
  std::filesystem::path manifest_json;
};

// Writes static.csv / visits.csv / sensors.csv plus a ground-truth
// manifest with the generating signal, fully deterministic per seed.
SynthOutput generate(const SynthConfig& config, const std::filesystem::path& out_dir);

// Named presets used by tests and the CLI: "persistence" (targets carry
// the previous value forward exactly) and "planted" (previous value minus
// a channel-threshold indicator plus noise).
SynthConfig synth_preset(const std::string& name, int n_patients,
                         std::uint64_t seed);

}  // namespace alsprog
