#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "maelab/labels.hpp"
#include "maelab/manifest.hpp"
#include "maelab/spectrogram.hpp"

namespace maelab {

// Per-participant ground truth. A label is true exactly when its cue
// intensity is >= 0.5; cues are sampled with a margin band around the
// threshold (false in [0, 0.4], true in [0.6, 1.0]) so the task has an
// analytically known, comfortably solvable decision rule. All of a
// participant's recordings share the participant's labels.
struct ParticipantProfile {
    std::string participant_id;
    LabelSet labels{};
    std::array<double, kNumLabels> cue_intensities{};
    int recordings_per_participant = 8;
};

struct SynthConfig {
    int n_participants = 48;
    int recordings_per_participant = 8;
    int n_mels = 128;
    int n_frames = 256;
    uint64_t seed = 1;

    // Cue-to-acoustic mapping. Each disease axis drives one acoustic
    // degradation, scaled by the participant's cue intensity:
    //   voice        -> amplitude shimmer (frame-to-frame level flicker)
    //   respiratory  -> broadband breath-noise floor
    //   neurological -> F0 jitter (frame-to-frame pitch wobble plus
    //                   aperiodic bursts beside destabilised harmonics)
    //   mood         -> slow vocal tremor (F0 and level co-modulated)
    double shimmer_depth = 0.45;
    double breath_noise_floor = 1e-3;
    double jitter_depth = 0.05;
    double tremor_depth = 0.06;
    double tremor_rate_hz = 5.0;

    // Static features: dims 0..7 are two noisy linear readouts per cue,
    // dims 8..130 standard-normal distractors.
    double feature_noise_sigma = 0.1;
};

// Deterministic per seed. Label marginals match the prevalence targets
// to within rounding; if a tiny configuration happens to produce no
// comorbid participant, participant 0 is forced to carry voice +
// respiratory so multi-label behaviour is always exercised.
std::vector<ParticipantProfile> make_profiles(const SynthConfig& config);

// Harmonic stack with randomized F0 in [80, 260] Hz on a 128-band mel
// axis (0..8 kHz), log-decibel output. A small always-on dither floor
// keeps every patch non-constant. Deterministic given
// (profile, recording_index, seed); random draws are consumed
// identically for all cue values so paired-cue comparisons align.
Spectrogram synth_spectrogram(const ParticipantProfile& profile, int recording_index,
                              uint64_t seed, const SynthConfig& config);

std::vector<double> synth_static_features(const ParticipantProfile& profile, int recording_index,
                                          uint64_t seed, const SynthConfig& config);

// Writes one SPGM file per recording plus manifest.jsonl (records
// sorted by record_id), and returns the manifest records.
std::vector<Record> generate_corpus(const SynthConfig& config,
                                    const std::filesystem::path& out_dir);

// Learnability gate: least-squares linear classifiers on the true cue
// intensities, fit on training participants and scored on held-out
// participants. The corpus is usable only if this is ~perfect.
double cue_oracle_macro_f1(const SynthConfig& config, double test_fraction = 0.2,
                           uint64_t split_seed = 99);

}  // namespace maelab
