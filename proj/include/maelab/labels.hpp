#pragma once

#include <array>

namespace maelab {

// Disease category axis, ordering fixed everywhere: labels, cue
// intensities, logits and metric panels all use this order.
inline constexpr int kNumLabels = 4;
inline constexpr std::array<const char*, kNumLabels> kLabelNames = {
    "voice", "respiratory", "neurological", "mood"};

// Participant-level prevalence targets for the synthetic corpus
// (fractions of participants carrying each label; they overlap).
inline constexpr std::array<double, kNumLabels> kLabelPrevalence = {0.520, 0.511, 0.362, 0.328};

// Static acoustic/prosodic feature vector length.
inline constexpr int kStaticDim = 131;

using LabelSet = std::array<bool, kNumLabels>;

}  // namespace maelab
