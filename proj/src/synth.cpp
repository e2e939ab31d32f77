#include "maelab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maelab/errors.hpp"
#include "maelab/rng.hpp"

namespace maelab {

namespace {

constexpr double kFMaxHz = 8000.0;
constexpr double kHopSeconds = 0.010;
constexpr double kDitherPower = 1e-6;  // always-on sensor floor
constexpr double kTwoPi = 6.283185307179586;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }

std::string pad_number(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

int digits_for(int max_value) {
    int d = 1;
    while (max_value >= 10) {
        max_value /= 10;
        ++d;
    }
    return d;
}

void validate(const SynthConfig& cfg) {
    if (cfg.n_participants < 4) throw ConfigError("synth: n_participants must be >= 4");
    if (cfg.recordings_per_participant < 1) {
        throw ConfigError("synth: recordings_per_participant must be >= 1");
    }
    if (cfg.n_mels < 8 || cfg.n_frames < 16) throw ConfigError("synth: spectrogram too small");
    for (double depth : {cfg.shimmer_depth, cfg.jitter_depth, cfg.tremor_depth}) {
        if (depth < 0.0 || depth > 1.0) throw ConfigError("synth: depths must be in [0, 1]");
    }
    if (cfg.breath_noise_floor < 0.0) throw ConfigError("synth: negative noise floor");
}

}  // namespace

std::vector<ParticipantProfile> make_profiles(const SynthConfig& cfg) {
    validate(cfg);
    const int n = cfg.n_participants;
    const int id_width = std::max(3, digits_for(n - 1));

    std::vector<ParticipantProfile> profiles(n);
    for (int i = 0; i < n; ++i) {
        profiles[i].participant_id = "p" + pad_number(i, id_width);
        profiles[i].recordings_per_participant = cfg.recordings_per_participant;
    }

    // Stratified assignment: each label gets exactly round(prevalence*n)
    // positives over an independently shuffled participant order, so
    // marginals land on target while overlaps (comorbidity) fall out of
    // the independence of the shuffles.
    for (int k = 0; k < kNumLabels; ++k) {
        const int count = static_cast<int>(std::lround(kLabelPrevalence[k] * n));
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(cfg.seed, 0x1ABE1 + static_cast<uint64_t>(k)));
        rng.shuffle(order);
        for (int i = 0; i < count; ++i) profiles[order[i]].labels[k] = true;
    }

    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(cfg.seed, 0xC0E000 + static_cast<uint64_t>(i)));
        for (int k = 0; k < kNumLabels; ++k) {
            profiles[i].cue_intensities[k] = profiles[i].labels[k] ? rng.uniform(0.6, 1.0)
                                                                   : rng.uniform(0.0, 0.4);
        }
    }

    bool has_comorbid = false;
    for (const auto& p : profiles) {
        int positives = 0;
        for (bool b : p.labels) positives += b ? 1 : 0;
        if (positives >= 2) {
            has_comorbid = true;
            break;
        }
    }
    if (!has_comorbid) {
        Rng rng(mix_seed(cfg.seed, 0xF0CE));
        profiles[0].labels[0] = profiles[0].labels[1] = true;
        profiles[0].cue_intensities[0] = rng.uniform(0.6, 1.0);
        profiles[0].cue_intensities[1] = rng.uniform(0.6, 1.0);
    }
    return profiles;
}

Spectrogram synth_spectrogram(const ParticipantProfile& profile, int recording_index,
                              uint64_t seed, const SynthConfig& cfg) {
    validate(cfg);
    Rng rng(mix_seed(mix_seed(mix_seed(seed, fnv1a(profile.participant_id)),
                              static_cast<uint64_t>(recording_index)),
                     0xA0D10));

    const double cue_shimmer = profile.cue_intensities[0];
    const double cue_breath = profile.cue_intensities[1];
    const double cue_jitter = profile.cue_intensities[2];
    const double cue_tremor = profile.cue_intensities[3];

    const double mel_max = hz_to_mel(kFMaxHz);
    const double f0 = rng.uniform(150.0, 175.0);
    const double tremor_rate = cfg.tremor_rate_hz * rng.uniform(0.8, 1.25);
    const double tremor_phase = rng.uniform(0.0, kTwoPi);

    // Broad formant-like resonances carry most of the energy; the
    // harmonic comb rides on them as texture. Centers cluster around
    // population-typical positions with per-recording spread, widths
    // and levels vary per recording, levels follow the excitation.
    constexpr int kFormants = 4;
    constexpr double kFormantAnchor[kFormants] = {0.14, 0.35, 0.58, 0.78};
    double formant_center[kFormants], formant_sigma[kFormants], formant_power[kFormants];
    for (int f = 0; f < kFormants; ++f) {
        formant_center[f] = cfg.n_mels * (kFormantAnchor[f] + rng.uniform(-0.006, 0.006));
        formant_sigma[f] = rng.uniform(0.085, 0.105) * cfg.n_mels;
        const double amp = rng.uniform(0.75, 1.0);
        formant_power[f] = amp * amp;
    }
    // Aperiodicity bursts live on their own stream so the main draw
    // sequence stays aligned across different cue values.
    Rng burst_rng(mix_seed(mix_seed(seed, fnv1a(profile.participant_id)),
                           0xB512 + static_cast<uint64_t>(recording_index)));

    Spectrogram s;
    s.n_mels = cfg.n_mels;
    s.n_frames = cfg.n_frames;
    s.id = profile.participant_id + "_r" + std::to_string(recording_index);
    s.values.resize(static_cast<size_t>(cfg.n_mels) * cfg.n_frames);

    std::vector<double> formant_profile(cfg.n_mels, 0.0);
    for (int b = 0; b < cfg.n_mels; ++b) {
        for (int f = 0; f < kFormants; ++f) {
            const double d = (b + 0.5 - formant_center[f]) / formant_sigma[f];
            formant_profile[b] += formant_power[f] * std::exp(-0.5 * d * d);
        }
    }
    // Fixed filterbank ripple on the sensor floor: quiet regions carry a
    // deterministic band pattern instead of bare noise.
    std::vector<double> floor_profile(cfg.n_mels);
    for (int b = 0; b < cfg.n_mels; ++b) {
        floor_profile[b] = 1.0 + 0.6 * std::sin(kTwoPi * b / 7.3);
    }

    std::vector<double> power(cfg.n_mels);
    const double bump_sigma = 3.0;  // harmonic spread in bands
    for (int t = 0; t < cfg.n_frames; ++t) {
        // Draw counts per frame are cue-independent so that recordings
        // rendered with different cue values but the same seed stay
        // sample-aligned.
        const double jitter_u = rng.uniform(-1.0, 1.0);
        const double shimmer_u = rng.uniform(-1.0, 1.0);

        // Vocal tremor modulates pitch and level together (slow),
        // shimmer flickers the overall level frame-to-frame, jitter
        // wobbles pitch and destabilises individual partials
        // (per-harmonic level roughness).
        const double tremor_s =
            std::sin(kTwoPi * tremor_rate * (t * kHopSeconds) + tremor_phase);
        const double f0_t = f0 * (1.0 + cfg.jitter_depth * cue_jitter * jitter_u) *
                            (1.0 + cfg.tremor_depth * cue_tremor * tremor_s);
        const double amp_t =
            std::max(0.05, (1.0 + cfg.shimmer_depth * cue_shimmer * shimmer_u) *
                               (1.0 + 5.0 * cfg.tremor_depth * cue_tremor * tremor_s));
        const double level_t = amp_t * amp_t;

        for (int b = 0; b < cfg.n_mels; ++b) power[b] = level_t * formant_profile[b];
        for (int h = 1; h * f0_t < kFMaxHz; ++h) {
            const double center = hz_to_mel(h * f0_t) / mel_max * cfg.n_mels;
            const double rough_u = burst_rng.uniform(-1.0, 1.0);
            const double amp =
                amp_t / h * std::max(0.05, 1.0 + 0.35 * cue_jitter * rough_u);
            const double p = amp * amp;
            const int b0 = std::max(0, static_cast<int>(std::ceil(center - 3.0 * bump_sigma)));
            const int b1 = std::min(cfg.n_mels - 1,
                                    static_cast<int>(std::floor(center + 3.0 * bump_sigma)));
            for (int b = b0; b <= b1; ++b) {
                const double d = (b + 0.5 - center) / bump_sigma;
                power[b] += p * std::exp(-0.5 * d * d);
            }
        }
        for (int b = 0; b < cfg.n_mels; ++b) {
            const double breath_u = rng.uniform();
            const double dither_u = rng.uniform();
            power[b] += cfg.breath_noise_floor * floor_profile[b] * cue_breath *
                            (0.9 + 0.2 * breath_u) +
                        kDitherPower * floor_profile[b] * (0.9 + 0.2 * dither_u);
            s.at(b, t) = static_cast<float>(10.0 * std::log10(power[b]));
        }
    }
    return s;
}

std::vector<double> synth_static_features(const ParticipantProfile& profile, int recording_index,
                                          uint64_t seed, const SynthConfig& cfg) {
    Rng rng(mix_seed(mix_seed(mix_seed(seed, 0x57A71C), fnv1a(profile.participant_id)),
                     static_cast<uint64_t>(recording_index)));
    std::vector<double> features(kStaticDim);
    for (int k = 0; k < kNumLabels; ++k) {
        features[2 * k] = profile.cue_intensities[k] + cfg.feature_noise_sigma * rng.gaussian();
        features[2 * k + 1] =
            0.7 * profile.cue_intensities[k] + cfg.feature_noise_sigma * rng.gaussian();
    }
    for (int d = 2 * kNumLabels; d < kStaticDim; ++d) features[d] = rng.gaussian();
    return features;
}

std::vector<Record> generate_corpus(const SynthConfig& cfg,
                                    const std::filesystem::path& out_dir) {
    const auto profiles = make_profiles(cfg);
    std::filesystem::create_directories(out_dir);

    const int rec_width = std::max(2, digits_for(cfg.recordings_per_participant - 1));
    std::vector<Record> records;
    records.reserve(profiles.size() * static_cast<size_t>(cfg.recordings_per_participant));
    for (const auto& profile : profiles) {
        for (int rec = 0; rec < cfg.recordings_per_participant; ++rec) {
            Record r;
            r.record_id = profile.participant_id + "_r" + pad_number(rec, rec_width);
            r.participant_id = profile.participant_id;
            r.path = r.record_id + ".spgm";
            r.labels = profile.labels;
            r.static_features = synth_static_features(profile, rec, cfg.seed, cfg);

            Spectrogram s = synth_spectrogram(profile, rec, cfg.seed, cfg);
            s.id = r.record_id;
            write_spectrogram(s, out_dir / r.path);
            records.push_back(std::move(r));
        }
    }
    std::sort(records.begin(), records.end(),
              [](const Record& a, const Record& b) { return a.record_id < b.record_id; });
    write_manifest(records, out_dir / "manifest.jsonl");
    return records;
}

double cue_oracle_macro_f1(const SynthConfig& cfg, double test_fraction, uint64_t split_seed) {
    const auto profiles = make_profiles(cfg);
    const int n = static_cast<int>(profiles.size());

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(split_seed);
    rng.shuffle(order);
    int n_test = static_cast<int>(std::lround(test_fraction * n));
    n_test = std::clamp(n_test, 1, n - 1);

    std::vector<int> test(order.begin(), order.begin() + n_test);
    std::vector<int> train(order.begin() + n_test, order.end());

    // Least-squares fit of y ~ [cues, 1] per label, solved by Gaussian
    // elimination on the (ridge-damped) normal equations.
    const int dim = kNumLabels + 1;
    double macro_sum = 0.0;
    int macro_terms = 0;
    for (int label = 0; label < kNumLabels; ++label) {
        double ata[dim][dim] = {};
        double atb[dim] = {};
        for (int i : train) {
            double x[dim];
            for (int k = 0; k < kNumLabels; ++k) x[k] = profiles[i].cue_intensities[k];
            x[kNumLabels] = 1.0;
            const double y = profiles[i].labels[label] ? 1.0 : 0.0;
            for (int a = 0; a < dim; ++a) {
                for (int b = 0; b < dim; ++b) ata[a][b] += x[a] * x[b];
                atb[a] += x[a] * y;
            }
        }
        for (int a = 0; a < dim; ++a) ata[a][a] += 1e-8;

        double w[dim];
        {
            double m[dim][dim + 1];
            for (int a = 0; a < dim; ++a) {
                for (int b = 0; b < dim; ++b) m[a][b] = ata[a][b];
                m[a][dim] = atb[a];
            }
            for (int col = 0; col < dim; ++col) {
                int pivot = col;
                for (int row = col + 1; row < dim; ++row) {
                    if (std::fabs(m[row][col]) > std::fabs(m[pivot][col])) pivot = row;
                }
                std::swap(m[col], m[pivot]);
                for (int row = 0; row < dim; ++row) {
                    if (row == col || m[col][col] == 0.0) continue;
                    const double factor = m[row][col] / m[col][col];
                    for (int b = col; b <= dim; ++b) m[row][b] -= factor * m[col][b];
                }
            }
            for (int a = 0; a < dim; ++a) w[a] = m[a][dim] / m[a][a];
        }

        long tp = 0, fp = 0, fn = 0;
        bool any_positive = false;
        for (int i : test) {
            double pred = w[kNumLabels];
            for (int k = 0; k < kNumLabels; ++k) pred += w[k] * profiles[i].cue_intensities[k];
            const bool predicted = pred > 0.5;
            const bool actual = profiles[i].labels[label];
            any_positive = any_positive || actual;
            tp += (predicted && actual) ? 1 : 0;
            fp += (predicted && !actual) ? 1 : 0;
            fn += (!predicted && actual) ? 1 : 0;
        }
        if (!any_positive) continue;  // undefined for this holdout, skip
        const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double f1 =
            (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        macro_sum += f1;
        ++macro_terms;
    }
    if (macro_terms == 0) throw ConfigError("oracle: holdout has no positive labels at all");
    return macro_sum / macro_terms;
}

}  // namespace maelab
