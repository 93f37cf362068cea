#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "driftguard/codebook.hpp"
#include "driftguard/scheduler.hpp"

namespace driftguard {

// Synthetic clip generator parameters. Each generated frame is pulled back
// toward the pivotal frame by (1 - ar_coeff) and pushed along a fixed
// direction by `bias`, plus Gaussian noise of std `noise`.
struct DriftConfig {
    double bias = 0.0;
    double noise = 0.0;
    double ar_coeff = 1.0;
    std::uint64_t seed = 42;
    // Unit vector; empty means a random direction fixed by the seed.
    std::optional<FeatureVector> drift_direction;

    void validate() const;
    bool operator==(const DriftConfig&) const = default;
};

// Unit drift direction for latent dimension `dim`.
FeatureVector resolve_drift_direction(const DriftConfig& drift, std::size_t dim);

LatentClip toy_generate_clip(const ConditioningBundle& bundle, const DriftConfig& drift,
                             std::size_t clip_len);

ClipGenerator make_drift_generator(const DriftConfig& drift, std::size_t clip_len);

// Per-clip drift metrics over each clip's frames in the stitched sequence.
struct DriftReport {
    std::vector<double> mean_dist;       // mean nearest-centroid distance
    std::vector<double> max_dist;        // max nearest-centroid distance
    std::vector<double> frac_clipped;    // conditioning-tail tokens clipped
    std::vector<double> pivotal_cosine;  // cosine(mean token of clip, mean pivotal token)
    // Max nearest-centroid distance of the conditioning tail as handed to the
    // generator (after projection when enabled); 0 for clip 0. Not part of
    // the CSV schema.
    std::vector<double> conditioning_max_dist;
    std::size_t stitched_length = 0;
    std::optional<DriftConfig> config;

    std::size_t clips() const { return mean_dist.size(); }
    void validate() const;
};

DriftReport simulate_long_run(const LatentFrame& reference, const Codebook& cb,
                              const ChainConfig& chain_cfg, const DriftConfig& drift,
                              ChainResult* chain_out = nullptr);

struct RunComparison {
    std::vector<double> ratio;  // off / on, per clip
    double final_ratio = 1.0;
    bool mitigated = false;
};

inline constexpr double kMitigationRatio = 2.0;

RunComparison compare_runs(const DriftReport& report_on, const DriftReport& report_off);

// Synthetic latent corpus: n vectors from `blobs` isotropic Gaussian blobs of
// std `blob_std`, with centers uniform in [-center_range, center_range]^dim.
struct BlobCorpusSpec {
    std::size_t n = 10000;
    std::size_t dim = kDefaultLatentDim;
    std::size_t blobs = 8;
    double blob_std = 0.05;
    double center_range = 5.0;
    std::uint64_t seed = 42;
};

LatentCorpus make_blob_corpus(const BlobCorpusSpec& spec);

// In-distribution reference frame drawn from the codebook: each token is a
// count-weighted random centroid displaced by the median training distance
// in a random direction.
LatentFrame make_reference_frame(const Codebook& cb, std::size_t tokens, std::uint64_t seed);

}  // namespace driftguard
