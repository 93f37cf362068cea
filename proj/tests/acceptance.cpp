// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "driftguard/cli.hpp"
#include "driftguard/codebook.hpp"
#include "driftguard/drift_lab.hpp"
#include "driftguard/io.hpp"
#include "driftguard/latent.hpp"
#include "driftguard/parallel.hpp"
#include "driftguard/scheduler.hpp"
#include "driftguard/toy_denoiser.hpp"
#include "support.hpp"

using namespace driftguard;

namespace {

// Frozen from the first run of criterion 5 (off/on mean distance of clip 39).
constexpr double kGoldenFinalRatio = 2.26050153;
constexpr double kGoldenTolerance = 1e-6;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

bool close_rel(double got, double want, double rel) {
    return std::abs(got - want) <= rel * std::max(std::abs(want), 1e-12);
}

Outcome projection_contract() {
    Outcome o;
    constexpr std::size_t kK = 512, kDim = 16, kCases = 10000;
    const std::vector<float> cents = testing::random_values(kK * kDim, 11);
    std::vector<double> sample;
    const std::vector<float> probe = testing::random_values(4000 * kDim, 12);
    {
        const Codebook plain(kDim, cents, std::vector<std::uint64_t>(kK, 1), {0, 0, 0, 0}, {});
        for (std::size_t i = 0; i < 4000; ++i) {
            sample.push_back(nearest_centroid(ConstVec(probe.data() + i * kDim, kDim), plain).distance);
        }
    }
    const Codebook cb(kDim, cents, std::vector<std::uint64_t>(kK, 1), distance_quantiles(sample), {});
    const double taus[] = {0.0, cb.quantile(Quantile::p50), cb.quantile(Quantile::p99), 1e9};

    std::mt19937_64 rng(13);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::uniform_real_distribution<float> spread(0.0f, 3.0f);
    std::size_t index_kept = 0;
    for (std::size_t c = 0; c < kCases; ++c) {
        // Queries scattered around random centroids at varying radii.
        const std::size_t anchor = rng() % kK;
        const float scale = spread(rng);
        std::vector<float> x(kDim);
        for (std::size_t d = 0; d < kDim; ++d) x[d] = cents[anchor * kDim + d] + scale * 0.5f * u(rng);
        const double tau = taus[c % 4];

        const Nearest before = nearest_centroid(x, cb);
        const ProjectionOutcome once = threshold_replace(x, cb, tau);
        const double d1 = l2_distance(once.vector.values(), cb.centroid(before.index));
        const double want = std::min(before.distance, tau);
        o.require(want == 0.0 ? d1 <= 1e-6 : close_rel(d1, want, 1e-6),
                  "case " + std::to_string(c) + ": distance " + num(d1) + " != " + num(want));

        const ProjectionOutcome twice = threshold_replace(once.vector.values(), cb, tau);
        const double d2 = l2_distance(twice.vector.values(), cb.centroid(before.index));
        o.require(want == 0.0 ? d2 <= 1e-6 : close_rel(d2, d1, 1e-6), "case " + std::to_string(c) + ": not idempotent");

        if (nearest_centroid(once.vector.values(), cb).index == before.index) ++index_kept;
    }
    o.require(index_kept == kCases, "nearest index changed in " + std::to_string(kCases - index_kept) + " cases");
    if (o.pass) o.detail = std::to_string(kCases) + " cases";
    return o;
}

Outcome kmeans_oracle() {
    Outcome o;
    const float centers[3][2] = {{0, 0}, {5, 0}, {0, 5}};
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<float> data;
    for (std::size_t i = 0; i < 3000; ++i) {
        for (int d = 0; d < 2; ++d) data.push_back(static_cast<float>(centers[i % 3][d] + noise(rng)));
    }
    const LatentCorpus corpus(2, data);
    KMeansConfig cfg;
    cfg.k = 3;
    KMeansTrace trace;
    const Codebook cb = kmeans_build(corpus, cfg, &trace);

    std::vector<bool> taken(3, false);
    for (std::size_t j = 0; j < 3; ++j) {
        bool matched = false;
        for (int c = 0; c < 3 && !matched; ++c) {
            const double dx = cb.centroid(j)[0] - centers[c][0], dy = cb.centroid(j)[1] - centers[c][1];
            if (!taken[c] && std::sqrt(dx * dx + dy * dy) <= 0.05) matched = taken[c] = true;
        }
        o.require(matched, "centroid " + std::to_string(j) + " is not within 0.05 of a free true center");
    }
    for (std::size_t i = 1; i < trace.objective.size(); ++i) {
        o.require(trace.objective[i] <= trace.objective[i - 1], "objective increased at step " + std::to_string(i));
    }
    o.require(io::encode_codebook(kmeans_build(corpus, cfg)) == io::encode_codebook(cb), "reruns differ");
    if (o.pass) o.detail = std::to_string(trace.objective.size()) + " assignment steps";
    return o;
}

Outcome search_equivalence() {
    Outcome o;
    constexpr std::size_t kK = 512, kDim = 16;
    const Codebook cb = testing::random_codebook(kK, kDim, 21);
    o.require(cb.has_coarse_index(), "K=512 codebook has no accelerated index");
    std::vector<float> queries = testing::random_values(1000 * kDim, 22, -1.5f, 1.5f);
    // A slice of queries sits exactly on centroids or on midpoints between two.
    for (std::size_t q = 0; q < 100; ++q) {
        for (std::size_t d = 0; d < kDim; ++d) {
            const float a = cb.centroid(q)[d], b = cb.centroid(q + 1)[d];
            queries[q * kDim + d] = q % 2 ? a : 0.5f * (a + b);
        }
    }
    for (std::size_t q = 0; q < 1000; ++q) {
        const ConstVec x(queries.data() + q * kDim, kDim);
        const Nearest fast = cb.search(x);
        const Nearest scan = nearest_centroid(x, cb);
        const auto brute = testing::brute_nearest(x, cb.centroids(), kDim);
        o.require(fast == scan, "query " + std::to_string(q) + ": indexed search differs from the scan");
        o.require(scan.index == brute.first && scan.distance == brute.second,
                  "query " + std::to_string(q) + ": scan differs from the brute-force oracle");
    }
    if (o.pass) o.detail = "1000 queries";
    return o;
}

Outcome chain_arithmetic() {
    Outcome o;
    std::size_t checked = 0;
    for (std::size_t t = 4; t <= 32; ++t) {
        for (std::size_t ov = 0; ov <= 3 && ov < t; ++ov) {
            for (std::size_t n = 1; n <= 16; ++n) {
                ChainConfig cfg;
                cfg.clip_latent_len = t;
                cfg.overlap = ov;
                cfg.num_clips = n;
                std::vector<LatentClip> clips;
                for (std::size_t c = 0; c < n; ++c) {
                    clips.emplace_back(std::vector<LatentFrame>(t, LatentFrame(1, 1, {float(c)})), c);
                }
                const std::size_t want = t + (t - ov) * (n - 1);
                o.require(cfg.stitched_length() == want && stitch(clips, cfg).sequence.size() == want,
                          "T=" + std::to_string(t) + " O=" + std::to_string(ov) + " N=" + std::to_string(n));
                ++checked;
            }
        }
    }
    ChainConfig base;
    base.num_clips = 3;
    o.require(base.stitched_length() == 80, "T=28 O=2 N=3 does not give 80");
    o.require(pixel_to_latent_frames(109) == 28, "109 pixel frames do not map to 28 latent frames");
    o.require(latent_to_pixel_frames(28) == 109, "28 latent frames do not map to 109 pixel frames");
    if (o.pass) o.detail = std::to_string(checked) + " configurations";
    return o;
}

Outcome drift_mitigation() {
    Outcome o;
    BlobCorpusSpec spec;
    spec.n = 50000;
    spec.dim = 16;
    spec.blobs = 8;
    spec.seed = 42;
    KMeansConfig kcfg;
    kcfg.k = 1024;
    kcfg.seed = 42;
    const Codebook cb = kmeans_build(make_blob_corpus(spec), kcfg);
    const LatentFrame reference = make_reference_frame(cb, 64, 42);

    ChainConfig chain;
    chain.num_clips = 40;
    chain.tau = suggest_tau(cb, Quantile::p99);
    DriftConfig drift;
    drift.bias = 0.02;
    drift.noise = 0.01;
    drift.ar_coeff = 0.98;
    drift.seed = 42;

    ChainResult result;
    const DriftReport on = simulate_long_run(reference, cb, chain, drift, &result);
    std::size_t tail_tokens = 0;
    for (std::size_t n = 1; n < result.clips.size(); ++n) {
        // Re-derive the conditioning tail the way the generator received it.
        const ConditioningBundle b = assemble_conditioning(make_pivotal(reference), &result.clips[n - 1], cb, chain, n);
        for (const LatentFrame& f : b.overlap_tail) {
            for (std::size_t s = 0; s < f.tokens(); ++s, ++tail_tokens) {
                const double d = nearest_centroid(f.token(s), cb).distance;
                o.require(d <= chain.tau * (1 + 1e-6), "(a) tail token at " + num(d) + " exceeds tau " + num(chain.tau));
            }
        }
    }
    for (double d : on.conditioning_max_dist) o.require(d <= chain.tau * (1 + 1e-6), "(a) conditioning max above tau");

    chain.use_replacement = false;
    const DriftReport off = simulate_long_run(reference, cb, chain, drift);
    const RunComparison cmp = compare_runs(on, off);
    o.require(cmp.final_ratio >= kMitigationRatio && cmp.mitigated, "(b) final ratio " + num(cmp.final_ratio) + " < 2");
    o.require(close_rel(cmp.final_ratio, kGoldenFinalRatio, kGoldenTolerance),
              "(b) final ratio " + io::format_csv_float(cmp.final_ratio) + " differs from the golden " +
                  io::format_csv_float(kGoldenFinalRatio));

    drift.bias = 0.0;
    drift.noise = 0.0;
    for (bool replace : {true, false}) {
        chain.use_replacement = replace;
        const DriftReport still = simulate_long_run(reference, cb, chain, drift);
        for (std::size_t n = 1; n < still.clips(); ++n) {
            o.require(still.mean_dist[n] == still.mean_dist[0] && still.max_dist[n] == still.max_dist[0] &&
                          still.frac_clipped[n] == still.frac_clipped[0] &&
                          still.pivotal_cosine[n] == still.pivotal_cosine[0],
                      "(c) metrics move at clip " + std::to_string(n) + " without drift");
        }
    }
    if (o.pass) {
        o.detail = "tau=" + num(chain.tau) + " tail tokens=" + std::to_string(tail_tokens) +
                   " final_ratio=" + io::format_csv_float(cmp.final_ratio);
    }
    return o;
}

Outcome audio_init() {
    Outcome o;
    double worst = 0.0;
    for (std::uint64_t draw = 0; draw < 100; ++draw) {
        const ToyBlock block = init_audio_from_text(ToyBlock::random(32, 500 + draw));
        const std::vector<float> xv = testing::random_values(8 * 32, 600 + draw);
        const std::vector<float> tv = testing::random_values(6 * 32, 700 + draw);
        std::vector<FeatureVector> x, text;
        for (std::size_t i = 0; i < 8; ++i) x.emplace_back(ConstVec(xv.data() + i * 32, 32));
        for (std::size_t i = 0; i < 6; ++i) text.emplace_back(ConstVec(tv.data() + i * 32, 32));
        const BlockBranches b = block_branches(block, x, text, text);
        for (std::size_t r = 0; r < b.text.size(); ++r)
            for (std::size_t j = 0; j < 32; ++j) worst = std::max(worst, std::abs(b.audio[r][j] - b.text[r][j]));
    }
    o.require(worst <= 1e-6, "max branch difference " + num(worst));
    if (o.pass) o.detail = "100 draws, max difference " + num(worst);
    return o;
}

Outcome format_round_trips() {
    Outcome o;
    const std::filesystem::path data = DRIFTGUARD_TEST_DATA;
    testing::TempDir dir("acceptance_io");

    const LatentCorpus corpus(16, testing::random_values(16 * 5000, 31, -100.0f, 100.0f));
    io::write_corpus(corpus, dir / "c.bin");
    const LatentCorpus corpus_back = io::read_corpus(dir / "c.bin");
    o.require(std::memcmp(corpus_back.data().data(), corpus.data().data(), corpus.data().size() * 4) == 0 &&
                  corpus_back.dim() == 16,
              "corpus round trip is not bit-identical");

    const Codebook cb = kmeans_build(corpus, [] {
        KMeansConfig c;
        c.k = 64;
        return c;
    }());
    io::write_codebook(cb, dir / "cb.bin");
    o.require(io::read_codebook(dir / "cb.bin") == cb, "codebook round trip is not bit-identical");

    DriftReport r;
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 40; ++n) {
        r.mean_dist.push_back(2 * u(rng));
        r.max_dist.push_back(4 * u(rng));
        r.frac_clipped.push_back(u(rng));
        r.pivotal_cosine.push_back(u(rng));
    }
    io::write_drift_csv(r, dir / "r.csv");
    const DriftReport back = io::read_drift_csv(dir / "r.csv");
    for (int n = 0; n < 40; ++n) {
        o.require(std::abs(back.mean_dist[n] - r.mean_dist[n]) <= 1e-7 && std::abs(back.max_dist[n] - r.max_dist[n]) <= 1e-7 &&
                      std::abs(back.frac_clipped[n] - r.frac_clipped[n]) <= 1e-7 &&
                      std::abs(back.pivotal_cosine[n] - r.pivotal_cosine[n]) <= 1e-7,
                  "drift csv row " + std::to_string(n) + " parses back outside 1e-7");
    }

    const LatentCorpus golden_corpus(3, {1.5f, -2.0f, 0.25f, 0.003f, 1e10f, -0.0f});
    const Codebook golden_cb(2, {0.0f, 1.0f, -1.0f, 2.5f, 3.25f, -4.125f}, {5, 0, 9}, {0.1, 0.2, 0.3, 0.4},
                             BuildMeta{42, 7, 12.5});
    o.require(io::encode_corpus(golden_corpus) == io::read_file(data / "corpus_d3_n2.bin"), "corpus golden bytes differ");
    o.require(io::encode_codebook(golden_cb) == io::read_file(data / "codebook_d2_k3.bin"), "codebook golden bytes differ");
    o.require(io::read_codebook(data / "codebook_d2_k3.bin") == golden_cb, "codebook golden decodes differently");
    if (o.pass) o.detail = "corpus, codebook, csv and goldens";
    return o;
}

struct CliRun {
    int code;
    std::string out;
    std::vector<std::uint8_t> file;
};

CliRun run_cli(std::vector<std::string> args, const std::filesystem::path& product) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), std::filesystem::exists(product) ? io::read_file(product) : std::vector<std::uint8_t>{}};
}

Outcome parallel_determinism() {
    Outcome o;
    testing::TempDir dir("acceptance_threads");
    const std::string corpus = (dir / "corpus.bin").string();
    std::ostringstream sink;
    o.require(cli::run({"gen-corpus", "--out", corpus, "--n", "30000"}, sink, sink) == 0, "gen-corpus failed");

    std::vector<CliRun> builds, sims;
    for (const char* threads : {"1", "2", "8"}) {
        const std::string cb = (dir / (std::string("cb_") + threads + ".bin")).string();
        const std::string csv = (dir / (std::string("sim_") + threads + ".csv")).string();
        builds.push_back(run_cli({"--threads", threads, "build-codebook", "--corpus", corpus, "--out", cb, "--k", "512"}, cb));
        sims.push_back(run_cli({"--threads", threads, "simulate", "--codebook", cb, "--clips", "12", "--bias", "0.02",
                                "--noise", "0.01", "--ar", "0.98", "--report", csv},
                               csv));
    }
    set_num_threads(hardware_threads());
    for (std::size_t i = 0; i < builds.size(); ++i) {
        o.require(builds[i].code == 0 && sims[i].code == 0, "a command failed");
        o.require(builds[i].out == builds[0].out && builds[i].file == builds[0].file && !builds[0].file.empty(),
                  "build-codebook output differs across thread counts");
        o.require(sims[i].out == sims[0].out && sims[i].file == sims[0].file && !sims[0].file.empty(),
                  "simulate output differs across thread counts");
    }
    if (o.pass) o.detail = "threads 1, 2, 8";
    return o;
}

Outcome desk_performance(double& build_seconds) {
    Outcome o;
    BlobCorpusSpec spec;
    spec.n = 1000000;
    spec.dim = 16;
    spec.blobs = 64;
    spec.blob_std = 0.25;
    const LatentCorpus corpus = make_blob_corpus(spec);
    KMeansConfig cfg;
    cfg.k = 4096;
    cfg.max_iters = 25;
    cfg.convergence_tol = 0.0;
    KMeansTrace trace;
    const auto t0 = Clock::now();
    const Codebook cb = kmeans_build(corpus, cfg, &trace);
    build_seconds = seconds_since(t0);
    o.require(cb.size() == 4096 && cb.meta().iterations == 25,
              "built " + std::to_string(cb.size()) + " centroids in " + std::to_string(cb.meta().iterations) + " iterations");
    o.require(build_seconds < 120.0, "build took " + num(build_seconds) + " s");
    o.detail = "build " + num(build_seconds) + " s on " + std::to_string(hardware_threads()) + " hardware thread(s)";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_seconds;
        std::function<Outcome()> body;
    };
    double perf_seconds = 0.0;
    const std::vector<Criterion> criteria = {
        {"projection contract", 5, projection_contract},
        {"k-means oracle", 10, kmeans_oracle},
        {"nearest-centroid search equivalence", 5, search_equivalence},
        {"chain arithmetic", 0, chain_arithmetic},
        {"drift mitigation golden", 60, drift_mitigation},
        {"audio attention init", 0, audio_init},
        {"format round trips", 0, format_round_trips},
        {"determinism under parallelism", 0, parallel_determinism},
        {"desk-scale build performance", 0, [&] { return desk_performance(perf_seconds); }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Criterion& c = criteria[i];
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double elapsed = seconds_since(t0);
        if (c.budget_seconds > 0 && elapsed >= c.budget_seconds) {
            o.require(false, "runtime " + num(elapsed) + " s exceeds " + num(c.budget_seconds) + " s");
        }
        std::printf("criterion %zu %s: %s (%s; %.2f s)\n", i + 1, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                    elapsed);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
