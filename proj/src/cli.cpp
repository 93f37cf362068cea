#include "driftguard/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <string>

#include "driftguard/codebook.hpp"
#include "driftguard/drift_lab.hpp"
#include "driftguard/error.hpp"
#include "driftguard/io.hpp"
#include "driftguard/parallel.hpp"
#include "driftguard/scheduler.hpp"

namespace driftguard::cli {

namespace {

struct GlobalOptions {
    std::uint64_t seed = 42;
    int threads = 0;
    bool verbose = false;
};

struct GenCorpusOptions {
    std::string out;
    std::size_t n = 10000;
    std::size_t dim = kDefaultLatentDim;
    std::size_t blobs = 8;
    double blob_std = 0.05;
    double center_range = 5.0;
};

struct BuildOptions {
    std::string corpus;
    std::string out;
    std::size_t k = kDeskCodebookSize;
    std::size_t iters = 25;
    std::string batch_size = "full";
    double tol = 1e-4;
};

struct SimulateOptions {
    std::string codebook;
    std::size_t clips = 10;
    std::size_t overlap = kDefaultOverlapFrames;
    std::size_t clip_len = kDefaultClipLatentLen;
    std::size_t tokens = kDefaultTokensPerFrame;
    std::string tau = "p99";
    double bias = 0.0;
    double noise = 0.0;
    double ar = 1.0;
    std::string replacement = "on";
    std::string report;
};

struct CompareOptions {
    std::string on;
    std::string off;
    std::string out;
};

std::string fmt(double v) { return io::format_csv_float(v); }

int cmd_gen_corpus(const GlobalOptions& g, const GenCorpusOptions& o, std::ostream& out) {
    BlobCorpusSpec spec;
    spec.n = o.n;
    spec.dim = o.dim;
    spec.blobs = o.blobs;
    spec.blob_std = o.blob_std;
    spec.center_range = o.center_range;
    spec.seed = g.seed;
    const LatentCorpus corpus = make_blob_corpus(spec);
    io::write_corpus(corpus, o.out);
    out << "vectors=" << corpus.size() << " dim=" << corpus.dim()
        << " bytes=" << io::kCorpusHeaderBytes + 4 * corpus.data().size() << '\n';
    return kExitOk;
}

int cmd_build_codebook(const GlobalOptions& g, const BuildOptions& o, std::ostream& out,
                       std::ostream& err) {
    KMeansConfig cfg;
    cfg.k = o.k;
    cfg.max_iters = o.iters;
    cfg.seed = g.seed;
    cfg.convergence_tol = o.tol;
    if (o.batch_size != "full") {
        std::size_t used = 0;
        long long b = 0;
        try {
            b = std::stoll(o.batch_size, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != o.batch_size.size() || b <= 0) {
            throw InvalidArgument("--batch-size must be a positive integer or \"full\"");
        }
        cfg.batch_size = static_cast<std::size_t>(b);
    }

    const LatentCorpus corpus = io::read_corpus(o.corpus);
    if (cfg.k > corpus.size()) {
        throw InvalidArgument("--k " + std::to_string(cfg.k) + " exceeds corpus size " +
                              std::to_string(corpus.size()));
    }
    KMeansTrace trace;
    const Codebook cb = kmeans_build(corpus, cfg, &trace);
    if (g.verbose) {
        for (std::size_t i = 0; i < trace.objective.size(); ++i) {
            err << "assignment " << i << " objective " << fmt(trace.objective[i]) << '\n';
        }
        err << "distance evaluations " << trace.distance_evals << '\n';
    }
    io::write_codebook(cb, o.out);
    const auto& q = cb.dist_quantiles();
    out << "objective=" << fmt(cb.meta().objective) << " iterations=" << cb.meta().iterations
        << " k=" << cb.size() << '\n';
    out << "p50=" << fmt(q[0]) << " p90=" << fmt(q[1]) << " p95=" << fmt(q[2]) << " p99=" << fmt(q[3])
        << '\n';
    return kExitOk;
}

double resolve_tau(const std::string& text, const Codebook& cb) {
    if (!text.empty() && text.front() == 'p') {
        const std::optional<Quantile> q = parse_quantile(text);
        if (!q) throw InvalidArgument("--tau quantile must be one of p50, p90, p95, p99; got " + text);
        return suggest_tau(cb, *q);
    }
    std::size_t used = 0;
    double v = -1.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.empty() || !std::isfinite(v) || v < 0.0) {
        throw InvalidArgument("--tau must be a non-negative number or a quantile name; got " + text);
    }
    return v;
}

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o, std::ostream& out,
                 std::ostream& err) {
    if (o.replacement != "on" && o.replacement != "off") {
        throw InvalidArgument("--replacement must be on or off");
    }
    const Codebook cb = io::read_codebook(o.codebook);
    ChainConfig chain;
    chain.clip_latent_len = o.clip_len;
    chain.overlap = o.overlap;
    chain.num_clips = o.clips;
    chain.tau = resolve_tau(o.tau, cb);
    chain.use_replacement = o.replacement == "on";
    chain.use_overlap = true;
    chain.validate();

    DriftConfig drift;
    drift.bias = o.bias;
    drift.noise = o.noise;
    drift.ar_coeff = o.ar;
    drift.seed = g.seed;
    drift.validate();

    const LatentFrame reference = make_reference_frame(cb, o.tokens, g.seed);
    const DriftReport report = simulate_long_run(reference, cb, chain, drift);
    if (!o.report.empty()) io::write_drift_csv(report, o.report);

    double cond_max = 0.0;
    for (double d : report.conditioning_max_dist) cond_max = std::max(cond_max, d);
    const bool capped = !chain.use_replacement || cond_max <= chain.tau + 1e-6;
    if (g.verbose) {
        for (std::size_t n = 0; n < report.clips(); ++n) {
            err << "clip " << n << " mean_dist " << fmt(report.mean_dist[n]) << " cond_max "
                << fmt(report.conditioning_max_dist[n]) << '\n';
        }
    }
    out << "stitched_len=" << report.stitched_length << " clips=" << report.clips()
        << " tau=" << fmt(chain.tau) << '\n';
    out << "max_cond_dist=" << fmt(cond_max) << " cond_capped=" << (capped ? "true" : "false") << '\n';
    out << "final_mean_dist=" << fmt(report.mean_dist.back())
        << " frac_clipped=" << fmt(report.frac_clipped.back()) << '\n';
    if (!capped) {
        err << "error: conditioning tail exceeds tau with replacement on\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_compare(const CompareOptions& o, std::ostream& out) {
    const DriftReport on = io::read_drift_csv(o.on);
    const DriftReport off = io::read_drift_csv(o.off);
    const RunComparison cmp = compare_runs(on, off);
    if (!o.out.empty()) io::write_comparison_csv(on, off, cmp, o.out);
    out << "final_ratio=" << fmt(cmp.final_ratio) << '\n';
    out << "mitigated=" << (cmp.mitigated ? "true" : "false") << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Latent codebook replacement and clip-chaining drift experiments", "driftguard"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (default: hardware concurrency)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--verbose,-v", g.verbose, "Print per-iteration diagnostics to stderr");

    GenCorpusOptions gc;
    CLI::App* gen = app.add_subcommand("gen-corpus", "Write a synthetic blob corpus");
    gen->add_option("--out", gc.out, "Output corpus path")->required();
    gen->add_option("--n", gc.n, "Number of vectors")->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--dim", gc.dim, "Vector dimension")->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--blobs", gc.blobs, "Number of Gaussian blobs")->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--blob-std", gc.blob_std, "Blob standard deviation")->check(CLI::NonNegativeNumber)->capture_default_str();
    gen->add_option("--center-range", gc.center_range, "Blob centers lie in [-r, r]^dim")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    BuildOptions bo;
    CLI::App* build = app.add_subcommand("build-codebook", "Run K-Means over a corpus");
    build->add_option("--corpus", bo.corpus, "Input corpus path")->required();
    build->add_option("--out", bo.out, "Output codebook path")->required();
    build->add_option("--k", bo.k, "Number of centroids")->check(CLI::PositiveNumber)->capture_default_str();
    build->add_option("--iters", bo.iters, "Maximum Lloyd iterations")->check(CLI::PositiveNumber)->capture_default_str();
    build->add_option("--batch-size", bo.batch_size, "Mini-batch size or \"full\"")->capture_default_str();
    build->add_option("--tol", bo.tol, "Relative objective tolerance")->check(CLI::NonNegativeNumber)->capture_default_str();

    SimulateOptions so;
    CLI::App* sim = app.add_subcommand("simulate", "Run a long chained generation with drift");
    sim->add_option("--codebook", so.codebook, "Codebook path")->required();
    sim->add_option("--clips", so.clips, "Number of clips")->check(CLI::Range(2, 1 << 20))->capture_default_str();
    sim->add_option("--overlap", so.overlap, "Overlap frames")->capture_default_str();
    sim->add_option("--clip-len", so.clip_len, "Latent frames per clip")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--tokens", so.tokens, "Tokens per frame")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--tau", so.tau, "Threshold value or quantile name (p50|p90|p95|p99)")->capture_default_str();
    sim->add_option("--bias", so.bias, "Per-frame drift")->check(CLI::NonNegativeNumber)->capture_default_str();
    sim->add_option("--noise", so.noise, "Per-frame noise std")->check(CLI::NonNegativeNumber)->capture_default_str();
    sim->add_option("--ar", so.ar, "Carry-over coefficient in (0, 1]")->capture_default_str();
    sim->add_option("--replacement", so.replacement, "Codebook replacement on|off")->capture_default_str();
    sim->add_option("--report", so.report, "Drift CSV output path");

    CompareOptions co;
    CLI::App* cmp = app.add_subcommand("compare", "Compare drift reports with and without replacement");
    cmp->add_option("--on", co.on, "Report with replacement")->required();
    cmp->add_option("--off", co.off, "Report without replacement")->required();
    cmp->add_option("--out", co.out, "Comparison CSV output path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (g.threads > 0) set_num_threads(g.threads);
        if (gen->parsed()) return cmd_gen_corpus(g, gc, out);
        if (build->parsed()) return cmd_build_codebook(g, bo, out, err);
        if (sim->parsed()) return cmd_simulate(g, so, out, err);
        if (cmp->parsed()) return cmd_compare(co, out);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace driftguard::cli
