#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "driftguard/codebook.hpp"
#include "driftguard/drift_lab.hpp"
#include "driftguard/latent.hpp"

namespace driftguard::io {

// Corpus file: "SOULLAT1", D (u32), N (u64), then N*D f32. All little-endian.
inline constexpr char kCorpusMagic[8] = {'S', 'O', 'U', 'L', 'L', 'A', 'T', '1'};
inline constexpr std::size_t kCorpusHeaderBytes = 20;

// Codebook file: "SOULCB01", D (u32), K (u32), seed (u64), iterations (u32),
// objective (f64), p50/p90/p95/p99 (f64 each), K counts (u64), K*D f32.
inline constexpr char kCodebookMagic[8] = {'S', 'O', 'U', 'L', 'C', 'B', '0', '1'};
inline constexpr std::size_t kCodebookHeaderBytes = 68;

inline constexpr const char* kDriftCsvHeader = "clip,mean_dist,max_dist,frac_clipped,pivotal_cosine";
inline constexpr const char* kComparisonCsvHeader = "clip,mean_dist_on,mean_dist_off,ratio";

std::vector<std::uint8_t> encode_corpus(const LatentCorpus& corpus);
LatentCorpus decode_corpus(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_codebook(const Codebook& cb);
Codebook decode_codebook(std::span<const std::uint8_t> bytes);

void write_corpus(const LatentCorpus& corpus, const std::filesystem::path& path);
LatentCorpus read_corpus(const std::filesystem::path& path);
void write_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook read_codebook(const std::filesystem::path& path);

// Nine significant digits, trailing zeros kept ("%#.9g").
std::string format_csv_float(double value);

std::string drift_csv(const DriftReport& report);
DriftReport parse_drift_csv(const std::string& text);
void write_drift_csv(const DriftReport& report, const std::filesystem::path& path);
DriftReport read_drift_csv(const std::filesystem::path& path);

void write_comparison_csv(const DriftReport& on, const DriftReport& off, const RunComparison& cmp,
                          const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace driftguard::io
