#include "driftguard/io.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "driftguard/error.hpp"

namespace driftguard::io {

namespace {

class ByteWriter {
public:
    explicit ByteWriter(std::size_t reserve) { bytes_.reserve(reserve); }

    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    float f32() { return std::bit_cast<float>(u32()); }

private:
    std::uint64_t get(int n) {
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void check_magic(std::span<const std::uint8_t> bytes, const char (&magic)[8], const char* what) {
    const std::size_t have = std::min<std::size_t>(bytes.size(), 8);
    if (std::memcmp(bytes.data(), magic, have) != 0) {
        throw FormatError(FormatErrorKind::bad_magic, 0,
                          std::string(what) + " magic does not match \"" +
                              std::string(magic, 8) + "\"");
    }
    if (bytes.size() < 8) {
        throw FormatError(FormatErrorKind::truncated, bytes.size(),
                          std::string(what) + " file ends inside the magic");
    }
}

void check_header_size(std::span<const std::uint8_t> bytes, std::size_t header, const char* what) {
    if (bytes.size() < header) {
        throw FormatError(FormatErrorKind::truncated, bytes.size(),
                          std::string(what) + " header needs " + std::to_string(header) +
                              " bytes, file has " + std::to_string(bytes.size()));
    }
}

// Exact file length implied by the header, with overflow rejected.
std::uint64_t checked_total(std::uint64_t header, std::uint64_t a, std::uint64_t b,
                            std::uint64_t unit, std::uint64_t extra) {
    const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() / 16;
    if (a != 0 && b > lim / a) throw FormatError(FormatErrorKind::bad_header, 8, "declared size overflows");
    const std::uint64_t cells = a * b;
    if (cells > lim / unit) throw FormatError(FormatErrorKind::bad_header, 8, "declared size overflows");
    return header + cells * unit + extra;
}

void check_payload_size(std::span<const std::uint8_t> bytes, std::uint64_t expected, const char* what) {
    if (bytes.size() < expected) {
        throw FormatError(FormatErrorKind::truncated, bytes.size(),
                          std::string(what) + " expected " + std::to_string(expected) +
                              " bytes, found " + std::to_string(bytes.size()));
    }
    if (bytes.size() > expected) {
        throw FormatError(FormatErrorKind::size_mismatch, expected,
                          std::string(what) + " expected " + std::to_string(expected) +
                              " bytes, found " + std::to_string(bytes.size()));
    }
}

std::vector<float> read_floats(ByteReader& in, std::size_t count) {
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = in.offset();
        values[i] = in.f32();
        if (!std::isfinite(values[i])) {
            throw FormatError(FormatErrorKind::non_finite, at, "non-finite float in payload");
        }
    }
    return values;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) {
        throw InvalidArgument("drift csv line " + std::to_string(line) + ": bad number \"" + s + "\"");
    }
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_corpus(const LatentCorpus& corpus) {
    if (corpus.dim() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("corpus dimension does not fit in 32 bits");
    }
    ByteWriter out(kCorpusHeaderBytes + corpus.data().size() * 4);
    out.raw(kCorpusMagic, 8);
    out.u32(static_cast<std::uint32_t>(corpus.dim()));
    out.u64(corpus.size());
    for (float v : corpus.data()) out.f32(v);
    return out.take();
}

LatentCorpus decode_corpus(std::span<const std::uint8_t> bytes) {
    check_magic(bytes, kCorpusMagic, "corpus");
    check_header_size(bytes, kCorpusHeaderBytes, "corpus");
    ByteReader in(bytes.subspan(8));
    const std::uint32_t dim = in.u32();
    const std::uint64_t n = in.u64();
    if (dim == 0) throw FormatError(FormatErrorKind::bad_header, 8, "corpus dimension is 0");
    if (n == 0) throw FormatError(FormatErrorKind::bad_header, 12, "corpus holds no vectors");
    check_payload_size(bytes, checked_total(kCorpusHeaderBytes, n, dim, 4, 0), "corpus");

    ByteReader payload(bytes);
    for (std::size_t i = 0; i < kCorpusHeaderBytes / 4; ++i) payload.u32();
    std::vector<float> data = read_floats(payload, static_cast<std::size_t>(n * dim));
    return LatentCorpus(dim, std::move(data), "file");
}

std::vector<std::uint8_t> encode_codebook(const Codebook& cb) {
    if (cb.dim() > std::numeric_limits<std::uint32_t>::max() ||
        cb.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("codebook shape does not fit in 32 bits");
    }
    ByteWriter out(kCodebookHeaderBytes + cb.size() * 8 + cb.centroids().size() * 4);
    out.raw(kCodebookMagic, 8);
    out.u32(static_cast<std::uint32_t>(cb.dim()));
    out.u32(static_cast<std::uint32_t>(cb.size()));
    out.u64(cb.meta().seed);
    out.u32(cb.meta().iterations);
    out.f64(cb.meta().objective);
    for (double q : cb.dist_quantiles()) out.f64(q);
    for (std::uint64_t c : cb.counts()) out.u64(c);
    for (float v : cb.centroids()) out.f32(v);
    return out.take();
}

Codebook decode_codebook(std::span<const std::uint8_t> bytes) {
    check_magic(bytes, kCodebookMagic, "codebook");
    check_header_size(bytes, kCodebookHeaderBytes, "codebook");
    ByteReader in(bytes);
    for (int i = 0; i < 2; ++i) in.u32();
    const std::uint32_t dim = in.u32();
    const std::uint32_t k = in.u32();
    BuildMeta meta;
    meta.seed = in.u64();
    meta.iterations = in.u32();
    meta.objective = in.f64();
    std::array<double, 4> quantiles{};
    for (auto& q : quantiles) q = in.f64();

    if (dim == 0) throw FormatError(FormatErrorKind::bad_header, 8, "codebook dimension is 0");
    if (k == 0) throw FormatError(FormatErrorKind::bad_header, 12, "codebook holds no centroids");
    if (!std::isfinite(meta.objective)) {
        throw FormatError(FormatErrorKind::non_finite, 28, "objective is non-finite");
    }
    for (std::size_t q = 0; q < 4; ++q) {
        const std::uint64_t at = 36 + 8 * q;
        if (!std::isfinite(quantiles[q])) {
            throw FormatError(FormatErrorKind::non_finite, at, "distance quantile is non-finite");
        }
        if (quantiles[q] < 0.0 || (q > 0 && quantiles[q] < quantiles[q - 1])) {
            throw FormatError(FormatErrorKind::bad_header, at,
                              "distance quantiles must be non-negative and non-decreasing");
        }
    }
    check_payload_size(bytes, checked_total(kCodebookHeaderBytes, k, dim, 4, std::uint64_t{k} * 8),
                       "codebook");

    std::vector<std::uint64_t> counts(k);
    for (auto& c : counts) c = in.u64();
    std::vector<float> centroids = read_floats(in, static_cast<std::size_t>(k) * dim);
    return Codebook(dim, std::move(centroids), std::move(counts), quantiles, meta);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

void write_corpus(const LatentCorpus& corpus, const std::filesystem::path& path) {
    write_file(path, encode_corpus(corpus));
}

LatentCorpus read_corpus(const std::filesystem::path& path) { return decode_corpus(read_file(path)); }

void write_codebook(const Codebook& cb, const std::filesystem::path& path) {
    write_file(path, encode_codebook(cb));
}

Codebook read_codebook(const std::filesystem::path& path) { return decode_codebook(read_file(path)); }

std::string format_csv_float(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%#.9g", value);
    return buf;
}

std::string drift_csv(const DriftReport& report) {
    report.validate();
    std::string out = kDriftCsvHeader;
    out += '\n';
    for (std::size_t n = 0; n < report.clips(); ++n) {
        out += std::to_string(n);
        for (double v : {report.mean_dist[n], report.max_dist[n], report.frac_clipped[n],
                         report.pivotal_cosine[n]}) {
            out += ',';
            out += format_csv_float(v);
        }
        out += '\n';
    }
    return out;
}

DriftReport parse_drift_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kDriftCsvHeader) {
        throw InvalidArgument("drift csv must start with header \"" + std::string(kDriftCsvHeader) + "\"");
    }
    DriftReport report;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cols = split(line, ',');
        if (cols.size() != 5) {
            throw InvalidArgument("drift csv line " + std::to_string(lineno) + " has " +
                                  std::to_string(cols.size()) + " columns, expected 5");
        }
        if (cols[0] != std::to_string(report.clips())) {
            throw InvalidArgument("drift csv line " + std::to_string(lineno) +
                                  ": clips must be numbered consecutively from 0");
        }
        report.mean_dist.push_back(parse_double(cols[1], lineno));
        report.max_dist.push_back(parse_double(cols[2], lineno));
        report.frac_clipped.push_back(parse_double(cols[3], lineno));
        report.pivotal_cosine.push_back(parse_double(cols[4], lineno));
    }
    report.validate();
    return report;
}

void write_drift_csv(const DriftReport& report, const std::filesystem::path& path) {
    const std::string text = drift_csv(report);
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

DriftReport read_drift_csv(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    try {
        return parse_drift_csv(std::string(bytes.begin(), bytes.end()));
    } catch (const InvalidArgument& e) {
        throw FormatError(FormatErrorKind::bad_header, 0, path.string() + ": " + e.what());
    }
}

void write_comparison_csv(const DriftReport& on, const DriftReport& off, const RunComparison& cmp,
                          const std::filesystem::path& path) {
    std::string text = kComparisonCsvHeader;
    text += '\n';
    for (std::size_t n = 0; n < cmp.ratio.size(); ++n) {
        text += std::to_string(n) + ',' + format_csv_float(on.mean_dist[n]) + ',' +
                format_csv_float(off.mean_dist[n]) + ',' + format_csv_float(cmp.ratio[n]) + '\n';
    }
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace driftguard::io
