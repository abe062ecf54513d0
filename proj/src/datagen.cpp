#include "numabench/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "numabench/error.hpp"
#include "numabench/rng.hpp"

namespace numabench {

std::string to_string(Distribution d) {
    switch (d) {
    case Distribution::MovingCluster: return "MovingCluster";
    case Distribution::Sequential: return "Sequential";
    case Distribution::Zipf: return "Zipf";
    }
    return "?";
}

Distribution parse_distribution(const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "movingcluster" || t == "moving-cluster" || t == "moving_cluster") return Distribution::MovingCluster;
    if (t == "sequential") return Distribution::Sequential;
    if (t == "zipf" || t == "zipfian") return Distribution::Zipf;
    throw ConfigError("unknown distribution '" + text + "'");
}

void AggDatasetSpec::validate() const {
    if (c < 1) throw ConfigError("group-by cardinality must be >= 1");
    if (n < c) throw ConfigError("record count n must be >= cardinality c (a group would be empty)");
    if (distribution == Distribution::Zipf && !(e >= 0.0)) throw ConfigError("Zipf exponent must be >= 0");
    if (distribution == Distribution::MovingCluster && (w < 1 || w > c))
        throw ConfigError("moving-cluster window must satisfy 1 <= w <= c");
}

AggDatasetSpec AggDatasetSpec::paper_scale(Distribution d) {
    AggDatasetSpec s;
    s.distribution = d;
    s.n = 100'000'000;
    s.c = 1'000'000;
    return s;
}

void JoinDatasetSpec::validate() const {
    if (build_n == 0) throw ConfigError("build table must hold at least one tuple");
}

JoinDatasetSpec JoinDatasetSpec::with_ratio(std::uint64_t build_n, std::uint64_t seed) {
    return JoinDatasetSpec{build_n, build_n * 16, seed};
}

JoinDatasetSpec JoinDatasetSpec::paper_scale() { return with_ratio(16'000'000); }

ZipfSampler::ZipfSampler(std::uint64_t c, double e) {
    if (c == 0) throw ConfigError("Zipf cardinality must be >= 1");
    cdf_.resize(c);
    double total = 0.0;
    for (std::uint64_t r = 1; r <= c; ++r) {
        total += std::pow(static_cast<double>(r), -e);
        cdf_[r - 1] = total;
    }
    for (auto& v : cdf_) v /= total;
    cdf_.back() = 1.0;
}

std::uint64_t ZipfSampler::rank_for(double u) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
}

Dataset generate_agg(const AggDatasetSpec& spec) {
    spec.validate();
    Dataset out(spec.n);
    Rng rng(spec.seed);
    switch (spec.distribution) {
    case Distribution::Sequential:
        for (std::uint64_t i = 0; i < spec.n; ++i) {
            out[i].key = static_cast<std::uint64_t>(static_cast<unsigned __int128>(i) * spec.c / spec.n);
            out[i].value = rng.next();
        }
        break;
    case Distribution::Zipf: {
        ZipfSampler zipf(spec.c, spec.e);
        for (auto& r : out) {
            r.key = zipf.rank_for(rng.unit()) - 1;
            r.value = rng.next();
        }
        break;
    }
    case Distribution::MovingCluster: {
        const std::uint64_t step = (spec.n + spec.c - 1) / spec.c;
        for (std::uint64_t i = 0; i < spec.n; ++i) {
            const std::uint64_t start = i / step;
            out[i].key = (start + rng.below(spec.w)) % spec.c;
            out[i].value = rng.next();
        }
        break;
    }
    }
    return out;
}

JoinTables generate_join(const JoinDatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    JoinTables t;
    t.build.resize(spec.build_n);
    for (std::uint64_t i = 0; i < spec.build_n; ++i) t.build[i].key = i + 1;
    // Fisher-Yates with the portable bounded draw (std::shuffle is implementation-defined).
    for (std::uint64_t i = spec.build_n - 1; i > 0; --i) std::swap(t.build[i].key, t.build[rng.below(i + 1)].key);
    for (auto& r : t.build) r.value = rng.next();

    t.probe.resize(spec.probe_n);
    for (auto& r : t.probe) {
        r.key = t.build[rng.below(spec.build_n)].key;
        r.value = rng.next();
    }
    return t;
}

namespace {

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
    return v;
}

}  // namespace

void dump_records(std::span<const Record> records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    std::vector<std::uint64_t> buf;
    buf.reserve(records.size() * 2);
    for (const auto& r : records) {
        buf.push_back(to_le(r.key));
        buf.push_back(to_le(r.value));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
    if (!out) throw Error("short write to " + path.string());
}

Dataset load_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error("cannot open " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size % sizeof(Record) != 0) throw Error(path.string() + ": size is not a multiple of 16 bytes");
    in.seekg(0);
    std::vector<std::uint64_t> buf(size / 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    Dataset out(size / sizeof(Record));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].key = to_le(buf[2 * i]);
        out[i].value = to_le(buf[2 * i + 1]);
    }
    return out;
}

}  // namespace numabench
