#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace numabench {

struct Record {
    std::uint64_t key = 0;
    std::uint64_t value = 0;

    bool operator==(const Record&) const = default;
};
static_assert(sizeof(Record) == 16);

using Dataset = std::vector<Record>;

enum class Distribution { MovingCluster, Sequential, Zipf };

std::string to_string(Distribution d);
Distribution parse_distribution(const std::string& text);

struct AggDatasetSpec {
    Distribution distribution = Distribution::MovingCluster;
    std::uint64_t n = 1'000'000;
    std::uint64_t c = 10'000;   // group-by cardinality
    double e = 0.5;             // Zipf exponent
    std::uint64_t w = 64;       // moving-cluster window width
    std::uint64_t seed = 42;

    /// Throws ConfigError when n >= c >= 1, e >= 0 or 1 <= w <= c is violated.
    /// w is only checked for MovingCluster, e only for Zipf.
    void validate() const;

    static AggDatasetSpec paper_scale(Distribution d);

    bool operator==(const AggDatasetSpec&) const = default;
};

struct JoinDatasetSpec {
    std::uint64_t build_n = 1'000'000;
    std::uint64_t probe_n = 16'000'000;
    std::uint64_t seed = 42;

    void validate() const;

    /// probe_n defaults to 16 x build_n.
    static JoinDatasetSpec with_ratio(std::uint64_t build_n, std::uint64_t seed = 42);
    static JoinDatasetSpec paper_scale();

    bool operator==(const JoinDatasetSpec&) const = default;
};

struct JoinTables {
    Dataset build;
    Dataset probe;
};

/// Deterministic in the spec: equal specs give byte-identical output.
///
/// Keys lie in [0, c). Per record the key draw (if any) comes before the
/// value draw; values are raw 64-bit generator output.
///   Sequential:    key_i = floor(i * c / n)
///   Zipf:          P(rank r) proportional to r^-e over ranks 1..c, key = r - 1
///   MovingCluster: window start s_i = floor(i / ceil(n / c)), key = (s_i + U[0, w)) mod c
Dataset generate_agg(const AggDatasetSpec& spec);

/// Build keys are a random permutation of 1..build_n; every probe key is
/// drawn uniformly from the build keys.
JoinTables generate_join(const JoinDatasetSpec& spec);

/// Cumulative Zipf distribution over ranks 1..c, used by the generator.
class ZipfSampler {
public:
    ZipfSampler(std::uint64_t c, double e);
    /// Maps u in [0,1) to a rank in 1..c.
    std::uint64_t rank_for(double u) const;
    std::uint64_t cardinality() const noexcept { return cdf_.size(); }

private:
    std::vector<double> cdf_;
};

/// Little-endian, 16 bytes per record, no header.
void dump_records(std::span<const Record> records, const std::filesystem::path& path);
Dataset load_records(const std::filesystem::path& path);

}  // namespace numabench
