#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "homsum/errors.hpp"
#include "homsum/moments.hpp"

namespace homsum {

struct ConfigError : ArgumentError {
    using ArgumentError::ArgumentError;
};

// Either a kernel file or a named family. Families: band, scaled-band,
// bump-band, uniform-linear, random. A family without N takes N from the ladder;
// bump-band without k expands to one kernel per bump position.
struct KernelSource {
    std::string file;
    std::string family;
    std::optional<int> n;
    int q = 2;
    std::optional<int> k;  // 1-based bump position
    double density = 0.3;
    std::uint64_t seed = 0;
    friend bool operator==(const KernelSource&, const KernelSource&) = default;
};

struct DistanceSettings {
    std::string estimator = "orthant";  // orthant | max
    std::size_t anchor_cap = 2000;
    bool diagonal_anchors = true;
    friend bool operator==(const DistanceSettings&, const DistanceSettings&) = default;
};

// Random corpus for the identity and inequality suites.
struct CorpusSettings {
    int pairs = 200;
    int contexts = 100;
    int kernels = 200;
    int max_dim = 8;
    int max_degree = 3;
    friend bool operator==(const CorpusSettings&, const CorpusSettings&) = default;
};

struct ExperimentConfig {
    std::string id = "run";
    std::uint64_t seed = 0;
    std::vector<KernelSource> kernels;
    // One law for every coordinate, or one per coordinate.
    std::vector<std::string> laws;
    std::optional<std::vector<std::vector<double>>> target;  // absent: exact Gram
    std::size_t mc = 100000;
    double alpha = 1.0;
    std::vector<int> ladder;
    DistanceSettings distance;
    std::string output = "out";
    std::optional<unsigned> threads;
    CorpusSettings corpus;
    // Directory relative kernel paths resolve against; not serialized.
    std::string base_dir = ".";

    friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
        return a.id == b.id && a.seed == b.seed && a.kernels == b.kernels && a.laws == b.laws &&
               a.target == b.target && a.mc == b.mc && a.alpha == b.alpha && a.ladder == b.ladder &&
               a.distance == b.distance && a.output == b.output && a.threads == b.threads && a.corpus == b.corpus;
    }
};

// Strict parse: unknown keys, wrong types, bad law strings, missing kernel files
// and non-increasing ladders raise ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
std::string write_config(const ExperimentConfig& config);

std::vector<VariableSpec> coordinate_laws(const ExperimentConfig& config, int n);

// The system at size n for family kernels (ignored when every source fixes N).
HomSumSystem build_system(const ExperimentConfig& config, std::optional<int> n = std::nullopt);

}  // namespace homsum
