#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace outline_forge {

// Mean and unbiased (n-1) covariance of a feature sample.
struct GaussianStats {
  std::uint64_t n = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Eigen::Index dim() const { return mean.size(); }
};

// Single-pass Welford accumulation in long double. Partial accumulators
// built on disjoint shards combine exactly through merge().
class StatsAccumulator {
 public:
  StatsAccumulator() = default;
  explicit StatsAccumulator(std::size_t dim);

  void add(std::span<const double> x);
  void add(std::span<const float> x);
  void merge(const StatsAccumulator& other);

  std::uint64_t count() const { return n_; }
  std::size_t dim() const { return mean_.size(); }
  GaussianStats finalize() const;

 private:
  void ensure_dim(std::size_t d);

  std::uint64_t n_ = 0;
  std::vector<long double> mean_;
  std::vector<long double> m2_;  // upper triangle incl. diagonal, row-major
};

GaussianStats accumulate_stats(std::span<const std::vector<double>> features);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the trace of
// the square root taken from the eigenvalues of S_a^{1/2} S_b S_a^{1/2}.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

struct EmbeddingPair {
  std::vector<double> image_embedding;
  std::vector<double> text_embedding;
  std::string caption;
};

// Mean cosine similarity of unit-norm image/text embedding pairs.
double clip_score(std::span<const EmbeddingPair> pairs);

// FEAT container: "FEAT", u32 version, u64 count, u32 dim, then count rows
// of dim little-endian float32.
struct FeatureMatrix {
  std::uint32_t dim = 0;
  std::vector<float> values;  // row-major, count * dim

  std::uint64_t count() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> row(std::uint64_t i) const { return {values.data() + i * dim, dim}; }
};

inline constexpr std::uint32_t kFeatVersion = 1;

std::vector<std::uint8_t> encode_features(const FeatureMatrix& m);
FeatureMatrix decode_features(std::span<const std::uint8_t> bytes);
FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMatrix& m);

GaussianStats stats_of(const FeatureMatrix& m);

// {"pairs": [{"caption", "image_embedding", "text_embedding"}, ...]}
std::vector<EmbeddingPair> parse_embeddings(const nlohmann::json& j);
std::vector<EmbeddingPair> read_embeddings(const std::filesystem::path& path);

}  // namespace outline_forge
