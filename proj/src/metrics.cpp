#include "outline_forge/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "outline_forge/error.hpp"
#include "outline_forge/image_io.hpp"

namespace outline_forge {

namespace {

constexpr double kPsdTolerance = 1e-8;
constexpr double kNormTolerance = 1e-6;

std::size_t tri(std::size_t i, std::size_t j, std::size_t d) { return i * d - i * (i + 1) / 2 + j; }

// Symmetric PSD square root; small negative eigenvalues are clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success)
    throw Error(ErrorKind::NumericalBreakdown, std::string("eigendecomposition failed for ") + what);
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < -kPsdTolerance * scale)
      throw Error(ErrorKind::NumericalBreakdown,
                  std::string(what) + " is not positive semi-definite (eigenvalue " + std::to_string(lambda[i]) + ")");
    lambda[i] = std::sqrt(std::max(0.0, lambda[i]));
  }
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorKind::Io, "truncated FEAT file");
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

StatsAccumulator::StatsAccumulator(std::size_t dim) { ensure_dim(dim); }

void StatsAccumulator::ensure_dim(std::size_t d) {
  if (mean_.empty() && n_ == 0) {
    mean_.assign(d, 0.0L);
    m2_.assign(d * (d + 1) / 2, 0.0L);
    return;
  }
  if (d != mean_.size())
    throw Error(ErrorKind::DimensionMismatch,
                "feature dimension " + std::to_string(d) + " vs " + std::to_string(mean_.size()));
}

void StatsAccumulator::add(std::span<const double> x) {
  ensure_dim(x.size());
  const std::size_t d = x.size();
  ++n_;
  const long double n = static_cast<long double>(n_);
  std::vector<long double> delta(d);
  for (std::size_t i = 0; i < d; ++i) {
    delta[i] = static_cast<long double>(x[i]) - mean_[i];
    mean_[i] += delta[i] / n;
  }
  const long double w = (n - 1) / n;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) m2_[tri(i, j, d)] += delta[i] * delta[j] * w;
}

void StatsAccumulator::add(std::span<const float> x) {
  std::vector<double> v(x.begin(), x.end());
  add(std::span<const double>(v));
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  ensure_dim(other.dim());
  const std::size_t d = dim();
  const long double na = static_cast<long double>(n_);
  const long double nb = static_cast<long double>(other.n_);
  const long double n = na + nb;
  std::vector<long double> delta(d);
  for (std::size_t i = 0; i < d; ++i) {
    delta[i] = other.mean_[i] - mean_[i];
    mean_[i] += delta[i] * nb / n;
  }
  const long double w = na * nb / n;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) m2_[tri(i, j, d)] += other.m2_[tri(i, j, d)] + delta[i] * delta[j] * w;
  n_ += other.n_;
}

GaussianStats StatsAccumulator::finalize() const {
  if (n_ < 2) throw Error(ErrorKind::TooFewSamples, "need at least 2 feature vectors, got " + std::to_string(n_));
  const auto d = static_cast<Eigen::Index>(dim());
  GaussianStats s;
  s.n = n_;
  s.mean.resize(d);
  s.cov.resize(d, d);
  const long double denom = static_cast<long double>(n_ - 1);
  for (Eigen::Index i = 0; i < d; ++i) {
    s.mean[i] = static_cast<double>(mean_[i]);
    for (Eigen::Index j = i; j < d; ++j) {
      const double c = static_cast<double>(m2_[tri(i, j, dim())] / denom);
      s.cov(i, j) = c;
      s.cov(j, i) = c;
    }
  }
  return s;
}

GaussianStats accumulate_stats(std::span<const std::vector<double>> features) {
  StatsAccumulator acc;
  for (const auto& f : features) acc.add(std::span<const double>(f));
  return acc.finalize();
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim())
    throw Error(ErrorKind::DimensionMismatch, "Gaussian stats differ in dimension");
  const Eigen::MatrixXd sqrt_a = psd_sqrt(a.cov, "first covariance");
  Eigen::MatrixXd inner = sqrt_a * b.cov * sqrt_a;
  inner = 0.5 * (inner + inner.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::NumericalBreakdown, "eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < -kPsdTolerance * scale)
      throw Error(ErrorKind::NumericalBreakdown,
                  "covariance product has negative eigenvalue " + std::to_string(lambda[i]));
    trace_sqrt += std::sqrt(std::max(0.0, lambda[i]));
  }

  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
  const double tol = kPsdTolerance * std::max(1.0, a.cov.trace() + b.cov.trace() + mean_term);
  if (d < -tol) throw Error(ErrorKind::NumericalBreakdown, "negative Frechet distance " + std::to_string(d));
  return std::max(0.0, d);
}

double clip_score(std::span<const EmbeddingPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "no embedding pairs");
  double total = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    if (p.image_embedding.size() != p.text_embedding.size() || p.image_embedding.empty())
      throw Error(ErrorKind::DimensionMismatch, "embedding pair " + std::to_string(k) + " has mismatched dimensions");
    double dot = 0.0, ni = 0.0, nt = 0.0;
    for (std::size_t i = 0; i < p.image_embedding.size(); ++i) {
      dot += p.image_embedding[i] * p.text_embedding[i];
      ni += p.image_embedding[i] * p.image_embedding[i];
      nt += p.text_embedding[i] * p.text_embedding[i];
    }
    if (std::abs(std::sqrt(ni) - 1.0) > kNormTolerance || std::abs(std::sqrt(nt) - 1.0) > kNormTolerance)
      throw Error(ErrorKind::NotNormalized, "embedding pair " + std::to_string(k) + " is not unit norm");
    total += dot;
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<std::uint8_t> encode_features(const FeatureMatrix& m) {
  if (m.dim == 0 || m.values.size() % m.dim != 0)
    throw Error(ErrorKind::DimensionMismatch, "feature buffer is not a whole number of rows");
  std::vector<std::uint8_t> out;
  out.reserve(20 + 4 * m.values.size());
  for (char c : std::string_view("FEAT")) out.push_back(static_cast<std::uint8_t>(c));
  put_le<std::uint32_t>(out, kFeatVersion);
  put_le<std::uint64_t>(out, m.count());
  put_le<std::uint32_t>(out, m.dim);
  for (float v : m.values) put_le<float>(out, v);
  return out;
}

FeatureMatrix decode_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FEAT", 4) != 0)
    throw Error(ErrorKind::Io, "not a FEAT file (bad magic)");
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kFeatVersion) throw Error(ErrorKind::Io, "unsupported FEAT version " + std::to_string(version));
  const auto count = get_le<std::uint64_t>(bytes, pos);
  FeatureMatrix m;
  m.dim = get_le<std::uint32_t>(bytes, pos);
  if (m.dim == 0) throw Error(ErrorKind::Io, "FEAT dimension is zero");
  if ((bytes.size() - pos) / 4 / m.dim < count || (bytes.size() - pos) != count * m.dim * 4)
    throw Error(ErrorKind::Io, "FEAT payload size does not match header");
  m.values.resize(count * m.dim);
  for (auto& v : m.values) v = get_le<float>(bytes, pos);
  return m;
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  try {
    return decode_features(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  write_file(path, encode_features(m));
}

GaussianStats stats_of(const FeatureMatrix& m) {
  StatsAccumulator acc(m.dim);
  for (std::uint64_t i = 0; i < m.count(); ++i) acc.add(m.row(i));
  return acc.finalize();
}

std::vector<EmbeddingPair> parse_embeddings(const nlohmann::json& j) {
  std::vector<EmbeddingPair> out;
  try {
    const nlohmann::json& arr = j.is_object() ? j.at("pairs") : j;
    if (!arr.is_array()) throw Error(ErrorKind::MalformedJson, "embedding file: pairs must be an array");
    for (const auto& p : arr)
      out.push_back({p.at("image_embedding").get<std::vector<double>>(),
                     p.at("text_embedding").get<std::vector<double>>(), p.value("caption", std::string{})});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedJson, std::string("embedding file: ") + e.what());
  }
  return out;
}

std::vector<EmbeddingPair> read_embeddings(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_embeddings(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedJson, path.string() + ": " + e.what());
  }
}

}  // namespace outline_forge
