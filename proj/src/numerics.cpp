#include "latent_score/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "latent_score/errors.hpp"

namespace latent_score {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t stream_index) noexcept {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(stream_index + 0x632be59bd9b4e019ULL));
}

SeededStream::SeededStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : master_seed_(master_seed),
      stream_index_(stream_index),
      engine_(mix_seed(master_seed, stream_index)) {}

SeededStream SeededStream::child(std::uint64_t index) const {
  return SeededStream(mix_seed(master_seed_, stream_index_), index);
}

double SeededStream::uniform() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

std::size_t SeededStream::categorical(std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(total > 0.0)) {
    throw DomainError("categorical: weights must have a positive sum");
  }
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    last_positive = k;
    acc += weights[k];
    if (u < acc) return k;
  }
  return last_positive;
}

double SeededStream::gamma(double shape) {
  return std::gamma_distribution<double>(shape, 1.0)(engine_);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw DomainError("log_sum_exp: empty input");
  const double max = *std::max_element(values.begin(), values.end());
  if (max == -std::numeric_limits<double>::infinity()) {
    throw DomainError("log_sum_exp: all entries are -infinity");
  }
  if (std::isinf(max)) return max;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max);
  return max + std::log(sum);
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: argument must be positive, got " + std::to_string(x));
  // lgamma_r leaves the global signgam alone, so concurrent callers are safe.
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

std::vector<double> sample_dirichlet(std::span<const double> alphas, SeededStream& rng) {
  if (alphas.size() < 2) throw DomainError("sample_dirichlet: need at least two components");
  for (double a : alphas) {
    if (!(a > 0.0)) throw DomainError("sample_dirichlet: concentration must be positive");
  }
  std::vector<double> draw(alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    draw[k] = std::max(rng.gamma(alphas[k]), 1e-300);
  }
  const double total = std::accumulate(draw.begin(), draw.end(), 0.0);
  for (double& v : draw) v /= total;
  return draw;
}

SymMatrix::SymMatrix(std::size_t order) : order_(order), entries_(order * order, 0.0) {
  if (order == 0) throw ContractError("SymMatrix: order must be positive");
}

SymMatrix::SymMatrix(std::size_t order, std::vector<double> row_major_entries)
    : order_(order), entries_(std::move(row_major_entries)) {
  if (order == 0) throw ContractError("SymMatrix: order must be positive");
  if (entries_.size() != order * order) throw ContractError("SymMatrix: entry count does not match order");
  for (std::size_t i = 0; i < order_; ++i) {
    for (std::size_t j = i + 1; j < order_; ++j) {
      const double avg = 0.5 * (entries_[i * order_ + j] + entries_[j * order_ + i]);
      entries_[i * order_ + j] = avg;
      entries_[j * order_ + i] = avg;
    }
  }
}

SymMatrix SymMatrix::identity(std::size_t order, double scale) {
  SymMatrix m(order);
  for (std::size_t i = 0; i < order; ++i) m.entries_[i * order + i] = scale;
  return m;
}

void SymMatrix::set(std::size_t i, std::size_t j, double value) {
  entries_[i * order_ + j] = value;
  entries_[j * order_ + i] = value;
}

double log_det_pd(const SymMatrix& matrix) {
  const auto n = static_cast<Eigen::Index>(matrix.order());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> view(
      matrix.data().data(), n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(view);
  if (llt.info() != Eigen::Success) throw NonPdError("matrix is not positive definite");
  const auto& l = llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pivot = l(i, i);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) throw NonPdError("matrix is not positive definite");
    log_det += 2.0 * std::log(pivot);
  }
  return log_det;
}

}  // namespace latent_score
