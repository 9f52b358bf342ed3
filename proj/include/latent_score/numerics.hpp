#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace latent_score {

// Deterministic random stream keyed by (master_seed, stream_index). The
// engine seed is a hash of both, so streams with different indices are
// decorrelated and results never depend on which thread drew them.
class SeededStream {
 public:
  SeededStream(std::uint64_t master_seed, std::uint64_t stream_index);

  SeededStream(const SeededStream&) = delete;
  SeededStream& operator=(const SeededStream&) = delete;
  SeededStream(SeededStream&&) = default;
  SeededStream& operator=(SeededStream&&) = default;

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }

  // Independent sub-stream; does not advance this stream.
  SeededStream child(std::uint64_t index) const;

  // Uniform on [0, 1).
  double uniform();
  // Categorical draw over unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights);
  // Standard gamma variate with the given shape (scale 1).
  double gamma(double shape);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t stream_index) noexcept;

// log(sum(exp(values))) via the shift-by-max scheme. Throws DomainError on
// empty input or when every entry is -infinity.
double log_sum_exp(std::span<const double> values);

// Natural log of the gamma function for x > 0.
double log_gamma(double x);

// One draw from Dirichlet(alphas), normalized gamma variates. Components are
// clamped below at 1e-300 before normalizing.
std::vector<double> sample_dirichlet(std::span<const double> alphas, SeededStream& rng);

// Dense symmetric matrix. Construction from arbitrary entries stores the
// symmetric part (A + A^T) / 2.
class SymMatrix {
 public:
  explicit SymMatrix(std::size_t order);
  SymMatrix(std::size_t order, std::vector<double> row_major_entries);

  static SymMatrix identity(std::size_t order, double scale = 1.0);

  std::size_t order() const noexcept { return order_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * order_ + j]; }
  // Sets both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double value);
  std::span<const double> data() const noexcept { return entries_; }

 private:
  std::size_t order_;
  std::vector<double> entries_;
};

// log|M| from a Cholesky factorization. Throws NonPdError if the
// factorization fails.
double log_det_pd(const SymMatrix& matrix);

}  // namespace latent_score
