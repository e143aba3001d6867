#pragma once

#include <Eigen/Dense>

namespace ctmsm {

/// Upper bound on the number of chain states (alive states plus death).
inline constexpr int kMaxStates = 8;

/// Small dense matrix with inline storage; never touches the heap.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxStates, kMaxStates>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxStates>;

/// Generator of the alive/dead chain. The last state is the absorbing death state.
///
/// Construction validates: finite entries, non-negative off-diagonals,
/// zero row sums, non-positive diagonal and an all-zero last row.
class IntensityMatrix {
 public:
  explicit IntensityMatrix(Mat entries);

  /// Builds a generator from off-diagonal rates, filling the diagonal with negative row sums.
  static IntensityMatrix from_rates(Mat rates);

  static IntensityMatrix zero(int dim);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Mat& entries() const { return entries_; }
  double operator()(int j, int k) const { return entries_(j, k); }

 private:
  Mat entries_;
};

/// Row-stochastic matrix with the death state absorbing.
class TransitionMatrix {
 public:
  explicit TransitionMatrix(Mat entries);

  static TransitionMatrix identity(int dim);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Mat& entries() const { return entries_; }
  double operator()(int j, int k) const { return entries_(j, k); }

  TransitionMatrix operator*(const TransitionMatrix& rhs) const;

 private:
  struct Unchecked {};
  TransitionMatrix(Mat entries, Unchecked) : entries_(std::move(entries)) {}
  friend TransitionMatrix matrix_exponential(const IntensityMatrix&, double);

  Mat entries_;
};

/// exp(a) by scaling and squaring around a degree-13 Pade approximant. No clamping.
Mat expm_raw(const Mat& a);

/// exp(q * dt). Tiny negative round-off is clamped to zero and rows renormalized.
TransitionMatrix matrix_exponential(const IntensityMatrix& q, double dt);

/// Mean holding time -1/q_jj for alive state `j` (zero-based).
double mean_sojourn_time(const IntensityMatrix& q, int j);

}  // namespace ctmsm
