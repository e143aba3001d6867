#include "ctmsm/linalg.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "ctmsm/error.hpp"

namespace ctmsm {
namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kProbTol = 1e-12;
constexpr double kStochasticRowTol = 1e-10;

std::string where(int j, int k) {
  std::ostringstream os;
  os << "(" << j << "," << k << ")";
  return os.str();
}

void check_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw InvalidInput(std::string(what) + ": matrix must be square and non-empty");
  }
}

double one_norm(const Mat& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

// Pade coefficients b_0..b_m for degrees 3, 5, 7, 9 and 13.
constexpr std::array<double, 4> kPade3{120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                       25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                        30270240.0,    2162160.0,    110880.0,     3960.0,
                                        90.0,          1.0};
constexpr std::array<double, 14> kPade13{
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

// Largest 1-norm for which each degree reaches unit roundoff in double precision.
constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

template <std::size_t N>
Mat pade_low(const Mat& a, const std::array<double, N>& b) {
  const int n = static_cast<int>(a.rows());
  const Mat a2 = a * a;
  Mat power = Mat::Identity(n, n);
  Mat u_inner = Mat::Zero(n, n);
  Mat v = Mat::Zero(n, n);
  for (std::size_t k = 0; k < N; k += 2) {
    v += b[k] * power;
    u_inner += b[k + 1] * power;
    power = power * a2;
  }
  const Mat u = a * u_inner;
  return (v - u).partialPivLu().solve(v + u);
}

Mat pade13(const Mat& a) {
  const auto& b = kPade13;
  const int n = static_cast<int>(a.rows());
  const Mat id = Mat::Identity(n, n);
  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const Mat u_inner =
      a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
  const Mat u = a * u_inner;
  const Mat v =
      a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

IntensityMatrix::IntensityMatrix(Mat entries) : entries_(std::move(entries)) {
  check_square(entries_, "intensity matrix");
  const int n = dim();
  for (int j = 0; j < n; ++j) {
    double row_sum = 0.0;
    double row_scale = 1.0;
    for (int k = 0; k < n; ++k) {
      const double v = entries_(j, k);
      if (!std::isfinite(v)) throw InvalidInput("intensity matrix: non-finite entry at " + where(j, k));
      if (j != k && v < 0.0) throw InvalidInput("intensity matrix: negative off-diagonal at " + where(j, k));
      row_sum += v;
      row_scale = std::max(row_scale, std::abs(v));
    }
    if (entries_(j, j) > 0.0) throw InvalidInput("intensity matrix: positive diagonal at " + where(j, j));
    if (std::abs(row_sum) > kRowSumTol * row_scale) {
      throw InvalidInput("intensity matrix: row " + std::to_string(j) + " does not sum to zero");
    }
  }
  for (int k = 0; k < n; ++k) {
    if (entries_(n - 1, k) != 0.0) throw InvalidInput("intensity matrix: death row must be zero");
  }
}

IntensityMatrix IntensityMatrix::from_rates(Mat rates) {
  check_square(rates, "intensity matrix");
  const int n = static_cast<int>(rates.rows());
  for (int j = 0; j < n; ++j) {
    rates(j, j) = 0.0;
    rates(j, j) = -rates.row(j).sum();
  }
  return IntensityMatrix(std::move(rates));
}

IntensityMatrix IntensityMatrix::zero(int dim) { return IntensityMatrix(Mat::Zero(dim, dim)); }

TransitionMatrix::TransitionMatrix(Mat entries) : entries_(std::move(entries)) {
  check_square(entries_, "transition matrix");
  const int n = dim();
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const double v = entries_(j, k);
      if (!std::isfinite(v) || v < -kProbTol || v > 1.0 + kProbTol) {
        throw InvalidInput("transition matrix: entry outside [0,1] at " + where(j, k));
      }
    }
    if (std::abs(entries_.row(j).sum() - 1.0) > kStochasticRowTol) {
      throw InvalidInput("transition matrix: row " + std::to_string(j) + " does not sum to one");
    }
  }
  for (int k = 0; k < n; ++k) {
    if (std::abs(entries_(n - 1, k) - (k == n - 1 ? 1.0 : 0.0)) > kProbTol) {
      throw InvalidInput("transition matrix: death state must be absorbing");
    }
  }
}

TransitionMatrix TransitionMatrix::identity(int dim) {
  return TransitionMatrix(Mat::Identity(dim, dim), Unchecked{});
}

TransitionMatrix TransitionMatrix::operator*(const TransitionMatrix& rhs) const {
  if (rhs.dim() != dim()) throw InvalidInput("transition matrix product: dimension mismatch");
  return TransitionMatrix(entries_ * rhs.entries_, Unchecked{});
}

Mat expm_raw(const Mat& a) {
  check_square(a, "matrix exponential");
  const double norm = one_norm(a);
  if (!std::isfinite(norm)) throw InvalidInput("matrix exponential: non-finite input");
  if (norm <= kTheta3) return pade_low(a, kPade3);
  if (norm <= kTheta5) return pade_low(a, kPade5);
  if (norm <= kTheta7) return pade_low(a, kPade7);
  if (norm <= kTheta9) return pade_low(a, kPade9);
  int squarings = 0;
  if (norm > kTheta13) squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  Mat x = pade13(a / std::ldexp(1.0, squarings));
  for (int i = 0; i < squarings; ++i) x = x * x;
  return x;
}

TransitionMatrix matrix_exponential(const IntensityMatrix& q, double dt) {
  if (!std::isfinite(dt)) throw InvalidInput("matrix exponential: non-finite time step");
  if (dt < 0.0) throw InvalidInput("matrix exponential: negative time step");
  const int n = q.dim();
  if (dt == 0.0) return TransitionMatrix::identity(n);

  Mat p = expm_raw(q.entries() * dt);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (p(j, k) < 0.0) p(j, k) = 0.0;
    }
    p.row(j) /= p.row(j).sum();
  }
  p.row(n - 1).setZero();
  p(n - 1, n - 1) = 1.0;
  return TransitionMatrix(std::move(p), TransitionMatrix::Unchecked{});
}

double mean_sojourn_time(const IntensityMatrix& q, int j) {
  if (j < 0 || j >= q.dim() - 1) {
    throw UndefinedSojourn("mean sojourn time: state " + std::to_string(j) + " is not an alive state");
  }
  if (q(j, j) == 0.0) {
    throw UndefinedSojourn("mean sojourn time: state " + std::to_string(j) + " is never left");
  }
  return -1.0 / q(j, j);
}

}  // namespace ctmsm
