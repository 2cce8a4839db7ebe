#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace purcell {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kPi = std::numbers::pi;

/// Raised when a numerical procedure cannot deliver a result that honors its
/// contract: non-convergence, an unstable drift matrix, a singular resolvent,
/// a Fock cutoff that is too small.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

inline void require_finite(double value, const std::string& name) {
  if (!std::isfinite(value)) throw std::invalid_argument(name + " must be finite");
}

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

} // namespace detail
} // namespace purcell
