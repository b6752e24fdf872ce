#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace scivr {

using cplx = std::complex<double>;

/// Atomic units throughout; the constant is kept so formulas read like physics.
inline constexpr double kHbar = 1.0;

/// Hartree per wavenumber. Used only at I/O boundaries.
inline constexpr double kCmToHartree = 4.556335e-6;

inline constexpr double kPi = 3.14159265358979323846;

template <int F>
using Vec = Eigen::Matrix<double, F, 1>;
template <int F>
using Mat = Eigen::Matrix<double, F, F>;
template <int F>
using CVec = Eigen::Matrix<cplx, F, 1>;
template <int F>
using CMat = Eigen::Matrix<cplx, F, F>;

/// Phase-space matrix ordered (p, q) in rows and (p0, q0) in columns.
template <int F>
using PhaseMat = Eigen::Matrix<double, 2 * F, 2 * F>;

/// Largest number of degrees of freedom the fixed-size engine is compiled for.
inline constexpr int kMaxDim = 3;

/// Invalid user input: bad configuration values, dimension mismatches,
/// incompatible method choices. Carries the offending field path when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

template <int F>
using DimTag = std::integral_constant<int, F>;

/// Calls fn(DimTag<F>{}) for the runtime dimension f. All fixed-size
/// machinery is instantiated for 1 <= F <= kMaxDim.
template <class Fn>
decltype(auto) dispatch_dim(int f, Fn&& fn) {
  switch (f) {
    case 1:
      return fn(DimTag<1>{});
    case 2:
      return fn(DimTag<2>{});
    case 3:
      return fn(DimTag<3>{});
    default:
      throw ConfigError("dimension " + std::to_string(f) +
                        " outside supported range [1, 3]");
  }
}

inline bool all_finite(double x) { return std::isfinite(x); }

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace scivr
