#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vcflock {

enum class Curvature { Convex, Concave };

/// Derivative bounds of g on [0, p0_max].
struct GBounds {
  double p0_max = 0.0;
  double m_gprime = 1.0;  ///< min g'
  double M_gprime = 1.0;  ///< max g'
  double M_script = 1.0;  ///< min{m, m^2 / M}
};

/// Radial velocity map G(p) = g(|p|) p / |p|. Immutable, cheap to copy.
class VelocityControl {
 public:
  static VelocityControl identity();
  /// g is the inverse of v -> Gamma (1 + Gamma / c^2) v, Gamma = (1 - v^2/c^2)^-1/2.
  static VelocityControl relativistic(double c);
  /// g(v) = tanh(v / eps).
  static VelocityControl saturating_tanh(double eps);
  /// User-supplied profile. g(0) must be 0, g' > 0, and g' monotone in the
  /// direction implied by `shape` on [0, check_range]; checked on a grid.
  static VelocityControl custom(std::function<double(double)> g,
                                std::function<double(double)> g_prime, Curvature shape,
                                double check_range = 10.0);

  /// Parses `identity`, `relativistic:c=C`, `tanh:eps=E`.
  static VelocityControl parse(std::string_view spec);

  double g(double v) const;
  double gprime(double v) const;

  /// out = G(p); out may alias p.
  void apply(const double* p, double* out, int dim) const;
  std::vector<double> apply(std::span<const double> p) const;
  /// Signed scalar version sgn(v) g(|v|).
  double apply_scalar(double v) const;

  /// (g(|p|)/|p|, g'(|p|)); both equal g'(0) at p = 0.
  std::pair<double, double> jacobian_eigs(std::span<const double> p) const;

  GBounds bounds(double p0_max) const;

  bool is_identity() const;
  std::string spec() const;

 private:
  struct Impl;
  explicit VelocityControl(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

}  // namespace vcflock
