#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace vcflock {

/// Regularity class of a communication weight at the origin.
///   TypeI   bounded, Lipschitz, nonincreasing
///   TypeII  r^-alpha with alpha in (0,1): singular but integrable at 0
///   TypeIII r^-alpha with alpha >= 1: not integrable at 0
enum class KernelClass { TypeI, TypeII, TypeIII };

std::string_view to_string(KernelClass c);

/// Closed-form bounded families.
enum class RegularFamily {
  Rational,     ///< (1 + s)^-beta
  CuckerSmale,  ///< (1 + s^2)^-beta
  Exponential,  ///< exp(-rate * s)
};

/// Communication weight psi on (0, inf), with antiderivative, tail integral
/// and Lipschitz bounds. Immutable after construction.
class Kernel {
 public:
  static Kernel power_law(double alpha);
  static Kernel rational(double beta);
  static Kernel cucker_smale(double beta);
  static Kernel exponential(double rate);

  /// Parses `power:alpha=A`, `rational:beta=B`, `cs:beta=B`, `exp:rate=R`.
  static Kernel parse(std::string_view spec);

  /// psi(r). Regular kernels accept r = 0 (value psi(0+)); power laws throw
  /// SingularEvaluation there.
  double psi(double r) const;

  /// Psi(x) = int_0^x psi(|r|) dr, odd in x. Throws NonIntegrable for TypeIII.
  double antiderivative(double x) const;

  /// int_a^b psi(r) dr for a, b >= 0 (b < a gives the negated value).
  double integral(double a, double b) const;

  /// int_a^inf psi(s) ds, +infinity when the tail diverges.
  double tail_integral(double a) const;

  /// Upper bound of |psi(r) - psi(s)| / |r - s| over r, s >= r0.
  double lipschitz_tail(double r0) const;

  KernelClass kernel_class() const;
  bool singular() const { return kernel_class() != KernelClass::TypeI; }

  /// Power-law exponent, if this is a power law.
  std::optional<double> alpha() const;

  /// Canonical spec string; round-trips through parse().
  std::string spec() const;

 private:
  struct Regular {
    RegularFamily family;
    double param;
  };
  struct PowerLaw {
    double alpha;
  };

  explicit Kernel(Regular r);
  explicit Kernel(PowerLaw p) : v_(p) {}

  double regular_psi(const Regular& r, double s) const;
  double regular_primitive(const Regular& r, double x) const;
  double regular_tail(const Regular& r, double a) const;
  double regular_lipschitz(const Regular& r, double r0) const;
  void validate_regular() const;

  std::variant<Regular, PowerLaw> v_;
};

inline KernelClass classify(const Kernel& k) { return k.kernel_class(); }

}  // namespace vcflock
