#include "vcflock/kernel.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "spec_string.hpp"
#include "vcflock/error.hpp"

namespace vcflock {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQuadTol = 1e-10;

template <class F>
double quad(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, kQuadTol);
}

template <class F>
double quad_tail(F f, double a) {
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, a, kInf, kQuadTol);
}

}  // namespace

std::string_view to_string(KernelClass c) {
  switch (c) {
    case KernelClass::TypeI:
      return "TypeI";
    case KernelClass::TypeII:
      return "TypeII";
    case KernelClass::TypeIII:
      return "TypeIII";
  }
  return "unknown";
}

Kernel::Kernel(Regular r) : v_(r) { validate_regular(); }

Kernel Kernel::power_law(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw DomainError("power-law kernel requires alpha > 0");
  }
  return Kernel(PowerLaw{alpha});
}

Kernel Kernel::rational(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("rational kernel requires beta > 0");
  return Kernel(Regular{RegularFamily::Rational, beta});
}

Kernel Kernel::cucker_smale(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("cs kernel requires beta > 0");
  return Kernel(Regular{RegularFamily::CuckerSmale, beta});
}

Kernel Kernel::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("exp kernel requires rate > 0");
  return Kernel(Regular{RegularFamily::Exponential, rate});
}

Kernel Kernel::parse(std::string_view text) {
  const auto s = detail::parse_spec_string(text);
  try {
    if (s.name == "power") {
      s.reject_unknown({"alpha"});
      return power_law(s.require("alpha"));
    }
    if (s.name == "rational") {
      s.reject_unknown({"beta"});
      return rational(s.require("beta"));
    }
    if (s.name == "cs") {
      s.reject_unknown({"beta"});
      return cucker_smale(s.require("beta"));
    }
    if (s.name == "exp") {
      s.reject_unknown({"rate"});
      return exponential(s.require("rate"));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("kernel '") + std::string(text) + "': " + e.what());
  }
  throw ConfigError("unknown kernel family '" + s.name + "'");
}

// Type-I axioms on a geometric grid: finite, nonnegative, nonincreasing,
// difference quotients within the closed-form Lipschitz bound.
void Kernel::validate_regular() const {
  const auto& r = std::get<Regular>(v_);
  constexpr int kPoints = 1000;
  const double lo = 1e-6;
  const double hi = 1e6;
  const double lip = regular_lipschitz(r, 0.0);
  double prev_s = 0.0;
  double prev = regular_psi(r, 0.0);
  if (!std::isfinite(prev) || prev < 0.0) throw DomainError("kernel not bounded at 0");
  for (int k = 0; k < kPoints; ++k) {
    const double s = lo * std::pow(hi / lo, static_cast<double>(k) / (kPoints - 1));
    const double v = regular_psi(r, s);
    if (!std::isfinite(v) || v < 0.0) throw DomainError("kernel not finite/nonnegative on grid");
    if (v > prev * (1.0 + 1e-12)) throw DomainError("kernel not nonincreasing on grid");
    if (std::abs(prev - v) > lip * (s - prev_s) * (1.0 + 1e-9) + 1e-300) {
      throw DomainError("kernel violates its Lipschitz bound on grid");
    }
    prev = v;
    prev_s = s;
  }
}

double Kernel::regular_psi(const Regular& r, double s) const {
  switch (r.family) {
    case RegularFamily::Rational:
      return std::pow(1.0 + s, -r.param);
    case RegularFamily::CuckerSmale:
      return std::pow(1.0 + s * s, -r.param);
    case RegularFamily::Exponential:
      return std::exp(-r.param * s);
  }
  return 0.0;
}

// int_0^x psi for x >= 0.
double Kernel::regular_primitive(const Regular& r, double x) const {
  if (x == 0.0) return 0.0;
  switch (r.family) {
    case RegularFamily::Rational:
      if (r.param == 1.0) return std::log1p(x);
      return std::expm1((1.0 - r.param) * std::log1p(x)) / (1.0 - r.param);
    case RegularFamily::Exponential:
      return -std::expm1(-r.param * x) / r.param;
    case RegularFamily::CuckerSmale:
      return quad([&](double s) { return regular_psi(r, s); }, 0.0, x);
  }
  return 0.0;
}

double Kernel::regular_tail(const Regular& r, double a) const {
  switch (r.family) {
    case RegularFamily::Rational:
      if (r.param <= 1.0) return kInf;
      return std::pow(1.0 + a, 1.0 - r.param) / (r.param - 1.0);
    case RegularFamily::Exponential:
      return std::exp(-r.param * a) / r.param;
    case RegularFamily::CuckerSmale:
      if (2.0 * r.param <= 1.0) return kInf;
      return quad_tail([&](double s) { return regular_psi(r, s); }, a);
  }
  return kInf;
}

double Kernel::regular_lipschitz(const Regular& r, double r0) const {
  switch (r.family) {
    case RegularFamily::Rational:
      return r.param * std::pow(1.0 + r0, -r.param - 1.0);
    case RegularFamily::Exponential:
      return r.param * std::exp(-r.param * r0);
    case RegularFamily::CuckerSmale: {
      // |psi'| = 2 beta s (1+s^2)^(-beta-1) peaks at s = 1/sqrt(2 beta + 1).
      const double peak = 1.0 / std::sqrt(2.0 * r.param + 1.0);
      const double s = std::max(r0, peak);
      return 2.0 * r.param * s * std::pow(1.0 + s * s, -r.param - 1.0);
    }
  }
  return kInf;
}

double Kernel::psi(double r) const {
  if (std::isnan(r) || r < 0.0) throw DomainError("psi requires r >= 0");
  if (const auto* p = std::get_if<PowerLaw>(&v_)) {
    if (r == 0.0) throw SingularEvaluation("singular kernel evaluated at zero separation");
    if (p->alpha == 1.0) return 1.0 / r;
    return std::pow(r, -p->alpha);
  }
  return regular_psi(std::get<Regular>(v_), r);
}

double Kernel::antiderivative(double x) const {
  const double ax = std::abs(x);
  double value = 0.0;
  if (const auto* p = std::get_if<PowerLaw>(&v_)) {
    if (p->alpha >= 1.0) {
      throw NonIntegrable("antiderivative undefined for strongly singular kernel");
    }
    value = std::pow(ax, 1.0 - p->alpha) / (1.0 - p->alpha);
  } else {
    value = regular_primitive(std::get<Regular>(v_), ax);
  }
  return x < 0.0 ? -value : value;
}

double Kernel::integral(double a, double b) const {
  if (!(a >= 0.0) || !(b >= 0.0)) throw DomainError("integral bounds must be >= 0");
  if (a == b) return 0.0;
  if (b < a) return -integral(b, a);
  if (const auto* p = std::get_if<PowerLaw>(&v_)) {
    if (p->alpha < 1.0) {
      return (std::pow(b, 1.0 - p->alpha) - std::pow(a, 1.0 - p->alpha)) / (1.0 - p->alpha);
    }
    if (a == 0.0) return kInf;
    if (p->alpha == 1.0) return std::log(b / a);
    return (std::pow(a, 1.0 - p->alpha) - std::pow(b, 1.0 - p->alpha)) / (p->alpha - 1.0);
  }
  const auto& r = std::get<Regular>(v_);
  if (r.family == RegularFamily::CuckerSmale) {
    return quad([&](double s) { return regular_psi(r, s); }, a, b);
  }
  return regular_primitive(r, b) - regular_primitive(r, a);
}

double Kernel::tail_integral(double a) const {
  if (!(a >= 0.0)) throw DomainError("tail_integral requires a >= 0");
  if (const auto* p = std::get_if<PowerLaw>(&v_)) {
    if (p->alpha <= 1.0) return kInf;
    if (a == 0.0) return kInf;
    return std::pow(a, 1.0 - p->alpha) / (p->alpha - 1.0);
  }
  return regular_tail(std::get<Regular>(v_), a);
}

double Kernel::lipschitz_tail(double r0) const {
  if (!(r0 >= 0.0)) throw DomainError("lipschitz_tail requires r0 >= 0");
  if (const auto* p = std::get_if<PowerLaw>(&v_)) {
    if (r0 == 0.0) return kInf;
    return p->alpha * std::pow(r0, -p->alpha - 1.0);
  }
  return regular_lipschitz(std::get<Regular>(v_), r0);
}

KernelClass Kernel::kernel_class() const {
  if (const auto* p = std::get_if<PowerLaw>(&v_)) {
    return p->alpha < 1.0 ? KernelClass::TypeII : KernelClass::TypeIII;
  }
  return KernelClass::TypeI;
}

std::optional<double> Kernel::alpha() const {
  if (const auto* p = std::get_if<PowerLaw>(&v_)) return p->alpha;
  return std::nullopt;
}

std::string Kernel::spec() const {
  if (const auto* p = std::get_if<PowerLaw>(&v_)) {
    return "power:alpha=" + detail::format_number(p->alpha);
  }
  const auto& r = std::get<Regular>(v_);
  switch (r.family) {
    case RegularFamily::Rational:
      return "rational:beta=" + detail::format_number(r.param);
    case RegularFamily::CuckerSmale:
      return "cs:beta=" + detail::format_number(r.param);
    case RegularFamily::Exponential:
      return "exp:rate=" + detail::format_number(r.param);
  }
  return {};
}

}  // namespace vcflock
