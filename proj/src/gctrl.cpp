#include "vcflock/gctrl.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>

#include "spec_string.hpp"
#include "vcflock/error.hpp"

namespace vcflock {

namespace {

enum class Kind { Identity, Relativistic, Tanh, Custom };

// Below this modulus G(p) is evaluated as g'(0) p.
constexpr double kTinyModulus = 1e-300;

// Lorentz-type forward map h(v) = Gamma (1 + Gamma/c^2) v and its derivative.
struct Lorentz {
  double c;

  double gamma(double v) const { return 1.0 / std::sqrt((1.0 - v / c) * (1.0 + v / c)); }
  double h(double v) const {
    const double gm = gamma(v);
    return gm * (1.0 + gm / (c * c)) * v;
  }
  double dh(double v) const {
    const double gm = gamma(v);
    const double c2 = c * c;
    return gm * gm * gm + (gm * gm + 2.0 * v * v * gm * gm * gm * gm / c2) / c2;
  }
  double inverse(double s) const {
    if (s <= 0.0) return 0.0;
    // Solve in u = v / c so the bracket is [0, 1).
    const auto f = [&](double u) {
      const double v = c * u;
      return std::make_tuple(h(v) - s, c * dh(v));
    };
    const double hi = std::nextafter(1.0, 0.0);
    const double guess = std::min(s / (c + 1.0 / c), 0.5);
    std::uintmax_t iters = 200;
    const double u = boost::math::tools::newton_raphson_iterate(f, guess, 0.0, hi, 42, iters);
    return c * u;
  }
};

// sech^2 without overflow for large arguments.
double sech2(double x) {
  const double ax = std::abs(x);
  if (ax > 350.0) return 0.0;
  const double ch = std::cosh(ax);
  return 1.0 / (ch * ch);
}

}  // namespace

struct VelocityControl::Impl {
  Kind kind = Kind::Identity;
  double param = 0.0;
  std::function<double(double)> g;
  std::function<double(double)> gp;
  Curvature shape = Curvature::Concave;
};

VelocityControl VelocityControl::identity() {
  return VelocityControl(std::make_shared<const Impl>(Impl{}));
}

VelocityControl VelocityControl::relativistic(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("relativistic control requires c > 0");
  Impl impl;
  impl.kind = Kind::Relativistic;
  impl.param = c;
  return VelocityControl(std::make_shared<const Impl>(std::move(impl)));
}

VelocityControl VelocityControl::saturating_tanh(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("tanh control requires eps > 0");
  Impl impl;
  impl.kind = Kind::Tanh;
  impl.param = eps;
  return VelocityControl(std::make_shared<const Impl>(std::move(impl)));
}

VelocityControl VelocityControl::custom(std::function<double(double)> g,
                                        std::function<double(double)> g_prime, Curvature shape,
                                        double check_range) {
  if (!g || !g_prime) throw DomainError("custom control needs g and g'");
  if (!(check_range > 0.0)) throw DomainError("custom control needs a positive check range");
  if (std::abs(g(0.0)) > 1e-12) throw DomainError("custom control requires g(0) = 0");

  constexpr int kPoints = 1001;
  bool rises = false;
  bool falls = false;
  double prev = g_prime(0.0);
  if (!(prev > 0.0) || !std::isfinite(prev)) throw DomainError("custom control requires g'(0) > 0");
  for (int k = 1; k < kPoints; ++k) {
    const double v = check_range * k / (kPoints - 1);
    const double d = g_prime(v);
    if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("custom control requires g' > 0");
    const double tol = 1e-12 * std::max(std::abs(d), std::abs(prev));
    if (d > prev + tol) rises = true;
    if (d < prev - tol) falls = true;
    prev = d;
  }
  if (rises && falls) throw DomainError("custom control has mixed curvature on the sample grid");
  if (shape == Curvature::Convex && falls) throw DomainError("custom control declared convex but g' decreases");
  if (shape == Curvature::Concave && rises) throw DomainError("custom control declared concave but g' increases");

  Impl impl;
  impl.kind = Kind::Custom;
  impl.g = std::move(g);
  impl.gp = std::move(g_prime);
  impl.shape = shape;
  return VelocityControl(std::make_shared<const Impl>(std::move(impl)));
}

VelocityControl VelocityControl::parse(std::string_view text) {
  const auto s = detail::parse_spec_string(text);
  try {
    if (s.name == "identity") {
      s.reject_unknown({});
      return identity();
    }
    if (s.name == "relativistic") {
      s.reject_unknown({"c"});
      return relativistic(s.require("c"));
    }
    if (s.name == "tanh") {
      s.reject_unknown({"eps"});
      return saturating_tanh(s.require("eps"));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("velocity control '") + std::string(text) + "': " + e.what());
  }
  throw ConfigError("unknown velocity control '" + s.name + "'");
}

double VelocityControl::g(double v) const {
  switch (impl_->kind) {
    case Kind::Identity:
      return v;
    case Kind::Relativistic:
      return Lorentz{impl_->param}.inverse(v);
    case Kind::Tanh:
      return std::tanh(v / impl_->param);
    case Kind::Custom:
      return impl_->g(v);
  }
  return v;
}

double VelocityControl::gprime(double v) const {
  switch (impl_->kind) {
    case Kind::Identity:
      return 1.0;
    case Kind::Relativistic: {
      const Lorentz l{impl_->param};
      return 1.0 / l.dh(l.inverse(v));
    }
    case Kind::Tanh:
      return sech2(v / impl_->param) / impl_->param;
    case Kind::Custom:
      return impl_->gp(v);
  }
  return 1.0;
}

void VelocityControl::apply(const double* p, double* out, int dim) const {
  if (impl_->kind == Kind::Identity) {
    if (out != p) std::copy(p, p + dim, out);
    return;
  }
  double r2 = 0.0;
  for (int k = 0; k < dim; ++k) r2 += p[k] * p[k];
  const double r = std::sqrt(r2);
  const double scale = r < kTinyModulus ? gprime(0.0) : g(r) / r;
  for (int k = 0; k < dim; ++k) out[k] = scale * p[k];
}

std::vector<double> VelocityControl::apply(std::span<const double> p) const {
  std::vector<double> out(p.size());
  apply(p.data(), out.data(), static_cast<int>(p.size()));
  return out;
}

double VelocityControl::apply_scalar(double v) const {
  if (impl_->kind == Kind::Identity) return v;
  const double m = g(std::abs(v));
  return v < 0.0 ? -m : m;
}

std::pair<double, double> VelocityControl::jacobian_eigs(std::span<const double> p) const {
  double r2 = 0.0;
  for (double x : p) r2 += x * x;
  const double r = std::sqrt(r2);
  if (r < kTinyModulus) {
    const double d0 = gprime(0.0);
    return {d0, d0};
  }
  return {g(r) / r, gprime(r)};
}

GBounds VelocityControl::bounds(double p0_max) const {
  if (!(p0_max >= 0.0) || !std::isfinite(p0_max)) throw DomainError("bounds requires p0_max >= 0");
  GBounds b;
  b.p0_max = p0_max;
  switch (impl_->kind) {
    case Kind::Identity:
      b.m_gprime = b.M_gprime = 1.0;
      break;
    case Kind::Relativistic:
    case Kind::Tanh:
      // Both profiles are concave: g' is largest at 0 and smallest at p0_max.
      b.M_gprime = gprime(0.0);
      b.m_gprime = gprime(p0_max);
      break;
    case Kind::Custom: {
      constexpr int kPoints = 1001;
      const auto& gp = impl_->gp;
      int arg_lo = 0;
      int arg_hi = 0;
      double lo = gp(0.0);
      double hi = lo;
      for (int k = 1; k < kPoints; ++k) {
        const double d = gp(p0_max * k / (kPoints - 1));
        if (d < lo) lo = d, arg_lo = k;
        if (d > hi) hi = d, arg_hi = k;
      }
      const auto bracket = [&](int k) {
        return std::make_pair(p0_max * std::max(k - 1, 0) / (kPoints - 1),
                              p0_max * std::min(k + 1, kPoints - 1) / (kPoints - 1));
      };
      if (p0_max > 0.0) {
        const auto [a0, a1] = bracket(arg_lo);
        const auto rlo = boost::math::tools::brent_find_minima(gp, a0, a1, 40);
        lo = std::min(lo, rlo.second);
        const auto [b0, b1] = bracket(arg_hi);
        const auto neg = [&](double v) { return -gp(v); };
        const auto rhi = boost::math::tools::brent_find_minima(neg, b0, b1, 40);
        hi = std::max(hi, -rhi.second);
      }
      b.m_gprime = lo;
      b.M_gprime = hi;
      break;
    }
  }
  if (!(b.m_gprime > 0.0)) {
    throw DomainError("g' vanishes on [0, p0_max]; monotonicity constant undefined");
  }
  b.M_script = std::min(b.m_gprime, b.m_gprime * b.m_gprime / b.M_gprime);
  return b;
}

bool VelocityControl::is_identity() const { return impl_->kind == Kind::Identity; }

std::string VelocityControl::spec() const {
  switch (impl_->kind) {
    case Kind::Identity:
      return "identity";
    case Kind::Relativistic:
      return "relativistic:c=" + detail::format_number(impl_->param);
    case Kind::Tanh:
      return "tanh:eps=" + detail::format_number(impl_->param);
    case Kind::Custom:
      return impl_->shape == Curvature::Convex ? "custom:convex" : "custom:concave";
  }
  return {};
}

}  // namespace vcflock
