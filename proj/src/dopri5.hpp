#pragma once

// Dormand-Prince 5(4) stepper with PI step-size control and FSAL reuse,
// shared by the second-order integrator and the line reduction.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "vcflock/error.hpp"

namespace vcflock::detail {

struct StepControl {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double dt_min = 1e-14;
  double dt_max = 1.0;
};

inline double hermite_value(double y0, double y1, double f0, double f1, double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * y1 +
         (s3 - s2) * h * f1;
}

inline double hermite_slope(double y0, double y1, double f0, double f1, double h, double s) {
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * y0 + (6 * s - 6 * s2) * y1) / h + (3 * s2 - 4 * s + 1) * f0 +
         (3 * s2 - 2 * s) * f1;
}

class Dopri5 {
 public:
  /// f(t, y, dydt). May throw NonFiniteState / SingularEvaluation on trial
  /// stages; those are treated as step rejections.
  using Rhs = std::function<void(double, const double*, double*)>;

  enum class Outcome { Accepted, FloorHit };

  Dopri5(Rhs f, size_t n, StepControl c) : f_(std::move(f)), n_(n), ctl_(c) {
    for (auto& k : k_) k.resize(n);
    y_.resize(n);
    y_prev_.resize(n);
    f_cur_.resize(n);
    f_prev_.resize(n);
    ytmp_.resize(n);
    ynew_.resize(n);
  }

  /// Restarts at (t0, y0); evaluates f there (errors propagate).
  void reset(double t0, const std::vector<double>& y0, double h0) {
    t_ = t_prev_ = t0;
    y_ = y0;
    y_prev_ = y0;
    f_(t_, y_.data(), f_cur_.data());
    f_prev_ = f_cur_;
    h_ = std::clamp(h0, ctl_.dt_min, ctl_.dt_max);
    facold_ = 1e-4;
    last_rejected_ = false;
  }

  /// Advances by one accepted step no longer than h_limit.
  Outcome step(double h_limit) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;

    auto& k1 = f_cur_;
    auto& k2 = k_[0];
    auto& k3 = k_[1];
    auto& k4 = k_[2];
    auto& k5 = k_[3];
    auto& k6 = k_[4];
    auto& k7 = k_[5];

    for (;;) {
      double h = std::min({h_, h_limit, ctl_.dt_max});
      if (h < ctl_.dt_min && h_limit >= ctl_.dt_min) return Outcome::FloorHit;
      const double t = t_;
      bool ok = true;
      try {
        for (size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + h * a21 * k1[i];
        f_(t + c2 * h, ytmp_.data(), k2.data());
        for (size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f_(t + c3 * h, ytmp_.data(), k3.data());
        for (size_t i = 0; i < n_; ++i) {
          ytmp_[i] = y_[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        }
        f_(t + c4 * h, ytmp_.data(), k4.data());
        for (size_t i = 0; i < n_; ++i) {
          ytmp_[i] = y_[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        }
        f_(t + c5 * h, ytmp_.data(), k5.data());
        for (size_t i = 0; i < n_; ++i) {
          ytmp_[i] =
              y_[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        }
        f_(t + h, ytmp_.data(), k6.data());
        for (size_t i = 0; i < n_; ++i) {
          ynew_[i] =
              y_[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        }
        f_(t + h, ynew_.data(), k7.data());
      } catch (const NonFiniteState&) {
        ok = false;
      } catch (const SingularEvaluation&) {
        ok = false;
      }

      double err = 0.0;
      if (ok) {
        for (size_t i = 0; i < n_; ++i) {
          const double e =
              h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
          const double sc = ctl_.abs_tol + ctl_.rel_tol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
          err = std::max(err, std::abs(e) / sc);
          if (!std::isfinite(ynew_[i])) ok = false;
        }
        if (!std::isfinite(err)) ok = false;
      }
      if (!ok) {
        h_ = 0.25 * h;
        last_rejected_ = true;
        continue;
      }

      const double fac11 = std::pow(err, expo1);
      if (err <= 1.0) {
        double fac = fac11 / std::pow(facold_, beta);
        fac = std::clamp(fac / safe, 0.1, 5.0);
        double hnew = h / fac;
        if (last_rejected_) hnew = std::min(hnew, h);
        facold_ = std::max(err, 1e-4);
        last_rejected_ = false;

        t_prev_ = t_;
        y_prev_.swap(y_);
        f_prev_ = f_cur_;
        y_.swap(ynew_);
        f_cur_.swap(k7);
        t_ = t + h;
        h_ = hnew;
        last_h_ = h;
        return Outcome::Accepted;
      }
      h_ = h / std::min(5.0, fac11 / safe);
      last_rejected_ = true;
    }
  }

  /// Hermite interpolant of component i on the last accepted step.
  double dense(size_t i, double t) const {
    const double h = t_ - t_prev_;
    if (h <= 0.0) return y_[i];
    return hermite_value(y_prev_[i], y_[i], f_prev_[i], f_cur_[i], h, (t - t_prev_) / h);
  }
  double dense_slope(size_t i, double t) const {
    const double h = t_ - t_prev_;
    if (h <= 0.0) return f_cur_[i];
    return hermite_slope(y_prev_[i], y_[i], f_prev_[i], f_cur_[i], h, (t - t_prev_) / h);
  }

  double t() const { return t_; }
  /// Snaps the current time to a target reached up to roundoff.
  void snap_time(double t) { t_ = t; }
  double t_prev() const { return t_prev_; }
  double h_next() const { return h_; }
  double last_h() const { return last_h_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<double>& y_prev() const { return y_prev_; }
  const std::vector<double>& f() const { return f_cur_; }
  const std::vector<double>& f_prev() const { return f_prev_; }

 private:
  Rhs f_;
  size_t n_;
  StepControl ctl_;
  std::vector<double> k_[6];
  std::vector<double> y_, y_prev_, f_cur_, f_prev_, ytmp_, ynew_;
  double t_ = 0.0;
  double t_prev_ = 0.0;
  double h_ = 1e-3;
  double last_h_ = 0.0;
  double facold_ = 1e-4;
  bool last_rejected_ = false;
};

}  // namespace vcflock::detail
