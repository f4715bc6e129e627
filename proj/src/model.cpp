#include "vcflock/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vcflock/error.hpp"

namespace vcflock {

void Params::validate() const {
  if (n_agents < 1) throw DomainError("n_agents must be >= 1");
  if (dim < 1) throw DomainError("dim must be >= 1");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be > 0");
}

void State::validate(const Params& params) const {
  const size_t expected = static_cast<size_t>(params.n_agents) * params.dim;
  if (n != params.n_agents || dim != params.dim || q.size() != expected || p.size() != expected) {
    throw DomainError("state shape does not match parameters");
  }
  for (size_t k = 0; k < expected; ++k) {
    if (!std::isfinite(q[k]) || !std::isfinite(p[k])) throw DomainError("state has non-finite entries");
  }
  if (!std::isfinite(t)) throw DomainError("state time is not finite");
}

RhsEvaluator::RhsEvaluator(const Kernel& kernel, const VelocityControl& g, const Params& params)
    : kernel_(kernel), g_(g), params_(params) {
  params_.validate();
  const size_t n = static_cast<size_t>(params_.n_agents);
  terms_.resize(n * params_.dim * (n > 1 ? n - 1 : 1));
  filled_.resize(n);
}

void RhsEvaluator::operator()(const double* q, const double* p, double* dq, double* dp) {
  const int n = params_.n_agents;
  const int d = params_.dim;
  for (int i = 0; i < n; ++i) g_.apply(p + i * d, dq + i * d, d);
  std::fill(dp, dp + n * d, 0.0);
  if (n == 1) return;

  // terms_[(i*d + c)*(n-1) + slot]; slot counts interaction partners of i.
  const int stride = n - 1;
  std::fill(filled_.begin(), filled_.end(), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = q[j * d + c] - q[i * d + c];
        r2 += diff * diff;
      }
      const double w = kernel_.psi(std::sqrt(r2));
      const int si = filled_[i]++;
      const int sj = filled_[j]++;
      for (int c = 0; c < d; ++c) {
        const double term = w * (dq[j * d + c] - dq[i * d + c]);
        terms_[(i * d + c) * stride + si] = term;
        terms_[(j * d + c) * stride + sj] = -term;
      }
    }
  }
  const auto by_magnitude = [](double a, double b) {
    const double fa = std::abs(a);
    const double fb = std::abs(b);
    return fa < fb || (fa == fb && a < b);
  };
  const double scale = params_.kappa / n;
  for (int k = 0; k < n * d; ++k) {
    double* first = terms_.data() + static_cast<size_t>(k) * stride;
    std::sort(first, first + stride, by_magnitude);
    double sum = 0.0;
    for (int s = 0; s < stride; ++s) sum += first[s];
    dp[k] = scale * sum;
    if (!std::isfinite(dp[k]) || !std::isfinite(dq[k])) {
      throw NonFiniteState("right-hand side produced a non-finite value");
    }
  }
}

Derivative rhs(const State& state, const Kernel& kernel, const VelocityControl& g, const Params& params) {
  state.validate(params);
  RhsEvaluator eval(kernel, g, params);
  Derivative out{std::vector<double>(state.q.size()), std::vector<double>(state.p.size())};
  eval(state.q.data(), state.p.data(), out.dq.data(), out.dp.data());
  return out;
}

std::vector<double> momentum_sum(const State& state) {
  std::vector<double> sum(state.dim, 0.0);
  for (int i = 0; i < state.n; ++i) {
    for (int c = 0; c < state.dim; ++c) sum[c] += state.p[static_cast<size_t>(i) * state.dim + c];
  }
  return sum;
}

double max_speed(const State& state) {
  double best = 0.0;
  for (int i = 0; i < state.n; ++i) {
    double r2 = 0.0;
    for (double x : state.pi(i)) r2 += x * x;
    best = std::max(best, std::sqrt(r2));
  }
  return best;
}

ClosestPair closest_pair(const State& state) {
  ClosestPair best{-1, -1, std::numeric_limits<double>::infinity()};
  for (int i = 0; i < state.n; ++i) {
    for (int j = i + 1; j < state.n; ++j) {
      double r2 = 0.0;
      for (int c = 0; c < state.dim; ++c) {
        const double diff = state.q[static_cast<size_t>(j) * state.dim + c] -
                            state.q[static_cast<size_t>(i) * state.dim + c];
        r2 += diff * diff;
      }
      const double r = std::sqrt(r2);
      if (r < best.gap) best = {i, j, r};
    }
  }
  return best;
}

double min_pair_gap(const State& state) { return closest_pair(state).gap; }

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::GapMinimum:
      return "GapMinimum";
    case EventKind::GapBelowThreshold:
      return "GapBelowThreshold";
    case EventKind::StepFloorHit:
      return "StepFloorHit";
    case EventKind::Collision:
      return "Collision";
    case EventKind::StickStart:
      return "StickStart";
  }
  return "Unknown";
}

namespace {

// Cubic Hermite on [0, h] at s in [0, 1].
double hermite(double y0, double y1, double f0, double f1, double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * y1 +
         (s3 - s2) * h * f1;
}

}  // namespace

State Trajectory::at(double t) const {
  if (snapshots.empty()) throw InsufficientData("empty trajectory");
  if (t <= snapshots.front().t) return snapshots.front();
  if (t >= snapshots.back().t) return snapshots.back();
  const auto it = std::upper_bound(snapshots.begin(), snapshots.end(), t,
                                   [](double v, const State& s) { return v < s.t; });
  const size_t k1 = static_cast<size_t>(it - snapshots.begin());
  const size_t k0 = k1 - 1;
  const State& a = snapshots[k0];
  const State& b = snapshots[k1];
  const double h = b.t - a.t;
  const double s = (t - a.t) / h;
  State out(a.n, a.dim, t);
  const bool have_v = velocity.size() == snapshots.size();
  const bool have_f = force.size() == snapshots.size();
  for (size_t k = 0; k < out.q.size(); ++k) {
    if (have_v) {
      out.q[k] = hermite(a.q[k], b.q[k], velocity[k0][k], velocity[k1][k], h, s);
    } else {
      out.q[k] = a.q[k] + s * (b.q[k] - a.q[k]);
    }
    if (have_f) {
      out.p[k] = hermite(a.p[k], b.p[k], force[k0][k], force[k1][k], h, s);
    } else {
      out.p[k] = a.p[k] + s * (b.p[k] - a.p[k]);
    }
  }
  return out;
}

}  // namespace vcflock
