#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "banditrex/errors.hpp"
#include "banditrex/features.hpp"
#include "banditrex/rng.hpp"

namespace banditrex {

/// Diagonal Gaussian posterior over the logistic coefficient vector:
/// independent per-coordinate means m_j and variances v_j > 0.
struct GaussianPosterior {
  std::vector<double> mean;
  std::vector<double> variance;

  static GaussianPosterior standard(int d, double prior_variance = 1.0) {
    GaussianPosterior p;
    p.mean.assign(d, 0.0);
    p.variance.assign(d, prior_variance);
    return p;
  }

  int dim() const { return static_cast<int>(mean.size()); }

  void validate() const {
    if (mean.size() != variance.size())
      throw LengthMismatch("GaussianPosterior: mean/variance length mismatch");
    for (double v : variance) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw InvalidArgument("GaussianPosterior: variances must be positive and finite");
    }
    for (double m : mean) {
      if (!std::isfinite(m))
        throw InvalidArgument("GaussianPosterior: means must be finite");
    }
  }

  friend bool operator==(const GaussianPosterior&, const GaussianPosterior&) = default;
};

/// One observed (context, binary reward) pair.
struct Observation {
  ContextVector context;
  int reward = 0;  // {0,1}
};

using FeedbackBatch = std::vector<Observation>;

/// Sign-split sigmoid, stable for |x| up to ~700.
inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

/// log(1 + exp(u)) without overflow.
inline double softplus(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// In-place Cholesky solve of the SPD system A x = b. A is row-major d*d
/// and gets overwritten. Returns false if a pivot is not positive.
inline bool cholesky_solve(std::vector<double>& A, std::vector<double>& b, int d) {
  for (int j = 0; j < d; ++j) {
    double pivot = A[j * d + j];
    for (int k = 0; k < j; ++k) pivot -= A[j * d + k] * A[j * d + k];
    if (!(pivot > 0.0)) return false;
    pivot = std::sqrt(pivot);
    A[j * d + j] = pivot;
    for (int i = j + 1; i < d; ++i) {
      double s = A[i * d + j];
      for (int k = 0; k < j; ++k) s -= A[i * d + k] * A[j * d + k];
      A[i * d + j] = s / pivot;
    }
  }
  for (int i = 0; i < d; ++i) {  // L y = b
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= A[i * d + k] * b[k];
    b[i] = s / A[i * d + i];
  }
  for (int i = d - 1; i >= 0; --i) {  // L^T x = y
    double s = b[i];
    for (int k = i + 1; k < d; ++k) s -= A[k * d + i] * b[k];
    b[i] = s / A[i * d + i];
  }
  return true;
}

}  // namespace detail

/// Predicted engagement probability (1 + exp(-theta^T v))^{-1}.
inline double expected_reward(std::span<const double> theta,
                              std::span<const double> context) {
  if (theta.size() != context.size())
    throw LengthMismatch("expected_reward: theta has length " +
                         std::to_string(theta.size()) + ", context " +
                         std::to_string(context.size()));
  return stable_sigmoid(detail::dot(theta, context));
}

/// One independent N(m_j, v_j) draw per coordinate, in coordinate order.
inline std::vector<double> sample_params(const GaussianPosterior& post, Rng& rng) {
  std::vector<double> theta(post.mean.size());
  for (std::size_t j = 0; j < theta.size(); ++j)
    theta[j] = post.mean[j] + std::sqrt(post.variance[j]) * rng.next_normal();
  return theta;
}

struct ObjectiveEval {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Penalized negative log posterior
///   1/2 sum_j v_j^{-1} (theta_j - m_j)^2 + sum_n log(1 + exp(-r_n theta^T v_n))
/// with observed rewards {0,1} mapped to r in {-1,+1}.
inline ObjectiveEval penalized_objective(std::span<const double> theta,
                                         const GaussianPosterior& prior,
                                         const FeedbackBatch& batch) {
  const std::size_t d = theta.size();
  if (prior.mean.size() != d)
    throw LengthMismatch("penalized_objective: prior dimension " +
                         std::to_string(prior.mean.size()) + " vs theta " +
                         std::to_string(d));
  ObjectiveEval out;
  out.gradient.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = theta[j] - prior.mean[j];
    out.value += 0.5 * diff * diff / prior.variance[j];
    out.gradient[j] = diff / prior.variance[j];
  }
  for (const Observation& obs : batch) {
    if (obs.context.size() != d)
      throw LengthMismatch("penalized_objective: context length " +
                           std::to_string(obs.context.size()) + " vs theta " +
                           std::to_string(d));
    const double r = obs.reward ? 1.0 : -1.0;
    const double z = detail::dot(theta, obs.context);
    out.value += detail::softplus(-r * z);
    const double coef = -r * stable_sigmoid(-r * z);
    for (std::size_t j = 0; j < d; ++j) out.gradient[j] += coef * obs.context[j];
  }
  return out;
}

struct UpdateOptions {
  double tolerance = 1e-6;  // on the gradient infinity norm
  int max_iterations = 100;
  double variance_floor = 1e-10;
  std::optional<std::vector<double>> warm_start;  // defaults to the prior mean
};

namespace detail {
inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}
}  // namespace detail

/// Laplace posterior update. The new mean minimizes penalized_objective
/// (damped Newton with Armijo backtracking; the objective is strictly
/// convex so the minimizer is unique); the new variances come from
///   v_j^{-1} <- v_j^{-1} + sum_n v_{n,j}^2 p_n (1 - p_n),
/// with p_n evaluated at the new mean. An empty batch returns the prior
/// unchanged.
inline GaussianPosterior update_posterior(const GaussianPosterior& prior,
                                          const FeedbackBatch& batch,
                                          const UpdateOptions& opts = {}) {
  prior.validate();
  if (batch.empty()) return prior;

  const int d = prior.dim();
  std::vector<double> theta = opts.warm_start.value_or(prior.mean);
  if (static_cast<int>(theta.size()) != d)
    throw LengthMismatch("update_posterior: warm start has wrong dimension");

  ObjectiveEval eval = penalized_objective(theta, prior, batch);
  bool converged = detail::inf_norm(eval.gradient) <= opts.tolerance;
  for (int iter = 0; iter < opts.max_iterations && !converged; ++iter) {
    // Full-batch Hessian: diag(1/v) + sum_n p_n(1-p_n) v_n v_n^T.
    std::vector<double> hess(static_cast<std::size_t>(d) * d, 0.0);
    for (int j = 0; j < d; ++j) hess[j * d + j] = 1.0 / prior.variance[j];
    for (const Observation& obs : batch) {
      const double p = stable_sigmoid(detail::dot(theta, obs.context));
      const double w = p * (1.0 - p);
      for (int i = 0; i < d; ++i) {
        const double wi = w * obs.context[i];
        if (wi == 0.0) continue;
        for (int j = 0; j <= i; ++j) hess[i * d + j] += wi * obs.context[j];
      }
    }
    for (int i = 0; i < d; ++i)  // mirror the lower triangle
      for (int j = i + 1; j < d; ++j) hess[i * d + j] = hess[j * d + i];

    std::vector<double> step(eval.gradient);
    for (double& s : step) s = -s;
    if (!detail::cholesky_solve(hess, step, d))
      throw SolverFailure("update_posterior: Hessian factorization failed");

    const double directional = detail::dot(eval.gradient, step);
    // absolute slack keeps the sufficient-decrease test meaningful once the
    // predicted improvement drops below the objective's rounding noise
    const double noise = 1e-12 * std::max(1.0, std::abs(eval.value));
    double t = 1.0;
    std::vector<double> candidate(d);
    ObjectiveEval cand_eval;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int j = 0; j < d; ++j) candidate[j] = theta[j] + t * step[j];
      cand_eval = penalized_objective(candidate, prior, batch);
      if (cand_eval.value <= eval.value + 1e-4 * t * directional + noise) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    theta.swap(candidate);
    eval = std::move(cand_eval);
    converged = detail::inf_norm(eval.gradient) <= opts.tolerance;
  }
  if (!converged)
    throw SolverFailure(
        "update_posterior: gradient norm " +
        std::to_string(detail::inf_norm(eval.gradient)) + " above tolerance " +
        std::to_string(opts.tolerance) + " after " +
        std::to_string(opts.max_iterations) + " iterations");

  GaussianPosterior post;
  post.mean = theta;
  post.variance.resize(d);
  std::vector<double> precision(d);
  for (int j = 0; j < d; ++j) precision[j] = 1.0 / prior.variance[j];
  for (const Observation& obs : batch) {
    const double p = stable_sigmoid(detail::dot(theta, obs.context));
    const double w = p * (1.0 - p);
    for (int j = 0; j < d; ++j)
      precision[j] += obs.context[j] * obs.context[j] * w;
  }
  for (int j = 0; j < d; ++j)
    post.variance[j] = std::max(1.0 / precision[j], opts.variance_floor);
  return post;
}

}  // namespace banditrex
