#pragma once

// Self-adaptive sample allocation.
//
// Given last epoch's per-worker sample counts w_i and gradient computing
// times t_s_i, every worker's speed is v_i = w_i / t_s_i. Idle time at the
// barrier disappears when w_i / v_i is the same for every worker, and the
// total C = sum(w_i) stays fixed, which gives
//
//   w_i' = C * v_i / sum_j v_j,        u_i = w_i' - w_i.
//
// The increments u are computed two ways: directly from the closed form, and
// by solving the n x n system that stacks the n-1 adjacent equal-time
// constraints on top of sum(u) = 0. The two must agree; tests and the CLI's
// verify-allocator command check that they do.

#include <cstdint>
#include <span>
#include <vector>

#include "ringbalance/core.hpp"

namespace ringbalance {

struct Increment {
  std::vector<double> u;
  double sum() const;
};

struct RateVector {
  std::vector<double> v;  // samples per second
};

// Dense row-major square system A u = b.
struct LinearSystem {
  std::size_t n = 0;
  std::vector<double> a;
  std::vector<double> b;

  double& at(std::size_t row, std::size_t col) { return a[row * n + col]; }
  double at(std::size_t row, std::size_t col) const { return a[row * n + col]; }
};

// v_i = w_i / seconds(t_s_i). Throws ZeroTiming if any t_s_i is zero, which
// means no full epoch has been measured yet.
RateVector rates(std::span<const std::int64_t> weights, std::span<const Duration> t_s);

Increment increments_closed_form(std::span<const std::int64_t> weights, const RateVector& v);

// Rows 0..n-2: u_i / v_i - u_{i+1} / v_{i+1} = w_{i+1}/v_{i+1} - w_i/v_i.
// Row n-1: sum(u) = 0.
LinearSystem increment_system(std::span<const std::int64_t> weights, const RateVector& v);

// Gaussian elimination with partial pivoting. Throws SingularMatrix when a
// pivot vanishes.
std::vector<double> solve(LinearSystem system);

Increment increments_linear_system(std::span<const std::int64_t> weights, const RateVector& v);

// Largest-remainder apportionment of real_weights (summing to C) onto
// integers summing exactly to C, each at least `floor`. Ties go to the
// lowest rank. Entries whose share would fall below the floor are pinned to
// it and the rest is re-apportioned over the remaining workers.
Weights apportion(std::span<const double> real_weights, std::int64_t total, std::int64_t floor);

// Equal split of C over n workers.
Weights equal_weights(std::size_t n, std::int64_t total);

// Everything one rebalance produced, for reporting and invariant checks.
struct Rebalance {
  AllocationState next;
  RateVector v;
  Increment u;                 // closed-form increments (real-valued)
  std::vector<double> target;  // w + u before apportionment
};

Rebalance rebalance(const AllocationState& state, std::span<const Duration> t_s, std::int64_t floor);

AllocationState update_allocation(const AllocationState& state, std::span<const Duration> t_s, std::int64_t floor);

// True iff the last `window` vectors pairwise differ by at most `tol` in
// every component.
bool is_stable(std::span<const Weights> history, int window, std::int64_t tol);

// Max over entries of |a - b| / max(max|b|, 1). Increments carry the same
// units as sample counts, which are at least one, so this stays meaningful
// when u is near zero.
double relative_residual(std::span<const double> a, std::span<const double> b);

struct EquivalenceResult {
  int instances = 0;
  double max_residual = 0.0;
};

// Draws `trials` random (w, v) instances for every n in [n_lo, n_hi] and
// compares both increment solvers. w_i uniform in [1, 64], v_i log-uniform
// over [0.01, 100].
EquivalenceResult verify_increment_solvers(int n_lo, int n_hi, int trials, std::uint64_t seed);

}  // namespace ringbalance
