#include "ringbalance/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace ringbalance {

double Increment::sum() const { return std::accumulate(u.begin(), u.end(), 0.0); }

RateVector rates(std::span<const std::int64_t> weights, std::span<const Duration> t_s) {
  if (weights.size() != t_s.size()) throw LengthMismatch("rates: weights and t_s differ in length");
  RateVector out;
  out.v.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (t_s[i].count() == 0) {
      throw ZeroTiming("rates: worker " + std::to_string(i) + " has no measured compute time");
    }
    if (t_s[i].count() < 0 || weights[i] < 1) {
      throw std::invalid_argument("rates: weights must be >= 1 and t_s positive");
    }
    out.v.push_back(static_cast<double>(weights[i]) / to_seconds(t_s[i]));
  }
  return out;
}

Increment increments_closed_form(std::span<const std::int64_t> weights, const RateVector& v) {
  const double total_rate = std::accumulate(v.v.begin(), v.v.end(), 0.0);
  const double total_weight = static_cast<double>(std::accumulate(weights.begin(), weights.end(), std::int64_t{0}));
  Increment inc;
  inc.u.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    inc.u.push_back(v.v[i] / total_rate * total_weight - static_cast<double>(weights[i]));
  }
  return inc;
}

LinearSystem increment_system(std::span<const std::int64_t> weights, const RateVector& v) {
  const std::size_t n = weights.size();
  if (n < 2) throw std::invalid_argument("increment_system: need n >= 2");
  if (v.v.size() != n) throw LengthMismatch("increment_system: rates and weights differ in length");
  LinearSystem sys;
  sys.n = n;
  sys.a.assign(n * n, 0.0);
  sys.b.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    sys.at(i, i) = 1.0 / v.v[i];
    sys.at(i, i + 1) = -1.0 / v.v[i + 1];
    sys.b[i] = static_cast<double>(weights[i + 1]) / v.v[i + 1] - static_cast<double>(weights[i]) / v.v[i];
  }
  for (std::size_t j = 0; j < n; ++j) sys.at(n - 1, j) = 1.0;
  return sys;
}

std::vector<double> solve(LinearSystem sys) {
  const std::size_t n = sys.n;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(sys.at(r, col)) > std::abs(sys.at(pivot, col))) pivot = r;
    }
    const double p = sys.at(pivot, col);
    if (!(std::abs(p) > 0.0) || !std::isfinite(p)) {
      throw SingularMatrix("solve: zero pivot in column " + std::to_string(col));
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(sys.at(pivot, c), sys.at(col, c));
      std::swap(sys.b[pivot], sys.b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = sys.at(r, col) / p;
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) sys.at(r, c) -= factor * sys.at(col, c);
      sys.b[r] -= factor * sys.b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double acc = sys.b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= sys.at(i, c) * x[c];
    x[i] = acc / sys.at(i, i);
  }
  return x;
}

Increment increments_linear_system(std::span<const std::int64_t> weights, const RateVector& v) {
  for (double r : v.v) {
    if (!(r > 0.0)) throw SingularMatrix("increments_linear_system: non-positive rate");
  }
  return Increment{solve(increment_system(weights, v))};
}

namespace {

// Plain Hamilton apportionment of `quotas` (summing to `seats`) over the
// listed indices.
void hamilton(std::span<const double> quotas, std::span<const std::size_t> idx, std::int64_t seats, Weights& out) {
  std::int64_t assigned = 0;
  std::vector<std::pair<double, std::size_t>> remainders;
  remainders.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double q = quotas[k];
    const auto base = static_cast<std::int64_t>(std::floor(q));
    out[idx[k]] = base;
    assigned += base;
    remainders.emplace_back(q - static_cast<double>(base), idx[k]);
  }
  // Largest remainder first; equal remainders go to the lower rank.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::int64_t left = seats - assigned;
  for (std::size_t k = 0; left > 0; k = (k + 1) % remainders.size(), --left) {
    ++out[remainders[k].second];
  }
  for (std::size_t k = remainders.size(); left < 0; --left) {
    // Only reachable through rounding of quotas that sum to slightly more
    // than `seats`; take back from the smallest remainders.
    k = (k == 0 ? remainders.size() : k) - 1;
    --out[remainders[k].second];
  }
}

}  // namespace

Weights apportion(std::span<const double> real_weights, std::int64_t total, std::int64_t floor) {
  const std::size_t n = real_weights.size();
  if (n == 0) throw std::invalid_argument("apportion: empty weight vector");
  if (floor < 1) throw std::invalid_argument("apportion: floor must be >= 1");
  if (total < static_cast<std::int64_t>(n) * floor) {
    throw InfeasibleFloor("apportion: C=" + std::to_string(total) + " cannot give " + std::to_string(n) +
                          " workers at least " + std::to_string(floor));
  }
  double sum = 0.0;
  for (double x : real_weights) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("apportion: weights must be finite and >= 0");
    sum += x;
  }
  if (std::abs(sum - static_cast<double>(total)) > 1e-6) {
    throw std::invalid_argument("apportion: weights sum to " + std::to_string(sum) + ", expected " +
                                std::to_string(total));
  }

  Weights out(n, floor);
  std::vector<bool> pinned(n, false);
  for (;;) {
    std::vector<std::size_t> free_idx;
    double free_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!pinned[i]) {
        free_idx.push_back(i);
        free_mass += real_weights[i];
      }
    }
    const std::int64_t seats = total - static_cast<std::int64_t>(n - free_idx.size()) * floor;
    if (free_idx.empty()) break;

    std::vector<double> quotas;
    quotas.reserve(free_idx.size());
    bool pinned_more = false;
    for (std::size_t i : free_idx) {
      const double q = free_mass > 0.0 ? static_cast<double>(seats) * real_weights[i] / free_mass
                                       : static_cast<double>(seats) / static_cast<double>(free_idx.size());
      if (q < static_cast<double>(floor)) {
        pinned[i] = true;
        pinned_more = true;
      }
      quotas.push_back(q);
    }
    if (pinned_more) continue;
    hamilton(quotas, free_idx, seats, out);
    break;
  }
  return out;
}

Weights equal_weights(std::size_t n, std::int64_t total) {
  std::vector<double> share(n, static_cast<double>(total) / static_cast<double>(n));
  return apportion(share, total, 1);
}

Rebalance rebalance(const AllocationState& state, std::span<const Duration> t_s, std::int64_t floor) {
  Rebalance r;
  r.v = rates(state.weights, t_s);
  r.u = increments_closed_form(state.weights, r.v);
  r.target.resize(state.weights.size());
  for (std::size_t i = 0; i < state.weights.size(); ++i) {
    r.target[i] = static_cast<double>(state.weights[i]) + r.u.u[i];
  }
  // Re-derive the target straight from the update rule so rounding of w + u
  // cannot push the sum off C.
  const double rate_sum = std::accumulate(r.v.v.begin(), r.v.v.end(), 0.0);
  std::vector<double> shares(r.v.v.size());
  for (std::size_t i = 0; i < shares.size(); ++i) {
    shares[i] = r.v.v[i] / rate_sum * static_cast<double>(state.total);
  }

  r.next = state;
  r.next.weights = apportion(shares, state.total, floor);
  r.next.history.push_back(r.next.weights);
  r.next.epoch = state.epoch + 1;
  return r;
}

AllocationState update_allocation(const AllocationState& state, std::span<const Duration> t_s, std::int64_t floor) {
  return rebalance(state, t_s, floor).next;
}

bool is_stable(std::span<const Weights> history, int window, std::int64_t tol) {
  if (window < 2) throw std::invalid_argument("is_stable: window must be >= 2");
  if (history.size() < static_cast<std::size_t>(window)) return false;
  const auto recent = history.subspan(history.size() - static_cast<std::size_t>(window));
  for (std::size_t a = 0; a < recent.size(); ++a) {
    for (std::size_t b = a + 1; b < recent.size(); ++b) {
      if (recent[a].size() != recent[b].size()) return false;
      for (std::size_t i = 0; i < recent[a].size(); ++i) {
        if (std::abs(recent[a][i] - recent[b][i]) > tol) return false;
      }
    }
  }
  return true;
}

double relative_residual(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw LengthMismatch("relative_residual: length differs");
  double scale = 1.0;
  for (double x : b) scale = std::max(scale, std::abs(x));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst / scale;
}

EquivalenceResult verify_increment_solvers(int n_lo, int n_hi, int trials, std::uint64_t seed) {
  if (n_lo < 2 || n_hi < n_lo) throw std::invalid_argument("verify_increment_solvers: need 2 <= n_lo <= n_hi");
  if (trials < 1) throw std::invalid_argument("verify_increment_solvers: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> weight(1, 64);
  std::uniform_real_distribution<double> log_rate(-2.0, 2.0);
  EquivalenceResult out;
  for (int n = n_lo; n <= n_hi; ++n) {
    for (int t = 0; t < trials; ++t) {
      Weights w(static_cast<std::size_t>(n));
      RateVector v;
      for (auto& x : w) x = weight(rng);
      for (int i = 0; i < n; ++i) v.v.push_back(std::pow(10.0, log_rate(rng)));
      const Increment closed = increments_closed_form(w, v);
      const Increment linear = increments_linear_system(w, v);
      out.max_residual = std::max(out.max_residual, relative_residual(linear.u, closed.u));
      ++out.instances;
    }
  }
  return out;
}

}  // namespace ringbalance
