#pragma once

// Ring allreduce over a Transport.
//
// The buffer is cut into n chunks; chunk c covers [floor(c*L/n),
// floor((c+1)*L/n)). Reduce-scatter runs n-1 steps in which rank r sends
// chunk (r - s) mod n to its successor and adds the chunk (r - s - 1) mod n it
// receives from its predecessor. Afterwards rank r holds the full sum of
// chunk (r + 1) mod n, and n-1 allgather steps circulate the finished chunks.
// Each rank sends exactly 2(n-1) CHUNK frames.
//
// CHUNK payloads are little-endian f64: the running sample count followed by
// the chunk values, so sample_count is reduced alongside the gradient.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ringbalance/core.hpp"
#include "ringbalance/transport.hpp"

namespace ringbalance {

struct RingPosition {
  int rank = 0;
  int n = 2;

  RingPosition(int rank, int n);
  int prev() const { return (rank + n - 1) % n; }
  int next() const { return (rank + 1) % n; }
};

// [begin, end) of chunk c for a buffer of `length` values split n ways.
std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t length, int n, int c);

// One participant's allreduce as an explicit step sequence, so the same code
// runs blocking (one thread per rank) or lockstep (all ranks in one thread).
class RingAllreduce {
 public:
  RingAllreduce(GradientBuffer& buffer, RingPosition pos, Transport& transport);

  int steps() const { return 2 * (pos_.n - 1); }
  void send_step(int step);
  void recv_step(int step);

 private:
  int send_chunk(int step) const;
  int recv_chunk(int step) const;

  GradientBuffer& buffer_;
  RingPosition pos_;
  Transport& transport_;
  // Partial sample count carried with each chunk during reduce-scatter.
  std::vector<double> chunk_counts_;
};

// Blocking collective: every participant calls this from its own execution
// unit. Returns the element-wise sum of all inputs.
GradientBuffer ring_allreduce(GradientBuffer local, RingPosition pos, Transport& transport);

// Runs the allreduce for every rank of the hub from the calling thread,
// interleaving steps deterministically. buffers[r] belongs to rank r and is
// replaced by the sum.
void ring_allreduce_lockstep(std::span<GradientBuffer> buffers, InMemoryHub& hub);

class RingAllgather {
 public:
  RingAllgather(double local, RingPosition pos, Transport& transport);

  int steps() const { return pos_.n - 1; }
  void send_step(int step);
  void recv_step(int step);
  const std::vector<double>& values() const { return values_; }

 private:
  RingPosition pos_;
  Transport& transport_;
  std::vector<double> values_;
};

// Every rank ends with [x_0, ..., x_{n-1}].
std::vector<double> allgather_scalar(double local, RingPosition pos, Transport& transport);

std::vector<std::vector<double>> allgather_scalar_lockstep(std::span<const double> locals, InMemoryHub& hub);

}  // namespace ringbalance
