#include "ringbalance/collective.hpp"

#include <algorithm>
#include <string>

#include "ringbalance/kernels.hpp"

namespace ringbalance {
namespace {

int wrap(int x, int n) { return ((x % n) + n) % n; }

}  // namespace

RingPosition::RingPosition(int rank_, int n_) : rank(rank_), n(n_) {
  if (n < 2) throw std::invalid_argument("RingPosition: ring needs n >= 2");
  if (rank < 0 || rank >= n) throw std::out_of_range("RingPosition: rank outside [0, n)");
}

std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t length, int n, int c) {
  const auto nn = static_cast<std::size_t>(n);
  const auto cc = static_cast<std::size_t>(c);
  return {cc * length / nn, (cc + 1) * length / nn};
}

RingAllreduce::RingAllreduce(GradientBuffer& buffer, RingPosition pos, Transport& transport)
    : buffer_(buffer),
      pos_(pos),
      transport_(transport),
      chunk_counts_(static_cast<std::size_t>(pos.n), static_cast<double>(buffer.sample_count)) {}

int RingAllreduce::send_chunk(int step) const {
  const int n = pos_.n;
  return step < n - 1 ? wrap(pos_.rank - step, n) : wrap(pos_.rank + 1 - (step - (n - 1)), n);
}

int RingAllreduce::recv_chunk(int step) const {
  const int n = pos_.n;
  return step < n - 1 ? wrap(pos_.rank - step - 1, n) : wrap(pos_.rank - (step - (n - 1)), n);
}

void RingAllreduce::send_step(int step) {
  const int c = send_chunk(step);
  const auto [begin, end] = chunk_bounds(buffer_.size(), pos_.n, c);
  std::vector<double> wire;
  wire.reserve(end - begin + 1);
  wire.push_back(chunk_counts_[static_cast<std::size_t>(c)]);
  wire.insert(wire.end(), buffer_.values.begin() + static_cast<std::ptrdiff_t>(begin),
              buffer_.values.begin() + static_cast<std::ptrdiff_t>(end));
  Frame f;
  f.type = MsgType::kChunk;
  f.payload = encode_reals(wire);
  transport_.send(pos_.next(), std::move(f));
}

void RingAllreduce::recv_step(int step) {
  const int c = recv_chunk(step);
  const auto [begin, end] = chunk_bounds(buffer_.size(), pos_.n, c);
  Frame f = transport_.recv(pos_.prev());
  if (f.type != MsgType::kChunk) throw FrameCorrupt("allreduce: expected CHUNK frame");
  const std::vector<double> wire = decode_reals(f.payload);
  if (wire.empty() || wire.size() - 1 != end - begin) {
    throw LengthMismatch("allreduce: chunk " + std::to_string(c) + " arrived with " +
                         std::to_string(wire.empty() ? 0 : wire.size() - 1) + " values, expected " +
                         std::to_string(end - begin));
  }
  const std::span<const double> incoming(wire.data() + 1, wire.size() - 1);
  const std::span<double> local(buffer_.values.data() + begin, end - begin);
  auto& count = chunk_counts_[static_cast<std::size_t>(c)];
  if (step < pos_.n - 1) {
    kernels::add(local, incoming);
    count += wire[0];
  } else {
    std::copy(incoming.begin(), incoming.end(), local.begin());
    count = wire[0];
  }
  if (step == pos_.n - 2) {
    buffer_.sample_count = static_cast<std::int64_t>(chunk_counts_[static_cast<std::size_t>(wrap(pos_.rank + 1, pos_.n))]);
  }
}

GradientBuffer ring_allreduce(GradientBuffer local, RingPosition pos, Transport& transport) {
  RingAllreduce op(local, pos, transport);
  for (int s = 0; s < op.steps(); ++s) {
    op.send_step(s);
    op.recv_step(s);
  }
  return local;
}

void ring_allreduce_lockstep(std::span<GradientBuffer> buffers, InMemoryHub& hub) {
  const int n = hub.size();
  if (static_cast<int>(buffers.size()) != n) throw LengthMismatch("lockstep allreduce: one buffer per rank required");
  std::vector<RingAllreduce> ops;
  ops.reserve(buffers.size());
  for (int r = 0; r < n; ++r) ops.emplace_back(buffers[static_cast<std::size_t>(r)], RingPosition(r, n), hub.endpoint(r));
  for (int s = 0; s < 2 * (n - 1); ++s) {
    for (auto& op : ops) op.send_step(s);
    for (auto& op : ops) op.recv_step(s);
  }
}

RingAllgather::RingAllgather(double local, RingPosition pos, Transport& transport)
    : pos_(pos), transport_(transport), values_(static_cast<std::size_t>(pos.n), 0.0) {
  values_[static_cast<std::size_t>(pos.rank)] = local;
}

void RingAllgather::send_step(int step) {
  const int origin = wrap(pos_.rank - step, pos_.n);
  const double v = values_[static_cast<std::size_t>(origin)];
  Frame f;
  f.type = MsgType::kScalar;
  f.payload = encode_reals(std::span<const double>(&v, 1));
  transport_.send(pos_.next(), std::move(f));
}

void RingAllgather::recv_step(int step) {
  const int origin = wrap(pos_.rank - step - 1, pos_.n);
  Frame f = transport_.recv(pos_.prev());
  if (f.type != MsgType::kScalar) throw FrameCorrupt("allgather: expected SCALAR frame");
  const auto v = decode_reals(f.payload);
  if (v.size() != 1) throw LengthMismatch("allgather: SCALAR frame must carry one value");
  values_[static_cast<std::size_t>(origin)] = v[0];
}

std::vector<double> allgather_scalar(double local, RingPosition pos, Transport& transport) {
  RingAllgather op(local, pos, transport);
  for (int s = 0; s < op.steps(); ++s) {
    op.send_step(s);
    op.recv_step(s);
  }
  return op.values();
}

std::vector<std::vector<double>> allgather_scalar_lockstep(std::span<const double> locals, InMemoryHub& hub) {
  const int n = hub.size();
  if (static_cast<int>(locals.size()) != n) throw LengthMismatch("lockstep allgather: one value per rank required");
  std::vector<RingAllgather> ops;
  ops.reserve(locals.size());
  for (int r = 0; r < n; ++r) ops.emplace_back(locals[static_cast<std::size_t>(r)], RingPosition(r, n), hub.endpoint(r));
  for (int s = 0; s < n - 1; ++s) {
    for (auto& op : ops) op.send_step(s);
    for (auto& op : ops) op.recv_step(s);
  }
  std::vector<std::vector<double>> out;
  out.reserve(ops.size());
  for (auto& op : ops) out.push_back(op.values());
  return out;
}

}  // namespace ringbalance
