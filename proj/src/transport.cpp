#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

#include "ringbalance/transport.hpp"

namespace ringbalance {
namespace {

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::byte>(bits & 0xFFu));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename U>
U get_le(std::span<const std::byte> in) {
  U value = 0;
  for (std::size_t i = sizeof(U); i-- > 0;) {
    value = static_cast<U>((value << 8) | std::to_integer<U>(in[i]));
  }
  return value;
}

}  // namespace

std::vector<std::byte> encode_frame(const Frame& frame) {
  std::vector<std::byte> out;
  out.reserve(kFrameHeaderSize + frame.payload.size());
  for (char c : kFrameMagic) out.push_back(static_cast<std::byte>(c));
  out.push_back(static_cast<std::byte>(frame.type));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(frame.sender));
  put_le<std::uint64_t>(out, frame.payload.size());
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

FrameHeader decode_frame_header(std::span<const std::byte> header) {
  if (header.size() < kFrameHeaderSize) throw FrameCorrupt("frame header truncated");
  if (std::memcmp(header.data(), kFrameMagic, 4) != 0) throw FrameCorrupt("frame magic mismatch");
  const auto type = std::to_integer<std::uint8_t>(header[4]);
  if (type > static_cast<std::uint8_t>(MsgType::kControl)) {
    throw FrameCorrupt("unknown msg_type " + std::to_string(type));
  }
  FrameHeader h;
  h.type = static_cast<MsgType>(type);
  h.sender = static_cast<std::int32_t>(get_le<std::uint32_t>(header.subspan(5, 4)));
  h.length = get_le<std::uint64_t>(header.subspan(9, 8));
  return h;
}

Frame decode_frame(std::span<const std::byte> bytes) {
  const FrameHeader h = decode_frame_header(bytes);
  if (bytes.size() - kFrameHeaderSize != h.length) {
    throw FrameCorrupt("frame payload length " + std::to_string(bytes.size() - kFrameHeaderSize) +
                       " does not match declared " + std::to_string(h.length));
  }
  Frame f;
  f.type = h.type;
  f.sender = h.sender;
  f.payload.assign(bytes.begin() + kFrameHeaderSize, bytes.end());
  return f;
}

std::vector<std::byte> encode_reals(std::span<const double> values) {
  std::vector<std::byte> out;
  out.reserve(values.size() * 8);
  for (double v : values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

std::vector<double> decode_reals(std::span<const std::byte> bytes) {
  if (bytes.size() % 8 != 0) throw FrameCorrupt("real payload length is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes.subspan(i * 8, 8)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// In-memory transport
// ---------------------------------------------------------------------------

InMemoryHub::InMemoryHub(int n)
    : n_(n), queues_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n)), closed_(static_cast<std::size_t>(n)) {
  if (n < 1) throw std::invalid_argument("InMemoryHub: n must be >= 1");
  endpoints_.reserve(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) endpoints_.push_back(std::make_unique<InMemoryTransport>(this, r));
}

void InMemoryHub::check_rank(int r) const {
  if (r < 0 || r >= n_) throw std::out_of_range("rank " + std::to_string(r) + " outside ring of " + std::to_string(n_));
}

InMemoryTransport& InMemoryHub::endpoint(int rank) {
  check_rank(rank);
  return *endpoints_[static_cast<std::size_t>(rank)];
}

void InMemoryHub::close(int rank) {
  check_rank(rank);
  {
    std::lock_guard lock(mu_);
    closed_[static_cast<std::size_t>(rank)] = true;
  }
  cv_.notify_all();
}

int InMemoryTransport::size() const { return hub_->size(); }

void InMemoryTransport::send(int to, Frame frame) {
  hub_->check_rank(to);
  frame.sender = rank_;
  const auto bytes = frame.payload.size();
  const auto type = frame.type;
  {
    std::lock_guard lock(hub_->mu_);
    if (hub_->closed_[static_cast<std::size_t>(to)]) {
      throw TransportClosed("send: rank " + std::to_string(to) + " is closed");
    }
    hub_->queue(rank_, to).frames.push_back(std::move(frame));
  }
  hub_->cv_.notify_all();
  ++counters_.frames_sent;
  counters_.bytes_sent += bytes;
  if (type == MsgType::kChunk) ++counters_.chunks_sent;
  if (type == MsgType::kScalar) ++counters_.scalars_sent;
}

Frame InMemoryTransport::recv(int from) {
  hub_->check_rank(from);
  std::unique_lock lock(hub_->mu_);
  auto& q = hub_->queue(from, rank_);
  hub_->cv_.wait(lock, [&] { return !q.frames.empty() || hub_->closed_[static_cast<std::size_t>(from)]; });
  if (q.frames.empty()) throw TransportClosed("recv: rank " + std::to_string(from) + " closed");
  Frame f = std::move(q.frames.front());
  q.frames.pop_front();
  ++counters_.frames_received;
  return f;
}

bool InMemoryTransport::try_recv(int from, Frame& out) {
  hub_->check_rank(from);
  std::lock_guard lock(hub_->mu_);
  auto& q = hub_->queue(from, rank_);
  if (q.frames.empty()) {
    if (hub_->closed_[static_cast<std::size_t>(from)]) {
      throw TransportClosed("recv: rank " + std::to_string(from) + " closed");
    }
    return false;
  }
  out = std::move(q.frames.front());
  q.frames.pop_front();
  ++counters_.frames_received;
  return true;
}

PeerAddress parse_peer(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("peer address '" + text + "' is not host:port");
  }
  PeerAddress addr;
  addr.host = text.substr(0, colon);
  const int port = std::stoi(text.substr(colon + 1));
  if (port < 0 || port > 65535) throw ConfigError("peer port out of range in '" + text + "'");
  addr.port = static_cast<std::uint16_t>(port);
  return addr;
}

}  // namespace ringbalance
