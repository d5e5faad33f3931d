#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "ringbalance/core.hpp"

namespace ringbalance {

enum class MsgType : std::uint8_t { kChunk = 0, kScalar = 1, kControl = 2 };

struct Frame {
  MsgType type = MsgType::kControl;
  std::int32_t sender = 0;
  std::vector<std::byte> payload;
};

// Wire format (all little-endian):
//   "RBA1" | u8 msg_type | u32 sender rank | u64 payload length | payload
inline constexpr std::size_t kFrameHeaderSize = 4 + 1 + 4 + 8;
inline constexpr char kFrameMagic[4] = {'R', 'B', 'A', '1'};

std::vector<std::byte> encode_frame(const Frame& frame);

struct FrameHeader {
  MsgType type;
  std::int32_t sender;
  std::uint64_t length;
};

// Throws FrameCorrupt on bad magic or an unknown msg_type.
FrameHeader decode_frame_header(std::span<const std::byte> header);

// Decodes one complete frame; the buffer length must match the header.
Frame decode_frame(std::span<const std::byte> bytes);

std::vector<std::byte> encode_reals(std::span<const double> values);
std::vector<double> decode_reals(std::span<const std::byte> bytes);

struct TransportCounters {
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t chunks_sent = 0;
  std::uint64_t scalars_sent = 0;
  std::uint64_t bytes_sent = 0;
};

// A rank's handle onto the ring. One execution unit at a time per handle.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual int rank() const = 0;
  virtual int size() const = 0;
  virtual void send(int to, Frame frame) = 0;
  virtual Frame recv(int from) = 0;
  virtual const TransportCounters& counters() const = 0;
};

class InMemoryHub;

class InMemoryTransport final : public Transport {
 public:
  InMemoryTransport(InMemoryHub* hub, int rank) : hub_(hub), rank_(rank) {}

  int rank() const override { return rank_; }
  int size() const override;
  void send(int to, Frame frame) override;
  Frame recv(int from) override;
  const TransportCounters& counters() const override { return counters_; }
  void reset_counters() { counters_ = {}; }

  // Non-blocking receive for single-threaded lockstep drivers; throws
  // TransportClosed if the queue is empty and the peer is closed, and
  // returns false if it is merely empty.
  bool try_recv(int from, Frame& out);

 private:
  InMemoryHub* hub_;
  int rank_;
  TransportCounters counters_;
};

// Wires n in-memory endpoints together with unbounded per-pair FIFO queues.
class InMemoryHub {
 public:
  explicit InMemoryHub(int n);
  InMemoryHub(const InMemoryHub&) = delete;
  InMemoryHub& operator=(const InMemoryHub&) = delete;

  int size() const { return n_; }
  InMemoryTransport& endpoint(int rank);

  // Marks a rank as gone; receivers waiting on it see TransportClosed once
  // its queued frames are drained.
  void close(int rank);

 private:
  friend class InMemoryTransport;

  struct Queue {
    std::deque<Frame> frames;
  };

  Queue& queue(int from, int to) { return queues_[static_cast<std::size_t>(from * n_ + to)]; }
  void check_rank(int r) const;

  int n_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Queue> queues_;
  std::vector<bool> closed_;
  std::vector<std::unique_ptr<InMemoryTransport>> endpoints_;
};

struct PeerAddress {
  std::string host;
  std::uint16_t port = 0;
};

// Parses "host:port".
PeerAddress parse_peer(const std::string& text);

// TCP ring transport. Each rank listens on its own address, connects out to
// its ring successor, and accepts one connection from its predecessor. Only
// send(next) and recv(prev) are supported.
class TcpTransport final : public Transport {
 public:
  // listen_fd, when >= 0, is an already-bound listening socket for this rank
  // and is adopted by the transport.
  TcpTransport(int rank, std::vector<PeerAddress> peers, int connect_timeout_ms = 10'000, int listen_fd = -1);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  int rank() const override { return rank_; }
  int size() const override { return static_cast<int>(peers_.size()); }
  void send(int to, Frame frame) override;
  Frame recv(int from) override;
  const TransportCounters& counters() const override { return counters_; }

 private:
  int next() const { return (rank_ + 1) % size(); }
  int prev() const { return (rank_ + size() - 1) % size(); }

  int rank_;
  std::vector<PeerAddress> peers_;
  int listen_fd_ = -1;
  int out_fd_ = -1;
  int in_fd_ = -1;
  TransportCounters counters_;
};

// Opens a listening socket bound to addr (port 0 picks a free port) and
// returns {fd, bound port}. Exposed for tests that need free ports.
std::pair<int, std::uint16_t> tcp_listen(const PeerAddress& addr);
void tcp_close(int fd);

}  // namespace ringbalance
