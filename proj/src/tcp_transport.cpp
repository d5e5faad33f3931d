#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <thread>

#include "ringbalance/transport.hpp"

namespace ringbalance {
namespace {

constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 32;

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

sockaddr_in resolve(const PeerAddress& addr) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(addr.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    throw TransportClosed("cannot resolve '" + addr.host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in out{};
  std::memcpy(&out, res->ai_addr, sizeof(out));
  ::freeaddrinfo(res);
  out.sin_port = htons(addr.port);
  return out;
}

void write_all(int fd, const std::byte* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportClosed(errno_text("tcp send"));
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

// Returns false on orderly shutdown before any byte was read.
bool read_all(int fd, std::byte* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw TransportClosed("tcp peer closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportClosed(errno_text("tcp recv"));
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

std::pair<int, std::uint16_t> tcp_listen(const PeerAddress& addr) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportClosed(errno_text("socket"));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa = resolve(addr);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 || ::listen(fd, 4) != 0) {
    const std::string msg = errno_text("bind/listen " + addr.host + ":" + std::to_string(addr.port));
    ::close(fd);
    throw TransportClosed(msg);
  }
  socklen_t len = sizeof(sa);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  return {fd, ntohs(sa.sin_port)};
}

void tcp_close(int fd) {
  if (fd >= 0) ::close(fd);
}

TcpTransport::TcpTransport(int rank, std::vector<PeerAddress> peers, int connect_timeout_ms, int listen_fd)
    : rank_(rank), peers_(std::move(peers)), listen_fd_(listen_fd) {
  if (peers_.size() < 2) throw std::invalid_argument("TcpTransport: ring needs at least two peers");
  if (rank_ < 0 || rank_ >= size()) throw std::out_of_range("TcpTransport: rank outside peer list");
  if (listen_fd_ < 0) listen_fd_ = tcp_listen(peers_[static_cast<std::size_t>(rank_)]).first;

  // connect() completes against the peer's listen backlog, so every rank can
  // connect before anyone accepts.
  const sockaddr_in target = resolve(peers_[static_cast<std::size_t>(next())]);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(connect_timeout_ms);
  for (;;) {
    out_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (out_fd_ < 0) throw TransportClosed(errno_text("socket"));
    if (::connect(out_fd_, reinterpret_cast<const sockaddr*>(&target), sizeof(target)) == 0) break;
    ::close(out_fd_);
    out_fd_ = -1;
    if (std::chrono::steady_clock::now() > deadline) {
      throw TransportClosed("TcpTransport: could not reach rank " + std::to_string(next()));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  const int one = 1;
  ::setsockopt(out_fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  in_fd_ = ::accept(listen_fd_, nullptr, nullptr);
  if (in_fd_ < 0) throw TransportClosed(errno_text("accept"));
}

TcpTransport::~TcpTransport() {
  tcp_close(out_fd_);
  tcp_close(in_fd_);
  tcp_close(listen_fd_);
}

void TcpTransport::send(int to, Frame frame) {
  if (to != next()) throw std::invalid_argument("TcpTransport: can only send to ring successor");
  frame.sender = rank_;
  const auto bytes = encode_frame(frame);
  write_all(out_fd_, bytes.data(), bytes.size());
  ++counters_.frames_sent;
  counters_.bytes_sent += frame.payload.size();
  if (frame.type == MsgType::kChunk) ++counters_.chunks_sent;
  if (frame.type == MsgType::kScalar) ++counters_.scalars_sent;
}

Frame TcpTransport::recv(int from) {
  if (from != prev()) throw std::invalid_argument("TcpTransport: can only receive from ring predecessor");
  std::byte header[kFrameHeaderSize];
  if (!read_all(in_fd_, header, sizeof(header))) throw TransportClosed("tcp peer closed");
  const FrameHeader h = decode_frame_header(header);
  if (h.sender != from) {
    throw FrameCorrupt("frame from rank " + std::to_string(h.sender) + " on link from " + std::to_string(from));
  }
  if (h.length > kMaxPayload) throw FrameCorrupt("frame declares " + std::to_string(h.length) + " payload bytes");
  Frame f;
  f.type = h.type;
  f.sender = h.sender;
  f.payload.resize(h.length);
  if (h.length > 0 && !read_all(in_fd_, f.payload.data(), f.payload.size())) {
    throw TransportClosed("tcp peer closed mid-frame");
  }
  ++counters_.frames_received;
  return f;
}

}  // namespace ringbalance
