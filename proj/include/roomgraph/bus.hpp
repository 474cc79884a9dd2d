#pragma once

#include <atomic>
#include <chrono>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "roomgraph/errors.hpp"
#include "roomgraph/wire.hpp"

namespace roomgraph {

struct ByteAccounting {
  std::map<std::string, uint64_t> bytes_by_type;
  uint64_t messages_sent = 0;

  void record(MessageType t, size_t bytes) {
    bytes_by_type[messageTypeName(t)] += bytes;
    messages_sent += 1;
  }

  uint64_t total() const {
    uint64_t n = 0;
    for (const auto& [k, v] : bytes_by_type) n += v;
    return n;
  }
};

/// Sender-side transport interface: frames go somewhere, receivers drain.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(int to, const BrokerMessage& m) = 0;
  virtual std::vector<BrokerMessage> drain(int agent) = 0;
  const ByteAccounting& accounting() const { return accounting_; }

 protected:
  ByteAccounting accounting_;
};

struct LinkModel {
  double drop_probability = 0.0;
  double duplicate_probability = 0.0;
  bool reorder = false;
  uint64_t seed = 0;
};

/// Deterministic in-memory bus. Messages are fully encoded and decoded on
/// the way through so the wire format is exercised on every delivery.
class MemoryBus : public Transport {
 public:
  explicit MemoryBus(const LinkModel& link = {}) : link_(link), rng_(link.seed) {}

  void registerAgent(int id) { inboxes_.try_emplace(id); }

  void send(int to, const BrokerMessage& m) override {
    auto it = inboxes_.find(to);
    if (it == inboxes_.end()) {
      throw PeerUnreachableError("agent " + std::to_string(to) + " not on the bus");
    }
    std::vector<uint8_t> frame = encodeMessage(m);
    accounting_.record(m.type, frame.size());

    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (link_.drop_probability > 0.0 && u(rng_) < link_.drop_probability) return;
    int copies = 1;
    if (link_.duplicate_probability > 0.0 && u(rng_) < link_.duplicate_probability) copies = 2;
    for (int c = 0; c < copies; ++c) {
      auto& box = it->second;
      if (link_.reorder && !box.empty()) {
        std::uniform_int_distribution<size_t> pos(0, box.size());
        box.insert(box.begin() + pos(rng_), frame);
      } else {
        box.push_back(frame);
      }
    }
  }

  std::vector<BrokerMessage> drain(int agent) override {
    std::vector<BrokerMessage> out;
    auto it = inboxes_.find(agent);
    if (it == inboxes_.end()) return out;
    for (const auto& frame : it->second) out.push_back(decodeMessage(frame));
    it->second.clear();
    return out;
  }

 private:
  LinkModel link_;
  std::mt19937_64 rng_;
  std::map<int, std::deque<std::vector<uint8_t>>> inboxes_;
};

/// Localhost TCP transport: one listener per agent on base_port + agent id,
/// one outgoing connection per peer, frames preserved in order per
/// connection. MSGRAPH_PORT overrides the base port.
class TcpTransport : public Transport {
 public:
  TcpTransport(int agent_id, const std::vector<int>& all_agents, int base_port = 47600)
      : agent_id_(agent_id) {
    if (const char* env = std::getenv("MSGRAPH_PORT")) base_port = std::atoi(env);
    base_port_ = base_port;

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    int opt = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &opt, sizeof(opt));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(base_port_ + agent_id_));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 8) != 0) {
      throw PeerUnreachableError("cannot listen on port " +
                                 std::to_string(base_port_ + agent_id_));
    }
    running_ = true;
    acceptor_ = std::thread([this] { acceptLoop(); });
    (void)all_agents;
  }

  ~TcpTransport() override {
    running_ = false;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    for (auto& t : readers_) {
      if (t.joinable()) t.join();
    }
    for (auto& [peer, fd] : out_fds_) ::close(fd);
  }

  void send(int to, const BrokerMessage& m) override {
    std::vector<uint8_t> frame = encodeMessage(m);
    {
      std::lock_guard<std::mutex> lk(mutex_);
      accounting_.record(m.type, frame.size());
    }
    int fd = connectTo(to);
    size_t sent = 0;
    while (sent < frame.size()) {
      ssize_t n = ::write(fd, frame.data() + sent, frame.size() - sent);
      if (n <= 0) throw PeerUnreachableError("write to peer " + std::to_string(to) + " failed");
      sent += static_cast<size_t>(n);
    }
  }

  std::vector<BrokerMessage> drain(int agent) override {
    (void)agent;
    std::lock_guard<std::mutex> lk(mutex_);
    std::vector<BrokerMessage> out;
    out.swap(inbox_);
    return out;
  }

 private:
  int connectTo(int peer) {
    std::lock_guard<std::mutex> lk(connect_mutex_);
    auto it = out_fds_.find(peer);
    if (it != out_fds_.end()) return it->second;
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(base_port_ + peer));
    for (int attempt = 0;; ++attempt) {
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) break;
      if (attempt >= 50) {
        ::close(fd);
        throw PeerUnreachableError("cannot connect to peer " + std::to_string(peer));
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    out_fds_[peer] = fd;
    return fd;
  }

  void acceptLoop() {
    while (running_) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) break;
      std::lock_guard<std::mutex> lk(mutex_);
      readers_.emplace_back([this, fd] { readLoop(fd); });
    }
  }

  void readLoop(int fd) {
    std::vector<uint8_t> buffer;
    uint8_t chunk[4096];
    while (running_) {
      ssize_t n = ::read(fd, chunk, sizeof(chunk));
      if (n <= 0) break;
      buffer.insert(buffer.end(), chunk, chunk + n);
      while (buffer.size() >= 4) {
        uint32_t len = (static_cast<uint32_t>(buffer[0]) << 24) |
                       (static_cast<uint32_t>(buffer[1]) << 16) |
                       (static_cast<uint32_t>(buffer[2]) << 8) | static_cast<uint32_t>(buffer[3]);
        if (buffer.size() < 4u + len) break;
        std::vector<uint8_t> frame(buffer.begin(), buffer.begin() + 4 + len);
        buffer.erase(buffer.begin(), buffer.begin() + 4 + len);
        BrokerMessage m = decodeMessage(frame);
        std::lock_guard<std::mutex> lk(mutex_);
        inbox_.push_back(std::move(m));
      }
    }
    ::close(fd);
  }

  int agent_id_;
  int base_port_ = 47600;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::vector<std::thread> readers_;
  std::map<int, int> out_fds_;
  std::mutex mutex_;
  std::mutex connect_mutex_;
  std::vector<BrokerMessage> inbox_;
};

}  // namespace roomgraph
