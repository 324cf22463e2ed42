#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace threedify::mcp {

class TransportClosed : public std::runtime_error {
 public:
  TransportClosed() : std::runtime_error("transport closed") {}
  using std::runtime_error::runtime_error;
};

/// Newline-delimited line channel. `send` takes a line without its
/// terminator; `receive` returns one without it, or nullopt at end of stream.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(std::string_view line) = 0;
  virtual std::optional<std::string> receive() = 0;
  virtual void close() {}
};

/// Lines over a pair of POSIX file descriptors (stdio, pipes, sockets).
class FdTransport : public Transport {
 public:
  FdTransport(int read_fd, int write_fd, bool owns_fds);
  ~FdTransport() override;
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void send(std::string_view line) override;
  std::optional<std::string> receive() override;
  void close() override;

  static constexpr std::size_t kMaxLine = 16u << 20;

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
  bool is_socket_;
  std::string buffer_;
  std::size_t scan_from_ = 0;
};

std::unique_ptr<FdTransport> stdio_transport();

/// Spawns `argv` with stdin/stdout piped to this transport. The child is
/// terminated and reaped on destruction.
class ChildProcessTransport : public Transport {
 public:
  explicit ChildProcessTransport(const std::vector<std::string>& argv);
  ~ChildProcessTransport() override;

  void send(std::string_view line) override { pipe_->send(line); }
  std::optional<std::string> receive() override { return pipe_->receive(); }
  void close() override;

 private:
  std::unique_ptr<FdTransport> pipe_;
  int pid_ = -1;
};

std::unique_ptr<FdTransport> connect_tcp(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  /// Port 0 picks an ephemeral port; see port().
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks; returns nullptr once the listener is closed.
  std::unique_ptr<FdTransport> accept();
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Thread-safe in-process line queue shared by two PipeTransport ends.
class LineQueue {
 public:
  void push(std::string line);
  std::optional<std::string> pop();
  void close();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> lines_;
  bool closed_ = false;
};

class PipeTransport : public Transport {
 public:
  PipeTransport(std::shared_ptr<LineQueue> inbound, std::shared_ptr<LineQueue> outbound)
      : in_(std::move(inbound)), out_(std::move(outbound)) {}
  ~PipeTransport() override { close(); }

  void send(std::string_view line) override;
  std::optional<std::string> receive() override { return in_->pop(); }
  /// Closes the outbound direction; the peer sees end of stream.
  void close() override { out_->close(); }

 private:
  std::shared_ptr<LineQueue> in_;
  std::shared_ptr<LineQueue> out_;
};

std::pair<std::unique_ptr<PipeTransport>, std::unique_ptr<PipeTransport>> make_pipe_pair();

/// Decorator that appends every line to `log` as "> sent" / "< received".
class RecordingTransport : public Transport {
 public:
  RecordingTransport(Transport& inner, std::vector<std::string>& log) : inner_(inner), log_(log) {}

  void send(std::string_view line) override;
  std::optional<std::string> receive() override;
  void close() override { inner_.close(); }

 private:
  Transport& inner_;
  std::vector<std::string>& log_;
};

}  // namespace threedify::mcp
