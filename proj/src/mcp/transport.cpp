#include "threedify/mcp/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

namespace threedify::mcp {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

bool fd_is_socket(int fd) {
  struct stat st {};
  return fstat(fd, &st) == 0 && S_ISSOCK(st.st_mode);
}

}  // namespace

FdTransport::FdTransport(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds), is_socket_(fd_is_socket(write_fd)) {}

FdTransport::~FdTransport() { close(); }

void FdTransport::send(std::string_view line) {
  if (write_fd_ < 0) throw TransportClosed();
  std::string framed(line);
  framed.push_back('\n');
  std::size_t off = 0;
  while (off < framed.size()) {
    ssize_t n = is_socket_ ? ::send(write_fd_, framed.data() + off, framed.size() - off, MSG_NOSIGNAL)
                           : ::write(write_fd_, framed.data() + off, framed.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) throw TransportClosed();
      sys_fail("write");
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdTransport::receive() {
  if (read_fd_ < 0) return std::nullopt;
  for (;;) {
    auto nl = buffer_.find('\n', scan_from_);
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      scan_from_ = 0;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    scan_from_ = buffer_.size();
    if (buffer_.size() > kMaxLine) throw std::runtime_error("line exceeds maximum length");
    char chunk[8192];
    ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) return std::nullopt;
      sys_fail("read");
    }
    if (n == 0) {
      // A final unterminated line still counts.
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      scan_from_ = 0;
      return line;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void FdTransport::close() {
  if (!owns_) {
    read_fd_ = write_fd_ = -1;
    return;
  }
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
}

std::unique_ptr<FdTransport> stdio_transport() {
  return std::make_unique<FdTransport>(STDIN_FILENO, STDOUT_FILENO, false);
}

ChildProcessTransport::ChildProcessTransport(const std::vector<std::string>& argv) {
  if (argv.empty()) throw std::invalid_argument("empty command line");
  std::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0) sys_fail("pipe");
  if (pipe(from_child) != 0) sys_fail("pipe");
  pid_ = fork();
  if (pid_ < 0) sys_fail("fork");
  if (pid_ == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  pipe_ = std::make_unique<FdTransport>(from_child[0], to_child[1], true);
}

ChildProcessTransport::~ChildProcessTransport() { close(); }

void ChildProcessTransport::close() {
  if (pipe_) pipe_->close();
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin asks the server to exit; give it a moment, then insist.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      usleep(10000);
    }
    kill(pid_, SIGTERM);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::unique_ptr<FdTransport> connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (int rc = getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error("resolve " + host + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) sys_fail("connect " + host + ":" + service);
  return std::make_unique<FdTransport>(fd, fd, true);
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  fd_ = socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) sys_fail("socket");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host == "localhost" ? "127.0.0.1" : host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::invalid_argument("bad IPv4 listen address: " + host);
  }
  if (bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) sys_fail("bind");
  if (listen(fd_, 16) != 0) sys_fail("listen");
  socklen_t len = sizeof addr;
  getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<FdTransport> TcpListener::accept() {
  for (;;) {
    if (fd_ < 0) return nullptr;
    int client = ::accept(fd_, nullptr, nullptr);
    if (client >= 0) return std::make_unique<FdTransport>(client, client, true);
    if (errno == EINTR) continue;
    return nullptr;
  }
}

void TcpListener::close() {
  if (fd_ >= 0) {
    shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void LineQueue::push(std::string line) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) throw TransportClosed();
    lines_.push_back(std::move(line));
  }
  cv_.notify_one();
}

std::optional<std::string> LineQueue::pop() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return closed_ || !lines_.empty(); });
  if (lines_.empty()) return std::nullopt;
  auto line = std::move(lines_.front());
  lines_.pop_front();
  return line;
}

void LineQueue::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool LineQueue::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

void PipeTransport::send(std::string_view line) {
  if (line.find('\n') != std::string_view::npos) {
    throw std::invalid_argument("line must not contain a newline");
  }
  out_->push(std::string(line));
}

std::pair<std::unique_ptr<PipeTransport>, std::unique_ptr<PipeTransport>> make_pipe_pair() {
  auto a_to_b = std::make_shared<LineQueue>();
  auto b_to_a = std::make_shared<LineQueue>();
  return {std::make_unique<PipeTransport>(b_to_a, a_to_b), std::make_unique<PipeTransport>(a_to_b, b_to_a)};
}

void RecordingTransport::send(std::string_view line) {
  log_.push_back("> " + std::string(line));
  inner_.send(line);
}

std::optional<std::string> RecordingTransport::receive() {
  auto line = inner_.receive();
  if (line) log_.push_back("< " + *line);
  return line;
}

}  // namespace threedify::mcp
