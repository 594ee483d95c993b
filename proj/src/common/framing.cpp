#include "d2k/common/framing.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

#include "d2k/common/error.hpp"

namespace d2k::net {
namespace {

bool write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    const auto w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

// 1 = ok, 0 = eof at start, -1 = error / truncated
int read_all(int fd, char* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const auto r = ::recv(fd, data + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    if (r == 0) return got == 0 ? 0 : -1;
    got += static_cast<std::size_t>(r);
  }
  return 1;
}

sockaddr_un make_addr(const std::filesystem::path& p) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  const auto s = p.string();
  if (s.size() >= sizeof(addr.sun_path)) throw Error("io", "socket path too long: " + s);
  std::memcpy(addr.sun_path, s.c_str(), s.size() + 1);
  return addr;
}

nlohmann::ordered_json error_reply(const std::string& code, const std::string& message) {
  return {{"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

}  // namespace

void write_frame(int fd, const std::string& payload) {
  if (payload.size() > kMaxFrameBytes) throw Error("io", "frame too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  const std::array<char, 4> header{static_cast<char>((n >> 24) & 0xff), static_cast<char>((n >> 16) & 0xff),
                                   static_cast<char>((n >> 8) & 0xff), static_cast<char>(n & 0xff)};
  if (!write_all(fd, header.data(), header.size()) || !write_all(fd, payload.data(), payload.size())) {
    throw Error("io", "socket write failed");
  }
}

std::optional<std::string> read_frame(int fd) {
  std::array<unsigned char, 4> header{};
  const int h = read_all(fd, reinterpret_cast<char*>(header.data()), header.size());
  if (h == 0) return std::nullopt;
  if (h < 0) throw Error("io", "truncated frame header");
  const std::uint32_t n = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                          (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
  if (n > kMaxFrameBytes) throw Error("io", "frame too large");
  std::string payload(n, '\0');
  if (n > 0 && read_all(fd, payload.data(), n) != 1) throw Error("io", "truncated frame payload");
  return payload;
}

UnixServer::UnixServer(std::filesystem::path socket_path, Handler handler)
    : path_(std::move(socket_path)), handler_(std::move(handler)) {}

UnixServer::~UnixServer() { stop(); }

void UnixServer::start() {
  if (running_) return;
  std::error_code ec;
  std::filesystem::remove(path_, ec);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error("io", "socket() failed");
  const auto addr = make_addr(path_);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("io", "cannot listen on " + path_.string() + ": " + std::strerror(errno));
  }
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void UnixServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

void UnixServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      if (errno == EINTR) continue;
      break;
    }
    std::lock_guard lock(mu_);
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void UnixServer::serve(int fd) {
  try {
    while (running_) {
      auto frame = read_frame(fd);
      if (!frame) break;
      nlohmann::ordered_json reply;
      try {
        reply = handler_(nlohmann::ordered_json::parse(*frame));
      } catch (const nlohmann::json::exception& e) {
        reply = error_reply("bad_request", e.what());
      } catch (const Error& e) {
        reply = error_reply(e.code(), e.what());
      } catch (const std::exception& e) {
        reply = error_reply("internal", e.what());
      }
      write_frame(fd, reply.dump());
    }
  } catch (const std::exception&) {
    // peer went away mid-frame
  }
  std::lock_guard lock(mu_);
  client_fds_.remove(fd);
  ::close(fd);
}

UnixClient::UnixClient(const std::filesystem::path& socket_path) {
  fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error("unreachable", "socket() failed");
  const auto addr = make_addr(socket_path);
  if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error("unreachable", "cannot connect to " + socket_path.string());
  }
}

UnixClient::~UnixClient() {
  if (fd_ >= 0) ::close(fd_);
}

nlohmann::ordered_json UnixClient::call(const nlohmann::ordered_json& request) {
  std::lock_guard lock(mu_);
  write_frame(fd_, request.dump());
  auto frame = read_frame(fd_);
  if (!frame) throw Error("unreachable", "connection closed by peer");
  return nlohmann::ordered_json::parse(*frame);
}

}  // namespace d2k::net
