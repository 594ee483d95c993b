#pragma once

// Length-delimited JSON over local (AF_UNIX) stream sockets.
//
// Frame layout: 4-byte big-endian payload length, followed by that many
// bytes of UTF-8 JSON. Both the store service and the sweep coordinator
// speak this framing.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

namespace d2k::net {

inline constexpr std::uint32_t kMaxFrameBytes = 256u * 1024u * 1024u;

void write_frame(int fd, const std::string& payload);
/// Returns nullopt on orderly EOF before a frame header.
std::optional<std::string> read_frame(int fd);

using Handler = std::function<nlohmann::ordered_json(const nlohmann::ordered_json&)>;

/// Accepts connections on a unix socket path and serves each on its own
/// thread. A frame that is not valid JSON gets an error reply; the
/// connection stays open.
class UnixServer {
 public:
  UnixServer(std::filesystem::path socket_path, Handler handler);
  ~UnixServer();
  UnixServer(const UnixServer&) = delete;
  UnixServer& operator=(const UnixServer&) = delete;

  void start();
  void stop();
  const std::filesystem::path& path() const { return path_; }

 private:
  void accept_loop();
  void serve(int fd);

  std::filesystem::path path_;
  Handler handler_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<std::thread> workers_;
  std::list<int> client_fds_;
};

class UnixClient {
 public:
  explicit UnixClient(const std::filesystem::path& socket_path);
  ~UnixClient();
  UnixClient(const UnixClient&) = delete;
  UnixClient& operator=(const UnixClient&) = delete;

  nlohmann::ordered_json call(const nlohmann::ordered_json& request);

 private:
  int fd_ = -1;
  std::mutex mu_;
};

}  // namespace d2k::net
