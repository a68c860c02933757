#include "armtest/external_perception.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <json.hpp>

#include "armtest/errors.hpp"

namespace armtest {

namespace {

using json = nlohmann::json;

void write_all(int fd, std::string_view data, bool socket) {
  while (!data.empty()) {
    const ssize_t n = socket ? ::send(fd, data.data(), data.size(), MSG_NOSIGNAL)
                             : ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("write to perception model failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::optional<std::string> read_line(int fd, std::string& buffer, std::chrono::milliseconds timeout) {
  while (true) {
    const std::size_t nl = buffer.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      return line;
    }
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) return std::nullopt;
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

double require_number(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw ProtocolError(std::string("response field '") + key + "' missing or not a number");
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ProtocolError(std::string("response field '") + key + "' not finite");
  return v;
}

}  // namespace

ProcessChannel::ProcessChannel(const std::string& command, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw ProtocolError("pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ProtocolError("pipe() failed");
  }
  ::signal(SIGPIPE, SIG_IGN);
  pid_ = ::fork();
  if (pid_ < 0) throw ProtocolError("fork() failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ProcessChannel::~ProcessChannel() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

void ProcessChannel::send_line(std::string_view line) {
  std::string framed(line);
  framed.push_back('\n');
  write_all(to_child_, framed, false);
}

std::optional<std::string> ProcessChannel::receive_line() {
  return read_line(from_child_, buffer_, timeout_);
}

TcpChannel::TcpChannel(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0) {
    throw ProtocolError("cannot resolve " + host);
  }
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd_ = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw ProtocolError("cannot connect to " + host + ":" + service);
}

TcpChannel::~TcpChannel() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpChannel::send_line(std::string_view line) {
  std::string framed(line);
  framed.push_back('\n');
  write_all(fd_, framed, true);
}

std::optional<std::string> TcpChannel::receive_line() { return read_line(fd_, buffer_, timeout_); }

std::string encode_request(std::string_view scene_id, const Scene& scene) {
  json boxes = json::array();
  for (const ObbPose& b : scene.boxes) {
    boxes.push_back({{"cx", b.cx}, {"cy", b.cy}, {"rot_deg", b.rot_deg}, {"w", b.width}, {"h", b.height}});
  }
  const json req = {{"scene_id", scene_id}, {"luminosity", scene.luminosity}, {"boxes", boxes}};
  return req.dump();
}

std::vector<Detection> decode_response(std::string_view line, std::string_view expected_scene_id) {
  const json resp = json::parse(line.begin(), line.end(), nullptr, false);
  if (resp.is_discarded() || !resp.is_object()) throw ProtocolError("response is not a JSON object");
  const auto id = resp.find("scene_id");
  if (id == resp.end() || !id->is_string() || id->get<std::string>() != expected_scene_id) {
    throw ProtocolError("response scene_id does not match request " + std::string(expected_scene_id));
  }
  const auto dets = resp.find("detections");
  if (dets == resp.end() || !dets->is_array()) throw ProtocolError("response lacks a detections array");

  std::vector<Detection> out;
  for (const json& d : *dets) {
    if (!d.is_object()) throw ProtocolError("detection is not an object");
    Detection det;
    det.obb = {require_number(d, "cx"), require_number(d, "cy"),
               canonical_deg(require_number(d, "rot_deg")), require_number(d, "w"),
               require_number(d, "h")};
    det.confidence = require_number(d, "confidence");
    if (!is_valid(det.obb)) throw ProtocolError("detection has non-positive extents");
    if (det.confidence < 0.0 || det.confidence > 1.0) throw ProtocolError("confidence outside [0, 1]");
    out.push_back(det);
  }
  return out;
}

std::vector<Detection> ExternalPerception::detect(const Scene& scene, std::uint64_t seed) {
  char id[48];
  std::snprintf(id, sizeof id, "%016llx-%llu", static_cast<unsigned long long>(seed),
                static_cast<unsigned long long>(requests_++));
  channel_->send_line(encode_request(id, scene));
  const std::optional<std::string> reply = channel_->receive_line();
  if (!reply) throw ProtocolError("perception model closed the stream or timed out");
  return decode_response(*reply, id);
}

std::unique_ptr<PerceptionModel> connect_external_perception(const std::string& endpoint) {
  if (endpoint.rfind("exec:", 0) == 0) {
    return std::make_unique<ExternalPerception>(std::make_unique<ProcessChannel>(endpoint.substr(5)));
  }
  if (endpoint.rfind("tcp:", 0) == 0) {
    const std::string rest = endpoint.substr(4);
    const std::size_t colon = rest.rfind(':');
    if (colon == std::string::npos) throw ProtocolError("tcp endpoint needs host:port");
    const int port = std::stoi(rest.substr(colon + 1));
    return std::make_unique<ExternalPerception>(
        std::make_unique<TcpChannel>(rest.substr(0, colon), static_cast<std::uint16_t>(port)));
  }
  throw ProtocolError("unknown perception endpoint '" + endpoint + "'");
}

}  // namespace armtest
