#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "armtest/perception.hpp"

namespace armtest {

// Bidirectional newline-delimited byte stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(std::string_view line) = 0;
  // nullopt on end of stream or timeout.
  virtual std::optional<std::string> receive_line() = 0;
};

// Talks to a child process started with `/bin/sh -c command` over its
// stdin and stdout.
class ProcessChannel final : public LineChannel {
 public:
  explicit ProcessChannel(const std::string& command,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~ProcessChannel() override;
  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  void send_line(std::string_view line) override;
  std::optional<std::string> receive_line() override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::chrono::milliseconds timeout_;
  std::string buffer_;
};

// TCP client connection to host:port.
class TcpChannel final : public LineChannel {
 public:
  TcpChannel(const std::string& host, std::uint16_t port,
             std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~TcpChannel() override;
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  void send_line(std::string_view line) override;
  std::optional<std::string> receive_line() override;

 private:
  int fd_ = -1;
  std::chrono::milliseconds timeout_;
  std::string buffer_;
};

// Request:  {"scene_id", "luminosity", "boxes":[{"cx","cy","rot_deg","w","h"}]}
// Response: {"scene_id", "detections":[{"cx","cy","rot_deg","w","h","confidence"}]}
std::string encode_request(std::string_view scene_id, const Scene& scene);
std::vector<Detection> decode_response(std::string_view line, std::string_view expected_scene_id);

// Perception backed by an out-of-process model. One request, one reply, in
// order; any malformed or missing reply raises ProtocolError.
class ExternalPerception final : public PerceptionModel {
 public:
  explicit ExternalPerception(std::unique_ptr<LineChannel> channel)
      : channel_(std::move(channel)) {}

  std::vector<Detection> detect(const Scene& scene, std::uint64_t seed) override;

 private:
  std::unique_ptr<LineChannel> channel_;
  std::uint64_t requests_ = 0;
};

// "exec:<command>" or "tcp:<host>:<port>".
std::unique_ptr<PerceptionModel> connect_external_perception(const std::string& endpoint);

}  // namespace armtest
