#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ser_audit/data_model.hpp"

namespace ser_audit {

inline constexpr int kProtocolVersion = 1;

struct SessionOptions {
  std::vector<std::pair<std::string, std::string>> env;  // added to the child's environment
  std::size_t max_inflight = 1;
  bool record_transcript = false;
};

struct ExternalRequest {
  std::string id;
  std::string audio_path;
};

// Per-request result: either values or the predictor's error message.
struct ExternalOutcome {
  std::string id;
  std::optional<DimensionTriple> values;
  std::string error;
};

// Child process speaking the newline-delimited JSON predictor protocol on its
// stdin/stdout. The command line runs under /bin/sh -c. The handshake happens
// in Open(); a session is owned by one thread at a time.
class ExternalSession {
 public:
  static ExternalSession Open(const std::string& command_line, SessionOptions options = {});

  ExternalSession(ExternalSession&& other) noexcept;
  ExternalSession& operator=(ExternalSession&& other) noexcept;
  ExternalSession(const ExternalSession&) = delete;
  ExternalSession& operator=(const ExternalSession&) = delete;
  ~ExternalSession();

  const std::string& name() const { return name_; }
  const std::string& command_line() const { return command_; }

  // Throws kMissingPrediction if the child answers with an error message.
  DimensionTriple Predict(const std::string& id, const std::string& audio_path);

  // Keeps at most max_inflight requests outstanding; outcomes come back in
  // request order, matched by id.
  std::vector<ExternalOutcome> PredictMany(const std::vector<ExternalRequest>& requests);

  // Sends bye, waits for the child to answer and exit.
  void Close();
  bool is_open() const { return pid_ > 0; }

  // Lines sent ("> ...") and received ("< ..."), when recording is enabled.
  const std::vector<std::string>& transcript() const { return transcript_; }

 private:
  ExternalSession() = default;

  void Send(const std::string& line);
  std::string ReceiveLine();
  [[noreturn]] void FailBroken(const std::string& what);
  void Reap(bool force);

  std::string command_;
  std::string name_;
  SessionOptions options_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::vector<std::string> transcript_;
};

}  // namespace ser_audit
