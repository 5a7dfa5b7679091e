#include "ser_audit/external.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <deque>
#include <map>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "ser_audit/error.hpp"

extern char** environ;

namespace ser_audit {

namespace {

using Json = nlohmann::ordered_json;

void IgnoreSigpipe() {
  static const bool done = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

std::string DescribeStatus(int status) {
  if (WIFEXITED(status)) return "child exited with status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "child killed by signal " + std::to_string(WTERMSIG(status));
  return "child stopped";
}

double NumberField(const Json& msg, const char* key, const std::string& line) {
  const auto it = msg.find(key);
  if (it == msg.end() || !it->is_number()) {
    throw Error(ErrorCode::kProtocol,
                std::string("missing numeric field '") + key + "' in: " + line);
  }
  return it->get<double>();
}

std::string StringField(const Json& msg, const char* key, const std::string& line) {
  const auto it = msg.find(key);
  if (it == msg.end() || !it->is_string()) {
    throw Error(ErrorCode::kProtocol,
                std::string("missing string field '") + key + "' in: " + line);
  }
  return it->get<std::string>();
}

Json ParseMessage(const std::string& line) {
  Json msg;
  try {
    msg = Json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kProtocol, "malformed JSON: " + line);
  }
  if (!msg.is_object()) throw Error(ErrorCode::kProtocol, "expected a JSON object: " + line);
  StringField(msg, "type", line);
  return msg;
}

}  // namespace

ExternalSession ExternalSession::Open(const std::string& command_line, SessionOptions options) {
  IgnoreSigpipe();
  if (options.max_inflight == 0) options.max_inflight = 1;

  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(ErrorCode::kIo, "pipe failed");
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw Error(ErrorCode::kIo, "pipe failed");
  }

  // Build argv and envp before fork; the child only calls async-signal-safe
  // functions.
  std::vector<std::string> env_storage;
  for (char** e = environ; *e != nullptr; ++e) {
    const std::string entry(*e);
    const auto key = entry.substr(0, entry.find('='));
    bool overridden = false;
    for (const auto& [k, v] : options.env) overridden |= (k == key);
    if (!overridden) env_storage.push_back(entry);
  }
  for (const auto& [k, v] : options.env) env_storage.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& e : env_storage) envp.push_back(e.data());
  envp.push_back(nullptr);
  std::string sh = "/bin/sh";
  std::string dash_c = "-c";
  std::string cmd = command_line;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};

  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw Error(ErrorCode::kIo, "fork failed");
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execve(argv[0], argv, envp.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  ExternalSession s;
  s.command_ = command_line;
  s.options_ = std::move(options);
  s.pid_ = pid;
  s.to_child_ = in_pipe[1];
  s.from_child_ = out_pipe[0];

  Json hello;
  hello["type"] = "hello";
  hello["protocol"] = kProtocolVersion;
  s.Send(hello.dump());
  const auto line = s.ReceiveLine();
  const auto reply = ParseMessage(line);
  if (reply["type"] != "hello") {
    throw Error(ErrorCode::kProtocol, "expected hello, got: " + line);
  }
  const auto version = reply.find("protocol");
  if (version == reply.end() || !version->is_number_integer() ||
      version->get<long long>() != kProtocolVersion) {
    throw Error(ErrorCode::kIncompatiblePredictor,
                "predictor speaks protocol " +
                    (version == reply.end() ? std::string("<none>") : version->dump()) +
                    ", expected " + std::to_string(kProtocolVersion));
  }
  s.name_ = StringField(reply, "name", line);
  return s;
}

ExternalSession::ExternalSession(ExternalSession&& other) noexcept { *this = std::move(other); }

ExternalSession& ExternalSession::operator=(ExternalSession&& other) noexcept {
  if (this != &other) {
    if (is_open()) Reap(true);
    command_ = std::move(other.command_);
    name_ = std::move(other.name_);
    options_ = std::move(other.options_);
    pid_ = std::exchange(other.pid_, -1);
    to_child_ = std::exchange(other.to_child_, -1);
    from_child_ = std::exchange(other.from_child_, -1);
    buffer_ = std::move(other.buffer_);
    transcript_ = std::move(other.transcript_);
  }
  return *this;
}

ExternalSession::~ExternalSession() {
  if (is_open()) Reap(true);
}

void ExternalSession::Send(const std::string& line) {
  if (options_.record_transcript) transcript_.push_back("> " + line);
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t w = write(to_child_, data.data() + off, data.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      FailBroken("write to predictor failed");
    }
    off += static_cast<std::size_t>(w);
  }
}

std::string ExternalSession::ReceiveLine() {
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (options_.record_transcript) transcript_.push_back("< " + line);
      return line;
    }
    char chunk[4096];
    const ssize_t r = read(from_child_, chunk, sizeof(chunk));
    if (r < 0) {
      if (errno == EINTR) continue;
      FailBroken("read from predictor failed");
    }
    if (r == 0) FailBroken("predictor closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(r));
  }
}

void ExternalSession::FailBroken(const std::string& what) {
  int status = 0;
  std::string info = "child still running";
  // Give a dying child a moment so its exit status can be reported.
  for (int i = 0; i < 50 && pid_ > 0; ++i) {
    const pid_t r = waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      info = DescribeStatus(status);
      pid_ = -1;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  if (pid_ > 0) Reap(true);
  if (to_child_ >= 0) close(std::exchange(to_child_, -1));
  if (from_child_ >= 0) close(std::exchange(from_child_, -1));
  throw Error(ErrorCode::kBrokenSession, what + " (" + info + ")");
}

void ExternalSession::Reap(bool force) {
  if (to_child_ >= 0) close(std::exchange(to_child_, -1));
  if (pid_ > 0) {
    int status = 0;
    bool exited = false;
    for (int i = 0; i < (force ? 100 : 1000); ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        exited = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!exited) {
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
  if (from_child_ >= 0) close(std::exchange(from_child_, -1));
}

DimensionTriple ExternalSession::Predict(const std::string& id, const std::string& audio_path) {
  auto outcomes = PredictMany({{id, audio_path}});
  auto& o = outcomes.front();
  if (!o.values) {
    throw Error(ErrorCode::kMissingPrediction, "predictor error for '" + id + "': " + o.error);
  }
  return *o.values;
}

std::vector<ExternalOutcome> ExternalSession::PredictMany(
    const std::vector<ExternalRequest>& requests) {
  if (!is_open()) throw Error(ErrorCode::kBrokenSession, "session is closed");

  std::vector<ExternalOutcome> outcomes(requests.size());
  std::map<std::string, std::deque<std::size_t>> pending;  // id -> request indices
  std::size_t next = 0;
  std::size_t inflight = 0;
  std::size_t done = 0;

  while (done < requests.size()) {
    while (next < requests.size() && inflight < options_.max_inflight) {
      Json req;
      req["type"] = "predict";
      req["id"] = requests[next].id;
      req["audio_path"] = requests[next].audio_path;
      Send(req.dump());
      pending[requests[next].id].push_back(next);
      ++next;
      ++inflight;
    }

    const auto line = ReceiveLine();
    const auto msg = ParseMessage(line);
    const auto type = msg["type"].get<std::string>();
    if (type != "prediction" && type != "error") {
      throw Error(ErrorCode::kProtocol, "unexpected message during prediction: " + line);
    }
    const auto id = StringField(msg, "id", line);
    auto it = pending.find(id);
    if (it == pending.end() || it->second.empty()) {
      throw Error(ErrorCode::kProtocol, "response for unknown id: " + line);
    }
    const std::size_t index = it->second.front();
    it->second.pop_front();
    auto& out = outcomes[index];
    out.id = id;
    if (type == "prediction") {
      out.values = DimensionTriple{NumberField(msg, "arousal", line),
                                   NumberField(msg, "dominance", line),
                                   NumberField(msg, "valence", line)};
    } else {
      out.error = msg.contains("message") && msg["message"].is_string()
                      ? msg["message"].get<std::string>()
                      : std::string("unspecified error");
    }
    --inflight;
    ++done;
  }
  return outcomes;
}

void ExternalSession::Close() {
  if (!is_open()) return;
  Json bye;
  bye["type"] = "bye";
  Send(bye.dump());
  try {
    while (true) {
      const auto msg = ParseMessage(ReceiveLine());
      if (msg["type"] == "bye") break;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kBrokenSession) {
      Reap(true);
      throw;
    }
    return;  // child already gone; FailBroken reaped it
  }
  Reap(false);
}

}  // namespace ser_audit
