// Minimal external predictor used by the tests. Speaks the line-delimited
// JSON protocol on stdin/stdout and can be told to misbehave.

#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ser_audit/audio_io.hpp"
#include "ser_audit/perturb.hpp"

using ordered_json = nlohmann::ordered_json;

namespace {

struct Options {
  std::string name = "echo";
  int protocol = 1;
  std::vector<double> values{0.25, 0.5, 0.75};
  bool check_audio = false;
  bool from_audio = false;
  int fail_after = -1;
  int garbage_after = -1;
  std::size_t reverse_window = 1;
};

void Emit(const ordered_json& j) {
  std::cout << j.dump() << '\n' << std::flush;
}

ordered_json Answer(const Options& opt, const std::string& id, const std::string& path) {
  std::vector<double> v = opt.values;
  if (opt.check_audio || opt.from_audio) {
    ser_audit::AudioClip clip;
    try {
      clip = ser_audit::ReadWav(path);
    } catch (const std::exception&) {
      ordered_json e;
      e["type"] = "error";
      e["id"] = id;
      e["message"] = "cannot read audio";
      return e;
    }
    if (opt.from_audio) {
      // Loudness and length drive the answer so augmentations move it.
      const double rms = ser_audit::Rms(clip.samples);
      v = {4.0 * rms, clip.duration_s() / 4.0, 0.5};
    }
  }
  ordered_json p;
  p["type"] = "prediction";
  p["id"] = id;
  p["arousal"] = v[0];
  p["dominance"] = v[1];
  p["valence"] = v[2];
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"echo predictor"};
  app.add_option("--name", opt.name);
  app.add_option("--protocol", opt.protocol);
  app.add_option("--values", opt.values)->delimiter(',')->expected(3);
  app.add_flag("--check-audio", opt.check_audio);
  app.add_flag("--from-audio", opt.from_audio);
  app.add_option("--fail-after", opt.fail_after, "exit without answering the Nth request");
  app.add_option("--garbage-after", opt.garbage_after);
  app.add_option("--reverse-window", opt.reverse_window,
                 "answer requests in reversed groups of this size");
  CLI11_PARSE(app, argc, argv);

  std::deque<ordered_json> pending;
  auto flush_pending = [&] {
    while (!pending.empty()) {
      Emit(pending.back());
      pending.pop_back();
    }
  };

  int seen = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    ordered_json msg;
    try {
      msg = ordered_json::parse(line);
    } catch (const std::exception&) {
      continue;
    }
    const std::string type = msg.value("type", "");
    if (type == "hello") {
      ordered_json h;
      h["type"] = "hello";
      h["protocol"] = opt.protocol;
      h["name"] = opt.name;
      Emit(h);
    } else if (type == "predict") {
      ++seen;
      if (seen == opt.fail_after) std::_Exit(3);
      if (seen == opt.garbage_after) {
        std::cout << "this is not json\n" << std::flush;
        continue;
      }
      pending.push_back(Answer(opt, msg.value("id", ""), msg.value("audio_path", "")));
      if (pending.size() >= opt.reverse_window) flush_pending();
    } else if (type == "bye") {
      flush_pending();
      Emit(ordered_json{{"type", "bye"}});
      return 0;
    }
  }
  return 0;
}
