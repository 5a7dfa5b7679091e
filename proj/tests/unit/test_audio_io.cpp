#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ser_audit/audio_io.hpp"
#include "ser_audit/error.hpp"
#include "support/test_support.hpp"

using namespace ser_audit;
using ser_audit::testing::TempDir;

namespace {

void Put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back(v >> 8);
}

void Put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

void PutTag(std::vector<unsigned char>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

// Hand-assembled PCM file, independent of the library's writer.
std::vector<unsigned char> HandWav(const std::vector<std::int16_t>& samples, int channels = 1,
                                   int rate = 16000, int bits = 16, bool extra_chunk = false) {
  std::vector<unsigned char> b;
  const std::uint32_t data_bytes = samples.size() * 2;
  const std::uint32_t extra = extra_chunk ? 8 + 4 : 0;
  PutTag(b, "RIFF");
  Put32(b, 4 + 8 + 16 + extra + 8 + data_bytes);
  PutTag(b, "WAVE");
  PutTag(b, "fmt ");
  Put32(b, 16);
  Put16(b, 1);
  Put16(b, channels);
  Put32(b, rate);
  Put32(b, rate * channels * bits / 8);
  Put16(b, channels * bits / 8);
  Put16(b, bits);
  if (extra_chunk) {
    PutTag(b, "LIST");
    Put32(b, 4);
    PutTag(b, "INFO");
  }
  PutTag(b, "data");
  Put32(b, data_bytes);
  for (std::int16_t s : samples) Put16(b, static_cast<std::uint16_t>(s));
  return b;
}

ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

std::string MessageOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("16-bit samples are divided by 32768") {
  const auto clip = DecodeWav(HandWav({0, 16384, -32768}));
  REQUIRE(clip.size() == 3);
  CHECK(clip.samples[0] == 0.0f);
  CHECK(clip.samples[1] == 0.5f);
  CHECK(clip.samples[2] == -1.0f);
  CHECK(clip.sample_rate == 16000);
}

TEST_CASE("unknown chunks before data are skipped") {
  const auto clip = DecodeWav(HandWav({1, 2, 3}, 1, 16000, 16, true));
  REQUIRE(clip.size() == 3);
  CHECK(clip.samples[2] == 3.0f / 32768.0f);
}

TEST_CASE("stereo, other rates and other depths are unsupported") {
  CHECK(CodeOf([] { DecodeWav(HandWav({0, 0, 0, 0}, 2)); }) == ErrorCode::kUnsupportedFormat);
  CHECK(MessageOf([] { DecodeWav(HandWav({0, 0, 0, 0}, 2)); }).find("channel") !=
        std::string::npos);
  CHECK(CodeOf([] { DecodeWav(HandWav({0, 0}, 1, 44100)); }) == ErrorCode::kUnsupportedFormat);
  CHECK(MessageOf([] { DecodeWav(HandWav({0, 0}, 1, 44100)); }).find("44100") !=
        std::string::npos);
  CHECK(CodeOf([] { DecodeWav(HandWav({0, 0}, 1, 16000, 24)); }) ==
        ErrorCode::kUnsupportedFormat);
  CHECK(CodeOf([] { DecodeWav({'n', 'o', 'p', 'e'}); }) == ErrorCode::kUnsupportedFormat);
}

TEST_CASE("16-bit write then read is lossless on representable samples") {
  TempDir dir("wav");
  std::vector<std::int16_t> raw;
  for (int v = -32768; v <= 32767; v += 97) raw.push_back(static_cast<std::int16_t>(v));
  raw.push_back(32767);
  const auto clip = DecodeWav(HandWav(raw));
  WriteWav(clip, dir / "a.wav");
  const auto back = ReadWav(dir / "a.wav");
  REQUIRE(back.size() == clip.size());
  CHECK(std::memcmp(back.samples.data(), clip.samples.data(), clip.size() * sizeof(float)) == 0);
  CHECK(ser_audit::testing::ReadBytes(dir / "a.wav") == HandWav(raw));
}

TEST_CASE("100 zeros make a readable file") {
  TempDir dir("wav");
  AudioClip clip;
  clip.samples.assign(100, 0.0f);
  WriteWav(clip, dir / "z.wav");
  const auto back = ReadWav(dir / "z.wav");
  REQUIRE(back.size() == 100);
  for (float s : back.samples) CHECK(s == 0.0f);
}

TEST_CASE("int16 writing clamps and rounds half away from zero") {
  AudioClip clip;
  clip.samples = {1.5f, -1.5f, 1.0f, 0.5f / 32768.0f, -0.5f / 32768.0f, 1.5f / 32768.0f};
  const auto bytes = EncodeWav(clip, WavEncoding::kInt16);
  const auto back = DecodeWav(bytes);
  REQUIRE(back.size() == clip.size());
  CHECK(back.samples[0] * 32768.0f == 32767.0f);
  CHECK(back.samples[1] == -1.0f);
  CHECK(back.samples[2] * 32768.0f == 32767.0f);
  CHECK(back.samples[3] * 32768.0f == 1.0f);
  CHECK(back.samples[4] * 32768.0f == -1.0f);
  CHECK(back.samples[5] * 32768.0f == 2.0f);
}

TEST_CASE("float32 round trip is bit identical") {
  TempDir dir("wav");
  AudioClip clip = ser_audit::testing::SpeechLike(4000, 9);
  clip.samples[0] = 1.75f;  // out of nominal range survives float storage
  clip.samples[1] = -0.0f;
  WriteWav(clip, dir / "f.wav", WavEncoding::kFloat32);
  const auto back = ReadWav(dir / "f.wav");
  REQUIRE(back.size() == clip.size());
  CHECK(std::memcmp(back.samples.data(), clip.samples.data(), clip.size() * sizeof(float)) == 0);
}

TEST_CASE("missing file is an io error") {
  CHECK(CodeOf([] { ReadWav("/nonexistent/nowhere.wav"); }) == ErrorCode::kIo);
}
