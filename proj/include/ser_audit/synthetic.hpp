#pragma once

#include <cstdint>
#include <filesystem>

#include "ser_audit/data_model.hpp"

namespace ser_audit {

// Corpus of synthetic 16 kHz clips whose labels are a fixed affine function of
// the baseline features plus Gaussian noise. Used as a recoverable target for
// the baseline and as an end-to-end fixture.
struct SyntheticOptions {
  std::size_t num_train = 300;
  std::size_t num_dev = 100;
  std::size_t num_test = 100;
  std::size_t speakers_train = 10;
  std::size_t speakers_dev = 4;
  std::size_t speakers_test = 4;
  double label_std = 0.12;
  double label_noise = 0.02;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  std::filesystem::path train_manifest;
  std::filesystem::path dev_manifest;
  std::filesystem::path test_manifest;
};

// Writes <dir>/audio/*.wav and <dir>/{train,dev,test}.csv (seven-point scale).
SyntheticCorpus GenerateSyntheticCorpus(const std::filesystem::path& dir,
                                        const SyntheticOptions& options = {});

}  // namespace ser_audit
