// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// TOML configuration files for training and synthesis. Unknown keys and
// wrongly typed values are ConfigErrors that carry the source line.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "fed/density.hpp"
#include "fed/flow.hpp"
#include "fed/synth.hpp"
#include "fed/train.hpp"

namespace fed {

struct DetectorSpec {
  FlowConfig flow;
  CovMode cov_mode = CovMode::kFull;
  double energy_clamp_eps = kDefaultEnergyClampEps;
};

struct TrainFile {
  DetectorSpec detector;
  TrainConfig train;
};

TrainFile parse_train_config(std::string_view text, const std::string& source = "<string>");
TrainFile load_train_config(const std::filesystem::path& path);

SynthConfig parse_synth_config(std::string_view text, const std::string& source = "<string>");
SynthConfig load_synth_config(const std::filesystem::path& path);

}  // namespace fed
