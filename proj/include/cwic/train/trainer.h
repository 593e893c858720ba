// Copyright 2026 The cwic Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "cwic/codec/model.h"
#include "cwic/tensor/adam.h"
#include "cwic/train/image_io.h"

namespace cwic {

struct TrainOptions {
  ModelConfig model;
  int64_t steps = 1000;
  int64_t batch = 4;
  int64_t crop = 256;   // >= 64 and a multiple of 64
  double lr = 1e-4;
  uint64_t seed = 0;    // data order, crops, flips and quantization noise
  bool hflip = true;
  // Periodic and final checkpoints go here when non-empty.
  std::filesystem::path checkpoint_path;
  int64_t checkpoint_every = 0;
  std::ostream* log = nullptr;  // JSON lines: step, L, R_bpp, D, lr
};

struct TrainStep {
  int64_t step = 0;  // 1-based
  double lr = 0;
  LossBreakdown loss;
};

struct TrainResult {
  CodecNet<float> net;
  AdamState<float> adam;
  std::vector<TrainStep> history;
};

// base for the first 3/4 of the steps, base / 10 until 11/12, then
// base / 100.
double lr_at(int64_t step, int64_t total, double base);

// Mean of L over the `window` steps ending at `step` (1-based, inclusive),
// fewer at the start.
double smoothed_loss(const std::vector<TrainStep>& history, int64_t step, int64_t window = 10);

// Every image must already fit the crop. Each epoch visits the images in a
// fresh seeded order; batches are random crops, flipped with probability
// 1/2. On a non-finite loss or gradient the last good state is saved to
// checkpoint_path (when set) and NumericError is rethrown with the step.
// ConfigError for bad options or an empty image list.
TrainResult train(const std::vector<ImageTensor>& images, const TrainOptions& options,
                  const std::function<void(const TrainStep&)>& on_step = {});

// Continue from an existing network and optimizer state.
TrainResult train_from(CodecNet<float> net, AdamState<float> adam, int64_t first_step,
                       const std::vector<ImageTensor>& images, const TrainOptions& options,
                       const std::function<void(const TrainStep&)>& on_step = {});

// Loads every readable image that fits the crop. Unreadable or undersized
// files are skipped with a note on `warn`. ConfigError when the directory
// is missing or nothing usable remains.
std::vector<ImageTensor> load_dataset(const std::filesystem::path& dir, int64_t crop, std::ostream& warn);

}  // namespace cwic
