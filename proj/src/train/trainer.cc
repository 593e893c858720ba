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

#include "cwic/train/trainer.h"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include <json.hpp>

#include "cwic/errors.h"
#include "cwic/train/checkpoint.h"

namespace cwic {

namespace {

void check_options(const TrainOptions& o) {
  o.model.validate();
  if (o.steps <= 0) throw ConfigError("step count must be positive");
  if (o.batch <= 0) throw ConfigError("batch size must be positive");
  if (o.crop < kImageMultiple || o.crop % kImageMultiple != 0)
    throw ConfigError("crop size must be a positive multiple of " + std::to_string(kImageMultiple));
  if (!(o.lr > 0)) throw ConfigError("learning rate must be positive");
  if (o.checkpoint_every < 0) throw ConfigError("checkpoint interval must be >= 0");
}

// Deterministic stream of training batches.
class BatchSampler {
 public:
  BatchSampler(const std::vector<ImageTensor>& images, const TrainOptions& o)
      : images_(images), o_(o), rng_(mix_seed(o.seed, 0x62617463680aULL)) {}

  // Fast-forwards so that a resumed run sees the batches it would have seen.
  void skip(int64_t batches) {
    for (int64_t i = 0; i < batches; ++i) next();
  }

  ImageTensor next() {
    const int64_t s = o_.crop, plane = 3 * s * s;
    std::vector<float> v(static_cast<size_t>(o_.batch * plane));
    for (int64_t b = 0; b < o_.batch; ++b) {
      if (cursor_ == order_.size()) new_epoch();
      ImageTensor crop = random_crop(images_[order_[cursor_++]], s, rng_);
      if (o_.hflip && rng_.uniform() < 0.5) crop = hflip(crop);
      std::copy(crop.data().begin(), crop.data().end(), v.begin() + b * plane);
    }
    return ImageTensor(Shape{o_.batch, 3, s, s}, std::move(v));
  }

 private:
  void new_epoch() {
    order_.resize(images_.size());
    std::iota(order_.begin(), order_.end(), size_t{0});
    Rng shuffle(mix_seed(o_.seed, epoch_++));
    for (size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[shuffle.below(i)]);
    cursor_ = 0;
  }

  const std::vector<ImageTensor>& images_;
  const TrainOptions& o_;
  Rng rng_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
  uint64_t epoch_ = 0;
};

void log_step(std::ostream& out, const TrainStep& s) {
  nlohmann::json j;
  j["step"] = s.step;
  j["L"] = s.loss.L;
  j["R_bpp"] = s.loss.R_bpp;
  j["D"] = s.loss.D;
  j["lr"] = s.lr;
  out << j.dump() << '\n';
  out.flush();
}

}  // namespace

double lr_at(int64_t step, int64_t total, double base) {
  // Exact fractions 3/4 and 11/12 of the run.
  if (4 * step < 3 * total) return base;
  if (12 * step < 11 * total) return base / 10.0;
  return base / 100.0;
}

double smoothed_loss(const std::vector<TrainStep>& history, int64_t step, int64_t window) {
  if (step < 1 || step > static_cast<int64_t>(history.size()) || window < 1)
    throw ContractError("smoothed_loss: step outside the history");
  const int64_t first = std::max<int64_t>(1, step - window + 1);
  double sum = 0;
  for (int64_t s = first; s <= step; ++s) sum += history[static_cast<size_t>(s - 1)].loss.L;
  return sum / static_cast<double>(step - first + 1);
}

TrainResult train(const std::vector<ImageTensor>& images, const TrainOptions& options,
                  const std::function<void(const TrainStep&)>& on_step) {
  check_options(options);
  return train_from(CodecNet<float>::create(options.model), {}, 0, images, options, on_step);
}

TrainResult train_from(CodecNet<float> net, AdamState<float> adam, int64_t first_step,
                       const std::vector<ImageTensor>& images, const TrainOptions& options,
                       const std::function<void(const TrainStep&)>& on_step) {
  check_options(options);
  if (images.empty()) throw ConfigError("training set is empty");
  for (const auto& img : images)
    if (!crop_fits(img.dim(2), img.dim(3), options.crop)) throw ConfigError("training image smaller than the crop size");

  TrainResult r{std::move(net), std::move(adam), {}};
  auto params = r.net.parameters();
  BatchSampler sampler(images, options);
  sampler.skip(first_step);
  const bool save = !options.checkpoint_path.empty();

  for (int64_t step = first_step; step < options.steps; ++step) {
    TrainStep rec;
    rec.step = step + 1;
    rec.lr = lr_at(step, options.steps, options.lr);
    try {
      const ImageTensor x = sampler.next();
      for (auto& p : params) p.zero_grad();
      const auto fwd = r.net.forward(x, QuantMode::kNoise, mix_seed(options.seed, static_cast<uint64_t>(step)));
      backward(fwd.loss);
      adam_step(params, r.adam, rec.lr);
      rec.loss = fwd.breakdown;
    } catch (const NumericError& e) {
      if (save) save_checkpoint(options.checkpoint_path, r.net, step, &r.adam);
      throw NumericError("training step " + std::to_string(step + 1) + ": " + e.what() +
                         (save ? " (last good state saved to " + options.checkpoint_path.string() + ")" : ""));
    }
    if (options.log) log_step(*options.log, rec);
    if (on_step) on_step(rec);
    r.history.push_back(std::move(rec));
    if (save && options.checkpoint_every > 0 && (step + 1) % options.checkpoint_every == 0 && step + 1 < options.steps)
      save_checkpoint(options.checkpoint_path, r.net, step + 1, &r.adam);
  }
  if (save) save_checkpoint(options.checkpoint_path, r.net, options.steps, &r.adam);
  return r;
}

std::vector<ImageTensor> load_dataset(const std::filesystem::path& dir, int64_t crop, std::ostream& warn) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir.string());
  std::vector<ImageTensor> out;
  for (const auto& path : list_images(dir)) {
    try {
      ImageTensor img = load_image(path);
      if (!crop_fits(img.dim(2), img.dim(3), crop)) {
        warn << "skipping " << path.string() << ": " << img.dim(3) << "x" << img.dim(2) << " is smaller than the crop "
             << crop << "\n";
        continue;
      }
      out.push_back(std::move(img));
    } catch (const IngestError& e) {
      warn << "skipping " << e.what() << "\n";
    }
  }
  if (out.empty()) throw ConfigError("no usable training images in " + dir.string());
  return out;
}

}  // namespace cwic
