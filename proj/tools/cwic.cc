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

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "cwic/codec/image_codec.h"
#include "cwic/errors.h"
#include "cwic/train/checkpoint.h"
#include "cwic/train/evaluate.h"
#include "cwic/train/image_io.h"
#include "cwic/train/metrics.h"
#include "cwic/train/plot.h"
#include "cwic/train/trainer.h"
#include "selfcheck.h"

namespace fs = std::filesystem;
using namespace cwic;

namespace {

enum Exit { kOk = 0, kSelfcheckFailed = 1, kConfig = 2, kNumeric = 3, kModelMismatch = 4, kCorruptStream = 5 };

std::vector<uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IngestError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IngestError("cannot write " + p.string());
}

// A checkpoint that cannot be read is a configuration problem for every
// command except selfcheck.
CodecNet<float> load_model(const fs::path& p) {
  try {
    return load_checkpoint<float>(p).net;
  } catch (const FormatError& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

struct TrainArgs {
  fs::path data, out, log;
  double lambda = 0;
  int quality = 0;
  std::string metric = "mse";
  uint64_t seed = 0;
  int64_t channels = 0, latent = 0;
  int window = 4, heads = 4;
  int64_t epochs = 0, steps = 0, batch = 4, crop = 256, checkpoint_every = 0;
  double lr = 1e-4;
  bool no_cwam = false, no_feature = false, no_flip = false, resume = false, verbose = false;
};

int cmd_train(const TrainArgs& a) {
  TrainOptions o;
  o.model.metric = parse_metric(a.metric);
  if (a.lambda > 0 && a.quality > 0) throw ConfigError("--lambda and --quality are mutually exclusive");
  if (a.lambda > 0)
    o.model.lambda = a.lambda;
  else
    o.model.lambda = lambda_for_quality(o.model.metric, a.quality > 0 ? a.quality : (o.model.metric == Metric::kMse ? 4 : 2));
  if (a.channels > 0) o.model.n = o.model.m = a.channels;
  if (a.latent > 0) o.model.m = a.latent;
  o.model.window = a.window;
  o.model.heads = a.heads;
  o.model.seed = a.seed;
  o.model.use_cwam = !a.no_cwam;
  o.model.use_feature_coding = !a.no_feature;
  o.model.validate();
  o.batch = a.batch;
  o.crop = a.crop;
  o.lr = a.lr;
  o.seed = a.seed;
  o.hflip = !a.no_flip;
  o.checkpoint_path = a.out;
  o.checkpoint_every = a.checkpoint_every;
  if (a.epochs > 0 && a.steps > 0) throw ConfigError("--epochs and --steps are mutually exclusive");
  if (o.crop < kImageMultiple || o.crop % kImageMultiple != 0)
    throw ConfigError("--crop must be a positive multiple of 64");

  const auto images = load_dataset(a.data, o.crop, std::cerr);
  const int64_t per_epoch = (static_cast<int64_t>(images.size()) + o.batch - 1) / o.batch;
  o.steps = a.steps > 0 ? a.steps : (a.epochs > 0 ? a.epochs : 1) * per_epoch;

  std::ofstream log_file;
  if (!a.log.empty()) {
    log_file.open(a.log, std::ios::trunc);
    if (!log_file) throw ConfigError("cannot write log " + a.log.string());
    o.log = &log_file;
  } else {
    o.log = &std::cout;
  }
  auto progress = [&](const TrainStep& s) {
    if (a.verbose && (s.step % 10 == 0 || s.step == o.steps))
      std::fprintf(stderr, "step %lld/%lld  L=%.4f  R=%.4f bpp  D=%.4f  lr=%g\n", static_cast<long long>(s.step),
                   static_cast<long long>(o.steps), s.loss.L, s.loss.R_bpp, s.loss.D, s.lr);
  };

  if (a.resume && fs::exists(a.out)) {
    auto ck = load_checkpoint<float>(a.out);
    const ModelConfig& c = ck.net.config;
    if (c.lambda != o.model.lambda || c.metric != o.model.metric || c.n != o.model.n || c.m != o.model.m ||
        c.use_cwam != o.model.use_cwam || c.use_feature_coding != o.model.use_feature_coding)
      throw ConfigError("--resume checkpoint does not match the requested configuration");
    train_from(std::move(ck.net), ck.adam ? std::move(*ck.adam) : AdamState<float>{}, ck.step, images, o, progress);
  } else {
    train(images, o, progress);
  }
  std::cerr << "wrote " << a.out.string() << " after " << o.steps << " steps\n";
  return kOk;
}

int cmd_encode(const fs::path& model, const fs::path& input, const fs::path& output, bool verify,
               const fs::path& recon) {
  if (!recon.empty() && !verify) throw ConfigError("--recon requires --verify");
  auto net = load_model(model);
  const ImageTensor x = load_image(input);
  const auto enc = encode_image(net, x);
  const double bpp = stream_bpp(enc.bytes.size(), x.dim(3), x.dim(2));
  if (!verify) {
    write_bytes(output, enc.bytes);
    std::printf("bpp=%.6f\n", bpp);
    return kOk;
  }
  const auto dec = decode_image(net, enc.bytes);
  for (size_t i = 0; i < dec.x_hat.data().size(); ++i)
    if (dec.x_hat.data()[i] != enc.x_hat.data()[i])
      throw NumericError("local decode differs from the encoder's reconstruction");
  write_bytes(output, enc.bytes);
  const ImageTensor shown = quantize_8bit(dec.x_hat);
  if (!recon.empty()) save_image(recon, shown);
  double se = 0;
  for (size_t i = 0; i < shown.data().size(); ++i) {
    const double d = static_cast<double>(shown.data()[i]) - static_cast<double>(x.data()[i]);
    se += d * d;
  }
  std::printf("bpp=%.6f psnr=%.4f\n", bpp, psnr_from_mse(se / static_cast<double>(x.numel())));
  return kOk;
}

int cmd_decode(const fs::path& model, const fs::path& input, const fs::path& output) {
  auto net = load_model(model);
  const auto bytes = read_bytes(input);
  const auto dec = decode_image(net, bytes);
  save_image(output, dec.x_hat);
  return kOk;
}

int cmd_eval(const fs::path& model, const std::vector<fs::path>& inputs, const fs::path& out) {
  auto net = load_model(model);
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (auto& f : list_images(in)) files.push_back(f);
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      throw ConfigError("no such file or directory: " + in.string());
    }
  }
  if (files.empty()) throw ConfigError("no images to evaluate");
  const auto report = evaluate_files(net, files, eval_threads(), std::cerr);
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw ConfigError("cannot write " + out.string());
  write_csv(csv, report);
  std::printf("images=%zu skipped=%lld bpp=%.6f psnr=%.4f msssim_db=%.4f\n", report.rows.size(),
              static_cast<long long>(report.skipped), report.mean.bpp, report.mean.psnr_db, report.mean.msssim_db);
  return kOk;
}

int cmd_plot(const std::vector<std::string>& inputs, const fs::path& out) {
  std::vector<RDCurve> curves;
  for (const auto& arg : inputs) {
    const auto eq = arg.find('=');
    const std::string label = eq == std::string::npos ? "cwic" : arg.substr(0, eq);
    const fs::path path = eq == std::string::npos ? arg : arg.substr(eq + 1);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<RDPoint> rows;
    try {
      rows = read_csv(in);
    } catch (const FormatError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    if (rows.empty()) throw ConfigError(path.string() + ": CSV has no rows");
    RDPoint p = summary_point(rows);
    p.file = path.string();
    auto it = std::find_if(curves.begin(), curves.end(), [&](const RDCurve& c) { return c.label == label; });
    if (it == curves.end()) {
      curves.push_back({label, {}});
      it = curves.end() - 1;
    }
    it->points.push_back(p);
  }
  std::ofstream svg(out, std::ios::trunc);
  if (!svg) throw ConfigError("cannot write " + out.string());
  svg << render_rd_svg(curves);
  return kOk;
}

// Runs a command body with the exit-code contract.
template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ModelMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModelMismatch;
  } catch (const DecodeError& e) {
    std::cerr << "error: corrupt stream: " << e.what() << "\n";
    return kCorruptStream;
  } catch (const NumericError& e) {
    std::cerr << "error: numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSelfcheckFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cwic: learned image codec with cross-scale window attention"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a directory of PNG/PPM images");
  train->add_option("--data", ta.data, "Training image directory")->required();
  train->add_option("--out", ta.out, "Checkpoint to write")->required();
  train->add_option("--lambda", ta.lambda, "Rate-distortion tradeoff (overrides --quality)");
  train->add_option("--quality", ta.quality, "Index into the lambda grid: 1-6 for mse, 1-3 for ms-ssim");
  train->add_option("--metric", ta.metric, "Distortion: mse or ms-ssim")->default_val("mse");
  train->add_option("--seed", ta.seed, "Seed for weights, data order and noise")->default_val(0);
  train->add_option("--channels", ta.channels, "Transform and latent width N = M (default 64)");
  train->add_option("--latent-channels", ta.latent, "Latent width M when it differs from N");
  train->add_option("--window", ta.window, "Attention window size (even)")->default_val(4);
  train->add_option("--heads", ta.heads, "Attention heads")->default_val(4);
  train->add_option("--epochs", ta.epochs, "Passes over the data (default 1)");
  train->add_option("--steps", ta.steps, "Total optimizer steps (instead of --epochs)");
  train->add_option("--batch", ta.batch, "Batch size")->default_val(4);
  train->add_option("--crop", ta.crop, "Random crop size, multiple of 64")->default_val(256);
  train->add_option("--lr", ta.lr, "Initial learning rate")->default_val(1e-4);
  train->add_option("--log", ta.log, "JSON-lines training log (default stdout)");
  train->add_option("--checkpoint-every", ta.checkpoint_every, "Also save every K steps")->default_val(0);
  train->add_flag("--no-cwam", ta.no_cwam, "Replace the attention modules by identity");
  train->add_flag("--no-feature-coding", ta.no_feature, "Remove the feature encoding/decoding modules");
  train->add_flag("--no-flip", ta.no_flip, "Disable random horizontal flips");
  train->add_flag("--resume", ta.resume, "Continue from --out when it exists");
  train->add_flag("-v,--verbose", ta.verbose, "Progress on stderr");

  fs::path model, input, output, recon;
  bool verify = false;
  auto* encode = app.add_subcommand("encode", "Compress an image");
  encode->add_option("--model", model, "Checkpoint")->required();
  encode->add_option("--input", input, "PNG or PPM image")->required();
  encode->add_option("--output", output, "Bitstream to write")->required();
  encode->add_flag("--verify", verify, "Decode locally and report PSNR");
  encode->add_option("--recon", recon, "With --verify, write the reconstruction here");

  auto* decode = app.add_subcommand("decode", "Decompress a bitstream");
  decode->add_option("--model", model, "Checkpoint")->required();
  decode->add_option("--input", input, "Bitstream")->required();
  decode->add_option("--output", output, "Image to write (.png, else PPM)")->required();

  std::vector<fs::path> eval_inputs;
  fs::path csv;
  auto* eval = app.add_subcommand("eval", "Rate-distortion of a model on a set of images");
  eval->add_option("--model", model, "Checkpoint")->required();
  eval->add_option("--data", eval_inputs, "Image directories or files")->required();
  eval->add_option("--out", csv, "CSV to write")->required();

  std::vector<std::string> plot_inputs;
  fs::path svg;
  auto* plot = app.add_subcommand("plot", "RD curves from eval CSVs");
  plot->add_option("csv", plot_inputs, "Eval CSVs, optionally LABEL=path; one curve per label")->required();
  plot->add_option("--out", svg, "SVG to write")->required();

  std::optional<fs::path> check_model;
  auto* selfcheck = app.add_subcommand("selfcheck", "Fast invariant suite");
  selfcheck->add_option("--model", check_model, "Also verify this checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  if (*train) return guarded([&] { return cmd_train(ta); });
  if (*encode) return guarded([&] { return cmd_encode(model, input, output, verify, recon); });
  if (*decode) return guarded([&] { return cmd_decode(model, input, output); });
  if (*eval) return guarded([&] { return cmd_eval(model, eval_inputs, csv); });
  if (*plot) return guarded([&] { return cmd_plot(plot_inputs, svg); });
  if (*selfcheck)
    return guarded([&] { return run_selfcheck(check_model, std::cout) ? kOk : kSelfcheckFailed; });
  return kConfig;
}
