// edgelab: synthetic data, two-stage training, annotation, inference and
// evaluation for the SuperEdge detector.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "superedge/checkpoint.hpp"
#include "superedge/config.hpp"
#include "superedge/dataset.hpp"
#include "superedge/errors.hpp"
#include "superedge/evaluation.hpp"
#include "superedge/image_io.hpp"
#include "superedge/model.hpp"
#include "superedge/postprocess.hpp"
#include "superedge/pseudo_label.hpp"
#include "superedge/synthetic.hpp"
#include "superedge/training.hpp"

namespace fs = std::filesystem;
using namespace superedge;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kPartial = 2, kNumerical = 3 };

void log(const char* fmt, auto... args) {
  std::fprintf(stderr, "edgelab: ");
  if constexpr (sizeof...(args) == 0) {
    std::fputs(fmt, stderr);
  } else {
    std::fprintf(stderr, fmt, args...);
  }
  std::fputc('\n', stderr);
}

int run_synth(const Config& cfg) {
  generate_dataset(cfg.synth.count, cfg.synth.height, cfg.synth.width, cfg.seed, cfg.synth.out);
  log("wrote %d samples to %s", cfg.synth.count, cfg.synth.out.c_str());
  return kOk;
}

// Reads back the loss log, keeping only epochs <= keep.
std::string loss_log_prefix(const fs::path& path, int keep) {
  std::ifstream in(path);
  std::string out = "epoch\tl_pix\tl_obj\n", line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    int epoch = 0;
    if (std::sscanf(line.c_str(), "%d", &epoch) == 1 && epoch >= 1 && epoch <= keep) out += line + "\n";
  }
  return out;
}

void write_atomic(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Shared by both training stages: resumes from out_dir/checkpoint.sedg when
// present, checkpoints and logs after every epoch.
int run_training(const Config& cfg, const std::vector<TrainingSample>& samples, const fs::path& out_dir,
                 const fs::path& init) {
  fs::create_directories(out_dir);
  const fs::path ckpt = out_dir / "checkpoint.sedg";
  const fs::path loss_log = out_dir / "loss_log.tsv";
  const TrainOptions options = cfg.train_options();

  ModelParams params = ModelParams::create(cfg.seed);
  AdamState adam;
  int start = 0;
  if (fs::exists(ckpt)) {
    TrainingState st = load_checkpoint(ckpt);
    params = std::move(st.params);
    adam = std::move(st.adam);
    start = st.epoch;
    log("resuming from %s at epoch %d", ckpt.c_str(), start);
  } else {
    if (!init.empty()) {
      params = load_checkpoint(init).params;
      log("initialized weights from %s", init.c_str());
    }
    const auto trainable = params.trainable();
    adam = AdamState::for_params(trainable, options.lr);
  }
  std::string log_text = loss_log_prefix(loss_log, start);
  write_atomic(loss_log, log_text);
  if (start >= options.epochs) {
    log("already trained for %d epochs", start);
    return kOk;
  }
  train(samples, params, adam, options, start, [&](const EpochSummary& e, const ModelParams& p, const AdamState& a) {
    save_checkpoint(ckpt, p, a, e.epoch);
    char line[96];
    std::snprintf(line, sizeof(line), "%d\t%.6f\t%.6f\n", e.epoch, e.pixel, e.object);
    log_text += line;
    write_atomic(loss_log, log_text);
    log("epoch %d/%d  l_pix %.4f  l_obj %.4f", e.epoch, options.epochs, e.pixel, e.object);
  });
  return kOk;
}

int run_train_synth(const Config& cfg) {
  const Dataset ds = ingest_dataset(cfg.synth.out);
  std::vector<TrainingSample> samples;
  int missing = 0;
  for (const auto& e : ds.entries) {
    if (!e.edges) {
      ++missing;
      continue;
    }
    const EdgeMap gt = binarize(read_edge_map(*e.edges), 0.5F);
    samples.push_back(make_training_sample(read_image(e.image), gt, dilate(gt, cfg.train.object_dilation)));
  }
  if (samples.empty()) throw IoError(cfg.synth.out.string() + ": no image/edge pairs to train on");
  if (missing > 0) log("skipped %d images without ground truth", missing);
  const int rc = run_training(cfg, samples, cfg.train.synth_out, {});
  return missing > 0 ? kPartial : rc;
}

int run_train_real(const Config& cfg) {
  const Dataset ds = ingest_dataset(cfg.annotate.dataset);
  std::vector<TrainingSample> samples;
  int missing = 0;
  for (const auto& e : ds.entries) {
    if (!e.pixel_label || !e.object_label) {
      ++missing;
      continue;
    }
    samples.push_back(make_training_sample(read_image(e.image), read_edge_map(*e.pixel_label),
                                           read_edge_map(*e.object_label)));
  }
  if (samples.empty()) throw IoError(cfg.annotate.dataset.string() + ": no pseudo-labelled images; run annotate first");
  if (missing > 0) log("skipped %d images without pseudo labels", missing);
  const int rc = run_training(cfg, samples, cfg.train.real_out, cfg.train.init_checkpoint);
  return missing > 0 ? kPartial : rc;
}

int run_annotate(const Config& cfg) {
  ModelParams params = load_checkpoint(cfg.annotate.checkpoint).params;
  LabelConfig labels = cfg.annotate.labels;
  labels.annotator.rng_seed = cfg.seed;
  const EdgePredictor predictor = [&](const Image& img) { return predict(img, params).pixel; };
  const ExportSummary s = export_labels(cfg.annotate.dataset, predictor, labels);
  log("labelled %d images, %d already done, %d failed", s.labeled, s.skipped, static_cast<int>(s.failures.size()));
  for (const auto& f : s.failures) log("failed: %s", f.c_str());
  return s.failures.empty() ? kOk : kPartial;
}

int run_infer(const Config& cfg) {
  ModelParams params = load_checkpoint(cfg.infer.checkpoint).params;
  if (!fs::is_directory(cfg.infer.input)) throw IoError(cfg.infer.input.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.infer.input)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError(cfg.infer.input.string() + ": no images found");
  for (const char* d : {"pixel", "object", "fused"}) fs::create_directories(cfg.infer.out / d);
  int failed = 0;
  for (const auto& f : files) {
    try {
      const Prediction p = predict(read_image(f), params);
      const std::string name = f.stem().string() + ".png";
      write_image(cfg.infer.out / "pixel" / name, p.pixel);
      write_image(cfg.infer.out / "object" / name, p.object);
      write_image(cfg.infer.out / "fused" / name,
                  fuse(p.pixel, p.object, {cfg.infer.pixel_threshold, cfg.infer.object_threshold}));
    } catch (const IoError& e) {
      ++failed;
      log("failed: %s", e.what());
    }
  }
  log("wrote predictions for %d of %zu images to %s", static_cast<int>(files.size()) - failed, files.size(),
      cfg.infer.out.c_str());
  return failed > 0 ? kPartial : kOk;
}

int run_eval(const Config& cfg) {
  if (!fs::is_directory(cfg.eval.predictions)) throw IoError(cfg.eval.predictions.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.eval.predictions)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EdgeMap> preds, gts;
  std::vector<std::string> ids;
  int unmatched = 0;
  for (const auto& f : files) {
    const auto gt = find_by_stem(cfg.eval.ground_truth, f.stem().string());
    if (!gt) {
      ++unmatched;
      log("no ground truth for %s", f.filename().c_str());
      continue;
    }
    preds.push_back(read_edge_map(f));
    gts.push_back(binarize(read_edge_map(*gt), 0.5F));
    ids.push_back(f.stem().string());
  }
  if (preds.empty()) throw IoError("no prediction/ground-truth pairs found");
  const EvalReport r = evaluate_dataset(preds, gts, cfg.eval.n_thresholds, cfg.eval.tolerance, ids);
  write_report(r, cfg.eval.out);
  std::printf("ODS %.4f  OIS %.4f  AP %.4f  (%zu images)\n", r.ods, r.ois, r.ap, preds.size());
  return unmatched > 0 ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SuperEdge edge detection: synthetic pretraining, pseudo-labelling, training, inference, evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Config&);
  };
  const Command commands[] = {
      {"synth", "generate the synthetic shapes dataset", run_synth},
      {"train-synth", "stage 1: train on synthetic data", run_train_synth},
      {"annotate", "stage 2: pseudo-label real images", run_annotate},
      {"train-real", "stage 3: train on pseudo-labelled images", run_train_real},
      {"infer", "write pixel, object and fused edge maps", run_infer},
      {"eval", "ODS/OIS/AP against ground truth", run_eval},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "configuration file (key = value lines)")->required();
    sub->add_option("--set", overrides, "override a configuration key, key=value")->take_all();
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const Config cfg = load_config(config_path, overrides);
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].run(cfg);
    }
    return kUsage;
  } catch (const ConfigError& e) {
    log("%s", e.what());
    return kUsage;
  } catch (const NumericalError& e) {
    log("numerical failure: %s", e.what());
    return kNumerical;
  } catch (const IoError& e) {
    log("%s", e.what());
    return kPartial;
  } catch (const std::exception& e) {
    log("error: %s", e.what());
    return kUsage;
  }
}
