#include "commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <map>
#include <ostream>

#include "bdgd/baselines/tv.hpp"
#include "bdgd/errors.hpp"
#include "bdgd/infer/infer.hpp"
#include "bdgd/io/binary.hpp"
#include "bdgd/io/checkpoint.hpp"
#include "bdgd/io/config.hpp"
#include "bdgd/io/dataset_file.hpp"
#include "bdgd/io/export.hpp"
#include "bdgd/train/train.hpp"

namespace bdgd::cli {

namespace fs = std::filesystem;
using io::format_double;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out;
  std::string mode;
};

void add_common(CLI::App& cmd, Common& c, bool with_mode) {
  cmd.add_option("--config", c.config, "Run configuration file (key = value under [sections])");
  cmd.add_option("--seed", c.seed, "Seed override")->each([&c](const std::string&) { c.has_seed = true; });
  cmd.add_option("--out", c.out, "Output directory (overrides output.directory)");
  if (with_mode)
    cmd.add_option("--mode", c.mode, "Last-layer treatment")
        ->check(CLI::IsMember({"mfvi", "mcdo", "deterministic"}));
}

io::RunConfig load_config(const Common& c) {
  io::RunConfig cfg = c.config.empty() ? io::RunConfig{} : io::load_run_config(c.config);
  if (!c.mode.empty()) cfg.block.mode = model::parse_bayes_mode(c.mode);
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

void require_geometry(const tomo::Geometry& data, const tomo::Geometry& expected, const std::string& what) {
  if (!(data == expected))
    throw DataError(what + ": geometry (" + std::to_string(data.height) + "x" + std::to_string(data.width) + ", " +
                    std::to_string(data.num_angles()) + " angles) does not match the expected geometry (" +
                    std::to_string(expected.height) + "x" + std::to_string(expected.width) + ", " +
                    std::to_string(expected.num_angles()) + " angles)");
}

std::string method_name(model::BayesMode mode) {
  switch (mode) {
    case model::BayesMode::mfvi: return "BDGD-MFVI";
    case model::BayesMode::mcdo: return "BDGD-MCDO";
    case model::BayesMode::deterministic: return "DGD";
  }
  return "?";
}

// ---------------------------------------------------------------- generate

int cmd_generate(const Common& c, std::ostream& out) {
  io::RunConfig cfg = load_config(c);
  if (c.has_seed) {
    cfg.data_seed = c.seed;
    cfg.validation_seed = c.seed + 1;
  }
  cfg.validate();
  const fs::path dir = prepare_dir(cfg.output_dir);
  const auto g = cfg.geometry();

  const auto train = phantoms::build_dataset(cfg.train_count, g, cfg.noise_level, cfg.data_seed);
  io::save_dataset(dir / "train.bdgd", train);
  if (cfg.validation_count > 0) {
    const auto val = phantoms::build_dataset(cfg.validation_count, g, cfg.noise_level, cfg.validation_seed);
    io::save_dataset(dir / "validation.bdgd", val);
  }
  io::write_file(dir / "run.ini", io::format_run_config(cfg));
  out << "wrote " << cfg.train_count << " training and " << cfg.validation_count << " validation records ("
      << g.height << "x" << g.width << ", " << g.num_angles() << " angles, " << g.detector_count
      << " detectors) to " << dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string resume;
};

int cmd_train(const Common& c, const TrainArgs& a, std::ostream& out) {
  io::RunConfig cfg = load_config(c);
  if (c.has_seed) cfg.train.seed = c.seed;
  cfg.validate();
  const fs::path dir = prepare_dir(cfg.output_dir);
  const fs::path data_dir = a.data.empty() ? dir : fs::path(a.data);
  const auto g = cfg.geometry();

  const auto train = io::load_dataset(data_dir / "train.bdgd");
  require_geometry(train.manifest.geometry, g, "training data");

  train::GreedyOptions options;
  options.config_snapshot = io::format_run_config(cfg);
  const fs::path val_path = data_dir / "validation.bdgd";
  if (fs::exists(val_path) && cfg.validation_count > 0) {
    auto val = io::load_dataset(val_path);
    require_geometry(val.manifest.geometry, g, "validation data");
    if (val.records.size() > cfg.validation_count) val.records.resize(cfg.validation_count);
    options.validation = std::move(val.records);
  }
  if (!a.resume.empty()) {
    auto resumed = io::load_checkpoint(a.resume);
    // Where the files go is not part of the model.
    io::RunConfig earlier = io::parse_run_config(resumed.config_snapshot);
    earlier.output_dir = cfg.output_dir;
    if (!(earlier == cfg))
      throw ConfigError("--resume: " + a.resume + " was trained with a different configuration");
    resumed.config_snapshot = options.config_snapshot;
    out << "resuming after block " << resumed.depth() << "\n";
    options.resume = std::move(resumed);
  }
  options.on_block = [&](const model::Cascade& cascade) {
    const auto k = cascade.depth();
    io::save_checkpoint(dir / ("block_" + std::to_string(k) + ".ckpt"), cascade);
    out << "block " << k << "/" << cfg.train.blocks << " trained, sigma^2 = " << cascade.blocks.back().sigma2()
        << "\n"
        << std::flush;
  };

  train::TrainingReport report;
  const auto start = std::chrono::steady_clock::now();
  const auto cascade = train::greedy_train(train.records, g, cfg.block, cfg.train, options, report);
  io::save_checkpoint(dir / "cascade.ckpt", cascade);

  io::Table table({"block", "epoch", "loss", "validation_psnr"});
  for (const auto& e : report.epochs)
    table.add({std::to_string(e.block), std::to_string(e.epoch), format_double(e.loss),
               e.validation_psnr ? infer::format_psnr(*e.validation_psnr) : ""});
  table.write(dir / "training_report.tsv");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << "trained " << cascade.depth() << " blocks (" << model::to_string(cfg.block.mode) << ", "
      << model::count_parameters(cascade).total << " parameters) in " << seconds << " s; wrote "
      << (dir / "cascade.ckpt").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string checkpoint;
  std::string data;
  std::string sinogram;
  std::size_t record = 0;
  int samples = 0;
  bool per_block = false;
  bool keep_samples = false;
};

int cmd_reconstruct(const Common& c, const ReconstructArgs& a, std::ostream& out) {
  const auto cascade = io::load_checkpoint(a.checkpoint);
  const io::RunConfig run = io::parse_run_config(cascade.config_snapshot);
  const auto& g = cascade.geometry;
  const int T = a.samples > 0 ? a.samples : run.samples;
  const std::uint64_t seed = c.has_seed ? c.seed : run.seeds.front();
  const fs::path dir = prepare_dir(c.out.empty() ? run.output_dir : c.out);

  tomo::Sinogram y;
  Image x0, truth;
  if (!a.sinogram.empty()) {
    const std::string bytes = io::read_file(a.sinogram);
    const std::size_t n = std::size_t(g.num_angles()) * g.detector_count;
    if (bytes.size() != 4 * n)
      throw DataError(a.sinogram + ": expected " + std::to_string(n) + " f32 values (" +
                      std::to_string(g.num_angles()) + " x " + std::to_string(g.detector_count) + ")");
    io::ByteReader r(bytes, a.sinogram);
    y = tomo::Sinogram(g.num_angles(), g.detector_count);
    y.values = r.f32s(n);
    x0 = tomo::fbp(y, g);
  } else {
    if (a.data.empty()) throw ConfigError("reconstruct: give --data (with --record) or --sinogram");
    const auto ds = io::load_dataset(a.data);
    require_geometry(ds.manifest.geometry, g, a.data);
    if (a.record >= ds.records.size())
      throw DataError(a.data + ": record " + std::to_string(a.record) + " out of range (" +
                      std::to_string(ds.records.size()) + " records)");
    const auto& rec = ds.records[a.record];
    y = rec.sinogram;
    x0 = rec.x0;
    truth = rec.ground_truth;
  }

  const auto start = std::chrono::steady_clock::now();
  const auto stack = infer::mc_reconstruct(y, x0, cascade, T, seed, a.per_block);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const float sigma2 = cascade.final_sigma2();
  const auto summary = infer::summarize(stack, sigma2, a.keep_samples);

  io::export_image(dir / "x0", x0);
  io::export_image(dir / "mean", summary.mean);
  io::export_variance(dir / "variance", summary.pixel_variance);
  if (a.per_block)
    for (std::size_t k = 0; k < stack.per_block.size(); ++k) {
      const std::string stem = "block_" + std::to_string(k + 1);
      io::export_image(dir / (stem + "_mean"), infer::posterior_mean(stack.per_block[k]));
      io::export_variance(dir / (stem + "_variance"),
                          infer::posterior_pixel_variance(stack.per_block[k], cascade.blocks[k].sigma2()));
    }
  if (a.keep_samples) {
    io::ByteWriter w;
    for (const auto& s : summary.samples) w.f32s(s.values);
    io::write_file(dir / "samples.f32", w.data());
  }

  double mean_var = 0.0;
  for (float v : summary.pixel_variance.values) mean_var += v;
  mean_var /= static_cast<double>(summary.pixel_variance.size());
  const bool have_truth = truth.size() > 0;
  io::Table metrics({"record", "samples", "seed", "sigma2_K", "mean_variance", "psnr_x0", "psnr_mean"});
  metrics.add({a.sinogram.empty() ? std::to_string(a.record) : "-", std::to_string(T), std::to_string(seed),
               format_double(sigma2), format_double(mean_var),
               have_truth ? infer::format_psnr(infer::psnr(x0, truth)) : "",
               have_truth ? infer::format_psnr(infer::psnr(summary.mean, truth)) : ""});
  metrics.write(dir / "metrics.tsv");
  out << "reconstructed with T = " << T << " samples in " << seconds << " s";
  if (have_truth) out << ", PSNR " << infer::format_psnr(infer::psnr(summary.mean, truth)) << " dB";
  out << "\n";
  return kOk;
}

// ---------------------------------------------------------------- baseline

struct BaselineArgs {
  std::string kind;
  std::string data;
  std::string tune;
  long record = -1;
  double lambda = 0.0;
};

double choose_lambda(const io::RunConfig& cfg, double flag, const std::string& tune_path,
                     const tomo::Geometry& g, const fs::path& dir, std::ostream& out) {
  if (flag > 0.0) return flag;
  if (cfg.tv_lambda > 0.0) return cfg.tv_lambda;
  auto tune = io::load_dataset(tune_path);
  require_geometry(tune.manifest.geometry, g, tune_path);
  if (tune.records.size() > cfg.grid_records) tune.records.resize(cfg.grid_records);
  const auto base = baselines::TVConfig::for_geometry(g, 1.0, cfg.tv_iterations);
  const auto grid = baselines::grid_search_lambda(tune.records, baselines::logspace(cfg.grid_min, cfg.grid_max,
                                                                                    cfg.grid_points),
                                                  g, base);
  io::Table table({"lambda", "mean_psnr", "std_psnr"});
  for (const auto& row : grid.table)
    table.add({format_double(row.lambda), infer::format_psnr(row.mean_psnr), format_double(row.std_psnr)});
  table.write(dir / "tv_grid.tsv");
  out << "grid search over " << grid.table.size() << " values selected lambda = " << grid.best_lambda << "\n";
  return grid.best_lambda;
}

int cmd_baseline(const Common& c, const BaselineArgs& a, std::ostream& out) {
  io::RunConfig cfg = load_config(c);
  cfg.validate();
  const fs::path dir = prepare_dir(cfg.output_dir);
  const auto ds = io::load_dataset(a.data);
  const auto& g = ds.manifest.geometry;

  std::vector<std::size_t> indices;
  if (a.record >= 0) {
    if (static_cast<std::size_t>(a.record) >= ds.records.size())
      throw DataError(a.data + ": record " + std::to_string(a.record) + " out of range");
    indices.push_back(static_cast<std::size_t>(a.record));
  } else {
    for (std::size_t i = 0; i < ds.records.size(); ++i) indices.push_back(i);
  }

  const bool tv = a.kind == "tv";
  baselines::TVConfig tv_cfg;
  if (tv) {
    const double lambda = choose_lambda(cfg, a.lambda, a.tune.empty() ? a.data : a.tune, g, dir, out);
    tv_cfg = baselines::TVConfig::for_geometry(g, lambda, cfg.tv_iterations);
  }

  io::Table metrics({"kind", "record", "lambda", "psnr"});
  std::vector<double> scores;
  for (std::size_t i : indices) {
    const auto& r = ds.records[i];
    Image x;
    if (tv) {
      auto res = baselines::tv_reconstruct(r.sinogram, g, tv_cfg);
      x = std::move(res.image);
      if (indices.size() == 1) {
        io::Table trace({"iteration", "objective"});
        for (std::size_t it = 0; it < res.objective.size(); ++it)
          trace.add({std::to_string(it + 1), format_double(res.objective[it])});
        trace.write(dir / "tv_objective.tsv");
      }
    } else {
      x = tomo::fbp(r.sinogram, g, ds.manifest.filter);
    }
    const double p = infer::psnr(x, r.ground_truth);
    scores.push_back(p);
    metrics.add({a.kind, std::to_string(i), tv ? format_double(tv_cfg.lambda) : "", infer::format_psnr(p)});
    if (indices.size() == 1) io::export_image(dir / a.kind, x);
  }
  metrics.write(dir / (a.kind + "_metrics.tsv"));
  const auto ms = infer::mean_std(scores);
  out << a.kind << ": mean PSNR " << infer::format_psnr(ms.mean) << " dB over " << scores.size() << " records\n";
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string data;
  std::string tune;
  std::vector<std::string> checkpoints;
  std::vector<std::uint64_t> seeds;
  int samples = 0;
  bool per_block = false;
  bool baselines = false;
  double lambda = 0.0;
};

int cmd_evaluate(const Common& c, const EvaluateArgs& a, std::ostream& out) {
  io::RunConfig cfg = load_config(c);
  cfg.validate();
  const fs::path dir = prepare_dir(cfg.output_dir);
  const auto ds = io::load_dataset(a.data);
  const auto& g = ds.manifest.geometry;
  const std::string dataset = fs::path(a.data).stem().string();
  const int T = a.samples > 0 ? a.samples : cfg.samples;
  std::vector<std::uint64_t> seeds = a.seeds;
  if (c.has_seed) seeds.insert(seeds.begin(), c.seed);
  if (seeds.empty()) seeds = cfg.seeds;

  struct Method {
    std::string name;
    std::vector<double> values;
  };
  std::vector<Method> methods;
  auto method = [&](const std::string& name) -> Method& {
    for (auto& m : methods)
      if (m.name == name) return m;
    methods.push_back({name, {}});
    return methods.back();
  };

  if (a.baselines) {
    std::vector<double> fbp_scores, tv_scores;
    const double lambda = choose_lambda(cfg, a.lambda, a.tune.empty() ? a.data : a.tune, g, dir, out);
    const auto tv_cfg = baselines::TVConfig::for_geometry(g, lambda, cfg.tv_iterations);
    for (const auto& r : ds.records) {
      fbp_scores.push_back(infer::psnr(r.x0, r.ground_truth));
      tv_scores.push_back(infer::psnr(baselines::tv_reconstruct(r.sinogram, g, tv_cfg).image, r.ground_truth));
    }
    method("FBP").values.push_back(infer::mean_std(fbp_scores).mean);
    method("TV").values.push_back(infer::mean_std(tv_scores).mean);
  }

  io::Table per_block({"method", "checkpoint", "seed", "record", "block", "psnr"});
  for (const auto& spec : a.checkpoints) {
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const auto cascade = io::load_checkpoint(path);
    require_geometry(g, cascade.geometry, a.data);
    const std::string name = eq == std::string::npos ? method_name(cascade.config.mode) : spec.substr(0, eq);
    const auto eval = infer::evaluate(cascade, ds.records, T, seeds);
    auto& m = method(name);
    m.values.insert(m.values.end(), eval.per_seed_mean.begin(), eval.per_seed_mean.end());
    for (const auto& row : eval.rows)
      per_block.add({name, fs::path(path).filename().string(), std::to_string(row.seed), std::to_string(row.record),
                     std::to_string(row.block), infer::format_psnr(row.psnr)});
    out << name << " (" << path << "): " << infer::format_psnr(infer::mean_std(eval.per_seed_mean).mean)
        << " dB\n";
  }
  if (methods.empty()) throw ConfigError("evaluate: nothing to compare (give --checkpoint and/or --baselines)");

  io::Table table({"method", "dataset", "psnr_mean", "psnr_std", "runs"});
  for (const auto& m : methods) {
    const auto ms = infer::mean_std(m.values);
    table.add({m.name, dataset, infer::format_psnr(ms.mean), infer::format_psnr(ms.std),
               std::to_string(m.values.size())});
  }
  table.write(dir / "comparison.tsv");
  if (a.per_block && per_block.rows() > 0) per_block.write(dir / "per_block.tsv");
  out << table.str();
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian unrolled gradient-descent reconstruction for sparse-view CT", "bdgd"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  Common common;
  auto* generate = app.add_subcommand("generate", "Simulate training and validation datasets");
  add_common(*generate, common, false);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a cascade block by block");
  add_common(*train, common, true);
  train->add_option("--data", train_args.data, "Directory holding train.bdgd (default: output directory)");
  train->add_option("--resume", train_args.resume, "Checkpoint of leading blocks to continue from");

  ReconstructArgs rec_args;
  auto* reconstruct = app.add_subcommand("reconstruct", "Monte Carlo reconstruction with uncertainty");
  add_common(*reconstruct, common, false);
  reconstruct->add_option("--checkpoint", rec_args.checkpoint, "Trained cascade")->required();
  reconstruct->add_option("--data", rec_args.data, "Dataset container");
  reconstruct->add_option("--record", rec_args.record, "Record index within --data");
  reconstruct->add_option("--sinogram", rec_args.sinogram, "Raw f32 sinogram instead of a dataset record");
  reconstruct->add_option("--samples,-T", rec_args.samples, "Number of Monte Carlo samples T");
  reconstruct->add_flag("--per-block", rec_args.per_block, "Export mean and variance after every block");
  reconstruct->add_flag("--keep-samples", rec_args.keep_samples, "Write the full sample stack");

  BaselineArgs base_args;
  auto* baseline = app.add_subcommand("baseline", "Classical reconstructions (fbp or tv)");
  add_common(*baseline, common, false);
  baseline->add_option("kind", base_args.kind, "fbp or tv")->required()->check(CLI::IsMember({"fbp", "tv"}));
  baseline->add_option("--data", base_args.data, "Dataset container")->required();
  baseline->add_option("--record", base_args.record, "Single record (default: all)");
  baseline->add_option("--lambda", base_args.lambda, "TV weight; skips the grid search");
  baseline->add_option("--tune", base_args.tune, "Dataset for the lambda grid search (default: --data)");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "PSNR comparison table over methods and seeds");
  add_common(*evaluate, common, false);
  evaluate->add_option("--data", eval_args.data, "Evaluation dataset container")->required();
  evaluate->add_option("--checkpoint", eval_args.checkpoints, "[NAME=]PATH, repeatable; equal names pool runs");
  evaluate->add_option("--seeds", eval_args.seeds, "Inference seeds")->delimiter(',');
  evaluate->add_option("--samples,-T", eval_args.samples, "Number of Monte Carlo samples T");
  evaluate->add_flag("--per-block", eval_args.per_block, "Write per-block PSNR for every record");
  evaluate->add_flag("--baselines", eval_args.baselines, "Include FBP and TV rows");
  evaluate->add_option("--lambda", eval_args.lambda, "TV weight; skips the grid search");
  evaluate->add_option("--tune", eval_args.tune, "Dataset for the lambda grid search (default: --data)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) return cmd_generate(common, out);
    if (*train) return cmd_train(common, train_args, out);
    if (*reconstruct) return cmd_reconstruct(common, rec_args, out);
    if (*baseline) return cmd_baseline(common, base_args, out);
    if (*evaluate) return cmd_evaluate(common, eval_args, out);
  } catch (const NumericalError& e) {
    err << "bdgd: numerical divergence: " << e.what() << "\n";
    return kDiverged;
  } catch (const DataError& e) {
    err << "bdgd: data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {  // ConfigError, ShapeError
    err << "bdgd: configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "bdgd: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"bdgd"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace bdgd::cli
