#include <doctest.h>

#include <sstream>

#include "bdgd/io/binary.hpp"
#include "bdgd/io/checkpoint.hpp"
#include "bdgd/io/config.hpp"
#include "bdgd/io/dataset_file.hpp"
#include "bdgd/io/export.hpp"
#include "bdgd/tomo/radon.hpp"
#include "bdgd/train/train.hpp"
#include "commands.hpp"
#include "tempdir.hpp"

using namespace bdgd;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"([geometry]
mode = sparse
angles = 8
image_size = 16

[data]
train_count = 4
validation_count = 2
seed = 5

[model]
branch_channels = 4
merge_channels = 6
feature_channels = 4

[train]
blocks = 1
epochs_per_block = 1
batch_size = 2

[inference]
samples = 2
seeds = 1

[tv]
iterations = 20
grid_points = 2
grid_records = 1
)";

struct Run {
  int code = -1;
  std::string out, err;
};

Run tool(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct Workspace {
  TempDir tmp;
  fs::path config = tmp / "run.ini";

  explicit Workspace(const std::string& extra = "") { io::write_file(config, kConfig + extra); }
  std::string dir(const std::string& name) const { return (tmp / name).string(); }

  Run generate(const std::string& out) { return tool({"generate", "--config", config.string(), "--out", dir(out)}); }
  Run train(const std::string& out, std::vector<std::string> more = {}) {
    std::vector<std::string> args{"train", "--config", config.string(), "--out", dir(out)};
    args.insert(args.end(), more.begin(), more.end());
    return tool(args);
  }
};

std::string slurp(const fs::path& p) { return io::read_file(p); }

}  // namespace

TEST_CASE("generate") {
  Workspace w;
  const auto r = w.generate("a");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const fs::path a = w.dir("a");

  const auto header = io::read_dataset_header(slurp(a / "train.bdgd"));
  CHECK(header.count == 4);
  CHECK(header.height == 16);
  CHECK(header.width == 16);
  CHECK(io::read_dataset_header(slurp(a / "validation.bdgd")).count == 2);

  const auto cfg = io::load_run_config(w.config);
  CHECK(io::load_dataset(a / "train.bdgd").manifest.geometry == cfg.geometry());
  CHECK(io::load_run_config(a / "run.ini").geometry() == cfg.geometry());

  SUBCASE("rerun is byte-identical") {
    REQUIRE(w.generate("b").code == 0);
    const fs::path b = w.dir("b");
    for (const char* f : {"train.bdgd", "train.bdgd.manifest.json", "validation.bdgd", "validation.bdgd.manifest.json"})
      CHECK(slurp(a / f) == slurp(b / f));
  }
  SUBCASE("--seed changes the data") {
    REQUIRE(tool({"generate", "--config", w.config.string(), "--out", w.dir("c"), "--seed", "9"}).code == 0);
    CHECK(slurp(a / "train.bdgd") != slurp(fs::path(w.dir("c")) / "train.bdgd"));
    CHECK(io::load_dataset(fs::path(w.dir("c")) / "train.bdgd").manifest.seed == 9);
  }
}

TEST_CASE("train") {
  Workspace w;
  REQUIRE(w.generate("run").code == 0);
  const fs::path run = w.dir("run");

  SUBCASE("K = 1 smoke run writes a loadable checkpoint and a report") {
    const auto r = w.train("run");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto cascade = io::load_checkpoint(run / "cascade.ckpt");
    CHECK(cascade.depth() == 1);
    CHECK(cascade.config.mode == model::BayesMode::mfvi);
    CHECK(fs::exists(run / "block_1.ckpt"));
    const auto report = io::Table::parse(slurp(run / "training_report.tsv"));
    CHECK(report.header() == std::vector<std::string>{"block", "epoch", "loss", "validation_psnr"});
    REQUIRE(report.rows() == 1);
    CHECK_FALSE(report.data()[0][3].empty());
  }
  SUBCASE("deterministic mode trains the plain unrolled comparator") {
    REQUIRE(w.train("run", {"--mode", "deterministic"}).code == 0);
    const auto cascade = io::load_checkpoint(run / "cascade.ckpt");
    CHECK(cascade.config.mode == model::BayesMode::deterministic);
    CHECK(cascade.blocks[0].named().size() == 11);
  }
  SUBCASE("resuming after block 1 of 2 matches the uninterrupted run") {
    Workspace two;
    auto cfg = io::load_run_config(two.config);
    cfg.train.blocks = 2;
    cfg.train.epochs_per_block = 2;
    io::write_file(two.config, io::format_run_config(cfg));
    REQUIRE(two.generate("full").code == 0);
    REQUIRE(two.train("full").code == 0);
    const fs::path full = two.dir("full");

    // A second run that stopped after block 1, continued elsewhere.
    const auto r = tool({"train", "--config", two.config.string(), "--out", two.dir("resumed"), "--data",
                         full.string(), "--resume", (full / "block_1.ckpt").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("resuming after block 1") != std::string::npos);
    const auto a = io::load_checkpoint(full / "cascade.ckpt");
    const auto b = io::load_checkpoint(fs::path(two.dir("resumed")) / "cascade.ckpt");
    REQUIRE(b.depth() == 2);
    for (std::size_t k = 0; k < 2; ++k) CHECK(train::checksum(a.blocks[k]) == train::checksum(b.blocks[k]));

    // Same output directory: the final checkpoint is byte-identical.
    const std::string before = slurp(full / "cascade.ckpt");
    REQUIRE(two.train("full", {"--resume", (full / "block_1.ckpt").string()}).code == 0);
    CHECK(slurp(full / "cascade.ckpt") == before);
  }
  SUBCASE("resume refuses a different configuration") {
    REQUIRE(w.train("run").code == 0);
    const auto r = w.train("run", {"--resume", (run / "cascade.ckpt").string(), "--seed", "77"});
    CHECK(r.code == 1);
    CHECK(r.err.find("different configuration") != std::string::npos);
  }
}

TEST_CASE("reconstruct") {
  Workspace w;
  REQUIRE(w.generate("run").code == 0);
  REQUIRE(w.train("run").code == 0);
  const fs::path run = w.dir("run");
  const std::string ckpt = (run / "cascade.ckpt").string();

  SUBCASE("T = 1 emits both maps and a metrics row") {
    const auto r = tool({"reconstruct", "--checkpoint", ckpt, "--data", (run / "validation.bdgd").string(),
                         "--record", "1", "-T", "1", "--out", w.dir("rec")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const fs::path rec = w.dir("rec");
    for (const char* f : {"mean.pgm", "mean.f32", "variance.pgm", "variance.f32", "variance_normalized.f32", "x0.f32",
                          "metrics.tsv"})
      CHECK_MESSAGE(fs::exists(rec / f), f);
    const auto metrics = io::Table::parse(slurp(rec / "metrics.tsv"));
    REQUIRE(metrics.rows() == 1);
    CHECK(metrics.data()[0][0] == "1");
    CHECK(metrics.data()[0][1] == "1");
  }
  SUBCASE("per-block maps on request") {
    REQUIRE(tool({"reconstruct", "--checkpoint", ckpt, "--data", (run / "train.bdgd").string(), "--per-block",
                  "--keep-samples", "--out", w.dir("rec")})
                .code == 0);
    CHECK(fs::exists(fs::path(w.dir("rec")) / "block_1_mean.f32"));
    CHECK(fs::exists(fs::path(w.dir("rec")) / "block_1_variance.f32"));
    CHECK(fs::file_size(fs::path(w.dir("rec")) / "samples.f32") == 2 * 16 * 16 * 4);
  }
  SUBCASE("a zero-variance checkpoint yields variance == sigma_K^2") {
    auto cascade = io::load_checkpoint(ckpt);
    for (auto& b : cascade.blocks)
      for (auto t : {b.theta.rho.weight, b.theta.rho.bias})
        for (auto& v : t.mutable_data()) v = -60.0f;
    io::save_checkpoint(run / "flat.ckpt", cascade);
    REQUIRE(tool({"reconstruct", "--checkpoint", (run / "flat.ckpt").string(), "--data",
                  (run / "train.bdgd").string(), "-T", "4", "--out", w.dir("flat")})
                .code == 0);
    const auto var = io::decode_f32(slurp(fs::path(w.dir("flat")) / "variance.f32"), 16, 16);
    for (float v : var.values) CHECK(v == doctest::Approx(cascade.final_sigma2()).epsilon(1e-5));
  }
  SUBCASE("raw sinogram input") {
    const auto ds = io::load_dataset(run / "train.bdgd");
    io::ByteWriter bytes;
    bytes.f32s(ds.records[0].sinogram.values);
    io::write_file(run / "y.f32", bytes.data());
    REQUIRE(tool({"reconstruct", "--checkpoint", ckpt, "--sinogram", (run / "y.f32").string(), "--out",
                  w.dir("raw")})
                .code == 0);
    CHECK(io::Table::parse(slurp(fs::path(w.dir("raw")) / "metrics.tsv")).data()[0][0] == "-");
    io::write_file(run / "short.f32", "abcd");
    CHECK(tool({"reconstruct", "--checkpoint", ckpt, "--sinogram", (run / "short.f32").string()}).code == 2);
  }
  SUBCASE("reconstruction is deterministic") {
    for (const char* out : {"r1", "r2"})
      REQUIRE(tool({"reconstruct", "--checkpoint", ckpt, "--data", (run / "train.bdgd").string(), "--out",
                    w.dir(out)})
                  .code == 0);
    for (const char* f : {"mean.f32", "variance.f32", "variance.pgm", "metrics.tsv"})
      CHECK(slurp(fs::path(w.dir("r1")) / f) == slurp(fs::path(w.dir("r2")) / f));
  }
}

TEST_CASE("baseline") {
  Workspace w;
  REQUIRE(w.generate("run").code == 0);
  const fs::path run = w.dir("run");
  const std::string data = (run / "validation.bdgd").string();

  SUBCASE("fbp reproduces the stored initial guess") {
    REQUIRE(tool({"baseline", "fbp", "--config", w.config.string(), "--data", data, "--record", "1", "--out",
                  w.dir("fbp")})
                .code == 0);
    const auto x = io::decode_f32(slurp(fs::path(w.dir("fbp")) / "fbp.f32"), 16, 16);
    const auto x0 = io::load_dataset(data).records[1].x0;
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x.values[i] - x0.values[i]) <= 1e-6);
    const auto metrics = io::Table::parse(slurp(fs::path(w.dir("fbp")) / "fbp_metrics.tsv"));
    CHECK(metrics.data()[0][0] == "fbp");
  }
  SUBCASE("tv with --lambda skips the grid search") {
    REQUIRE(tool({"baseline", "tv", "--config", w.config.string(), "--data", data, "--lambda", "0.01", "--out",
                  w.dir("tv")})
                .code == 0);
    CHECK_FALSE(fs::exists(fs::path(w.dir("tv")) / "tv_grid.tsv"));
    const auto metrics = io::Table::parse(slurp(fs::path(w.dir("tv")) / "tv_metrics.tsv"));
    REQUIRE(metrics.rows() == 2);
    CHECK(metrics.data()[0][0] == "tv");
    CHECK(metrics.data()[0][2] == "0.01");
  }
  SUBCASE("tv without lambda searches the grid on the tuning set") {
    REQUIRE(tool({"baseline", "tv", "--config", w.config.string(), "--data", data, "--tune",
                  (run / "train.bdgd").string(), "--record", "0", "--out", w.dir("tv")})
                .code == 0);
    const auto grid = io::Table::parse(slurp(fs::path(w.dir("tv")) / "tv_grid.tsv"));
    CHECK(grid.rows() == 2);
    CHECK(fs::exists(fs::path(w.dir("tv")) / "tv_objective.tsv"));
    CHECK(fs::exists(fs::path(w.dir("tv")) / "tv.pgm"));
  }
}

TEST_CASE("evaluate") {
  Workspace w;
  REQUIRE(w.generate("run").code == 0);
  REQUIRE(w.train("run").code == 0);
  REQUIRE(w.train("det", {"--mode", "deterministic", "--data", w.dir("run")}).code == 0);
  const fs::path run = w.dir("run");
  const std::string data = (run / "validation.bdgd").string();

  SUBCASE("one method, one seed: one row with std 0") {
    REQUIRE(tool({"evaluate", "--config", w.config.string(), "--data", data, "--checkpoint",
                  (run / "cascade.ckpt").string(), "--out", w.dir("ev")})
                .code == 0);
    const auto t = io::Table::parse(slurp(fs::path(w.dir("ev")) / "comparison.tsv"));
    REQUIRE(t.rows() == 1);
    CHECK(t.data()[0][0] == "BDGD-MFVI");
    CHECK(t.data()[0][1] == "validation");
    CHECK(t.data()[0][3] == "0.000000");
  }
  SUBCASE("full row set and per-block export") {
    const auto r = tool({"evaluate", "--config", w.config.string(), "--data", data, "--baselines", "--lambda", "0.01",
                         "--checkpoint", (fs::path(w.dir("det")) / "cascade.ckpt").string(), "--checkpoint",
                         (run / "cascade.ckpt").string(), "--checkpoint",
                         "BDGD-MFVI=" + (run / "cascade.ckpt").string(), "--seeds", "1,2", "--per-block", "--out",
                         w.dir("ev")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto t = io::Table::parse(slurp(fs::path(w.dir("ev")) / "comparison.tsv"));
    std::vector<std::string> names;
    for (const auto& row : t.data()) names.push_back(row[0]);
    CHECK(names == std::vector<std::string>{"FBP", "TV", "DGD", "BDGD-MFVI"});
    CHECK(t.data()[3][4] == "4");  // two checkpoints pooled, two seeds each
    const auto pb = io::Table::parse(slurp(fs::path(w.dir("ev")) / "per_block.tsv"));
    // 3 checkpoints x 2 seeds x 2 records x blocks {0, 1}
    CHECK(pb.rows() == 24);
  }
}

TEST_CASE("exit codes") {
  Workspace w;
  CHECK(tool({}).code == 1);
  CHECK(tool({"frobnicate"}).code == 1);
  CHECK(tool({"generate", "--bogus"}).code == 1);
  CHECK(tool({"train", "--mode", "bayes"}).code == 1);
  CHECK(tool({"--help"}).code == 0);

  io::write_file(w.tmp / "bad.ini", "[train]\nblockz = 2\n");
  const auto bad = tool({"generate", "--config", (w.tmp / "bad.ini").string(), "--out", w.dir("x")});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("blockz") != std::string::npos);

  CHECK(tool({"train", "--config", w.config.string(), "--out", w.dir("empty")}).code == 2);
  CHECK(tool({"reconstruct", "--checkpoint", w.dir("missing.ckpt")}).code == 2);
  io::write_file(w.tmp / "junk.ckpt", "BDGDCKPT\x02");
  CHECK(tool({"reconstruct", "--checkpoint", w.dir("junk.ckpt")}).code == 2);

  SUBCASE("geometry mismatch is a data error") {
    REQUIRE(w.generate("run").code == 0);
    auto cfg = io::load_run_config(w.config);
    cfg.angles = 9;
    io::write_file(w.tmp / "other.ini", io::format_run_config(cfg));
    CHECK(tool({"train", "--config", (w.tmp / "other.ini").string(), "--out", w.dir("run")}).code == 2);
  }
  SUBCASE("divergence") {
    REQUIRE(w.generate("run").code == 0);
    auto cfg = io::load_run_config(w.config);
    cfg.train.adam.lr = 1e6;
    cfg.train.epochs_per_block = 50;
    io::write_file(w.tmp / "hot.ini", io::format_run_config(cfg));
    const auto r = tool({"train", "--config", (w.tmp / "hot.ini").string(), "--out", w.dir("run")});
    CHECK(r.code == 3);
    CHECK(r.err.find("divergence") != std::string::npos);
  }
}
