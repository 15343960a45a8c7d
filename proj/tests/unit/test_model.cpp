#include <doctest.h>

#include <cmath>

#include "bdgd/errors.hpp"
#include "bdgd/model/cascade.hpp"
#include "bdgd/ndgrad/ops.hpp"
#include "bdgd/tomo/radon.hpp"
#include "bdgd/train/train.hpp"
#include "oracles.hpp"
#include "stats.hpp"

using namespace bdgd;
using model::BayesMode;
using model::BlockConfig;
using ndgrad::Tensor;
namespace nd = bdgd::ndgrad;

namespace {

double inverse_softplus(double s) { return std::log(std::expm1(s)); }

model::VariationalConvParams single_weight(double mu, double sigma) {
  model::VariationalConvParams p;
  p.mu = {Tensor::full({1, 1, 1, 1}, float(mu), true), Tensor::zeros({1}, true)};
  p.rho = {Tensor::full({1, 1, 1, 1}, float(inverse_softplus(sigma)), true),
           Tensor::full({1}, float(inverse_softplus(1.0)), true)};
  return p;
}

Tensor batch(int n, int h, int w, Rng& rng, double lo, double hi) {
  return Tensor::from({n, 1, h, w}, oracle::random_values(std::size_t(n * h * w), rng, lo, hi));
}

}  // namespace

TEST_CASE("parse and print modes") {
  CHECK(model::parse_bayes_mode("mfvi") == BayesMode::mfvi);
  CHECK(model::parse_bayes_mode("mcdo") == BayesMode::mcdo);
  CHECK(model::parse_bayes_mode("deterministic") == BayesMode::deterministic);
  CHECK(model::to_string(BayesMode::mcdo) == "mcdo");
  CHECK_THROWS_AS(model::parse_bayes_mode("bayes"), ConfigError);
}

TEST_CASE("block config validation") {
  BlockConfig c;
  c.kernel_size = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = BlockConfig{};
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = BlockConfig{};
  c.merge_channels = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("block_features") {
  Rng rng(1);
  const BlockConfig c = BlockConfig::desk();
  auto block = model::init_block(c, rng);

  SUBCASE("zero inputs with zero biases give zero features") {
    auto f = model::block_features(Tensor::zeros({2, 1, 8, 8}), Tensor::zeros({2, 1, 8, 8}), block, c);
    for (float v : f.data()) CHECK(v == 0.0f);
  }
  SUBCASE("spatial shape is preserved") {
    for (auto [h, w] : {std::pair{5, 7}, std::pair{16, 16}, std::pair{9, 40}}) {
      auto f = model::block_features(batch(1, h, w, rng, 0, 1), batch(1, h, w, rng, -1, 1), block, c);
      CHECK(f.shape() == ndgrad::Shape{1, c.feature_channels, h, w});
    }
  }
  SUBCASE("matches a straight-line reimplementation") {
    for (auto& [name, t] : block.named())
      for (auto& v : t.mutable_data()) v += static_cast<float>(rng.uniform(-0.05, 0.05));
    auto x = batch(1, 8, 8, rng, 0, 1), g = batch(1, 8, 8, rng, -1, 1);
    auto f = model::block_features(x, g, block, c);
    auto d = [](const Tensor& t) { return std::vector<double>(t.data().begin(), t.data().end()); };
    const int k = c.kernel_size, p = c.padding();
    auto a = oracle::relu(oracle::conv(oracle::to_array(x), d(block.branch_image.weight), d(block.branch_image.bias),
                                       c.branch_channels, k, p));
    auto b = oracle::relu(oracle::conv(oracle::to_array(g), d(block.branch_gradient.weight),
                                       d(block.branch_gradient.bias), c.branch_channels, k, p));
    oracle::Array4 cat(1, 2 * c.branch_channels, 8, 8);
    std::copy(a.v.begin(), a.v.end(), cat.v.begin());
    std::copy(b.v.begin(), b.v.end(), cat.v.begin() + std::ptrdiff_t(a.v.size()));
    auto h = oracle::relu(oracle::conv(cat, d(block.merge_in.weight), d(block.merge_in.bias), c.merge_channels, k, p));
    auto ref = oracle::relu(
        oracle::conv(h, d(block.merge_out.weight), d(block.merge_out.bias), c.feature_channels, k, p));
    REQUIRE(ref.v.size() == std::size_t(f.numel()));
    for (std::size_t i = 0; i < ref.v.size(); ++i) CHECK(std::abs(f.data()[i] - ref.v[i]) < 1e-5);
  }
  SUBCASE("mismatched inputs are rejected") {
    CHECK_THROWS_AS(model::block_features(Tensor::zeros({1, 1, 8, 8}), Tensor::zeros({1, 1, 8, 7}), block, c),
                    ShapeError);
  }
}

TEST_CASE("local reparameterization") {
  Rng rng(2);
  auto features = Tensor::from({2, 3, 5, 5}, oracle::random_values(150, rng, 0, 1));
  auto p = stats::random_variational(1, 3, 3, rng);

  SUBCASE("vanishing sigma gives the mean convolution") {
    for (auto t : {p.rho.weight, p.rho.bias})
      for (auto& v : t.mutable_data()) v = -40.0f;
    auto y = model::bayes_conv_lr(features, p, rng, 1);
    auto m = nd::conv2d(features, p.mu.weight, p.mu.bias, 1);
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(m.data()[i]).epsilon(1e-5));
  }
  SUBCASE("moments match the analytic pre-activations and weight sampling") {
    const auto r = stats::local_reparam_agreement(100000, 3);
    CHECK(r.max_z_analytic_mean < 3.0);
    CHECK(r.max_z_analytic_variance < 3.0);
    CHECK(r.max_z_mean < 3.0);
    CHECK(r.max_z_variance < 3.0);
  }
  SUBCASE("noise of the wrong shape is rejected") {
    CHECK_THROWS_AS(model::bayes_conv_lr(features, p, Tensor::zeros({1, 1, 5, 5}), 1), ShapeError);
  }
}

TEST_CASE("KL to the standard normal") {
  CHECK(model::kl_to_std_normal(single_weight(0.0, 1.0)).item() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(std::abs(model::kl_to_std_normal(single_weight(0.0, 1.0)).item()) < 1e-6);
  CHECK(std::abs(model::kl_to_std_normal(single_weight(1.0, 1.0)).item() - 0.5) < 1e-6);
  CHECK(std::abs(model::kl_to_std_normal(single_weight(0.0, std::sqrt(std::exp(1.0)))).item() -
                 0.5 * (std::exp(1.0) - 2.0)) < 1e-6);

  SUBCASE("nonnegative, and increasing in |mu| at fixed sigma") {
    Rng rng(4);
    auto p = stats::random_variational(2, 3, 3, rng);
    double previous = model::kl_to_std_normal(p).item();
    CHECK(previous >= 0.0);
    for (int step = 0; step < 5; ++step) {
      for (auto t : {p.mu.weight, p.mu.bias})
        for (auto& v : t.mutable_data()) v *= 1.3f;
      const double kl = model::kl_to_std_normal(p).item();
      CHECK(kl > previous);
      previous = kl;
    }
  }
  SUBCASE("Monte Carlo estimate agrees") {
    Rng rng(5);
    const auto r = stats::kl_monte_carlo(stats::random_variational(1, 2, 3, rng), 100000, 6);
    CHECK(r.z < 3.0);
  }
}

TEST_CASE("block_apply") {
  Rng rng(6);
  BlockConfig c = BlockConfig::desk(BayesMode::deterministic);
  auto block = model::init_block(c, rng);
  auto x = batch(1, 8, 8, rng, 0, 1), g = batch(1, 8, 8, rng, -1, 1);

  SUBCASE("zero update is a fixed point on non-negative images") {
    for (auto t : {block.theta.mu.weight, block.theta.mu.bias})
      for (auto& v : t.mutable_data()) v = 0.0f;
    auto y = model::block_apply(x, g, block, c, rng, model::Sampling::mean);
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
  }
  SUBCASE("negative sums are projected to exactly 0") {
    for (auto& v : block.theta.mu.weight.mutable_data()) v = 0.0f;
    block.theta.mu.bias.mutable_data()[0] = -0.5f;
    auto y = model::block_apply(x, g, block, c, rng, model::Sampling::mean);
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      const float expect = x.data()[i] - 0.5f;
      CHECK(y.data()[i] == (expect < 0.0f ? 0.0f : expect));
    }
  }
  SUBCASE("mean sampling does not consume randomness") {
    BlockConfig cm = BlockConfig::desk(BayesMode::mfvi);
    auto b = model::init_block(cm, rng);
    Rng r1(1), r2(999);
    auto y1 = model::block_apply(x, g, b, cm, r1, model::Sampling::mean);
    auto y2 = model::block_apply(x, g, b, cm, r2, model::Sampling::mean);
    CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
    CHECK(r1.next_u64() == Rng(1).next_u64());
  }
}

TEST_CASE("mcdo drops each last-layer input channel at the configured rate") {
  BlockConfig c = BlockConfig::desk(BayesMode::mcdo);
  c.kernel_size = 1;
  Rng rng(7);
  auto block = model::init_block(c, rng);
  // Positive features everywhere: all-positive first layers.
  for (auto* conv : {&block.branch_image, &block.branch_gradient, &block.merge_in, &block.merge_out}) {
    for (auto& v : conv->weight.mutable_data()) v = std::abs(v) + 0.01f;
    for (auto& v : conv->bias.mutable_data()) v = 0.1f;
  }
  auto x = batch(1, 4, 4, rng, 0.5, 1), g = batch(1, 4, 4, rng, 0.5, 1);
  for (int ch = 0; ch < c.feature_channels; ++ch) {
    auto w = block.theta.mu.weight.mutable_data();
    std::fill(w.begin(), w.end(), 0.0f);
    w[ch] = 1.0f;
    block.theta.mu.bias.mutable_data()[0] = 0.0f;
    auto f = model::block_features(x, g, block, c);
    Rng drop(100 + ch);
    std::size_t zeros = 0, total = 0;
    for (int pass = 0; pass < 10000; ++pass) {
      auto delta = model::last_layer(f, block, c, drop, model::Sampling::weight_draw);
      for (float v : delta.data()) {
        zeros += v == 0.0f;
        ++total;
      }
    }
    const double freq = double(zeros) / double(total);
    INFO("channel " << ch);
    CHECK(std::abs(freq - 0.1) < 0.01);
  }
}

TEST_CASE("cascade_forward") {
  auto g = tomo::make_geometry(tomo::ViewMode::sparse, 8, 0.0, 16);
  Rng rng(8);
  const Image x0 = oracle::random_image(16, 16, rng, 0, 1);
  const auto y = tomo::radon_forward(oracle::random_image(16, 16, rng, 0, 1), g);
  model::Cascade cascade{{}, g, BlockConfig::desk(), ""};

  SUBCASE("K = 0 returns x0") {
    auto xs = model::cascade_forward(y, x0, cascade, rng, model::Sampling::weight_draw);
    REQUIRE(xs.size() == 1);
    CHECK(xs[0] == x0);
  }
  SUBCASE("zero blocks leave x0 unchanged") {
    for (int k = 0; k < 3; ++k) {
      auto b = model::init_block(cascade.config, rng);
      for (auto& [name, t] : b.named())
        if (name.find("rho") == std::string::npos && name != "log_sigma2")
          for (auto& v : t.mutable_data()) v = 0.0f;
      for (auto t : {b.theta.rho.weight, b.theta.rho.bias})
        for (auto& v : t.mutable_data()) v = -60.0f;  // sigma underflows to 0
      cascade.blocks.push_back(b);
    }
    for (auto sampling : {model::Sampling::mean, model::Sampling::weight_draw}) {
      auto xs = model::cascade_forward(y, x0, cascade, rng, sampling);
      for (const auto& x : xs) CHECK(x == x0);
    }
  }
  SUBCASE("two blocks compose block_apply with the same draws") {
    for (int k = 0; k < 2; ++k) cascade.blocks.push_back(model::init_block(cascade.config, rng));
    Rng a(42), b(42);
    auto xs = model::cascade_forward(y, x0, cascade, a, model::Sampling::weight_draw);
    Image x = x0;
    for (const auto& block : cascade.blocks) {
      const Image grad = tomo::grad_data_fidelity(x, y, g);
      x = model::tensor_to_images(model::block_apply(model::image_to_tensor(x), model::image_to_tensor(grad), block,
                                                     cascade.config, b, model::Sampling::weight_draw))[0];
    }
    CHECK(xs.back() == x);
    for (const auto& it : xs)
      for (float v : it.values) CHECK(v >= 0.0f);
  }
  SUBCASE("geometry mismatch is rejected") {
    CHECK_THROWS_AS(model::cascade_forward(y, Image(8, 8), cascade, rng, model::Sampling::mean), ShapeError);
  }
}

TEST_CASE("parameter counts") {
  auto count = [](BlockConfig c) {
    Rng rng(1);
    model::Cascade cascade;
    cascade.config = c;
    cascade.blocks.push_back(model::init_block(c, rng));
    const auto n = model::count_parameters(cascade);
    CHECK(n.total == model::block_parameter_count(c));
    return n.total;
  };
  // desk widths 8 / 16 / 8, 3x3 kernels:
  //   branches 2 (1*8*9 + 8) = 160, merge 16*16*9 + 16 = 2320, 16*8*9 + 8 = 1160, last 8*9 + 1 = 73
  CHECK(count(BlockConfig::desk(BayesMode::deterministic)) == 3713);
  CHECK(count(BlockConfig::desk(BayesMode::mfvi)) == 3713 + 73);
  CHECK(count(BlockConfig::desk(BayesMode::mcdo)) == 3713);

  const auto det = count(BlockConfig::full_scale(BayesMode::deterministic));
  const auto mfvi = count(BlockConfig::full_scale(BayesMode::mfvi));
  CHECK(mfvi - det == 145);
  CHECK(count(BlockConfig::full_scale(BayesMode::mcdo)) == det);
  CHECK(std::abs(det - 32833) < 33);  // within 0.1% of the target size
}

TEST_CASE("parameter naming and cloning") {
  Rng rng(9);
  auto b = model::init_block(BlockConfig::desk(), rng);
  CHECK(b.named().size() == 13);
  CHECK(b.named().back().first == "log_sigma2");
  CHECK(b.sigma2() == 1.0f);
  auto c = b.clone();
  c.theta.mu.weight.mutable_data()[0] += 1.0f;
  CHECK(b.theta.mu.weight.data()[0] != c.theta.mu.weight.data()[0]);
  CHECK(model::init_block(BlockConfig::desk(BayesMode::deterministic), rng).named().size() == 11);
}
