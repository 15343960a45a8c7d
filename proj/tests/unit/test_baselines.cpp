#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "bdgd/baselines/tv.hpp"
#include "bdgd/errors.hpp"
#include "bdgd/infer/infer.hpp"
#include "bdgd/phantoms/dataset.hpp"
#include "bdgd/phantoms/phantoms.hpp"
#include "bdgd/tomo/radon.hpp"
#include "oracles.hpp"

using namespace bdgd;
namespace bl = bdgd::baselines;

TEST_CASE("power method on known spectra") {
  auto identity = [](const std::vector<double>& v) { return v; };
  CHECK(bl::power_method_opnorm(identity, 5, 10) == doctest::Approx(1.0).epsilon(1e-3));

  // K = diag(1, 2, 3): K^T K = diag(1, 4, 9).
  auto diag = [](const std::vector<double>& v) { return std::vector<double>{v[0], 4 * v[1], 9 * v[2]}; };
  CHECK(bl::power_method_opnorm(diag, 3, 100) == doctest::Approx(3.0).epsilon(1e-3));

  double previous = 0.0;
  for (int iters : {1, 2, 5, 10, 20}) {
    const double L = bl::power_method_opnorm(diag, 3, iters);
    CHECK(L >= previous);
    previous = L;
  }
}

TEST_CASE("power method matches the dense singular value of (A; grad)") {
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 6, 0.0, 8);
  const Eigen::MatrixXd A = oracle::dense_radon(g);
  const int n = 64;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * n, n);
  // Forward differences, Neumann boundary: the last row/column difference is 0.
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      const int i = r * 8 + c;
      if (r + 1 < 8) D(i, i) = -1, D(i, i + 8) = 1;
      if (c + 1 < 8) D(n + i, i) = -1, D(n + i, i + 1) = 1;
    }
  Eigen::MatrixXd K(A.rows() + D.rows(), n);
  K << A, D;
  const double sigma_max = Eigen::JacobiSVD<Eigen::MatrixXd>(K).singularValues()(0);

  // The library gradient agrees with the matrix used here.
  Rng rng(1);
  const Image x = oracle::random_image(8, 8, rng, 0, 1);
  const auto grad = bl::image_gradient(x);
  const Eigen::VectorXd dx = D * oracle::vec(x.values);
  for (int i = 0; i < 2 * n; ++i) CHECK(grad[std::size_t(i)] == doctest::Approx(dx(i)).epsilon(1e-5));

  const double L = bl::power_method_opnorm(g, 200);
  MESSAGE("power " << L << " svd " << sigma_max);
  CHECK(std::abs(L - sigma_max) < 0.01 * sigma_max);
  CHECK(bl::power_method_opnorm(g, 50) <= L + 1e-9);
}

TEST_CASE("total variation") {
  Image flat(6, 6);
  std::fill(flat.values.begin(), flat.values.end(), 0.4f);
  CHECK(bl::total_variation(flat) == 0.0);
  Image step(4, 4);
  for (int r = 0; r < 4; ++r) step.at(r, 3) = 1.0f;
  CHECK(bl::total_variation(step) == doctest::Approx(4.0));
  Image corner(2, 2);
  corner.at(0, 0) = 1.0f;  // one pixel with both differences -1
  CHECK(bl::total_variation(corner) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("TV config validation") {
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 6, 0.0, 8);
  auto c = bl::TVConfig::for_geometry(g, 0.1, 10);
  CHECK_NOTHROW(c.validate());
  CHECK(c.tau * c.sigma * c.opnorm * c.opnorm <= 1.0);
  Rng rng(2);
  const auto y = tomo::radon_forward(oracle::random_image(8, 8, rng, 0, 1), g);
  auto bad = c;
  bad.tau *= 2.0;
  CHECK_THROWS_AS(bl::tv_reconstruct(y, g, bad), ConfigError);
  bad = c;
  bad.lambda = 0.0;
  CHECK_THROWS_AS(bl::tv_reconstruct(y, g, bad), ConfigError);
  bad = c;
  bad.iterations = 0;
  CHECK_THROWS_AS(bl::tv_reconstruct(y, g, bad), ConfigError);
}

TEST_CASE("Chambolle-Pock on a noisy sparse-view record") {
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 30, 0.0, 64);
  const auto record = phantoms::make_record(0, g, 0.01, 31);

  SUBCASE("running minimum never increases; iterates stay nonnegative") {
    const auto r = bl::tv_reconstruct(record.sinogram, g, bl::TVConfig::for_geometry(g, 0.01, 500));
    REQUIRE(r.objective.size() == 500);
    double running = r.objective.front();
    for (double f : r.objective) {
      const double next = std::min(running, f);
      CHECK(next <= running);
      running = next;
    }
    CHECK(running < r.objective.front());
    CHECK(r.objective.back() == doctest::Approx(bl::tv_objective(r.image, record.sinogram, g, 0.01)).epsilon(1e-6));
    for (float v : r.image.values) CHECK(v >= 0.0f);
    MESSAGE("tv psnr " << infer::psnr(r.image, record.ground_truth) << " fbp "
                       << infer::psnr(record.x0, record.ground_truth));
    CHECK(infer::psnr(r.image, record.ground_truth) > infer::psnr(record.x0, record.ground_truth));
  }
  SUBCASE("large lambda flattens the image") {
    // Past the threshold where a constant is optimal, lambda no longer matters;
    // convergence does, and 500 balanced steps leave about 3.5% of the TV.
    const auto r = bl::tv_reconstruct(record.sinogram, g, bl::TVConfig::for_geometry(g, 1e4, 2000));
    const double tv = bl::total_variation(r.image), fbp_tv = bl::total_variation(record.x0);
    MESSAGE("tv " << tv << " vs fbp " << fbp_tv);
    CHECK(tv < 0.01 * fbp_tv);
  }
}

TEST_CASE("tiny lambda on full-view noiseless data beats FBP") {
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 90, 0.0, 32);
  Rng rng(5);
  const Image truth = phantoms::random_ellipse_phantom(32, rng);
  const auto y = tomo::radon_forward(truth, g);
  const Image fbp = tomo::fbp(y, g);
  const auto r = bl::tv_reconstruct(y, g, bl::TVConfig::for_geometry(g, 1e-4, 500));
  const double p_tv = infer::psnr(r.image, truth), p_fbp = infer::psnr(fbp, truth);
  MESSAGE("tv " << p_tv << " fbp " << p_fbp);
  CHECK(p_tv > p_fbp);
}

TEST_CASE("a consistent constant image is the minimizer") {
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 16, 0.0, 16);
  Image star(16, 16);
  std::fill(star.values.begin(), star.values.end(), 0.5f);
  const auto y = tomo::radon_forward(star, g);
  const double lambda = 1e-3;
  const double at_star = bl::tv_objective(star, y, g, lambda);
  CHECK(at_star < 1e-9);
  const auto r = bl::tv_reconstruct(y, g, bl::TVConfig::for_geometry(g, lambda, 500));
  const double tol = 1e-3 * at_star + 1e-6;
  CHECK(r.objective.back() >= at_star - tol);
  MESSAGE("final objective " << r.objective.back());
  double err = 0.0;
  for (float v : r.image.values) err = std::max(err, std::abs(double(v) - 0.5));
  MESSAGE("max deviation from x* " << err);
  CHECK(err < 1e-2);
}

TEST_CASE("logspace") {
  const auto v = bl::logspace(1e-4, 1.0, 9);
  REQUIRE(v.size() == 9);
  CHECK(v.front() == doctest::Approx(1e-4));
  CHECK(v[4] == doctest::Approx(1e-2));
  CHECK(v.back() == doctest::Approx(1.0));
  CHECK(bl::logspace(3.0, 3.0, 1) == std::vector<double>{3.0});
}

TEST_CASE("grid search over lambda") {
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 12, 0.0, 32);
  const auto set = phantoms::build_dataset(5, g, 0.01, 41);
  auto base = bl::TVConfig::for_geometry(g, 1.0, 100);

  SUBCASE("a single lambda is returned as is") {
    const auto r = bl::grid_search_lambda(set.records, {0.05}, g, base);
    CHECK(r.best_lambda == 0.05);
    CHECK(r.table.size() == 1);
  }
  SUBCASE("ties go to the smaller lambda") {
    // Empty object, zero data: every lambda reconstructs it exactly.
    phantoms::DatasetRecord empty{Image(32, 32), tomo::Sinogram(g.num_angles(), g.detector_count), Image(32, 32)};
    const auto r = bl::grid_search_lambda({empty}, {0.5, 0.05, 0.2}, g, base);
    CHECK(r.best_lambda == 0.05);
  }
  SUBCASE("returned lambda maximizes the emitted table") {
    const auto grid = bl::logspace(1e-4, 1.0, 9);
    const auto r = bl::grid_search_lambda(set.records, grid, g, base);
    REQUIRE(r.table.size() == 9);
    auto best = std::max_element(r.table.begin(), r.table.end(),
                                 [](const bl::GridRow& a, const bl::GridRow& b) { return a.mean_psnr < b.mean_psnr; });
    CHECK(r.best_lambda == best->lambda);
    for (std::size_t i = 0; i < 9; ++i) CHECK(r.table[i].lambda == grid[i]);
    // The row is the plain mean over records.
    double mean = 0.0;
    for (const auto& rec : set.records) {
      auto c = base;
      c.lambda = r.best_lambda;
      mean += infer::psnr(bl::tv_reconstruct(rec.sinogram, g, c).image, rec.ground_truth) / 5.0;
    }
    CHECK(best->mean_psnr == doctest::Approx(mean).epsilon(1e-9));
  }
  CHECK_THROWS(bl::grid_search_lambda(set.records, {}, g, base));
}
