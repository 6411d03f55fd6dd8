#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <utility>
#include <vector>

#include "cwhom/constants.hpp"
#include "cwhom/response.hpp"

using namespace cwhom;

// Closed-form references for Gaussian-convolved exponentials, evaluated
// independently of the sampled-grid pipeline:
//   (g2 (x) R)(0)        = 1 - exp(s^2/(2 tr^2)) erfc(s/(sqrt2 tr))
//   int R(t) e^{-2|t|/tc} = exp(2 s^2/tc^2) erfc(sqrt2 s/tc)
namespace {
double conv_center_oracle(double sigma, double tau_r) {
  return 1.0 - std::exp(sigma * sigma / (2.0 * tau_r * tau_r)) *
                   std::erfc(sigma / (std::sqrt(2.0) * tau_r));
}

double interference_integral_oracle(double sigma, double tau_c) {
  return std::exp(2.0 * sigma * sigma / (tau_c * tau_c)) *
         std::erfc(std::sqrt(2.0) * sigma / tau_c);
}

double v_hom_oracle(double fwhm, double tau_c, double tau_r) {
  const double sigma = fwhm / fwhm_per_sigma;
  return interference_integral_oracle(sigma, tau_c) / (1.0 + conv_center_oracle(sigma, tau_r));
}

const SourceSpec kSource{800.0, 325.0, 0.0};
const InterferometerSpec kBalanced{};
}  // namespace

TEST_CASE("gaussian kernel") {
  const auto k = gaussian_kernel(428.0, 5.0);
  CHECK(428.0 / fwhm_per_sigma == Catch::Approx(181.75).margin(0.01));
  double sum = 0.0;
  for (double w : k.weights) sum += w;
  CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  CHECK(k.start_index == -static_cast<long>(k.weights.size() / 2));
  CHECK(k.mean_ps() == Catch::Approx(0.0).margin(1e-9));

  // half the peak at +-fwhm/2 (on-grid fwhm so the samples land exactly)
  const auto k2 = gaussian_kernel(400.0, 5.0);
  const std::size_t center = k2.weights.size() / 2;
  const std::size_t half = center + 40;  // +200 ps
  CHECK(k2.weights[half] / k2.weights[center] == Catch::Approx(0.5).margin(2e-3));

  CHECK_THROWS_AS(gaussian_kernel(428.0, 200.0), resolution_error);  // step > sigma
  CHECK_THROWS_AS(gaussian_kernel(-1.0, 5.0), domain_error);
  CHECK_THROWS_AS(gaussian_kernel(428.0, 5.0, 2.0), domain_error);
}

TEST_CASE("convolution of a constant is the constant") {
  const auto k = gaussian_kernel(428.0, 5.0);
  const auto flat = sample_symmetric([](double) { return 1.0; }, 5.0, 3000.0);
  const auto out = convolve(flat, k);
  for (double v : out.values) CHECK(v == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("convolved source dip against the closed form") {
  const auto k = gaussian_kernel(428.0, 5.0);
  const auto curve = sample_symmetric([&](double t) { return g2_source(t, kSource); }, 5.0, 5000.0);
  const auto out = convolve(curve, k);
  const double sigma = 428.0 / fwhm_per_sigma;
  CHECK(out.values[out.index_of(0.0)] ==
        Catch::Approx(conv_center_oracle(sigma, 800.0)).margin(3e-3));
  CHECK(out.values[out.index_of(0.0)] == Catch::Approx(0.158).margin(3e-3));
}

TEST_CASE("narrow kernel approaches the identity") {
  const auto k = gaussian_kernel(12.0, 5.0, 6.0);
  const auto curve = sample_symmetric([&](double t) { return g2_source(t, kSource); }, 5.0, 4000.0);
  const auto out = convolve(curve, k);
  // away from the kink at 0 the smoothing error is tiny
  CHECK(out.values[out.index_of(1000.0)] ==
        Catch::Approx(curve.values[curve.index_of(1000.0)]).margin(5e-4));
  CHECK(out.values[out.index_of(0.0)] == Catch::Approx(0.0).margin(0.02));
}

TEST_CASE("grid mismatch is rejected") {
  const auto k = gaussian_kernel(428.0, 5.0);
  const auto curve = sample_symmetric([](double) { return 1.0; }, 4.0, 1000.0);
  CHECK_THROWS_AS(convolve(curve, k), grid_error);
}

TEST_CASE("tabulated response") {
  const double step = 5.0;

  SECTION("tabulated gaussian matches the analytic kernel") {
    const double sigma = 428.0 / fwhm_per_sigma;
    std::vector<std::pair<double, double>> samples;
    for (double t = -6.0 * sigma; t <= 6.0 * sigma; t += step)
      samples.emplace_back(t, std::exp(-0.5 * (t / sigma) * (t / sigma)));
    const auto tab = load_tabulated_response(samples, step);
    const auto ana = gaussian_kernel(428.0, step);
    REQUIRE(tab.weights.size() + 4 >= ana.weights.size());
    const long offset = tab.start_index - ana.start_index;  // align by time
    REQUIRE(offset >= 0);
    for (std::size_t j = 0; j < tab.weights.size(); ++j)
      CHECK(tab.weights[j] ==
            Catch::Approx(ana.weights[j + static_cast<std::size_t>(offset)]).margin(1e-6));
  }

  SECTION("kernel mean shifts the convolved dip") {
    const double shift = 300.0;
    const double sigma = 100.0;
    std::vector<std::pair<double, double>> samples;
    for (double t = shift - 5.0 * sigma; t <= shift + 5.0 * sigma; t += step)
      samples.emplace_back(t, std::exp(-0.5 * (t - shift) * (t - shift) / (sigma * sigma)));
    const auto k = load_tabulated_response(samples, step);
    CHECK(k.mean_ps() == Catch::Approx(shift).margin(0.5));
    const auto curve =
        sample_symmetric([&](double t) { return g2_source(t, kSource); }, step, 6000.0);
    const auto out = convolve(curve, k);
    std::size_t argmin = 0;
    for (std::size_t i = 0; i < out.values.size(); ++i)
      if (out.values[i] < out.values[argmin]) argmin = i;
    CHECK(out.time_at(argmin) == Catch::Approx(shift).margin(step));
  }

  SECTION("two-sided exponential kernel preserves the plateau") {
    std::vector<std::pair<double, double>> samples;
    for (double t = -2000.0; t <= 2000.0; t += 10.0)
      samples.emplace_back(t, std::exp(-std::abs(t) / 180.0));
    const auto k = load_tabulated_response(samples, step);
    const auto curve =
        sample_symmetric([&](double t) { return g2_source(t, kSource); }, step, 25000.0);
    const auto out = convolve(curve, k);
    CHECK(out.values.front() == Catch::Approx(curve.values.front()).margin(1e-6));
    CHECK(out.values.back() == Catch::Approx(curve.values.back()).margin(1e-6));
  }

  SECTION("bad input is rejected") {
    std::vector<std::pair<double, double>> four = {{0, 1}, {5, 1}, {10, 1}, {15, 1}};
    CHECK_THROWS_AS(load_tabulated_response(four, step), usage_error);
    std::vector<std::pair<double, double>> zeros;
    for (double t = 0.0; t < 50.0; t += 5.0) zeros.emplace_back(t, 0.0);
    CHECK_THROWS_AS(load_tabulated_response(zeros, step), usage_error);
  }
}

TEST_CASE("convolution with a symmetric kernel preserves symmetry") {
  const auto k = gaussian_kernel(428.0, 5.0);
  const auto curve =
      sample_symmetric([&](double t) { return g2_parallel(t, kSource, kBalanced); }, 5.0, 15000.0);
  const auto out = convolve(curve, k);
  const std::size_t center = out.values.size() / 2;
  for (std::size_t d = 0; d < center; d += 37)
    CHECK(out.values[center + d] == Catch::Approx(out.values[center - d]).margin(1e-9));
}

TEST_CASE("measured visibility against the erfc oracle") {
  struct Case {
    double fwhm, tau_c;
  };
  for (const auto& c : {Case{428, 400}, Case{428, 325}, Case{100, 325}, Case{300, 600}}) {
    SourceSpec s = kSource;
    s.tau_c_ps = c.tau_c;
    const auto kernel = gaussian_kernel(c.fwhm, 5.0);
    CHECK(v_hom_measured(s, kBalanced, kernel) ==
          Catch::Approx(v_hom_oracle(c.fwhm, c.tau_c, 800.0)).margin(1e-3));
  }

  SourceSpec s400 = kSource;
  s400.tau_c_ps = 400.0;
  CHECK(v_hom_measured(s400, kBalanced, gaussian_kernel(428.0, 5.0)) ==
        Catch::Approx(0.45).margin(0.05));
  SourceSpec s325 = kSource;
  CHECK(v_hom_measured(s325, kBalanced, gaussian_kernel(100.0, 5.0)) >= 0.70);
  CHECK(v_hom_measured(s325, kBalanced, gaussian_kernel(428.0, 5.0)) ==
        Catch::Approx(0.425).margin(5e-3));
}

TEST_CASE("measured visibility never exceeds the ideal one") {
  for (double fwhm : {60.0, 150.0, 428.0, 900.0}) {
    for (double tau_c : {120.0, 325.0, 700.0}) {
      SourceSpec s = kSource;
      s.tau_c_ps = tau_c;
      const double ideal = v_hom_ideal(0.0, s, kBalanced);
      CHECK(v_hom_measured(s, kBalanced, gaussian_kernel(fwhm, 5.0)) <= ideal + 1e-9);
    }
  }
}

TEST_CASE("visibility map is monotone in both axes") {
  std::vector<double> fwhm, tau_c;
  for (int i = 0; i < 10; ++i) {
    fwhm.push_back(100.0 + 70.0 * i);
    tau_c.push_back(100.0 + 70.0 * i);
  }
  const auto map = visibility_map(fwhm, tau_c, kSource, kBalanced);
  REQUIRE(map.size() == fwhm.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    REQUIRE(map[i].size() == tau_c.size());
    for (std::size_t j = 1; j < map[i].size(); ++j) CHECK(map[i][j] >= map[i][j - 1]);
  }
  for (std::size_t j = 0; j < tau_c.size(); ++j)
    for (std::size_t i = 1; i < fwhm.size(); ++i) CHECK(map[i][j] <= map[i - 1][j]);

  // identity-kernel limit: a very narrow response reproduces the ideal
  SourceSpec s = kSource;
  const double v = v_hom_measured(s, kBalanced, gaussian_kernel(1.0, 0.2));
  CHECK(v == Catch::Approx(1.0).margin(5e-3));

  CHECK_THROWS_AS(visibility_map({}, tau_c, kSource, kBalanced), usage_error);
  CHECK_THROWS_AS(visibility_map({-5.0}, tau_c, kSource, kBalanced), domain_error);
}

// The spec's figure-of-merit property claims visibilities at (dt, tc) and
// (2dt, 2tc) agree within 0.03 for fixed tau_r. The model pinned by the
// anchor values above gives deviations up to ~0.06 on that grid, so here
// the pipeline is checked against the independent closed form instead; the
// acceptance suite carries the literal 0.03 criterion.
TEST_CASE("figure-of-merit deviation matches the closed form") {
  for (double fwhm : {100.0, 450.0, 800.0}) {
    for (double tau_c : {100.0, 450.0, 800.0}) {
      SourceSpec s = kSource;
      s.tau_c_ps = tau_c;
      const double v1 = v_hom_measured(s, kBalanced, gaussian_kernel(fwhm, 5.0));
      s.tau_c_ps = 2.0 * tau_c;
      const double v2 = v_hom_measured(s, kBalanced, gaussian_kernel(2.0 * fwhm, 5.0));
      const double oracle_dev =
          v_hom_oracle(fwhm, tau_c, 800.0) - v_hom_oracle(2.0 * fwhm, 2.0 * tau_c, 800.0);
      CHECK(v1 - v2 == Catch::Approx(oracle_dev).margin(2e-3));
    }
  }
}
