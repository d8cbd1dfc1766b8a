#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "chorus/diagnostics.hpp"
#include "chorus/types.hpp"

using namespace chorus;

namespace {

// Deterministic AR(1)-flavoured chain from integer arithmetic; the matching
// reference ESS below was computed independently and frozen.
std::vector<double> frozen_chain() {
  std::vector<double> xs;
  double x = 0.0;
  for (long i = 0; i < 48; ++i) {
    const double u =
        static_cast<double>((i * 2654435761L) % 1000L) / 1000.0 - 0.5;
    x = 0.6 * x + u;
    xs.push_back(x);
  }
  return xs;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("rhat pins its reference value") {
  const std::vector<std::vector<double>> chains = {{1, 2, 3, 4, 5},
                                                   {2, 4, 6, 8, 10}};
  const RhatResult r = rhat(chains);
  CHECK(!r.degenerate);
  CHECK(std::abs(r.value - 1.2328828005937953) < 1e-10);
}

TEST_CASE("rhat clamps below one") {
  // Between-chain spread smaller than within: the raw statistic is 0.982,
  // reported as exactly 1.
  const std::vector<std::vector<double>> chains = {
      {0.5, 1.25, -0.75, 2.0, 0.0, 1.5},
      {1.0, -0.5, 0.25, 1.75, -1.25, 0.5},
      {2.25, 0.75, 1.5, -0.25, 0.0, 2.0}};
  const RhatResult r = rhat(chains);
  CHECK(!r.degenerate);
  CHECK(r.value == 1.0);
}

TEST_CASE("rhat degenerate cases") {
  const std::vector<std::vector<double>> flat = {{2, 2, 2, 2}, {2, 2, 2, 2}};
  const RhatResult same = rhat(flat);
  CHECK(same.degenerate);
  CHECK(same.value == 1.0);

  const std::vector<std::vector<double>> stuck = {{1, 1, 1, 1}, {3, 3, 3, 3}};
  const RhatResult split = rhat(stuck);
  CHECK(split.degenerate);
  CHECK(std::isinf(split.value));
}

TEST_CASE("rhat input validation") {
  const std::vector<std::vector<double>> one = {{1, 2, 3, 4}};
  CHECK_THROWS_AS(rhat(one), ConfigError);
  const std::vector<std::vector<double>> shorty = {{1, 2, 3}, {1, 2, 3}};
  CHECK_THROWS_AS(rhat(shorty), ConfigError);
  const std::vector<std::vector<double>> ragged = {{1, 2, 3, 4}, {1, 2, 3}};
  CHECK_THROWS_AS(rhat(ragged), ConfigError);
}

TEST_CASE("rhat is invariant under affine maps") {
  const std::vector<std::vector<double>> chains = {
      {0.3, 1.9, -0.4, 2.2, 0.8, 1.1, 0.0, 1.4},
      {1.6, 0.2, 2.4, -0.9, 1.0, 0.5, 1.8, 0.7}};
  std::vector<std::vector<double>> mapped = chains;
  for (auto& c : mapped)
    for (double& x : c) x = -3.0 * x + 11.0;
  CHECK(std::abs(rhat(chains).value - rhat(mapped).value) < 1e-12);
}

TEST_CASE("type-7 quantiles pin their reference values") {
  const std::vector<double> values = {3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(std::abs(quantile(values, 0.025) - 1.0) < 1e-10);
  CHECK(std::abs(quantile(values, 0.25) - 1.75) < 1e-10);
  CHECK(std::abs(quantile(values, 0.5) - 3.5) < 1e-10);
  CHECK(std::abs(quantile(values, 0.9) - 6.8999999999999995) < 1e-10);
  CHECK(std::abs(quantile(values, 0.975) - 8.4750000000000014) < 1e-10);

  const std::vector<double> three = {0.1, 0.2, 0.3};
  CHECK(std::abs(quantile(three, 0.0) - 0.1) < 1e-10);
  CHECK(std::abs(quantile(three, 0.5) - 0.2) < 1e-10);
  CHECK(std::abs(quantile(three, 1.0) - 0.3) < 1e-10);
  CHECK(std::abs(quantile(three, 0.4) - 0.18000000000000002) < 1e-10);

  CHECK(quantile({7.0}, 0.3) == 7.0);
}

TEST_CASE("quantile_sorted matches quantile on sorted input") {
  std::vector<double> sorted = {-2.0, -0.5, 0.0, 1.5, 2.5, 4.0};
  for (double q : {0.0, 0.1, 0.37, 0.5, 0.93, 1.0})
    CHECK(quantile_sorted(sorted, q) == doctest::Approx(quantile(sorted, q)).epsilon(1e-15));
}

TEST_CASE("effective sample size pins its reference value") {
  const std::vector<double> xs = frozen_chain();
  REQUIRE(xs.size() == 48);
  CHECK(xs[0] == doctest::Approx(-0.5).epsilon(1e-15));
  const std::vector<std::vector<double>> one = {xs};
  CHECK(std::abs(effective_sample_size(one) - 33.257727057822542) < 1e-8);

  // Per-chain contributions add.
  std::vector<double> shifted = xs;
  for (double& v : shifted) v += 0.25;
  const std::vector<std::vector<double>> two = {xs, shifted};
  CHECK(std::abs(effective_sample_size(two) - 66.515454115645085) < 1e-8);
}

TEST_CASE("effective sample size orders by autocorrelation") {
  // Alternating chain: negative lag-1 correlation, ESS above n.
  std::vector<double> alt;
  for (int i = 0; i < 64; ++i) alt.push_back(i % 2 == 0 ? 1.0 : -1.0);
  // Slow ramp: strong positive correlation, ESS far below n.
  std::vector<double> ramp;
  for (int i = 0; i < 64; ++i) ramp.push_back(static_cast<double>(i));
  const std::vector<std::vector<double>> alt_c = {alt};
  const std::vector<std::vector<double>> ramp_c = {ramp};
  CHECK(effective_sample_size(ramp_c) < 16.0);
  // Negative lag-1 correlation floors at n under the monotone estimator.
  CHECK(effective_sample_size(alt_c) >= 64.0);

  const std::vector<std::vector<double>> constant = {
      std::vector<double>(32, 5.0)};
  CHECK(effective_sample_size(constant) == 32.0);
}

TEST_CASE("summarize pools chains for quantiles") {
  const std::vector<std::vector<double>> chains = {
      {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0},
      {1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5}};
  const PosteriorSummary s = summarize(chains);
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  CHECK(s.median == doctest::Approx(quantile(pooled, 0.5)).epsilon(1e-15));
  CHECK(s.ci_lower == doctest::Approx(quantile(pooled, 0.025)).epsilon(1e-15));
  CHECK(s.ci_upper == doctest::Approx(quantile(pooled, 0.975)).epsilon(1e-15));
  CHECK(s.ci_width == doctest::Approx(s.ci_upper - s.ci_lower).epsilon(1e-15));
  CHECK(s.rhat >= 1.0);
  CHECK(s.ess > 0.0);
  CHECK(!s.degenerate);

  CHECK_THROWS_AS(summarize(std::vector<std::vector<double>>{}), ConfigError);
}

TEST_CASE("relative bias, percent or absolute fallback") {
  bool absolute = true;
  CHECK(relative_bias_pct(110.0, 100.0, &absolute) == doctest::Approx(10.0));
  CHECK(!absolute);
  CHECK(relative_bias_pct(1.9, 2.0, &absolute) == doctest::Approx(-5.0));
  CHECK(relative_bias_pct(0.3, 0.0, &absolute) == doctest::Approx(0.3));
  CHECK(absolute);
  CHECK(relative_bias_pct(2.0, 2.0) == 0.0);
}

TEST_CASE("convergence gate is strict at the threshold") {
  PosteriorSummary ok;
  ok.rhat = 1.05;
  PosteriorSummary edge;
  edge.rhat = 1.1;
  PosteriorSummary bad;
  bad.rhat = 1.3;
  PosteriorSummary nan;
  nan.rhat = std::numeric_limits<double>::quiet_NaN();

  const std::vector<PosteriorSummary> pass = {ok};
  CHECK(converged(pass, 1.1));
  const std::vector<PosteriorSummary> at_edge = {ok, edge};
  CHECK(!converged(at_edge, 1.1));
  const std::vector<PosteriorSummary> fail = {ok, bad};
  CHECK(!converged(fail, 1.1));
  const std::vector<PosteriorSummary> undefined = {nan};
  CHECK(!converged(undefined, 1.1));
  const std::vector<PosteriorSummary> empty;
  CHECK(converged(empty, 1.1));
}

}  // TEST_SUITE("diagnostics")
