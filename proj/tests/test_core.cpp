#include "doctest.h"
#include "mavdes/core.hpp"
#include "test_helpers.hpp"

using namespace mavdes;
using namespace mavdes::testing;

TEST_SUITE_BEGIN("core");

TEST_CASE("design space and type invariants") {
  CHECK_THROWS_AS(DesignSpace(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(DesignSpace(2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(TargetED(0.0, dose_space()), std::invalid_argument);
  CHECK_THROWS_AS(TargetED(1.0, dose_space()), std::invalid_argument);
  CHECK_THROWS_AS(CandidateModel(ModelKind::Emax, vec({0.0, 1.0}), 0.1), std::invalid_argument);
  CHECK_THROWS_AS(CandidateModel(ModelKind::Emax, vec({0.0, 1.0, 25.0}), -1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(ApproximateDesign({0.0, 200.0}, {0.5, 0.5}, dose_space()),
                  std::invalid_argument);
  CHECK_THROWS_AS(ApproximateDesign({0.0, 100.0}, {0.5, 0.0}, dose_space()),
                  std::invalid_argument);
  CHECK_THROWS_AS(AveragingWeights(vec({0.7, 0.7})), std::invalid_argument);
  CHECK_THROWS_AS(TruthPrior({{emax_ref(), 0.4}, {log_linear_ref(), 0.4}}),
                  std::invalid_argument);

  // Raw weights are renormalized on construction.
  ApproximateDesign d({0.0, 13.026, 150.0}, {0.281, 0.498, 0.220}, dose_space());
  double sum = 0.0;
  for (double w : d.weights()) sum += w;
  CHECK(std::abs(sum - 1.0) <= 1e-12);

  // Points are sorted together with their weights.
  ApproximateDesign s({150.0, 0.0}, {0.25, 0.75}, dose_space());
  CHECK(s.points()[0] == 0.0);
  CHECK(s.weights()[0] == doctest::Approx(0.75));
}

TEST_CASE("canonicalize merges, prunes and is idempotent") {
  {
    ApproximateDesign d({0.0, 1e-9, 150.0}, {0.2, 0.3, 0.5}, dose_space());
    ApproximateDesign c = canonicalize(d, 1e-6, 0.0);
    REQUIRE(c.size() == 2);
    CHECK(c.points()[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(c.weights()[0] == doctest::Approx(0.5));
    CHECK(c.points()[1] == 150.0);
  }
  {
    ApproximateDesign d({0.0, 75.0, 150.0}, {0.5, 1e-12, 0.5}, dose_space());
    ApproximateDesign c = canonicalize(d, 1e-6, 1e-9);
    REQUIRE(c.size() == 2);
    CHECK(c.weights()[0] == doctest::Approx(0.5));
    CHECK(c.weights()[1] == doctest::Approx(0.5));
  }
  {
    ApproximateDesign d({0.0, 75.0, 150.0}, {0.25, 0.5, 0.25}, dose_space());
    ApproximateDesign c = canonicalize(d, 1e-6, 1e-9);
    REQUIRE(c.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(c.points()[i] == d.points()[i]);
      CHECK(c.weights()[i] == d.weights()[i]);
    }
  }
  {
    ApproximateDesign d({10.0, 20.0}, {1e-13, 1.0}, dose_space());
    CHECK_THROWS_WITH_AS(canonicalize(d, 1e-6, 2.0), doctest::Contains("degenerate"),
                         std::runtime_error);
  }

  for (int c = 0; c < 200; ++c) {
    CaseRng rng(1000 + c);
    ApproximateDesign d = random_design(rng, 3, 6);
    ApproximateDesign once = canonicalize(d, 0.5, 1e-4);
    ApproximateDesign twice = canonicalize(once, 0.5, 1e-4);
    REQUIRE(once.size() == twice.size());
    for (int i = 0; i < once.size(); ++i) {
      CHECK(once.points()[i] == doctest::Approx(twice.points()[i]).epsilon(1e-14));
      CHECK(once.weights()[i] == doctest::Approx(twice.weights()[i]).epsilon(1e-14));
    }
  }
}

namespace {

// Exhaustive oracle: the efficient apportionment maximizes min_i n_i / w_i.
double min_ratio(const std::vector<int>& counts, const std::vector<double>& w) {
  double m = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < counts.size(); ++i) m = std::min(m, counts[i] / w[i]);
  return m;
}

}  // namespace

TEST_CASE("round_design performs efficient apportionment") {
  {
    ApproximateDesign xi2({0.0, 4.051, 150.0}, {0.339, 0.5, 0.161}, dose_space());
    ExactDesign e = round_design(xi2, 100);
    CHECK(e.counts == std::vector<int>{34, 50, 16});

    // Exhaustive check over all 3-part compositions of 100.
    const std::vector<double>& w = xi2.weights();
    const double ours = min_ratio(e.counts, w);
    for (int a = 1; a <= 98; ++a) {
      for (int b = 1; b <= 99 - a; ++b) {
        const int c = 100 - a - b;
        CHECK(min_ratio({a, b, c}, w) <= ours + 1e-12);
      }
    }
  }
  {
    ApproximateDesign d({0.0, 150.0}, {0.5, 0.5}, dose_space());
    CHECK(round_design(d, 10).counts == std::vector<int>{5, 5});
  }
  {
    ApproximateDesign d({0.0, 150.0}, {0.999, 0.001}, dose_space());
    CHECK(round_design(d, 10).counts == std::vector<int>{9, 1});
  }
  {
    ApproximateDesign d({0.0, 75.0, 150.0}, {0.4, 0.3, 0.3}, dose_space());
    CHECK_THROWS_AS(round_design(d, 2), std::invalid_argument);
  }

  for (int c = 0; c < 200; ++c) {
    CaseRng rng(2000 + c);
    ApproximateDesign d = random_design(rng, 3, 6);
    const int n = d.size() + rng.pick(200);
    ExactDesign e = round_design(d, n);
    int total = 0;
    for (size_t i = 0; i < e.counts.size(); ++i) {
      total += e.counts[i];
      CHECK(e.counts[i] >= 1);
      CHECK(std::abs(e.counts[i] - n * d.weights()[i]) <= 1.0 + 1e-9);
    }
    CHECK(total == n);
  }
}

TEST_SUITE_END();
