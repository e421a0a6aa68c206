#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "invcon/replica.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace invcon;

namespace {

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(lo + (hi - lo) * static_cast<double>(i) / (count - 1));
  }
  return out;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("minimal risk per asset") {
  CHECK(minimal_risk_per_asset(3.0) == doctest::Approx(1.0));
  CHECK(minimal_risk_per_asset(2.0) == doctest::Approx(0.5));
  CHECK(minimal_risk_per_asset(1.0 + 1e-9) == doctest::Approx(5e-10).epsilon(1e-6));
  CHECK_THROWS_AS(minimal_risk_per_asset(1.0), std::invalid_argument);
  CHECK_THROWS_AS(minimal_risk_per_asset(0.5), std::invalid_argument);
}

TEST_CASE("q_bounds closed forms") {
  const ReplicaBounds collapse = q_bounds({3.0, 1.0});
  CHECK(collapse.q_max == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(collapse.q_min == doctest::Approx(1.5).epsilon(1e-14));

  const ReplicaBounds floor = q_bounds({3.0, 1.5});
  CHECK(floor.q_max == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(floor.q_min == doctest::Approx(1.0).epsilon(1e-14));

  // direct evaluation of the square form as an independent route
  const ReplicaBounds b = q_bounds({3.0, 2.0});
  const double plus = std::sqrt(6.0) + 1.0;
  const double minus = std::sqrt(6.0) - 1.0;
  CHECK(rel_err(b.q_max, plus * plus / 2.0) < 1e-12);
  CHECK(rel_err(b.q_min, minus * minus / 2.0) < 1e-12);
  CHECK(b.q_max == doctest::Approx(5.94948974278318).epsilon(1e-12));
  CHECK(b.q_min == doctest::Approx(1.05051025721682).epsilon(1e-12));

  CHECK_THROWS_AS(q_bounds({3.0, 0.99}), std::invalid_argument);
  CHECK_THROWS_AS(q_bounds({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("product identity q_max q_min = ((kappa(alpha-1)+1)/(alpha-1))^2") {
  for (double alpha : {1.5, 2.0, 3.0, 10.0}) {
    for (double kappa : linspace(1.0, 10.0, 37)) {
      const ReplicaBounds b = q_bounds({alpha, kappa});
      const double expect = (kappa * (alpha - 1.0) + 1.0) / (alpha - 1.0);
      CHECK(rel_err(b.q_max * b.q_min, expect * expect) < 1e-12);
    }
  }
}

TEST_CASE("q_min floor: minimum over kappa is 1 at kappa = alpha/(alpha-1)") {
  for (double alpha : {1.5, 2.0, 3.0, 10.0}) {
    // golden-section refinement over [1, 10]
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 1.0, hi = 10.0;
    while (hi - lo > 1e-10) {
      const double x1 = hi - gr * (hi - lo);
      const double x2 = lo + gr * (hi - lo);
      if (q_bounds({alpha, x1}).q_min < q_bounds({alpha, x2}).q_min) {
        hi = x2;
      } else {
        lo = x1;
      }
    }
    const double argmin = 0.5 * (lo + hi);
    CHECK(std::abs(argmin - q_min_floor_kappa(alpha)) < 1e-6);
    CHECK(std::abs(q_bounds({alpha, argmin}).q_min - 1.0) < 1e-8);
  }
}

TEST_CASE("dual_kappa hand-checked values") {
  CHECK(dual_kappa(3.0, {4.0, DualBranch::MaxConcentration}) ==
        doctest::Approx(1.5).epsilon(1e-14));
  CHECK(dual_kappa(3.0, {1.5, DualBranch::MaxConcentration}) ==
        doctest::Approx(1.0).epsilon(1e-13));
  CHECK(dual_kappa(3.0, {1.0, DualBranch::MinConcentration}) ==
        doctest::Approx(1.5).epsilon(1e-14));
  CHECK_THROWS_AS(dual_kappa(3.0, {0.5, DualBranch::MaxConcentration}),
                  std::invalid_argument);
  CHECK_THROWS_AS(dual_kappa(1.0, {2.0, DualBranch::MaxConcentration}),
                  std::invalid_argument);
}

TEST_CASE("dual_risk hand-checked values and risk duality identity") {
  CHECK(dual_risk(3.0, {4.0, DualBranch::MaxConcentration}) ==
        doctest::Approx(1.5).epsilon(1e-14));
  CHECK(dual_risk(3.0, {1.0, DualBranch::MinConcentration}) ==
        doctest::Approx(1.5).epsilon(1e-14));
  CHECK(dual_risk(3.0, {1.5, DualBranch::MaxConcentration}) ==
        doctest::Approx(1.0).epsilon(1e-13));

  for (double alpha : {1.5, 2.0, 3.0, 10.0}) {
    const double eps = minimal_risk_per_asset(alpha);
    for (double tau : linspace(1.0, 12.0, 23)) {
      for (DualBranch branch : {DualBranch::MaxConcentration, DualBranch::MinConcentration}) {
        const DualPoint d{tau, branch};
        CHECK(rel_err(dual_risk(alpha, d), dual_kappa(alpha, d) * eps) < 1e-12);
      }
    }
  }
}

TEST_CASE("duality round trips on the invertible domains") {
  for (double alpha : {2.0, 3.0}) {
    const double fold = q_min_floor_kappa(alpha);
    for (double kappa : linspace(1.0, 10.0, 50)) {
      const ReplicaBounds b = q_bounds({alpha, kappa});
      // q_max is increasing on [1, inf): the max branch inverts it everywhere.
      const double back_max =
          dual_kappa(alpha, {b.q_max, DualBranch::MaxConcentration});
      CHECK(rel_err(back_max, kappa) < 1e-10);

      if (kappa >= fold) {
        // q_min is increasing on [fold, inf): the min branch inverts it there.
        const double back_min =
            dual_kappa(alpha, {b.q_min, DualBranch::MinConcentration});
        CHECK(rel_err(back_min, kappa) < 1e-10);
      } else {
        // Below the fold q_min is decreasing and the max-branch formula is its
        // inverse; the min branch lands on the conjugate preimage instead.
        const double back_dec =
            dual_kappa(alpha, {b.q_min, DualBranch::MaxConcentration});
        CHECK(rel_err(back_dec, kappa) < 1e-10);
        const double conjugate =
            dual_kappa(alpha, {b.q_min, DualBranch::MinConcentration});
        CHECK(conjugate >= fold - 1e-12);
        CHECK(rel_err(q_bounds({alpha, conjugate}).q_min, b.q_min) < 1e-10);
      }
    }
  }
}

TEST_CASE("annealed concentration identity and quenched interval") {
  CHECK(annealed_concentration(1.0) == 1.0);
  CHECK(annealed_concentration(2.0) == 2.0);
  CHECK_THROWS_AS(annealed_concentration(0.9), std::invalid_argument);

  for (double alpha : {2.0, 3.0, 10.0}) {
    // kappa >= (1 + sqrt(1 + 1/(alpha-1)))/2 is exactly where the annealed
    // value clears q_min; below it the annealed value undershoots.
    const double crossover = 0.5 * (1.0 + std::sqrt(1.0 + 1.0 / (alpha - 1.0)));
    for (double kappa : linspace(crossover + 1e-9, 10.0, 20)) {
      const ReplicaBounds b = q_bounds({alpha, kappa});
      const double annealed = annealed_concentration(kappa);
      CHECK(annealed >= b.q_min - 1e-12);
      CHECK(annealed <= b.q_max + 1e-12);
    }
    const double below = 0.5 * (1.0 + crossover);  // inside (1, crossover)
    CHECK(annealed_concentration(below) < q_bounds({alpha, below}).q_min);
  }
}

TEST_CASE("saddle asymptotics") {
  const SaddleAsymptotics plus = saddle_asymptotics({3.0, 2.0}, SaddleBranch::Plus);
  CHECK(plus.theta_chi == doctest::Approx((1.0 + std::sqrt(1.5)) / 2.0).epsilon(1e-12));
  CHECK(plus.q_w == doctest::Approx(q_bounds({3.0, 2.0}).q_max).epsilon(1e-13));

  const SaddleAsymptotics collapse = saddle_asymptotics({3.0, 1.0}, SaddleBranch::Plus);
  CHECK(collapse.theta_chi == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(collapse.beta_over_theta == doctest::Approx(0.0));
  CHECK(collapse.q_w == doctest::Approx(1.5).epsilon(1e-13));
  const SaddleAsymptotics collapse_m = saddle_asymptotics({3.0, 1.0}, SaddleBranch::Minus);
  CHECK(collapse_m.theta_chi == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(collapse_m.q_w == doctest::Approx(1.5).epsilon(1e-13));

  for (double alpha : {2.0, 3.0}) {
    for (double kappa : linspace(1.0, 8.0, 15)) {
      const ReplicaBounds b = q_bounds({alpha, kappa});
      CHECK(rel_err(saddle_asymptotics({alpha, kappa}, SaddleBranch::Plus).q_w, b.q_max) <
            1e-12);
      CHECK(rel_err(saddle_asymptotics({alpha, kappa}, SaddleBranch::Minus).q_w, b.q_min) <
            1e-12);
    }
  }
}

TEST_CASE("saddle_solve converges at large |beta| to the closed-form bounds") {
  const ModelPoint point{3.0, 2.0};
  const ReplicaBounds b = q_bounds(point);

  const SaddleState up = saddle_solve(point, 1e6);
  for (double r : saddle_residuals(up, point)) CHECK(r < 1e-10);
  CHECK(std::abs(up.chi_w + up.q_w - b.q_max) < 1e-3);

  const SaddleState dn = saddle_solve(point, -1e6);
  for (double r : saddle_residuals(dn, point)) CHECK(r < 1e-10);
  CHECK(std::abs(dn.chi_w + dn.q_w - b.q_min) < 1e-3);

  // consistency of the converged state
  for (const SaddleState& s : {up, dn}) {
    CHECK(rel_err(s.k, s.chi_w_tilde) < 1e-10);
    CHECK(std::abs(s.chi_w * s.chi_w_tilde - 1.0) < 1e-10);
  }
  CHECK(up.chi_w > 0.0);
  CHECK(up.q_w > 0.0);
  // At beta < 0 the converged chi_w is small and positive as well: the
  // asymptotic solution has chi_w = -u(alpha-1)/(beta(alpha-u)) > 0.
  CHECK(dn.chi_w > 0.0);
  CHECK(dn.chi_w < 1e-3);
}

TEST_CASE("saddle_solve error vs closed form shrinks monotonically in |beta|") {
  for (double alpha : {3.0}) {
    for (double kappa : {1.5, 2.0}) {
      const ModelPoint point{alpha, kappa};
      const ReplicaBounds b = q_bounds(point);
      for (double sign : {1.0, -1.0}) {
        const double target = sign > 0 ? b.q_max : b.q_min;
        double prev = std::numeric_limits<double>::infinity();
        for (double mag : {1e4, 1e5, 1e6}) {
          const SaddleState s = saddle_solve(point, sign * mag);
          const double err = std::abs(s.chi_w + s.q_w - target);
          CHECK(err < prev);
          prev = err;
        }
        CHECK(prev < 1e-3);
      }
    }
  }
}

TEST_CASE("saddle_solve handles the degenerate fold point kappa = alpha/(alpha-1)") {
  const ModelPoint point{3.0, 1.5};
  const SaddleState s = saddle_solve(point, -1e6);
  for (double r : saddle_residuals(s, point)) CHECK(r < 1e-10);
  CHECK(std::abs(s.chi_w + s.q_w - 1.0) < 1e-3);
  CHECK(s.theta == doctest::Approx(0.5).epsilon(1e-3));

  const SaddleState sp = saddle_solve(point, 1e6);
  CHECK(std::abs(sp.chi_w + sp.q_w - 4.0) < 1e-3);
}

TEST_CASE("saddle_solve accepts an explicit init") {
  const ModelPoint point{3.0, 2.0};
  const SaddleState warm = saddle_solve(point, 1e5);
  const SaddleState s = saddle_solve(point, 1.2e5, warm);
  for (double r : saddle_residuals(s, point)) CHECK(r < 1e-10);
}

TEST_CASE("saddle_solve domain and failure modes") {
  CHECK_THROWS_AS(saddle_solve({3.0, 2.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(saddle_solve({3.0, 2.0},
                               std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  // kappa = 1 has no usable asymptotic start
  CHECK_THROWS_AS(saddle_solve({3.0, 1.0}, 1e6), std::invalid_argument);
  // a hopeless explicit init fails loudly, carrying residuals
  CHECK_THROWS_AS(saddle_solve({3.0, 2.0}, 1e6, SaddleState{}), SaddleError);
}
