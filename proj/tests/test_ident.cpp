#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ddc/error.hpp"
#include "ddc/ident.hpp"
#include "ddc/model.hpp"
#include "ddc/rank.hpp"
#include "ddc/rng.hpp"
#include "ddc/solver.hpp"

using namespace ddc;

namespace {

struct Fixture {
  ModelSpec spec;
  StateGrid grid;
  TransitionKernel kernel;
};

Fixture five_state() {
  Fixture f;
  f.spec.num_actions = 2;
  f.spec.state_dim = 1;
  f.spec.discount = 0.9;
  f.spec.random_coef_count = 1;
  f.grid = StateGrid::product({{0.0, 1.0, 2.0, 3.0, 4.0}});
  f.kernel = ar1_kernel(f.grid, 2, 0.6, std::vector<double>{0.8}, {{0.0}, {0.5}});
  return f;
}

DiscreteTypeSet two_types() {
  DiscreteTypeSet t;
  t.betas = {{0.5}, {2.0}};
  t.weights = {0.6, 0.4};
  return t;
}

std::vector<CcpTable> solve_types(const Fixture& f, const DiscreteTypeSet& types) {
  std::vector<CcpTable> out;
  for (const auto& b : types.betas)
    out.push_back(solve_model(f.spec, PayoffParams{{}, b}, f.grid, f.kernel).ccp_at(0));
  return out;
}

}  // namespace

TEST_CASE("operator factors are built from the type ccps") {
  auto f = five_state();
  auto types = two_types();
  IdentConditioning cond{1, 1, 2, 3};
  auto bundle = build_operators(f.spec, f.grid, f.kernel, {}, types, cond);
  auto ccps = solve_types(f, types);

  REQUIRE(bundle.l3b.rows() == 10);
  REQUIRE(bundle.l3b.cols() == 2);
  for (int r = 0; r < 2; ++r) {
    CHECK(bundle.d4(r) == doctest::Approx(ccps[r].at(cond.x4, cond.a4)).epsilon(1e-14));
    CHECK(bundle.db(r) ==
          doctest::Approx(ccps[r].at(cond.x1, cond.a1) * types.weights[r]).epsilon(1e-14));
    for (int a3 = 0; a3 < 2; ++a3)
      for (int x3 = 0; x3 < 5; ++x3)
        CHECK(bundle.l3b(a3 * 5 + x3, r) ==
              doctest::Approx(ccps[r].at(x3, a3)).epsilon(1e-14));
    for (int x2 = 0; x2 < 5; ++x2)
      CHECK(bundle.lb2(r, x2) == doctest::Approx(ccps[r].at(x2, 0)).epsilon(1e-14));
  }
  CHECK(bundle.residual_342 < 1e-12);
  CHECK(bundle.residual_32 < 1e-12);
}

TEST_CASE("factorization residuals are machine zero for random models") {
  rng::Stream s(701);
  int built = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Fixture f = five_state();
    f.kernel = ar1_kernel(f.grid, 2, 0.3 + 0.5 * s.uniform(),
                          std::vector<double>{0.5 + s.uniform()},
                          {{0.0}, {0.2 + 0.6 * s.uniform()}});
    int r_count = 1 + int(s.uniform() * 3);
    DiscreteTypeSet types;
    double w_sum = 0.0;
    for (int r = 0; r < r_count; ++r) {
      types.betas.push_back({0.4 + 0.8 * r + 0.3 * s.uniform()});
      double w = 0.2 + s.uniform();
      types.weights.push_back(w);
      w_sum += w;
    }
    for (auto& w : types.weights) w /= w_sum;
    IdentConditioning cond{1, 1, int(s.uniform() * 5), int(s.uniform() * 5)};

    auto bundle = build_operators(f.spec, f.grid, f.kernel, {}, types, cond);
    CHECK(bundle.residual_342 < 1e-10);
    CHECK(bundle.residual_32 < 1e-10);
    auto rec = spectral_recover(bundle);
    CHECK(rec.max_ccp_error < 1e-8);
    for (int r = 0; r < r_count; ++r)
      CHECK(rec.recovered_eigenvalues[r] ==
            doctest::Approx(rec.true_eigenvalues[r]).epsilon(1e-8));
    ++built;
  }
  CHECK(built == 20);
}

TEST_CASE("single-type recovery is exact") {
  auto f = five_state();
  DiscreteTypeSet one;
  one.betas = {{1.3}};
  one.weights = {1.0};
  IdentConditioning cond{1, 1, 0, 2};
  auto bundle = build_operators(f.spec, f.grid, f.kernel, {}, one, cond);
  auto rec = spectral_recover(bundle);
  REQUIRE(rec.recovered_eigenvalues.size() == 1);
  CHECK(std::abs(rec.recovered_eigenvalues[0] - rec.true_eigenvalues[0]) < 1e-13);
  CHECK(rec.max_ccp_error < 1e-12);
}

TEST_CASE("recovered eigenfunctions are ccp columns after rescaling") {
  auto f = five_state();
  auto types = two_types();
  IdentConditioning cond{1, 1, 1, 4};
  auto bundle = build_operators(f.spec, f.grid, f.kernel, {}, types, cond);
  auto rec = spectral_recover(bundle);
  auto ccps = solve_types(f, types);
  for (int r = 0; r < 2; ++r)
    for (int a3 = 0; a3 < 2; ++a3)
      for (int x3 = 0; x3 < 5; ++x3)
        CHECK(rec.recovered_ccp(a3 * 5 + x3, r) ==
              doctest::Approx(ccps[r].at(x3, a3)).epsilon(1e-9));
  // The normalization is intrinsic: probabilities over actions sum to one at
  // every state, so each recovered column must satisfy it too.
  for (int r = 0; r < 2; ++r)
    for (int x3 = 0; x3 < 5; ++x3) {
      double sum = 0.0;
      for (int a3 = 0; a3 < 2; ++a3) sum += rec.recovered_ccp(a3 * 5 + x3, r);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-8));
    }
  CHECK(rec.min_eigen_gap ==
        doctest::Approx(std::abs(rec.true_eigenvalues[0] - rec.true_eigenvalues[1]))
            .epsilon(1e-12));
}

TEST_CASE("recovery is invariant to type label order") {
  auto f = five_state();
  auto types = two_types();
  DiscreteTypeSet flipped;
  flipped.betas = {types.betas[1], types.betas[0]};
  flipped.weights = {types.weights[1], types.weights[0]};
  IdentConditioning cond{1, 1, 2, 3};
  auto r1 = spectral_recover(build_operators(f.spec, f.grid, f.kernel, {}, types, cond));
  auto r2 =
      spectral_recover(build_operators(f.spec, f.grid, f.kernel, {}, flipped, cond));
  // Same eigenvalues as a set, matched to each labeling.
  CHECK(r1.recovered_eigenvalues[0] == doctest::Approx(r2.recovered_eigenvalues[1]).epsilon(1e-10));
  CHECK(r1.recovered_eigenvalues[1] == doctest::Approx(r2.recovered_eigenvalues[0]).epsilon(1e-10));
  CHECK(r1.max_ccp_error < 1e-8);
  CHECK(r2.max_ccp_error < 1e-8);
}

TEST_CASE("duplicated types break injectivity and trigger the collision error") {
  auto f = five_state();
  DiscreteTypeSet dup;
  dup.betas = {{1.0}, {1.0}, {2.2}};
  dup.weights = {0.3, 0.3, 0.4};
  IdentConditioning cond{1, 1, 2, 3};
  auto bundle = build_operators(f.spec, f.grid, f.kernel, {}, dup, cond);
  auto diag = injectivity_diagnostic(bundle);
  CHECK(diag.min_sv_l3b < 1e-12);
  CHECK(diag.min_sv_lb2t < 1e-12);
  CHECK_THROWS_WITH_AS(spectral_recover(bundle),
                       doctest::Contains("eigenvalue collision"), NumericError);

  // Well-separated types keep both diagnostics away from zero.
  auto good = build_operators(f.spec, f.grid, f.kernel, {}, two_types(), cond);
  auto gd = injectivity_diagnostic(good);
  CHECK(gd.min_sv_l3b > 1e-6);
  CHECK(gd.min_sv_lb2t > 1e-6);
}

TEST_CASE("near-collisions are caught by the gap tolerance") {
  auto f = five_state();
  DiscreteTypeSet close;
  close.betas = {{1.0}, {1.0 + 1e-9}};
  close.weights = {0.5, 0.5};
  IdentConditioning cond{1, 1, 2, 3};
  auto bundle = build_operators(f.spec, f.grid, f.kernel, {}, close, cond);
  CHECK_THROWS_AS(spectral_recover(bundle, 1e-6), NumericError);
}

TEST_CASE("well-separated two-type recovery meets the acceptance tolerance") {
  auto f = five_state();
  DiscreteTypeSet types;
  types.betas = {{0.4}, {2.4}};
  types.weights = {0.5, 0.5};
  IdentConditioning cond{1, 1, 3, 1};
  auto bundle = build_operators(f.spec, f.grid, f.kernel, {}, types, cond);
  auto rec = spectral_recover(bundle);
  REQUIRE(rec.min_eigen_gap >= 0.1);
  CHECK(rec.max_ccp_error < 1e-8);
  for (std::size_t r = 0; r < rec.true_eigenvalues.size(); ++r)
    CHECK(std::abs(rec.recovered_eigenvalues[r] - rec.true_eigenvalues[r]) < 1e-8);
}

TEST_CASE("operator blocks reproduce the rank module's ratio matrix") {
  auto f = five_state();
  auto types = two_types();
  IdentConditioning cond{1, 1, 2, 3};
  auto bundle = build_operators(f.spec, f.grid, f.kernel, {}, types, cond);

  // With a2 fixed at the outside good, each a3 block of l3b * diag(db) * lb2
  // equals the rank ratio matrix at conditioning (a1, 0, a3, x1).
  Eigen::MatrixXd prod = bundle.l3b * bundle.db.asDiagonal() * bundle.lb2;
  for (int a3 = 0; a3 < 2; ++a3) {
    RankConditioning rc{cond.a1, 0, a3, cond.x1};
    auto joint = population_joint(f.spec, f.grid, f.kernel, {}, types, rc);
    auto ratio = build_ratio_matrix(joint, f.kernel, rc);
    REQUIRE(ratio.m.rows() == 5);
    REQUIRE(ratio.m.cols() == 5);
    for (int x3 = 0; x3 < 5; ++x3)
      for (int x2 = 0; x2 < 5; ++x2)
        CHECK(prod(a3 * 5 + x3, x2) == doctest::Approx(ratio.m(x3, x2)).epsilon(1e-12));
  }
}
