#include <doctest.h>

#include <cmath>

#include "flsim/errors.hpp"
#include "flsim/mlp.hpp"
#include "flsim/rng.hpp"
#include "test_util.hpp"

using namespace flsim;
using namespace flsim::test;

TEST_CASE("init_params is deterministic in (spec, seed)") {
  MLPSpec spec{{2, 1}, Activation::Relu};
  CHECK(init_params(spec, 7) == init_params(spec, 7));
  CHECK(init_params(spec, 7) != init_params(spec, 8));
}

TEST_CASE("parameter count follows sum (fan_in+1)*fan_out") {
  MLPSpec spec{{3, 4, 2}, Activation::Relu};
  CHECK(spec.param_count() == 26);
  CHECK(init_params(spec, 0).size() == 26);
}

TEST_CASE("weights are zero-mean over many seeds") {
  MLPSpec spec{{3, 4, 2}, Activation::Relu};
  double sum = 0.0, sq = 0.0;
  long n = 0;
  for (uint64_t seed = 0; seed < 10000; ++seed) {
    const ParamVector p = init_params(spec, seed);
    // weight entries only (biases are fixed at zero)
    for (int i = 0; i < 12; ++i) {
      sum += p[i];
      sq += p[i] * p[i];
      n += 1;
    }
    for (int i = 16; i < 24; ++i) {
      sum += p[i];
      sq += p[i] * p[i];
      n += 1;
    }
  }
  const double mean = sum / n;
  const double stderr_mean = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean) < 3.0 * stderr_mean);
}

TEST_CASE("init bounds scale with fan-in and biases stay zero") {
  MLPSpec spec{{16, 4}, Activation::Relu};
  const ParamVector p = init_params(spec, 3);
  for (int i = 0; i < 64; ++i) CHECK(std::abs(p[i]) <= 0.25);
  for (int i = 64; i < 68; ++i) CHECK(p[i] == 0.0);
}

TEST_CASE("identity-weight network reproduces its input") {
  MLPSpec spec{{3, 3, 3}, Activation::Identity};
  ParamVector p(spec.param_count(), 0.0);
  // two layers of identity weights, zero bias
  for (int l = 0; l < 2; ++l) {
    const std::size_t base = l * 12;
    for (int i = 0; i < 3; ++i) p[base + i * 3 + i] = 1.0;
  }
  const Vec out = mlp_forward(spec, p, {1.5, -2.0, 0.25});
  CHECK(out == Vec{1.5, -2.0, 0.25});
}

TEST_CASE("single linear layer by hand") {
  MLPSpec spec{{1, 1}, Activation::Relu};
  const ParamVector p{2.0, 1.0};  // W=[[2]], b=[1]
  const Vec out = mlp_forward(spec, p, {3.0});
  CHECK(out.size() == 1);
  CHECK(out[0] == doctest::Approx(7.0));
}

TEST_CASE("forward matches the duplicate-evaluation oracle") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed_chain(seed, {100}));
    for (Activation act : {Activation::Relu, Activation::Tanh, Activation::Identity}) {
      MLPSpec spec{{4, 7, 5, 2}, act};
      const ParamVector p = init_params(spec, seed);
      const Vec in = random_vec(rng, 4);
      const Vec got = mlp_forward(spec, p, in);
      const Vec want = mlp_forward_oracle(spec, p, in);
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("forward rejects dimension mismatches") {
  MLPSpec spec{{3, 2}, Activation::Relu};
  const ParamVector p(spec.param_count(), 0.0);
  CHECK_THROWS_AS(mlp_forward(spec, p, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("backward with zero upstream gradient is zero") {
  MLPSpec spec{{3, 4, 2}, Activation::Tanh};
  const ParamVector p = init_params(spec, 1);
  MLPCache cache;
  mlp_forward(spec, p, {0.3, -0.1, 0.7}, &cache);
  ParamVector grad(p.size(), 0.0);
  Vec grad_in;
  mlp_backward(spec, p, cache, {0.0, 0.0}, grad, &grad_in);
  for (double g : grad) CHECK(g == 0.0);
  for (double g : grad_in) CHECK(g == 0.0);
}

TEST_CASE("single-layer gradients by hand: dW = x, db = 1") {
  MLPSpec spec{{2, 1}, Activation::Relu};
  const ParamVector p{0.5, -0.25, 0.1};
  MLPCache cache;
  mlp_forward(spec, p, {3.0, -4.0}, &cache);
  ParamVector grad(p.size(), 0.0);
  mlp_backward(spec, p, cache, {1.0}, grad);
  CHECK(grad[0] == doctest::Approx(3.0));
  CHECK(grad[1] == doctest::Approx(-4.0));
  CHECK(grad[2] == doctest::Approx(1.0));
}

TEST_CASE("backward matches finite differences") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed_chain(seed, {200}));
    MLPSpec spec{{4, 6, 3}, Activation::Tanh};
    const ParamVector p = init_params(spec, seed + 10);
    const Vec in = random_vec(rng, 4);
    const Vec weights = random_vec(rng, 3);  // fixed projection of the output

    MLPCache cache;
    mlp_forward(spec, p, in, &cache);
    ParamVector analytic(p.size(), 0.0);
    mlp_backward(spec, p, cache, weights, analytic);

    const ParamVector fd = finite_diff_grad(
        [&](const ParamVector& q) { return dot(mlp_forward(spec, q, in), weights); }, p, 1e-5);
    CHECK(rel_error(analytic, fd) < 1e-5);
  }
}

TEST_CASE("backward is linear in the upstream gradient") {
  Rng rng(77);
  MLPSpec spec{{3, 5, 2}, Activation::Tanh};
  const ParamVector p = init_params(spec, 3);
  const Vec in = random_vec(rng, 3);
  MLPCache cache;
  mlp_forward(spec, p, in, &cache);

  const Vec g1 = random_vec(rng, 2), g2 = random_vec(rng, 2);
  const double a = 0.7, b = -1.3;
  Vec combined(2);
  for (int i = 0; i < 2; ++i) combined[i] = a * g1[i] + b * g2[i];

  ParamVector grad_comb(p.size(), 0.0), grad1(p.size(), 0.0), grad2(p.size(), 0.0);
  mlp_backward(spec, p, cache, combined, grad_comb);
  mlp_backward(spec, p, cache, g1, grad1);
  mlp_backward(spec, p, cache, g2, grad2);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(grad_comb[i] == doctest::Approx(a * grad1[i] + b * grad2[i]).epsilon(1e-12));
  }
}

TEST_CASE("finite differences on a quadratic") {
  const ParamVector p{1.0, 2.0};
  const ParamVector g = finite_diff_grad(
      [](const ParamVector& q) { return q[0] * q[0] + q[1] * q[1]; }, p, 1e-5);
  CHECK(std::abs(g[0] - 2.0) < 1e-8);
  CHECK(std::abs(g[1] - 4.0) < 1e-8);
}

TEST_CASE("finite differences on a constant are zero") {
  const ParamVector g =
      finite_diff_grad([](const ParamVector&) { return 3.5; }, {0.1, -0.2, 0.3}, 1e-5);
  for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("finite differences reject non-finite losses") {
  CHECK_THROWS_AS(finite_diff_grad([](const ParamVector& q) { return std::log(q[0]); },
                                   {0.0}, 1e-5),
                  NumericError);
}
