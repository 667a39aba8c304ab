#include <cmath>
#include <numbers>

#include "doctest.h"
#include "drive/nn/adam.hpp"
#include "drive/nn/checkpoint.hpp"
#include "drive/nn/distributions.hpp"
#include "drive/nn/gradcheck.hpp"
#include "drive/nn/layers.hpp"
#include "test_util.hpp"

using namespace drive;
using namespace drive::nn;
using drive::testing::normal_array;
using drive::testing::random_array;

namespace {

NdArray<double> vec(std::vector<double> v) {
  const auto n = v.size();
  return NdArray<double>(Shape{n}, std::move(v));
}

NdArray<double> eye(std::size_t n) {
  NdArray<double> a(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) a.at(i, i) = 1.0;
  return a;
}

}  // namespace

TEST_CASE("NdArray enforces shape/data agreement") {
  CHECK_THROWS_AS(NdArray<float>(Shape{2, 3}, std::vector<float>(5)), ContractError);
  NdArray<float> a(Shape{2, 3});
  CHECK(a.size() == 6);
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 3);
  CHECK_THROWS_AS(a.reshape(Shape{4}), ContractError);
}

TEST_CASE("finite-check debug mode raises on NaN") {
  set_finite_checks(true);
  const auto x = constant(vec({-1.0}));
  CHECK_THROWS_AS(nn::log(x), NumericError);
  set_finite_checks(false);
  CHECK_NOTHROW(nn::log(x));
}

TEST_CASE("dense_forward identity and rectifier") {
  const auto w = constant(eye(2));
  const auto b = constant(NdArray<double>(Shape{2}));
  const auto x = constant(vec({3.0, -1.0}));
  const auto y = dense_forward(x, w, b, Activation::none);
  CHECK(y.value()[0] == 3.0);
  CHECK(y.value()[1] == -1.0);
  const auto r = dense_forward(x, w, b, Activation::relu);
  CHECK(r.value()[0] == 3.0);
  CHECK(r.value()[1] == 0.0);
  CHECK_THROWS_AS(dense_forward(constant(vec({1.0, 2.0, 3.0})), w, b, Activation::none), ContractError);
}

TEST_CASE("dense_forward gradient matches central differences") {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    auto x = parameter(random_array(Shape{3}, rng));
    auto w = parameter(random_array(Shape{3, 3}, rng));
    auto b = parameter(random_array(Shape{3}, rng));
    const auto weights = random_array(Shape{3}, rng);
    for (auto act : {Activation::none, Activation::tanh}) {
      auto loss = [&] { return sum(mul_const(dense_forward(x, w, b, act), weights)); };
      const auto res = grad_check<double>(loss, {{"x", x}, {"w", w}, {"b", b}}, 1e-6);
      INFO(res.worst_param, "[", res.worst_index, "] a=", res.analytic, " n=", res.numeric);
      CHECK(res.max_rel_error < 1e-7);
    }
  }
}

TEST_CASE("lstm_step with zero parameters") {
  LstmParams<double> p{constant(NdArray<double>(Shape{8, 3})), constant(NdArray<double>(Shape{8, 2})),
                       constant(NdArray<double>(Shape{8}))};
  const auto x = constant(vec({0.3, -2.0, 5.0}));
  SUBCASE("zero cell → zero outputs") {
    const auto out = lstm_step(x, constant(vec({0.7, -0.1})), constant(vec({0.0, 0.0})), p);
    CHECK(out.h.value()[0] == 0.0);
    CHECK(out.c.value()[1] == 0.0);
  }
  SUBCASE("cell halves, hidden is 0.5·tanh(0.5·c0)") {
    const std::vector<double> c0{1.5, -0.4};
    const auto out = lstm_step(x, constant(vec({0.0, 0.0})), constant(vec(c0)), p);
    for (int i = 0; i < 2; ++i) {
      CHECK(out.c.value()[i] == doctest::Approx(0.5 * c0[i]).epsilon(1e-15));
      CHECK(out.h.value()[i] == doctest::Approx(0.5 * std::tanh(0.5 * c0[i])).epsilon(1e-15));
    }
  }
  CHECK_THROWS_AS(lstm_step(x, constant(vec({0.0, 0.0, 0.0})), constant(vec({0.0, 0.0, 0.0})), p),
                  ContractError);
}

TEST_CASE("lstm_step gradients through inputs and parameters") {
  for (int seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    LstmCell<double> cell(3, 4, rng);
    auto x = parameter(random_array(Shape{2, 3}, rng));
    auto h = parameter(random_array(Shape{2, 4}, rng));
    auto c = parameter(random_array(Shape{2, 4}, rng));
    ParamList<double> params{{"x", x}, {"h", h}, {"c", c}};
    cell.collect(params, "lstm");
    auto loss = [&] { return sum(cell(x, h, c).h); };
    CHECK(grad_check<double>(loss, params, 1e-6).max_rel_error < 1e-6);
  }
}

TEST_CASE("conv2d basic maps") {
  std::mt19937_64 rng(7);
  SUBCASE("1×1 unit kernel is the identity") {
    const auto x = constant(random_array(Shape{1, 4, 5}, rng));
    const auto k = constant(NdArray<double>(Shape{1, 1, 1, 1}, 1.0));
    const auto y = conv2d(x, k, constant(NdArray<double>(Shape{1})), 1, 0);
    CHECK(y.value() == x.value());
  }
  SUBCASE("3×3 averaging of a constant image is constant in the interior") {
    const auto x = constant(NdArray<double>(Shape{1, 6, 6}, 0.37));
    const auto k = constant(NdArray<double>(Shape{1, 1, 3, 3}, 1.0 / 9.0));
    const auto y = conv2d(x, k, constant(NdArray<double>(Shape{1})), 1, 1);
    for (std::size_t r = 1; r < 5; ++r)
      for (std::size_t c = 1; c < 5; ++c) CHECK(y.value().at(0, r, c) == doctest::Approx(0.37).epsilon(1e-14));
  }
  SUBCASE("invalid geometry is rejected") {
    const auto x = constant(NdArray<double>(Shape{1, 4, 4}));
    const auto k = constant(NdArray<double>(Shape{1, 1, 3, 3}));
    const auto b = constant(NdArray<double>(Shape{1}));
    CHECK_THROWS_AS(conv2d(x, k, b, 0, 1), ContractError);
    CHECK_THROWS_AS(conv2d(x, constant(NdArray<double>(Shape{1, 1, 7, 7})), b, 1, 0), ContractError);
  }
}

TEST_CASE("conv2d gradient on a 2-channel 5×5 input") {
  for (int seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(200 + seed);
    Conv2d<double> conv(2, 3, 3, 2, 1, rng);
    auto x = parameter(random_array(Shape{2, 5, 5}, rng));
    ParamList<double> params{{"x", x}};
    conv.collect(params, "conv");
    const auto weights = random_array(Shape{3, 3, 3}, rng);
    auto loss = [&] { return sum(mul_const(conv(x), weights)); };
    CHECK(grad_check<double>(loss, params, 1e-6).max_rel_error < 1e-6);
  }
}

TEST_CASE("global_pool") {
  SUBCASE("constant volume") {
    const auto v = constant(NdArray<double>(Shape{3, 2, 2}, 2.0));
    for (auto m : {PoolMode::max, PoolMode::avg}) {
      const auto pooled = global_pool(v, m);
      for (double x : pooled.value().values()) CHECK(x == 2.0);
    }
  }
  SUBCASE("values 1..4") {
    const auto v = constant(NdArray<double>(Shape{1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
    CHECK(global_pool(v, PoolMode::max).value()[0] == 4.0);
    CHECK(global_pool(v, PoolMode::avg).value()[0] == 2.5);
  }
  SUBCASE("random volume matches loop oracle") {
    std::mt19937_64 rng(11);
    const auto vv = random_array(Shape{4, 3, 5}, rng);
    const auto mx = global_pool(constant(vv), PoolMode::max).value();
    const auto av = global_pool(constant(vv), PoolMode::avg).value();
    for (std::size_t c = 0; c < 4; ++c) {
      double best = -INFINITY, total = 0.0;
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 5; ++x) {
          best = std::max(best, vv.at(c, y, x));
          total += vv.at(c, y, x);
        }
      CHECK(mx[c] == best);
      CHECK(av[c] == doctest::Approx(total / 15.0).epsilon(1e-15));
    }
  }
  SUBCASE("empty spatial extent is rejected") {
    CHECK_THROWS_AS(global_pool(constant(NdArray<double>(Shape{2, 0, 3})), PoolMode::max), ContractError);
  }
}

TEST_CASE("tanh_gaussian at the mode") {
  const auto s = tanh_gaussian(constant(NdArray<double>(Shape{1, 3})), constant(NdArray<double>(Shape{1, 3})),
                               NdArray<double>(Shape{1, 3}));
  for (double a : s.action.value().values()) CHECK(a == 0.0);
  const double mode = 3 * (-0.5 * std::log(2 * std::numbers::pi));
  // The ε inside the correction shifts the value by k·log(1+ε).
  CHECK(std::abs(s.log_prob.item() - mode) < 1e-5);
  CHECK(s.log_prob.item() == doctest::Approx(mode - 3 * std::log1p(kTanhEps)).epsilon(1e-12));
}

TEST_CASE("tanh_gaussian density agrees with 1-D quadrature") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const double mu = nd(rng) * 0.8, log_std = nd(rng) * 0.5 - 0.3, n = nd(rng);
    const auto s = tanh_gaussian(constant(vec({mu})), constant(vec({log_std})), vec({n}));
    const double a = s.action.value()[0];
    if (std::abs(a) > 0.999) continue;
    // Probability mass of (a−δ, a+δ), integrated in pre-squash space by the trapezoid rule.
    const double delta = 1e-4 * (1.0 - a * a);
    const double lo = std::atanh(a - delta), hi = std::atanh(a + delta);
    const double sigma = std::exp(log_std);
    const int steps = 2000;
    double mass = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double u = lo + (hi - lo) * i / steps;
      const double z = (u - mu) / sigma;
      const double pdf = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * std::numbers::pi));
      mass += (i == 0 || i == steps ? 0.5 : 1.0) * pdf;
    }
    mass *= (hi - lo) / steps;
    CHECK(s.log_prob.item() == doctest::Approx(std::log(mass / (2 * delta))).epsilon(0).scale(0).epsilon(1e-3));
  }
}

TEST_CASE("tanh_gaussian range and finiteness under extreme inputs") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto mean = random_array(Shape{4, 3}, rng, -50, 50);
    const auto log_std = random_array(Shape{4, 3}, rng, -40, 10);
    const auto noise = random_array(Shape{4, 3}, rng, -10, 10);
    const auto s = tanh_gaussian(constant(mean), constant(log_std), noise);
    for (double a : s.action.value().values()) CHECK(std::abs(a) <= 1.0);
    CHECK(s.log_prob.value().all_finite());
  }
}

TEST_CASE("tanh_gaussian log_prob decreases with |noise|") {
  // The pre-squash Gaussian term is monotone for every mean/log_std. The full
  // squashed density is monotone around a zero mean when σ ≤ 1/√2.
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const double ls = std::uniform_real_distribution<double>(-3.0, -0.5 * std::log(2.0))(rng);
    double prev = INFINITY, prev_gauss = INFINITY;
    for (double n = 0.0; n < 6.0; n += 0.25) {
      const auto s = tanh_gaussian(constant(vec({0.0})), constant(vec({ls})), vec({n}));
      const double g = gaussian_log_density(vec({ls}), vec({n}))[0];
      CHECK(s.log_prob.item() < prev);
      CHECK(g < prev_gauss);
      prev = s.log_prob.item();
      prev_gauss = g;
    }
  }
}

TEST_CASE("adam_step") {
  SUBCASE("first step moves by ≈ −λ·sign(g)") {
    for (double g : {0.5, 3.0, -2.0}) {
      NdArray<double> p(Shape{1}, 1.0), grad(Shape{1}, g);
      AdamState<double> st;
      st.config.lr = 1e-3;
      adam_step<double>({&p}, {&grad}, st);
      CHECK(p[0] - 1.0 == doctest::Approx(-1e-3 * (g > 0 ? 1 : -1)).epsilon(1e-6));
    }
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    NdArray<double> p(Shape{3}, std::vector<double>{1, -2, 3}), grad(Shape{3});
    AdamState<double> st;
    adam_step<double>({&p}, {&grad}, st);
    CHECK(p == NdArray<double>(Shape{3}, std::vector<double>{1, -2, 3}));
  }
  SUBCASE("two steps against a scalar reference") {
    std::mt19937_64 rng(3);
    auto p = random_array(Shape{5}, rng);
    const auto g1 = random_array(Shape{5}, rng), g2 = random_array(Shape{5}, rng);
    const auto p0 = p;
    AdamState<double> st;
    adam_step<double>({&p}, {&g1}, st);
    adam_step<double>({&p}, {&g2}, st);
    for (std::size_t i = 0; i < 5; ++i) {
      double x = p0[i], m = 0, v = 0;
      const double gs[2] = {g1[i], g2[i]};
      for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1 * gs[t - 1];
        v = 0.999 * v + 0.001 * gs[t - 1] * gs[t - 1];
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        x -= 3e-4 * mh / (std::sqrt(vh) + 1e-8);
      }
      CHECK(std::abs(p[i] - x) < 1e-12);
    }
  }
  SUBCASE("deterministic given inputs") {
    std::mt19937_64 rng(4);
    const auto p0 = random_array(Shape{6}, rng), g = random_array(Shape{6}, rng);
    auto a = p0, b = p0;
    AdamState<double> sa, sb;
    adam_step<double>({&a}, {&g}, sa);
    adam_step<double>({&b}, {&g}, sb);
    CHECK(a == b);
  }
}

TEST_CASE("grad_check on a quadratic") {
  std::mt19937_64 rng(1);
  auto x = parameter(random_array(Shape{4}, rng));
  auto loss = [&] { return scale(sum_squares(x), 0.5); };
  CHECK(grad_check<double>(loss, {{"x", x}}, 1e-4).max_rel_error < 1e-10);
}

TEST_CASE("clip_grad_norm rescales to the bound") {
  auto x = parameter(NdArray<double>(Shape{2}, std::vector<double>{3.0, 4.0}));
  backward(sum_squares(x));  // grad = (6, 8), norm 10
  ParamList<double> ps{{"x", x}};
  CHECK(clip_grad_norm(ps, 5.0) == doctest::Approx(10.0));
  CHECK(grad_norm(ps) == doctest::Approx(5.0));
}

TEST_CASE("checkpoint archive") {
  std::mt19937_64 rng(21);
  Checkpoint ck;
  ck.put("a", random_array<float>(Shape{3, 4}, rng));
  ck.put("b", random_array<double>(Shape{7}, rng));
  ck.put_int("step", 42);
  ck.meta()["config_hash"] = "abc";
  const auto bytes = ck.serialize();

  SUBCASE("round trip is bit exact") {
    const auto back = Checkpoint::deserialize(bytes);
    CHECK(back == ck);
    CHECK(back.serialize() == bytes);
    CHECK(back.get_int("step") == 42);
    CHECK(back.dtype("a") == Checkpoint::DType::f32);
  }
  SUBCASE("truncation is reported with an offset") {
    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS(Checkpoint::deserialize(cut), FormatError);
  }
  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(Checkpoint::deserialize(bad), FormatError);
  }
  SUBCASE("version mismatch") {
    std::string s(bytes.begin(), bytes.end());
    const auto at = s.find("drive-ckpt-v1");
    REQUIRE(at != std::string::npos);
    s[at + 12] = '9';
    CHECK_THROWS_AS(Checkpoint::deserialize(io::Bytes(s.begin(), s.end())), UnsupportedVersionError);
  }
}
