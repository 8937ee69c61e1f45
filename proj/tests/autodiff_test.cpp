// Copyright 2026 The AdaSplit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <cstring>
#include <random>

#include "adasplit/autodiff.hpp"
#include "adasplit/checkpoint.hpp"
#include "adasplit/errors.hpp"
#include "adasplit/optim.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace adasplit;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

Tensor random_tensor(std::string name, Shape shape, std::mt19937_64& rng,
                     double lo = -1.0, double hi = 1.0, double min_abs = 0.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape.size());
  for (double& x : v) {
    do x = dist(rng); while (std::fabs(x) < min_abs);
  }
  return Tensor(std::move(name), shape, std::move(v));
}

// Weighted sum so that every output element gets a distinct upstream grad.
Var reduce(Tape& tape, Var x, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> w(x.shape().size());
  for (double& v : w) v = dist(rng);
  return ad::sum(ad::mul(x, tape.constant(x.shape(), std::move(w))));
}

}  // namespace

TEST_CASE("matmul with identity returns the operand") {
  std::mt19937_64 rng(1);
  Tensor a = random_tensor("a", {3, 3}, rng);
  Tape tape(false);
  Var eye = tape.constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Var out = ad::matmul(eye, tape.param(a));
  for (std::size_t i = 0; i < 9; ++i) CHECK(out.value()[i] == a.values()[i]);
}

TEST_CASE("softmax of equal logits is uniform") {
  for (double c : {-50.0, 0.0, 3.7, 400.0}) {
    Tape tape(false);
    Var y = ad::softmax(tape.constant({1, 3}, {c, c, c}));
    for (double p : y.value()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("layer_norm of a constant row is zero under unit gain and zero bias") {
  Tape tape(false);
  Var x = tape.constant({1, 4}, {2.5, 2.5, 2.5, 2.5});
  Var y = ad::layer_norm(x, tape.constant({1, 4}, {1, 1, 1, 1}), tape.constant({1, 4}, {0, 0, 0, 0}));
  for (double v : y.value()) CHECK(v == 0.0);
}

TEST_CASE("backward of sum(x*x) at x=3 is 6") {
  Tensor x("x", {1, 1}, {3.0});
  Tape tape;
  Var xv = tape.param(x);
  tape.backward(ad::sum(ad::mul(xv, xv)));
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("sigmoid'(0) is 0.25") {
  Tensor x("x", {1, 1}, {0.0});
  Tape tape;
  tape.backward(ad::sigmoid(tape.param(x)));
  CHECK(x.grad()[0] == doctest::Approx(0.25));
}

TEST_CASE("tensors off the loss path keep zero grad") {
  Tensor used("used", {1, 2}, {1.0, 2.0});
  Tensor unused("unused", {1, 2}, {3.0, 4.0});
  Tape tape;
  Var u = tape.param(used);
  ad::Var dead = ad::tanh(tape.param(unused));
  (void)dead;
  tape.backward(ad::sum(u));
  CHECK(unused.grad()[0] == 0.0);
  CHECK(unused.grad()[1] == 0.0);
  CHECK(used.grad()[1] == 1.0);
}

TEST_CASE("error paths") {
  Tape tape;
  Var a = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  Var b = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  SUBCASE("shape mismatch names both shapes") {
    try {
      ad::matmul(a, b);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
      CHECK(msg.find("[2x3]", msg.find("[2x3]") + 1) != std::string::npos);
    }
    CHECK_THROWS_AS(ad::add(a, tape.constant({3, 2}, std::vector<double>(6, 1.0))), ShapeError);
  }
  SUBCASE("log of non-positive input") {
    CHECK_THROWS_AS(ad::log(tape.constant({1, 2}, {1.0, 0.0})), NumericError);
    CHECK_THROWS_AS(ad::log(tape.constant({1, 1}, {-2.0})), NumericError);
  }
  SUBCASE("non-scalar loss") { CHECK_THROWS_AS(tape.backward(a), ShapeError); }
  SUBCASE("backward runs once") {
    Var l = ad::sum(a);
    tape.backward(l);
    CHECK_THROWS_AS(tape.backward(l), std::logic_error);
  }
}

TEST_CASE("every primitive matches central finite differences") {
  std::mt19937_64 rng(7);
  for (int draw = 0; draw < 20; ++draw) {
    Tensor a = random_tensor("a", {3, 4}, rng, -1.5, 1.5, 0.05);
    Tensor b = random_tensor("b", {4, 2}, rng);
    Tensor c = random_tensor("c", {3, 4}, rng);
    Tensor row = random_tensor("row", {1, 4}, rng);
    Tensor col = random_tensor("col", {3, 1}, rng);
    Tensor one = random_tensor("one", {1, 1}, rng);
    Tensor sq = random_tensor("sq", {3, 3}, rng, -2.0, 2.0);
    Tensor gain = random_tensor("gain", {1, 4}, rng, 0.5, 1.5);
    Tensor bias = random_tensor("bias", {1, 4}, rng);
    Tensor pos = random_tensor("pos", {3, 4}, rng, 0.2, 2.0);
    const std::uint64_t wseed = rng();

    struct Case {
      const char* name;
      std::vector<Tensor*> params;
      std::function<Var(Tape&)> f;
    };
    auto R = [wseed](Tape& t, Var x) {
      std::mt19937_64 local(wseed);
      return reduce(t, x, local);
    };
    std::vector<Case> cases = {
        {"matmul", {&a, &b}, [&](Tape& t) { return R(t, ad::matmul(t.param(a), t.param(b))); }},
        {"matmul_ta", {&a, &c}, [&](Tape& t) { return R(t, ad::matmul(t.param(a), t.param(c), true, false)); }},
        {"matmul_tb", {&a, &c}, [&](Tape& t) { return R(t, ad::matmul(t.param(a), t.param(c), false, true)); }},
        {"matmul_tab", {&b, &a}, [&](Tape& t) { return R(t, ad::matmul(t.param(b), t.param(a), true, true)); }},
        {"add_bcast", {&a, &row, &col, &one}, [&](Tape& t) {
           return R(t, ad::add(ad::add(ad::add(t.param(a), t.param(row)), t.param(col)), t.param(one)));
         }},
        {"mul_bcast", {&a, &c, &row, &col}, [&](Tape& t) {
           return R(t, ad::mul(ad::mul(ad::mul(t.param(a), t.param(c)), t.param(row)), t.param(col)));
         }},
        {"scale_neg", {&a}, [&](Tape& t) { return R(t, ad::neg(ad::scale(t.param(a), -2.5))); }},
        {"concat0", {&a, &row}, [&](Tape& t) { return R(t, ad::concat({t.param(a), t.param(row)}, 0)); }},
        {"concat1", {&a, &col}, [&](Tape& t) { return R(t, ad::concat({t.param(col), t.param(a)}, 1)); }},
        {"gather_var", {&a}, [&](Tape& t) {
           std::vector<std::size_t> ids = {2, 0, 2};
           return R(t, ad::gather_rows(t.param(a), ids));
         }},
        {"gather_table", {&a}, [&](Tape& t) {
           std::vector<std::size_t> ids = {1, 1, 0};
           return R(t, t.gather_rows(a, ids));
         }},
        {"softmax", {&a}, [&](Tape& t) { return R(t, ad::softmax(t.param(a))); }},
        {"softmax_causal", {&sq}, [&](Tape& t) { return R(t, ad::softmax(t.param(sq), true)); }},
        {"log_softmax", {&a}, [&](Tape& t) { return R(t, ad::log_softmax(t.param(a))); }},
        {"layer_norm", {&a, &gain, &bias}, [&](Tape& t) {
           return R(t, ad::layer_norm(t.param(a), t.param(gain), t.param(bias)));
         }},
        {"sigmoid", {&a}, [&](Tape& t) { return R(t, ad::sigmoid(t.param(a))); }},
        {"tanh", {&a}, [&](Tape& t) { return R(t, ad::tanh(t.param(a))); }},
        {"relu", {&a}, [&](Tape& t) { return R(t, ad::relu(t.param(a))); }},
        {"abs", {&a}, [&](Tape& t) { return R(t, ad::abs(t.param(a))); }},
        {"log", {&pos}, [&](Tape& t) { return R(t, ad::log(t.param(pos))); }},
        {"sum", {&a}, [&](Tape& t) { return ad::sum(ad::mul(t.param(a), t.param(a))); }},
        {"mean", {&a}, [&](Tape& t) { return ad::mean(ad::mul(t.param(a), t.param(c))); }},
        {"pick", {&a}, [&](Tape& t) { return ad::pick(ad::tanh(t.param(a)), 1, 2); }},
    };
    for (auto& cs : cases) {
      auto res = testing::check_gradients(cs.params, cs.f);
      INFO(cs.name << " draw " << draw << ": " << res.detail);
      CHECK(res.ok);
    }
  }
}

TEST_CASE("random two-layer MLP matches finite differences over 100 draws") {
  std::mt19937_64 rng(2024);
  for (int draw = 0; draw < 100; ++draw) {
    Tensor x = random_tensor("x", {4, 5}, rng);
    Tensor w1 = random_tensor("w1", {5, 6}, rng);
    Tensor b1 = random_tensor("b1", {1, 6}, rng);
    Tensor w2 = random_tensor("w2", {6, 3}, rng);
    Tensor b2 = random_tensor("b2", {1, 3}, rng);
    auto loss = [&](Tape& t) {
      Var h = ad::tanh(ad::add(ad::matmul(t.param(x), t.param(w1)), t.param(b1)));
      Var out = ad::add(ad::matmul(h, t.param(w2)), t.param(b2));
      return ad::mean(ad::mul(out, out));
    };
    auto res = testing::check_gradients({&w1, &b1, &w2, &b2, &x}, loss);
    INFO("draw " << draw << ": " << res.detail);
    CHECK(res.ok);
  }
}

TEST_CASE("log_softmax is finite where softmax underflows") {
  Tape tape(false);
  Var y = ad::log_softmax(tape.constant({1, 3}, {0.0, -1000.0, 2.0}));
  CHECK(y.at(0, 1) == doctest::Approx(-1002.0 - std::log(1.0 + std::exp(-2.0))));
  Var z = ad::log_softmax(tape.constant({1, 2}, {0.3, 0.3}));
  CHECK(z.at(0, 0) == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("softmax rows form a probability simplex") {
  std::mt19937_64 rng(3);
  for (int draw = 0; draw < 200; ++draw) {
    Tensor x = random_tensor("x", {4, 7}, rng, -30.0, 30.0);
    Tape tape(false);
    Var y = ad::softmax(tape.param(x));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(y.at(r, c) >= 0.0);
        total += y.at(r, c);
      }
      CHECK(std::fabs(total - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("concat routes each gradient slice to its source") {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor("a", {2, 3}, rng);
  Tensor b = random_tensor("b", {2, 2}, rng);
  Tape tape;
  Var joined = ad::concat({tape.param(a), tape.param(b)}, 1);
  std::vector<double> w(10);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i) - 4.5;
  tape.backward(ad::sum(ad::mul(joined, tape.constant({2, 5}, w))));
  double slice_sq = 0.0, full_sq = 0.0;
  for (double g : a.grad()) slice_sq += g * g;
  for (double g : b.grad()) slice_sq += g * g;
  for (double v : w) full_sq += v * v;
  CHECK(slice_sq == doctest::Approx(full_sq));
  CHECK(a.grad()[0] == w[0]);
  CHECK(b.grad()[0] == w[3]);
  CHECK(b.grad()[3] == w[9]);
}

TEST_CASE("forward is bit-identical under identical seeds") {
  auto run = [] {
    std::mt19937_64 rng(99);
    Tensor w("w", {6, 6});
    ad::init_uniform(w, 0.1, rng);
    Tape tape(false);
    Var x = tape.param(w);
    Var y = ad::layer_norm(ad::softmax(ad::matmul(x, x, false, true)),
                           tape.constant({1, 6}, std::vector<double>(6, 1.0)),
                           tape.constant({1, 6}, std::vector<double>(6, 0.0)));
    return std::vector<double>(y.value().begin(), y.value().end());
  };
  CHECK(run() == run());
}

// ---------------------------------------------------------------------------
// Adam

namespace {

// Scalar Adam written straight from the update rule.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double w, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return w - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("adam leaves parameters with zero grad unchanged") {
  Tensor w("w", {1, 3}, {0.5, -1.0, 2.0});
  ad::Adam opt({&w}, {});
  opt.step();
  CHECK(w.values()[0] == 0.5);
  CHECK(w.values()[1] == -1.0);
  CHECK(w.values()[2] == 2.0);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam first step with unit grad moves by about -lr") {
  Tensor w("w", {1, 1}, {1.0});
  w.grad()[0] = 1.0;
  ad::Adam opt({&w}, {.lr = 0.01});
  opt.step();
  CHECK(w.values()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam on w^2 matches a scalar reference for 10 steps") {
  Tensor w("w", {1, 1}, {1.5});
  ad::AdamOptions options{.lr = 0.05, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8};
  ad::Adam opt({&w}, options);
  ScalarAdam ref{options.lr, options.beta1, options.beta2, options.eps};
  double w_ref = 1.5;
  for (int i = 0; i < 10; ++i) {
    opt.zero_grad();
    Tape tape;
    Var x = tape.param(w);
    tape.backward(ad::sum(ad::mul(x, x)));
    opt.step();
    w_ref = ref.step(w_ref, 2.0 * w_ref);
    CHECK(std::fabs(w.values()[0] - w_ref) <= 1e-10);
  }
}

TEST_CASE("adam rejects non-finite gradients and names the parameter") {
  Tensor ok("fine", {1, 1}, {1.0});
  Tensor bad("encoder.w_q", {1, 2}, {1.0, 1.0});
  bad.grad()[1] = std::nan("");
  ad::Adam opt({&ok, &bad}, {});
  try {
    opt.step();
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("encoder.w_q") != std::string::npos);
  }
  CHECK(ok.values()[0] == 1.0);
}

TEST_CASE("gradient clipping caps the global norm") {
  Tensor a("a", {1, 2});
  a.grad()[0] = 30.0;
  a.grad()[1] = 40.0;
  const double before = ad::clip_grad_norm({&a}, 5.0);
  CHECK(before == doctest::Approx(50.0));
  CHECK(ad::grad_norm({&a}) == doctest::Approx(5.0));
}

// ---------------------------------------------------------------------------
// Checkpoint

TEST_CASE("checkpoint round-trips bit-exactly") {
  std::mt19937_64 rng(11);
  ad::ParameterStore store;
  ad::init_uniform(store.add("item_embedding", {7, 3}), 0.1, rng);
  ad::init_uniform(store.add("policy.w1", {6, 3}), 0.1, rng);
  store.get("policy.w1").values()[0] = 1e-310;  // subnormal
  store.get("policy.w1").values()[1] = -0.0;
  const auto path = std::filesystem::temp_directory_path() / "adasplit_ckpt_test.txt";
  ad::save_checkpoint(store, path);

  ad::ParameterStore other;
  other.add("item_embedding", {7, 3});
  other.add("policy.w1", {6, 3});
  ad::load_checkpoint(other, path);
  for (const auto* t : store.all()) {
    const auto& u = other.get(t->name());
    for (std::size_t i = 0; i < t->values().size(); ++i) {
      CHECK(std::memcmp(&t->values()[i], &u.values()[i], sizeof(double)) == 0);
    }
  }

  ad::ParameterStore wrong;
  wrong.add("item_embedding", {8, 3});
  wrong.add("policy.w1", {6, 3});
  CHECK_THROWS_AS(ad::load_checkpoint(wrong, path), DataError);
  std::filesystem::remove(path);
}
