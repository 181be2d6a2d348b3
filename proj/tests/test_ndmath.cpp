#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mob/adam.hpp"
#include "mob/gaussian.hpp"
#include "mob/graph.hpp"
#include "mob/mlp.hpp"
#include "mob/rng.hpp"
#include "support/fd.hpp"

using namespace mob::nd;

namespace {

Mlp random_net(Rng& rng, int max_hidden = 5) {
  std::vector<int> widths;
  widths.push_back(1 + static_cast<int>(rng.below(4)));
  int depth = static_cast<int>(rng.below(3));  // 0..2 hidden layers
  for (int i = 0; i < depth; ++i)
    widths.push_back(1 + static_cast<int>(rng.below(max_hidden)));
  widths.push_back(1 + static_cast<int>(rng.below(4)));
  return mlp_init(widths, rng, 1.0, 0.3);
}

}  // namespace

TEST_CASE("mlp_forward: zero net gives zero output") {
  Mlp net;
  net.widths = {2, 3, 2};
  net.params.assign(2 * 3 + 3 + 3 * 2 + 2, 0.0);
  auto y = mlp_forward(net, std::vector<double>{0.7, -1.3});
  for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("mlp_forward: identity linear layer") {
  Mlp net;
  net.widths = {2, 2};
  net.params = {1, 0, 0, 1, 0, 0};  // W = I, b = 0
  auto y = mlp_forward(net, std::vector<double>{1.0, 2.0});
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(2.0));
}

TEST_CASE("mlp_forward: hand-evaluated 1-hidden-unit net") {
  // y = 2*tanh(x) + 0.5 at x=1
  Mlp net;
  net.widths = {1, 1, 1};
  net.params = {1.0, 0.0, 2.0, 0.5};
  auto y = mlp_forward(net, std::vector<double>{1.0});
  CHECK(y[0] == doctest::Approx(2.0 * std::tanh(1.0) + 0.5).epsilon(1e-12));
}

TEST_CASE("mlp_forward is pure: bitwise-equal repeated outputs") {
  Rng rng(11);
  Mlp net = random_net(rng);
  std::vector<double> x(net.in_dim());
  for (auto& v : x) v = rng.normal();
  auto y1 = mlp_forward(net, x);
  auto y2 = mlp_forward(net, x);
  CHECK(std::equal(y1.begin(), y1.end(), y2.begin()));
}

TEST_CASE("mlp_forward rejects shape mismatch") {
  Rng rng(3);
  Mlp net = mlp_init({2, 3, 1}, rng);
  CHECK_THROWS_AS(mlp_forward(net, std::vector<double>{1.0}),
                  mob::ContractError);
}

TEST_CASE("mlp_backward: linear layer gradient is upstream outer x") {
  Mlp net;
  net.widths = {2, 2};
  net.params = {0.5, -1.0, 2.0, 0.25, 0.0, 0.0};
  std::vector<double> x{1.5, -0.5}, u{2.0, -3.0};
  auto g = mlp_backward(net, x, u);
  // dW[o][k] = u[o] * x[k]
  CHECK(g.params[0] == doctest::Approx(2.0 * 1.5));
  CHECK(g.params[1] == doctest::Approx(2.0 * -0.5));
  CHECK(g.params[2] == doctest::Approx(-3.0 * 1.5));
  CHECK(g.params[3] == doctest::Approx(-3.0 * -0.5));
  CHECK(g.params[4] == doctest::Approx(2.0));
  CHECK(g.params[5] == doctest::Approx(-3.0));
}

TEST_CASE("mlp_backward: constant network has zero gradients wrt input") {
  Mlp net;
  net.widths = {1, 2, 1};
  net.params.assign(2 + 2 + 2 + 1, 0.0);  // all weights zero -> constant out
  auto g = mlp_backward(net, std::vector<double>{0.3},
                        std::vector<double>{1.0});
  CHECK(g.input[0] == doctest::Approx(0.0));
}

TEST_CASE("mlp_backward matches central finite differences (100 nets)") {
  Rng rng(47);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Mlp net = random_net(rng);
    std::vector<double> x(net.in_dim()), u(net.out_dim());
    for (auto& v : x) v = rng.normal();
    for (auto& v : u) v = rng.normal();
    auto g = mlp_backward(net, x, u);
    auto f = [&] {
      auto y = mlp_forward(net, x);
      return std::inner_product(u.begin(), u.end(), y.begin(), 0.0);
    };
    worst = std::max(worst, fdcheck::max_grad_rel_err(net.params, g.params, f));
    // input gradient against the same oracle
    for (std::size_t i = 0; i < x.size(); ++i) {
      double fd = fdcheck::central_diff(x, i, f);
      worst = std::max(worst, fdcheck::rel_err(g.input[i], fd));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gauss_nll_batch gradient matches finite differences") {
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Mlp net = mlp_init({1, 1 + static_cast<int>(rng.below(6)), 2}, rng, 1.0, 0.2);
    int n = 1 + static_cast<int>(rng.below(6));
    std::vector<double> xs(n), ys(n);
    for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
    for (auto& v : ys) v = rng.normal(0.0, 2.0);
    MlpWork work;
    std::vector<double> grad(net.param_count(), 0.0);
    gauss_nll_batch(net, xs, ys, 1e-3, grad, work);
    auto f = [&] { return gauss_nll_value(net, xs, ys, 1e-3, work); };
    worst = std::max(worst, fdcheck::max_grad_rel_err(net.params, grad, f));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("adam: zero gradient on fresh state is a no-op on parameters") {
  AdamState st(0.01, 3);
  std::vector<double> params{1.0, -2.0, 0.5};
  std::vector<double> keep = params;
  adam_step(st, params, std::vector<double>{0.0, 0.0, 0.0});
  CHECK(params == keep);
  CHECK(st.t == 1);
}

TEST_CASE("adam: zero gradient decays existing moments") {
  AdamState st(0.01, 1);
  std::vector<double> params{0.0};
  adam_step(st, params, std::vector<double>{2.0});
  double m1 = st.m[0], v1 = st.v[0];
  adam_step(st, params, std::vector<double>{0.0});
  CHECK(st.m[0] == doctest::Approx(0.9 * m1));
  CHECK(st.v[0] == doctest::Approx(0.999 * v1));
}

TEST_CASE("adam: first step equals -lr*g/(|g|+eps) after bias correction") {
  double g = 0.37, lr = 0.05;
  AdamState st(lr, 1);
  std::vector<double> params{1.0};
  adam_step(st, params, std::span<const double>(&g, 1));
  double expect = 1.0 - lr * g / (std::abs(g) + st.eps);
  CHECK(params[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("adam: constant gradient update magnitude approaches lr*sign(g)") {
  double g = -0.004, lr = 1e-3;
  AdamState st(lr, 1);
  std::vector<double> params{0.0};
  double prev = params[0], step = 0.0;
  for (int i = 0; i < 5000; ++i) {
    adam_step(st, params, std::span<const double>(&g, 1));
    step = params[0] - prev;
    prev = params[0];
  }
  CHECK(step == doctest::Approx(lr).epsilon(1e-3));  // moving against g<0
}

TEST_CASE("adam rejects non-finite gradients with tensor name") {
  AdamState st(0.01, 1);
  std::vector<double> params{0.0};
  double bad = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(
      adam_step(st, params, std::span<const double>(&bad, 1), "mixing"),
      "adam_step: non-finite gradient in mixing", mob::ContractError);
}

TEST_CASE("gaussian_log_pdf closed-form values") {
  CHECK(gaussian_log_pdf(0.0, 0.0, 1.0) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  CHECK(gaussian_log_pdf(1.0, 0.0, 1.0) ==
        doctest::Approx(-1.4189385332046727).epsilon(1e-12));
  // mode value: y = mu gives -sum log(sigma*sqrt(2pi))
  std::vector<double> y{0.4, -1.0}, mu{0.4, -1.0}, sg{0.5, 2.0};
  CHECK(gaussian_log_pdf(y, mu, sg) ==
        doctest::Approx(-std::log(0.5 * std::sqrt(2 * M_PI)) -
                        std::log(2.0 * std::sqrt(2 * M_PI))));
}

TEST_CASE("gaussian_log_pdf rejects non-positive sigma") {
  CHECK_THROWS_AS(gaussian_log_pdf(0.0, 0.0, 0.0), mob::ContractError);
  CHECK_THROWS_AS(gaussian_log_pdf(0.0, 0.0, -1.0), mob::ContractError);
}

TEST_CASE("gaussian_log_pdf is maximized at y = mu") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    double mu = rng.normal(0, 3), sg = 0.1 + rng.uniform() * 3;
    double at_mode = gaussian_log_pdf(mu, mu, sg);
    double off = mu + (rng.uniform() - 0.5) * 4;
    CHECK(gaussian_log_pdf(off, mu, sg) <= at_mode + 1e-12);
  }
}

TEST_CASE("rng: identical seeds give identical streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: uniform draws lie in [0,1)") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("rng: normal sample moments at 1e5 draws") {
  Rng r(2024);
  int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    s += z;
    s2 += z * z;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng: derived substreams differ") {
  Rng a = Rng::from(42, 0);
  Rng b = Rng::from(42, 1);
  CHECK(a.next_u64() != b.next_u64());
}

TEST_CASE("tape: gaussian head gradient matches finite differences") {
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Mlp net = mlp_init({2, 4, 4}, rng, 1.0, 0.2);  // out: 2 mu + 2 raw
    std::vector<double> x{rng.normal(), rng.normal()};
    std::vector<double> y{rng.normal(), rng.normal()};
    std::vector<double> grad(net.param_count(), 0.0);
    auto value = [&]() {
      Tape t;
      int xin = t.leaf(x);
      int out = t.apply_mlp(net, nullptr, xin);
      int mu = t.slice(out, 0, 2);
      int sg = t.add_const(t.softplus_(t.slice(out, 2, 2)), 1e-3);
      return t.val(t.gauss_logpdf(y, mu, sg))[0];
    };
    {
      Tape t;
      int xin = t.leaf(x);
      int out = t.apply_mlp(net, grad.data(), xin);
      int mu = t.slice(out, 0, 2);
      int sg = t.add_const(t.softplus_(t.slice(out, 2, 2)), 1e-3);
      t.backward(t.gauss_logpdf(y, mu, sg));
    }
    worst = std::max(worst, fdcheck::max_grad_rel_err(net.params, grad, value));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("tape: mixture-style composite gradient matches finite differences") {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Mlp gate = mlp_init({3, 4, 2}, rng, 1.0, 0.2);
    Mlp head_a = mlp_init({1, 3, 2}, rng, 1.0, 0.2);
    Mlp head_b = mlp_init({1, 3, 2}, rng, 1.0, 0.2);
    std::vector<double> z{rng.normal(), rng.normal(), rng.normal()};
    double xval = rng.uniform(-1, 1), yval = rng.normal();
    std::vector<double> gg(gate.param_count(), 0.0);
    std::vector<double> ga(head_a.param_count(), 0.0);
    std::vector<double> gb(head_b.param_count(), 0.0);

    auto build = [&](Tape& t, double* sg, double* sa, double* sb) {
      int zin = t.leaf(z);
      int logw = t.log_softmax(t.apply_mlp(gate, sg, zin));
      int xin = t.leaf(std::span<const double>(&xval, 1));
      std::vector<int> lls;
      const Mlp* heads[2] = {&head_a, &head_b};
      double* sinks[2] = {sa, sb};
      for (int h = 0; h < 2; ++h) {
        int out = t.apply_mlp(*heads[h], sinks[h], xin);
        int mu = t.slice(out, 0, 1);
        int sig = t.add_const(t.softplus_(t.slice(out, 1, 1)), 1e-3);
        lls.push_back(
            t.gauss_logpdf(std::span<const double>(&yval, 1), mu, sig));
      }
      return t.logsumexp(t.add(logw, t.pack(lls)));
    };
    {
      Tape t;
      t.backward(build(t, gg.data(), ga.data(), gb.data()));
    }
    auto value = [&] {
      Tape t;
      return t.val(build(t, nullptr, nullptr, nullptr))[0];
    };
    worst = std::max(worst, fdcheck::max_grad_rel_err(gate.params, gg, value));
    worst = std::max(worst, fdcheck::max_grad_rel_err(head_a.params, ga, value));
    worst = std::max(worst, fdcheck::max_grad_rel_err(head_b.params, gb, value));
  }
  CHECK(worst < 1e-4);
}
