#include <doctest.h>

#include <cmath>

#include "nnpde/adjoint_grad.hpp"
#include "nnpde/errors.hpp"
#include "nnpde/experiments.hpp"
#include "nnpde/net_kernels.hpp"
#include "nnpde/shallow_net.hpp"
#include "test_support.hpp"

using namespace nnpde;
using nnpde::testing::random_field;

namespace {

NetParams single(double c, double wt, double wx, double wy, double eta, Activation a = Activation::Tanh) {
  NetParams p;
  p.n = 1;
  p.activation = a;
  p.c = {c};
  p.w_t = {wt};
  p.w = {{wx, wy}};
  p.eta = {eta};
  return p;
}

double direct_net(const NetParams& p, double t, double x, double y) {
  double s = 0.0;
  for (int i = 0; i < p.n; ++i) {
    s += p.c[i] * activate(p.activation, p.w_t[i] * t + p.w[i][0] * x + p.w[i][1] * y + p.eta[i]);
  }
  return s / std::pow(p.n, p.beta);
}

}  // namespace

TEST_CASE("init is reproducible and validated") {
  const InitDistribution d{-1.0, 1.0, 42};
  const NetParams a = init_params(7, 2.0 / 3.0, d), b = init_params(7, 2.0 / 3.0, d);
  CHECK(a.to_flat() == b.to_flat());
  CHECK(a.flat_size() == 35);
  CHECK_THROWS_AS(init_params(3, 0.4, d), ConfigError);
  CHECK_THROWS_AS(init_params(3, 1.0, d), ConfigError);
  CHECK_THROWS_AS(init_params(0, 0.7, d), ConfigError);
}

TEST_CASE("output weights have mean zero within the CLT bound") {
  const NetParams p = init_params(10000, 2.0 / 3.0, {-1.0, 1.0, 9});
  double m = 0.0;
  for (double c : p.c) {
    CHECK(std::abs(c) <= 1.0);
    m += c;
  }
  m /= p.n;
  CHECK(std::abs(m) <= 3.0 * (1.0 / std::sqrt(3.0)) / 100.0);
}

TEST_CASE("flat layout round trips") {
  NetParams p = init_params(4, 0.75, {-1.0, 1.0, 3});
  Eigen::VectorXd v = p.to_flat();
  CHECK(v[5 * 2 + 0] == p.c[2]);
  CHECK(v[5 * 2 + 3] == p.w[2][1]);
  v *= 2.0;
  p.assign_flat(v);
  CHECK(p.eta[3] == v[19]);
  CHECK_THROWS_AS(p.assign_flat(Eigen::VectorXd(3)), StructuralError);
}

TEST_CASE("eval_net examples") {
  const auto g = SpaceTimeGrid::reference(3, 4, 5);
  for (double v : eval_net(single(1, 0, 0, 0, 0), g).values()) CHECK(v == 0.0);
  for (double v : eval_net(single(1, 0, 0, 0, 1), g).values()) {
    CHECK(v == doctest::Approx(0.7615941559557649).epsilon(1e-14));
  }
  NetParams z = init_params(6, 2.0 / 3.0, {-1.0, 1.0, 1});
  std::fill(z.c.begin(), z.c.end(), 0.0);
  for (double v : eval_net(z, g).values()) CHECK(v == 0.0);
}

TEST_CASE("eval_net agrees with direct evaluation and its bound") {
  const auto g = SpaceTimeGrid::reference(5, 6, 7);
  for (Activation a : {Activation::Tanh, Activation::Sigmoid}) {
    NetParams p = init_params(37, 0.6, {-1.0, 1.0, 5}, a);
    p.w_t[3] = 400.0;  // exercises the direct-evaluation fallback
    const Field f = eval_net(p, g);
    double cmax = 0.0;
    for (double c : p.c) cmax = std::max(cmax, std::abs(c));
    for (int n = 0; n < g.t_count(); ++n)
      for (int i = 0; i < g.x_count(); ++i)
        for (int j = 0; j < g.y_count(); ++j) {
          CHECK(f(n, i, j) == doctest::Approx(direct_net(p, g.t(n), g.x(i), g.y(j))).epsilon(1e-13));
          CHECK(std::abs(f(n, i, j)) <= std::pow(37.0, 0.4) * cmax);
        }
  }
}

TEST_CASE("parallel kernels match their serial references") {
  const auto g = SpaceTimeGrid::reference(5, 7, 6);
  for (Activation a : {Activation::Tanh, Activation::Sigmoid}) {
    const NetParams p = init_params(23, 2.0 / 3.0, {-1.0, 1.0, 8}, a);
    const Field e1 = kernels::eval_net_parallel(p, g), e2 = kernels::eval_net_serial(p, g);
    for (std::size_t k = 0; k < e1.size(); ++k) CHECK(e1[k] == doctest::Approx(e2[k]).epsilon(1e-13));
    const Field uh = random_field(g, 4);
    const Eigen::VectorXd g1 = kernels::param_gradient_parallel(p, uh), g2 = kernels::param_gradient_serial(p, uh);
    CHECK((g1 - g2).cwiseAbs().maxCoeff() <= 1e-13 * g2.cwiseAbs().maxCoeff());
    std::vector<Neuron> units;
    for (int i = 0; i < p.n; ++i) units.push_back(neuron(p, i));
    const Eigen::MatrixXd b1 = kernels::kernel_matrix_parallel(units, a, g);
    const Eigen::MatrixXd b2 = kernels::kernel_matrix_serial(units, a, g);
    CHECK((b1 - b2).cwiseAbs().maxCoeff() <= 1e-13 * b2.cwiseAbs().maxCoeff());
    const KernelOperator op{g, b1, g.node_weights(), {}, 0.0};
    const Field t1 = kernels::apply_operator_parallel(op, uh), t2 = kernels::apply_operator_serial(op, uh);
    for (std::size_t k = 0; k < t1.size(); ++k) CHECK(t1[k] == doctest::Approx(t2[k]).epsilon(1e-12));
  }
}

TEST_CASE("parameter gradient against a weighted delta") {
  const auto g = SpaceTimeGrid::reference(5, 5, 5);
  const NetParams p = init_params(3, 2.0 / 3.0, {-1.0, 1.0, 2});
  const int n = 2, i = 1, j = 3;
  Field delta(g);
  delta(n, i, j) = 1.0 / g.weight(n, i, j);
  const Eigen::VectorXd grad = net_param_gradient(p, delta);
  const double scale = std::pow(3.0, -p.beta), t = g.t(n), x = g.x(i), y = g.y(j);
  for (int k = 0; k < 3; ++k) {
    const double z = p.w_t[k] * t + p.w[k][0] * x + p.w[k][1] * y + p.eta[k];
    const double s = std::tanh(z), ds = 1 - s * s;
    CHECK(grad[5 * k + 0] == doctest::Approx(scale * s).epsilon(1e-12));
    CHECK(grad[5 * k + 1] == doctest::Approx(scale * p.c[k] * ds * t).epsilon(1e-12));
    CHECK(grad[5 * k + 2] == doctest::Approx(scale * p.c[k] * ds * x).epsilon(1e-12));
    CHECK(grad[5 * k + 3] == doctest::Approx(scale * p.c[k] * ds * y).epsilon(1e-12));
    CHECK(grad[5 * k + 4] == doctest::Approx(scale * p.c[k] * ds).epsilon(1e-12));
  }
  CHECK(net_param_gradient(p, Field(g)).isZero(0.0));
  NetParams c0 = p;
  c0.c[1] = 0.0;
  const Eigen::VectorXd gc = net_param_gradient(c0, random_field(g, 3));
  for (int k = 1; k < 5; ++k) CHECK(gc[5 + k] == 0.0);
}

TEST_CASE("kernel_value examples") {
  const SpaceTimePoint o{0, 0, 0}, p{0.3, 0.1, 0.9};
  CHECK(kernel_value({0, 0, 0, 0, 0}, Activation::Tanh, o, p) == 0.0);
  CHECK(kernel_value({1, 0, 0, 0, 0}, Activation::Tanh, o, o) == 1.0);
  const double s = std::tanh(1.0), sech2 = 1 - s * s;
  CHECK(kernel_value({1, 0, 0, 0, 1}, Activation::Tanh, o, o) == doctest::Approx(s * s + sech2 * sech2));
  CHECK(kernel_value({1, 0, 0, 0, 1}, Activation::Tanh, o, o) == doctest::Approx(0.756404).epsilon(1e-6));
  const Neuron u{0.4, -1.2, 0.7, 2.0, 0.3};
  CHECK(kernel_value(u, Activation::Sigmoid, o, p) == kernel_value(u, Activation::Sigmoid, p, o));
}

TEST_CASE("kernel assembly examples") {
  const auto g = SpaceTimeGrid::reference(3, 4, 4);
  CHECK(assemble_kernel(single(0, 0, 0, 0, 0), g).matrix.isZero(0.0));
  NetParams one = single(0.3, 1.0, -0.5, 0.2, 0.1);
  NetParams two = one;
  two.n = 2;
  two.c.push_back(0.3);
  two.w_t.push_back(1.0);
  two.w.push_back({-0.5, 0.2});
  two.eta.push_back(0.1);
  const auto k1 = assemble_kernel(one, g), k2 = assemble_kernel(two, g);
  CHECK((k1.matrix - k2.matrix).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((k1.matrix - k1.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(k1.matrix.cwiseAbs().maxCoeff() <= k1.linf_bound);
  KernelOptions tiny;
  tiny.memory_budget_bytes = 1000;
  try {
    assemble_kernel(one, g, tiny);
    FAIL("expected a resource error");
  } catch (const ResourceError& e) {
    CHECK(e.required_bytes() == 8 * (48 * 48 + 3 * 48));
  }
}

TEST_CASE("Monte Carlo kernel error shrinks like one over root M") {
  const auto g = SpaceTimeGrid::reference(3, 4, 4);
  auto rms = [&](int m, std::uint64_t seed) {
    const auto ref = assemble_kernel({-1.0, 1.0, 1000}, 160000, Activation::Tanh, g).matrix;
    const auto k = assemble_kernel({-1.0, 1.0, seed}, m, Activation::Tanh, g).matrix;
    return std::sqrt((k - ref).squaredNorm() / k.size());
  };
  double a = 0.0, b = 0.0;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    a += rms(10000, s);
    b += rms(40000, s + 10);
  }
  const double ratio = a / b;
  CHECK(ratio > 1.5);
  CHECK(ratio < 2.7);
}

TEST_CASE("operator examples and positivity") {
  const auto g = SpaceTimeGrid::reference(3, 5, 5);
  KernelOperator c{g, Eigen::MatrixXd::Constant(g.size(), g.size(), 2.0), g.node_weights(), {}, 2.0};
  for (double v : apply_operator(c, Field(g, 1.0)).values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-13));
  for (double v : apply_operator(c, Field(g)).values()) CHECK(v == 0.0);
  const auto k = assemble_kernel({-1.0, 1.0, 4}, 3000, Activation::Tanh, g);
  const double fro = weighted_frobenius_norm(k);
  for (unsigned s = 0; s < 100; ++s) {
    const Field u = random_field(g, s);
    const Field tu = apply_operator(k, u);
    CHECK(inner_product_l2(u, tu) >= 0.0);
    CHECK(norm(tu, NormKind::L2_DT) <= fro * norm(u, NormKind::L2_DT) * (1 + 1e-12));
  }
  CHECK_THROWS_AS(apply_operator(k, Field(SpaceTimeGrid::reference(3, 5, 6))), StructuralError);
}

TEST_CASE("spectrum examples") {
  const auto g = SpaceTimeGrid::reference(3, 4, 5);
  const Field phi = random_field(g, 12);
  Eigen::Map<const Eigen::VectorXd> v(phi.values().data(), phi.size());
  const KernelOperator r1{g, v * v.transpose(), g.node_weights(), {}, 0.0};
  const auto ev = kernel_spectrum(r1, -1);
  CHECK(ev.size() == g.size());
  CHECK(ev[0] == doctest::Approx(inner_product_l2(phi, phi)).epsilon(1e-12));
  for (std::size_t k = 1; k < ev.size(); ++k) CHECK(std::abs(ev[k]) <= 1e-13 * ev[0]);
  const KernelOperator zero{g, Eigen::MatrixXd::Zero(g.size(), g.size()), g.node_weights(), {}, 0.0};
  for (double e : kernel_spectrum(zero, 5)) CHECK(e == 0.0);
  CHECK(kernel_spectrum(zero, 5).size() == 5);
}

TEST_CASE("gradient examples through the full pipeline") {
  const auto g = SpaceTimeGrid::reference(5, 5, 5);
  const PdeProblem heat = reference_problem(Scenario::Heat);
  const Field h0 = solve_forward(heat, Field(g), g).u;
  const Calibration cal(heat, g, h0);
  NetParams p = init_params(3, 2.0 / 3.0, {-1.0, 1.0, 6});
  std::fill(p.c.begin(), p.c.end(), 0.0);
  const GradientResult r = gradient(cal, p);
  CHECK(r.report.j == 0.0);
  CHECK(r.grad.isZero(0.0));

  const Calibration off(heat, g, h0 + Field(g, 0.1));
  const GradientResult r2 = gradient(off, p);
  for (int i = 0; i < 3; ++i) {
    CHECK(r2.grad[5 * i] != 0.0);
    for (int k = 1; k < 5; ++k) CHECK(r2.grad[5 * i + k] == 0.0);
  }
}

TEST_CASE("adjoint gradient matches finite differences on a small instance") {
  const auto g = SpaceTimeGrid::reference(5, 5, 5);
  for (Scenario sc : {Scenario::Heat, Scenario::AllenCahn}) {
    const PdeProblem p = reference_problem(sc);
    const Field h = solve_forward(p, sample_function(g, reference_target_source), g).u;
    const Calibration cal(p, g, h);
    for (const auto& e : gradient_check(cal, init_params(3, 2.0 / 3.0, {-1.0, 1.0, 17}))) {
      CHECK(e.rel_error < 1e-6);
    }
  }
}

TEST_CASE("loss examples") {
  const auto g = SpaceTimeGrid::reference(5, 5, 5);
  const Field h = sample_function(g, [](double t, double x, double y) { return 1 + t * x - y; });
  const LossReport same = compute_loss(h, h);
  CHECK(same.j == 0.0);
  CHECK(same.rmse_rel == 0.0);
  const LossReport one = compute_loss(h + Field(g, 1.0), h);
  CHECK(one.j == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(one.rmse_rel == doctest::Approx(std::sqrt(0.5) / one.h_linf).epsilon(1e-14));
  CHECK(compute_loss(h + Field(g, 2.0), h).j == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("one small gradient step decreases the loss") {
  const auto g = SpaceTimeGrid::reference(9, 7, 7);
  const PdeProblem p = reference_problem(Scenario::AllenCahn);
  const Calibration cal(p, g, solve_forward(p, sample_function(g, reference_target_source), g).u);
  NetParams q = init_params(5, 2.0 / 3.0, {-1.0, 1.0, 3});
  const GradientResult r = gradient(cal, q);
  auto j_after = [&](double rate) {
    NetParams m = q;
    m.assign_flat(q.to_flat() - rate * r.grad);
    return evaluate_loss(cal, m).j;
  };
  const double j1 = j_after(1e-3), j2 = j_after(5e-4);
  CHECK(j1 < r.report.j);
  CHECK(j2 <= r.report.j);
}
