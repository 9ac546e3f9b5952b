// Wall-clock comparison of the OpenMP kernels against their serial references.
//
//   bench_kernels [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "nnpde/net_kernels.hpp"
#include "nnpde/shallow_net.hpp"

using namespace nnpde;

namespace {

double seconds(const std::function<void()>& fn, int repeats) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void row(const std::string& name, double serial, double parallel, double diff) {
  std::printf("%-34s %12.4f %12.4f %8.2fx %12.3e\n", name.c_str(), serial * 1e3, parallel * 1e3,
              serial / parallel, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
  std::printf("threads: %d, best of %d\n", omp_get_max_threads(), repeats);
  std::printf("%-34s %12s %12s %9s %12s\n", "kernel", "serial ms", "parallel ms", "speedup",
              "max |diff|");

  const SpaceTimeGrid grid = SpaceTimeGrid::reference(33, 17, 17);
  for (int n : {50, 1000}) {
    const NetParams p = init_params(n, 2.0 / 3.0, {-1.0, 1.0, 1});
    Field gs(grid), gp(grid);
    const double ts = seconds([&] { gs = kernels::eval_net_serial(p, grid); }, repeats);
    const double tp = seconds([&] { gp = kernels::eval_net_parallel(p, grid); }, repeats);
    double d = 0.0;
    for (std::size_t k = 0; k < gs.size(); ++k) d = std::max(d, std::abs(gs[k] - gp[k]));
    row("eval_net N=" + std::to_string(n), ts, tp, d);

    Eigen::VectorXd rs, rp;
    const double gts = seconds([&] { rs = kernels::param_gradient_serial(p, gs); }, repeats);
    const double gtp = seconds([&] { rp = kernels::param_gradient_parallel(p, gs); }, repeats);
    row("param_gradient N=" + std::to_string(n), gts, gtp, (rs - rp).cwiseAbs().maxCoeff());
  }

  const SpaceTimeGrid small = SpaceTimeGrid::reference(7, 7, 7);
  const auto units = sample_neurons(500, {-1.0, 1.0, 2});
  Eigen::MatrixXd bs, bp;
  const double ks = seconds([&] { bs = kernels::kernel_matrix_serial(units, Activation::Tanh, small); }, repeats);
  const double kp = seconds([&] { bp = kernels::kernel_matrix_parallel(units, Activation::Tanh, small); }, repeats);
  row("kernel_matrix 343 nodes, 500 units", ks, kp, (bs - bp).cwiseAbs().maxCoeff());

  const KernelOperator op{small, bp, small.node_weights(), {}, 0.0};
  Field u(small, 1.0), ts_out(small), tp_out(small);
  const double as = seconds([&] { ts_out = kernels::apply_operator_serial(op, u); }, repeats);
  const double ap = seconds([&] { tp_out = kernels::apply_operator_parallel(op, u); }, repeats);
  double d = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) d = std::max(d, std::abs(ts_out[k] - tp_out[k]));
  row("apply_operator 343 nodes", as, ap, d);
  return 0;
}
