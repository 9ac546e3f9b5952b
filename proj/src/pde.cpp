#include "nnpde/pde.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <sstream>

#include "nnpde/errors.hpp"

namespace nnpde {

double SymMatrix2::min_eigenvalue() const {
  const double mean = 0.5 * (xx + yy);
  const double r = std::hypot(0.5 * (xx - yy), xy);
  return mean - r;
}

Nonlinearity Nonlinearity::zero() {
  auto z = [](double, double, double, double) { return 0.0; };
  return {z, z, z};
}

Nonlinearity Nonlinearity::allen_cahn() {
  return {[](double, double, double, double u) { return u * u * u - u; },
          [](double, double, double, double u) { return 3.0 * u * u - 1.0; },
          [](double, double, double, double u) { return 6.0 * u; }};
}

PdeProblem PdeProblem::isotropic(double nu) {
  PdeProblem p;
  p.diffusion = [nu](double, double, double) { return SymMatrix2{nu, 0.0, nu}; };
  p.drift = [](double, double, double) { return Vector2{}; };
  p.reaction = [](double, double, double) { return 0.0; };
  p.q = Nonlinearity::zero();
  p.initial = [](double, double) { return 0.0; };
  return p;
}

using SparseLu = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;

struct ParabolicSolver::Factorizations {
  // Indexed by time level; a single shared entry when coefficients are time independent.
  std::vector<std::unique_ptr<SparseLu>> by_level;
  bool shared = false;

  SparseLu& at(int n) { return *by_level[shared ? 0 : n]; }
};

ParabolicSolver::~ParabolicSolver() = default;
ParabolicSolver::ParabolicSolver(ParabolicSolver&&) noexcept = default;
ParabolicSolver& ParabolicSolver::operator=(ParabolicSolver&&) noexcept = default;

ParabolicSolver::ParabolicSolver(PdeProblem problem, const SpaceTimeGrid& grid)
    : problem_(std::move(problem)), grid_(grid), lu_(std::make_unique<Factorizations>()) {
  if (!problem_.diffusion || !problem_.drift || !problem_.reaction || !problem_.q.value ||
      !problem_.q.du || !problem_.q.duu || !problem_.initial) {
    throw ConfigError("PDE problem has unset coefficient functions");
  }
  // Uniform parabolicity on every node.
  for (int n = 0; n < grid_.t_count(); ++n) {
    if (!problem_.time_dependent && n > 0) break;
    for (int i = 0; i < grid_.x_count(); ++i)
      for (int j = 0; j < grid_.y_count(); ++j) {
        const double nu = problem_.diffusion(grid_.t(n), grid_.x(i), grid_.y(j)).min_eigenvalue();
        if (!(nu > 0.0)) {
          std::ostringstream os;
          os << "diffusion not uniformly parabolic: min eigenvalue " << nu << " at (t,x,y)=("
             << grid_.t(n) << "," << grid_.x(i) << "," << grid_.y(j) << ")";
          throw ConfigError(os.str());
        }
      }
  }
  for (int i = 0; i < grid_.x_count(); ++i)
    for (int j = 0; j < grid_.y_count(); ++j) {
      if (!grid_.on_spatial_boundary(i, j)) continue;
      const double f = problem_.initial(grid_.x(i), grid_.y(j));
      if (!(std::abs(f) <= 1e-12)) {
        std::ostringstream os;
        os << "initial condition does not vanish on the boundary: f(" << grid_.x(i) << ","
           << grid_.y(j) << ") = " << f;
        throw DataError(os.str());
      }
    }

  const int levels = problem_.time_dependent ? grid_.t_count() : 1;
  lu_->shared = !problem_.time_dependent;
  lu_->by_level.resize(levels);
  for (int n = 0; n < levels; ++n) {
    // Level 0 is never used for stepping when coefficients vary in time.
    if (problem_.time_dependent && n == 0) continue;
    auto lu = std::make_unique<SparseLu>();
    lu->compute(implicit_operator(n));
    if (lu->info() != Eigen::Success) {
      throw NumericalError("implicit operator factorization failed: " + lu->lastErrorMessage(), n);
    }
    lu_->by_level[n] = std::move(lu);
  }
}

Eigen::SparseMatrix<double> ParabolicSolver::spatial_operator(int n) const {
  const int nx = grid_.x_count(), ny = grid_.y_count();
  const int mx = nx - 2, my = ny - 2;
  const double t = grid_.t(n), hx = grid_.hx(), hy = grid_.hy();

  std::vector<SymMatrix2> a(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) a[i * ny + j] = problem_.diffusion(t, grid_.x(i), grid_.y(j));
  auto A = [&](int i, int j) -> const SymMatrix2& { return a[i * ny + j]; };

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(mx) * my * 9);
  auto add = [&](int row, int i, int j, double v) {
    if (i <= 0 || j <= 0 || i >= nx - 1 || j >= ny - 1) return;  // Dirichlet neighbour
    entries.emplace_back(row, (i - 1) * my + (j - 1), v);
  };

  const double cxx = 1.0 / (hx * hx), cyy = 1.0 / (hy * hy), cxy = 1.0 / (4.0 * hx * hy);
  for (int i = 1; i < nx - 1; ++i) {
    for (int j = 1; j < ny - 1; ++j) {
      const int row = (i - 1) * my + (j - 1);
      const double x = grid_.x(i), y = grid_.y(j);

      // -d/dx(a_xx du/dx) - d/dy(a_yy du/dy), arithmetic face averages.
      const double ae = 0.5 * (A(i, j).xx + A(i + 1, j).xx);
      const double aw = 0.5 * (A(i, j).xx + A(i - 1, j).xx);
      const double an = 0.5 * (A(i, j).yy + A(i, j + 1).yy);
      const double as = 0.5 * (A(i, j).yy + A(i, j - 1).yy);
      double diag = (ae + aw) * cxx + (an + as) * cyy;
      add(row, i + 1, j, -ae * cxx);
      add(row, i - 1, j, -aw * cxx);
      add(row, i, j + 1, -an * cyy);
      add(row, i, j - 1, -as * cyy);

      // -d/dx(a_xy du/dy) - d/dy(a_xy du/dx), central differences.
      add(row, i + 1, j + 1, -(A(i + 1, j).xy + A(i, j + 1).xy) * cxy);
      add(row, i + 1, j - 1, (A(i + 1, j).xy + A(i, j - 1).xy) * cxy);
      add(row, i - 1, j + 1, (A(i - 1, j).xy + A(i, j + 1).xy) * cxy);
      add(row, i - 1, j - 1, -(A(i - 1, j).xy + A(i, j - 1).xy) * cxy);

      const Vector2 b = problem_.drift(t, x, y);
      add(row, i + 1, j, b.x / (2.0 * hx));
      add(row, i - 1, j, -b.x / (2.0 * hx));
      add(row, i, j + 1, b.y / (2.0 * hy));
      add(row, i, j - 1, -b.y / (2.0 * hy));

      diag += problem_.reaction(t, x, y);
      entries.emplace_back(row, row, diag);
    }
  }
  Eigen::SparseMatrix<double> m(mx * my, mx * my);
  m.setFromTriplets(entries.begin(), entries.end());
  m.prune(0.0);
  return m;
}

Eigen::SparseMatrix<double> ParabolicSolver::implicit_operator(int n) const {
  const Eigen::SparseMatrix<double> a = spatial_operator(n);
  Eigen::SparseMatrix<double> id(a.rows(), a.cols());
  id.setIdentity();
  Eigen::SparseMatrix<double> m = id + grid_.dt() * a;
  m.makeCompressed();
  return m;
}

Eigen::VectorXd ParabolicSolver::interior(std::span<const double> slice) const {
  const int nx = grid_.x_count(), ny = grid_.y_count(), my = ny - 2;
  Eigen::VectorXd v((nx - 2) * my);
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 1; j < ny - 1; ++j) v[(i - 1) * my + (j - 1)] = slice[i * ny + j];
  return v;
}

void ParabolicSolver::scatter(const Eigen::VectorXd& v, std::span<double> slice) const {
  const int nx = grid_.x_count(), ny = grid_.y_count(), my = ny - 2;
  std::fill(slice.begin(), slice.end(), 0.0);
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 1; j < ny - 1; ++j) slice[i * ny + j] = v[(i - 1) * my + (j - 1)];
}

Eigen::VectorXd ParabolicSolver::weighted_interior(const Field& f, int n) const {
  const int nx = grid_.x_count(), ny = grid_.y_count(), my = ny - 2;
  Eigen::VectorXd v((nx - 2) * my);
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 1; j < ny - 1; ++j) v[(i - 1) * my + (j - 1)] = grid_.weight(n, i, j) * f(n, i, j);
  return v;
}

namespace {

void require_finite(const Eigen::VectorXd& v, int n, const char* what) {
  if (!v.allFinite()) {
    throw NumericalError(std::string(what) + " diverged (non-finite state) at time index " +
                             std::to_string(n),
                         n);
  }
}

}  // namespace

ForwardSolution ParabolicSolver::forward(const Field& g) const {
  if (!(g.grid() == grid_)) {
    throw StructuralError("solve_forward: source grid " + describe(g.grid()) +
                          " does not match solver grid " + describe(grid_));
  }
  const int nx = grid_.x_count(), ny = grid_.y_count(), my = ny - 2;
  const double dt = grid_.dt();
  Field u(grid_);
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 1; j < ny - 1; ++j) u(0, i, j) = problem_.initial(grid_.x(i), grid_.y(j));

  Eigen::VectorXd un = interior(u.slice(0));
  require_finite(un, 0, "forward solve");
  Eigen::VectorXd rhs(un.size());
  for (int n = 0; n + 1 < grid_.t_count(); ++n) {
    const double t = grid_.t(n);
    for (int i = 1; i < nx - 1; ++i)
      for (int j = 1; j < ny - 1; ++j) {
        const int k = (i - 1) * my + (j - 1);
        rhs[k] = un[k] + dt * (problem_.q.value(t, grid_.x(i), grid_.y(j), un[k]) +
                               g(n + 1, i, j));
      }
    un = lu_->at(n + 1).solve(rhs);
    require_finite(un, n + 1, "forward solve");
    scatter(un, u.slice(n + 1));
  }
  return {std::move(u)};
}

ParabolicSolver::Levels ParabolicSolver::backward(const ForwardSolution& fwd,
                                                  const Levels& sources) const {
  const int nt = grid_.t_count(), nx = grid_.x_count(), ny = grid_.y_count(), my = ny - 2;
  const double dt = grid_.dt();
  Levels lambda(nt);
  lambda[nt - 1] = lu_->at(nt - 1).transpose().solve(sources[nt - 1]);
  require_finite(lambda[nt - 1], nt - 1, "adjoint solve");
  for (int n = nt - 2; n >= 1; --n) {
    const double t = grid_.t(n);
    Eigen::VectorXd rhs = sources[n];
    for (int i = 1; i < nx - 1; ++i)
      for (int j = 1; j < ny - 1; ++j) {
        const int k = (i - 1) * my + (j - 1);
        const double qu = problem_.q.du(t, grid_.x(i), grid_.y(j), fwd.u(n, i, j));
        rhs[k] += (1.0 + dt * qu) * lambda[n + 1][k];
      }
    lambda[n] = lu_->at(n).transpose().solve(rhs);
    require_finite(lambda[n], n, "adjoint solve");
  }
  lambda[0] = Eigen::VectorXd::Zero(lambda[1].size());
  return lambda;
}

Field ParabolicSolver::adjoint_field(const Levels& lambda) const {
  const int nx = grid_.x_count(), ny = grid_.y_count(), my = ny - 2;
  const double dt = grid_.dt();
  Field out(grid_);
  // The source at level 0 never enters the scheme, so its adjoint is zero.
  for (int n = 1; n < grid_.t_count(); ++n)
    for (int i = 1; i < nx - 1; ++i)
      for (int j = 1; j < ny - 1; ++j)
        out(n, i, j) = dt * lambda[n][(i - 1) * my + (j - 1)] / grid_.weight(n, i, j);
  return out;
}

Field ParabolicSolver::adjoint(const ForwardSolution& fwd, const Field& residual) const {
  require_same_grid(fwd.u, residual, "solve_adjoint");
  if (!(residual.grid() == grid_)) throw StructuralError("solve_adjoint: grid differs from solver");
  Levels sources(grid_.t_count());
  for (int n = 0; n < grid_.t_count(); ++n) sources[n] = weighted_interior(residual, n);
  return adjoint_field(backward(fwd, sources));
}

Field ParabolicSolver::tangent(const ForwardSolution& fwd, const Field& source) const {
  require_same_grid(fwd.u, source, "tangent");
  if (!(source.grid() == grid_)) throw StructuralError("tangent: grid differs from solver");
  const int nx = grid_.x_count(), ny = grid_.y_count(), my = ny - 2;
  const double dt = grid_.dt();
  Field w(grid_);
  Eigen::VectorXd wn = Eigen::VectorXd::Zero((nx - 2) * my);
  Eigen::VectorXd rhs(wn.size());
  for (int n = 0; n + 1 < grid_.t_count(); ++n) {
    const double t = grid_.t(n);
    for (int i = 1; i < nx - 1; ++i)
      for (int j = 1; j < ny - 1; ++j) {
        const int k = (i - 1) * my + (j - 1);
        const double qu = problem_.q.du(t, grid_.x(i), grid_.y(j), fwd.u(n, i, j));
        rhs[k] = (1.0 + dt * qu) * wn[k] + dt * source(n + 1, i, j);
      }
    wn = lu_->at(n + 1).solve(rhs);
    require_finite(wn, n + 1, "tangent solve");
    scatter(wn, w.slice(n + 1));
  }
  return w;
}

SecondLevelSolution ParabolicSolver::second_level(const ForwardSolution& fwd, const Field& u_hat,
                                                  const Field& source_w) const {
  require_same_grid(fwd.u, u_hat, "solve_second_level");
  require_same_grid(fwd.u, source_w, "solve_second_level");
  Field w_hat = tangent(fwd, source_w);

  // Differentiating the adjoint recursion along w_hat: the q_uu term couples level n of
  // w_hat with the first-level multiplier at n+1, which is w_{n+1} u_hat^{n+1} / dt.
  const int nt = grid_.t_count(), nx = grid_.x_count(), ny = grid_.y_count(), my = ny - 2;
  Levels sources(nt);
  for (int n = 0; n < nt; ++n) {
    sources[n] = weighted_interior(w_hat, n);
    if (n + 1 >= nt) continue;
    const double t = grid_.t(n);
    for (int i = 1; i < nx - 1; ++i)
      for (int j = 1; j < ny - 1; ++j) {
        const double quu = problem_.q.duu(t, grid_.x(i), grid_.y(j), fwd.u(n, i, j));
        sources[n][(i - 1) * my + (j - 1)] +=
            quu * w_hat(n, i, j) * grid_.weight(n + 1, i, j) * u_hat(n + 1, i, j);
      }
  }
  Field v_hat = adjoint_field(backward(fwd, sources));
  return {std::move(w_hat), std::move(v_hat)};
}

Field ParabolicSolver::linearize_at(const Field& u) const {
  if (!(u.grid() == grid_)) throw StructuralError("linearize_at: grid differs from solver");
  Field out(grid_);
  for (int n = 0; n < grid_.t_count(); ++n)
    for (int i = 0; i < grid_.x_count(); ++i)
      for (int j = 0; j < grid_.y_count(); ++j) {
        const double v = problem_.q.du(grid_.t(n), grid_.x(i), grid_.y(j), u(n, i, j));
        if (!std::isfinite(v)) throw DataError("linearize_at: non-finite q_u");
        out(n, i, j) = v;
      }
  return out;
}

ForwardSolution solve_forward(const PdeProblem& problem, const Field& g, const SpaceTimeGrid& grid) {
  return ParabolicSolver(problem, grid).forward(g);
}

Field solve_adjoint(const PdeProblem& problem, const ForwardSolution& u, const Field& residual) {
  return ParabolicSolver(problem, u.u.grid()).adjoint(u, residual);
}

SecondLevelSolution solve_second_level(const PdeProblem& problem, const ForwardSolution& u,
                                       const Field& u_hat, const Field& source_w) {
  return ParabolicSolver(problem, u.u.grid()).second_level(u, u_hat, source_w);
}

Field linearize_at(const PdeProblem& problem, const Field& u) {
  return ParabolicSolver(problem, u.grid()).linearize_at(u);
}

}  // namespace nnpde
