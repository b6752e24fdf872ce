#pragma once

// Sinc-function DVR (uniform grid, Colbert-Miller kinetic matrix) for 1D and
// 2D potentials. Small problems are diagonalised densely; 2D grids use a
// block Davidson iteration preconditioned by the separable part of H.

#include "scivr/pes.hpp"
#include "scivr/spectrum.hpp"
#include "scivr/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace scivr {

struct DvrAxis {
  double a = -1.0;
  double b = 1.0;
  int n = 16;

  double dx() const { return (b - a) / (n - 1); }
  double x(int i) const { return a + i * dx(); }
  bool operator==(const DvrAxis&) const = default;
};

struct DvrGrid {
  std::vector<DvrAxis> axes;

  int dimension() const { return static_cast<int>(axes.size()); }
  long long size() const {
    long long s = 1;
    for (const auto& ax : axes) s *= ax.n;
    return s;
  }
  double cell_volume() const {
    double v = 1.0;
    for (const auto& ax : axes) v *= ax.dx();
    return v;
  }
  bool operator==(const DvrGrid&) const = default;
  void validate() const {
    if (axes.empty() || axes.size() > 2) throw ConfigError("dvr", "grid must be 1D or 2D");
    for (std::size_t d = 0; d < axes.size(); ++d) {
      const std::string f = "dvr.axis" + std::to_string(d + 1);
      if (!(axes[d].b > axes[d].a)) throw ConfigError(f, "range must satisfy b > a");
      if (axes[d].n < 16) throw ConfigError(f, "need at least 16 points");
    }
  }
};

/// T_ij = 1/(2 dx^2) (-1)^(i-j) { pi^2/3 if i == j, 2/(i-j)^2 otherwise } (unit mass).
inline Eigen::MatrixXd sinc_kinetic(int n, double dx) {
  Eigen::MatrixXd T(n, n);
  const double c = kHbar * kHbar / (2.0 * dx * dx);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int d = i - j;
      const double sign = (d % 2 == 0) ? 1.0 : -1.0;
      T(i, j) = c * sign * (d == 0 ? kPi * kPi / 3.0 : 2.0 / double(d * d));
    }
  return T;
}

enum class DvrMethod { Auto, Dense, Davidson };

struct DvrOptions {
  DvrMethod method = DvrMethod::Auto;
  bool vectors = false;
  double tol = 1e-9;        // residual norm per state
  int max_iterations = 500;
  int extra_block = 6;      // block size is n_states + extra_block
  long long dense_limit = 3000;
};

struct DvrResult {
  std::vector<double> energies;
  Eigen::MatrixXd vectors;  // columns, unit 2-norm; grid index i0 + n0 * i1
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = true;
};

namespace detail {

inline Eigen::MatrixXd dvr_potential(const PesSpec& spec, const DvrGrid& g) {
  if (g.dimension() == 1) {
    Eigen::MatrixXd V(g.axes[0].n, 1);
    for (int i = 0; i < g.axes[0].n; ++i) V(i, 0) = evaluate(spec, Eigen::VectorXd::Constant(1, g.axes[0].x(i))).V;
    return V;
  }
  Eigen::MatrixXd V(g.axes[0].n, g.axes[1].n);
  Potential<2> pot(spec);
  for (int j = 0; j < g.axes[1].n; ++j)
    for (int i = 0; i < g.axes[0].n; ++i) V(i, j) = pot.value(Vec<2>(g.axes[0].x(i), g.axes[1].x(j)));
  return V;
}

inline DvrResult dense_solve(const Eigen::MatrixXd& H, int n_states, bool vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense DVR diagonalisation failed");
  DvrResult r;
  for (int s = 0; s < n_states; ++s) {
    r.energies.push_back(es.eigenvalues()[s]);
    r.residuals.push_back((H * es.eigenvectors().col(s) - es.eigenvalues()[s] * es.eigenvectors().col(s)).norm());
  }
  if (vectors) r.vectors = es.eigenvectors().leftCols(n_states);
  return r;
}

/// Block Davidson for H = Tx (x) 1 + 1 (x) Ty + diag(V) acting on psi(i, j).
class Davidson2D {
 public:
  Davidson2D(const Eigen::MatrixXd& Tx, const Eigen::MatrixXd& Ty, const Eigen::MatrixXd& V)
      : Tx_(Tx), Ty_(Ty), V_(V), nx_(int(Tx.rows())), ny_(int(Ty.rows())) {
    // Separable reference: potential cuts through the grid centre.
    const int cx = nx_ / 2, cy = ny_ / 2;
    Eigen::MatrixXd hx = Tx_, hy = Ty_;
    for (int i = 0; i < nx_; ++i) hx(i, i) += V_(i, cy);
    for (int j = 0; j < ny_; ++j) hy(j, j) += V_(cx, j) - V_(cx, cy);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(hx), ey(hy);
    Ex_ = ex.eigenvalues();
    Ux_ = ex.eigenvectors();
    Ey_ = ey.eigenvalues();
    Uy_ = ey.eigenvectors();
  }

  long long size() const { return (long long)nx_ * ny_; }

  void apply(const double* in, double* out) const {
    Eigen::Map<const Eigen::MatrixXd> P(in, nx_, ny_);
    Eigen::Map<Eigen::MatrixXd> O(out, nx_, ny_);
    O.noalias() = Tx_ * P;
    O.noalias() += P * Ty_;
    O += V_.cwiseProduct(P);
  }

  /// (H0 - theta)^-1 r using the separable eigenbasis.
  void precondition(const double* r, double theta, double* out) const {
    Eigen::Map<const Eigen::MatrixXd> R(r, nx_, ny_);
    Eigen::MatrixXd C = Ux_.transpose() * R * Uy_;
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        double d = Ex_[i] + Ey_[j] - theta;
        if (std::abs(d) < 1e-8) d = d < 0 ? -1e-8 : 1e-8;
        C(i, j) /= d;
      }
    Eigen::Map<Eigen::MatrixXd> O(out, nx_, ny_);
    O.noalias() = Ux_ * C * Uy_.transpose();
  }

  /// Lowest `count` product states of the separable reference.
  Eigen::MatrixXd initial_guess(int count) const {
    std::vector<std::pair<double, std::pair<int, int>>> e;
    for (int i = 0; i < std::min(nx_, count + 1); ++i)
      for (int j = 0; j < std::min(ny_, count + 1); ++j) e.push_back({Ex_[i] + Ey_[j], {i, j}});
    std::sort(e.begin(), e.end());
    Eigen::MatrixXd G(size(), count);
    for (int c = 0; c < count; ++c) {
      Eigen::MatrixXd P = Ux_.col(e[c].second.first) * Uy_.col(e[c].second.second).transpose();
      G.col(c) = Eigen::Map<Eigen::VectorXd>(P.data(), size());
    }
    return G;
  }

 private:
  Eigen::MatrixXd Tx_, Ty_, V_;
  int nx_, ny_;
  Eigen::VectorXd Ex_, Ey_;
  Eigen::MatrixXd Ux_, Uy_;
};

inline DvrResult davidson_solve(const Davidson2D& op, int n_states, const DvrOptions& opt) {
  const long long N = op.size();
  const int nb = std::min<long long>(n_states + opt.extra_block, N);
  const int max_basis = std::min<long long>(4 * nb, N);
  Eigen::MatrixXd Vb = op.initial_guess(nb);
  {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Vb);
    Vb = qr.householderQ() * Eigen::MatrixXd::Identity(N, nb);
  }
  Eigen::MatrixXd Wb(N, nb);
  for (int c = 0; c < nb; ++c) op.apply(Vb.col(c).data(), Wb.col(c).data());

  DvrResult res;
  res.converged = false;
  Eigen::VectorXd theta;
  Eigen::MatrixXd X, R;
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    Eigen::MatrixXd Hs = Vb.transpose() * Wb;
    Hs = 0.5 * (Hs + Hs.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs);
    theta = es.eigenvalues().head(nb);
    Eigen::MatrixXd Y = es.eigenvectors().leftCols(nb);
    X = Vb * Y;
    Eigen::MatrixXd HX = Wb * Y;
    R = HX - X * theta.asDiagonal();

    std::vector<int> todo;
    for (int s = 0; s < nb; ++s)
      if (R.col(s).norm() > opt.tol) todo.push_back(s);
    bool done = true;
    for (int s = 0; s < n_states; ++s)
      if (R.col(s).norm() > opt.tol) done = false;
    if (done) {
      res.converged = true;
      break;
    }

    if (Vb.cols() + static_cast<int>(todo.size()) > max_basis) {
      Vb = X;
      Wb = HX;
    }
    std::vector<Eigen::VectorXd> add;
    Eigen::VectorXd t(N);
    for (int s : todo) {
      op.precondition(R.col(s).data(), theta[s], t.data());
      for (int pass = 0; pass < 2; ++pass) {
        t -= Vb * (Vb.transpose() * t);
        for (const auto& a : add) t -= a * a.dot(t);
      }
      const double nt = t.norm();
      if (nt > 1e-10) add.push_back(t / nt);
    }
    if (add.empty()) break;
    const int old = static_cast<int>(Vb.cols());
    Vb.conservativeResize(Eigen::NoChange, old + static_cast<int>(add.size()));
    Wb.conservativeResize(Eigen::NoChange, old + static_cast<int>(add.size()));
    for (std::size_t c = 0; c < add.size(); ++c) {
      Vb.col(old + c) = add[c];
      op.apply(Vb.col(old + c).data(), Wb.col(old + c).data());
    }
  }
  for (int s = 0; s < n_states; ++s) {
    res.energies.push_back(theta[s]);
    res.residuals.push_back(R.col(s).norm());
  }
  if (opt.vectors) {
    res.vectors = X.leftCols(n_states);
    for (int s = 0; s < n_states; ++s) res.vectors.col(s).normalize();
  }
  return res;
}

}  // namespace detail

/// Lowest n_states eigenvalues (ascending) of the sinc-DVR Hamiltonian.
inline DvrResult dvr_solve(const PesSpec& spec, const DvrGrid& grid, int n_states,
                           const DvrOptions& opt = {}) {
  grid.validate();
  if (grid.dimension() != spec.dimension())
    throw ConfigError("dvr", "grid dimension " + std::to_string(grid.dimension()) +
                                 " does not match potential dimension " +
                                 std::to_string(spec.dimension()));
  if (n_states < 1 || n_states > grid.size())
    throw ConfigError("dvr.states", "number of states must be in [1, grid size]");
  const Eigen::MatrixXd V = detail::dvr_potential(spec, grid);
  if (!V.allFinite()) throw ConfigError("dvr", "potential is not finite on the grid");
  const auto& ax = grid.axes;
  const Eigen::MatrixXd Tx = sinc_kinetic(ax[0].n, ax[0].dx());

  if (grid.dimension() == 1) {
    Eigen::MatrixXd H = Tx;
    H.diagonal() += V.col(0);
    return detail::dense_solve(H, n_states, opt.vectors);
  }
  const Eigen::MatrixXd Ty = sinc_kinetic(ax[1].n, ax[1].dx());
  const bool dense = opt.method == DvrMethod::Dense ||
                     (opt.method == DvrMethod::Auto && grid.size() <= opt.dense_limit);
  if (dense) {
    const int nx = ax[0].n, ny = ax[1].n;
    const long long N = grid.size();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const long long r = i + (long long)nx * j;
        for (int k = 0; k < nx; ++k) H(r, k + (long long)nx * j) += Tx(i, k);
        for (int l = 0; l < ny; ++l) H(r, i + (long long)nx * l) += Ty(j, l);
        H(r, r) += V(i, j);
      }
    return detail::dense_solve(H, n_states, opt.vectors);
  }
  detail::Davidson2D op(Tx, Ty, V);
  return detail::davidson_solve(op, n_states, opt);
}

/// Result at the requested grid and at a coarser one (about 3/4 of the
/// points per axis over the same range).
struct DvrRefinement {
  DvrResult fine;
  DvrResult coarse;
  double max_shift = 0.0;
};

inline DvrRefinement dvr_refine(const PesSpec& spec, const DvrGrid& grid, int n_states,
                                const DvrOptions& opt = {}) {
  DvrGrid coarse = grid;
  for (auto& a : coarse.axes) a.n = std::max(16, (3 * a.n) / 4);
  DvrRefinement r;
  r.fine = dvr_solve(spec, grid, n_states, opt);
  DvrOptions o2 = opt;
  o2.vectors = false;
  r.coarse = dvr_solve(spec, coarse, n_states, o2);
  for (int s = 0; s < n_states; ++s)
    r.max_shift = std::max(r.max_shift, std::abs(r.fine.energies[s] - r.coarse.energies[s]));
  return r;
}

/// |<psi|chi>|^2 for a unit-norm grid eigenvector.
template <int F>
double overlap_with_reference(const Eigen::VectorXd& v, const Reference<F>& chi, const DvrGrid& grid) {
  if (grid.dimension() != F) throw ConfigError("dvr", "reference dimension mismatch");
  const double dV = grid.cell_volume();
  cplx s = 0.0;
  const int n0 = grid.axes[0].n;
  for (long long idx = 0; idx < v.size(); ++idx) {
    Vec<F> x;
    x[0] = grid.axes[0].x(static_cast<int>(idx % n0));
    if constexpr (F == 2) x[1] = grid.axes[1].x(static_cast<int>(idx / n0));
    cplx c = 0.0;
    for (std::size_t t = 0; t < chi.states.size(); ++t) c += chi.coeff[t] * coherent_wavefunction(chi.states[t], x);
    s += v[idx] * c;
  }
  return std::norm(s * std::sqrt(dV));
}

}  // namespace scivr
