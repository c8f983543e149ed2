#include "qp_oracle.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace hwlaw::testing {

namespace {

// Calls f on every k-subset of {0..n-1}; stops when f returns true.
template <class F>
bool for_each_subset(int n, int k, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    if (f(idx)) return true;
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return false;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace

std::optional<Eigen::VectorXd> enumerate_qp(const QpProblem& qp, double tol) {
  const int n = qp.num_vars();
  const int m = qp.num_rows();
  std::optional<Eigen::VectorXd> found;
  for (int k = 0; k <= std::min(n, m) && !found; ++k) {
    for_each_subset(m, k, [&](const std::vector<int>& w) {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
      Eigen::VectorXd rhs(n + k);
      K.topLeftCorner(n, n) = qp.H;
      rhs.head(n) = -qp.g;
      for (int i = 0; i < k; ++i) {
        const int r = w[static_cast<std::size_t>(i)];
        K.block(n + i, 0, 1, n) = qp.A.row(r);
        K.block(0, n + i, n, 1) = qp.A.row(r).transpose();
        rhs[n + i] = qp.b[r];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
      if (!lu.isInvertible()) return false;
      const Eigen::VectorXd sol = lu.solve(rhs);
      const Eigen::VectorXd z = sol.head(n);
      for (int i = 0; i < k; ++i) {
        if (sol[n + i] < -tol * (1.0 + sol.tail(k).cwiseAbs().maxCoeff())) return false;
      }
      const Eigen::VectorXd slack = qp.b - qp.A * z;
      for (int r = 0; r < m; ++r) {
        if (slack[r] < -tol * (1.0 + std::abs(qp.b[r]) + qp.A.row(r).cwiseAbs().dot(z.cwiseAbs()))) return false;
      }
      found = z;
      return true;
    });
  }
  return found;
}

RandomMpc random_small_mpc(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  constexpr double kInf = std::numeric_limits<double>::infinity();

  RandomMpc r;
  r.cfg.Np = 1 + static_cast<int>(u01(rng) * 3.0);
  r.cfg.Nc = 1 + static_cast<int>(u01(rng) * std::min(2, r.cfg.Np));
  r.cfg.dt = uni(0.03, 0.1);
  r.cfg.w_v = uni(0.1, 5.0);
  r.cfg.w_phi = uni(0.0, 20.0);
  r.cfg.w_Y = uni(0.1, 10.0);
  r.cfg.w_F = uni(1e-7, 1e-5);
  r.cfg.w_delta = uni(0.1, 20.0);
  r.cfg.slack_penalty = std::pow(10.0, uni(2.0, 4.0));
  r.cfg.max_accel = uni(2.0, 5.0);
  r.cfg.max_steer = uni(0.05, 0.15);
  r.cfg.max_jerk = uni(5.0, 20.0);
  r.cfg.max_steer_rate = uni(0.2, 1.0);

  const double vx = uni(5.0, 35.0);
  r.problem.model = linearize(r.params, vx, r.cfg.dt);
  r.x0 << vx, uni(-0.3, 0.3), uni(-0.05, 0.05), uni(-0.03, 0.03), 0.0, uni(0.0, 7.5);
  r.u_prev << uni(-0.5, 0.5) * r.cfg.max_accel * r.params.mass, uni(-0.5, 0.5) * r.cfg.max_steer;
  for (int k = 0; k < r.cfg.Np; ++k) {
    r.problem.y_des.emplace_back(vx + uni(-3.0, 3.0), 0.0, r.x0[5] + uni(-2.0, 2.0));
    Eigen::Vector2d lo(-kInf, -kInf);
    Eigen::Vector2d hi(kInf, kInf);
    if (u01(rng) < 0.5) lo[0] = vx + uni(-1.0, 0.2);
    if (u01(rng) < 0.5) hi[0] = vx + uni(-0.2, 1.0);
    if (u01(rng) < 0.5) lo[1] = r.x0[5] + uni(-0.5, 0.05);
    if (u01(rng) < 0.5) hi[1] = r.x0[5] + uni(-0.05, 0.5);
    r.problem.ys_min.push_back(lo);
    r.problem.ys_max.push_back(hi);
  }
  return r;
}

QpProblem random_generic_qp(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  const int n = 1 + static_cast<int>(u01(rng) * 6.0);
  const int m = static_cast<int>(u01(rng) * 12.0);
  QpProblem qp;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = nrm(rng);
  qp.H = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(n, n);
  qp.g.resize(n);
  for (int i = 0; i < n; ++i) qp.g[i] = 3.0 * nrm(rng);
  Eigen::VectorXd feasible(n);
  for (int i = 0; i < n; ++i) feasible[i] = nrm(rng);
  qp.A.resize(m, n);
  qp.b.resize(m);
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) qp.A(r, j) = nrm(rng);
    qp.b[r] = qp.A.row(r).dot(feasible) + u01(rng);
  }
  return qp;
}

}  // namespace hwlaw::testing
