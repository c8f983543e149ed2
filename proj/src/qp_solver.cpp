#include "hwlaw/qp_solver.hpp"

#include <cmath>
#include <limits>

namespace hwlaw {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Dual active-set state. The factor J satisfies J' H J = I; its first iq
// columns span the normals of the active set, whose triangular factor is R.
class DualActiveSet {
 public:
  DualActiveSet(const QpProblem& qp, const Eigen::LLT<MatrixXd>& llt)
      : qp_(qp), n_(qp.num_vars()), J_(n_, n_), R_(MatrixXd::Zero(n_, n_)), u_(VectorXd::Zero(n_ + 1)),
        active_(static_cast<std::size_t>(n_ + 1), -1) {
    const MatrixXd L = llt.matrixL();
    J_ = L.transpose().triangularView<Eigen::Upper>().solve(MatrixXd::Identity(n_, n_));
  }

  // Appends the constraint whose transformed normal is d. Fails when it is
  // linearly dependent on the active set.
  bool add(VectorXd& d) {
    for (int j = n_ - 1; j > iq_; --j) {
      double cc = d[j - 1];
      double ss = d[j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d[j] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d[j - 1] = -h;
      } else {
        d[j - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1);
        const double t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    if (std::abs(d[iq_]) <= std::numeric_limits<double>::epsilon() * r_norm_ * 100.0) return false;
    R_.col(iq_).head(iq_ + 1) = d.head(iq_ + 1);
    r_norm_ = std::max(r_norm_, std::abs(d[iq_]));
    ++iq_;
    return true;
  }

  // Removes constraint `row` from the active set.
  void remove(int row) {
    int qq = -1;
    for (int i = 0; i < iq_; ++i) {
      if (active_[static_cast<std::size_t>(i)] == row) {
        qq = i;
        break;
      }
    }
    if (qq < 0) return;
    for (int i = qq; i < iq_ - 1; ++i) {
      active_[static_cast<std::size_t>(i)] = active_[static_cast<std::size_t>(i + 1)];
      u_[i] = u_[i + 1];
      R_.col(i) = R_.col(i + 1);
    }
    active_[static_cast<std::size_t>(iq_ - 1)] = active_[static_cast<std::size_t>(iq_)];
    u_[iq_ - 1] = u_[iq_];
    active_[static_cast<std::size_t>(iq_)] = -1;
    u_[iq_] = 0.0;
    R_.col(iq_ - 1).setZero();
    --iq_;
    if (iq_ == 0) return;

    for (int j = qq; j < iq_; ++j) {
      double cc = R_(j, j);
      double ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq_; ++k) {
        const double t1 = R_(j, k);
        const double t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j);
        const double t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  const QpProblem& qp_;
  int n_;
  MatrixXd J_;
  MatrixXd R_;
  VectorXd u_;
  std::vector<int> active_;
  int iq_ = 0;
  double r_norm_ = 1.0;
};

}  // namespace

QpSolution solve_qp(const QpProblem& qp, const QpOptions& options) {
  const int n = qp.num_vars();
  const int m = qp.num_rows();
  if (n == 0) throw std::invalid_argument("QP has no variables");
  if (qp.H.rows() != n || qp.H.cols() != n) throw std::invalid_argument("QP Hessian has wrong shape");
  if (qp.A.rows() != m || (m > 0 && qp.A.cols() != n)) throw std::invalid_argument("QP constraint matrix has wrong shape");
  if (!qp.H.allFinite() || !qp.g.allFinite() || !qp.A.allFinite() || !qp.b.allFinite())
    throw std::invalid_argument("QP data contains non-finite values");

  const Eigen::LLT<MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("QP Hessian is not positive definite");

  DualActiveSet st(qp, llt);
  VectorXd x = -llt.solve(qp.g);
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : 50 * (n + m) + 100;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<char> inactive(static_cast<std::size_t>(m), 1);
  std::vector<char> excluded(static_cast<std::size_t>(m), 0);
  VectorXd d(n);
  VectorXd z(n);
  VectorXd r(n + 1);
  int iterations = 0;

  auto solution = [&]() {
    QpSolution sol;
    sol.z = x;
    sol.objective = qp.objective(x);
    sol.iterations = iterations;
    sol.multipliers = VectorXd::Zero(m);
    for (int i = 0; i < st.iq_; ++i) {
      const int row = st.active_[static_cast<std::size_t>(i)];
      sol.active.push_back(row);
      sol.multipliers[row] = st.u_[i];
    }
    return sol;
  };
  auto slack = [&](int i) { return qp.b[i] - qp.A.row(i).dot(x); };

  while (true) {
    // Step 1: most violated constraint among the inactive, non-excluded rows.
    int ip = -1;
    double worst = 0.0;
    for (int i = 0; i < m; ++i) {
      if (!inactive[static_cast<std::size_t>(i)] || excluded[static_cast<std::size_t>(i)]) continue;
      const double s = slack(i);
      const double tol = options.feasibility_tol * (1.0 + std::abs(qp.b[i]));
      if (s < -tol && s < worst) {
        worst = s;
        ip = i;
      }
    }
    if (ip < 0) return solution();

    const VectorXd np = -qp.A.row(ip).transpose();
    st.u_[st.iq_] = 0.0;
    st.active_[static_cast<std::size_t>(st.iq_)] = ip;

    // Step 2: move towards satisfying ip, dropping constraints as needed.
    while (true) {
      if (++iterations > max_iter) throw QpError("QP iteration limit reached", solution());
      const int iq = st.iq_;
      d = st.J_.transpose() * np;
      z = st.J_.rightCols(n - iq) * d.tail(n - iq);
      if (iq > 0) r.head(iq) = st.R_.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));

      double t1 = kInf;
      int l = -1;
      for (int k = 0; k < iq; ++k) {
        if (r[k] > 0.0 && st.u_[k] / r[k] < t1) {
          t1 = st.u_[k] / r[k];
          l = st.active_[static_cast<std::size_t>(k)];
        }
      }
      double t2 = kInf;
      if (z.norm() > 1e-12 * np.norm()) t2 = -slack(ip) / z.dot(np);
      const double t = std::min(t1, t2);
      if (t == kInf) throw QpError("QP is infeasible", solution());

      if (t2 == kInf) {
        st.u_.head(iq) -= t * r.head(iq);
        st.u_[iq] += t;
        inactive[static_cast<std::size_t>(l)] = 1;
        st.remove(l);
        continue;
      }

      x += t * z;
      st.u_.head(iq) -= t * r.head(iq);
      st.u_[iq] += t;

      if (t2 <= t1) {
        if (st.add(d)) {
          inactive[static_cast<std::size_t>(ip)] = 0;
          std::fill(excluded.begin(), excluded.end(), 0);
        } else {
          excluded[static_cast<std::size_t>(ip)] = 1;
        }
        break;
      }
      inactive[static_cast<std::size_t>(l)] = 1;
      st.remove(l);
    }
  }
}

}  // namespace hwlaw
