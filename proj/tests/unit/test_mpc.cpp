#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hwlaw/mpc.hpp"
#include "qp_oracle.hpp"

using namespace hwlaw;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

State rk4_rollout(const LinearModel& c, State x, const Input& u, double duration, double h) {
  const int n = static_cast<int>(std::round(duration / h));
  auto f = [&](const State& s) { return State(c.A * s + c.B * u); };
  for (int i = 0; i < n; ++i) {
    const State k1 = f(x);
    const State k2 = f(x + 0.5 * h * k1);
    const State k3 = f(x + 0.5 * h * k2);
    const State k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

State euler_rollout(const VehicleParams& p, State x, const Input& u, double duration, double dt) {
  const int n = static_cast<int>(std::round(duration / dt));
  for (int i = 0; i < n; ++i) x = step_model(x, u, p, dt);
  return x;
}

MpcProblem flat_problem(const MpcConfig& cfg, const VehicleParams& p, double vx, double v_des, double y_des) {
  MpcProblem pr;
  pr.model = linearize(p, vx, cfg.dt);
  for (int k = 0; k < cfg.Np; ++k) {
    pr.y_des.emplace_back(v_des, 0.0, y_des);
    pr.ys_min.emplace_back(-kInf, -kInf);
    pr.ys_max.emplace_back(kInf, kInf);
  }
  return pr;
}

std::vector<ReferenceSample> flat_ref(int n, double v, double y) { return std::vector<ReferenceSample>(n, {v, y}); }

State start(double vx, double y) {
  State x = State::Zero();
  x[0] = vx;
  x[5] = y;
  return x;
}

}  // namespace

TEST(Model, Equilibrium) {
  const VehicleParams p;
  const State x = start(25, 1.875);
  const State n = step_model(x, Input::Zero(), p, 0.05);
  EXPECT_NEAR(n[0], 25.0, 1e-12);
  EXPECT_NEAR(n[5], 1.875, 1e-12);
  EXPECT_NEAR(n[4], 25.0 * 0.05, 1e-12);
}

TEST(Model, ForceStep) {
  const VehicleParams p;
  const State n = step_model(start(25, 0), Input(p.mass * 1.0, 0.0), p, 0.05);
  EXPECT_NEAR(n[0], 25.05, 1e-12);
}

TEST(Model, BrakingStopsAtZero) {
  const VehicleParams p;
  const State n = step_model(start(0.1, 0), Input(-p.mass * 4.0, 0.0), p, 0.05);
  EXPECT_EQ(n[0], 0.0);
}

TEST(Model, SteerStepMatchesContinuous) {
  const VehicleParams p;
  const Input u(0.0, 0.02);
  for (double vx : {10.0, 25.0, 35.0}) {
    const State x0 = start(vx, 1.875);
    const State fine = rk4_rollout(continuous_model(p, vx), x0, u, 1.0, 1e-5);
    const State e4 = euler_rollout(p, x0, u, 1.0, 5e-4);
    EXPECT_LT((e4 - fine).cwiseAbs().maxCoeff(), 1e-3) << vx;
    // yaw rate and Y rise under positive steer
    EXPECT_GT(fine[2], 0.0);
    EXPECT_GT(fine[5], x0[5]);
    // first order: halving dt halves the error
    const double e1 = (euler_rollout(p, x0, u, 1.0, 0.05) - fine).cwiseAbs().maxCoeff();
    const double e2 = (euler_rollout(p, x0, u, 1.0, 0.025) - fine).cwiseAbs().maxCoeff();
    EXPECT_NEAR(e1 / e2, 2.0, 0.2);
  }
}

TEST(Model, SlowSpeedIsClamped) {
  const VehicleParams p;
  const LinearModel a = continuous_model(p, 0.0);
  const LinearModel b = continuous_model(p, kMinModelSpeed);
  EXPECT_TRUE(a.A.allFinite());
  EXPECT_EQ(a.A, b.A);
}

TEST(Config, Validation) {
  MpcConfig c;
  EXPECT_NO_THROW(c.validate());
  c.Nc = 40;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.w_v = c.w_phi = c.w_Y = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.w_F = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.u_min = Input(1.0, 0.0);
  c.u_max = Input(-1.0, 0.0);
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(BuildQp, LeastSquaresOneStep) {
  MpcConfig cfg;
  cfg.Np = cfg.Nc = 1;
  cfg.w_F = cfg.w_delta = 0.0;
  cfg.max_accel = 1e3;
  cfg.max_jerk = 1e6;
  cfg.max_steer = 10.0;
  cfg.max_steer_rate = 1e6;
  const VehicleParams p;
  const State x0 = start(25, 1.875);
  const MpcProblem pr = flat_problem(cfg, p, 25, 26, 2.0);
  const CondensedQp cq = build_qp(pr, cfg, p, x0, Input::Zero());
  const QpSolution sol = solve_qp(cq.qp);

  // normal equations of min |W (C(Ax0 + B du) - y)|^2
  const Eigen::Matrix3d Q = Eigen::Vector3d(cfg.w_v, cfg.w_phi, cfg.w_Y).asDiagonal();
  const Eigen::Matrix<double, 3, 2> G = pr.model.C * pr.model.B;
  const Eigen::Vector3d r = pr.y_des[0] - pr.model.C * pr.model.A * x0;
  const Eigen::Vector2d du = (G.transpose() * Q * G).ldlt().solve(G.transpose() * Q * r);
  const Input got = cq.du(sol.z, 0);
  EXPECT_NEAR(got[0], du[0], 1e-6 * std::abs(du[0]) + 1e-6);
  EXPECT_NEAR(got[1], du[1], 1e-8);
}

TEST(BuildQp, PerfectTracking) {
  MpcConfig cfg;
  cfg.Np = 3;
  cfg.Nc = 2;
  const VehicleParams p;
  const State x0 = start(25, 1.875);
  MpcProblem pr = flat_problem(cfg, p, 25, 0, 0);
  State x = x0;
  for (int k = 0; k < cfg.Np; ++k) {
    x = pr.model.A * x;
    pr.y_des[static_cast<std::size_t>(k)] = pr.model.C * x;
  }
  const CondensedQp cq = build_qp(pr, cfg, p, x0, Input::Zero());
  const QpSolution sol = solve_qp(cq.qp);
  EXPECT_LT(sol.z.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(sol.objective + cq.constant, 0.0, 1e-9);
}

TEST(BuildQp, SpeedBoundBindsLikeGridSearch) {
  MpcConfig cfg;
  cfg.Np = cfg.Nc = 1;
  cfg.slack_penalty = 1e8;
  const VehicleParams p;
  const State x0 = start(25, 1.875);
  MpcProblem pr = flat_problem(cfg, p, 25, 30, 1.875);
  const double bound = 25.05;
  pr.ys_max[0][0] = bound;
  const CondensedQp cq = build_qp(pr, cfg, p, x0, Input::Zero());
  const QpSolution sol = solve_qp(cq.qp);
  const double v1 = cq.free[0][0] + (cq.sens[0] * Eigen::Vector2d(cq.du(sol.z, 0))).x();
  EXPECT_NEAR(v1, bound - cfg.speed_margin, 1e-6);

  // brute force over the force increment, steer fixed at zero
  double best = kInf;
  double best_v = 0.0;
  const double lim = cfg.max_jerk * cfg.dt;
  for (int i = 0; i <= 200000; ++i) {
    const double a = -lim + 2.0 * lim * i / 200000.0;
    const double v = x0[0] + cfg.dt * a;
    if (v > bound - cfg.speed_margin + 1e-12) continue;
    const double cost = rollout_cost(pr, cfg, x0, Input::Zero(), {Input(a * p.mass, 0.0)}, 0.0, 0.0);
    if (cost < best) {
      best = cost;
      best_v = v;
    }
  }
  EXPECT_NEAR(best_v, v1, 1e-5);
  EXPECT_LE(sol.objective + cq.constant, best + 1e-6);
}

TEST(SolveQp, Unconstrained) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    QpProblem qp = hwlaw::testing::random_generic_qp(rng);
    qp.A.resize(0, qp.num_vars());
    qp.b.resize(0);
    const QpSolution sol = solve_qp(qp);
    const Eigen::VectorXd z = -qp.H.ldlt().solve(qp.g);
    EXPECT_LT((sol.z - z).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(SolveQp, ZeroGradient) {
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(3, 3);
  qp.g = Eigen::VectorXd::Zero(3);
  qp.A = Eigen::MatrixXd::Identity(3, 3);
  qp.b = Eigen::VectorXd::Ones(3);
  EXPECT_LT(solve_qp(qp).z.norm(), 1e-15);
}

TEST(SolveQp, Failures) {
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(1, 1);
  qp.g = Eigen::VectorXd::Zero(1);
  qp.A.resize(2, 1);
  qp.A << 1.0, -1.0;
  qp.b.resize(2);
  qp.b << -1.0, -1.0;  // z <= -1 and z >= 1
  EXPECT_THROW(solve_qp(qp), QpError);
  qp.H(0, 0) = -1.0;
  EXPECT_THROW(solve_qp(qp), std::invalid_argument);
}

TEST(SolveQp, MatchesEnumerationGeneric) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const QpProblem qp = hwlaw::testing::random_generic_qp(rng);
    const auto want = hwlaw::testing::enumerate_qp(qp);
    ASSERT_TRUE(want);
    const QpSolution sol = solve_qp(qp);
    EXPECT_LT((sol.z - *want).cwiseAbs().maxCoeff(), 1e-6) << i;
  }
}

TEST(SolveQp, MatchesEnumerationMpc) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const hwlaw::testing::RandomMpc m = hwlaw::testing::random_small_mpc(rng);
    const CondensedQp cq = build_qp(m.problem, m.cfg, m.params, m.x0, m.u_prev);
    const auto want = hwlaw::testing::enumerate_qp(cq.qp);
    ASSERT_TRUE(want) << i;
    const QpSolution sol = solve_qp(cq.qp);
    EXPECT_LT((sol.z - *want).cwiseAbs().maxCoeff(), 1e-4) << i;
  }
}

TEST(BuildQp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nrm(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const hwlaw::testing::RandomMpc m = hwlaw::testing::random_small_mpc(rng);
    const CondensedQp cq = build_qp(m.problem, m.cfg, m.params, m.x0, m.u_prev);
    const int nz = cq.qp.num_vars();
    Eigen::VectorXd z(nz);
    for (int j = 0; j < nz; ++j) z[j] = 0.1 * nrm(rng);
    auto cost = [&](const Eigen::VectorXd& v) {
      std::vector<Input> du;
      for (int j = 0; j < cq.nc; ++j) du.push_back(cq.du(v, j));
      return rollout_cost(m.problem, m.cfg, m.x0, m.u_prev, du, v[nz - 2], v[nz - 1]);
    };
    // same function
    EXPECT_NEAR(cq.qp.objective(z) + cq.constant, cost(z), 1e-7 * std::max(1.0, std::abs(cost(z))));
    const Eigen::VectorXd grad = cq.qp.H * z + cq.qp.g;
    for (int j = 0; j < nz; ++j) {
      const double h = 1e-4 * std::max(1.0, std::abs(z[j]));
      Eigen::VectorXd a = z;
      Eigen::VectorXd b = z;
      a[j] += h;
      b[j] -= h;
      const double fd = (cost(a) - cost(b)) / (2.0 * h);
      EXPECT_LE(std::abs(fd - grad[j]), 1e-6 * std::max(std::abs(grad[j]), 1.0)) << i << " " << j;
    }
  }
}

TEST(BuildQp, OutputRowsHonourSlack) {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 100; ++i) {
    const hwlaw::testing::RandomMpc m = hwlaw::testing::random_small_mpc(rng);
    const CondensedQp cq = build_qp(m.problem, m.cfg, m.params, m.x0, m.u_prev);
    const QpSolution sol = solve_qp(cq.qp);
    const int ndu = 2 * cq.nc;
    for (int k = 0; k < m.cfg.Np; ++k) {
      Eigen::Vector3d y = cq.free[static_cast<std::size_t>(k)];
      for (int j = 0; j < cq.nc; ++j)
        y += cq.sens[static_cast<std::size_t>(k)].middleCols(2 * j, 2) * cq.du(sol.z, j);
      const Eigen::Vector2d ys(y[0], y[2]);
      const double margin[2] = {m.cfg.speed_margin, m.cfg.lateral_margin};
      for (int c = 0; c < 2; ++c) {
        const double lo = m.problem.ys_min[static_cast<std::size_t>(k)][c];
        const double hi = m.problem.ys_max[static_cast<std::size_t>(k)][c];
        const double s = sol.z[ndu + c];
        if (std::isfinite(lo) && std::isfinite(hi) && lo + margin[c] > hi - margin[c]) continue;
        if (std::isfinite(hi)) {
          EXPECT_LE(ys[c], hi - margin[c] + s + 1e-6);
        }
        if (std::isfinite(lo)) {
          EXPECT_GE(ys[c], lo + margin[c] - s - 1e-6);
        }
      }
    }
  }
}

TEST(MpcStep, BoundsHoldInClosedLoop) {
  const VehicleParams p;
  MpcConfig cfg;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  State x = start(25, 1.875);
  Input up = Input::Zero();
  const Input lo = cfg.input_min(p);
  const Input hi = cfg.input_max(p);
  const Input rlo = cfg.rate_min(p);
  const Input rhi = cfg.rate_max(p);
  for (int i = 0; i < 400; ++i) {
    const double v = 15 + 20 * u(rng);
    const double y = 7.5 * u(rng);
    const MpcResult r = mpc_step({}, flat_ref(cfg.Np, v, y), x, up, cfg, p);
    const Input du = r.u - up;
    for (int c = 0; c < 2; ++c) {
      ASSERT_GE(r.u[c], lo[c]);
      ASSERT_LE(r.u[c], hi[c]);
      ASSERT_GE(du[c], rlo[c] - 1e-9 * std::abs(rlo[c]));
      ASSERT_LE(du[c], rhi[c] + 1e-9 * std::abs(rhi[c]));
    }
    x = step_model(x, r.u, p, cfg.dt);
    up = r.u;
  }
}

TEST(MpcStep, ConvergesToConstantReference) {
  const VehicleParams p;
  const MpcConfig cfg;
  State x = start(22, 1.875);
  Input up = Input::Zero();
  const auto ref = flat_ref(cfg.Np, 27.0, 5.625);
  for (int i = 0; i < 200; ++i) {
    const MpcResult r = mpc_step({}, ref, x, up, cfg, p);
    x = step_model(x, r.u, p, cfg.dt);
    up = r.u;
  }
  EXPECT_LT(std::abs(x[0] - 27.0), 0.05);
  EXPECT_LT(std::abs(x[5] - 5.625), 0.05);
  EXPECT_LT(std::abs(x[3]), 0.05);
}

TEST(MpcStep, PlanOverridesPerChannel) {
  const VehicleParams p;
  const MpcConfig cfg;
  const State x = start(25, 1.875);
  const auto ref = flat_ref(cfg.Np, 25.0, 1.875);
  const MpcResult idle = mpc_step({}, ref, x, Input::Zero(), cfg, p);
  EXPECT_NEAR(idle.u[0], 0.0, 1e-6);
  EXPECT_NEAR(idle.u[1], 0.0, 1e-9);

  ResolvedPlan speed_only;
  speed_only.speed_ref = 28.0;
  const MpcResult r = mpc_step(speed_only, ref, x, Input::Zero(), cfg, p);
  EXPECT_GT(r.u[0], 0.0);
  EXPECT_NEAR(r.u[1], 0.0, 1e-9);
}

TEST(MpcStep, LateralConstraintPullsIn) {
  const VehicleParams p;
  const MpcConfig cfg;
  State x = start(25, 1.875);
  Input up = Input::Zero();
  ResolvedPlan plan;
  plan.lat_cons = Interval{4.65, 6.6};
  const auto ref = flat_ref(cfg.Np, 25.0, 1.875);
  std::vector<double> slack;
  for (int i = 0; i < 200; ++i) {
    const MpcResult r = mpc_step(plan, ref, x, up, cfg, p);
    slack.push_back(r.diag.slack_lateral);
    x = step_model(x, r.u, p, cfg.dt);
    up = r.u;
  }
  EXPECT_TRUE(plan.lat_cons->contains(x[5], 0.06));
  // after the peak the slack only shrinks
  const auto peak = std::max_element(slack.begin(), slack.end()) - slack.begin();
  for (std::size_t i = static_cast<std::size_t>(peak) + 1; i < slack.size(); ++i) EXPECT_LE(slack[i], slack[i - 1] + 1e-6);
  EXPECT_LT(slack.back(), 1e-6);
}
