#include "hwlaw/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hwlaw {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void VehicleParams::validate() const {
  for (double v : {mass, yaw_inertia, cornering_stiffness_front, cornering_stiffness_rear, dist_cg_front, dist_cg_rear}) {
    if (!(v > 0.0)) throw std::invalid_argument("vehicle parameters must be positive");
  }
}

LinearModel continuous_model(const VehicleParams& p, double operating_vx) {
  const double vx = std::max(operating_vx, kMinModelSpeed);
  const double m = p.mass;
  const double iz = p.yaw_inertia;
  const double cf = p.cornering_stiffness_front;
  const double cr = p.cornering_stiffness_rear;
  const double a = p.dist_cg_front;
  const double b = p.dist_cg_rear;

  LinearModel lm;
  lm.A.setZero();
  lm.B.setZero();
  lm.A(1, 1) = -(cf + cr) / (m * vx);
  lm.A(1, 2) = -(a * cf - b * cr) / (m * vx) - vx;
  lm.A(2, 1) = -(a * cf - b * cr) / (iz * vx);
  lm.A(2, 2) = -(a * a * cf + b * b * cr) / (iz * vx);
  lm.A(3, 2) = 1.0;
  lm.A(4, 0) = 1.0;
  lm.A(5, 1) = 1.0;
  lm.A(5, 3) = vx;
  lm.B(0, 0) = 1.0 / m;
  lm.B(1, 1) = cf / m;
  lm.B(2, 1) = a * cf / iz;

  lm.C.setZero();
  lm.C(0, 0) = 1.0;
  lm.C(1, 3) = 1.0;
  lm.C(2, 5) = 1.0;
  lm.Cs.setZero();
  lm.Cs(0, 0) = 1.0;
  lm.Cs(1, 5) = 1.0;
  return lm;
}

LinearModel linearize(const VehicleParams& params, double operating_vx, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  LinearModel lm = continuous_model(params, operating_vx);
  lm.A = Eigen::Matrix<double, 6, 6>::Identity() + dt * lm.A;
  lm.B *= dt;
  return lm;
}

State to_model_state(const VehicleState& v) {
  State x;
  x << v.vx, v.vy - v.vx * v.yaw, v.yaw_rate, v.yaw, v.x, v.y;
  return x;
}

void from_model_state(const State& x, VehicleState& v) {
  v.vx = x[0];
  v.vy = x[1] + x[0] * x[3];
  v.yaw_rate = x[2];
  v.yaw = x[3];
  v.x = x[4];
  v.y = x[5];
}

State step_model(const State& x, const Input& u, const VehicleParams& params, double dt) {
  const LinearModel lm = linearize(params, x[0], dt);
  State next = lm.A * x + lm.B * u;
  // brakes stop the car, they do not reverse it
  if (x[0] >= 0.0 && next[0] < 0.0) next[0] = 0.0;
  return next;
}

void MpcConfig::validate() const {
  if (Nc < 1 || Np < Nc) throw std::invalid_argument("need Np >= Nc >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  for (double w : {w_v, w_phi, w_Y, w_F, w_delta}) {
    if (!(w >= 0.0)) throw std::invalid_argument("MPC weights must be non-negative");
  }
  if (!(w_v > 0.0 || w_phi > 0.0 || w_Y > 0.0)) throw std::invalid_argument("at least one output weight must be positive");
  if (!(slack_penalty > 0.0)) throw std::invalid_argument("slack penalty must be positive");
  if (!(speed_margin >= 0.0 && lateral_margin >= 0.0)) throw std::invalid_argument("margins must be non-negative");
  const VehicleParams p;
  const Input lo = input_min(p);
  const Input hi = input_max(p);
  if ((lo.array() > hi.array()).any()) throw std::invalid_argument("input bounds: u_min exceeds u_max");
  const Input rlo = rate_min(p);
  const Input rhi = rate_max(p);
  if ((rlo.array() > rhi.array()).any()) throw std::invalid_argument("rate bounds: du_min exceeds du_max");
}

Input MpcConfig::input_min(const VehicleParams& p) const {
  return u_min.value_or(Input(-p.mass * max_accel, -max_steer));
}
Input MpcConfig::input_max(const VehicleParams& p) const {
  return u_max.value_or(Input(p.mass * max_accel, max_steer));
}
Input MpcConfig::rate_min(const VehicleParams& p) const {
  return du_min.value_or(Input(-p.mass * max_jerk * dt, -max_steer_rate * dt));
}
Input MpcConfig::rate_max(const VehicleParams& p) const {
  return du_max.value_or(Input(p.mass * max_jerk * dt, max_steer_rate * dt));
}

Input CondensedQp::du(const VectorXd& z, int j) const {
  return Input(force_scale * z[2 * j], z[2 * j + 1]);
}

namespace {

Eigen::Matrix3d output_weights(const MpcConfig& cfg) {
  return Eigen::Vector3d(cfg.w_v, cfg.w_phi, cfg.w_Y).asDiagonal();
}

}  // namespace

CondensedQp build_qp(const MpcProblem& problem, const MpcConfig& cfg, const VehicleParams& params, const State& x0,
                     const Input& u_prev) {
  cfg.validate();
  const int np = cfg.Np;
  const int nc = cfg.Nc;
  if (static_cast<int>(problem.y_des.size()) != np || static_cast<int>(problem.ys_min.size()) != np ||
      static_cast<int>(problem.ys_max.size()) != np)
    throw std::invalid_argument("MPC problem sequences must have Np entries");

  const int ndu = 2 * nc;
  const int nz = ndu + 2;
  const auto& A = problem.model.A;
  const auto& B = problem.model.B;
  const auto& C = problem.model.C;
  const auto& Cs = problem.model.Cs;
  const Eigen::Matrix3d Q = output_weights(cfg);

  CondensedQp out;
  out.nc = nc;
  out.force_scale = params.mass;
  VectorXd scale(ndu);
  for (int j = 0; j < nc; ++j) {
    scale[2 * j] = out.force_scale;
    scale[2 * j + 1] = 1.0;
  }

  // Forward sensitivities of the state to the stacked increments.
  MatrixXd Hdu = MatrixXd::Zero(ndu, ndu);
  VectorXd gdu = VectorXd::Zero(ndu);
  State xf = x0;
  MatrixXd S = MatrixXd::Zero(6, ndu);
  std::vector<MatrixXd> ys_rows;
  std::vector<Eigen::Vector2d> ys_free;
  ys_rows.reserve(static_cast<std::size_t>(np));
  for (int k = 0; k < np; ++k) {
    // Input applied over step k depends on increments 0..min(k, nc-1).
    MatrixXd M = MatrixXd::Zero(2, ndu);
    for (int i = 0; i <= std::min(k, nc - 1); ++i) M.block<2, 2>(0, 2 * i).setIdentity();
    xf = A * xf + B * u_prev;
    S = A * S + B * M;

    const MatrixXd CS = C * S;
    const Eigen::Vector3d e = C * xf - problem.y_des[static_cast<std::size_t>(k)];
    Hdu += CS.transpose() * Q * CS;
    gdu += CS.transpose() * Q * e;
    out.constant += e.dot(Q * e);
    out.free.emplace_back(C * xf);
    out.sens.push_back(CS);
    ys_rows.push_back(Cs * S);
    ys_free.emplace_back(Cs * xf);
  }
  for (int j = 0; j < nc; ++j) {
    Hdu(2 * j, 2 * j) += cfg.w_F;
    Hdu(2 * j + 1, 2 * j + 1) += cfg.w_delta;
  }

  QpProblem& qp = out.qp;
  qp.H = MatrixXd::Zero(nz, nz);
  qp.g = VectorXd::Zero(nz);
  const MatrixXd Ds = scale.asDiagonal();
  qp.H.topLeftCorner(ndu, ndu) = 2.0 * Ds * Hdu * Ds;
  qp.g.head(ndu) = 2.0 * Ds * gdu;
  const double reg = 1e-10 * std::max(qp.H.topLeftCorner(ndu, ndu).diagonal().maxCoeff(), 1.0);
  qp.H.topLeftCorner(ndu, ndu).diagonal().array() += reg;
  qp.H(ndu, ndu) = 2.0 * cfg.slack_penalty;
  qp.H(ndu + 1, ndu + 1) = 2.0 * cfg.slack_penalty;

  std::vector<VectorXd> rows;
  std::vector<double> rhs;
  auto add_row = [&](VectorXd row, double b) {
    rows.push_back(std::move(row));
    rhs.push_back(b);
  };

  // Softened output bounds.
  const double margins[2] = {cfg.speed_margin, cfg.lateral_margin};
  for (int k = 0; k < np; ++k) {
    for (int c = 0; c < 2; ++c) {
      double lo = problem.ys_min[static_cast<std::size_t>(k)][c];
      double hi = problem.ys_max[static_cast<std::size_t>(k)][c];
      if (std::isfinite(lo)) lo += margins[c];
      if (std::isfinite(hi)) hi -= margins[c];
      if (std::isfinite(lo) && std::isfinite(hi) && lo > hi) lo = hi = 0.5 * (lo + hi);
      const VectorXd sens = ys_rows[static_cast<std::size_t>(k)].row(c).transpose().cwiseProduct(scale);
      const double free = ys_free[static_cast<std::size_t>(k)][c];
      if (std::isfinite(hi)) {
        VectorXd row = VectorXd::Zero(nz);
        row.head(ndu) = sens;
        row[ndu + c] = -1.0;
        add_row(row, hi - free);
      }
      if (std::isfinite(lo)) {
        VectorXd row = VectorXd::Zero(nz);
        row.head(ndu) = -sens;
        row[ndu + c] = -1.0;
        add_row(row, free - lo);
      }
    }
  }

  // Hard input and rate bounds, in scaled variables.
  const Input umin = cfg.input_min(params);
  const Input umax = cfg.input_max(params);
  const Input rmin = cfg.rate_min(params);
  const Input rmax = cfg.rate_max(params);
  for (int ch = 0; ch < 2; ++ch) {
    const double s = ch == 0 ? out.force_scale : 1.0;
    double lo0 = std::max(rmin[ch], umin[ch] - u_prev[ch]);
    double hi0 = std::min(rmax[ch], umax[ch] - u_prev[ch]);
    if (lo0 > hi0) {
      const double step = u_prev[ch] > umax[ch] ? rmin[ch] : rmax[ch];
      lo0 = hi0 = step;
    }
    for (int j = 0; j < nc; ++j) {
      const double lo = j == 0 ? lo0 : rmin[ch];
      const double hi = j == 0 ? hi0 : rmax[ch];
      VectorXd row = VectorXd::Zero(nz);
      row[2 * j + ch] = 1.0;
      add_row(row, hi / s);
      add_row(-row, -lo / s);
    }
    for (int j = 1; j < nc; ++j) {
      VectorXd row = VectorXd::Zero(nz);
      for (int i = 0; i <= j; ++i) row[2 * i + ch] = s;
      add_row(row, umax[ch] - u_prev[ch]);
      add_row(-row, u_prev[ch] - umin[ch]);
    }
  }
  for (int c = 0; c < 2; ++c) {
    VectorXd row = VectorXd::Zero(nz);
    row[ndu + c] = -1.0;
    add_row(row, 0.0);
  }

  qp.A.resize(static_cast<Eigen::Index>(rows.size()), nz);
  qp.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    qp.A.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    qp.b[static_cast<Eigen::Index>(i)] = rhs[i];
  }
  return out;
}

double rollout_cost(const MpcProblem& problem, const MpcConfig& cfg, const State& x0, const Input& u_prev,
                    const std::vector<Input>& du, double slack_v, double slack_y) {
  const Eigen::Matrix3d Q = output_weights(cfg);
  double cost = 0.0;
  State x = x0;
  Input u = u_prev;
  for (int k = 0; k < cfg.Np; ++k) {
    if (k < cfg.Nc) u += du[static_cast<std::size_t>(k)];
    x = problem.model.A * x + problem.model.B * u;
    const Eigen::Vector3d e = problem.model.C * x - problem.y_des[static_cast<std::size_t>(k)];
    cost += e.dot(Q * e);
  }
  for (const Input& d : du) cost += cfg.w_F * d[0] * d[0] + cfg.w_delta * d[1] * d[1];
  cost += cfg.slack_penalty * (slack_v * slack_v + slack_y * slack_y);
  return cost;
}

MpcResult solve(const CondensedQp& cq, const MpcConfig& cfg, const VehicleParams& params, const Input& u_prev) {
  const QpSolution sol = solve_qp(cq.qp);
  const int ndu = 2 * cq.nc;

  MpcResult res;
  const Input umin = cfg.input_min(params);
  const Input umax = cfg.input_max(params);
  const Input rmin = cfg.rate_min(params);
  const Input rmax = cfg.rate_max(params);
  const Input du = cq.du(sol.z, 0).cwiseMax(rmin).cwiseMin(rmax);
  res.u = (u_prev + du).cwiseMax(umin).cwiseMin(umax);
  res.diag.objective = sol.objective + cq.constant;
  res.diag.iterations = sol.iterations;
  res.diag.active_constraints = static_cast<int>(sol.active.size());
  res.diag.slack_speed = std::max(sol.z[ndu], 0.0);
  res.diag.slack_lateral = std::max(sol.z[ndu + 1], 0.0);
  return res;
}

MpcResult mpc_step(const ResolvedPlan& plan, const std::vector<ReferenceSample>& initial_ref, const State& x0,
                   const Input& u_prev, const MpcConfig& cfg, const VehicleParams& params) {
  if (static_cast<int>(initial_ref.size()) < cfg.Np)
    throw std::invalid_argument("initial reference shorter than the prediction horizon");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // A constraint without a reference: track the nearest admissible value,
  // otherwise one shared slack absorbs the first steps and the tracking
  // term holds the output outside for good.
  auto into = [](const std::optional<Interval>& cons, double v, double margin) {
    if (!cons) return v;
    const double lo = cons->lo + margin;
    const double hi = cons->hi - margin;
    return lo <= hi ? std::clamp(v, lo, hi) : 0.5 * (cons->lo + cons->hi);
  };

  MpcProblem problem;
  problem.model = linearize(params, x0[0], cfg.dt);
  for (int k = 0; k < cfg.Np; ++k) {
    const ReferenceSample& r = initial_ref[static_cast<std::size_t>(k)];
    problem.y_des.emplace_back(plan.speed_ref.value_or(into(plan.speed_cons, r.speed, cfg.speed_margin)), 0.0,
                               plan.lat_ref.value_or(into(plan.lat_cons, r.y, cfg.lateral_margin)));
    problem.ys_min.emplace_back(plan.speed_cons ? plan.speed_cons->lo : -kInf, plan.lat_cons ? plan.lat_cons->lo : -kInf);
    problem.ys_max.emplace_back(plan.speed_cons ? plan.speed_cons->hi : kInf, plan.lat_cons ? plan.lat_cons->hi : kInf);
  }

  const CondensedQp cq = build_qp(problem, cfg, params, x0, u_prev);
  try {
    return solve(cq, cfg, params, u_prev);
  } catch (const QpError& e) {
    MpcResult res;
    res.u = u_prev;
    res.diag.fallback = true;
    res.diag.error = e.what();
    res.diag.objective = e.best_iterate().objective + cq.constant;
    res.diag.iterations = e.best_iterate().iterations;
    return res;
  }
}

}  // namespace hwlaw
