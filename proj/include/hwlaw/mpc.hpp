#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hwlaw/arbiter.hpp"
#include "hwlaw/core_model.hpp"
#include "hwlaw/qp_solver.hpp"

namespace hwlaw {

struct VehicleParams {
  double mass = 1500.0;
  double yaw_inertia = 2500.0;
  double cornering_stiffness_front = 6.0e4;
  double cornering_stiffness_rear = 6.0e4;
  double dist_cg_front = 1.2;
  double dist_cg_rear = 1.6;

  void validate() const;
};

// State x = [vx, vy, yaw_rate, yaw, X, Y] (vy in the body frame),
// input u = [Fx, steer], tracked outputs y = [vx, yaw, Y],
// constrained outputs ys = [vx, Y].
using State = Eigen::Matrix<double, 6, 1>;
using Input = Eigen::Vector2d;

struct LinearModel {
  Eigen::Matrix<double, 6, 6> A;
  Eigen::Matrix<double, 6, 2> B;
  Eigen::Matrix<double, 3, 6> C;
  Eigen::Matrix<double, 2, 6> Cs;
};

inline constexpr double kMinModelSpeed = 1.0;

/// Continuous single-track model (no discretisation); vx clamped to
/// kMinModelSpeed.
LinearModel continuous_model(const VehicleParams& params, double operating_vx);

/// Forward-Euler discretisation of the single-track model at `operating_vx`.
LinearModel linearize(const VehicleParams& params, double operating_vx, double dt);

State to_model_state(const VehicleState& v);
/// Writes the model state back into `v` (other fields preserved).
void from_model_state(const State& x, VehicleState& v);

struct MpcConfig {
  int Np = 30;
  int Nc = 5;
  double dt = 0.05;
  double w_v = 1.0;
  double w_phi = 10.0;
  double w_Y = 5.0;
  double w_F = 1e-6;
  double w_delta = 10.0;
  /// Input bounds; Fx bounds are accelerations times mass when unset.
  std::optional<Input> u_min;
  std::optional<Input> u_max;
  std::optional<Input> du_min;
  std::optional<Input> du_max;
  double max_accel = 4.0;       ///< m/s^2
  double max_steer = 0.1;       ///< rad
  double max_jerk = 10.0;       ///< m/s^3
  double max_steer_rate = 0.5;  ///< rad/s
  double slack_penalty = 1e6;
  /// Output bounds are tightened by these margins before solving.
  double speed_margin = 0.05;
  double lateral_margin = 0.05;

  void validate() const;
  [[nodiscard]] Input input_min(const VehicleParams& p) const;
  [[nodiscard]] Input input_max(const VehicleParams& p) const;
  [[nodiscard]] Input rate_min(const VehicleParams& p) const;
  [[nodiscard]] Input rate_max(const VehicleParams& p) const;
};

struct MpcProblem {
  LinearModel model;
  /// Desired outputs [vx, yaw, Y] at steps 1..Np.
  std::vector<Eigen::Vector3d> y_des;
  /// Bounds on [vx, Y] at steps 1..Np; infinite entries are unconstrained.
  std::vector<Eigen::Vector2d> ys_min;
  std::vector<Eigen::Vector2d> ys_max;
};

/// Condensed QP over z = [dFx/m (Nc), dsteer (Nc) interleaved per step, s_v, s_Y].
struct CondensedQp {
  QpProblem qp;
  double constant = 0.0;  ///< tracking cost at z = 0
  int nc = 0;
  double force_scale = 1.0;  ///< dFx = force_scale * z[2j]
  /// Output prediction y_k = free[k] + S[k] * du (du unscaled).
  std::vector<Eigen::Vector3d> free;
  std::vector<Eigen::MatrixXd> sens;

  /// Unscaled input increments for step j.
  [[nodiscard]] Input du(const Eigen::VectorXd& z, int j) const;
};

CondensedQp build_qp(const MpcProblem& problem, const MpcConfig& cfg, const VehicleParams& params, const State& x0,
                     const Input& u_prev);

/// Explicit cost of a decision vector by simulating the model (reference
/// for gradient checks).
double rollout_cost(const MpcProblem& problem, const MpcConfig& cfg, const State& x0, const Input& u_prev,
                    const std::vector<Input>& du, double slack_v, double slack_y);

struct MpcDiagnostics {
  double objective = 0.0;
  int iterations = 0;
  int active_constraints = 0;
  double slack_speed = 0.0;
  double slack_lateral = 0.0;
  bool fallback = false;
  std::string error;
};

struct MpcResult {
  Input u;
  MpcDiagnostics diag;
};

/// Solves the QP and returns u_prev + du_0 clamped to the input bounds.
/// Throws QpError (carrying the best iterate) when the solver fails.
MpcResult solve(const CondensedQp& qp, const MpcConfig& cfg, const VehicleParams& params, const Input& u_prev);

/// Reference of the planner along the horizon.
struct ReferenceSample {
  double speed = 0.0;
  double y = 0.0;
};

/// One controller tick: overrides the initial reference with the plan where
/// present, installs the plan constraints and solves. On solver failure the
/// previous input is kept and diag.fallback is set.
MpcResult mpc_step(const ResolvedPlan& plan, const std::vector<ReferenceSample>& initial_ref, const State& x0,
                   const Input& u_prev, const MpcConfig& cfg, const VehicleParams& params);

/// Advances the state by one step of the discrete model linearised at x.vx.
/// Forward speed does not cross zero.
State step_model(const State& x, const Input& u, const VehicleParams& params, double dt);

}  // namespace hwlaw
