#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hwlaw/arbiter.hpp"
#include "hwlaw/monitor.hpp"
#include "hwlaw/mpc.hpp"
#include "hwlaw/reference.hpp"
#include "hwlaw/strategy.hpp"

namespace hwlaw {

struct IntentWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  IntentKind kind = IntentKind::None;
};

struct Scenario {
  std::string name;
  RoadModel road;
  LawThresholds thresholds;
  VehicleState ego_init;
  ReferenceTrajectory initial_ref;
  std::vector<SurroundingSpec> surroundings;
  /// When present, the behavioural intent comes from these windows
  /// (None outside them) instead of being detected from the reference.
  std::optional<std::vector<IntentWindow>> intent_script;
  double duration = 10.0;
  double dt = 0.05;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on inconsistent content.
  void validate() const;
  [[nodiscard]] int frame_count() const;
};

struct SimConfig {
  MpcConfig mpc;
  VehicleParams vehicle;
  bool compliance_enabled = true;
  int plant_substeps = 1;     ///< >1 integrates the plant on a finer grid
  int monitor_horizon = 0;    ///< 0 uses mpc.Np
  GapTiming timing;
  PriorityModel priorities;
};

enum class FrameState { Compliant, ActiveViolation, PassiveViolation, ComplianceUnderIntervention };

std::string_view to_string(FrameState s);
std::optional<FrameState> frame_state_from_string(std::string_view s);

struct FrameLabel {
  double t = 0.0;
  FrameState state = FrameState::Compliant;
  LawSet laws;
};

struct FrameRecord {
  double t = 0.0;
  VehicleState ego;
  VehicleState reference;
  FrameLabel label;
  LawSet active;          ///< monitor expressions over the horizon
  LawSet committed;       ///< violations actually committed this frame
  LawSet counterfactual;  ///< committed by the unmodified reference
  std::array<Phase, 7> phase{};
  IntentKind intent = IntentKind::None;
  OvertakeStage stage = OvertakeStage::None;
  ResolvedPlan plan;
  Input u = Input::Zero();
  MpcDiagnostics mpc;
  std::optional<double> lead_gap;
  std::optional<int> lead_id;
};

struct SimLog {
  std::string scenario;
  std::uint64_t seed = 0;
  double dt = 0.05;
  bool compliance_enabled = true;
  std::vector<FrameRecord> frames;
  std::vector<std::string> diagnostics;
  bool ended_early = false;
};

/// Committed violations of `ego` this frame: speed and following laws from
/// the present state; lane laws only once the footprint reaches the line
/// towards the unsafe lane.
LawSet committed_violations(const VehicleState& ego, const ViolationReport& report, const RoadModel& road);

/// Tracks violation episodes and labels frames as active or passive by the
/// cause of each episode's onset.
class FrameClassifier {
 public:
  struct Inputs {
    double t = 0.0;
    bool first_frame = false;
    const VehicleState* ego = nullptr;
    const VehicleState* ego_prev = nullptr;  ///< null on the first frame
    const std::vector<VehicleState>* surroundings = nullptr;
    const std::vector<VehicleState>* surroundings_prev = nullptr;
    const ViolationReport* report = nullptr;
    const ViolationReport* report_prev = nullptr;
    LawSet committed;
    LawSet counterfactual;
    /// Laws predicted from the first frame on without a break; the ego
    /// inherited these before any control could act.
    LawSet foreseen_from_start;
    /// Law owning the speed channel in the plan that produced this state.
    std::optional<Law> speed_owner;
    const RoadModel* road = nullptr;
    double a_comf = 2.0;
    double dt = 0.05;
  };

  explicit FrameClassifier(int decel_window = 30) : window_(decel_window) {}
  FrameLabel classify(const Inputs& in);

 private:
  bool passive_onset(Law law, const Inputs& in) const;
  [[nodiscard]] double max_recent_decel(int id, double dt) const;

  int window_;
  std::array<std::optional<bool>, 7> episode_passive_{};
  std::map<int, std::vector<double>> speed_history_;
};

SimLog run(const Scenario& scenario, const SimConfig& config = {});

}  // namespace hwlaw
