#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "stlsplit/scenario.hpp"

namespace stlsplit {

/// Pose and extents of one vehicle. Lateral coordinate d is measured from the
/// right road edge; lane 0 is the rightmost.
struct VehicleState {
  double s = 0.0;    // longitudinal position (m)
  double d = 0.0;    // lateral position (m)
  double psi = 0.0;  // heading (rad), 0 = along the road
  double v = 0.0;    // speed (m/s)
  double length = 4.5;
  double width = 2.0;

  int lane(double lane_width) const;
};

struct LaneLayout {
  int count = 3;
  double width = 3.5;

  double centre(int lane) const { return (lane + 0.5) * width; }
  double road_min() const { return 0.0; }
  double road_max() const { return count * width; }
};

/// Open-loop obstacle script: constant speed plus an optional lateral ramp
/// from the start lane to a target lane over `duration` seconds.
struct ObstacleScript {
  VehicleState initial;
  int start_lane = 1;
  int target_lane = 1;          // == start_lane means no maneuver
  double maneuver_start = 0.0;  // seconds
  double maneuver_duration = 1.0;

  VehicleState state_at(double time, const LaneLayout& lanes) const;
};

/// Parametric perception-error model: logistic detection over salient
/// features, Gaussian offsets growing with range.
struct PemParams {
  double detect_intercept = 4.0;
  double detect_range_coeff = -0.045;    // per metre
  double detect_occlusion_coeff = -2.0;  // applied when occluded
  std::array<double, 3> noise_base{0.3, 0.2, 0.02};  // sigma for (s, d, psi)
  double noise_range_slope = 0.025;  // per metre, positional components only

  double detect_logit(double range, bool occluded) const {
    return detect_intercept + detect_range_coeff * range +
           (occluded ? detect_occlusion_coeff : 0.0);
  }
  std::array<double, 3> sigmas(double range) const {
    return {noise_base[0] + noise_range_slope * range,
            noise_base[1] + noise_range_slope * range, noise_base[2]};
  }
};

struct Observation {
  bool detected = false;
  double s = 0.0, d = 0.0, psi = 0.0;
};

/// Salient features the detection model sees for one obstacle.
struct PemFeatures {
  double range = 0.0;
  double bearing = 0.0;
  bool occluded = false;
};

/// Features for every obstacle, with occlusion from bearing-interval overlap
/// against nearer obstacles.
std::vector<PemFeatures> pem_features(const VehicleState& ego,
                                      const std::vector<VehicleState>& obstacles);

/// Sample observations; proposal == nullptr or identity samples the target
/// model. Appends the likelihood-ratio increment to *log_weight and the
/// per-obstacle noise record [p_detect_target, detected, z_s, z_d, z_psi]
/// to *noise_record.
std::vector<Observation> pem_observe(const VehicleState& ego,
                                     const std::vector<VehicleState>& obstacles,
                                     const PemParams& params, NoiseStream& stream,
                                     const ProposalParams* proposal,
                                     double* log_weight, std::vector<double>* noise_record);

/// Constant-velocity Kalman track of one obstacle: mean (s, d, vs, vd),
/// row-major 4x4 covariance, last seen heading, steps since last detection.
struct TrackEstimate {
  std::array<double, 4> mean{};
  std::array<double, 16> cov{};
  double psi = 0.0;
  int staleness = 0;
};

TrackEstimate track_init(const VehicleState& prior);
void track_predict(TrackEstimate& est, double dt, double process_noise);
void track_update(TrackEstimate& est, const Observation& obs,
                  const std::array<double, 3>& sigmas);

/// Mean propagated i steps under the constant-velocity model.
std::array<double, 4> track_forecast(const TrackEstimate& est, int i, double dt);

struct ControllerConfig {
  int horizon = 20;  // steps
  double v_ref = 30.0;
  // Weights for the 8 cost terms.
  double w_velocity = 1.0;
  double w_accel = 0.5;
  double w_turn = 2.0;
  double w_jerk = 0.1;
  double w_heading = 5.0;
  double w_lane_centre = 1.0;
  double w_obstacle = 2000.0;
  double w_progress = 0.5;
  std::vector<double> accel_candidates{-6.0, -3.0, -1.0, 0.0, 1.0, 2.5};
  std::vector<int> lane_targets{1, 2};  // overtake on the left only
  double a_min = -8.0;
  double a_max = 3.0;
  double steer_gain = 2.0;        // turn-rate per rad of heading error
  double heading_gain = 0.11067;  // desired heading per metre of lateral error
  double max_heading = 0.3;       // rad
  double max_turn_rate = 0.6;     // rad/s
  double collision_margin = 0.3;  // footprint inflation (m)
  double potential_scale = 60.0;  // m^2, obstacle field falloff
  double lateral_decay = 0.8;     // per-step damping of forecast lateral speed
  double headway_time = 1.25;      // s, extra gap per m/s of closing speed
  double accel_refine = 0.5;      // m/s^2, half-width of the local accel search
  double w_switch = 3350.0;       // hysteresis cost for retargeting another lane
};

struct Action {
  double accel = 0.0;
  double turn_rate = 0.0;
};

/// Kinematic single-track update; turn input maps through the wheelbase.
VehicleState dyn_step(const VehicleState& x, const Action& a, double dt,
                      double wheelbase = 2.7, double v_max = 60.0);

/// Enumerate (acceleration, lane-target) candidates, roll out against the
/// predicted tracks, drop hard-constraint violators, and return the first
/// action of the cheapest survivor; maximum braking if none survives.
/// `prev_target` pays the switching hysteresis; the winning target is written
/// to `chosen_target` when non-null.
Action controller_plan(const VehicleState& ego, double a_prev, int prev_target,
                       const std::vector<TrackEstimate>& tracks,
                       const ControllerConfig& cfg, const LaneLayout& lanes, double dt,
                       int* chosen_target = nullptr);

/// Constants feeding the traffic-rule predicate margins.
struct RuleConstants {
  double t_react = 0.3;            // s
  double a_min_brake = 10.0;       // |max braking| used in the safe-distance bound
  double t_cut = 3.0;              // s, cut-in grace window
  double a_braking_threshold = -2.0;
  double d_lead = 45.0;            // m, leader relevance range
  double v_slow = 11.0;            // m/s
  double v_flow_min = 13.6;        // m/s
  double dv_max = 5.5;             // m/s
  double v_queue = 8.3;            // m/s
  double d_near = 10.0;            // m, "traffic near o" radius
};

struct LaneChangeConfig {
  LaneLayout lanes;
  double dt = 0.1;
  int horizon = 40;  // steps
  double wheelbase = 2.7;
  VehicleState ego_initial;  // filled by defaults()
  std::vector<ObstacleScript> obstacles;
  PemParams pem;
  ControllerConfig controller;
  RuleConstants rules;
  double track_process_noise = 0.5;

  static LaneChangeConfig defaults();
  static LaneChangeConfig from_json(const std::string& text);
  std::string to_json() const;
};

/// Combined-state layout: [s, d, psi, v, a_prev] for the ego followed by
/// [s, d, psi, v] per obstacle.
constexpr int kEgoFields = 5;
constexpr int kObstacleFields = 4;

class LaneChangeScenario : public Scenario {
 public:
  explicit LaneChangeScenario(LaneChangeConfig cfg = LaneChangeConfig::defaults());

  int horizon() const override { return cfg_.horizon; }
  double dt() const override { return cfg_.dt; }
  std::unique_ptr<Simulator> make_simulator(const ProposalParams* proposal) const override;
  std::shared_ptr<const PredicateTable> predicates() const override { return preds_; }
  Formula rule(const std::string& name) const override;
  std::vector<std::string> rule_names() const override {
    return {"phi1", "phi2", "phi3", "phi4"};
  }
  ProposalParams fit_proposal(const std::vector<const TrajectoryRun*>& elites,
                              const std::vector<double>& weights) const override;

  const LaneChangeConfig& config() const { return cfg_; }

 private:
  LaneChangeConfig cfg_;
  std::shared_ptr<const PredicateTable> preds_;
};

}  // namespace stlsplit
