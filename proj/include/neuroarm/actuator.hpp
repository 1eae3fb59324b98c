#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neuroarm/transport.hpp"
#include "neuroarm/types.hpp"

namespace neuroarm::act {

inline constexpr int kNumJoints = 4;
inline constexpr double kJointMinDeg = 0.0;
inline constexpr double kJointMaxDeg = 180.0;

/// Shoulder, elbow, wrist, grip; degrees.
using JointPose = std::array<double, kNumJoints>;

struct Keyframe {
    double at = 0.0;  // progress fraction
    JointPose joints{};
};

/// Piecewise-linear pose curve over action progress.
struct Trajectory {
    std::vector<Keyframe> keyframes;

    /// ConfigError unless fractions run strictly increasing from exactly 0
    /// to exactly 1 and every angle is inside the joint limits.
    void validate() const;

    /// Linear blend between the surrounding keyframes; progress is clamped
    /// to [0, 1] first.
    JointPose sample(double progress) const;
};

/// Neutral idle hold, an elbow-oscillation handshake, and a grip-close plus
/// elbow-raise cup pickup.
std::map<ActionLabel, Trajectory> default_trajectories();

struct ActuatorState {
    ActionLabel current = ActionLabel::StayIdle;
    double progress = 1.0;  // completed fraction of the current action
    JointPose joints{};
    double action_duration = 3.0;  // seconds per action
};

enum class EventKind : int { Accept = 0, Reject, Transition, TickSample };

/// One structured log line. A Transition's progress field records the
/// superseded action's completion at the switch (the debounce witness);
/// its label and joints describe the incoming action's opening pose.
struct ActuatorEvent {
    double t = 0.0;  // simulation seconds
    EventKind kind = EventKind::TickSample;
    ActionLabel label = ActionLabel::StayIdle;
    double progress = 0.0;
    JointPose joints{};
};

/// "t=1.250 kind=transition label=pickUpCup progress=0.6667 joints=90.00,90.00,90.00,90.00"
std::string format_event(const ActuatorEvent& ev);

/// Inverse of format_event; nullopt on any malformed line.
std::optional<ActuatorEvent> parse_event(const std::string& line);

/// Simulated 4-joint arm driven by action labels. New labels are ignored
/// until the running action is at least a third complete; an accepted
/// repeat of the current action is a no-op. Starts as a completed
/// StayIdle so the first label is honored immediately. Time is the
/// internal simulation clock, advanced only by tick(). Single-owner.
class Actuator {
  public:
    /// Requires one valid trajectory per action and a positive duration.
    /// Logs a TickSample every `sample_every` ticks (0 disables sampling).
    explicit Actuator(std::map<ActionLabel, Trajectory> trajectories,
                      double action_duration = 3.0, int sample_every = 10);

    /// Applies the debounce rule; returns whether the label was honored.
    /// Logs exactly one Accept, Reject, or Transition event.
    bool submit_label(ActionLabel label);

    /// Advances the simulation by dt > 0 seconds; progress saturates at 1
    /// and the final pose is held.
    void tick(double dt);

    const ActuatorState& state() const { return state_; }
    double now() const { return now_s_; }
    const std::vector<ActuatorEvent>& events() const { return events_; }

  private:
    std::map<ActionLabel, Trajectory> trajectories_;
    ActuatorState state_;
    std::vector<ActuatorEvent> events_;
    double now_s_ = 0.0;
    int sample_every_;
    std::uint64_t tick_count_ = 0;
};

/// Serial consumer loop: each received action byte is one label period.
/// The label is submitted, then the arm is ticked through the period at
/// `tick_rate_hz`. Unknown bytes are skipped. Returns the full event log
/// once the channel closes.
std::vector<ActuatorEvent> run_actuator(net::SerialChannel& serial, Actuator& arm,
                                        double label_period_s = 2.0,
                                        double tick_rate_hz = 100.0);

}  // namespace neuroarm::act
