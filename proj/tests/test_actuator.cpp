#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "neuroarm/actuator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

using namespace neuroarm;
using namespace neuroarm::act;

namespace {

std::vector<ActuatorEvent> events_of_kind(const std::vector<ActuatorEvent>& log, EventKind k) {
    std::vector<ActuatorEvent> out;
    for (const auto& ev : log)
        if (ev.kind == k) out.push_back(ev);
    return out;
}

/// The debounce contract, asserted from a log alone: every transition
/// happened after the superseded action passed one third, and no two
/// transitions are closer than a third of the action duration.
void check_debounce(const std::vector<ActuatorEvent>& log, double action_duration) {
    const auto transitions = events_of_kind(log, EventKind::Transition);
    for (const auto& ev : transitions) CHECK(ev.progress >= 1.0 / 3.0 - 1e-9);
    for (std::size_t i = 1; i < transitions.size(); ++i)
        CHECK(transitions[i].t - transitions[i - 1].t >= action_duration / 3.0 - 1e-9);
}

}  // namespace

TEST_CASE("trajectory validation") {
    for (auto& [label, traj] : default_trajectories()) CHECK_NOTHROW(traj.validate());

    const JointPose pose{90, 90, 90, 90};
    CHECK_THROWS_AS((Trajectory{{{0.0, pose}}}).validate(), ConfigError);
    CHECK_THROWS_AS((Trajectory{{{0.1, pose}, {1.0, pose}}}).validate(), ConfigError);
    CHECK_THROWS_AS((Trajectory{{{0.0, pose}, {0.9, pose}}}).validate(), ConfigError);
    CHECK_THROWS_AS((Trajectory{{{0.0, pose}, {0.5, pose}, {0.5, pose}, {1.0, pose}}}).validate(),
                    ConfigError);
    CHECK_THROWS_AS((Trajectory{{{0.0, pose}, {1.0, {90, 181, 90, 90}}}}).validate(), ConfigError);
    CHECK_THROWS_AS((Trajectory{{{0.0, {-1, 90, 90, 90}}, {1.0, pose}}}).validate(), ConfigError);
}

TEST_CASE("trajectory sampling blends linearly between keyframes") {
    const auto trajs = default_trajectories();
    const auto& cup = trajs.at(ActionLabel::PickUpCup);

    // Midway between (0.3, elbow 90) and (0.7, elbow 140): elbow 115.
    const auto mid = cup.sample(0.5);
    CHECK(mid[0] == doctest::Approx(90.0).epsilon(1e-12));
    CHECK(mid[1] == doctest::Approx(115.0).epsilon(1e-12));
    CHECK(mid[2] == doctest::Approx(90.0).epsilon(1e-12));
    CHECK(mid[3] == doctest::Approx(30.0).epsilon(1e-12));

    CHECK(cup.sample(0.0) == JointPose{90, 90, 90, 90});
    CHECK(cup.sample(1.0) == JointPose{90, 120, 90, 30});
    CHECK(cup.sample(-0.5) == cup.sample(0.0));
    CHECK(cup.sample(2.0) == cup.sample(1.0));
    // Keyframe hits are exact.
    CHECK(cup.sample(0.3) == JointPose{90, 90, 90, 30});

    const auto& idle = trajs.at(ActionLabel::StayIdle);
    for (double p : {0.0, 0.25, 0.5, 0.99, 1.0})
        CHECK(idle.sample(p) == JointPose{90, 90, 90, 90});
}

TEST_CASE("actuator starts as completed idle and honors the first label") {
    Actuator arm(default_trajectories());
    CHECK(arm.state().current == ActionLabel::StayIdle);
    CHECK(arm.state().progress == 1.0);
    CHECK(arm.state().joints == JointPose{90, 90, 90, 90});
    CHECK(arm.now() == 0.0);

    CHECK(arm.submit_label(ActionLabel::PickUpCup));
    CHECK(arm.state().current == ActionLabel::PickUpCup);
    CHECK(arm.state().progress == 0.0);

    REQUIRE(arm.events().size() == 1);
    CHECK(arm.events()[0].kind == EventKind::Transition);
    CHECK(arm.events()[0].label == ActionLabel::PickUpCup);
    CHECK(arm.events()[0].progress == 1.0);  // the superseded idle was complete
}

TEST_CASE("debounce rejects every label before one third, even repeats") {
    Actuator arm(default_trajectories(), 3.0, 0);
    arm.submit_label(ActionLabel::ShakeHands);

    CHECK_FALSE(arm.submit_label(ActionLabel::PickUpCup));
    CHECK_FALSE(arm.submit_label(ActionLabel::ShakeHands));
    arm.tick(0.6);  // progress 0.2
    CHECK(arm.state().progress == doctest::Approx(0.2));
    CHECK_FALSE(arm.submit_label(ActionLabel::PickUpCup));
    CHECK(arm.state().current == ActionLabel::ShakeHands);

    arm.tick(0.6);  // progress 0.4, past the 1/3 mark
    CHECK(arm.submit_label(ActionLabel::ShakeHands));  // same label: accepted no-op
    CHECK(arm.state().current == ActionLabel::ShakeHands);
    CHECK(arm.state().progress == doctest::Approx(0.4));

    CHECK(arm.submit_label(ActionLabel::PickUpCup));  // different label: transition
    CHECK(arm.state().current == ActionLabel::PickUpCup);
    CHECK(arm.state().progress == 0.0);

    const auto rejects = events_of_kind(arm.events(), EventKind::Reject);
    const auto accepts = events_of_kind(arm.events(), EventKind::Accept);
    const auto transitions = events_of_kind(arm.events(), EventKind::Transition);
    CHECK(rejects.size() == 3);
    CHECK(accepts.size() == 1);
    CHECK(transitions.size() == 2);
    CHECK(transitions[1].progress == doctest::Approx(0.4));
}

TEST_CASE("tick advances progress and saturates at the final pose") {
    Actuator arm(default_trajectories(), 3.0, 0);
    arm.submit_label(ActionLabel::PickUpCup);

    arm.tick(3.0);  // one full duration
    CHECK(arm.state().progress == 1.0);
    CHECK(arm.state().joints == JointPose{90, 120, 90, 30});
    CHECK(arm.now() == doctest::Approx(3.0));

    arm.tick(5.0);  // held, not wrapped
    CHECK(arm.state().progress == 1.0);
    CHECK(arm.state().joints == JointPose{90, 120, 90, 30});

    // Completed same-label repeat holds the pose without restarting.
    CHECK(arm.submit_label(ActionLabel::PickUpCup));
    CHECK(arm.state().progress == 1.0);

    arm.submit_label(ActionLabel::ShakeHands);
    arm.tick(1.5);
    CHECK(arm.state().progress == doctest::Approx(0.5));
    // Handshake at 0.5: midway between (0.4, elbow 120) and (0.6, elbow 60).
    CHECK(arm.state().joints[1] == doctest::Approx(90.0));

    CHECK_THROWS_AS(arm.tick(0.0), ConfigError);
    CHECK_THROWS_AS(arm.tick(-0.1), ConfigError);
}

TEST_CASE("constructor validation") {
    auto trajs = default_trajectories();
    CHECK_THROWS_AS(Actuator(trajs, 0.0), ConfigError);
    CHECK_THROWS_AS(Actuator(trajs, -1.0), ConfigError);
    CHECK_THROWS_AS(Actuator(trajs, 3.0, -1), ConfigError);

    trajs.erase(ActionLabel::ShakeHands);
    CHECK_THROWS_AS(Actuator(trajs, 3.0), ConfigError);

    auto bad = default_trajectories();
    bad[ActionLabel::PickUpCup].keyframes[0].at = 0.1;
    CHECK_THROWS_AS(Actuator(bad, 3.0), ConfigError);
}

TEST_CASE("oscillating labels at 10 Hz transition at most once per second") {
    Actuator arm(default_trajectories(), 3.0, 0);
    // 30 simulated seconds of alternating labels every 0.1 s.
    for (int i = 0; i < 300; ++i) {
        arm.submit_label(i % 2 == 0 ? ActionLabel::PickUpCup : ActionLabel::ShakeHands);
        arm.tick(0.1);
    }
    const auto transitions = events_of_kind(arm.events(), EventKind::Transition);
    CHECK(transitions.size() >= 20);
    CHECK(transitions.size() <= 30);
    check_debounce(arm.events(), 3.0);
}

TEST_CASE("joint limits hold under random label and tick fuzzing") {
    std::mt19937_64 rng(404);
    Actuator arm(default_trajectories(), 3.0, 1);
    for (int i = 0; i < 2000; ++i) {
        arm.submit_label(static_cast<ActionLabel>(rng() % 3));
        arm.tick(0.001 + static_cast<double>(rng() % 1000) / 1000.0);
        for (double angle : arm.state().joints) {
            CHECK(angle >= kJointMinDeg);
            CHECK(angle <= kJointMaxDeg);
        }
    }
    for (const auto& ev : arm.events())
        for (double angle : ev.joints) {
            CHECK(angle >= kJointMinDeg);
            CHECK(angle <= kJointMaxDeg);
        }
    CHECK(arm.state().progress >= 0.0);
    CHECK(arm.state().progress <= 1.0);
    check_debounce(arm.events(), 3.0);
}

TEST_CASE("labels every two seconds always land past the debounce mark") {
    Actuator arm(default_trajectories(), 3.0, 10);
    const std::vector<ActionLabel> script{
        ActionLabel::PickUpCup, ActionLabel::ShakeHands, ActionLabel::ShakeHands,
        ActionLabel::StayIdle,  ActionLabel::PickUpCup,  ActionLabel::StayIdle};
    for (const auto label : script) {
        CHECK(arm.submit_label(label));  // 2 s of a 3 s action is past 1/3
        for (int i = 0; i < 200; ++i) arm.tick(0.01);
    }
    CHECK(events_of_kind(arm.events(), EventKind::Reject).empty());
    check_debounce(arm.events(), 3.0);

    // Uninterrupted actions reach completion: the last sample of each
    // 2 s hold shows either progress 2/3 (fresh transition) or 1.0.
    CHECK(arm.state().progress == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("event lines format and parse round trip") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        ActuatorEvent ev;
        ev.t = static_cast<double>(rng() % 100000) / 1000.0;
        ev.kind = static_cast<EventKind>(rng() % 4);
        ev.label = static_cast<ActionLabel>(rng() % 3);
        ev.progress = static_cast<double>(rng() % 10001) / 10000.0;
        for (auto& j : ev.joints) j = static_cast<double>(rng() % 18001) / 100.0;

        const auto back = parse_event(format_event(ev));
        REQUIRE(back.has_value());
        CHECK(back->t == doctest::Approx(ev.t).epsilon(1e-9));
        CHECK(back->kind == ev.kind);
        CHECK(back->label == ev.label);
        CHECK(back->progress == doctest::Approx(ev.progress).epsilon(1e-9));
        for (int j = 0; j < kNumJoints; ++j)
            CHECK(back->joints[static_cast<std::size_t>(j)] ==
                  doctest::Approx(ev.joints[static_cast<std::size_t>(j)]).epsilon(1e-9));
    }

    const std::string good = format_event(ActuatorEvent{});
    CHECK(parse_event(good).has_value());
    CHECK_FALSE(parse_event("").has_value());
    CHECK_FALSE(parse_event("garbage").has_value());
    CHECK_FALSE(parse_event(good + " extra=1").has_value());
    CHECK_FALSE(parse_event("t=x kind=accept label=pickUpCup progress=0.5 joints=1,2,3,4")
                    .has_value());
    CHECK_FALSE(parse_event("t=1 kind=boom label=pickUpCup progress=0.5 joints=1,2,3,4")
                    .has_value());
    CHECK_FALSE(parse_event("t=1 kind=accept label=wave progress=0.5 joints=1,2,3,4")
                    .has_value());
    CHECK_FALSE(parse_event("t=1 kind=accept label=pickUpCup progress=0.5 joints=1,2,3")
                    .has_value());
    CHECK_FALSE(parse_event("t=1 kind=accept label=pickUpCup progress=0.5 joints=1,2,3,4,5")
                    .has_value());
}

TEST_CASE("run_actuator consumes serial bytes, one label period each") {
    net::SerialChannel serial;
    std::thread writer([&] {
        for (char b : {'2', '0', 'x', '0', '1'}) {
            serial.send(b);
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
        serial.close();
    });

    Actuator arm(default_trajectories(), 3.0, 10);
    const auto log = run_actuator(serial, arm, 2.0, 100.0);
    writer.join();

    // Four valid labels, 2 s each: the simulation clock ends at 8 s.
    CHECK(arm.now() == doctest::Approx(8.0));

    // Idle(2) at t=0 matches the initial completed idle: no-op accept.
    // Cup(0) at 2 s transitions; the repeated 0 is another accept;
    // handshake(1) at 6 s transitions. The junk byte is skipped by the
    // channel reader.
    const auto transitions = events_of_kind(log, EventKind::Transition);
    const auto accepts = events_of_kind(log, EventKind::Accept);
    REQUIRE(transitions.size() == 2);
    REQUIRE(accepts.size() == 2);
    CHECK(accepts[0].label == ActionLabel::StayIdle);
    CHECK(accepts[0].t == doctest::Approx(0.0));
    CHECK(transitions[0].label == ActionLabel::PickUpCup);
    CHECK(transitions[0].t == doctest::Approx(2.0));
    CHECK(transitions[1].label == ActionLabel::ShakeHands);
    CHECK(transitions[1].t == doctest::Approx(6.0));
    check_debounce(log, 3.0);

    // Tick samples arrive every 10th tick of 0.01 s.
    const auto samples = events_of_kind(log, EventKind::TickSample);
    REQUIRE(samples.size() == 80);
    CHECK(samples[0].t == doctest::Approx(0.1));
    CHECK(samples[1].t - samples[0].t == doctest::Approx(0.1));
    CHECK(samples.back().t == doctest::Approx(8.0));

    CHECK_THROWS_AS(run_actuator(serial, arm, 0.0, 100.0), ConfigError);
    CHECK_THROWS_AS(run_actuator(serial, arm, 2.0, 0.0), ConfigError);
}
