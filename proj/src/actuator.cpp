#include "neuroarm/actuator.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string_view>

namespace neuroarm::act {

namespace {

constexpr double kDebounceFraction = 1.0 / 3.0;

const char* kind_name(EventKind k) {
    switch (k) {
        case EventKind::Accept: return "accept";
        case EventKind::Reject: return "reject";
        case EventKind::Transition: return "transition";
        case EventKind::TickSample: return "tick_sample";
    }
    return "?";
}

std::optional<EventKind> kind_of(std::string_view s) {
    for (EventKind k : {EventKind::Accept, EventKind::Reject, EventKind::Transition,
                        EventKind::TickSample})
        if (s == kind_name(k)) return k;
    return std::nullopt;
}

std::optional<ActionLabel> label_of(std::string_view s) {
    for (int a = 0; a < kNumActions; ++a)
        if (s == action_name(static_cast<ActionLabel>(a))) return static_cast<ActionLabel>(a);
    return std::nullopt;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Value of "key=..." if the field carries that key.
std::optional<std::string_view> field_value(std::string_view field, std::string_view key) {
    if (field.size() <= key.size() + 1 || field.substr(0, key.size()) != key ||
        field[key.size()] != '=')
        return std::nullopt;
    return field.substr(key.size() + 1);
}

}  // namespace

void Trajectory::validate() const {
    if (keyframes.size() < 2) throw ConfigError("trajectory needs at least two keyframes");
    if (keyframes.front().at != 0.0) throw ConfigError("trajectory must start at progress 0");
    if (keyframes.back().at != 1.0) throw ConfigError("trajectory must end at progress 1");
    for (std::size_t i = 1; i < keyframes.size(); ++i)
        if (!(keyframes[i].at > keyframes[i - 1].at))
            throw ConfigError("trajectory keyframes must be strictly increasing");
    for (const auto& kf : keyframes)
        for (double angle : kf.joints)
            if (!(angle >= kJointMinDeg && angle <= kJointMaxDeg))
                throw ConfigError("trajectory angle outside joint limits");
}

JointPose Trajectory::sample(double progress) const {
    const double p = std::clamp(progress, 0.0, 1.0);
    std::size_t hi = 1;
    while (hi + 1 < keyframes.size() && keyframes[hi].at < p) ++hi;
    const Keyframe& a = keyframes[hi - 1];
    const Keyframe& b = keyframes[hi];
    const double alpha = (p - a.at) / (b.at - a.at);
    JointPose out{};
    for (int j = 0; j < kNumJoints; ++j)
        out[static_cast<std::size_t>(j)] =
            a.joints[static_cast<std::size_t>(j)] +
            alpha * (b.joints[static_cast<std::size_t>(j)] - a.joints[static_cast<std::size_t>(j)]);
    return out;
}

std::map<ActionLabel, Trajectory> default_trajectories() {
    const JointPose neutral{90.0, 90.0, 90.0, 90.0};
    std::map<ActionLabel, Trajectory> out;
    out[ActionLabel::StayIdle] = Trajectory{{{0.0, neutral}, {1.0, neutral}}};
    out[ActionLabel::ShakeHands] = Trajectory{{{0.0, neutral},
                                               {0.2, {90.0, 60.0, 90.0, 90.0}},
                                               {0.4, {90.0, 120.0, 90.0, 90.0}},
                                               {0.6, {90.0, 60.0, 90.0, 90.0}},
                                               {0.8, {90.0, 120.0, 90.0, 90.0}},
                                               {1.0, neutral}}};
    out[ActionLabel::PickUpCup] = Trajectory{{{0.0, neutral},
                                              {0.3, {90.0, 90.0, 90.0, 30.0}},
                                              {0.7, {90.0, 140.0, 90.0, 30.0}},
                                              {1.0, {90.0, 120.0, 90.0, 30.0}}}};
    return out;
}

std::string format_event(const ActuatorEvent& ev) {
    char line[192];
    std::snprintf(line, sizeof line,
                  "t=%.3f kind=%s label=%s progress=%.4f joints=%.2f,%.2f,%.2f,%.2f", ev.t,
                  kind_name(ev.kind), action_name(ev.label), ev.progress, ev.joints[0],
                  ev.joints[1], ev.joints[2], ev.joints[3]);
    return line;
}

std::optional<ActuatorEvent> parse_event(const std::string& line) {
    std::array<std::string_view, 5> fields;
    std::string_view rest = line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (rest.empty()) return std::nullopt;
        const std::size_t sp = rest.find(' ');
        fields[i] = rest.substr(0, sp);
        rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
    }
    if (!rest.empty()) return std::nullopt;

    ActuatorEvent ev;
    const auto t = field_value(fields[0], "t");
    const auto kind = field_value(fields[1], "kind");
    const auto label = field_value(fields[2], "label");
    const auto progress = field_value(fields[3], "progress");
    const auto joints = field_value(fields[4], "joints");
    if (!t || !kind || !label || !progress || !joints) return std::nullopt;

    const auto tv = parse_double(*t);
    const auto kv = kind_of(*kind);
    const auto lv = label_of(*label);
    const auto pv = parse_double(*progress);
    if (!tv || !kv || !lv || !pv) return std::nullopt;
    ev.t = *tv;
    ev.kind = *kv;
    ev.label = *lv;
    ev.progress = *pv;

    std::string_view list = *joints;
    for (int j = 0; j < kNumJoints; ++j) {
        const std::size_t comma = list.find(',');
        if ((j < kNumJoints - 1) != (comma != std::string_view::npos)) return std::nullopt;
        const auto jv = parse_double(list.substr(0, comma));
        if (!jv) return std::nullopt;
        ev.joints[static_cast<std::size_t>(j)] = *jv;
        if (comma != std::string_view::npos) list = list.substr(comma + 1);
    }
    return ev;
}

Actuator::Actuator(std::map<ActionLabel, Trajectory> trajectories, double action_duration,
                   int sample_every)
    : trajectories_(std::move(trajectories)), sample_every_(sample_every) {
    if (!(action_duration > 0.0)) throw ConfigError("action_duration must be positive");
    if (sample_every < 0) throw ConfigError("sample_every must be >= 0");
    for (int a = 0; a < kNumActions; ++a) {
        const auto it = trajectories_.find(static_cast<ActionLabel>(a));
        if (it == trajectories_.end())
            throw ConfigError(std::string("missing trajectory for ") +
                              action_name(static_cast<ActionLabel>(a)));
        it->second.validate();
    }
    state_.action_duration = action_duration;
    state_.current = ActionLabel::StayIdle;
    state_.progress = 1.0;  // completed idle: the first label is honored at once
    state_.joints = trajectories_.at(ActionLabel::StayIdle).sample(1.0);
}

bool Actuator::submit_label(ActionLabel label) {
    if (state_.progress < kDebounceFraction) {
        events_.push_back({now_s_, EventKind::Reject, label, state_.progress, state_.joints});
        return false;
    }
    if (label == state_.current) {
        events_.push_back({now_s_, EventKind::Accept, label, state_.progress, state_.joints});
        return true;
    }
    const double superseded = state_.progress;
    state_.current = label;
    state_.progress = 0.0;
    state_.joints = trajectories_.at(label).sample(0.0);
    events_.push_back({now_s_, EventKind::Transition, label, superseded, state_.joints});
    return true;
}

void Actuator::tick(double dt) {
    if (!(dt > 0.0)) throw ConfigError("tick dt must be positive");
    now_s_ += dt;
    state_.progress = std::min(1.0, state_.progress + dt / state_.action_duration);
    state_.joints = trajectories_.at(state_.current).sample(state_.progress);
    ++tick_count_;
    if (sample_every_ > 0 && tick_count_ % static_cast<std::uint64_t>(sample_every_) == 0)
        events_.push_back(
            {now_s_, EventKind::TickSample, state_.current, state_.progress, state_.joints});
}

std::vector<ActuatorEvent> run_actuator(net::SerialChannel& serial, Actuator& arm,
                                        double label_period_s, double tick_rate_hz) {
    if (!(label_period_s > 0.0) || !(tick_rate_hz > 0.0))
        throw ConfigError("label period and tick rate must be positive");
    const int sub_steps = std::max(1, static_cast<int>(std::llround(label_period_s * tick_rate_hz)));
    const double dt = label_period_s / sub_steps;

    for (;;) {
        const auto label = net::recv_action(serial, std::chrono::milliseconds(50));
        if (!label) {
            if (serial.closed()) break;
            continue;
        }
        arm.submit_label(*label);
        for (int i = 0; i < sub_steps; ++i) arm.tick(dt);
    }
    return arm.events();
}

}  // namespace neuroarm::act
