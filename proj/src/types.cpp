#include "neuroarm/types.hpp"

#include <cstdio>

namespace neuroarm {

const char* action_name(ActionLabel a) {
    switch (a) {
        case ActionLabel::PickUpCup: return "pickUpCup";
        case ActionLabel::ShakeHands: return "shakeHands";
        case ActionLabel::StayIdle: return "stayStationary";
    }
    return "?";
}

const char* state_name(BrainState s) {
    switch (s) {
        case BrainState::RelaxedHandshake: return "relaxed_handshake";
        case BrainState::ConcentratedCup: return "concentrated_cup";
        case BrainState::Idle: return "idle";
    }
    return "?";
}

std::string format_sig9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.8e", v);
    return buf;
}

}  // namespace neuroarm
