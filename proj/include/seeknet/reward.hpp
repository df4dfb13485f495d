#pragma once

// Per-tick reward: collision penalty + spin penalty + confidence-improvement
// term while pursuing, plus arrival bonus and goal-progress shaping. Each
// term is exposed separately; reward() is exactly their sum.

#include <cmath>

#include "seeknet/common.hpp"

namespace seeknet {

struct RewardConfig {
    double r_collision = -15.0;
    double w_w = -0.1;               // spin penalty weight
    double w_abs_threshold = 0.7;    // spin penalty gate on |w|
    double r_p = 2.5;                // pursuing and confidence improved
    double r_n = -0.5;               // pursuing and confidence stagnated
    double r_arrival = 15.0;         // pursued confidence first reaches lambda
    double w_g = 2.5;                // goal-progress shaping weight
    double xi = 0.1;                 // entropy bonus coefficient (training loss)
};

struct RewardContext {
    bool collided = false;
    double w_cmd = 0.0;        // commanded rotational velocity
    bool pursuing = false;
    double p_prev = 0.0;       // pursued confidence before the step
    double p_curr = 0.0;       // pursued confidence after the step
    bool arrived = false;      // pursued confidence first reached lambda
    bool has_goal = false;
    double goal_dist_prev = 0.0;
    double goal_dist_curr = 0.0;
};

inline double collision_term(const RewardContext& ctx, const RewardConfig& cfg) {
    return ctx.collided ? cfg.r_collision : 0.0;
}

inline double spin_term(const RewardContext& ctx, const RewardConfig& cfg) {
    const double mag = std::abs(ctx.w_cmd);
    return mag > cfg.w_abs_threshold ? cfg.w_w * mag : 0.0;
}

inline double confidence_term(const RewardContext& ctx, const RewardConfig& cfg) {
    if (!ctx.pursuing) return 0.0;
    return ctx.p_curr > ctx.p_prev ? cfg.r_p : cfg.r_n;
}

inline double shaping_term(const RewardContext& ctx, const RewardConfig& cfg) {
    double r = ctx.arrived ? cfg.r_arrival : 0.0;
    if (ctx.has_goal) r += cfg.w_g * (ctx.goal_dist_prev - ctx.goal_dist_curr);
    return r;
}

inline double reward(const RewardContext& ctx, const RewardConfig& cfg) {
    return collision_term(ctx, cfg) + spin_term(ctx, cfg) + confidence_term(ctx, cfg) +
           shaping_term(ctx, cfg);
}

}  // namespace seeknet
