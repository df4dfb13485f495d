// Walks the numeric core end to end on synthetic data: cluster priors from
// random box dims, match them to ground truth, score the multi-task loss and
// assemble instances from offset votes.

#include <cstdio>

#include "seeknet/percept.hpp"

using namespace seeknet;

int main() {
    Rng rng(42);
    std::vector<PriorBox> dims;
    for (int i = 0; i < 200; ++i) dims.push_back({rng.uniform(8, 250), rng.uniform(16, 400)});
    const auto clusters = cluster_priors(dims, 21, 1);
    std::printf("21 priors from clustering (w x h), smallest and largest:\n");
    std::printf("  %.1f x %.1f ... %.1f x %.1f\n", clusters.priors.front().width,
                clusters.priors.front().height, clusters.priors.back().width,
                clusters.priors.back().height);

    const BBox gt{40, 40, 120, 200};
    std::vector<BBox> priors;
    for (const auto& p : clusters.priors)
        priors.push_back({gt.cx() - p.width / 2, gt.cy() - p.height / 2, gt.cx() + p.width / 2,
                          gt.cy() + p.height / 2});
    const auto matches = match_priors(priors, {gt}, 0.5);
    std::printf("best prior for the ground-truth box: %d (d_change %.4f)\n",
                matches.best_prior_for_gt[0],
                d_change(priors[static_cast<size_t>(matches.best_prior_for_gt[0])], gt));

    const TaskLosses losses{0.8, 0.3, 0.5, focal_loss(0.7)};
    const auto hybrid = hybrid_loss(losses, {});
    std::printf("hybrid loss at unit sigmas: %.4f\n", hybrid.total);

    std::printf("receptive field of four 5x5 conv + 2x2 pool stages: %lld\n",
                receptive_field({{1, 5}, {2, 2}, {1, 5}, {2, 2}, {1, 5}, {2, 2}, {1, 5}, {2, 2}}));
    return 0;
}
