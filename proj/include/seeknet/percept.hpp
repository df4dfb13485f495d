#pragma once

// Pure numerical routines for the detection/segmentation stack: receptive
// field recursion, corner-offset box distance, prior clustering, prior
// matching, uncertainty-weighted multi-task loss, focal loss, offset-voting
// instance assembly and mask IoU. Everything here is reentrant and
// deterministic given an explicit Rng.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "seeknet/common.hpp"

namespace seeknet {

// ---------------------------------------------------------------------------
// Receptive field
// ---------------------------------------------------------------------------

struct LayerSpec {
    int stride = 1;
    int kernel = 1;
};

// Folds RF <- (RF - 1) * s + k over the stack, innermost layer first.
inline long long receptive_field(const std::vector<LayerSpec>& layers, long long rf_in = 1) {
    if (rf_in < 1) throw DomainError("receptive_field: rf_in must be >= 1");
    long long rf = rf_in;
    for (const auto& l : layers) {
        if (l.stride < 1 || l.kernel < 1)
            throw DomainError("receptive_field: stride and kernel must be >= 1");
        rf = (rf - 1) * l.stride + l.kernel;
    }
    return rf;
}

// Per-layer receptive fields for the audit report.
inline std::vector<long long> receptive_field_trace(const std::vector<LayerSpec>& layers,
                                                    long long rf_in = 1) {
    std::vector<long long> out;
    out.reserve(layers.size());
    long long rf = rf_in;
    for (const auto& l : layers) {
        rf = receptive_field({l}, rf);
        out.push_back(rf);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Boxes
// ---------------------------------------------------------------------------

struct BBox {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double cx() const { return 0.5 * (xmin + xmax); }
    double cy() const { return 0.5 * (ymin + ymax); }
    bool well_formed() const { return xmax > xmin && ymax > ymin; }
};

struct PriorBox {
    double width = 0.0;
    double height = 0.0;
};

// Corner-offset distance between a prior placement and a ground-truth box.
// The squared corner deltas are divided by the raw ground-truth extent (not
// its square); a normalized variant is available behind the flag.
inline double d_change(const BBox& prior, const BBox& gt, bool normalized = false) {
    if (!gt.well_formed()) throw DomainError("d_change: degenerate ground-truth box");
    const double w = gt.width();
    const double h = gt.height();
    const double dx_tl = std::abs(prior.xmin - gt.xmin);
    const double dy_tl = std::abs(prior.ymin - gt.ymin);
    const double dx_br = std::abs(prior.xmax - gt.xmax);
    const double dy_br = std::abs(prior.ymax - gt.ymax);
    if (normalized)
        return std::sqrt((dy_tl * dy_tl) / (h * h) + (dx_tl * dx_tl) / (w * w) +
                         (dy_br * dy_br) / (h * h) + (dx_br * dx_br) / (w * w));
    return std::sqrt(dy_tl * dy_tl / h + dx_tl * dx_tl / w + dy_br * dy_br / h +
                     dx_br * dx_br / w);
}

// ---------------------------------------------------------------------------
// Prior clustering: Lloyd k-means over (w, h) with k-means++ seeding.
// ---------------------------------------------------------------------------

struct KMeansResult {
    std::vector<PriorBox> priors;          // centroids ordered by area
    std::vector<double> inertia_history;   // within-cluster squared distance per iteration
};

inline KMeansResult cluster_priors(const std::vector<PriorBox>& gt_dims, int k = 21,
                                   uint64_t seed = 0, int max_iters = 100, double tol = 1e-6) {
    const int n = static_cast<int>(gt_dims.size());
    if (k < 1) throw DomainError("cluster_priors: k must be >= 1");
    if (n < k) throw DomainError("cluster_priors: fewer boxes than clusters");

    Rng rng = Rng::stream(seed, 0x6b6d6e73);
    std::vector<PriorBox> centroids;
    centroids.reserve(static_cast<size_t>(k));

    const auto dist2 = [](const PriorBox& a, const PriorBox& b) {
        const double dw = a.width - b.width;
        const double dh = a.height - b.height;
        return dw * dw + dh * dh;
    };

    // k-means++ seeding.
    centroids.push_back(gt_dims[static_cast<size_t>(rng.uniform_index(static_cast<uint64_t>(n)))]);
    std::vector<double> d2(static_cast<size_t>(n), 0.0);
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, dist2(gt_dims[static_cast<size_t>(i)], c));
            d2[static_cast<size_t>(i)] = best;
            total += best;
        }
        if (total <= 0.0) {
            // All remaining points coincide with centroids; duplicate one.
            centroids.push_back(gt_dims[static_cast<size_t>(rng.uniform_index(static_cast<uint64_t>(n)))]);
            continue;
        }
        double r = rng.uniform() * total;
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            r -= d2[static_cast<size_t>(i)];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        centroids.push_back(gt_dims[static_cast<size_t>(pick)]);
    }

    KMeansResult res;
    std::vector<int> assign(static_cast<size_t>(n), 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_j = 0;
            for (int j = 0; j < k; ++j) {
                const double d = dist2(gt_dims[static_cast<size_t>(i)], centroids[static_cast<size_t>(j)]);
                if (d < best) {
                    best = d;
                    best_j = j;
                }
            }
            assign[static_cast<size_t>(i)] = best_j;
            inertia += best;
        }
        res.inertia_history.push_back(inertia);

        std::vector<PriorBox> sums(static_cast<size_t>(k));
        std::vector<int> counts(static_cast<size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            auto& s = sums[static_cast<size_t>(assign[static_cast<size_t>(i)])];
            s.width += gt_dims[static_cast<size_t>(i)].width;
            s.height += gt_dims[static_cast<size_t>(i)].height;
            ++counts[static_cast<size_t>(assign[static_cast<size_t>(i)])];
        }
        double movement = 0.0;
        for (int j = 0; j < k; ++j) {
            PriorBox next = centroids[static_cast<size_t>(j)];
            if (counts[static_cast<size_t>(j)] > 0) {
                next.width = sums[static_cast<size_t>(j)].width / counts[static_cast<size_t>(j)];
                next.height = sums[static_cast<size_t>(j)].height / counts[static_cast<size_t>(j)];
            } else {
                // Re-seat an empty cluster on the farthest point.
                double far = -1.0;
                int pick = 0;
                for (int i = 0; i < n; ++i) {
                    const double d = dist2(gt_dims[static_cast<size_t>(i)],
                                           centroids[static_cast<size_t>(assign[static_cast<size_t>(i)])]);
                    if (d > far) {
                        far = d;
                        pick = i;
                    }
                }
                next = gt_dims[static_cast<size_t>(pick)];
            }
            movement += std::sqrt(dist2(next, centroids[static_cast<size_t>(j)]));
            centroids[static_cast<size_t>(j)] = next;
        }
        if (movement <= tol) break;
    }

    std::sort(centroids.begin(), centroids.end(), [](const PriorBox& a, const PriorBox& b) {
        const double aa = a.width * a.height;
        const double bb = b.width * b.height;
        if (aa != bb) return aa < bb;
        return a.width < b.width;
    });
    res.priors = std::move(centroids);
    return res;
}

// ---------------------------------------------------------------------------
// Prior matching
// ---------------------------------------------------------------------------

struct PriorMatches {
    std::vector<int> best_prior_for_gt;            // -1 when no priors exist
    std::vector<std::pair<int, int>> positives;    // (prior index, gt index)
};

inline PriorMatches match_priors(const std::vector<BBox>& priors, const std::vector<BBox>& gts,
                                 double threshold) {
    PriorMatches out;
    out.best_prior_for_gt.assign(gts.size(), -1);
    if (gts.empty() || priors.empty()) return out;

    std::vector<std::vector<double>> d(priors.size(), std::vector<double>(gts.size(), 0.0));
    for (size_t p = 0; p < priors.size(); ++p)
        for (size_t g = 0; g < gts.size(); ++g) d[p][g] = d_change(priors[p], gts[g]);

    std::vector<char> positive(priors.size() * gts.size(), 0);
    for (size_t g = 0; g < gts.size(); ++g) {
        int best = 0;
        for (size_t p = 1; p < priors.size(); ++p)
            if (d[p][g] < d[static_cast<size_t>(best)][g]) best = static_cast<int>(p);
        out.best_prior_for_gt[g] = best;
        positive[static_cast<size_t>(best) * gts.size() + g] = 1;
    }
    // Threshold positives: a prior below threshold for several gts goes to its
    // nearest one (ties to the lowest gt index).
    for (size_t p = 0; p < priors.size(); ++p) {
        int best_g = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t g = 0; g < gts.size(); ++g) {
            if (d[p][g] <= threshold && d[p][g] < best_d) {
                best_d = d[p][g];
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0) positive[p * gts.size() + static_cast<size_t>(best_g)] = 1;
    }
    for (size_t p = 0; p < priors.size(); ++p)
        for (size_t g = 0; g < gts.size(); ++g)
            if (positive[p * gts.size() + g])
                out.positives.emplace_back(static_cast<int>(p), static_cast<int>(g));
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct TaskLosses {
    double sem = 0.0, off = 0.0, bbox = 0.0, cls = 0.0;
};

struct TaskSigmas {
    double sem = 1.0, off = 1.0, bbox = 1.0, cls = 1.0;
};

struct HybridLossResult {
    double total = 0.0;
    TaskSigmas grad;  // d(total)/d(sigma) per task
};

// Uncertainty-weighted multi-task total: sum of L/sigma^2 + log sigma.
inline HybridLossResult hybrid_loss(const TaskLosses& losses, const TaskSigmas& sigmas) {
    const auto term = [](double loss, double sigma, double& grad) {
        if (!(sigma > 0.0)) throw DomainError("hybrid_loss: sigma must be positive");
        if (!(loss >= 0.0) || !std::isfinite(loss))
            throw DomainError("hybrid_loss: losses must be finite and non-negative");
        grad = -2.0 * loss / (sigma * sigma * sigma) + 1.0 / sigma;
        return loss / (sigma * sigma) + std::log(sigma);
    };
    HybridLossResult r;
    r.total += term(losses.sem, sigmas.sem, r.grad.sem);
    r.total += term(losses.off, sigmas.off, r.grad.off);
    r.total += term(losses.bbox, sigmas.bbox, r.grad.bbox);
    r.total += term(losses.cls, sigmas.cls, r.grad.cls);
    return r;
}

// Focal loss for the true-class probability: -alpha * (1-p)^gamma * ln(p).
inline double focal_loss(double p, double gamma = 2.0, double alpha = 0.25) {
    if (!(p > 0.0) || p > 1.0) throw DomainError("focal_loss: p must lie in (0, 1]");
    if (gamma < 0.0) throw DomainError("focal_loss: gamma must be non-negative");
    return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
}

// ---------------------------------------------------------------------------
// Instance assembly: each foreground pixel votes for the detection whose
// center is nearest to pixel + offset among boxes of the pixel's class.
// Instance ids are 1-based box indices; background stays 0.
// ---------------------------------------------------------------------------

struct DetectionBox {
    BBox box;
    int cls = 0;
    double confidence = 0.0;
};

inline std::vector<int> assemble_instances(const std::vector<int>& semantic,
                                           const std::vector<double>& offsets,  // 2 per pixel: dx, dy
                                           int width, int height,
                                           const std::vector<DetectionBox>& boxes) {
    const size_t pixels = static_cast<size_t>(width) * static_cast<size_t>(height);
    if (semantic.size() != pixels || offsets.size() != pixels * 2)
        throw ShapeError("assemble_instances: map dimensions disagree");
    std::vector<int> instances(pixels, 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const size_t p = static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x);
            const int cls = semantic[p];
            if (cls == 0) continue;  // background
            const double vx = x + offsets[2 * p];
            const double vy = y + offsets[2 * p + 1];
            int best = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (size_t b = 0; b < boxes.size(); ++b) {
                if (boxes[b].cls != cls) continue;
                const double dx = vx - boxes[b].box.cx();
                const double dy = vy - boxes[b].box.cy();
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = static_cast<int>(b) + 1;
                }
            }
            instances[p] = best;
        }
    }
    return instances;
}

// ---------------------------------------------------------------------------
// Mask IoU
// ---------------------------------------------------------------------------

inline double mask_iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    if (a.size() != b.size()) throw ShapeError("mask_iou: masks must share dimensions");
    long long inter = 0, uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const bool pa = a[i] != 0;
        const bool pb = b[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) return 1.0;  // empty vs empty
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// Mean IoU over pairs matched by position in the lists.
inline double miou(const std::vector<std::vector<uint8_t>>& pred,
                   const std::vector<std::vector<uint8_t>>& gt) {
    if (pred.size() != gt.size()) throw ShapeError("miou: pair counts differ");
    if (pred.empty()) return 1.0;
    double sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) sum += mask_iou(pred[i], gt[i]);
    return sum / static_cast<double>(pred.size());
}

}  // namespace seeknet
