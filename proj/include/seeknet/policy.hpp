#pragma once

// Policy network over the discretized action space. Three encoders feed a
// shared trunk: a 4-stage 5x5-conv stack over the pursued target's mask
// history, a pair of 1x1 convs plus a fully-connected stage over the three
// most recent lidar frames, and raw motion/goal features. The trunk emits
// action logits and a value estimate from a 128-unit hidden stage.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "seeknet/common.hpp"
#include "seeknet/nn.hpp"
#include "seeknet/world.hpp"

namespace seeknet {

// ---------------------------------------------------------------------------
// Action space: cross product of translational and rotational levels, all
// inside the velocity bounds box.
// ---------------------------------------------------------------------------

struct ActionSpace {
    std::vector<double> v_levels;
    std::vector<double> w_levels;

    static ActionSpace make(int nv = 5, int nw = 5) {
        if (nv < 1 || nw < 1) throw DomainError("ActionSpace: need at least one level per axis");
        ActionSpace as;
        for (int i = 0; i < nv; ++i)
            as.v_levels.push_back(nv == 1 ? 0.0 : kVelMax * i / (nv - 1));
        for (int i = 0; i < nw; ++i)
            as.w_levels.push_back(nw == 1 ? 0.0 : -kYawRateMax + 2.0 * kYawRateMax * i / (nw - 1));
        return as;
    }

    int size() const { return static_cast<int>(v_levels.size() * w_levels.size()); }

    Velocity at(int index) const {
        const int nw = static_cast<int>(w_levels.size());
        return {v_levels[static_cast<size_t>(index / nw)], w_levels[static_cast<size_t>(index % nw)]};
    }

    // Index of the (v=0, w=0) action; exists for odd w level counts.
    int stop_index() const {
        int best = 0;
        double best_mag = 1e9;
        for (int i = 0; i < size(); ++i) {
            const Velocity u = at(i);
            const double mag = std::abs(u.v) + std::abs(u.w);
            if (mag < best_mag) {
                best_mag = mag;
                best = i;
            }
        }
        return best;
    }
};

inline int sample_action(const std::vector<double>& probs, Rng& rng) {
    const double r = rng.uniform();
    double cdf = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        cdf += probs[i];
        if (r < cdf) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

struct PolicyArch {
    int mask_res = 244;
    int mask_hist = 3;
    std::array<int, 4> conv_channels = {8, 16, 16, 16};
    int embed_dim = 128;
    int lidar_beams = 180;
    int lidar_frames = 3;
    std::array<int, 2> lidar_channels = {8, 8};
    int lidar_fc = 256;
    int act_hidden = 128;
    int v_levels = 5;
    int w_levels = 5;

    int n_actions() const { return v_levels * w_levels; }
    static constexpr int kMotionFeatures = 5;  // v_prev, w_prev, rho, sin, cos

    // Spatial side lengths after each conv+pool stage.
    std::array<int, 5> stage_sides() const {
        std::array<int, 5> s{};
        s[0] = mask_res;
        for (int i = 1; i <= 4; ++i) s[static_cast<size_t>(i)] = s[static_cast<size_t>(i - 1)] / 2;
        return s;
    }
    int flat_mask_dim() const {
        const auto s = stage_sides();
        return conv_channels[3] * s[4] * s[4];
    }
    int trunk_in() const { return embed_dim + lidar_fc + kMotionFeatures; }
};

inline PolicyArch desk_arch() {
    PolicyArch a;
    a.mask_res = 61;
    a.conv_channels = {4, 8, 8, 8};
    a.embed_dim = 32;
    a.lidar_beams = 180;
    a.lidar_channels = {6, 6};
    a.lidar_fc = 64;
    return a;
}

inline PolicyArch paper_arch() { return PolicyArch{}; }

// Tiny stack for fast unit tests and the beacon task.
inline PolicyArch micro_arch() {
    PolicyArch a;
    a.mask_res = 16;
    a.conv_channels = {2, 2, 2, 2};
    a.embed_dim = 8;
    a.lidar_beams = 16;
    a.lidar_channels = {2, 2};
    a.lidar_fc = 16;
    a.act_hidden = 16;
    return a;
}

// ---------------------------------------------------------------------------
// Observation as the network consumes it.
// ---------------------------------------------------------------------------

struct PolicyObs {
    Tensor mask;   // (hist, res, res), binary occupancy as doubles
    Tensor lidar;  // (frames, beams), ranges scaled to (0, 1]
    double v_prev = 0.0;
    double w_prev = 0.0;
    double goal_rho = 0.0;  // scaled distance to goal (meters / 10)
    double goal_sin = 0.0;
    double goal_cos = 0.0;
    bool mask_all_zero = true;
};

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

class PolicyNetwork {
public:
    explicit PolicyNetwork(const PolicyArch& arch = PolicyArch()) : arch_(arch) {
        int in_ch = arch.mask_hist;
        for (int s = 0; s < 4; ++s) {
            const int out_ch = arch.conv_channels[static_cast<size_t>(s)];
            conv_[static_cast<size_t>(s)] = Conv2D("f_human.conv" + std::to_string(s), in_ch, out_ch);
            norm_[static_cast<size_t>(s)] =
                ChannelNorm("f_human.norm" + std::to_string(s), out_ch);
            in_ch = out_ch;
        }
        embed_ = Dense("f_human.embed", arch.flat_mask_dim(), arch.embed_dim);
        lidar_a_ = Conv1x1("f_lidar.conv0", arch.lidar_frames, arch.lidar_channels[0]);
        lidar_b_ = Conv1x1("f_lidar.conv1", arch.lidar_channels[0], arch.lidar_channels[1]);
        lidar_fc_ = Dense("f_lidar.fc", arch.lidar_channels[1] * arch.lidar_beams, arch.lidar_fc);
        trunk_ = Dense("f_act.hidden", arch.trunk_in(), arch.act_hidden);
        policy_head_ = Dense("f_act.policy", arch.act_hidden, arch.n_actions());
        value_head_ = Dense("f_act.value", arch.act_hidden, 1);
    }

    const PolicyArch& arch() const { return arch_; }

    void init(uint64_t seed) {
        Rng rng = Rng::stream(seed, 0x1e17);
        for (auto& c : conv_) c.init(rng);
        embed_.init(rng);
        lidar_a_.init(rng);
        lidar_b_.init(rng);
        lidar_fc_.init(rng);
        trunk_.init(rng);
        policy_head_.init(rng);
        value_head_.init(rng);
        bump_version();
    }

    void for_each_param(const ParamVisitor& fn) {
        for (int s = 0; s < 4; ++s) {
            conv_[static_cast<size_t>(s)].visit(fn);
            norm_[static_cast<size_t>(s)].visit(fn);
        }
        embed_.visit(fn);
        lidar_a_.visit(fn);
        lidar_b_.visit(fn);
        lidar_fc_.visit(fn);
        trunk_.visit(fn);
        policy_head_.visit(fn);
        value_head_.visit(fn);
    }

    size_t param_count() {
        size_t n = 0;
        for_each_param([&](Param& p) { n += p.value.size(); });
        return n;
    }

    void zero_grads() {
        for_each_param([](Param& p) { p.grad.zero(); });
    }

    // Any in-place change to parameter values must be followed by
    // bump_version() so the zero-mask embedding cache invalidates.
    void bump_version() { ++version_; }
    uint64_t version() const { return version_; }

    struct Trace {
        // f_human
        std::array<std::vector<double>, 4> conv_out, norm_out, relu_out, pool_out;
        std::array<ChannelNorm::Cache, 4> norm_cache;
        std::array<MaxPool2::Cache, 4> pool_cache;
        std::vector<double> mask_in;
        std::vector<double> z_img;
        // f_lidar
        std::vector<double> lidar_in, la_out, la_relu, lb_out, lb_relu;
        std::vector<double> z_lidar;
        // f_act
        std::vector<double> trunk_in, hidden_pre, hidden;
        std::vector<double> logits;
        double value = 0.0;
        bool skipped_mask = false;
    };

    struct Output {
        std::vector<double> logits;
        std::vector<double> probs;
        double value = 0.0;
    };

    std::vector<double> encode_human(const Tensor& mask, Trace* tr) const {
        const auto sides = arch_.stage_sides();
        if (!mask.shape_is({arch_.mask_hist, arch_.mask_res, arch_.mask_res}))
            throw ShapeError("encode_human: mask stack dims mismatch");
        Trace local;
        Trace& t = tr ? *tr : local;
        t.mask_in = mask.v;
        const double* x = t.mask_in.data();
        int side = sides[0];
        int in_ch = arch_.mask_hist;
        for (int s = 0; s < 4; ++s) {
            const int out_ch = arch_.conv_channels[static_cast<size_t>(s)];
            auto& conv_out = t.conv_out[static_cast<size_t>(s)];
            conv_out.assign(static_cast<size_t>(out_ch) * side * side, 0.0);
            conv_[static_cast<size_t>(s)].forward(x, side, side, conv_out.data());
            auto& norm_out = t.norm_out[static_cast<size_t>(s)];
            norm_out.assign(conv_out.size(), 0.0);
            norm_[static_cast<size_t>(s)].forward(conv_out.data(), side * side, norm_out.data(),
                                                  &t.norm_cache[static_cast<size_t>(s)]);
            auto& relu_out = t.relu_out[static_cast<size_t>(s)];
            relu_out.assign(norm_out.size(), 0.0);
            relu_forward(norm_out.data(), norm_out.size(), relu_out.data());
            const int nside = side / 2;
            auto& pool_out = t.pool_out[static_cast<size_t>(s)];
            pool_out.assign(static_cast<size_t>(out_ch) * nside * nside, 0.0);
            MaxPool2::forward(relu_out.data(), out_ch, side, side, pool_out.data(),
                              &t.pool_cache[static_cast<size_t>(s)]);
            x = pool_out.data();
            side = nside;
            in_ch = out_ch;
        }
        (void)in_ch;
        t.z_img.assign(static_cast<size_t>(arch_.embed_dim), 0.0);
        embed_.forward(x, t.z_img.data());
        return t.z_img;
    }

    std::vector<double> encode_lidar(const Tensor& lidar, Trace* tr) const {
        if (!lidar.shape_is({arch_.lidar_frames, arch_.lidar_beams}))
            throw ShapeError("encode_lidar: lidar stack dims mismatch");
        Trace local;
        Trace& t = tr ? *tr : local;
        const int L = arch_.lidar_beams;
        t.lidar_in = lidar.v;
        t.la_out.assign(static_cast<size_t>(arch_.lidar_channels[0]) * L, 0.0);
        lidar_a_.forward(t.lidar_in.data(), L, t.la_out.data());
        t.la_relu.assign(t.la_out.size(), 0.0);
        relu_forward(t.la_out.data(), t.la_out.size(), t.la_relu.data());
        t.lb_out.assign(static_cast<size_t>(arch_.lidar_channels[1]) * L, 0.0);
        lidar_b_.forward(t.la_relu.data(), L, t.lb_out.data());
        t.lb_relu.assign(t.lb_out.size(), 0.0);
        relu_forward(t.lb_out.data(), t.lb_out.size(), t.lb_relu.data());
        t.z_lidar.assign(static_cast<size_t>(arch_.lidar_fc), 0.0);
        lidar_fc_.forward(t.lb_relu.data(), t.z_lidar.data());
        return t.z_lidar;
    }

    // Full forward pass. When `tr` is null an inference-only path is used and
    // the all-zero mask embedding is served from a per-version cache.
    Output forward(const PolicyObs& obs, Trace* tr = nullptr) const {
        std::vector<double> z_img;
        if (!tr && obs.mask_all_zero) {
            if (zero_embed_version_ != version_) {
                Tensor zero({arch_.mask_hist, arch_.mask_res, arch_.mask_res});
                zero_embed_cache_ = encode_human(zero, nullptr);
                zero_embed_version_ = version_;
            }
            z_img = zero_embed_cache_;
        } else {
            z_img = encode_human(obs.mask, tr);
        }
        std::vector<double> z_lidar = encode_lidar(obs.lidar, tr);

        Trace local;
        Trace& t = tr ? *tr : local;
        if (!tr) t.skipped_mask = obs.mask_all_zero;
        t.trunk_in.clear();
        t.trunk_in.reserve(static_cast<size_t>(arch_.trunk_in()));
        t.trunk_in.insert(t.trunk_in.end(), z_img.begin(), z_img.end());
        t.trunk_in.insert(t.trunk_in.end(), z_lidar.begin(), z_lidar.end());
        t.trunk_in.push_back(obs.v_prev);
        t.trunk_in.push_back(obs.w_prev);
        t.trunk_in.push_back(obs.goal_rho);
        t.trunk_in.push_back(obs.goal_sin);
        t.trunk_in.push_back(obs.goal_cos);

        t.hidden_pre.assign(static_cast<size_t>(arch_.act_hidden), 0.0);
        trunk_.forward(t.trunk_in.data(), t.hidden_pre.data());
        t.hidden.assign(t.hidden_pre.size(), 0.0);
        relu_forward(t.hidden_pre.data(), t.hidden_pre.size(), t.hidden.data());
        t.logits.assign(static_cast<size_t>(arch_.n_actions()), 0.0);
        policy_head_.forward(t.hidden.data(), t.logits.data());
        double value = 0.0;
        value_head_.forward(t.hidden.data(), &value);
        t.value = value;

        for (double z : t.logits)
            if (!std::isfinite(z)) throw NumericError("policy forward produced non-finite logits");

        Output out;
        out.logits = t.logits;
        out.probs = softmax(t.logits);
        out.value = value;
        return out;
    }

    // Accumulates parameter gradients for one sample given gradients on the
    // logits and the value output.
    void backward(const Trace& t, const std::vector<double>& g_logits, double g_value) {
        std::vector<double> g_hidden(static_cast<size_t>(arch_.act_hidden), 0.0);
        {
            std::vector<double> tmp(g_hidden.size(), 0.0);
            policy_head_.backward(t.hidden.data(), g_logits.data(), tmp.data());
            for (size_t i = 0; i < g_hidden.size(); ++i) g_hidden[i] += tmp[i];
            std::fill(tmp.begin(), tmp.end(), 0.0);
            value_head_.backward(t.hidden.data(), &g_value, tmp.data());
            for (size_t i = 0; i < g_hidden.size(); ++i) g_hidden[i] += tmp[i];
        }
        std::vector<double> g_hidden_pre(g_hidden.size(), 0.0);
        relu_backward(t.hidden_pre.data(), t.hidden_pre.size(), g_hidden.data(),
                      g_hidden_pre.data());
        std::vector<double> g_trunk_in(t.trunk_in.size(), 0.0);
        trunk_.backward(t.trunk_in.data(), g_hidden_pre.data(), g_trunk_in.data());

        // Split the concatenated gradient.
        const double* g_zimg = g_trunk_in.data();
        const double* g_zlidar = g_trunk_in.data() + arch_.embed_dim;

        // f_lidar backward.
        {
            const int L = arch_.lidar_beams;
            std::vector<double> g_lb_relu(t.lb_relu.size(), 0.0);
            lidar_fc_.backward(t.lb_relu.data(), g_zlidar, g_lb_relu.data());
            std::vector<double> g_lb_out(t.lb_out.size(), 0.0);
            relu_backward(t.lb_out.data(), t.lb_out.size(), g_lb_relu.data(), g_lb_out.data());
            std::vector<double> g_la_relu(t.la_relu.size(), 0.0);
            lidar_b_.backward(t.la_relu.data(), L, g_lb_out.data(), g_la_relu.data());
            std::vector<double> g_la_out(t.la_out.size(), 0.0);
            relu_backward(t.la_out.data(), t.la_out.size(), g_la_relu.data(), g_la_out.data());
            lidar_a_.backward(t.lidar_in.data(), L, g_la_out.data(), nullptr);
        }

        // f_human backward.
        {
            const auto sides = arch_.stage_sides();
            std::vector<double> g_flat(static_cast<size_t>(arch_.flat_mask_dim()), 0.0);
            embed_.backward(t.pool_out[3].data(), g_zimg, g_flat.data());
            std::vector<double> g_pool = std::move(g_flat);
            for (int s = 3; s >= 0; --s) {
                const int side = sides[static_cast<size_t>(s)];
                std::vector<double> g_relu(t.relu_out[static_cast<size_t>(s)].size(), 0.0);
                MaxPool2::backward(t.pool_cache[static_cast<size_t>(s)], g_pool.data(),
                                   t.pool_out[static_cast<size_t>(s)].size(), g_relu.data());
                std::vector<double> g_norm(g_relu.size(), 0.0);
                relu_backward(t.norm_out[static_cast<size_t>(s)].data(),
                              t.norm_out[static_cast<size_t>(s)].size(), g_relu.data(),
                              g_norm.data());
                std::vector<double> g_conv(g_norm.size(), 0.0);
                norm_[static_cast<size_t>(s)].backward(t.norm_cache[static_cast<size_t>(s)],
                                                       side * side, g_norm.data(), g_conv.data());
                const double* x_in =
                    s == 0 ? t.mask_in.data() : t.pool_out[static_cast<size_t>(s - 1)].data();
                if (s == 0) {
                    conv_[0].backward(x_in, side, side, g_conv.data(), nullptr);
                    break;
                }
                std::vector<double> g_in(t.pool_out[static_cast<size_t>(s - 1)].size(), 0.0);
                conv_[static_cast<size_t>(s)].backward(x_in, side, side, g_conv.data(),
                                                       g_in.data());
                g_pool = std::move(g_in);
            }
        }
    }

private:
    PolicyArch arch_;
    std::array<Conv2D, 4> conv_;
    std::array<ChannelNorm, 4> norm_;
    Dense embed_;
    Conv1x1 lidar_a_, lidar_b_;
    Dense lidar_fc_;
    Dense trunk_, policy_head_, value_head_;
    uint64_t version_ = 0;
    mutable std::vector<double> zero_embed_cache_;
    mutable uint64_t zero_embed_version_ = ~0ull;
};

// ---------------------------------------------------------------------------
// Checkpoints: magic + version, manifest of (name, dtype, dims), then packed
// row-major little-endian float32 payloads in manifest order.
// ---------------------------------------------------------------------------

namespace ckpt {

inline constexpr char kMagic[8] = {'S', 'K', 'N', 'T', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kVersion = 1;

inline void put_u32(std::string& out, uint32_t x) {
    out.push_back(static_cast<char>(x & 0xff));
    out.push_back(static_cast<char>((x >> 8) & 0xff));
    out.push_back(static_cast<char>((x >> 16) & 0xff));
    out.push_back(static_cast<char>((x >> 24) & 0xff));
}

inline uint32_t get_u32(const std::string& in, size_t& pos) {
    if (pos + 4 > in.size()) throw FormatError("checkpoint: truncated header");
    const auto b = [&](size_t i) { return static_cast<uint32_t>(static_cast<uint8_t>(in[pos + i])); };
    const uint32_t x = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
    pos += 4;
    return x;
}

}  // namespace ckpt

inline std::string serialize_checkpoint(PolicyNetwork& net) {
    std::string out;
    out.append(ckpt::kMagic, sizeof(ckpt::kMagic));
    ckpt::put_u32(out, ckpt::kVersion);
    uint32_t count = 0;
    net.for_each_param([&](Param&) { ++count; });
    ckpt::put_u32(out, count);
    net.for_each_param([&](Param& p) {
        ckpt::put_u32(out, static_cast<uint32_t>(p.name.size()));
        out.append(p.name);
        ckpt::put_u32(out, 0);  // dtype 0 = float32
        ckpt::put_u32(out, static_cast<uint32_t>(p.value.shape.size()));
        for (int d : p.value.shape) ckpt::put_u32(out, static_cast<uint32_t>(d));
    });
    net.for_each_param([&](Param& p) {
        for (double x : p.value.v) {
            const float f = static_cast<float>(x);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            ckpt::put_u32(out, bits);
        }
    });
    return out;
}

inline void save_checkpoint(PolicyNetwork& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("save_checkpoint: cannot open " + path);
    const std::string blob = serialize_checkpoint(net);
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw FormatError("save_checkpoint: write failed for " + path);
}

inline void load_checkpoint(PolicyNetwork& net, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("load_checkpoint: missing checkpoint " + path);
    std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    size_t pos = 0;
    if (blob.size() < sizeof(ckpt::kMagic) ||
        std::memcmp(blob.data(), ckpt::kMagic, sizeof(ckpt::kMagic)) != 0)
        throw FormatError("load_checkpoint: bad magic");
    pos += sizeof(ckpt::kMagic);
    const uint32_t version = ckpt::get_u32(blob, pos);
    if (version != ckpt::kVersion)
        throw FormatError("load_checkpoint: unsupported version " + std::to_string(version));
    const uint32_t count = ckpt::get_u32(blob, pos);

    struct Entry {
        std::string name;
        std::vector<int> dims;
        size_t offset = 0;  // into payload, in floats
    };
    std::vector<Entry> entries;
    size_t floats = 0;
    for (uint32_t i = 0; i < count; ++i) {
        Entry e;
        const uint32_t name_len = ckpt::get_u32(blob, pos);
        if (pos + name_len > blob.size()) throw FormatError("checkpoint: truncated manifest");
        e.name = blob.substr(pos, name_len);
        pos += name_len;
        const uint32_t dtype = ckpt::get_u32(blob, pos);
        if (dtype != 0) throw FormatError("checkpoint: unsupported dtype for " + e.name);
        const uint32_t ndim = ckpt::get_u32(blob, pos);
        long long n = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            const uint32_t dim = ckpt::get_u32(blob, pos);
            e.dims.push_back(static_cast<int>(dim));
            n *= dim;
        }
        e.offset = floats;
        floats += static_cast<size_t>(n);
        entries.push_back(std::move(e));
    }
    if (pos + floats * 4 > blob.size()) throw FormatError("checkpoint: truncated payload");

    // Stage everything before touching the network: no partial loads.
    std::map<std::string, const Entry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;

    std::vector<std::pair<Param*, const Entry*>> plan;
    std::string problem;
    net.for_each_param([&](Param& p) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) {
            if (problem.empty()) problem = "missing tensor " + p.name;
            return;
        }
        if (it->second->dims != p.value.shape) {
            if (problem.empty()) problem = "dimension mismatch for tensor " + p.name;
            return;
        }
        plan.emplace_back(&p, it->second);
    });
    if (!problem.empty()) throw ConfigError("load_checkpoint: " + problem);
    if (plan.size() != entries.size())
        throw ConfigError("load_checkpoint: checkpoint holds unknown tensors");

    for (auto& [param, entry] : plan) {
        const size_t base = pos + entry->offset * 4;
        for (size_t i = 0; i < param->value.size(); ++i) {
            uint32_t bits;
            size_t at = base + i * 4;
            const auto b = [&](size_t j) {
                return static_cast<uint32_t>(static_cast<uint8_t>(blob[at + j]));
            };
            bits = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            param->value.v[i] = static_cast<double>(f);
        }
    }
    net.bump_version();
}

}  // namespace seeknet
