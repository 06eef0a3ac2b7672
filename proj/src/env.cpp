#include "deguv/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace deguv {
namespace {

constexpr float kMaxDist = 1.4142135f;  // unit-square diagonal, reach normalizer

// Fixed object colors (train/easy). Distractor palette indexed by color_id.
constexpr std::array<std::uint8_t, 3> kCubeColor = {204, 44, 44};
constexpr std::array<std::uint8_t, 3> kGripperColor = {70, 105, 210};
constexpr std::array<std::uint8_t, 3> kZoneColor = {72, 160, 84};
constexpr std::array<std::array<std::uint8_t, 3>, 4> kDistractorPalette = {{
    {64, 160, 64},
    {176, 152, 48},
    {144, 64, 168},
    {48, 150, 160},
}};

float dist2d(const std::array<float, 2>& a, const std::array<float, 2>& b) {
    float dx = a[0] - b[0], dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

float clampf(float x, float lo, float hi) { return std::min(std::max(x, lo), hi); }

struct Raster {
    int res;
    float px(float x) const { return x * float(res - 1); }
    float py(float y) const { return (1.0f - y) * float(res - 1); }
};

template <typename Plot>
void draw_square(const Raster& r, float cx, float cy, float half, Plot plot) {
    int x0 = std::max(0, int(std::ceil(cx - half)));
    int x1 = std::min(r.res - 1, int(std::floor(cx + half)));
    int y0 = std::max(0, int(std::ceil(cy - half)));
    int y1 = std::min(r.res - 1, int(std::floor(cy + half)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) plot(x, y);
}

template <typename Plot>
void draw_disc(const Raster& r, float cx, float cy, float rad, Plot plot) {
    int x0 = std::max(0, int(std::ceil(cx - rad)));
    int x1 = std::min(r.res - 1, int(std::floor(cx + rad)));
    int y0 = std::max(0, int(std::ceil(cy - rad)));
    int y1 = std::min(r.res - 1, int(std::floor(cy + rad)));
    float r2 = rad * rad;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            float dx = float(x) - cx, dy = float(y) - cy;
            if (dx * dx + dy * dy <= r2) plot(x, y);
        }
}

template <typename Plot>
void draw_triangle(const Raster& r, float cx, float cy, float half, Plot plot) {
    // upward triangle: apex at (cx, cy-half), base at cy+half
    int y0 = std::max(0, int(std::ceil(cy - half)));
    int y1 = std::min(r.res - 1, int(std::floor(cy + half)));
    for (int y = y0; y <= y1; ++y) {
        float t = (float(y) - (cy - half)) / (2.0f * half);  // 0 apex .. 1 base
        float hw = t * half;
        int x0 = std::max(0, int(std::ceil(cx - hw)));
        int x1 = std::min(r.res - 1, int(std::floor(cx + hw)));
        for (int x = x0; x <= x1; ++x) plot(x, y);
    }
}

// Gripper: two prongs and a bridge, a small open claw.
template <typename Plot>
void draw_gripper(const Raster& r, float cx, float cy, float scale, Plot plot) {
    float prong_h = 4.5f * scale, prong_w = 1.2f * scale, gap = 3.2f * scale;
    draw_square(r, cx - gap, cy, 0.0f, plot);  // keep center plotted even at tiny scales
    // left/right prongs
    for (int side : {-1, 1}) {
        float px = cx + float(side) * gap;
        int x0 = std::max(0, int(std::ceil(px - prong_w)));
        int x1 = std::min(r.res - 1, int(std::floor(px + prong_w)));
        int y0 = std::max(0, int(std::ceil(cy - prong_h)));
        int y1 = std::min(r.res - 1, int(std::floor(cy + prong_h)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) plot(x, y);
    }
    // bridge across the top
    int x0 = std::max(0, int(std::ceil(cx - gap)));
    int x1 = std::min(r.res - 1, int(std::floor(cx + gap)));
    int y0 = std::max(0, int(std::ceil(cy - prong_h - 1.5f * scale)));
    int y1 = std::min(r.res - 1, int(std::floor(cy - prong_h + 0.5f * scale)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) plot(x, y);
}

template <typename Plot>
void draw_distractor(const Raster& r, const Distractor& d, float scale, Plot plot) {
    float cx = r.px(d.x), cy = r.py(d.y);
    switch (d.shape_id) {
        case 0: draw_square(r, cx, cy, 4.5f * scale, plot); break;
        case 1: draw_disc(r, cx, cy, 5.0f * scale, plot); break;
        default: draw_triangle(r, cx, cy, 5.5f * scale, plot); break;
    }
}

std::array<std::uint8_t, 3> bg_pixel(const Appearance& a, int x, int y) {
    switch (a.bg_kind) {
        case 1:
            return (((x / a.cell) + (y / a.cell)) % 2 == 0) ? a.bg_a : a.bg_b;
        case 2:
            return (((a.stripe_axis == 0 ? x : y) / a.cell) % 2 == 0) ? a.bg_a : a.bg_b;
        case 3: {
            // bilinear over the color lattice, 8px pitch
            float fx = float(x) / 8.0f, fy = float(y) / 8.0f;
            int ix = int(fx), iy = int(fy);
            float tx = fx - float(ix), ty = fy - float(iy);
            auto at = [&](int gx, int gy) -> const std::array<std::uint8_t, 3>& {
                gx = std::min(gx, a.lattice_n - 1);
                gy = std::min(gy, a.lattice_n - 1);
                return a.lattice[std::size_t(gy) * a.lattice_n + gx];
            };
            const auto &c00 = at(ix, iy), &c10 = at(ix + 1, iy), &c01 = at(ix, iy + 1),
                       &c11 = at(ix + 1, iy + 1);
            std::array<std::uint8_t, 3> out;
            for (int c = 0; c < 3; ++c) {
                float v = (1 - tx) * (1 - ty) * c00[c] + tx * (1 - ty) * c10[c] +
                          (1 - tx) * ty * c01[c] + tx * ty * c11[c];
                out[c] = std::uint8_t(clampf(v, 0.0f, 255.0f));
            }
            return out;
        }
        default:
            return a.bg_a;
    }
}

}  // namespace

Mode mode_from_string(const std::string& s) {
    if (s == "train") return Mode::Train;
    if (s == "easy") return Mode::Easy;
    if (s == "medium") return Mode::Medium;
    if (s == "hard") return Mode::Hard;
    throw ConfigError("unknown perturbation mode: '" + s + "' (expected train/easy/medium/hard)");
}

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Train: return "train";
        case Mode::Easy: return "easy";
        case Mode::Medium: return "medium";
        default: return "hard";
    }
}

Appearance make_appearance(Mode mode, std::uint64_t episode_seed, const EnvParams& p) {
    Appearance a;
    a.mode = mode;
    Rng rng = Rng::stream(episode_seed, "appearance", static_cast<std::uint64_t>(mode));
    auto rand_color = [&](int lo, int hi) {
        std::array<std::uint8_t, 3> c;
        for (int i = 0; i < 3; ++i) c[i] = std::uint8_t(rng.uniform_int(lo, hi));
        return c;
    };
    // distractor colors default to the fixed palette; perturbed modes recolor
    a.distractor_colors.resize(std::size_t(std::max(p.n_distractors, 0)));

    switch (mode) {
        case Mode::Train:
            a.bg_kind = 0;
            a.bg_a = {112, 112, 112};
            break;
        case Mode::Easy:
            a.bg_kind = 0;
            a.bg_a = rand_color(56, 184);
            break;
        case Mode::Medium:
            a.bg_kind = rng.uniform() < 0.5 ? 1 : 2;
            a.bg_a = rand_color(32, 224);
            a.bg_b = rand_color(32, 224);
            a.cell = rng.uniform_int(6, 14);
            a.stripe_axis = rng.uniform_int(0, 1);
            for (auto& c : a.distractor_colors) c = rand_color(32, 224);
            break;
        case Mode::Hard:
            a.bg_kind = 3;
            a.lattice_n = 9;
            a.lattice.resize(std::size_t(a.lattice_n) * a.lattice_n);
            for (auto& c : a.lattice) c = rand_color(0, 255);
            a.brightness = float(rng.uniform(p.hard_brightness_lo, p.hard_brightness_hi));
            for (auto& c : a.distractor_colors) c = rand_color(0, 255);
            break;
    }
    if (mode == Mode::Train || mode == Mode::Easy) {
        for (std::size_t i = 0; i < a.distractor_colors.size(); ++i)
            a.distractor_colors[i] = kDistractorPalette[i % kDistractorPalette.size()];
    }
    return a;
}

void render_rgb_frame(const EnvState& s, const EnvParams& p, const Appearance& a,
                      std::uint8_t* out) {
    const int res = p.resolution;
    Raster r{res};
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            auto c = bg_pixel(a, x, y);
            std::uint8_t* px = out + (std::size_t(y) * res + x) * 3;
            px[0] = c[0];
            px[1] = c[1];
            px[2] = c[2];
        }

    auto paint = [&](std::array<std::uint8_t, 3> color) {
        return [out, res, color](int x, int y) {
            std::uint8_t* px = out + (std::size_t(y) * res + x) * 3;
            px[0] = color[0];
            px[1] = color[1];
            px[2] = color[2];
        };
    };
    auto blend = [out, res](int x, int y, std::array<std::uint8_t, 3> color, float t) {
        std::uint8_t* px = out + (std::size_t(y) * res + x) * 3;
        for (int c = 0; c < 3; ++c)
            px[c] = std::uint8_t(clampf((1.0f - t) * px[c] + t * color[c], 0.0f, 255.0f));
    };

    // target zone: faint fill plus a ring, fixed location, flat in depth
    {
        float zx = r.px(p.zone_x), zy = r.py(p.zone_y);
        float zr = p.zone_radius * float(res - 1);
        draw_disc(r, zx, zy, zr, [&](int x, int y) { blend(x, y, kZoneColor, 0.18f); });
        int x0 = std::max(0, int(zx - zr - 2)), x1 = std::min(res - 1, int(zx + zr + 2));
        int y0 = std::max(0, int(zy - zr - 2)), y1 = std::min(res - 1, int(zy + zr + 2));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                float dx = float(x) - zx, dy = float(y) - zy;
                float d = std::sqrt(dx * dx + dy * dy);
                if (std::fabs(d - zr) <= 1.2f) blend(x, y, kZoneColor, 0.65f);
            }
    }

    float scale = float(res) / 64.0f;
    for (std::size_t i = 0; i < s.distractors.size(); ++i) {
        auto color = i < a.distractor_colors.size()
                         ? a.distractor_colors[i]
                         : kDistractorPalette[s.distractors[i].color_id % 4];
        draw_distractor(r, s.distractors[i], scale, paint(color));
    }
    draw_gripper(r, r.px(s.gripper[0]), r.py(s.gripper[1]), scale, paint(kGripperColor));
    draw_square(r, r.px(s.cube[0]), r.py(s.cube[1]), 3.0f * scale, paint(kCubeColor));

    if (a.brightness != 1.0f) {
        std::size_t n = std::size_t(res) * res * 3;
        for (std::size_t i = 0; i < n; ++i)
            out[i] = std::uint8_t(clampf(std::round(a.brightness * float(out[i])), 0.0f, 255.0f));
    }
}

void render_depth_frame(const EnvState& s, const EnvParams& p, float* out) {
    const int res = p.resolution;
    Raster r{res};
    std::fill(out, out + std::size_t(res) * res, 0.0f);
    auto layer = [&](float v) {
        return [out, res, v](int x, int y) { out[std::size_t(y) * res + x] = v; };
    };
    float scale = float(res) / 64.0f;
    for (const auto& d : s.distractors) draw_distractor(r, d, scale, layer(0.4f));
    draw_gripper(r, r.px(s.gripper[0]), r.py(s.gripper[1]), scale, layer(0.8f));
    draw_square(r, r.px(s.cube[0]), r.py(s.cube[1]), 3.0f * scale, layer(1.0f));
}

std::array<float, 3> oracle_action(const EnvState& s, const EnvParams& p) {
    std::array<float, 2> target = s.held ? std::array<float, 2>{p.zone_x, p.zone_y} : s.cube;
    float dx = target[0] - s.gripper[0];
    float dy = target[1] - s.gripper[1];
    std::array<float, 3> a{clampf(dx / p.move_delta, -1.0f, 1.0f),
                           clampf(dy / p.move_delta, -1.0f, 1.0f), -1.0f};
    if (s.held) {
        a[2] = 1.0f;
        float d = std::sqrt(dx * dx + dy * dy);
        if (d < 0.5f * p.zone_radius) {
            // settled inside the zone: hold position
            a[0] = dx;
            a[1] = dy;
        }
    } else if (dist2d(s.gripper, s.cube) < 0.8f * p.grip_radius) {
        a[2] = 1.0f;
    }
    return a;
}

std::vector<std::uint8_t> relevance_from_depth(const float* depth, int h, int w) {
    std::vector<std::uint8_t> m(std::size_t(h) * w, 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = depth[i] >= 0.6f ? 1 : 0;
    return m;
}

MiniManipEnv::MiniManipEnv(EnvParams p) : params_(p) {}

Observation MiniManipEnv::reset(std::uint64_t seed, Mode mode) {
    mode_ = mode;
    appearance_ = make_appearance(mode, seed, params_);

    Rng geo = Rng::stream(seed, "geometry");
    state_ = EnvState{};
    state_.gripper = {float(geo.uniform(0.2, 0.8)), float(geo.uniform(0.15, 0.35))};
    state_.cube = {float(geo.uniform(0.25, 0.75)), float(geo.uniform(0.45, 0.65))};
    state_.distractors.clear();
    for (int i = 0; i < params_.n_distractors; ++i) {
        Distractor d;
        for (int tries = 0; tries < 64; ++tries) {
            d.x = float(geo.uniform(0.08, 0.92));
            d.y = float(geo.uniform(0.08, 0.92));
            std::array<float, 2> pos{d.x, d.y};
            bool clear = dist2d(pos, state_.cube) > 0.14f && dist2d(pos, state_.gripper) > 0.14f;
            for (const auto& other : state_.distractors)
                clear = clear && dist2d(pos, {other.x, other.y}) > 0.14f;
            if (clear) break;
        }
        d.shape_id = geo.uniform_int(0, 2);
        d.color_id = geo.uniform_int(0, 3);
        state_.distractors.push_back(d);
    }
    state_.step_count = 0;
    state_.held = false;
    started_ = true;
    done_ = false;

    const int k = params_.frame_stack, res = params_.resolution;
    stack_rgb_.assign(std::size_t(k) * res * res * 3, 0);
    stack_depth_.assign(std::size_t(k) * res * res, 0.0f);
    std::vector<std::uint8_t> rgb(std::size_t(res) * res * 3);
    std::vector<float> depth(std::size_t(res) * res);
    render_rgb_frame(state_, params_, appearance_, rgb.data());
    render_depth_frame(state_, params_, depth.data());
    for (int f = 0; f < k; ++f) {
        std::copy(rgb.begin(), rgb.end(), stack_rgb_.begin() + std::size_t(f) * rgb.size());
        std::copy(depth.begin(), depth.end(), stack_depth_.begin() + std::size_t(f) * depth.size());
    }
    return make_observation();
}

StepResult MiniManipEnv::step(const std::array<float, 3>& action) {
    if (!started_) throw ProtocolError("step() before reset()");
    if (done_) throw ProtocolError("step() after episode end; call reset()");

    std::array<float, 3> a{clampf(action[0], -1.0f, 1.0f), clampf(action[1], -1.0f, 1.0f),
                           clampf(action[2], -1.0f, 1.0f)};
    state_.gripper[0] = clampf(state_.gripper[0] + a[0] * params_.move_delta, 0.0f, 1.0f);
    state_.gripper[1] = clampf(state_.gripper[1] + a[1] * params_.move_delta, 0.0f, 1.0f);
    if (state_.held) {
        state_.cube = state_.gripper;
    } else if (a[2] > 0.0f && dist2d(state_.gripper, state_.cube) < params_.grip_radius) {
        state_.held = true;
        state_.cube = state_.gripper;
    }

    float reach = std::max(0.0f, 1.0f - dist2d(state_.gripper, state_.cube) / kMaxDist);
    float reward = 0.01f * reach;
    if (state_.held &&
        dist2d(state_.cube, {params_.zone_x, params_.zone_y}) <= params_.zone_radius)
        reward += 0.05f;

    state_.step_count += 1;
    done_ = state_.step_count >= params_.horizon;
    push_frame();
    return StepResult{make_observation(), reward, done_};
}

void MiniManipEnv::push_frame() {
    const int res = params_.resolution;
    const std::size_t fr = std::size_t(res) * res * 3, fd = std::size_t(res) * res;
    // shift the stack left by one frame, render the new frame at the end
    std::memmove(stack_rgb_.data(), stack_rgb_.data() + fr, (stack_rgb_.size() - fr));
    std::memmove(stack_depth_.data(), stack_depth_.data() + fd,
                 (stack_depth_.size() - fd) * sizeof(float));
    render_rgb_frame(state_, params_, appearance_, stack_rgb_.data() + stack_rgb_.size() - fr);
    render_depth_frame(state_, params_, stack_depth_.data() + stack_depth_.size() - fd);
}

Observation MiniManipEnv::make_observation() const {
    Observation o;
    o.k = params_.frame_stack;
    o.h = o.w = params_.resolution;
    o.rgb = stack_rgb_;
    o.depth = stack_depth_;
    return o;
}

void MiniManipEnv::current_frames(std::vector<std::uint8_t>& rgb, std::vector<float>& depth) const {
    const int res = params_.resolution;
    rgb.resize(std::size_t(res) * res * 3);
    depth.resize(std::size_t(res) * res);
    render_rgb_frame(state_, params_, appearance_, rgb.data());
    render_depth_frame(state_, params_, depth.data());
}

std::vector<std::uint8_t> MiniManipEnv::relevance_mask() const {
    const int res = params_.resolution;
    std::vector<float> depth(std::size_t(res) * res);
    render_depth_frame(state_, params_, depth.data());
    return relevance_from_depth(depth.data(), res, res);
}

}  // namespace deguv
