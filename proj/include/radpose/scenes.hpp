#pragma once

// Scripted 14-scatterer human scenes and their projected 2D ground truth.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "radpose/radar.hpp"
#include "radpose/skeleton.hpp"

namespace radpose {

inline constexpr std::array<std::string_view, 4> kMotionScripts = {"static_pose", "wave_one_hand", "wave_two_hands",
                                                                   "walk_wave"};

struct MotionParams {
    double fps = 10.0;
    double period = 2.0;     // seconds per limb cycle
    double amplitude = 1.0;  // scales every limb excursion
    double lateral = 0.0;    // subject x offset, meters
    double depth = 3.2;      // subject distance along boresight, meters
    double base_amplitude = 1.0;
};

struct SceneSequence {
    std::vector<ScatterScene> frames;
    std::vector<Skeleton2D> ground_truth;
};

// Standing pose, subject-centred (x lateral with the subject's right at -x,
// y depth, z height above the floor).
inline std::array<Vec3, kNumKeypoints> base_pose() {
    return {{
        {0.00, 0.00, 1.55},   // head
        {0.00, 0.00, 1.38},   // neck
        {-0.19, 0.00, 1.35},  // r shoulder
        {0.19, 0.00, 1.35},
        {-0.22, 0.02, 1.08},  // r elbow
        {0.22, 0.02, 1.08},
        {-0.24, 0.00, 0.83},  // r wrist
        {0.24, 0.00, 0.83},
        {-0.11, 0.00, 0.90},  // r hip
        {0.11, 0.00, 0.90},
        {-0.11, 0.00, 0.48},  // r knee
        {0.11, 0.00, 0.48},
        {-0.11, 0.00, 0.08},  // r ankle
        {0.11, 0.00, 0.08},
    }};
}

inline bool is_torso(std::size_t k) {
    return k == kHead || k == kNeck || k == kRShoulder || k == kLShoulder || k == kRHip || k == kLHip;
}

// Orthographic map of the 3 m x 3 m frontal workspace onto the 256 x 256
// virtual camera.  Image y grows downward.
inline Point2 project_to_camera(const Vec3& p) {
    return {clamp_camera((p.x + 1.5) / 3.0 * kCameraSize), clamp_camera((2.36 - p.z) / 3.0 * kCameraSize)};
}

namespace detail {

// Keypoint displacement A * g(phase) with analytic time derivative.
struct LimbTerm {
    std::size_t keypoint;
    Vec3 amp;
    double phase0 = 0;   // radians
    bool raise = false;  // true: g = (1 - cos) / 2, false: g = sin
};

// The raised hand also reaches toward the sensor, so a wave at a ~1 s period
// peaks at several doppler bins of radial speed.
inline std::vector<LimbTerm> wave_terms(bool right, bool left) {
    std::vector<LimbTerm> t;
    if (right) {
        t.push_back({kRElbow, {-0.12, -0.20, 0.28}, 0, true});
        t.push_back({kRWrist, {-0.20, -0.40, 0.60}, 0, true});
    }
    if (left) {
        t.push_back({kLElbow, {0.12, -0.20, 0.28}, 0, true});
        t.push_back({kLWrist, {0.20, -0.40, 0.60}, 0, true});
    }
    return t;
}

}  // namespace detail

// Generates `duration` seconds of frames at params.fps.  Throws on an unknown
// script id or a non-positive duration.
inline SceneSequence skeleton_scene(std::string_view script, double duration, const MotionParams& params = {}) {
    if (!(duration > 0)) throw Error("skeleton_scene: duration must be positive");
    if (!(params.fps > 0) || !(params.period > 0)) throw Error("skeleton_scene: fps and period must be positive");
    std::vector<detail::LimbTerm> terms;
    double sway = 0;  // whole-body depth oscillation amplitude
    if (script == "static_pose") {
    } else if (script == "wave_one_hand") {
        terms = detail::wave_terms(true, false);
    } else if (script == "wave_two_hands") {
        terms = detail::wave_terms(true, true);
    } else if (script == "walk_wave") {
        terms = detail::wave_terms(true, true);
        // Alternating stride: legs swing in depth in antiphase.
        terms.push_back({kRKnee, {0, -0.08, 0.04}, 0, false});
        terms.push_back({kRAnkle, {0, -0.12, 0.0}, 0, false});
        terms.push_back({kLKnee, {0, -0.08, 0.04}, std::numbers::pi, false});
        terms.push_back({kLAnkle, {0, -0.12, 0.0}, std::numbers::pi, false});
        sway = 0.08;
    } else {
        throw Error("skeleton_scene: unknown motion script '" + std::string(script) + "'");
    }

    const auto n_frames = static_cast<std::size_t>(std::llround(duration * params.fps));
    const auto base = base_pose();
    const double omega = 2.0 * std::numbers::pi / params.period;
    const double a = params.amplitude;
    SceneSequence seq;
    seq.frames.reserve(n_frames);
    seq.ground_truth.reserve(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) {
        // Reduce the cycle position before scaling so whole periods land on
        // exactly the same phase.
        const double cycles = static_cast<double>(f) / (params.fps * params.period);
        const double phase = 2.0 * std::numbers::pi * (cycles - std::floor(cycles));

        std::array<Vec3, kNumKeypoints> pos = base, vel{};
        const Vec3 body{params.lateral, params.depth + sway * a * std::sin(phase), 0.0};
        const Vec3 body_vel{0.0, sway * a * omega * std::cos(phase), 0.0};
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            pos[k] = pos[k] + body;
            vel[k] = body_vel;
        }
        for (const auto& t : terms) {
            const double ph = phase + t.phase0;
            const double g = t.raise ? 0.5 * (1.0 - std::cos(ph)) : std::sin(ph);
            const double dg = t.raise ? 0.5 * omega * std::sin(ph) : omega * std::cos(ph);
            pos[t.keypoint] = pos[t.keypoint] + t.amp * (a * g);
            vel[t.keypoint] = vel[t.keypoint] + t.amp * (a * dg);
        }

        ScatterScene scene;
        scene.duration = duration;
        scene.motion_script = std::string(script);
        Skeleton2D gt;
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            scene.targets.push_back(
                {pos[k], vel[k], params.base_amplitude * (is_torso(k) ? 2.0 : 1.0)});
            gt.coords[k] = project_to_camera(pos[k]);
        }
        seq.frames.push_back(std::move(scene));
        seq.ground_truth.push_back(gt);
    }
    return seq;
}

}  // namespace radpose
