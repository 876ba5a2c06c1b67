#pragma once

// FMCW radar configuration and the dechirped point-target simulator.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "radpose/tensor.hpp"

namespace radpose {

inline constexpr double kSpeedOfLight = 299792458.0;

struct RadarConfig {
    std::size_t n_adc = 256;
    std::size_t n_chirps = 64;
    std::size_t n_az_rx = 8;
    std::size_t n_el_rx = 2;
    double freq_slope = 60.012e12;  // Hz/s (60.012 MHz/us)
    double sample_rate = 4.4e6;
    double chirp_duration = 72e-6;
    double fps = 10.0;
    double carrier_wavelength = kSpeedOfLight / 77e9;
    double antenna_spacing = kSpeedOfLight / 77e9 / 2.0;
    double range_resolution = 0.048;
    double max_range = 11.0;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0) || !std::isfinite(v)) throw Error(std::string("RadarConfig: ") + name + " must be positive");
        };
        positive(freq_slope, "freq_slope");
        positive(sample_rate, "sample_rate");
        positive(chirp_duration, "chirp_duration");
        positive(fps, "fps");
        positive(carrier_wavelength, "carrier_wavelength");
        positive(antenna_spacing, "antenna_spacing");
        positive(range_resolution, "range_resolution");
        positive(max_range, "max_range");
        if (n_adc == 0 || n_chirps == 0 || n_az_rx == 0 || n_el_rx == 0)
            throw Error("RadarConfig: antenna and sample counts must be positive");
        if (static_cast<double>(n_adc) / sample_rate > chirp_duration)
            throw Error("RadarConfig: ADC sampling window exceeds the chirp duration");
    }

    // Chirp slope that places a target at range r in FFT bin r / range_resolution.
    // The beat frequency model uses this rather than freq_slope; see README.
    double beat_slope() const {
        return kSpeedOfLight * sample_rate / (2.0 * static_cast<double>(n_adc) * range_resolution);
    }

    // Radial velocity spanned by one doppler bin.
    double doppler_bin_width() const {
        return carrier_wavelength / (2.0 * static_cast<double>(n_chirps) * chirp_duration);
    }

    Shape cube_shape() const { return {n_adc, n_chirps, n_az_rx, n_el_rx}; }
};

struct AdcCube {
    std::int64_t frame_index = 0;
    ComplexTensor data;  // (adc, chirp, azimuth antenna, elevation antenna)
};

struct Vec3 {
    double x = 0, y = 0, z = 0;  // x lateral (right), y boresight depth, z up

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
};

struct PointTarget {
    Vec3 position;  // meters, world frame
    Vec3 velocity;  // m/s
    double amplitude = 1.0;
};

// Which of the two co-located sensors.  The vertical one is rotated by 90
// degrees about the boresight, so its azimuth array resolves height.
enum class SensorOrientation { kHorizontal, kVertical };

struct SensorPose {
    Vec3 position{0.0, 0.0, 0.86};
};

struct ScatterScene {
    std::vector<PointTarget> targets;
    double duration = 0;
    std::string motion_script;
};

struct TargetGeometry {
    double range = 0;
    double radial_velocity = 0;  // positive toward the sensor
    double azimuth = 0;          // radians
    double elevation = 0;        // radians
};

inline TargetGeometry target_geometry(const PointTarget& t, const SensorPose& pose, SensorOrientation o) {
    const Vec3 p = t.position - pose.position;
    TargetGeometry g;
    g.range = p.norm();
    if (!(g.range > 0)) throw Error("target located at the sensor origin");
    g.radial_velocity = -p.dot(t.velocity) / g.range;
    if (o == SensorOrientation::kHorizontal) {
        g.azimuth = std::atan2(p.x, p.y);
        g.elevation = std::asin(p.z / g.range);
    } else {
        g.azimuth = std::atan2(p.z, p.y);
        g.elevation = std::asin(-p.x / g.range);
    }
    return g;
}

inline constexpr double kMaxAzimuthDeg = 60.0;
inline constexpr double kMaxElevationDeg = 15.0;

inline double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
inline double rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Throws naming the first target outside range or the field of view.
inline void check_scene(const RadarConfig& cfg, const std::vector<PointTarget>& targets, const SensorPose& pose,
                        SensorOrientation o) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const TargetGeometry g = target_geometry(targets[i], pose, o);
        const char* sensor = o == SensorOrientation::kHorizontal ? "horizontal" : "vertical";
        if (!(g.range < cfg.max_range))
            throw Error("target " + std::to_string(i) + " out of range (" + std::to_string(g.range) + " m)");
        if (std::abs(deg(g.azimuth)) > kMaxAzimuthDeg || std::abs(deg(g.elevation)) > kMaxElevationDeg)
            throw Error("target " + std::to_string(i) + " outside the " + sensor + " sensor field of view (az " +
                        std::to_string(deg(g.azimuth)) + " deg, el " + std::to_string(deg(g.elevation)) + " deg)");
        if (!(targets[i].amplitude > 0)) throw Error("target " + std::to_string(i) + " has non-positive amplitude");
    }
}

struct NoiseOptions {
    std::optional<double> snr_db = 20.0;  // nullopt = noiseless
    std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// e^{j 2 pi cycles}, reduced modulo one cycle first for accuracy.
inline std::complex<double> cis_cycles(double cycles) {
    const double frac = cycles - std::floor(cycles);
    return std::polar(1.0, 2.0 * std::numbers::pi * frac);
}

}  // namespace detail

// Counter-based seed for one (sequence seed, frame, sensor) triple so frames
// can be synthesized in any order.
inline std::uint64_t frame_seed(std::uint64_t base, std::int64_t frame, SensorOrientation o) {
    return detail::splitmix64(detail::splitmix64(base ^ 0x48755052ULL) + static_cast<std::uint64_t>(frame) * 2 +
                              (o == SensorOrientation::kVertical ? 1 : 0));
}

// Sum over targets of the first-order dechirped phase model
//   a exp(j 2 pi [ f_b n / f_s + (2 v / lambda) m T_c + (d / lambda) p sin(az) cos(el) + (d / lambda) q sin(el) ])
// with f_b = 2 S r / c, plus optional complex white Gaussian noise whose power
// is set against the strongest target's per-sample power.
inline AdcCube synthesize_frame(const RadarConfig& cfg, const std::vector<PointTarget>& targets,
                                std::int64_t frame_index, SensorOrientation orientation = SensorOrientation::kHorizontal,
                                const SensorPose& pose = {}, const NoiseOptions& noise = {.snr_db = std::nullopt}) {
    cfg.validate();
    check_scene(cfg, targets, pose, orientation);
    AdcCube cube;
    cube.frame_index = frame_index;
    cube.data = ComplexTensor(cfg.cube_shape());
    const std::size_t na = cfg.n_adc, nc = cfg.n_chirps, nz = cfg.n_az_rx, ne = cfg.n_el_rx;
    const std::size_t nant = nz * ne;
    auto out = cube.data.data();
    std::vector<std::complex<double>> adc(na), chirp(nc), ant(nant);
    const double slope = cfg.beat_slope();
    const double d_over_l = cfg.antenna_spacing / cfg.carrier_wavelength;
    double peak_amp = 0;
    for (const auto& t : targets) {
        const TargetGeometry g = target_geometry(t, pose, orientation);
        peak_amp = std::max(peak_amp, t.amplitude);
        const double beat = 2.0 * slope * g.range / kSpeedOfLight / cfg.sample_rate;  // cycles per sample
        const double dop = 2.0 * g.radial_velocity / cfg.carrier_wavelength * cfg.chirp_duration;  // cycles per chirp
        const double az = d_over_l * std::sin(g.azimuth) * std::cos(g.elevation);
        const double el = d_over_l * std::sin(g.elevation);
        for (std::size_t n = 0; n < na; ++n) adc[n] = t.amplitude * detail::cis_cycles(beat * static_cast<double>(n));
        for (std::size_t m = 0; m < nc; ++m) chirp[m] = detail::cis_cycles(dop * static_cast<double>(m));
        for (std::size_t p = 0; p < nz; ++p)
            for (std::size_t q = 0; q < ne; ++q)
                ant[p * ne + q] = detail::cis_cycles(az * static_cast<double>(p) + el * static_cast<double>(q));
        for (std::size_t n = 0; n < na; ++n)
            for (std::size_t m = 0; m < nc; ++m) {
                const std::complex<double> s = adc[n] * chirp[m];
                std::complex<double>* dst = out.data() + (n * nc + m) * nant;
                for (std::size_t k = 0; k < nant; ++k) dst[k] += s * ant[k];
            }
    }
    if (noise.snr_db && std::isfinite(*noise.snr_db) && peak_amp > 0) {
        const double noise_power = peak_amp * peak_amp / std::pow(10.0, *noise.snr_db / 10.0);
        const double sd = std::sqrt(noise_power / 2.0);
        std::mt19937_64 rng(frame_seed(noise.seed, frame_index, orientation));
        std::normal_distribution<double> nd(0.0, sd);
        for (auto& v : out) v += std::complex<double>(nd(rng), nd(rng));
    }
    return cube;
}

inline AdcCube synthesize_frame(const RadarConfig& cfg, const ScatterScene& scene, std::int64_t frame_index,
                                SensorOrientation orientation = SensorOrientation::kHorizontal,
                                const SensorPose& pose = {}, const NoiseOptions& noise = {.snr_db = std::nullopt}) {
    return synthesize_frame(cfg, scene.targets, frame_index, orientation, pose, noise);
}

}  // namespace radpose
