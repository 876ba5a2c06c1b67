#pragma once

// Binary formats (.adc cubes, .rmap maps) and the per-sequence gt.json file.
// All binary integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "radpose/preproc.hpp"
#include "radpose/radar.hpp"
#include "radpose/skeleton.hpp"

namespace radpose {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class FormatError : public Error {
   public:
    using Error::Error;
};

class IoError : public Error {
   public:
    using Error::Error;
};

enum class ScalarTag : std::uint32_t { kF32 = 0, kF64 = 1 };

namespace io {

class Writer {
   public:
    template <class T>
    void put(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void str(std::string_view s) {
        put(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    const std::vector<char>& buffer() const { return buf_; }

   private:
    std::vector<char> buf_;
};

class Reader {
   public:
    Reader(std::vector<char> buf, std::string what) : buf_(std::move(buf)), what_(std::move(what)) {}

    template <class T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void bytes(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::string str() {
        const auto n = get<std::uint32_t>();
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    void expect_magic(std::string_view magic) {
        if (buf_.size() < magic.size() || std::memcmp(buf_.data(), magic.data(), magic.size()) != 0)
            throw FormatError(what_ + ": bad magic");
        pos_ = magic.size();
    }
    void expect_end() const {
        if (pos_ != buf_.size()) throw FormatError(what_ + ": trailing bytes after payload");
    }
    const std::string& what() const { return what_; }

   private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) throw FormatError(what_ + ": truncated file");
    }
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    std::string what_;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<char>& data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::vector<char>(text.begin(), text.end()));
}

inline std::size_t scalar_size(ScalarTag tag) {
    switch (tag) {
        case ScalarTag::kF32: return 4;
        case ScalarTag::kF64: return 8;
    }
    throw FormatError("unknown scalar type tag " + std::to_string(static_cast<std::uint32_t>(tag)));
}

inline void put_scalars(Writer& w, std::span<const double> v, ScalarTag tag) {
    if (tag == ScalarTag::kF64) {
        w.bytes(v.data(), v.size() * sizeof(double));
    } else {
        for (double x : v) w.put(static_cast<float>(x));
    }
}

inline void get_scalars(Reader& r, std::span<double> out, ScalarTag tag) {
    if (tag == ScalarTag::kF64) {
        r.bytes(out.data(), out.size() * sizeof(double));
    } else {
        for (double& x : out) x = static_cast<double>(r.get<float>());
    }
}

inline ScalarTag read_tag(Reader& r) {
    const auto raw = r.get<std::uint32_t>();
    if (raw > 1) throw FormatError(r.what() + ": unknown scalar type tag " + std::to_string(raw));
    return static_cast<ScalarTag>(raw);
}

}  // namespace io

// ---------------------------------------------------------------------------
// .adc

inline constexpr std::uint32_t kAdcVersion = 1;

inline std::vector<char> encode_cube(const AdcCube& cube, ScalarTag tag = ScalarTag::kF64) {
    if (cube.data.rank() != 4) throw ShapeError("encode_cube: cube must be rank 4");
    io::Writer w;
    w.bytes("RDPSADC1", 8);
    w.put(kAdcVersion);
    for (std::size_t i = 0; i < 4; ++i) w.put(static_cast<std::uint32_t>(cube.data.dim(i)));
    w.put(static_cast<std::uint32_t>(tag));
    const auto d = cube.data.data();
    io::put_scalars(w, {reinterpret_cast<const double*>(d.data()), d.size() * 2}, tag);
    return w.buffer();
}

// The frame index is not stored in the file; callers recover it from the path.
inline AdcCube decode_cube(std::vector<char> bytes, const std::string& what = "adc cube") {
    io::Reader r(std::move(bytes), what);
    r.expect_magic("RDPSADC1");
    const auto version = r.get<std::uint32_t>();
    if (version != kAdcVersion)
        throw FormatError(what + ": version mismatch (file " + std::to_string(version) + ", expected " +
                          std::to_string(kAdcVersion) + ")");
    Shape shape(4);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    const ScalarTag tag = io::read_tag(r);
    const std::size_t n = numel_of(shape);
    if (r.remaining() != n * 2 * io::scalar_size(tag))
        throw FormatError(what + ": payload length " + std::to_string(r.remaining()) +
                          " bytes does not match header dims " + shape_str(shape));
    AdcCube cube;
    cube.data = ComplexTensor(shape);
    auto d = cube.data.data();
    io::get_scalars(r, {reinterpret_cast<double*>(d.data()), n * 2}, tag);
    return cube;
}

inline void write_cube(const std::filesystem::path& path, const AdcCube& cube, ScalarTag tag = ScalarTag::kF64) {
    io::write_file(path, encode_cube(cube, tag));
}

inline AdcCube read_cube(const std::filesystem::path& path) {
    return decode_cube(io::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// .rmap

inline constexpr std::uint32_t kMapVersion = 1;

inline std::size_t map_rank(MapKind k) {
    return k == MapKind::kRA ? 4 : k == MapKind::kHeatmap ? 3 : 5;
}

inline std::vector<char> encode_map(const RadarMap& m, ScalarTag tag = ScalarTag::kF32) {
    const std::size_t rank = map_rank(m.kind);
    if (m.data.rank() != rank) throw ShapeError("encode_map: rank does not match map kind");
    io::Writer w;
    w.bytes("RDPSMAP1", 8);
    w.put(kMapVersion);
    w.put(static_cast<std::uint8_t>(m.kind));
    for (std::size_t i = 0; i < 5; ++i) w.put(static_cast<std::uint32_t>(i < rank ? m.data.dim(i) : 1));
    w.put(static_cast<std::uint32_t>(tag));
    io::put_scalars(w, m.data.data(), tag);
    return w.buffer();
}

inline RadarMap decode_map(std::vector<char> bytes, const std::string& what = "radar map") {
    io::Reader r(std::move(bytes), what);
    r.expect_magic("RDPSMAP1");
    const auto version = r.get<std::uint32_t>();
    if (version != kMapVersion) throw FormatError(what + ": version mismatch (file " + std::to_string(version) + ")");
    const auto kind = r.get<std::uint8_t>();
    if (kind > 3) throw FormatError(what + ": unknown map kind " + std::to_string(kind));
    RadarMap m;
    m.kind = static_cast<MapKind>(kind);
    Shape shape(5);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    for (std::size_t i = map_rank(m.kind); i < 5; ++i)
        if (shape[i] != 1) throw FormatError(what + ": unused trailing dims must be 1");
    shape.resize(map_rank(m.kind));
    const ScalarTag tag = io::read_tag(r);
    if (r.remaining() != numel_of(shape) * io::scalar_size(tag))
        throw FormatError(what + ": payload length does not match header dims " + shape_str(shape));
    m.data = Tensor<double>(shape);
    io::get_scalars(r, m.data.data(), tag);
    return m;
}

inline void write_map(const std::filesystem::path& path, const RadarMap& m, ScalarTag tag = ScalarTag::kF32) {
    io::write_file(path, encode_map(m, tag));
}

inline RadarMap read_map(const std::filesystem::path& path) { return decode_map(io::read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Sequence directories:
//   seq_<id>/frame_<n>_h.adc, seq_<id>/frame_<n>_v.adc   horizontal / vertical sensor
//   seq_<id>/gt.json                                    keypoints per frame

inline std::string sequence_dir_name(std::size_t id) { return "seq_" + std::to_string(id); }

inline std::string frame_file_name(std::size_t frame, SensorOrientation o, std::string_view ext = ".adc") {
    return "frame_" + std::to_string(frame) + (o == SensorOrientation::kHorizontal ? "_h" : "_v") + std::string(ext);
}

struct SequenceInfo {
    std::string script;
    double fps = 10.0;
    nlohmann::json params = nlohmann::json::object();
    std::vector<Skeleton2D> ground_truth;
};

inline nlohmann::json gt_to_json(const SequenceInfo& info) {
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t f = 0; f < info.ground_truth.size(); ++f) {
        nlohmann::json kps = nlohmann::json::array();
        const auto& sk = info.ground_truth[f];
        for (std::size_t k = 0; k < kNumKeypoints; ++k) kps.push_back({sk.coords[k].x, sk.coords[k].y, sk.visible[k] ? 1 : 0});
        frames.push_back({{"frame", f}, {"keypoints", kps}});
    }
    return {{"script", info.script}, {"fps", info.fps}, {"params", info.params}, {"frames", frames}};
}

inline SequenceInfo gt_from_json(const nlohmann::json& j, const std::string& what = "gt.json") {
    SequenceInfo info;
    try {
        info.script = j.at("script").get<std::string>();
        info.fps = j.at("fps").get<double>();
        if (j.contains("params")) info.params = j.at("params");
        const auto& frames = j.at("frames");
        info.ground_truth.resize(frames.size());
        for (const auto& fr : frames) {
            const auto f = fr.at("frame").get<std::size_t>();
            if (f >= frames.size()) throw FormatError(what + ": frame index " + std::to_string(f) + " out of range");
            const auto& kps = fr.at("keypoints");
            if (kps.size() != kNumKeypoints)
                throw FormatError(what + ": frame " + std::to_string(f) + " has " + std::to_string(kps.size()) +
                                  " keypoints, expected 14");
            for (std::size_t k = 0; k < kNumKeypoints; ++k) {
                const auto& kp = kps.at(k);
                info.ground_truth[f].coords[k] = {kp.at(0).get<double>(), kp.at(1).get<double>()};
                info.ground_truth[f].visible[k] = kp.size() < 3 || kp.at(2).get<int>() != 0;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(what + ": " + e.what());
    }
    return info;
}

inline void write_gt(const std::filesystem::path& path, const SequenceInfo& info) {
    io::write_text(path, gt_to_json(info).dump(1));
}

inline SequenceInfo read_gt(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return gt_from_json(j, path.string());
}

}  // namespace radpose
