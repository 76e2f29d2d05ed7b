#pragma once

// Synthetic scene generator. Produces detector output (not images) for bona
// fide presentations, where the face sits at the top of the person box, and
// T-shirt attacks, where the detected face sits on the torso. Attack frames
// may additionally contain the attacker's real face at head level.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <system_error>
#include <vector>

#include "tpad/detection.hpp"
#include "tpad/detection_io.hpp"
#include "tpad/error.hpp"
#include "tpad/manifest.hpp"

namespace tpad {

/// Closed interval of fractions of image height.
struct OffsetRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct SynthConfig {
    int image_width = 1280;
    int image_height = 720;
    int n_bona_fide = 152;
    int n_attack = 1608;
    // Face top minus person top, as a fraction of image height.
    OffsetRange bona_fide_face_offset{0.00, 0.08};
    OffsetRange attack_face_offset{0.45, 0.60};
    double real_face_visible_prob = 0.5;
    int jitter = 8;  // pixels
    std::uint64_t seed = 1;
    int n_subjects = 19;
    int n_instruments = 24;
    std::string detector_name = "synthetic";

    void validate() const {
        auto in_unit = [](OffsetRange r) { return r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi; };
        if (image_width <= 0 || image_height <= 0)
            throw ConfigError("synthetic image dimensions must be positive");
        if (n_bona_fide < 0 || n_attack < 0)
            throw ConfigError("sample counts must be non-negative");
        if (!in_unit(bona_fide_face_offset) || !in_unit(attack_face_offset))
            throw ConfigError("face offset ranges must satisfy 0 <= lo <= hi <= 1");
        if (!(real_face_visible_prob >= 0.0 && real_face_visible_prob <= 1.0))
            throw ConfigError("real_face_visible_prob must lie in [0, 1]");
        if (jitter < 0) throw ConfigError("jitter must be non-negative");
        if (n_subjects <= 0 || n_instruments <= 0)
            throw ConfigError("n_subjects and n_instruments must be positive");
        const double max_offset = std::max(bona_fide_face_offset.hi, attack_face_offset.hi);
        if (std::ceil(max_offset * image_height) + kMinFaceHeight > image_height)
            throw ConfigError("face offsets leave no room for a face inside the image");
    }

    static constexpr int kMinFaceHeight = 20;
};

struct SyntheticDataset {
    std::vector<SampleRecord> records;
    std::vector<FrameDetections> frames;  // parallel to records
};

namespace detail {

// Portable draws on top of mt19937_64; the standard distributions are not
// specified bit-for-bit across library implementations.
class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }
    bool bernoulli(double p) { return unit() < p; }

private:
    std::mt19937_64 engine_;
};

inline std::string padded_id(const char* prefix, int index, int width) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, index);
    return buf;
}

}  // namespace detail

/// Generates the dataset in memory. Deterministic for a fixed config.
inline SyntheticDataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    detail::SynthRng rng(cfg.seed);
    const double W = cfg.image_width;
    const double H = cfg.image_height;
    const int max_offset_px = static_cast<int>(
        std::ceil(std::max(cfg.bona_fide_face_offset.hi, cfg.attack_face_offset.hi) * H));

    SyntheticDataset ds;
    ds.records.reserve(static_cast<std::size_t>(cfg.n_bona_fide + cfg.n_attack));
    ds.frames.reserve(ds.records.capacity());

    auto make_face = [&](double center_x, double top, int max_height) {
        double fh = std::round(0.18 * H * rng.uniform(0.85, 1.15));
        fh = std::clamp(fh, static_cast<double>(SynthConfig::kMinFaceHeight),
                        static_cast<double>(max_height));
        const double fw = std::round(fh * rng.uniform(0.75, 0.85));
        double fx = std::round(center_x - fw / 2.0) + rng.uniform_int(-cfg.jitter, cfg.jitter);
        fx = std::clamp(fx, 0.0, std::max(0.0, W - fw));
        return Detection{{fx, top, fw, fh}, rng.uniform(0.90, 0.999), DetectionKind::face};
    };

    auto make_scene = [&](const std::string& id, Truth truth, Scenario scenario) {
        FrameDetections f;
        f.frame_id = id;
        f.image_width = cfg.image_width;
        f.image_height = cfg.image_height;
        f.detector_name = cfg.detector_name;

        // Whole-scene vertical placement: the person's top edge, including the
        // vertical jitter. Faces are placed relative to it.
        const int top_room = cfg.image_height - max_offset_px - SynthConfig::kMinFaceHeight;
        const int nominal_top = static_cast<int>(std::round(rng.uniform(0.02, 0.12) * H));
        const int person_top = std::clamp(nominal_top + rng.uniform_int(-cfg.jitter, cfg.jitter),
                                          0, std::max(0, top_room));

        const double pw = std::round(0.35 * W * rng.uniform(0.85, 1.15));
        double px = std::round(W / 2.0 - pw / 2.0) + rng.uniform_int(-cfg.jitter, cfg.jitter);
        px = std::clamp(px, 0.0, std::max(0.0, W - pw));
        f.persons.push_back({{px, static_cast<double>(person_top), pw, H - person_top},
                             rng.uniform(0.80, 0.99), DetectionKind::person});
        const double center_x = px + pw / 2.0;

        auto head_face = [&] {
            const double off = rng.uniform(cfg.bona_fide_face_offset.lo, cfg.bona_fide_face_offset.hi);
            const int top = person_top + static_cast<int>(std::floor(off * H));
            return make_face(center_x, top, cfg.image_height - top);
        };

        if (truth == Truth::bona_fide) {
            f.faces.push_back(head_face());
        } else {
            const double off = rng.uniform(cfg.attack_face_offset.lo, cfg.attack_face_offset.hi);
            const int top = person_top + static_cast<int>(std::ceil(off * H));
            f.faces.push_back(make_face(center_x, top, cfg.image_height - top));
            const bool real_visible = rng.bernoulli(cfg.real_face_visible_prob);
            if (real_visible && scenario != Scenario::covered) f.faces.push_back(head_face());
        }
        return f;
    };

    for (int i = 0; i < cfg.n_bona_fide; ++i) {
        SampleRecord r;
        r.sample_id = detail::padded_id("bf_", i, 6);
        r.truth = Truth::bona_fide;
        r.scenario = kAllScenarios[static_cast<std::size_t>(i) % kAllScenarios.size()];
        r.subject_id = detail::padded_id("subject_", i % cfg.n_subjects, 2);
        r.detections_path = std::filesystem::path("detections") / (r.sample_id + ".json");
        ds.frames.push_back(make_scene(r.sample_id, r.truth, r.scenario));
        ds.records.push_back(std::move(r));
    }
    for (int i = 0; i < cfg.n_attack; ++i) {
        SampleRecord r;
        r.sample_id = detail::padded_id("pa_", i, 6);
        r.truth = Truth::attack;
        r.scenario = kAllScenarios[static_cast<std::size_t>(i) % kAllScenarios.size()];
        r.subject_id = detail::padded_id("attacker_", (i / 8) % cfg.n_subjects, 2);
        r.instrument_id = detail::padded_id("tshirt_", (i / 8) % cfg.n_instruments, 3);
        r.detections_path = std::filesystem::path("detections") / (r.sample_id + ".json");
        ds.frames.push_back(make_scene(r.sample_id, r.truth, r.scenario));
        ds.records.push_back(std::move(r));
    }
    return ds;
}

/// Writes `<out_dir>/manifest.csv` and one detections file per sample under
/// `<out_dir>/detections/`. Record paths in the returned copy are absolute
/// within `out_dir`.
inline std::vector<SampleRecord> write_synthetic(const SyntheticDataset& ds,
                                                 const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "detections", ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    std::vector<SampleRecord> records = ds.records;
    for (std::size_t i = 0; i < records.size(); ++i) {
        write_detections_file(out_dir / records[i].detections_path, {ds.frames[i]});
    }
    write_manifest(out_dir / "manifest.csv", records);
    for (auto& r : records) r.detections_path = (out_dir / r.detections_path).lexically_normal();
    return records;
}

inline std::vector<SampleRecord> generate_synthetic(const SynthConfig& cfg,
                                                    const std::filesystem::path& out_dir) {
    return write_synthetic(generate_synthetic(cfg), out_dir);
}

}  // namespace tpad
