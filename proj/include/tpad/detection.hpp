#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpad/error.hpp"

namespace tpad {

/// Axis-aligned box in pixel coordinates. Origin is the image's top-left
/// corner and y grows downward, so a larger y means lower in the image.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double width = 0.0;
    double height = 0.0;

    double area() const noexcept { return width * height; }
    double right() const noexcept { return x + width; }
    double bottom() const noexcept { return y + height; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class DetectionKind { face, person };

inline std::string_view to_string(DetectionKind kind) noexcept {
    return kind == DetectionKind::face ? "face" : "person";
}

/// A single detector hit. `confidence` is the raw detector output; it is
/// only guaranteed to lie in [0, 1] after min-max normalization.
struct Detection {
    BoundingBox box;
    double confidence = 0.0;
    DetectionKind kind = DetectionKind::face;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Everything the face and person detectors reported for one image.
struct FrameDetections {
    std::string frame_id;
    int image_width = 0;
    int image_height = 0;
    std::string detector_name;
    std::vector<Detection> faces;
    std::vector<Detection> persons;

    friend bool operator==(const FrameDetections&, const FrameDetections&) = default;
};

/// Thresholds for discarding implausibly small face detections.
struct FilterPolicy {
    double min_relative_area = 0.0005;  // fraction of image area
    double min_side = 10.0;             // pixels

    void validate() const {
        if (!(min_relative_area >= 0.0 && min_relative_area < 1.0))
            throw ConfigError("min_relative_area must lie in [0, 1), got " +
                              std::to_string(min_relative_area));
        if (!(min_side >= 0.0) || !std::isfinite(min_side))
            throw ConfigError("min_side must be a finite value >= 0, got " +
                              std::to_string(min_side));
    }
};

/// Clamps every box to [0, W] x [0, H] and drops boxes whose clamped area is
/// not positive. One human-readable warning per modified or dropped box is
/// appended to `warnings` when it is non-null.
/// Throws ParseError on non-positive image dimensions or non-finite values.
inline FrameDetections sanitize_frame(FrameDetections frame,
                                      std::vector<std::string>* warnings = nullptr) {
    if (frame.image_width <= 0 || frame.image_height <= 0)
        throw ParseError("frame '" + frame.frame_id + "': image dimensions must be positive");

    const double w = frame.image_width;
    const double h = frame.image_height;
    auto clean = [&](std::vector<Detection>& list, DetectionKind kind) {
        std::vector<Detection> kept;
        kept.reserve(list.size());
        for (std::size_t i = 0; i < list.size(); ++i) {
            Detection d = list[i];
            const auto& b = d.box;
            if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.width) ||
                !std::isfinite(b.height) || !std::isfinite(d.confidence))
                throw ParseError("frame '" + frame.frame_id + "': non-finite value in " +
                                 std::string(to_string(kind)) + " detection " +
                                 std::to_string(i));
            d.kind = kind;
            const std::string where = "frame '" + frame.frame_id + "': " +
                                      std::string(to_string(kind)) + " " + std::to_string(i);
            if (b.width > 0.0 && b.height > 0.0 && b.x >= 0.0 && b.y >= 0.0 &&
                b.x + b.width <= w && b.y + b.height <= h) {
                // Already inside: keep the original values bit for bit.
                kept.push_back(d);
                continue;
            }
            const double x0 = std::clamp(b.x, 0.0, w);
            const double y0 = std::clamp(b.y, 0.0, h);
            const double x1 = std::clamp(b.x + b.width, 0.0, w);
            const double y1 = std::clamp(b.y + b.height, 0.0, h);
            BoundingBox clamped{x0, y0, x1 - x0, y1 - y0};
            if (clamped.width <= 0.0 || clamped.height <= 0.0) {
                if (warnings) warnings->push_back(where + " dropped (empty after clamping)");
                continue;
            }
            if (clamped != b) {
                if (warnings) warnings->push_back(where + " clamped to image bounds");
                d.box = clamped;
            }
            kept.push_back(d);
        }
        list = std::move(kept);
    };
    clean(frame.faces, DetectionKind::face);
    clean(frame.persons, DetectionKind::person);
    return frame;
}

/// Returns a copy of `frame` without face detections that are too small under
/// `policy`. Person detections are never filtered.
inline FrameDetections filter_small_detections(const FrameDetections& frame,
                                               const FilterPolicy& policy) {
    FrameDetections out = frame;
    const double min_area = policy.min_relative_area *
                            (static_cast<double>(frame.image_width) * frame.image_height);
    std::erase_if(out.faces, [&](const Detection& d) {
        return d.box.area() < min_area ||
               std::min(d.box.width, d.box.height) < policy.min_side;
    });
    return out;
}

/// Maps each value v to (v - min) / (max - min). A constant input maps to all
/// zeros. Throws ParseError if any value is non-finite.
inline std::vector<double> minmax_normalize_confidences(std::span<const double> confidences) {
    if (confidences.empty()) return {};
    for (double v : confidences)
        if (!std::isfinite(v))
            throw ParseError("non-finite detector confidence (corrupt detector output)");

    const auto [lo, hi] = std::minmax_element(confidences.begin(), confidences.end());
    // Extended precision keeps the subtractions exact for values of similar
    // magnitude, so the division is the only rounding step.
    const long double min = *lo;
    const long double range = static_cast<long double>(*hi) - min;
    std::vector<double> out(confidences.size(), 0.0);
    if (range > 0.0L) {
        for (std::size_t i = 0; i < confidences.size(); ++i)
            out[i] = static_cast<double>((confidences[i] - min) / range);
    }
    return out;
}

struct DetectionOutcome {
    std::string frame_id;
    bool detected = false;
};

/// Fraction of presentations in which the target was detected.
inline double detection_success_rate(std::span<const DetectionOutcome> records) {
    if (records.empty()) throw Error("detection_success_rate: no records");
    const auto hits = std::count_if(records.begin(), records.end(),
                                    [](const DetectionOutcome& r) { return r.detected; });
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

inline double average_confidence(std::span<const double> confidences) {
    if (confidences.empty()) throw Error("average_confidence: empty list");
    double sum = 0.0;
    for (double c : confidences) sum += c;
    return sum / static_cast<double>(confidences.size());
}

}  // namespace tpad
