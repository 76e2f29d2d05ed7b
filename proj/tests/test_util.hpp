#pragma once

// Test-only helpers: random frame generators and reference implementations
// that deliberately avoid the library's code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "tpad/detection.hpp"
#include "tpad/metrics.hpp"

namespace tpad::test {

/// Temporary directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "tpad_test_XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) std::abort();
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline Detection face(double x, double y, double w, double h, double conf = 0.9) {
    return {{x, y, w, h}, conf, DetectionKind::face};
}

inline Detection person(double x, double y, double w, double h, double conf = 0.9) {
    return {{x, y, w, h}, conf, DetectionKind::person};
}

inline FrameDetections make_frame(int width, int height, std::vector<Detection> faces,
                                  std::vector<Detection> persons, std::string id = "frame") {
    FrameDetections f;
    f.frame_id = std::move(id);
    f.image_width = width;
    f.image_height = height;
    f.detector_name = "test";
    f.faces = std::move(faces);
    f.persons = std::move(persons);
    return f;
}

/// Random frame with boxes inside the image. With `integral` set every
/// coordinate is a whole pixel. Lists may be empty.
inline FrameDetections random_frame(std::mt19937_64& rng, bool integral, int max_boxes = 5) {
    std::uniform_int_distribution<int> dim(16, 2000);
    std::uniform_int_distribution<int> count(0, max_boxes);
    FrameDetections f;
    f.frame_id = "fuzz";
    f.detector_name = "fuzz";
    f.image_width = dim(rng);
    f.image_height = dim(rng);
    auto coord = [&](double limit) {
        std::uniform_real_distribution<double> u(0.0, limit);
        double v = u(rng);
        return integral ? std::floor(v) : v;
    };
    auto box = [&](DetectionKind kind) {
        const double x = coord(f.image_width - 1);
        const double y = coord(f.image_height - 1);
        double w = std::max(1.0, coord(f.image_width - x));
        double h = std::max(1.0, coord(f.image_height - y));
        while (x + w > f.image_width) w = std::nextafter(w, 0.0);
        while (y + h > f.image_height) h = std::nextafter(h, 0.0);
        std::uniform_real_distribution<double> c(0.0, 1.0);
        return Detection{{x, y, w, h}, c(rng), kind};
    };
    const int nf = count(rng), np = count(rng);
    for (int i = 0; i < nf; ++i) f.faces.push_back(box(DetectionKind::face));
    for (int i = 0; i < np; ++i) f.persons.push_back(box(DetectionKind::person));
    return f;
}

/// Reference spatial score: explicit scans, no sorting, two divisions.
inline std::optional<double> brute_force_score(const FrameDetections& f) {
    if (f.faces.empty() || f.persons.empty()) return std::nullopt;
    double lowest_face = -std::numeric_limits<double>::infinity();
    for (const auto& d : f.faces)
        if (d.box.y > lowest_face) lowest_face = d.box.y;
    double top_person = std::numeric_limits<double>::infinity();
    for (const auto& d : f.persons)
        if (d.box.y < top_person) top_person = d.box.y;
    return lowest_face / f.image_height - top_person / f.image_height;
}

struct OracleEer {
    double deer = 0.0;
    double threshold = 0.0;
};

/// Exhaustive EER: evaluates 2n+1 candidate thresholds (one sentinel below the
/// minimum, every score, every midpoint between consecutive sorted scores, one
/// sentinel above the maximum) by direct counting. Picks the smallest
/// |APCER - BPCER| (compared exactly on counts), lowest threshold on ties, and
/// reports the mean of the two rates there.
inline OracleEer exhaustive_eer(const std::vector<double>& bona, const std::vector<double>& attack) {
    std::vector<double> all = bona;
    all.insert(all.end(), attack.begin(), attack.end());
    std::sort(all.begin(), all.end());
    std::vector<double> candidates;
    candidates.push_back(all.front() - 1.0);
    for (std::size_t i = 0; i < all.size(); ++i) {
        candidates.push_back(all[i]);
        if (i + 1 < all.size()) candidates.push_back((all[i] + all[i + 1]) / 2.0);
    }
    candidates.push_back(all.back() + 1.0);
    std::sort(candidates.begin(), candidates.end());

    const long long nb = static_cast<long long>(bona.size());
    const long long na = static_cast<long long>(attack.size());
    long long best = std::numeric_limits<long long>::max();
    OracleEer out;
    for (double t : candidates) {
        long long miss = 0, false_alarm = 0;
        for (double s : attack)
            if (s < t) ++miss;
        for (double s : bona)
            if (s >= t) ++false_alarm;
        const long long gap = std::llabs(miss * nb - false_alarm * na);
        if (gap < best) {
            best = gap;
            out.deer = (static_cast<double>(miss) / static_cast<double>(na) +
                        static_cast<double>(false_alarm) / static_cast<double>(nb)) /
                       2.0;
            out.threshold = t;
        }
    }
    return out;
}

}  // namespace tpad::test
