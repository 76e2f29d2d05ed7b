#pragma once

// PAD and vulnerability metrics in the ISO/IEC 30107-3 vocabulary.
//
// Score conventions:
//   * PAD scores are attack-positive: a sample is classified as an attack
//     when score >= threshold.
//   * Comparison (verification) scores are similarity-positive: a comparison
//     is accepted when score >= threshold.
// All rates are fractions in [0, 1]; percentage formatting is left to the
// presentation layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tpad/error.hpp"
#include "tpad/format.hpp"

namespace tpad {

enum class Truth { bona_fide, attack };

inline std::string_view to_string(Truth t) noexcept {
    return t == Truth::attack ? "attack" : "bona_fide";
}

inline Truth parse_truth(std::string_view s) {
    if (s == "bona_fide") return Truth::bona_fide;
    if (s == "attack") return Truth::attack;
    throw ParseError("invalid truth value '" + std::string(s) +
                     "' (expected bona_fide or attack)");
}

struct ScoredSample {
    std::string sample_id;
    Truth truth = Truth::bona_fide;
    double score = 0.0;

    friend bool operator==(const ScoredSample&, const ScoredSample&) = default;
};

struct DetPoint {
    double threshold = 0.0;
    double apcer = 0.0;
    double bpcer = 0.0;
};

struct DetReport {
    std::vector<DetPoint> points;  // strictly increasing thresholds
    double deer = 0.0;
    double deer_threshold = 0.0;
};

namespace detail {

inline void require_non_empty(std::span<const double> s, const char* what) {
    if (s.empty()) throw Error(std::string(what) + ": empty score list");
}

inline std::size_t count_below(std::span<const double> s, double threshold) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [&](double v) { return v < threshold; }));
}

}  // namespace detail

/// Fraction of attack presentations classified as bona fide (score < threshold).
inline double apcer(std::span<const double> attack_scores, double threshold) {
    detail::require_non_empty(attack_scores, "apcer");
    return static_cast<double>(detail::count_below(attack_scores, threshold)) /
           static_cast<double>(attack_scores.size());
}

/// Fraction of bona fide presentations classified as attacks (score >= threshold).
inline double bpcer(std::span<const double> bona_fide_scores, double threshold) {
    detail::require_non_empty(bona_fide_scores, "bpcer");
    const auto below = detail::count_below(bona_fide_scores, threshold);
    return static_cast<double>(bona_fide_scores.size() - below) /
           static_cast<double>(bona_fide_scores.size());
}

/// Impostor attack presentation accept rate: fraction of attack comparison
/// scores at or above the verification threshold.
inline double iapar(std::span<const double> comparison_scores, double verification_threshold) {
    detail::require_non_empty(comparison_scores, "iapar");
    const auto below = detail::count_below(comparison_scores, verification_threshold);
    return static_cast<double>(comparison_scores.size() - below) /
           static_cast<double>(comparison_scores.size());
}

/// False non-match rate: fraction of mated comparison scores below the threshold.
inline double fnmr(std::span<const double> mated_scores, double verification_threshold) {
    detail::require_non_empty(mated_scores, "fnmr");
    return static_cast<double>(detail::count_below(mated_scores, verification_threshold)) /
           static_cast<double>(mated_scores.size());
}

/// Sweeps the decision threshold over a sentinel below the lowest score, the
/// midpoint of every pair of adjacent distinct scores, and a sentinel above the
/// highest score.
///
/// The D-EER is taken at the threshold minimizing |APCER - BPCER| (lowest such
/// threshold on ties) and reported as (APCER + BPCER) / 2 there, which is the
/// common value whenever an exact crossing exists. The comparison is done on
/// integer counts so that exact crossings are found exactly.
inline DetReport det_curve(std::span<const double> bona_fide_scores,
                           std::span<const double> attack_scores) {
    if (bona_fide_scores.empty())
        throw ParseError("det_curve: no bona_fide samples (both classes are required)");
    if (attack_scores.empty())
        throw ParseError("det_curve: no attack samples (both classes are required)");

    std::vector<double> bona(bona_fide_scores.begin(), bona_fide_scores.end());
    std::vector<double> attack(attack_scores.begin(), attack_scores.end());
    for (double v : bona)
        if (!std::isfinite(v)) throw ParseError("det_curve: non-finite bona_fide score");
    for (double v : attack)
        if (!std::isfinite(v)) throw ParseError("det_curve: non-finite attack score");
    std::sort(bona.begin(), bona.end());
    std::sort(attack.begin(), attack.end());

    std::vector<double> distinct;
    distinct.reserve(bona.size() + attack.size());
    std::merge(bona.begin(), bona.end(), attack.begin(), attack.end(),
               std::back_inserter(distinct));
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<double> thresholds;
    thresholds.reserve(distinct.size() + 1);
    const double lo = distinct.front();
    double below = lo - 1.0;
    if (!(below < lo)) below = std::nextafter(lo, -std::numeric_limits<double>::infinity());
    thresholds.push_back(below);
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
        // Any t in (a, b] induces the same split under the >= rule.
        double mid = distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0;
        if (!(mid > distinct[i])) mid = distinct[i + 1];
        thresholds.push_back(mid);
    }
    const double hi = distinct.back();
    double above = hi + 1.0;
    if (!(above > hi)) above = std::nextafter(hi, std::numeric_limits<double>::infinity());
    thresholds.push_back(above);

    const auto n_bona = static_cast<std::int64_t>(bona.size());
    const auto n_attack = static_cast<std::int64_t>(attack.size());

    DetReport report;
    report.points.reserve(thresholds.size());
    std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
    for (double t : thresholds) {
        const auto attack_below = static_cast<std::int64_t>(
            std::lower_bound(attack.begin(), attack.end(), t) - attack.begin());
        const auto bona_at_or_above = n_bona - static_cast<std::int64_t>(
            std::lower_bound(bona.begin(), bona.end(), t) - bona.begin());
        const double a = static_cast<double>(attack_below) / static_cast<double>(n_attack);
        const double b = static_cast<double>(bona_at_or_above) / static_cast<double>(n_bona);
        report.points.push_back({t, a, b});

        // |a - b| scaled by n_attack * n_bona, exact in integers.
        const std::int64_t gap = std::abs(attack_below * n_bona - bona_at_or_above * n_attack);
        if (gap < best_gap) {
            best_gap = gap;
            report.deer = (a + b) / 2.0;
            report.deer_threshold = t;
        }
    }
    return report;
}

inline DetReport det_curve(std::span<const ScoredSample> samples) {
    std::vector<double> bona, attack;
    for (const auto& s : samples) (s.truth == Truth::attack ? attack : bona).push_back(s.score);
    return det_curve(bona, attack);
}

/// `threshold,apcer,bpcer` with one row per sweep point.
inline void write_det_csv(std::ostream& out, const DetReport& report) {
    out << "threshold,apcer,bpcer\n";
    for (const auto& p : report.points)
        out << format_number(p.threshold) << ',' << format_number(p.apcer) << ','
            << format_number(p.bpcer) << '\n';
}

inline nlohmann::ordered_json det_summary_json(const DetReport& report) {
    nlohmann::ordered_json j;
    j["deer"] = report.deer;
    j["deer_threshold"] = report.deer_threshold;
    return j;
}

}  // namespace tpad
