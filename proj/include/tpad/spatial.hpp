#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "tpad/detection.hpp"
#include "tpad/error.hpp"

namespace tpad {

enum class AbstainReason { no_face, no_person, no_face_and_no_person };

inline std::string_view to_string(AbstainReason r) noexcept {
    switch (r) {
        case AbstainReason::no_face: return "no_face";
        case AbstainReason::no_person: return "no_person";
        case AbstainReason::no_face_and_no_person: return "no_face_and_no_person";
    }
    return "unknown";
}

/// Outcome of the spatial consistency check: a normalized vertical offset
/// between the lowest face and the topmost person, or an abstention when one
/// of the detection lists is empty.
class SpatialScore {
public:
    static SpatialScore of(double value) { return SpatialScore(value); }
    static SpatialScore abstain(AbstainReason reason) { return SpatialScore(reason); }

    bool has_value() const noexcept { return !reason_.has_value(); }
    bool abstained() const noexcept { return reason_.has_value(); }

    double value() const {
        if (reason_) throw Error("SpatialScore::value() called on an abstention");
        return value_;
    }
    AbstainReason reason() const {
        if (!reason_) throw Error("SpatialScore::reason() called on a scored outcome");
        return *reason_;
    }

    friend bool operator==(const SpatialScore&, const SpatialScore&) = default;

private:
    explicit SpatialScore(double v) : value_(v) {}
    explicit SpatialScore(AbstainReason r) : reason_(r) {}

    double value_ = 0.0;
    std::optional<AbstainReason> reason_;
};

struct MultiplicityFlags {
    std::size_t face_count = 0;
    std::size_t person_count = 0;
    bool multiple_faces = false;
    bool multiple_persons = false;

    friend bool operator==(const MultiplicityFlags&, const MultiplicityFlags&) = default;
};

enum class PadLabel { attack, bona_fide, abstain };

inline std::string_view to_string(PadLabel l) noexcept {
    switch (l) {
        case PadLabel::attack: return "attack";
        case PadLabel::bona_fide: return "bona_fide";
        case PadLabel::abstain: return "abstain";
    }
    return "unknown";
}

/// How an abstention (no face or no person found) is turned into a decision.
enum class AbstainPolicy { abstain_is_attack, abstain_is_abstain };

inline constexpr double kDefaultThreshold = 0.35;

struct PadDecision {
    PadLabel label = PadLabel::abstain;
    SpatialScore score = SpatialScore::abstain(AbstainReason::no_face_and_no_person);
    double threshold = kDefaultThreshold;
    MultiplicityFlags flags;
};

struct ClassifyOptions {
    double threshold = kDefaultThreshold;
    AbstainPolicy abstain_policy = AbstainPolicy::abstain_is_attack;
    // Label frames with more than one face as attacks regardless of score.
    bool strict_multiplicity = false;

    void validate() const {
        if (!(threshold >= -1.0 && threshold <= 1.0))
            throw ConfigError("threshold must lie in [-1, 1], got " + std::to_string(threshold));
    }
};

/// Spatial consistency score of a frame.
///
/// Takes the top edge of the face lying lowest in the image and the top edge
/// of the person lying highest, and returns their difference divided by the
/// image height. A face printed on a T-shirt sits well below the top of the
/// wearer's person box, giving a large positive score; a real face sits at the
/// top of it, giving a score near zero.
///
/// Operates on whatever detections it is given; small-face filtering is the
/// caller's job.
inline SpatialScore spatial_consistency_score(const FrameDetections& frame) {
    const bool no_face = frame.faces.empty();
    const bool no_person = frame.persons.empty();
    if (no_face && no_person) return SpatialScore::abstain(AbstainReason::no_face_and_no_person);
    if (no_face) return SpatialScore::abstain(AbstainReason::no_face);
    if (no_person) return SpatialScore::abstain(AbstainReason::no_person);

    auto by_y = [](const Detection& a, const Detection& b) { return a.box.y < b.box.y; };
    const double lowest_face_y =
        std::max_element(frame.faces.begin(), frame.faces.end(), by_y)->box.y;
    const double top_person_y =
        std::min_element(frame.persons.begin(), frame.persons.end(), by_y)->box.y;

    // Subtract before dividing: exact for integer pixel coordinates, which
    // keeps the score invariant under joint shifts and rescaling.
    return SpatialScore::of((lowest_face_y - top_person_y) / frame.image_height);
}

inline MultiplicityFlags multiplicity_flags(const FrameDetections& frame) {
    MultiplicityFlags f;
    f.face_count = frame.faces.size();
    f.person_count = frame.persons.size();
    f.multiple_faces = f.face_count > 1;
    f.multiple_persons = f.person_count > 1;
    return f;
}

/// Binary PAD decision: attack iff score >= threshold.
inline PadDecision classify(const FrameDetections& frame, const ClassifyOptions& options = {}) {
    options.validate();
    PadDecision d;
    d.threshold = options.threshold;
    d.score = spatial_consistency_score(frame);
    d.flags = multiplicity_flags(frame);

    if (d.score.abstained()) {
        d.label = options.abstain_policy == AbstainPolicy::abstain_is_attack ? PadLabel::attack
                                                                             : PadLabel::abstain;
    } else {
        d.label = d.score.value() >= options.threshold ? PadLabel::attack : PadLabel::bona_fide;
    }
    if (options.strict_multiplicity && d.flags.multiple_faces) d.label = PadLabel::attack;
    return d;
}

inline PadDecision classify(const FrameDetections& frame, double threshold,
                            AbstainPolicy policy) {
    return classify(frame, ClassifyOptions{threshold, policy, false});
}

}  // namespace tpad
