#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tpad/error.hpp"
#include "tpad/format.hpp"
#include "tpad/metrics.hpp"

namespace tpad {

/// The eight capture scenarios, in reporting order.
enum class Scenario { normal, covered, left, right, stretch, mask, down, up };

inline constexpr std::array<Scenario, 8> kAllScenarios = {
    Scenario::normal,  Scenario::covered, Scenario::left, Scenario::right,
    Scenario::stretch, Scenario::mask,    Scenario::down, Scenario::up};

inline std::string_view to_string(Scenario s) noexcept {
    switch (s) {
        case Scenario::normal: return "normal";
        case Scenario::covered: return "covered";
        case Scenario::left: return "left";
        case Scenario::right: return "right";
        case Scenario::stretch: return "stretch";
        case Scenario::mask: return "mask";
        case Scenario::down: return "down";
        case Scenario::up: return "up";
    }
    return "unknown";
}

inline std::optional<Scenario> parse_scenario(std::string_view s) noexcept {
    for (auto sc : kAllScenarios)
        if (to_string(sc) == s) return sc;
    return std::nullopt;
}

struct SampleRecord {
    std::string sample_id;
    Truth truth = Truth::bona_fide;
    Scenario scenario = Scenario::normal;
    std::string subject_id;
    std::optional<std::string> instrument_id;  // T-shirt id, attacks only
    std::filesystem::path detections_path;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline constexpr std::string_view kManifestHeader =
    "sample_id,truth,scenario,subject_id,instrument_id,detections_path";

/// Parses manifest CSV text. Relative detections paths are resolved against
/// `base_dir`.
inline std::vector<SampleRecord> parse_manifest(const std::string& text,
                                                const std::filesystem::path& base_dir = {}) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> fields;
    std::size_t line_no = 0;

    auto fail = [&](const std::string& msg) -> ParseError {
        return ParseError("manifest line " + std::to_string(line_no) + ": " + msg);
    };

    if (!std::getline(in, line)) throw ParseError("manifest is empty (header required)");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader)
        throw fail("header must be exactly '" + std::string(kManifestHeader) + "'");

    std::vector<SampleRecord> records;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!split_csv_line(line, fields)) throw fail("unterminated quoted field");
        if (fields.size() != 6)
            throw fail("expected 6 fields, got " + std::to_string(fields.size()));

        SampleRecord r;
        r.sample_id = fields[0];
        if (r.sample_id.empty()) throw fail("field 'sample_id' is empty");
        try {
            r.truth = parse_truth(fields[1]);
        } catch (const ParseError& e) {
            throw fail(std::string("field 'truth': ") + e.what());
        }
        auto sc = parse_scenario(fields[2]);
        if (!sc) throw fail("field 'scenario': unknown scenario '" + fields[2] + "'");
        r.scenario = *sc;
        r.subject_id = fields[3];
        if (r.subject_id.empty()) throw fail("field 'subject_id' is empty");
        if (!fields[4].empty()) r.instrument_id = fields[4];
        if (r.truth == Truth::attack && !r.instrument_id)
            throw fail("field 'instrument_id' is required for attack samples");
        if (r.truth == Truth::bona_fide && r.instrument_id)
            throw fail("field 'instrument_id' must be empty for bona_fide samples");
        if (fields[5].empty()) throw fail("field 'detections_path' is empty");
        std::filesystem::path p(fields[5]);
        r.detections_path = p.is_relative() && !base_dir.empty()
                                ? (base_dir / p).lexically_normal()
                                : p.lexically_normal();
        if (!seen.insert(r.sample_id).second)
            throw fail("duplicate sample_id '" + r.sample_id + "'");
        records.push_back(std::move(r));
    }
    return records;
}

inline std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_manifest(buf.str(), path.parent_path());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

/// Writes records with detections paths made relative to `base_dir` where possible.
inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<SampleRecord>& records,
                           const std::filesystem::path& base_dir = {}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << kManifestHeader << '\n';
    for (const auto& r : records) {
        std::filesystem::path p = r.detections_path;
        if (!base_dir.empty() && p.is_absolute() == base_dir.is_absolute()) {
            auto rel = p.lexically_relative(base_dir);
            if (!rel.empty()) p = rel;
        }
        out << csv_field(r.sample_id) << ',' << to_string(r.truth) << ','
            << to_string(r.scenario) << ',' << csv_field(r.subject_id) << ','
            << csv_field(r.instrument_id.value_or("")) << ',' << csv_field(p.generic_string())
            << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tpad
