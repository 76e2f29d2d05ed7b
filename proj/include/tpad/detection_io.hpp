#pragma once

// Reading and writing the detections interchange format:
//
//   {"frame_id": str, "image_width": int, "image_height": int,
//    "detector_name": str,
//    "faces":   [{"x": n, "y": n, "width": n, "height": n, "confidence": n}, ...],
//    "persons": [ same shape ]}
//
// A file holds either one such document or a JSON-lines stream of them.
// Unknown keys are ignored; a missing required key is a ParseError that names
// the key and the frame.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tpad/detection.hpp"
#include "tpad/error.hpp"

namespace tpad {

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& frame_id) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError("missing required key '" + std::string(key) + "' in frame '" +
                         frame_id + "'");
    return *it;
}

inline double require_number(const nlohmann::json& obj, const char* key,
                             const std::string& frame_id) {
    const auto& v = require(obj, key, frame_id);
    if (!v.is_number())
        throw ParseError("key '" + std::string(key) + "' in frame '" + frame_id +
                         "' must be a number");
    return v.get<double>();
}

inline int require_dimension(const nlohmann::json& obj, const char* key,
                             const std::string& frame_id) {
    const double v = require_number(obj, key, frame_id);
    if (v != std::floor(v) || v < 1 || v > 1e9)
        throw ParseError("key '" + std::string(key) + "' in frame '" + frame_id +
                         "' must be a positive integer");
    return static_cast<int>(v);
}

inline std::vector<Detection> parse_detection_list(const nlohmann::json& obj, const char* key,
                                                   DetectionKind kind,
                                                   const std::string& frame_id) {
    const auto& arr = require(obj, key, frame_id);
    if (!arr.is_array())
        throw ParseError("key '" + std::string(key) + "' in frame '" + frame_id +
                         "' must be an array");
    std::vector<Detection> out;
    out.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_object())
            throw ParseError("entries of '" + std::string(key) + "' in frame '" + frame_id +
                             "' must be objects");
        Detection d;
        d.kind = kind;
        d.box.x = require_number(item, "x", frame_id);
        d.box.y = require_number(item, "y", frame_id);
        d.box.width = require_number(item, "width", frame_id);
        d.box.height = require_number(item, "height", frame_id);
        d.confidence = require_number(item, "confidence", frame_id);
        out.push_back(d);
    }
    return out;
}

// Integral values are written without a fractional part so that pixel boxes
// stay readable ("y": 40 rather than "y": 40.0).
inline nlohmann::ordered_json number_value(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15)
        return static_cast<std::int64_t>(v);
    return v;
}

inline nlohmann::ordered_json detection_list_json(const std::vector<Detection>& list) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& d : list) {
        nlohmann::ordered_json o;
        o["x"] = number_value(d.box.x);
        o["y"] = number_value(d.box.y);
        o["width"] = number_value(d.box.width);
        o["height"] = number_value(d.box.height);
        o["confidence"] = number_value(d.confidence);
        arr.push_back(std::move(o));
    }
    return arr;
}

}  // namespace detail

/// Builds a frame from one parsed JSON object, without clamping.
inline FrameDetections frame_from_json(const nlohmann::json& obj) {
    if (!obj.is_object()) throw ParseError("detections document must be a JSON object");
    std::string frame_id = "<unknown>";
    if (auto it = obj.find("frame_id"); it != obj.end() && it->is_string())
        frame_id = it->get<std::string>();

    const auto& id = detail::require(obj, "frame_id", frame_id);
    if (!id.is_string()) throw ParseError("key 'frame_id' must be a string");

    FrameDetections f;
    f.frame_id = frame_id;
    f.image_width = detail::require_dimension(obj, "image_width", frame_id);
    f.image_height = detail::require_dimension(obj, "image_height", frame_id);
    const auto& name = detail::require(obj, "detector_name", frame_id);
    if (!name.is_string())
        throw ParseError("key 'detector_name' in frame '" + frame_id + "' must be a string");
    f.detector_name = name.get<std::string>();
    f.faces = detail::parse_detection_list(obj, "faces", DetectionKind::face, frame_id);
    f.persons = detail::parse_detection_list(obj, "persons", DetectionKind::person, frame_id);
    return f;
}

inline nlohmann::ordered_json frame_to_json(const FrameDetections& f) {
    nlohmann::ordered_json o;
    o["frame_id"] = f.frame_id;
    o["image_width"] = f.image_width;
    o["image_height"] = f.image_height;
    o["detector_name"] = f.detector_name;
    o["faces"] = detail::detection_list_json(f.faces);
    o["persons"] = detail::detection_list_json(f.persons);
    return o;
}

/// Compact single-line serialization, without trailing newline.
inline std::string serialize_frame(const FrameDetections& f) { return frame_to_json(f).dump(); }

/// Parses a single JSON document or a JSON-lines stream. Every frame is passed
/// through sanitize_frame(); clamping warnings go to `warnings` if non-null.
inline std::vector<FrameDetections> parse_detections(const std::string& text,
                                                     std::vector<std::string>* warnings = nullptr) {
    std::vector<FrameDetections> frames;

    auto whole = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (!whole.is_discarded()) {
        frames.push_back(sanitize_frame(frame_from_json(whole), warnings));
        return frames;
    }

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("invalid JSON on line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            frames.push_back(sanitize_frame(frame_from_json(obj), warnings));
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (frames.empty()) throw ParseError("no detections documents found");
    return frames;
}

inline std::vector<FrameDetections> read_detections_file(const std::filesystem::path& path,
                                                         std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open detections file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_detections(buf.str(), warnings);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

/// Writes one frame per line (a single-frame file is therefore also valid
/// single-document JSON).
inline void write_detections_file(const std::filesystem::path& path,
                                  const std::vector<FrameDetections>& frames) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write detections file " + path.string());
    for (const auto& f : frames) out << serialize_frame(f) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tpad
