#pragma once

// Manifest-driven evaluation: load detections for every sample, filter small
// faces, score with the spatial consistency check, then aggregate into a DET
// report and per-scenario detection statistics.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tpad/detection.hpp"
#include "tpad/detection_io.hpp"
#include "tpad/error.hpp"
#include "tpad/format.hpp"
#include "tpad/manifest.hpp"
#include "tpad/metrics.hpp"
#include "tpad/spatial.hpp"

namespace tpad {

/// DET score given to abstentions that the policy maps to attack.
inline constexpr double kAbstainAttackScore = 1.0;

struct EvalOptions {
    FilterPolicy filter;
    ClassifyOptions classify;
    unsigned jobs = 1;  // 0 = one per hardware thread

    void validate() const {
        filter.validate();
        classify.validate();
    }
};

struct ScenarioRow {
    Truth truth = Truth::bona_fide;
    double success_rate = 0.0;    // fraction of samples with >= 1 face after filtering
    double avg_confidence = 0.0;  // mean normalized confidence of those faces
    std::size_t sample_count = 0;
};

struct ScenarioReport {
    Scenario scenario = Scenario::normal;
    std::vector<ScenarioRow> rows;  // bona_fide first, then attack; only non-empty classes
};

struct SampleOutcome {
    std::string sample_id;
    Truth truth = Truth::bona_fide;
    Scenario scenario = Scenario::normal;
    PadDecision decision;
    bool in_det = true;  // false for abstentions excluded under abstain_is_abstain
};

struct EvaluationResult {
    std::vector<SampleOutcome> outcomes;  // sorted by sample_id
    std::vector<ScoredSample> samples;    // DET input, sorted by sample_id
    DetReport det;
    std::vector<ScenarioReport> scenarios;
    std::size_t abstained_as_attack = 0;
    std::size_t abstained_excluded = 0;
    std::size_t misclassified = 0;  // decided label disagrees with truth
    std::vector<std::string> warnings;
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception by
// index is rethrown, so failures are reported identically for any job count.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&](unsigned w) {
        for (std::size_t i = w; i < n; i += jobs) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs <= 1) {
        worker(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline FrameDetections select_frame(std::vector<FrameDetections> frames,
                                    const SampleRecord& record) {
    if (frames.size() == 1) return std::move(frames.front());
    for (auto& f : frames)
        if (f.frame_id == record.sample_id) return std::move(f);
    throw ParseError(record.detections_path.string() + ": holds " +
                     std::to_string(frames.size()) + " frames and none has frame_id '" +
                     record.sample_id + "'");
}

}  // namespace detail

/// Evaluates every record. Output ordering is by sample_id, independent of the
/// input order and of `options.jobs`.
inline EvaluationResult run_evaluation(std::vector<SampleRecord> records,
                                       const EvalOptions& options) {
    options.validate();
    if (records.empty()) throw ParseError("no samples to evaluate");
    std::sort(records.begin(), records.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].sample_id == records[i - 1].sample_id)
            throw ParseError("duplicate sample_id '" + records[i].sample_id + "'");

    for (Truth t : {Truth::bona_fide, Truth::attack}) {
        if (std::none_of(records.begin(), records.end(),
                         [&](const SampleRecord& r) { return r.truth == t; }))
            throw ParseError("no " + std::string(to_string(t)) +
                             " samples: both classes are required for evaluation");
    }

    std::vector<std::string> missing;
    for (const auto& r : records)
        if (!std::filesystem::is_regular_file(r.detections_path))
            missing.push_back(r.detections_path.string());
    if (!missing.empty()) throw MissingFilesError(std::move(missing));

    const std::size_t n = records.size();
    std::vector<FrameDetections> frames(n);
    std::vector<std::vector<std::string>> frame_warnings(n);
    std::vector<PadDecision> decisions(n);
    detail::parallel_for(n, options.jobs, [&](std::size_t i) {
        auto loaded = read_detections_file(records[i].detections_path, &frame_warnings[i]);
        frames[i] = filter_small_detections(detail::select_frame(std::move(loaded), records[i]),
                                            options.filter);
        decisions[i] = classify(frames[i], options.classify);
    });

    EvaluationResult result;
    for (auto& w : frame_warnings)
        result.warnings.insert(result.warnings.end(), w.begin(), w.end());

    // Min-max normalization per detector over the whole evaluated set.
    std::map<std::string, std::vector<double>> raw_by_detector;
    for (const auto& f : frames)
        for (const auto& d : f.faces) raw_by_detector[f.detector_name].push_back(d.confidence);
    std::map<std::string, std::vector<double>> norm_by_detector;
    for (const auto& [name, raw] : raw_by_detector)
        norm_by_detector[name] = minmax_normalize_confidences(raw);

    // Per-sample normalized confidences, consumed in the same order as collected.
    std::map<std::string, std::size_t> cursor;
    std::vector<std::vector<double>> sample_conf(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& pos = cursor[frames[i].detector_name];
        const auto& norm = norm_by_detector[frames[i].detector_name];
        for (std::size_t k = 0; k < frames[i].faces.size(); ++k) sample_conf[i].push_back(norm[pos++]);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = records[i];
        SampleOutcome o{r.sample_id, r.truth, r.scenario, decisions[i], true};
        const auto& d = o.decision;
        if (d.score.has_value()) {
            result.samples.push_back({r.sample_id, r.truth, d.score.value()});
        } else if (options.classify.abstain_policy == AbstainPolicy::abstain_is_attack) {
            result.samples.push_back({r.sample_id, r.truth, kAbstainAttackScore});
            ++result.abstained_as_attack;
        } else {
            o.in_det = false;
            ++result.abstained_excluded;
        }
        if (d.label != PadLabel::abstain) {
            const bool says_attack = d.label == PadLabel::attack;
            if (says_attack != (r.truth == Truth::attack)) ++result.misclassified;
        }
        result.outcomes.push_back(std::move(o));
    }

    result.det = det_curve(result.samples);

    for (Scenario sc : kAllScenarios) {
        ScenarioReport rep{sc, {}};
        for (Truth t : {Truth::bona_fide, Truth::attack}) {
            std::vector<DetectionOutcome> hits;
            std::vector<double> conf;
            for (std::size_t i = 0; i < n; ++i) {
                if (records[i].scenario != sc || records[i].truth != t) continue;
                hits.push_back({records[i].sample_id, !frames[i].faces.empty()});
                conf.insert(conf.end(), sample_conf[i].begin(), sample_conf[i].end());
            }
            if (hits.empty()) continue;
            ScenarioRow row;
            row.truth = t;
            row.sample_count = hits.size();
            row.success_rate = detection_success_rate(hits);
            row.avg_confidence = conf.empty() ? 0.0 : average_confidence(conf);
            rep.rows.push_back(row);
        }
        if (!rep.rows.empty()) result.scenarios.push_back(std::move(rep));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Score distribution

struct ScoreHistogram {
    static constexpr int kBins = 40;  // 0.05 wide over [-1, 1]
    std::array<double, kBins + 1> edges{};
    std::array<std::size_t, kBins> bona_fide{};
    std::array<std::size_t, kBins> attack{};

    ScoreHistogram() {
        for (int i = 0; i <= kBins; ++i) edges[static_cast<std::size_t>(i)] = (i - kBins / 2) / 20.0;
    }

    /// Bin of a score; bins are [edge_i, edge_i+1) except the last, which also
    /// holds 1.0. Out-of-range scores land in the outermost bins.
    std::size_t bin_of(double score) const {
        if (!(score >= edges.front())) return 0;
        if (score >= edges.back()) return kBins - 1;
        auto idx = static_cast<long>(std::floor((score + 1.0) * 20.0));
        idx = std::clamp(idx, 0L, static_cast<long>(kBins - 1));
        while (idx > 0 && score < edges[static_cast<std::size_t>(idx)]) --idx;
        while (idx < kBins - 1 && score >= edges[static_cast<std::size_t>(idx) + 1]) ++idx;
        return static_cast<std::size_t>(idx);
    }
};

inline ScoreHistogram score_histogram(const std::vector<ScoredSample>& samples) {
    ScoreHistogram h;
    for (const auto& s : samples) {
        auto& counts = s.truth == Truth::attack ? h.attack : h.bona_fide;
        ++counts[h.bin_of(s.score)];
    }
    return h;
}

inline nlohmann::ordered_json histogram_json(const ScoreHistogram& h) {
    nlohmann::ordered_json j;
    j["bin_width"] = 0.05;
    j["bin_edges"] = h.edges;
    j["counts"]["bona_fide"] = h.bona_fide;
    j["counts"]["attack"] = h.attack;
    return j;
}

inline void write_scores_csv(std::ostream& out, const std::vector<ScoredSample>& samples) {
    out << "sample_id,truth,score\n";
    for (const auto& s : samples)
        out << csv_field(s.sample_id) << ',' << to_string(s.truth) << ',' << format_number(s.score)
            << '\n';
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

/// Writes `sample_id,truth,score` rows to `csv_path` and the 0.05-bin
/// histogram to `histogram_path`.
inline void export_score_distribution(const std::vector<ScoredSample>& samples,
                                      const std::filesystem::path& csv_path,
                                      const std::filesystem::path& histogram_path) {
    if (samples.empty()) throw Error("export_score_distribution: no samples");
    std::ostringstream csv;
    write_scores_csv(csv, samples);
    detail::write_text_file(csv_path, csv.str());
    detail::write_text_file(histogram_path, histogram_json(score_histogram(samples)).dump(2) + "\n");
}

/// Parses a `sample_id,truth,score` file as written by write_scores_csv().
inline std::vector<ScoredSample> parse_scores_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> fields;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        return ParseError("scores line " + std::to_string(line_no) + ": " + msg);
    };
    if (!std::getline(in, line)) throw ParseError("scores file is empty (header required)");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "sample_id,truth,score") throw fail("header must be exactly 'sample_id,truth,score'");

    std::vector<ScoredSample> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!split_csv_line(line, fields) || fields.size() != 3)
            throw fail("expected 3 fields");
        ScoredSample s;
        s.sample_id = fields[0];
        try {
            s.truth = parse_truth(fields[1]);
        } catch (const ParseError& e) {
            throw fail(e.what());
        }
        const auto& f = fields[2];
        auto res = std::from_chars(f.data(), f.data() + f.size(), s.score);
        if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(s.score))
            throw fail("invalid score '" + f + "'");
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reporting

/// Plain-text table in scenario order, one line per (scenario, class).
inline std::string render_scenario_table(const std::vector<ScenarioReport>& reports) {
    if (reports.empty()) throw Error("render_scenario_table: no reports");
    std::vector<ScenarioReport> sorted = reports;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return static_cast<int>(a.scenario) < static_cast<int>(b.scenario);
    });

    auto pad = [](std::string s, std::size_t width, bool right) {
        if (s.size() >= width) return s;
        return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
    };
    std::ostringstream out;
    out << pad("Scenario", 10, false) << pad("Face type", 11, false) << pad("Success %", 10, true)
        << pad("Avg. score", 12, true) << pad("Samples", 9, true) << '\n';
    for (const auto& rep : sorted) {
        auto rows = rep.rows;
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return a.truth == Truth::bona_fide && b.truth == Truth::attack;
        });
        for (const auto& row : rows) {
            out << pad(std::string(to_string(rep.scenario)), 10, false)
                << pad(std::string(to_string(row.truth)), 11, false)
                << pad(format_percent(row.success_rate), 10, true)
                << pad(format_fixed(row.avg_confidence, 2), 12, true)
                << pad(std::to_string(row.sample_count), 9, true) << '\n';
        }
    }
    return out.str();
}

inline std::string_view to_string(AbstainPolicy p) noexcept {
    return p == AbstainPolicy::abstain_is_attack ? "attack" : "abstain";
}

inline nlohmann::ordered_json summary_json(const EvaluationResult& r, const EvalOptions& opt) {
    nlohmann::ordered_json j;
    j["deer"] = r.det.deer;
    j["deer_threshold"] = r.det.deer_threshold;

    std::vector<double> bona, attack;
    for (const auto& s : r.samples) (s.truth == Truth::attack ? attack : bona).push_back(s.score);
    j["threshold"] = opt.classify.threshold;
    j["apcer_at_threshold"] = apcer(attack, opt.classify.threshold);
    j["bpcer_at_threshold"] = bpcer(bona, opt.classify.threshold);

    std::size_t n_bona = 0, n_attack = 0;
    for (const auto& o : r.outcomes) (o.truth == Truth::attack ? n_attack : n_bona)++;
    j["counts"]["bona_fide"] = n_bona;
    j["counts"]["attack"] = n_attack;
    j["counts"]["scored"] = r.samples.size();
    j["counts"]["abstained_as_attack"] = r.abstained_as_attack;
    j["counts"]["abstained_excluded"] = r.abstained_excluded;
    j["counts"]["misclassified"] = r.misclassified;

    auto scenarios = nlohmann::ordered_json::array();
    for (const auto& rep : r.scenarios) {
        for (const auto& row : rep.rows) {
            nlohmann::ordered_json s;
            s["scenario"] = to_string(rep.scenario);
            s["truth"] = to_string(row.truth);
            s["success_rate"] = row.success_rate;
            s["avg_confidence"] = row.avg_confidence;
            s["sample_count"] = row.sample_count;
            scenarios.push_back(std::move(s));
        }
    }
    j["scenarios"] = std::move(scenarios);

    auto& cfg = j["config"];
    cfg["threshold"] = opt.classify.threshold;
    cfg["abstain_policy"] = to_string(opt.classify.abstain_policy);
    cfg["strict_multiplicity"] = opt.classify.strict_multiplicity;
    cfg["min_relative_area"] = opt.filter.min_relative_area;
    cfg["min_side"] = opt.filter.min_side;
    return j;
}

/// Writes scores.csv, histogram.json, det.csv, summary.json and table.txt.
inline void write_evaluation_outputs(const EvaluationResult& r, const EvalOptions& opt,
                                     const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    export_score_distribution(r.samples, out_dir / "scores.csv", out_dir / "histogram.json");
    std::ostringstream det;
    write_det_csv(det, r.det);
    detail::write_text_file(out_dir / "det.csv", det.str());
    detail::write_text_file(out_dir / "summary.json", summary_json(r, opt).dump(2) + "\n");
    detail::write_text_file(out_dir / "table.txt", render_scenario_table(r.scenarios));
}

}  // namespace tpad
