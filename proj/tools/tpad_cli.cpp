// tpad: spatial-consistency PAD for T-shirt face presentation attacks.
//
//   tpad score    FILE           score detections (JSON or JSON lines)
//   tpad evaluate MANIFEST --out DIR
//   tpad synth    --out DIR      synthetic dataset + manifest
//   tpad det      SCORES_CSV     DET sweep over a scores file
//
// Exit codes: 0 ok, 1 I/O failure, 2 input parse error, 3 invalid flags,
// 4 missing input files. Errors are reported as JSON on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tpad/tpad.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum ExitCode : int { kOk = 0, kIo = 1, kParse = 2, kFlags = 3, kMissing = 4 };

int report_error(int code, const std::string& kind, const std::string& message) {
    ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
    return code;
}

void require_exists(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw tpad::MissingFilesError({p.string()});
}

struct CommonFlags {
    double threshold = tpad::kDefaultThreshold;
    double min_relative_area = tpad::FilterPolicy{}.min_relative_area;
    double min_side = tpad::FilterPolicy{}.min_side;
    std::string abstain_policy = "attack";
    bool strict_multiplicity = false;

    void add_to(CLI::App* app) {
        app->add_option("--threshold", threshold, "PAD decision threshold in [-1, 1]")
            ->capture_default_str();
        app->add_option("--min-relative-area", min_relative_area,
                        "Drop faces smaller than this fraction of the image area")
            ->capture_default_str();
        app->add_option("--min-side", min_side, "Drop faces with a side shorter than this (px)")
            ->capture_default_str();
        app->add_option("--abstain-policy", abstain_policy,
                        "Decision when no face or no person is found")
            ->check(CLI::IsMember({"attack", "abstain"}))
            ->capture_default_str();
        app->add_flag("--strict-multiplicity", strict_multiplicity,
                      "Label frames with more than one face as attacks");
    }

    tpad::EvalOptions options() const {
        tpad::EvalOptions o;
        o.filter = {min_relative_area, min_side};
        o.classify.threshold = threshold;
        o.classify.abstain_policy = abstain_policy == "abstain"
                                        ? tpad::AbstainPolicy::abstain_is_abstain
                                        : tpad::AbstainPolicy::abstain_is_attack;
        o.classify.strict_multiplicity = strict_multiplicity;
        o.validate();
        return o;
    }
};

ordered_json decision_json(const tpad::FrameDetections& frame, const tpad::PadDecision& d) {
    ordered_json j;
    if (d.score.has_value())
        j["score"] = d.score.value();
    else
        j["score"] = nullptr;
    j["label"] = tpad::to_string(d.label);
    j["abstain_reason"] =
        d.score.abstained() ? ordered_json(tpad::to_string(d.score.reason())) : ordered_json(nullptr);
    j["threshold"] = d.threshold;
    j["frame_id"] = frame.frame_id;
    j["flags"]["face_count"] = d.flags.face_count;
    j["flags"]["person_count"] = d.flags.person_count;
    j["flags"]["multiple_faces"] = d.flags.multiple_faces;
    j["flags"]["multiple_persons"] = d.flags.multiple_persons;
    return j;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) {
        ordered_json j;
        j["warning"] = w;
        std::cerr << j.dump() << '\n';
    }
}

int cmd_score(const fs::path& input, const CommonFlags& flags) {
    const auto opt = flags.options();
    require_exists(input);
    std::vector<std::string> warnings;
    const auto frames = tpad::read_detections_file(input, &warnings);
    print_warnings(warnings);
    for (const auto& raw : frames) {
        const auto frame = tpad::filter_small_detections(raw, opt.filter);
        std::cout << decision_json(frame, tpad::classify(frame, opt.classify)).dump() << '\n';
    }
    return kOk;
}

int cmd_evaluate(const fs::path& manifest, const fs::path& out_dir, unsigned jobs,
                 const CommonFlags& flags) {
    auto opt = flags.options();
    opt.jobs = jobs;
    require_exists(manifest);
    const auto result = tpad::run_evaluation(tpad::load_manifest(manifest), opt);
    print_warnings(result.warnings);
    tpad::write_evaluation_outputs(result, opt, out_dir);

    ordered_json j;
    j["deer"] = result.det.deer;
    j["deer_threshold"] = result.det.deer_threshold;
    j["samples"] = result.outcomes.size();
    j["scored"] = result.samples.size();
    j["abstained_as_attack"] = result.abstained_as_attack;
    j["abstained_excluded"] = result.abstained_excluded;
    j["misclassified"] = result.misclassified;
    std::cout << j.dump() << '\n';
    return kOk;
}

int cmd_det(const fs::path& scores_path, const fs::path& out_dir) {
    require_exists(scores_path);
    std::ifstream in(scores_path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto samples = tpad::parse_scores_csv(buf.str());
    const auto report = tpad::det_curve(samples);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw tpad::IoError("cannot create output directory " + out_dir.string());
    std::ofstream csv(out_dir / "det.csv", std::ios::binary | std::ios::trunc);
    std::ofstream summary(out_dir / "det_summary.json", std::ios::binary | std::ios::trunc);
    if (!csv || !summary) throw tpad::IoError("cannot write to " + out_dir.string());
    tpad::write_det_csv(csv, report);
    const auto j = tpad::det_summary_json(report);
    summary << j.dump(2) << '\n';
    std::cout << j.dump() << '\n';
    return kOk;
}

int cmd_synth(const tpad::SynthConfig& cfg, const fs::path& out_dir) {
    const auto records = tpad::generate_synthetic(cfg, out_dir);
    ordered_json j;
    j["manifest"] = (out_dir / "manifest.csv").string();
    j["samples"] = records.size();
    j["seed"] = cfg.seed;
    std::cout << j.dump() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial-consistency presentation attack detection toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;
    fs::path input;
    fs::path out_dir;
    unsigned jobs = 1;

    auto* score = app.add_subcommand("score", "Score one detections file (JSON or JSON lines)");
    score->add_option("detections", input, "Detections file")->required();
    flags.add_to(score);

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a manifest and write reports");
    evaluate->add_option("manifest", input, "Manifest CSV")->required();
    evaluate->add_option("--out", out_dir, "Output directory")->required();
    evaluate->add_option("--jobs", jobs, "Worker threads (0 = all cores)")->capture_default_str();
    flags.add_to(evaluate);

    tpad::SynthConfig synth_cfg;
    std::pair<double, double> bona_offset{synth_cfg.bona_fide_face_offset.lo,
                                          synth_cfg.bona_fide_face_offset.hi};
    std::pair<double, double> attack_offset{synth_cfg.attack_face_offset.lo,
                                            synth_cfg.attack_face_offset.hi};
    auto* synth = app.add_subcommand("synth", "Generate a synthetic detections dataset");
    synth->add_option("--out", out_dir, "Output directory")->required();
    synth->add_option("--seed", synth_cfg.seed, "Random seed")->capture_default_str();
    synth->add_option("--n-bona-fide", synth_cfg.n_bona_fide)->capture_default_str();
    synth->add_option("--n-attack", synth_cfg.n_attack)->capture_default_str();
    synth->add_option("--width", synth_cfg.image_width)->capture_default_str();
    synth->add_option("--height", synth_cfg.image_height)->capture_default_str();
    synth->add_option("--jitter", synth_cfg.jitter, "Positional noise (px)")->capture_default_str();
    synth->add_option("--real-face-prob", synth_cfg.real_face_visible_prob,
                      "Probability the attacker's real face is also detected")
        ->capture_default_str();
    synth->add_option("--bona-fide-offset", bona_offset, "Face offset range LO HI (fraction of H)");
    synth->add_option("--attack-offset", attack_offset, "Face offset range LO HI (fraction of H)");

    auto* det = app.add_subcommand("det", "DET sweep over a sample_id,truth,score file");
    det->add_option("scores", input, "Scores CSV")->required();
    det->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error(kFlags, "flags", e.what());
    }

    try {
        if (score->parsed()) return cmd_score(input, flags);
        if (evaluate->parsed()) return cmd_evaluate(input, out_dir, jobs, flags);
        if (det->parsed()) return cmd_det(input, out_dir);
        if (synth->parsed()) {
            synth_cfg.bona_fide_face_offset = {bona_offset.first, bona_offset.second};
            synth_cfg.attack_face_offset = {attack_offset.first, attack_offset.second};
            return cmd_synth(synth_cfg, out_dir);
        }
    } catch (const tpad::ConfigError& e) {
        return report_error(kFlags, "flags", e.what());
    } catch (const tpad::ParseError& e) {
        return report_error(kParse, "parse", e.what());
    } catch (const tpad::MissingFilesError& e) {
        return report_error(kMissing, "missing_files", e.what());
    } catch (const std::exception& e) {
        return report_error(kIo, "io", e.what());
    }
    return kOk;
}
