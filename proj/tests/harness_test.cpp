#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "tpad/detection_io.hpp"
#include "tpad/harness.hpp"
#include "tpad/synth.hpp"

namespace tpad {
namespace {

using test::face;
using test::make_frame;
using test::person;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class HarnessTest : public ::testing::Test {
protected:
    SampleRecord add(const std::string& id, Truth truth, Scenario sc, const FrameDetections& frame) {
        SampleRecord r;
        r.sample_id = id;
        r.truth = truth;
        r.scenario = sc;
        r.subject_id = "subj";
        if (truth == Truth::attack) r.instrument_id = "shirt";
        r.detections_path = dir_.path() / (id + ".json");
        auto f = frame;
        f.frame_id = id;
        write_detections_file(r.detections_path, {f});
        return r;
    }

    // Three bona fide frames with the face at the top of the person box and
    // three attacks with the face on the torso. Scores by hand (H = 720):
    //   bona fide: (52-40)/720, (70-60)/720, (45-45)/720  -> <= 0.0167
    //   attack:    (400-40)/720 = 0.5, (330-42)/720 = 0.4, (500-50)/720 = 0.625
    std::vector<SampleRecord> hand_built() {
        return {
            add("b1", Truth::bona_fide, Scenario::normal, make_frame(1280, 720, {face(600, 52, 110, 130, 0.95)}, {person(420, 40, 450, 680)})),
            add("b2", Truth::bona_fide, Scenario::left, make_frame(1280, 720, {face(600, 70, 110, 130, 0.90)}, {person(420, 60, 450, 660)})),
            add("b3", Truth::bona_fide, Scenario::normal, make_frame(1280, 720, {face(600, 45, 110, 130, 0.85)}, {person(420, 45, 450, 670)})),
            add("a1", Truth::attack, Scenario::normal, make_frame(1280, 720, {face(600, 400, 110, 130, 0.99)}, {person(420, 40, 450, 680)})),
            add("a2", Truth::attack, Scenario::covered, make_frame(1280, 720, {face(600, 330, 110, 130, 0.97)}, {person(420, 42, 450, 678)})),
            add("a3", Truth::attack, Scenario::left, make_frame(1280, 720, {face(600, 500, 110, 130, 0.93), face(610, 55, 100, 120, 0.88)}, {person(420, 50, 450, 670)})),
        };
    }

    test::TempDir dir_;
};

TEST_F(HarnessTest, HandBuiltFramesSeparatePerfectly) {
    const auto res = run_evaluation(hand_built(), EvalOptions{});
    EXPECT_EQ(res.det.deer, 0.0);
    EXPECT_EQ(res.misclassified, 0u);
    ASSERT_EQ(res.samples.size(), 6u);

    const std::map<std::string, double> expected{
        {"a1", 360.0 / 720}, {"a2", 288.0 / 720}, {"a3", 450.0 / 720},
        {"b1", 12.0 / 720},  {"b2", 10.0 / 720},  {"b3", 0.0}};
    for (const auto& s : res.samples) EXPECT_EQ(s.score, expected.at(s.sample_id)) << s.sample_id;
    for (const auto& o : res.outcomes)
        EXPECT_EQ(o.decision.label, o.truth == Truth::attack ? PadLabel::attack : PadLabel::bona_fide);

    // sample_id order
    EXPECT_EQ(res.samples.front().sample_id, "a1");
    EXPECT_EQ(res.samples.back().sample_id, "b3");
}

TEST_F(HarnessTest, EmptyRecordsIsError) {
    EXPECT_THROW(run_evaluation({}, EvalOptions{}), ParseError);
}

TEST_F(HarnessTest, SingleClassNamesMissingClass) {
    auto recs = hand_built();
    std::erase_if(recs, [](const SampleRecord& r) { return r.truth == Truth::attack; });
    try {
        run_evaluation(recs, EvalOptions{});
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("attack"), std::string::npos) << e.what();
    }
}

TEST_F(HarnessTest, MissingFilesAreAllListed) {
    auto recs = hand_built();
    recs[1].detections_path = dir_.path() / "gone1.json";
    recs[4].detections_path = dir_.path() / "gone2.json";
    try {
        run_evaluation(recs, EvalOptions{});
        FAIL();
    } catch (const MissingFilesError& e) {
        ASSERT_EQ(e.paths().size(), 2u);
        EXPECT_NE(std::string(e.what()).find("gone1.json"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("gone2.json"), std::string::npos);
    }
}

TEST_F(HarnessTest, AttacksWithoutPersonsUseAbstentionPath) {
    auto recs = hand_built();
    std::vector<SampleRecord> modified;
    for (const auto& r : recs) {
        if (r.truth != Truth::attack) {
            modified.push_back(r);
            continue;
        }
        auto f = read_detections_file(r.detections_path).front();
        f.persons.clear();
        write_detections_file(r.detections_path, {f});
        modified.push_back(r);
    }

    EvalOptions opt;
    opt.classify.abstain_policy = AbstainPolicy::abstain_is_attack;
    const auto res = run_evaluation(modified, opt);
    EXPECT_EQ(res.abstained_as_attack, 3u);
    EXPECT_EQ(res.misclassified, 0u);
    EXPECT_EQ(res.det.deer, 0.0);
    for (const auto& o : res.outcomes) {
        if (o.truth != Truth::attack) continue;
        EXPECT_EQ(o.decision.label, PadLabel::attack);
        EXPECT_EQ(o.decision.score, SpatialScore::abstain(AbstainReason::no_person));
    }
    for (const auto& s : res.samples)
        if (s.truth == Truth::attack) {
            EXPECT_EQ(s.score, kAbstainAttackScore);
        }

    // Under abstain_is_abstain every attack is excluded, leaving no attack class.
    opt.classify.abstain_policy = AbstainPolicy::abstain_is_abstain;
    EXPECT_THROW(run_evaluation(modified, opt), ParseError);
}

TEST_F(HarnessTest, ExcludedAbstentionsAreCounted) {
    auto recs = hand_built();
    recs.push_back(add("a4", Truth::attack, Scenario::up, make_frame(1280, 720, {}, {person(0, 0, 100, 100)})));
    EvalOptions opt;
    opt.classify.abstain_policy = AbstainPolicy::abstain_is_abstain;
    const auto res = run_evaluation(recs, opt);
    EXPECT_EQ(res.abstained_excluded, 1u);
    EXPECT_EQ(res.samples.size(), 6u);
    EXPECT_EQ(res.outcomes.size(), 7u);
    EXPECT_EQ(res.misclassified, 0u);
}

TEST_F(HarnessTest, SmallFacesAreFilteredBeforeScoring) {
    // The 8x9 box near the bottom would make this bona fide frame look like an attack.
    auto r = add("b9", Truth::bona_fide, Scenario::normal,
                 make_frame(1280, 720, {face(600, 52, 110, 130), face(10, 600, 8, 9)}, {person(420, 40, 450, 680)}));
    auto recs = hand_built();
    recs.push_back(r);
    const auto res = run_evaluation(recs, EvalOptions{});
    EXPECT_EQ(res.misclassified, 0u);

    EvalOptions none;
    none.filter = {0.0, 0.0};
    EXPECT_EQ(run_evaluation(recs, none).misclassified, 1u);
}

TEST_F(HarnessTest, ScenarioReportsMatchIndependentCount) {
    auto recs = hand_built();
    recs.push_back(add("b4", Truth::bona_fide, Scenario::normal, make_frame(1280, 720, {}, {person(0, 0, 100, 100)})));
    const auto res = run_evaluation(recs, EvalOptions{});

    for (const auto& rep : res.scenarios) {
        for (const auto& row : rep.rows) {
            std::size_t n = 0, hit = 0;
            for (const auto& r : recs) {
                if (r.scenario != rep.scenario || r.truth != row.truth) continue;
                ++n;
                hit += read_detections_file(r.detections_path).front().faces.empty() ? 0 : 1;
            }
            EXPECT_EQ(row.sample_count, n);
            EXPECT_EQ(row.success_rate, static_cast<double>(hit) / static_cast<double>(n));
        }
    }
    // normal/bona_fide: b1, b3 detected, b4 not.
    ASSERT_EQ(res.scenarios.front().scenario, Scenario::normal);
    EXPECT_EQ(res.scenarios.front().rows.front().success_rate, 2.0 / 3.0);
}

TEST_F(HarnessTest, ConfidencesNormalizedPerDetector) {
    auto f1 = make_frame(1280, 720, {face(600, 52, 110, 130, 10.0)}, {person(420, 40, 450, 680)});
    auto f2 = make_frame(1280, 720, {face(600, 52, 110, 130, 20.0)}, {person(420, 40, 450, 680)});
    auto f3 = make_frame(1280, 720, {face(600, 400, 110, 130, 0.2)}, {person(420, 40, 450, 680)});
    auto f4 = make_frame(1280, 720, {face(600, 400, 110, 130, 0.6)}, {person(420, 40, 450, 680)});
    f3.detector_name = f4.detector_name = "other";
    std::vector<SampleRecord> recs{add("b1", Truth::bona_fide, Scenario::normal, f1),
                                   add("b2", Truth::bona_fide, Scenario::normal, f2),
                                   add("a1", Truth::attack, Scenario::normal, f3),
                                   add("a2", Truth::attack, Scenario::normal, f4)};
    const auto res = run_evaluation(recs, EvalOptions{});
    ASSERT_EQ(res.scenarios.size(), 1u);
    ASSERT_EQ(res.scenarios[0].rows.size(), 2u);
    EXPECT_EQ(res.scenarios[0].rows[0].avg_confidence, 0.5);  // {0, 1}
    EXPECT_EQ(res.scenarios[0].rows[1].avg_confidence, 0.5);  // {0, 1}
}

TEST_F(HarnessTest, MultiFrameFileSelectsBySampleId) {
    auto recs = hand_built();
    const auto stream = dir_.path() / "all.jsonl";
    std::vector<FrameDetections> frames;
    for (auto& r : recs) {
        frames.push_back(read_detections_file(r.detections_path).front());
        r.detections_path = stream;
    }
    write_detections_file(stream, frames);
    EXPECT_EQ(run_evaluation(recs, EvalOptions{}).samples, run_evaluation(hand_built(), EvalOptions{}).samples);

    recs[0].sample_id = "unknown";
    EXPECT_THROW(run_evaluation(recs, EvalOptions{}), ParseError);
}

TEST_F(HarnessTest, OrderAndParallelismDoNotChangeOutputs) {
    SynthConfig cfg;
    cfg.n_bona_fide = 60;
    cfg.n_attack = 90;
    auto recs = generate_synthetic(cfg, dir_.path() / "synth");

    EvalOptions serial;
    const auto base = run_evaluation(recs, serial);
    write_evaluation_outputs(base, serial, dir_.path() / "out_serial");

    std::mt19937_64 rng(2);
    std::shuffle(recs.begin(), recs.end(), rng);
    EvalOptions parallel;
    parallel.jobs = 4;
    const auto other = run_evaluation(recs, parallel);
    write_evaluation_outputs(other, parallel, dir_.path() / "out_parallel");

    for (const char* name : {"scores.csv", "histogram.json", "det.csv", "summary.json", "table.txt"})
        EXPECT_EQ(slurp(dir_.path() / "out_serial" / name), slurp(dir_.path() / "out_parallel" / name)) << name;
}

TEST(ScoreDistribution, CsvHeaderAndRows) {
    test::TempDir dir;
    std::vector<ScoredSample> samples{{"x", Truth::bona_fide, 0.0125}, {"y", Truth::attack, 0.5}};
    export_score_distribution(samples, dir.path() / "s.csv", dir.path() / "h.json");
    EXPECT_EQ(slurp(dir.path() / "s.csv"), "sample_id,truth,score\nx,bona_fide,0.0125\ny,attack,0.5\n");
    EXPECT_THROW(export_score_distribution({}, dir.path() / "a.csv", dir.path() / "b.json"), Error);
    EXPECT_THROW(export_score_distribution(samples, dir.path() / "no" / "a.csv", dir.path() / "b.json"), IoError);
}

TEST(ScoreDistribution, AllZeroScoresOccupyOneBin) {
    std::vector<ScoredSample> samples(5, {"z", Truth::bona_fide, 0.0});
    const auto h = score_histogram(samples);
    for (std::size_t i = 0; i < h.bona_fide.size(); ++i) EXPECT_EQ(h.bona_fide[i], i == 20 ? 5u : 0u);
    EXPECT_EQ(h.edges[20], 0.0);
    EXPECT_EQ(h.edges[21], 0.05);
}

TEST(ScoreDistribution, MatchesBruteForceBinning) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<ScoredSample> samples;
    for (int i = 0; i < 3000; ++i) {
        double s = u(rng);
        if (i % 5 == 0) s = std::round(s * 20) / 20;  // exact edges
        if (i == 7) s = 1.0;
        if (i == 8) s = -1.0;
        samples.push_back({"s" + std::to_string(i), i % 2 ? Truth::attack : Truth::bona_fide, s});
    }
    const auto h = score_histogram(samples);

    std::array<std::size_t, 40> bona{}, attack{};
    const auto& edges = h.edges;
    for (const auto& s : samples) {
        std::size_t bin = 39;
        for (std::size_t i = 0; i < 40; ++i) {
            if (s.score >= edges[i] && s.score < edges[i + 1]) {
                bin = i;
                break;
            }
        }
        (s.truth == Truth::attack ? attack : bona)[bin]++;
    }
    EXPECT_EQ(h.bona_fide, bona);
    EXPECT_EQ(h.attack, attack);

    const auto j = histogram_json(h);
    EXPECT_EQ(j["bin_edges"].size(), 41u);
    EXPECT_EQ(j["bin_edges"][0].get<double>(), -1.0);
    EXPECT_EQ(j["bin_edges"][40].get<double>(), 1.0);
}

TEST(ScenarioTable, SingleRowFormatting) {
    const std::string t = render_scenario_table({{Scenario::normal, {{Truth::bona_fide, 1.0, 0.98, 10}}}});
    EXPECT_NE(t.find("100.00"), std::string::npos) << t;
    EXPECT_NE(t.find("0.98"), std::string::npos) << t;
    EXPECT_EQ(t.rfind("Scenario", 0), 0u);
}

TEST(ScenarioTable, ScenarioOrder) {
    std::vector<ScenarioReport> reps;
    for (auto it = kAllScenarios.rbegin(); it != kAllScenarios.rend(); ++it)
        reps.push_back({*it, {{Truth::attack, 0.995, 0.5, 201}, {Truth::bona_fide, 1.0 / 201, 0.01, 201}}});
    const std::string t = render_scenario_table(reps);

    std::istringstream in(t);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::string> order;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string sc, truth;
        ls >> sc >> truth;
        order.push_back(sc + "/" + truth);
    }
    ASSERT_EQ(order.size(), 16u);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(order[2 * i], std::string(to_string(kAllScenarios[i])) + "/bona_fide");
        EXPECT_EQ(order[2 * i + 1], std::string(to_string(kAllScenarios[i])) + "/attack");
    }
    EXPECT_NE(t.find("0.50"), std::string::npos);
    EXPECT_NE(t.find("99.50"), std::string::npos);
    EXPECT_THROW(render_scenario_table({}), Error);
}

TEST(ScoresCsv, ParsesWhatWasWritten) {
    std::vector<ScoredSample> samples{{"a", Truth::bona_fide, 0.1}, {"b,c", Truth::attack, -0.3}};
    std::ostringstream out;
    write_scores_csv(out, samples);
    EXPECT_EQ(parse_scores_csv(out.str()), samples);
    EXPECT_THROW(parse_scores_csv("sample_id,truth,score\na,attack,abc\n"), ParseError);
    EXPECT_THROW(parse_scores_csv("id,score\n"), ParseError);
}

}  // namespace
}  // namespace tpad
