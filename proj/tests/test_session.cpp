#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "neuroarm/session.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "neuroarm/dataset.hpp"

using namespace neuroarm;
using namespace neuroarm::app;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("neuroarm_session_" + std::to_string(::getpid()) +
                                            "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static inline int counter = 0;
};

/// Miniature but complete pipeline: 20 s per action, 1-second windows,
/// compressed heavily so the full chain stays under a minute.
HarnessConfig fast_config() {
    HarnessConfig cfg;
    cfg.collect_seconds_per_action = 20.0;
    cfg.win_size = 16;
    cfg.test_fraction = 0.25;
    cfg.model.model_dim = 16;
    cfg.model.heads = 2;
    cfg.model.ff_dim = 32;
    cfg.train = {20, 2e-3, 8};
    cfg.run_seconds = 60.0;
    cfg.run_block_seconds = 10.0;
    cfg.time_scale = 500.0;
    cfg.seed = 2026;
    return cfg;
}

template <typename E, typename Fn>
std::string caught_message(Fn&& fn) {
    try {
        fn();
    } catch (const E& e) {
        return e.what();
    }
    return {};
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

}  // namespace

TEST_CASE("collect script covers each action once, in label order") {
    HarnessConfig cfg;
    cfg.collect_seconds_per_action = 7.0;
    const StateScript script = collect_script(cfg);

    REQUIRE(script.blocks.size() == 3);
    CHECK(script.blocks[0].state == BrainState::ConcentratedCup);
    CHECK(script.blocks[1].state == BrainState::RelaxedHandshake);
    CHECK(script.blocks[2].state == BrainState::Idle);
    for (const auto& b : script.blocks) CHECK(b.seconds == 7.0);
    CHECK(script.total_seconds() == doctest::Approx(21.0));
}

TEST_CASE("run script cycles states and truncates the last block") {
    HarnessConfig cfg;
    cfg.run_seconds = 25.0;
    cfg.run_block_seconds = 10.0;
    const StateScript script = run_script(cfg);

    REQUIRE(script.blocks.size() == 3);
    CHECK(script.blocks[0].state == BrainState::Idle);
    CHECK(script.blocks[1].state == BrainState::RelaxedHandshake);
    CHECK(script.blocks[2].state == BrainState::ConcentratedCup);
    CHECK(script.blocks[0].seconds == doctest::Approx(10.0));
    CHECK(script.blocks[2].seconds == doctest::Approx(5.0));
    CHECK(script.total_seconds() == doctest::Approx(25.0));

    // Boundaries: an exact edge belongs to the next block; the final block
    // extends past the scripted end.
    CHECK(script.state_at(0.0) == BrainState::Idle);
    CHECK(script.state_at(9.999) == BrainState::Idle);
    CHECK(script.state_at(10.0) == BrainState::RelaxedHandshake);
    CHECK(script.state_at(24.9) == BrainState::ConcentratedCup);
    CHECK(script.state_at(1e6) == BrainState::ConcentratedCup);

    CHECK_THROWS_AS(StateScript{}.state_at(0.0), ConfigError);
}

TEST_CASE("synthesized features are deterministic with exact frame counts") {
    HarnessConfig cfg;
    cfg.collect_seconds_per_action = 5.0;
    const StateScript script = collect_script(cfg);

    const auto a = synthesize_features(cfg, script, 99);
    const auto b = synthesize_features(cfg, script, 99);
    const auto other = synthesize_features(cfg, script, 100);

    // 15 s at 200 Hz, 256-window, hop 5: (3000-256)/5 + 1 frames.
    REQUIRE(a.size() == 549);
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].index == i);
        CHECK(a[i].values == b[i].values);
    }
    CHECK(a.front().values != other.front().values);

    // Frame truth is the window's final sample, so the first frame of each
    // scripted block that lies fully inside it carries that block's state.
    REQUIRE(a[100].truth.has_value());
    CHECK(*a[100].truth == BrainState::ConcentratedCup);
    CHECK(*a[250].truth == BrainState::RelaxedHandshake);
    CHECK(*a[500].truth == BrainState::Idle);
}

TEST_CASE("manifest records command, config, and artifacts") {
    TempDir tmp;
    HarnessConfig cfg;
    cfg.seed = 31337;

    write_manifest(tmp.path.string(), "train", cfg, {{"data", "x.csv"}}, {{"model", "m.bin"}});
    const json m = read_json(tmp.file("manifest.json"));
    CHECK(m.at("command") == "train");
    CHECK(m.at("version") == kHarnessVersion);
    CHECK(m.at("seed") == 31337);
    CHECK(m.at("config").at("features").at("fft_window") == 256);
    CHECK(m.at("inputs").at("data") == "x.csv");
    CHECK(m.at("artifacts").at("model") == "m.bin");

    const std::string stamp = m.at("created_utc");
    REQUIRE(stamp.size() == 20);
    CHECK(stamp[4] == '-');
    CHECK(stamp[10] == 'T');
    CHECK(stamp[19] == 'Z');

    // The config-free overload carries no seed and no config.
    TempDir tmp2;
    write_manifest(tmp2.path.string(), "replay", {{"log", "e.log"}}, {});
    const json m2 = read_json(tmp2.file("manifest.json"));
    CHECK(m2.at("command") == "replay");
    CHECK(!m2.contains("seed"));
    CHECK(!m2.contains("config"));
}

TEST_CASE("replay rejects unreadable or corrupt event logs") {
    TempDir tmp;
    CHECK_THROWS_AS(cmd_replay(tmp.file("missing.log"), tmp.file("out")), IoError);

    std::ofstream(tmp.file("bad.log"))
        << "t=0.000 kind=accept label=stayStationary progress=1.0000 joints=90.00,90.00,90.00,90.00\n"
        << "this is not an event\n";
    const auto msg = caught_message<IoError>(
        [&] { cmd_replay(tmp.file("bad.log"), tmp.file("out")); });
    CHECK(msg.find("line 2") != std::string::npos);
}

TEST_CASE("command chain: collect, train, eval, run, replay") {
    TempDir tmp;
    const HarnessConfig cfg = fast_config();
    const std::string data_dir = tmp.file("data");
    const std::string train_dir = tmp.file("train");
    const std::string eval_dir = tmp.file("eval");
    const std::string run_dir = tmp.file("run");
    const std::string replay_dir = tmp.file("replay");

    // ---- collect ----
    const CollectResult collected = cmd_collect(cfg, data_dir);

    // 20 s per action at 200 Hz keeps ~749 clean frames per block; windows
    // straddling the two script boundaries are dropped.
    REQUIRE(collected.files.size() == 3);
    CHECK(collected.loss.format_errors == 0);
    CHECK(collected.dropped_boundary_frames >= 50);
    CHECK(collected.dropped_boundary_frames <= 110);
    for (const auto& [label, path] : collected.files) {
        REQUIRE(fs::exists(path));
        const auto rows = collected.rows.at(label);
        CHECK(rows >= 700);
        CHECK(rows <= 760);
        const auto records = data::load_action_file(path, label);
        CHECK(records.size() == rows);
    }
    const json collect_manifest = read_json(data_dir + "/manifest.json");
    CHECK(collect_manifest.at("command") == "collect");
    CHECK(collect_manifest.at("artifacts").size() == 3);

    // ---- train ----
    const TrainResult trained = cmd_train(cfg, data_dir, train_dir, true, {8, 16});

    REQUIRE(fs::exists(trained.model_path));
    REQUIRE(fs::exists(trained.history_path));
    CHECK(trained.history.train_loss.size() == 20);
    CHECK(trained.history.val_acc.size() == 20);
    CHECK(trained.test_accuracy >= 0.8);
    REQUIRE(trained.ffnn_test_accuracy.has_value());
    CHECK(*trained.ffnn_test_accuracy >= 0.7);
    REQUIRE(trained.sweep.size() == 2);
    CHECK(trained.sweep[0].win_size == 8);
    CHECK(trained.sweep[1].win_size == 16);
    for (const auto& r : trained.sweep) CHECK(r.test_accuracy >= 0.7);

    const auto sweep_lines = read_lines(train_dir + "/window_sweep.csv");
    REQUIRE(sweep_lines.size() == 3);
    CHECK(sweep_lines[0] == "win_size,test_accuracy");
    CHECK(sweep_lines[1].rfind("8,", 0) == 0);
    REQUIRE(fs::exists(train_dir + "/ffnn_history.csv"));
    CHECK(read_lines(train_dir + "/history.csv").size() == 21);

    // ---- eval ----
    const EvalResult evaluated = cmd_eval(trained.model_path, data_dir, eval_dir);

    CHECK(evaluated.report.total >= 120);
    CHECK(evaluated.report.accuracy >= 0.8);
    CHECK(read_lines(evaluated.text_path).size() == 7);
    const json report_json = read_json(evaluated.json_path);
    CHECK(report_json.at("accuracy").get<double>() ==
          doctest::Approx(evaluated.report.accuracy));

    // ---- run ----
    const RunResult ran = cmd_run(cfg, trained.model_path, run_dir);

    // 60 scripted seconds at a 2 s cadence leaves 29 label emissions; UDP
    // loss can only lower that.
    CHECK(ran.emissions >= 25);
    CHECK(ran.emissions <= 31);
    std::size_t attempts = 0;
    for (const auto& [label, score] : ran.per_action) {
        attempts += static_cast<std::size_t>(score.attempts);
        CHECK(score.attempts >= 6);
        CHECK(score.rate() >= 0.6);
    }
    CHECK(attempts == ran.emissions);

    const auto event_lines = read_lines(ran.event_log_path);
    REQUIRE(!event_lines.empty());
    for (const auto& line : event_lines) CHECK(act::parse_event(line).has_value());

    const json run_report = read_json(ran.report_path);
    for (const char* key : {"emissions", "per_action", "loss", "warnings",
                            "reference_success_rates"})
        CHECK(run_report.contains(key));
    for (ActionLabel a : {ActionLabel::PickUpCup, ActionLabel::ShakeHands, ActionLabel::StayIdle})
        CHECK(run_report.at("per_action").contains(action_name(a)));

    // ---- replay ----
    const ReplayResult replayed = cmd_replay(ran.event_log_path, replay_dir);

    CHECK(replayed.events == event_lines.size());
    CHECK(replayed.kind_counts.at("transition") >= 2);
    CHECK(replayed.kind_counts.at("transition") <= 12);
    CHECK(replayed.kind_counts.at("tick_sample") >= 400);
    CHECK(read_lines(replayed.csv_path).size() ==
          replayed.kind_counts.at("tick_sample") + 1);

    const auto svg_lines = read_lines(replayed.svg_path);
    REQUIRE(!svg_lines.empty());
    CHECK(svg_lines.front().rfind("<svg", 0) == 0);
    std::size_t polylines = 0;
    for (const auto& line : svg_lines)
        if (line.find("<polyline") != std::string::npos) ++polylines;
    CHECK(polylines == 4);
}
