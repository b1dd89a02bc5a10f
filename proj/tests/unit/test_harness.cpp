#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cp3er/agent.hpp"
#include "cp3er/checkpoint.hpp"
#include "cp3er/config.hpp"
#include "cp3er/presets.hpp"
#include "cp3er/trainer.hpp"

using namespace cp3er;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cp3er_unit" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Config tiny(const std::string& env, const std::string& variant) {
  Config c;
  c.env = env;
  c.action_repeat = default_action_repeat(env);
  c.actor_variant = variant;
  c.seed = 3;
  c.steps = env == "bandit1d" ? 600 : 800;
  c.capacity = 2000;
  c.batch_size = 16;
  c.hidden_dim = 16;
  c.feature_dim = 8;
  c.seed_frames = 200;
  c.exploration_steps = 300;
  c.log_interval = 200;
  c.dormant_interval = 50;
  c.dormant_probe = 32;
  c.eval_episodes = 2;
  c.mog_samples = 4;
  return c;
}

}  // namespace

TEST_CASE("config text round trip and overrides") {
  Config c;
  c.env = "bandit1d";
  c.eta = 0.25;
  c.consistency_only = true;
  const Config back = [&] {
    Config b;
    apply_settings(b, parse_config_text(config_to_text(c)));
    return b;
  }();
  CHECK(config_to_text(back) == config_to_text(c));
  CHECK(config_diff(c, back).empty());

  const auto kv = parse_config_text("# comment\nenv = \"pointmass\"  # trailing\nsteps=42\n\n");
  CHECK(kv.at("env") == "pointmass");
  CHECK(kv.at("steps") == "42");

  Config d;
  CHECK_THROWS_AS(apply_setting(d, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "steps", "-5"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "gamma", "abc"), ConfigError);
  apply_setting(d, "actor_variant", "sac");
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.actor_variant = "cp3er";
  d.gamma = 1.5;
  CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("variant configs differ only in the variant field") {
  std::vector<Config> configs;
  for (const char* v : kVariantNames) {
    Config c;
    c.actor_variant = v;
    configs.push_back(c);
    CHECK(variant_name(parse_variant(v)) == std::string(v));
  }
  for (std::size_t i = 1; i < configs.size(); ++i) CHECK(config_diff(configs[0], configs[i]) == std::vector<std::string>{"actor_variant"});
}

TEST_CASE("zero steps writes only the snapshot") {
  const fs::path dir = fresh_dir("zero");
  Config c = tiny("pointmass", "cp3er");
  c.steps = 0;
  const RunRecord r = train(c, dir);
  CHECK(r.rows.empty());
  CHECK(r.frames == 0);
  CHECK_FALSE(r.checkpoint.has_value());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path().filename());
  CHECK(files == std::vector<fs::path>{kSnapshotFile});
}

TEST_CASE("training run outputs") {
  const fs::path dir = fresh_dir("outputs");
  Config c = tiny("bandit1d", "maxent_cp_uniform");
  c.hist_interval = 300;
  c.hist_samples = 500;
  const RunRecord r = train(c, dir);
  CHECK(r.frames == c.steps);
  CHECK(r.updates == c.steps - c.seed_frames + 1);
  CHECK(fs::exists(dir / kSnapshotFile));
  CHECK(slurp(dir / kSnapshotFile) == config_to_text(c));
  std::istringstream metrics(slurp(dir / kMetricsFile));
  std::string header;
  std::getline(metrics, header);
  CHECK(header == kMetricsHeader);
  CHECK(r.histograms.size() == 2);
  for (std::uint64_t step : {300u, 600u}) {
    const auto counts = read_histogram(dir / ("hist_" + std::to_string(step) + ".csv"));
    CHECK(counts.size() == c.hist_bins);
    std::size_t total = 0;
    for (auto n : counts) total += n;
    CHECK(total == c.hist_samples);
  }
  const std::string magic = slurp(dir / kCheckpointFile).substr(0, 12);
  CHECK(magic == kCheckpointMagic);
}

TEST_CASE("identical config and seed give identical metrics") {
  for (const std::string env : {"bandit1d", "pointmass-pixels"}) {
    const Config c = tiny(env, "cp3er");
    const fs::path a = fresh_dir("det_a_" + env), b = fresh_dir("det_b_" + env);
    train(c, a);
    train(c, b);
    CHECK(slurp(a / kMetricsFile) == slurp(b / kMetricsFile));
  }
}

TEST_CASE("histogram probing leaves the training trajectory untouched") {
  for (const std::string env : {"bandit1d", "pointmass-pixels"}) {
    Config quiet = tiny(env, "cp3er");
    quiet.dormant_interval = 0;
    Config probed = quiet;
    probed.hist_interval = 50;
    probed.hist_samples = 300;
    const RunRecord a = train(quiet, fresh_dir("probe_a_" + env));
    const RunRecord b = train(probed, fresh_dir("probe_b_" + env));
    CHECK(a.episode_returns == b.episode_returns);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].actor_loss == b.rows[i].actor_loss);
      CHECK(a.rows[i].critic_loss == b.rows[i].critic_loss);
    }
  }
}

TEST_CASE("consistency-only mode never calls q_loss") {
  Config c = tiny("pointmass", "consistency_ac");
  c.consistency_only = true;
  const RunRecord only = train(c, fresh_dir("consistency_only"));
  CHECK(only.updates > 0);
  CHECK(only.q_loss_calls == 0);
  c.consistency_only = false;
  const RunRecord q = train(c, fresh_dir("q_only"));
  CHECK(q.q_loss_calls == q.updates);
  CHECK_THROWS_AS([] {
    Config bad = tiny("pointmass", "gaussian_maxent");
    bad.consistency_only = true;
    bad.validate();
  }(), ConfigError);
}

TEST_CASE("every variant trains on pixels and reloads from its checkpoint") {
  for (const char* v : kVariantNames) {
    CAPTURE(v);
    Config c = tiny("pointmass-pixels", v);
    c.steps = 500;
    const fs::path dir = fresh_dir(std::string("variant_") + v);
    const RunRecord r = train(c, dir);
    REQUIRE(r.checkpoint.has_value());
    const Checkpoint ck = Checkpoint::load(*r.checkpoint);
    CHECK(ck.meta("frames") == std::to_string(r.frames));
    LoadedRun loaded = load_run(*r.checkpoint);
    CHECK(config_to_text(loaded.config) == config_to_text(c));
    auto env = make_env(c.env, 11, c.action_repeat, c.frame_stack);
    Rng rng(1);
    const EvalResult e = evaluate(*loaded.agent, *env, 1, rng);
    CHECK(e.episodes == 1);
  }
}

TEST_CASE("checkpoint container round trip and corruption") {
  const fs::path dir = fresh_dir("ckpt");
  fs::create_directories(dir);
  Checkpoint ck;
  ck.set_meta("note", "hello");
  ck.add_array({"w", {2, 2}, {1, 2, 3, 4.5}});
  ck.save(dir / "a.ckpt");
  const Checkpoint back = Checkpoint::load(dir / "a.ckpt");
  CHECK(back.meta("note") == "hello");
  CHECK(back.array("w").data == std::vector<double>{1, 2, 3, 4.5});
  CHECK(back.array("w").shape == Shape{2, 2});
  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOT-A-CKPT\n";
  }
  CHECK_THROWS_AS(Checkpoint::load(dir / "bad.ckpt"), CheckpointError);
  CHECK_THROWS_AS(Checkpoint::load(dir / "missing.ckpt"), CheckpointError);
}

TEST_CASE("preset job tables") {
  const auto bandit = preset_jobs("toy-bandit-compare");
  CHECK(bandit.size() == 3 * kPresetSeeds);
  const auto ablations = preset_jobs("ablations");
  CHECK(ablations.size() == 4 * kPresetSeeds);
  std::set<std::string> variants;
  for (const auto& j : ablations) {
    variants.insert(j.config.actor_variant);
    CHECK(j.config.env == "pointmass-pixels");
  }
  CHECK(variants == std::set<std::string>{"cp3er", "consistency_ac", "maxent_cp_uniform", "cp3er_urb"});
  const auto dormant = preset_jobs("dormant-study");
  CHECK(dormant.size() == 4 * kPresetSeeds);
  std::size_t only = 0;
  for (const auto& j : dormant) only += j.config.consistency_only ? 1 : 0;
  CHECK(only == 2 * kPresetSeeds);
  for (const auto& j : bandit) CHECK(j.config.hist_interval > 0);
  CHECK(ablations[0].relative_dir() == fs::path("cp3er") / "seed_1");
  CHECK_THROWS_AS(preset_jobs("nope"), ConfigError);
}

#ifdef CP3ER_CLI_PATH
TEST_CASE("command-line interface") {
  const fs::path dir = fresh_dir("cli");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "hidden_dim = 16\nbatch_size = 16\nseed_frames = 100\nexploration_steps = 150\n"
           "log_interval = 100\neval_episodes = 2\ncapacity = 1000\nsteps = 9999\n";
  }
  const std::string cli = CP3ER_CLI_PATH;
  const std::string train_cmd = cli + " train --env bandit1d --variant cp3er --seed 2 --steps 300 --config " +
                                (dir / "run.toml").string() + " --out " + (dir / "run").string() + " > " +
                                (dir / "train.log").string() + " 2>&1";
  REQUIRE(std::system(train_cmd.c_str()) == 0);
  const Config snap = load_config(dir / "run" / kSnapshotFile);
  CHECK(snap.steps == 300);
  CHECK(snap.hidden_dim == 16);
  CHECK(snap.seed == 2);
  CHECK(snap.action_repeat == 1);

  const std::string eval_cmd = cli + " eval --ckpt " + (dir / "run" / kCheckpointFile).string() +
                               " --episodes 3 > " + (dir / "eval.log").string() + " 2>&1";
  CHECK(std::system(eval_cmd.c_str()) == 0);
  CHECK(slurp(dir / "eval.log").find("return") != std::string::npos);

  CHECK(std::system((cli + " train --env nowhere --variant cp3er --seed 1 --steps 10 > /dev/null 2>&1").c_str()) != 0);
  CHECK(std::system((cli + " preset --name nothing --out " + (dir / "p").string() + " > /dev/null 2>&1").c_str()) != 0);
}
#endif

TEST_CASE("cp3er variant solves the bandit" * doctest::test_suite("slow")) {
  Config c = bandit_base_config();
  c.actor_variant = "cp3er";
  c.seed = 1;
  const RunRecord r = train(c, fresh_dir("bandit_cp3er"));
  double total = 0.0;
  const std::size_t n = 1000;
  for (std::size_t i = r.episode_returns.size() - n; i < r.episode_returns.size(); ++i) total += r.episode_returns[i];
  CHECK(total / n > 0.9);
}
