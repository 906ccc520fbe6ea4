#include <gtest/gtest.h>

#include <cstdlib>

#include "kbound/errors.hpp"
#include "kbound/pipeline/config.hpp"
#include "kbound/pipeline/manifest.hpp"
#include "kbound/pipeline/stages.hpp"
#include "kbound/util/hash.hpp"
#include "kbound/util/jsonl.hpp"
#include "test_support.hpp"

namespace kbound::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json minimal_doc() {
  return {{"endpoints", {{"model", {{"name", "m"}, {"kind", "mock"}, {"mock_source", "map.json"}}}}}};
}

TEST(Config, DefaultsMatchDocumentedValues) {
  const auto c = config_from_json(minimal_doc(), "/base");
  EXPECT_EQ(c.probing.n, 10);
  EXPECT_DOUBLE_EQ(c.probing.temperature, 1.0);
  EXPECT_DOUBLE_EQ(c.probing.tau, 0.7);
  EXPECT_EQ(c.split.train, 20000u);
  EXPECT_EQ(c.split.test, 3000u);
  EXPECT_DOUBLE_EQ(c.split.known_fraction, 0.6);
  EXPECT_EQ(c.model.mock_source, "/base/map.json");
  EXPECT_EQ(c.paths.out_dir, fs::path("/base/out"));
  EXPECT_EQ(c.hash.size(), 64u);
}

TEST(Config, Validation) {
  auto doc = minimal_doc();
  doc["probing"] = {{"tau", 1.5}};
  EXPECT_THROW(config_from_json(doc), ConfigurationError);
  doc = minimal_doc();
  doc["matching"] = {{"mode", "judge"}};
  EXPECT_THROW(config_from_json(doc), ConfigurationError);
  doc = minimal_doc();
  doc["split"] = {{"known_fraction", -0.1}};
  EXPECT_THROW(config_from_json(doc), ConfigurationError);
  EXPECT_THROW(config_from_json(json::object()), ConfigurationError);
  doc = minimal_doc();
  doc["probing"] = {{"n", "ten"}};
  EXPECT_THROW(config_from_json(doc), ConfigurationError);
}

TEST(Config, EnvInterpolationKeepsSecretsOutOfEffective) {
  ::setenv("KBOUND_TEST_URL", "http://example.invalid", 1);
  auto doc = minimal_doc();
  doc["endpoints"]["model"] = {{"name", "r"}, {"kind", "remote"}, {"base_url", "${KBOUND_TEST_URL}"}, {"model", "x"}};
  const auto c = config_from_json(doc);
  EXPECT_EQ(c.model.base_url, "http://example.invalid");
  EXPECT_EQ(c.effective["endpoints"]["model"]["base_url"], "${KBOUND_TEST_URL}");
  doc["endpoints"]["model"]["base_url"] = "${KBOUND_TEST_SURELY_UNSET}";
  EXPECT_THROW(config_from_json(doc), ConfigurationError);
  EXPECT_EQ(interpolate_env(json{{"a", "pre-${KBOUND_TEST_URL}-post"}})["a"], "pre-http://example.invalid-post");
}

TEST(Config, OverridesAndHash) {
  auto doc = minimal_doc();
  apply_override(doc, "probing.tau", "0.8");
  apply_override(doc, "paths.out_dir", "results");
  apply_override(doc, "evaluation.mode", "few-shot");
  EXPECT_EQ(doc["probing"]["tau"], 0.8);
  EXPECT_EQ(doc["paths"]["out_dir"], "results");
  const auto a = config_from_json(doc);
  EXPECT_DOUBLE_EQ(a.probing.tau, 0.8);
  EXPECT_EQ(a.evaluation.mode, evaluation::EvalMode::kFewShot);
  EXPECT_EQ(config_from_json(doc).hash, a.hash);
  EXPECT_NE(config_from_json(minimal_doc()).hash, a.hash);
  EXPECT_THROW(apply_override(doc, "probing..tau", "1"), ConfigurationError);
}

TEST(Config, LoadFromFile) {
  testing::TempDir dir;
  util::write_json(dir / "c.json", minimal_doc());
  const auto c = load_config(dir / "c.json", {{"seed", "42"}});
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.model.mock_source, (dir.path() / "map.json").string());
  EXPECT_THROW(load_config(dir / "missing.json"), Error);
}

TEST(Manifest, LinksResolveToPrimary) {
  testing::TempDir dir;
  util::write_text(dir / "a.txt", "alpha");
  util::write_text(dir / "b.txt", "beta");
  RunManifest m;
  m.command = "test";
  m.config_hash = "h";
  m.outputs = {describe_artifact(dir / "a.txt"), describe_artifact(dir / "b.txt")};
  m.tool_version = tool_version();
  write_manifest(dir / "a.txt", m);
  EXPECT_EQ(find_manifest(dir / "a.txt"), manifest_path_for(dir / "a.txt"));
  EXPECT_EQ(find_manifest(dir / "b.txt"), manifest_path_for(dir / "a.txt"));
  EXPECT_TRUE(find_manifest(dir / "nothing").empty());
  const auto back = RunManifest::from_json(util::read_json(manifest_path_for(dir / "a.txt")));
  EXPECT_EQ(back.outputs.at(1).sha256, util::sha256_hex("beta"));
  EXPECT_EQ(utc_now().size(), 20u);
}

class PipelineRun : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::EngineeredOptions o;
    o.size = 120;
    o.reject_fraction = 0.1;
    ws_ = testing::write_mock_workspace(dir_.path(), o, 60, 20);
  }
  testing::TempDir dir_;
  testing::MockWorkspace ws_;
};

TEST_F(PipelineRun, StagesChainThroughManifests) {
  Pipeline p(load_config(ws_.config));
  const auto cur = p.curate();
  EXPECT_EQ(cur.summary["kept"], 108);
  const auto probe = p.probe();
  EXPECT_EQ(probe.summary["total"], 108);
  const auto pg = p.pairgen();
  EXPECT_EQ(pg.summary["train"], 60);
  EXPECT_EQ(pg.summary["test"], 20);
  EXPECT_NEAR(pg.summary["train_known_fraction"].get<double>(), 0.6, 1e-12);
  const auto ev = p.evaluate();
  EXPECT_EQ(ev.summary["total"], 20);
  const auto un = p.uncertainty();
  EXPECT_LE(un.summary["max_identity_deviation"].get<double>(), 1e-9);

  // Walk the provenance chain from the evaluation report back to the corpus.
  fs::path artifact = ev.outputs.front();
  std::set<std::string> commands;
  for (int hop = 0; hop < 10; ++hop) {
    const auto mpath = find_manifest(artifact);
    if (mpath.empty()) break;
    const auto m = RunManifest::from_json(util::read_json(mpath));
    commands.insert(m.command);
    EXPECT_EQ(m.config_hash, p.config().hash);
    ASSERT_FALSE(m.inputs.empty());
    artifact = m.inputs.front().path;
  }
  EXPECT_EQ(artifact, ws_.root / "corpus.jsonl");
  EXPECT_TRUE(commands.count("curate"));
  EXPECT_TRUE(commands.count("evaluate"));
  EXPECT_TRUE(fs::exists(p.out("evaluate.config.json")));
  EXPECT_EQ(util::read_json(p.out("evaluate.config.json"))["config_hash"], p.config().hash);
}

TEST_F(PipelineRun, LossesCheckAndToyTrain) {
  Pipeline p(load_config(ws_.config));
  const auto lc = p.losses_check(5);
  EXPECT_TRUE(lc.passed);
  p.curate();
  p.probe();
  p.pairgen();
  const auto tt = p.toy_train();
  EXPECT_GT(tt.summary["logp_w"][1].get<double>(), tt.summary["logp_w"][0].get<double>());
  EXPECT_TRUE(fs::exists(p.out("toy-train.orpo.csv")));
}

TEST_F(PipelineRun, MissingUpstreamArtifact) {
  Pipeline p(load_config(ws_.config));
  EXPECT_THROW(p.pairgen(), Error);
}

}  // namespace
}  // namespace kbound::pipeline
