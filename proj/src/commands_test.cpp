#include "bevloc/commands.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace bevloc {
namespace {

namespace fs = std::filesystem;

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

TEST(Presets, DeskAndPaperProtocol) {
  const RunConfig desk = preset_config("desk");
  EXPECT_EQ(desk.scene.camera.width_px, 256);
  EXPECT_EQ(desk.scene.camera.height_px, 192);
  EXPECT_EQ(desk.protocol.frame_count(), 500u);
  const RunConfig paper = preset_config("paper-protocol");
  EXPECT_EQ(paper.scene.camera.width_px, 1024);
  EXPECT_EQ(paper.scene.camera.height_px, 768);
  EXPECT_EQ(paper.protocol.frame_count(), 12000u);
  EXPECT_THROW(preset_config("laptop"), std::invalid_argument);
}

TEST(RunConfig, JsonOverlayKeepsUnsetKeys) {
  const RunConfig base = preset_config("desk");
  const nlohmann::json j = {{"train", {{"epochs", 7}}}, {"scene", {{"camera", {{"width_px", 8}}}}}};
  const RunConfig c = RunConfig::from_json(j, base);
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_EQ(c.train.batch, base.train.batch);
  EXPECT_EQ(c.scene.camera.width_px, 8);
  EXPECT_EQ(c.scene.camera.height_px, 192);
  EXPECT_EQ(c.protocol.frame_count(), 500u);

  const RunConfig back = RunConfig::from_json(base.to_json(), preset_config("paper-protocol"));
  EXPECT_EQ(back.to_json(), base.to_json());
}

TEST(RunConfig, SeedReachesEveryStream) {
  RunConfig c = preset_config("desk");
  c.apply_seed(17);
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.scene.seed, 17u);
  EXPECT_EQ(c.train.init_seed, 17u);
  EXPECT_EQ(c.train.shuffle_seed, 18u);
}

TEST(RunConfig, LoadFromFile) {
  const fs::path p = fs::temp_directory_path() / "bevloc_commands_cfg.json";
  std::ofstream(p) << R"({"preset": "paper-protocol", "protocol": {"maps": 2}})";
  const RunConfig c = load_run_config(std::nullopt, p);
  EXPECT_EQ(c.preset, "paper-protocol");
  EXPECT_EQ(c.protocol.maps, 2);
  EXPECT_EQ(c.scene.camera.width_px, 1024);
  const RunConfig d = load_run_config(std::string("desk"), p);
  EXPECT_EQ(d.scene.camera.width_px, 256);
  EXPECT_THROW(load_run_config(std::nullopt, fs::path("/nonexistent/cfg.json")),
               std::runtime_error);
}

// One small generated dataset, trained for a few epochs.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    base_ = new fs::path(fs::temp_directory_path() / "bevloc_commands_test");
    fs::remove_all(*base_);
    cfg_ = new RunConfig(preset_config("desk"));
    cfg_->protocol = {1, 1, 10, 2, 5};
    cfg_->out = *base_ / "data";
    std::ostringstream log;
    gen_ = new GenResult(cmd_gen(*cfg_, log));
    gen_log_ = new std::string(log.str());
    cfg_->data = *base_ / "data";
  }
  static void TearDownTestSuite() {
    fs::remove_all(*base_);
    delete base_;
    delete cfg_;
    delete gen_;
    delete gen_log_;
  }
  RunConfig with_out(const std::string& name) const {
    RunConfig c = *cfg_;
    c.out = *base_ / name;
    return c;
  }
  static fs::path* base_;
  static RunConfig* cfg_;
  static GenResult* gen_;
  static std::string* gen_log_;
};

fs::path* Pipeline::base_ = nullptr;
RunConfig* Pipeline::cfg_ = nullptr;
GenResult* Pipeline::gen_ = nullptr;
std::string* Pipeline::gen_log_ = nullptr;

TEST_F(Pipeline, GenWritesManifestAndReport) {
  EXPECT_EQ(gen_->manifest.frames.size(), 20u);
  EXPECT_GT(gen_->manifest.record_count, 0u);
  EXPECT_TRUE(fs::exists(cfg_->data / "manifest.json"));
  EXPECT_TRUE(fs::exists(cfg_->data / "resolved_config.json"));
  EXPECT_NE(gen_log_->find("frames: 20"), std::string::npos) << *gen_log_;
  EXPECT_NE(gen_log_->find(gen_->manifest.checksum), std::string::npos);
  const auto [su, sv] = extent_std(Dataset::open(cfg_->data));
  EXPECT_DOUBLE_EQ(su, gen_->std_u_extent);
  EXPECT_DOUBLE_EQ(sv, gen_->std_v_extent);
}

TEST_F(Pipeline, GenRefusesToOverwrite) {
  std::ostringstream log;
  EXPECT_THROW(cmd_gen(*cfg_, log), std::runtime_error);
}

TEST_F(Pipeline, OraclePredictorIsPerfect) {
  RunConfig c = with_out("eval_oracle");
  c.predictor = "oracle";
  std::ostringstream log;
  const EvalResult r = cmd_eval(c, log);
  EXPECT_EQ(r.model.summary.mIoU, 1.0);
  EXPECT_EQ(r.model.summary.mCD, 0.0);
  EXPECT_GT(r.model.summary.n, 0u);
  EXPECT_TRUE(fs::exists(c.out / "summary.json"));
  EXPECT_TRUE(fs::exists(c.out / "per_record.csv"));
}

TEST_F(Pipeline, ConstantPredictorAndIpmBaseline) {
  RunConfig c = with_out("eval_constant");
  c.predictor = "constant";
  c.baseline = "ipm";
  std::ostringstream log;
  const EvalResult r = cmd_eval(c, log);
  ASSERT_TRUE(r.baseline);
  EXPECT_GT(r.model.summary.mCD, 0.0);
  EXPECT_TRUE(fs::exists(c.out / "ipm" / "summary.json"));
  EXPECT_NE(log.str().find("ipm"), std::string::npos);
  EXPECT_NE(log.str().find("constant"), std::string::npos);
  EXPECT_LT(r.baseline->summary.mCD, r.model.summary.mCD);
}

TEST_F(Pipeline, GridMetersDividesByPixelsPerMeter) {
  RunConfig c = with_out("eval_meters");
  c.predictor = "constant";
  c.grid_meters = true;
  std::ostringstream log;
  const EvalResult r = cmd_eval(c, log);
  const auto j = read_json(c.out / "summary.json");
  EXPECT_DOUBLE_EQ(j.at("mCD_m").get<double>(), r.model.summary.mCD / 4.0);
  EXPECT_NE(log.str().find("mCD[m]"), std::string::npos);
}

TEST_F(Pipeline, EvalNeedsCheckpoint) {
  RunConfig c = with_out("eval_missing");
  std::ostringstream log;
  EXPECT_THROW(cmd_eval(c, log), std::runtime_error);
  c.checkpoint = *base_ / "nope.ckpt";
  EXPECT_THROW(cmd_eval(c, log), std::runtime_error);
}

TEST_F(Pipeline, TrainThenEvalModel) {
  RunConfig c = with_out("train");
  c.train.epochs = 3;
  c.arch.coords_only = true;
  std::ostringstream log;
  const TrainResult t = cmd_train(c, log);
  ASSERT_TRUE(fs::exists(t.checkpoint));
  std::ifstream hist(c.out / "history.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch").get<int>(), ++lines);
    for (const char* k : {"loss", "mIoU", "mCD", "mhE", "mwE", "marE"}) EXPECT_TRUE(j.contains(k));
  }
  EXPECT_EQ(lines, 3);

  RunConfig e = with_out("eval_model");
  e.checkpoint = t.checkpoint;
  const EvalResult r = cmd_eval(e, log);
  EXPECT_NEAR(r.model.summary.mIoU, t.history.best_miou, 1e-12);

  RunConfig i = with_out("inspect_pred");
  i.record = 0;
  i.predict_checkpoint = t.checkpoint;
  std::ostringstream ilog;
  cmd_inspect(i, ilog);
  EXPECT_NE(ilog.str().find("prediction:"), std::string::npos);
}

TEST_F(Pipeline, InspectDrawsBoxes) {
  RunConfig c = with_out("inspect");
  c.record = 1;
  std::ostringstream log;
  const InspectResult r = cmd_inspect(c, log);
  const RgbImage pv = read_ppm(r.pv_image);
  const RgbImage bev = read_ppm(r.bev_image);
  const Dataset ds = Dataset::open(c.data);
  const RecordMeta& rec = ds.record(1);
  EXPECT_EQ(pv.at(static_cast<int>(rec.bbox_rgb.u_min), static_cast<int>(rec.bbox_rgb.v_min)),
            kPvBoxColor);
  EXPECT_EQ(bev.at(static_cast<int>(rec.bbox_bev.u_min), static_cast<int>(rec.bbox_bev.v_min)),
            kTargetColor);
  EXPECT_EQ(bev.width(), 200);

  c.record = ds.record_count();
  EXPECT_THROW(cmd_inspect(c, log), std::out_of_range);
}

}  // namespace
}  // namespace bevloc
