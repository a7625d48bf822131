// Command-line front end: gen, train, eval, inspect.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bevloc/commands.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::optional<int> epochs;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<std::string> ablation;
  std::optional<std::string> baseline;
  std::optional<std::string> predictor;
  std::optional<std::string> sampling;
  std::optional<std::size_t> record;
  std::optional<std::string> predict;
  std::optional<unsigned> workers;
  bool grid_meters = false;
  bool force = false;
};

bevloc::RunConfig resolve(const Flags& f) {
  using bevloc::RunConfig;
  std::optional<std::filesystem::path> file;
  if (f.config) file = *f.config;
  RunConfig c = bevloc::load_run_config(f.preset, file);
  if (f.seed) c.apply_seed(*f.seed);
  if (f.out) c.out = *f.out;
  if (f.data) c.data = *f.data;
  if (f.checkpoint) c.checkpoint = *f.checkpoint;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.batch) c.train.batch = *f.batch;
  if (f.lr) c.train.adam.lr = *f.lr;
  if (f.ablation) {
    if (*f.ablation == "coords-only") {
      c.arch.coords_only = true;
    } else if (*f.ablation == "none") {
      c.arch.coords_only = false;
    } else {
      throw std::invalid_argument("unknown ablation '" + *f.ablation +
                                  "' (expected coords-only or none)");
    }
  }
  if (f.baseline) c.baseline = *f.baseline;
  if (f.predictor) c.predictor = *f.predictor;
  if (f.sampling) {
    nlohmann::json j = c.train.to_json();
    j["sampling"] = *f.sampling;
    c.train = bevloc::TrainConfig::from_json(j);
  }
  if (f.record) c.record = *f.record;
  if (f.predict) c.predict_checkpoint = *f.predict;
  if (f.workers) c.workers = *f.workers;
  if (f.grid_meters) c.grid_meters = true;
  if (f.force) c.force = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic driving scenes and BEV box regression from perspective-view boxes"};
  app.require_subcommand(1);
  Flags f;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--preset", f.preset, "desk | paper-protocol");
    sub->add_option("--seed", f.seed, "Master seed");
    sub->add_option("--out", f.out, "Output directory");
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate a dataset");
  common(gen);
  gen->add_option("--workers", f.workers, "Parallel frame workers");
  gen->add_flag("--force", f.force, "Overwrite an existing dataset");

  CLI::App* train = app.add_subcommand("train", "Train the regressor");
  common(train);
  train->add_option("--data", f.data, "Dataset root")->required();
  train->add_option("--epochs", f.epochs);
  train->add_option("--batch", f.batch);
  train->add_option("--lr", f.lr);
  train->add_option("--ablation", f.ablation, "coords-only | none");
  train->add_option("--sampling", f.sampling, "all-boxes | one-per-frame");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate on the test split");
  common(eval);
  eval->add_option("--data", f.data, "Dataset root")->required();
  eval->add_option("--checkpoint", f.checkpoint, "Model checkpoint");
  eval->add_option("--predictor", f.predictor, "model | oracle | constant");
  eval->add_option("--baseline", f.baseline, "ipm");
  eval->add_flag("--grid-meters", f.grid_meters, "Report mCD in meters");

  CLI::App* inspect = app.add_subcommand("inspect", "Render overlays for one record");
  common(inspect);
  inspect->add_option("--data", f.data, "Dataset root")->required();
  inspect->add_option("--record", f.record, "Record id")->required();
  inspect->add_option("--predict", f.predict, "Checkpoint whose prediction is drawn");

  CLI11_PARSE(app, argc, argv);

  try {
    const bevloc::RunConfig cfg = resolve(f);
    if (gen->parsed()) {
      bevloc::cmd_gen(cfg, std::cout);
    } else if (train->parsed()) {
      bevloc::cmd_train(cfg, std::cout);
    } else if (eval->parsed()) {
      bevloc::cmd_eval(cfg, std::cout);
    } else if (inspect->parsed()) {
      bevloc::cmd_inspect(cfg, std::cout);
    }
  } catch (const bevloc::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
