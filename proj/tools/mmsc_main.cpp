#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmsc/config.hpp"
#include "mmsc/orchestrate.hpp"

int main(int argc, char** argv) {
  CLI::App app{"multi-scale mammography assessment pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 0;  // 0 = take from config
  app.add_option("--config", config_path, "pipeline config file (key=value)")
      ->required();
  app.add_option("--threads", threads, "worker thread cap (1 = bit-deterministic)");

  int synth_count = 20;
  double scale = 0.5;
  bool with_aux = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--count", synth_count, "number of cases");

  app.add_subcommand("patches", "extract multi-scale tissue patches");

  CLI::App* train_tissue = app.add_subcommand("train-tissue", "train the tissue classifier");
  train_tissue->add_option("--scale", scale, "magnification (0.5/0.33/0.25)");

  CLI::App* eval_tissue = app.add_subcommand("eval-tissue", "evaluate on the test split");
  eval_tissue->add_option("--scale", scale, "magnification (0.5/0.33/0.25)");

  CLI::App* train_heatmap = app.add_subcommand("train-heatmap", "train the heatmap regressor");
  train_heatmap->add_flag("--aux", with_aux, "use the aggregation channel");

  CLI::App* infer = app.add_subcommand("infer", "aggregate + heatmap inference on the test split");
  infer->add_flag("--aux", with_aux, "use the aggregation channel");
  infer->add_option("--scale", scale, "aggregation magnification");

  CLI::App* saliency = app.add_subcommand("saliency", "gated saliency reconstruction");
  saliency->add_flag("--aux", with_aux, "heatmaps came from the aux model");
  saliency->add_option("--scale", scale, "saliency magnification");

  CLI11_PARSE(app, argc, argv);

  try {
    mmsc::PipelineConfig config = mmsc::PipelineConfig::from_file(config_path);
    if (threads > 0) config.threads = threads;

    if (synth->parsed()) mmsc::cmd_synth(config, synth_count);
    else if (app.got_subcommand("patches")) mmsc::cmd_patches(config);
    else if (train_tissue->parsed()) mmsc::cmd_train_tissue(config, scale);
    else if (eval_tissue->parsed()) mmsc::cmd_eval_tissue(config, scale);
    else if (train_heatmap->parsed()) mmsc::cmd_train_heatmap(config, with_aux);
    else if (infer->parsed()) mmsc::cmd_infer(config, with_aux, scale);
    else if (saliency->parsed()) mmsc::cmd_saliency(config, with_aux, scale);
  } catch (const mmsc::MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
