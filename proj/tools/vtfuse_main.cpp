#include <CLI11.hpp>

#include <iostream>

#include "vtfuse/config.hpp"
#include "vtfuse/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Visuo-tactile depth fusion pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string stages;
  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--config", config_path, "scene configuration file")->required();
  app.add_option("--stages", stages, "comma-separated stages (pipeline subcommand)");
  app.add_option("--seed", seed, "override [scene] seed");
  app.add_option("--out", out, "override the output directory");

  struct Sub {
    const char* name;
    const char* help;
    std::optional<vtf::Stage> stage;
  };
  const Sub subs[] = {
      {"simulate", "generate a synthetic dataset", vtf::Stage::simulate},
      {"gpis-fit", "fit the implicit surface to the touches", vtf::Stage::gpis_fit},
      {"gpis-render", "render GPIS depth and variance per view", vtf::Stage::gpis_render},
      {"align", "align monocular depth to metric scale", vtf::Stage::align},
      {"fuse", "fuse vision and touch depth", vtf::Stage::fuse},
      {"init-points", "initialize splats", vtf::Stage::init_points},
      {"train", "optimize splats", vtf::Stage::train},
      {"eval", "write the evaluation report", vtf::Stage::eval},
      {"pipeline", "run several stages in order", std::nullopt},
  };
  std::vector<CLI::App*> handles;
  for (const auto& s : subs) handles.push_back(app.add_subcommand(s.name, s.help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    vtf::SceneConfig cfg = vtf::validate_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.output = out;

    std::vector<vtf::Stage> run;
    for (size_t i = 0; i < handles.size(); ++i) {
      if (!handles[i]->parsed()) continue;
      if (subs[i].stage) {
        if (!stages.empty()) throw vtf::ConfigError("--stages is only valid with the pipeline subcommand");
        if (*subs[i].stage == vtf::Stage::simulate && !cfg.simulate.enabled)
          throw vtf::ConfigError(config_path + ": simulate needs a [simulate] section");
        run = {*subs[i].stage};
      } else {
        run = stages.empty() ? vtf::all_stages() : vtf::parse_stages(stages);
      }
    }
    return vtf::run_pipeline(cfg, run, std::cerr);
  } catch (const vtf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
