// Command-line front end for the alignment/scoring/backtest pipeline.

#include <CLI11.hpp>
#include <otalign/otalign.hpp>

#include <iostream>
#include <sstream>

namespace {

using namespace otalign;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;
constexpr int kExitNumerical = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::ParameterError: return kExitConfig;
    case ErrorCode::StageDependencyError: return kExitDependency;
    case ErrorCode::NumericalError:
    case ErrorCode::SingularSystem: return kExitNumerical;
    default: return kExitFailure;
  }
}

std::set<pipeline::Stage> parse_stages(const std::string& list) {
  std::set<pipeline::Stage> out;
  if (list.empty() || list == "all") {
    out.insert(pipeline::kAllStages.begin(), pipeline::kAllStages.end());
    return out;
  }
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.insert(pipeline::parse_stage(text::trim(item)));
  return out;
}

config::PipelineConfig load_config(const std::string& path, int workers) {
  auto v = config::validate_config_file(path);
  for (const auto& w : v.warnings) std::cerr << "warning: " << w << '\n';
  if (!v.ok()) {
    std::string all;
    for (const auto& e : v.errors) all += "\n  " + e;
    throw Error(ErrorCode::ConfigError, "invalid config" + all);
  }
  if (workers > 0) v.config.workers = workers;
  return v.config;
}

int run_pipeline(const std::string& config_path, const std::string& stages, bool force, int workers) {
  pipeline::Pipeline p(load_config(config_path, workers));
  auto result = p.run(parse_stages(stages), force);
  for (const auto& line : result.log) std::cout << line << '\n';
  std::cout << "manifest: " << (p.config().paths.output_dir / pipeline::artifact::kManifest).string() << '\n';
  return kExitOk;
}

int write_synth(const synth::SynthConfig& cfg, const fs::path& out_dir) {
  auto corpus = synth::generate_corpus(cfg);
  auto paths = synth::write_corpus(corpus, out_dir);
  nlohmann::json pipeline_cfg{
      {"paths",
       {{"articles", paths.articles.filename().string()},
        {"calendar", paths.calendar.filename().string()},
        {"embeddings", paths.sentences.filename().string()},
        {"returns", paths.returns.filename().string()},
        {"output_dir", "out"}}},
      {"corpus", {{"foreign_language", "ja"}}},
      {"scoring",
       {{"first_train_year", cfg.first_year},
        {"eval_start", cfg.first_year + 1},
        {"eval_end", cfg.first_year + cfg.years - 1}}},
      {"dim", cfg.dim}};
  std::ofstream(out_dir / "config.json") << pipeline_cfg.dump(2) << '\n';
  std::cout << "wrote " << corpus.sentences.size() << " sentences, " << corpus.truth.size() << " stock-days, "
            << corpus.returns.size() << " returns to " << out_dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilingual news sentence alignment with optimal transport, return scoring and backtests"};
  app.require_subcommand(1);

  std::string config_path, stages = "all";
  bool force = false;
  int workers = 0;

  auto* run = app.add_subcommand("run", "Run pipeline stages");
  run->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  run->add_option("--stages", stages, "Comma-separated stages or 'all'");
  run->add_flag("--force", force, "Rerun stages even when up to date");
  run->add_option("--workers", workers, "Worker threads (0 = config value)");

  std::vector<CLI::App*> stage_cmds;
  for (auto stage : pipeline::kAllStages) {
    auto* cmd = app.add_subcommand(std::string(pipeline::to_string(stage)),
                                   "Run only the " + std::string(pipeline::to_string(stage)) + " stage");
    cmd->add_option("--config", config_path, "Pipeline config (JSON)")->required();
    cmd->add_flag("--force", force, "Rerun even when up to date");
    cmd->add_option("--workers", workers, "Worker threads (0 = config value)");
    stage_cmds.push_back(cmd);
  }

  auto* validate = app.add_subcommand("validate-config", "Validate a config and print it with defaults filled");
  validate->add_option("--config", config_path, "Pipeline config (JSON)")->required();

  synth::SynthConfig synth_cfg;
  std::string synth_out = "synth";
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus with planted alignments and returns");
  synth_cmd->add_option("--out", synth_out, "Output directory");
  synth_cmd->add_option("--seed", synth_cfg.seed);
  synth_cmd->add_option("--stocks", synth_cfg.stocks);
  synth_cmd->add_option("--first-year", synth_cfg.first_year);
  synth_cmd->add_option("--years", synth_cfg.years);
  synth_cmd->add_option("--days-per-year", synth_cfg.days_per_year);
  synth_cmd->add_option("--news-probability", synth_cfg.news_probability);
  synth_cmd->add_option("--sentences-min", synth_cfg.sentences_min);
  synth_cmd->add_option("--sentences-max", synth_cfg.sentences_max);
  synth_cmd->add_option("--rho", synth_cfg.rho, "Share of planted translation pairs");
  synth_cmd->add_option("--sigma", synth_cfg.sigma, "Twin noise level");
  synth_cmd->add_option("--theme-weight", synth_cfg.theme_weight);
  synth_cmd->add_option("--snr", synth_cfg.snr);
  synth_cmd->add_option("--dim", synth_cfg.dim);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_pipeline(config_path, stages, force, workers);
    for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
      if (stage_cmds[i]->parsed()) {
        return run_pipeline(config_path, std::string(pipeline::to_string(pipeline::kAllStages[i])), force, workers);
      }
    }
    if (validate->parsed()) {
      auto v = config::validate_config_file(config_path);
      for (const auto& w : v.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& e : v.errors) std::cerr << "error: " << e << '\n';
      if (!v.ok()) return kExitConfig;
      std::cout << config::to_json(v.config).dump(2) << '\n';
      return kExitOk;
    }
    if (synth_cmd->parsed()) return write_synth(synth_cfg, synth_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
