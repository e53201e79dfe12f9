// labseq command-line driver.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "labseq/pipeline.hpp"

namespace {

std::string quote(std::string s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c == '\n' ? ' ' : c);
  }
  return out + "\"";
}

int fail(const std::string& stage, const std::string& code, const std::string& message) {
  std::cerr << "error stage=" << stage << " code=" << code << " message=" << quote(message) << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Creatinine-abnormality sequence pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config)");

  std::vector<CLI::App*> stages;
  for (const auto& name : labseq::stage_names()) stages.push_back(app.add_subcommand(name, "run the " + name + " stage"));
  auto* all = app.add_subcommand("run-all", "run every stage in order");
  auto* print = app.add_subcommand("print-config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("cli", "usage_error", e.what());
  }

  std::string stage = "config";
  try {
    labseq::RunConfig cfg = config_path.empty() ? labseq::RunConfig{} : labseq::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    cfg.validate();

    if (print->parsed()) {
      std::cout << labseq::config_to_text(cfg);
      return 0;
    }
    if (all->parsed()) {
      labseq::run_all(cfg);
      return 0;
    }
    for (auto* sub : stages) {
      if (sub->parsed()) {
        stage = sub->get_name();
        labseq::run_stage(cfg, stage);
      }
    }
    return 0;
  } catch (const labseq::StageError& e) {
    return fail(e.stage(), e.code(), e.what());
  } catch (const labseq::Error& e) {
    return fail(stage, e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(stage, "internal", e.what());
  }
}
