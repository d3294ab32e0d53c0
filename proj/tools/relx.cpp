// relx: command-line front end for the mining, expansion, training and evaluation pipeline.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "relx/pipeline.hpp"

namespace {

std::string kebab(std::string name) {
  for (auto& c : name)
    if (c == '_') c = '-';
  return name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relx: itemset-driven corpus expansion and adversarial relation extraction"};
  app.set_version_flag("--version", std::string(relx::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "flat key = value configuration file")->check(CLI::ExistingFile);

  // Values given on the command line, applied after the config file so they win.
  std::vector<std::pair<std::string, std::string>> cli_values;
  for (const auto& field : relx::config_fields()) {
    const std::string flag = "--" + kebab(field.name);
    const std::string name = field.name;
    if (field.is_flag) {
      app.add_flag_callback(flag, [&cli_values, name] { cli_values.emplace_back(name, "true"); });
    } else if (name == "metrics_inputs") {
      app.add_option_function<std::vector<std::string>>(
             flag,
             [&cli_values, name](const std::vector<std::string>& v) {
               for (const auto& p : v) cli_values.emplace_back(name, p);
             },
             "metric files to rank")
          ->expected(1, -1);
    } else {
      app.add_option_function<std::string>(
          flag, [&cli_values, name](const std::string& v) { cli_values.emplace_back(name, v); });
    }
  }

  using Command = int (*)(const relx::PipelineConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"split", "seeded train/test split by entity pair", relx::cmd_split},
      {"mine", "build the vocabulary and the MDL code table", relx::cmd_mine},
      {"expand", "add template sentences generated from code-table itemsets", relx::cmd_expand},
      {"train", "train the PCNN relation extractor", relx::cmd_train},
      {"predict", "score entity pairs of a test corpus", relx::cmd_predict},
      {"eval", "held-out metrics for a prediction file", relx::cmd_eval},
      {"rank", "Borda ranking over metric files", relx::cmd_rank},
      {"synth", "write a seeded synthetic corpus", relx::cmd_synth},
  };
  Command selected = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&selected, fn = fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    relx::PipelineConfig config;
    if (!config_path.empty()) relx::load_config_file(config, config_path);
    bool metrics_reset = false;
    for (const auto& [key, value] : cli_values) {
      if (key == "metrics_inputs" && !metrics_reset) {
        config.metrics_inputs.clear();
        metrics_reset = true;
      }
      relx::find_field(key)->set(config, value);
    }
    return selected(config, std::cout);
  } catch (const relx::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
