// Copyright 2026 The replaydet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rd/cli.hpp"

#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "rd/config.hpp"
#include "rd/pipeline.hpp"

namespace rd::cli {
namespace {

// Options shared by every subcommand; collected first, applied in order:
// defaults <- config file <- --set overrides <- --seed/--threads.
struct CommonArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_file,
                  "experiment file (key = value with [sections])");
  cmd->add_option("--set", args->sets,
                  "override one config key, e.g. --set cm.noise_std=0.001")
      ->take_all();
  cmd->add_option("--seed", args->seed, "master seed for this experiment")
      ->each([args](const std::string&) { args->seed_given = true; });
  cmd->add_option("--threads", args->threads, "worker cap (results never "
                  "depend on it)");
  cmd->add_flag("--force", args->force,
                "accept artifacts made under a different config");
  cmd->footer(config::describe_keys());
}

config::ExperimentConfig build_config(const CommonArgs& args) {
  config::ExperimentConfig cfg;
  if (!args.config_file.empty()) {
    cfg = config::load_config_file(args.config_file);
  }
  for (const std::string& s : args.sets) config::apply_override(&cfg, s);
  if (args.seed_given) cfg.seed = args.seed;
  if (args.threads > 0) cfg.threads = args.threads;
  return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"replay-attack countermeasure pipeline"};
  app.require_subcommand(1);
  app.footer("Run '<subcommand> --help' for stage options and config keys.");

  struct Cmd {
    CLI::App* sub = nullptr;
    CommonArgs common;
    std::string split = "dev";
  };
  std::vector<std::unique_ptr<Cmd>> cmds;
  std::function<int(Cmd&)> action;
  Cmd* chosen = nullptr;

  auto add = [&](const std::string& name, const std::string& desc,
                 bool has_split, std::function<int(Cmd&)> fn) {
    auto cmd = std::make_unique<Cmd>();
    cmd->sub = app.add_subcommand(name, desc);
    add_common(cmd->sub, &cmd->common);
    if (has_split) {
      cmd->sub->add_option("--split", cmd->split, "train | dev | eval")
          ->check(CLI::IsMember({"train", "dev", "eval"}));
    }
    Cmd* raw = cmd.get();
    cmd->sub->callback([&, raw, fn] {
      chosen = raw;
      action = fn;
    });
    cmds.push_back(std::move(cmd));
  };

  auto opts = [](Cmd& c) {
    pipeline::StageOptions o;
    o.force = c.common.force;
    o.log = &std::cout;
    return o;
  };

  add("simulate", "render the synthetic corpus and verifier scores", false,
      [&](Cmd& c) {
        pipeline::simulate(build_config(c.common), opts(c));
        return kOk;
      });
  add("extract", "compute feature archives for every split", false,
      [&](Cmd& c) {
        pipeline::extract(build_config(c.common), opts(c));
        return kOk;
      });
  add("train-xvec", "train the joint-class embedding network", false,
      [&](Cmd& c) {
        pipeline::train_xvec(build_config(c.common), opts(c));
        return kOk;
      });
  add("extract-xvec", "extract embeddings for every split", false,
      [&](Cmd& c) {
        pipeline::extract_xvec(build_config(c.common), opts(c));
        return kOk;
      });
  add("fit-lda", "fit the discriminant projection on training embeddings",
      false, [&](Cmd& c) {
        pipeline::fit_lda_stage(build_config(c.common), opts(c));
        return kOk;
      });
  add("train-cm", "train the countermeasure classifier", false, [&](Cmd& c) {
    pipeline::train_cm(build_config(c.common), opts(c));
    return kOk;
  });
  add("score", "score one split with the trained countermeasure", true,
      [&](Cmd& c) {
        pipeline::score(build_config(c.common), c.split, opts(c));
        return kOk;
      });
  add("eval", "equal error rate and tandem cost for one split", true,
      [&](Cmd& c) {
        pipeline::evaluate(build_config(c.common), c.split, opts(c));
        return kOk;
      });
  add("analyze", "embedding-space confusion analyses", false, [&](Cmd& c) {
    pipeline::analyze(build_config(c.common), opts(c));
    return kOk;
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e); // prints help, exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e); // prints the cause to stderr
    return kUsageError;
  }

  try {
    return action(*chosen);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericError;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace rd::cli
