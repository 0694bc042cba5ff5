// drive-curate: batch CLI over the drivecurate C API.
//
// Commands: synth, curate, embed, train-toy, eval, inspect.
// Global flags: --config, --out, --seed, --jobs. Failures print one
// machine-parseable line: error: category=<Name> message="...".

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drivecurate/drivecurate.h"

namespace {

struct ConfigDeleter {
  void operator()(dcur_config* c) const { dcur_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<dcur_config, ConfigDeleter>;

struct StringDeleter {
  void operator()(char* s) const { dcur_string_free(s); }
};
using CString = std::unique_ptr<char, StringDeleter>;

int fail(dcur_status status) {
  std::fprintf(stderr, "error: category=%s message=\"%s\"\n",
               dcur_status_name(status), dcur_last_error());
  return 1;
}

int fail_usage(const std::string& message) {
  std::fprintf(stderr, "error: category=Usage message=\"%s\"\n",
               message.c_str());
  return 2;
}

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::string seed;
  std::string jobs;
  std::vector<std::string> sets;  // key=value overrides
};

void add_global_flags(CLI::App* cmd, GlobalOpts& g) {
  cmd->add_option("--config", g.config_path, "JSON config file");
  cmd->add_option("--out", g.out_dir, "output directory");
  cmd->add_option("--seed", g.seed, "master seed (overrides config)");
  cmd->add_option("--jobs", g.jobs, "worker count, 0 = hardware");
  cmd->add_option("--set", g.sets,
                  "config override as dotted key=value (repeatable)");
}

dcur_status apply_config(const GlobalOpts& g, dcur_config* cfg) {
  dcur_status rc = DCUR_OK;
  if (!g.config_path.empty()) {
    rc = dcur_config_load_file(cfg, g.config_path.c_str());
    if (rc != DCUR_OK) return rc;
  }
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      rc = dcur_config_set(cfg, kv.c_str(), "");
    } else {
      rc = dcur_config_set(cfg, kv.substr(0, eq).c_str(),
                           kv.substr(eq + 1).c_str());
    }
    if (rc != DCUR_OK) return rc;
  }
  if (!g.seed.empty()) {
    rc = dcur_config_set(cfg, "seed", g.seed.c_str());
    if (rc != DCUR_OK) return rc;
  }
  if (!g.jobs.empty()) {
    rc = dcur_config_set(cfg, "jobs", g.jobs.c_str());
    if (rc != DCUR_OK) return rc;
  }
  return dcur_config_validate(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drive-curate: canonicalize driving-log vehicle views into "
               "orbital-pose training data and exercise the toy diffusion "
               "harness"};
  app.require_subcommand(1);

  GlobalOpts g_synth, g_curate, g_embed, g_train, g_eval, g_inspect;
  std::string manifest_path, dataset_dir, model_path;
  std::string inspect_object, inspect_frame;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic manifest");
  add_global_flags(synth, g_synth);

  CLI::App* curate =
      app.add_subcommand("curate", "manifest -> curated samples + pairs");
  add_global_flags(curate, g_curate);
  curate->add_option("--manifest", manifest_path, "manifest JSON path")
      ->required();

  CLI::App* embed = app.add_subcommand(
      "embed", "emit ray maps and pose conditions for existing pairs");
  add_global_flags(embed, g_embed);
  embed->add_option("--dataset", dataset_dir, "curated dataset directory")
      ->required();

  CLI::App* train = app.add_subcommand("train-toy", "train the toy denoiser");
  add_global_flags(train, g_train);
  train->add_option("--dataset", dataset_dir, "curated dataset directory")
      ->required();

  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "predict target views and report bucketed PSNR/SSIM");
  add_global_flags(eval_cmd, g_eval);
  eval_cmd->add_option("--dataset", dataset_dir, "curated dataset directory")
      ->required();
  eval_cmd->add_option("--model", model_path, "toy denoiser checkpoint")
      ->required();

  CLI::App* inspect = app.add_subcommand(
      "inspect", "print a sample's pose, mask statistics and conditions");
  add_global_flags(inspect, g_inspect);
  inspect->add_option("--dataset", dataset_dir, "curated dataset directory")
      ->required();
  inspect->add_option("--object", inspect_object, "object id")->required();
  inspect->add_option("--frame", inspect_frame, "frame id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", app.help().c_str());
    return fail_usage(e.what());
  }

  ConfigPtr cfg(dcur_config_create());
  if (!cfg) return fail(DCUR_ERR_INTERNAL);

  auto run = [&](const GlobalOpts& g, bool need_out,
                 const std::function<dcur_status(const char*)>& body) -> int {
    dcur_status rc = apply_config(g, cfg.get());
    if (rc != DCUR_OK) return fail(rc);
    if (need_out && g.out_dir.empty()) {
      return fail_usage("--out is required for this command");
    }
    rc = body(g.out_dir.c_str());
    return rc == DCUR_OK ? 0 : fail(rc);
  };

  if (*synth) {
    return run(g_synth, true, [&](const char* out) {
      return dcur_run_synth(cfg.get(), out);
    });
  }
  if (*curate) {
    return run(g_curate, true, [&](const char* out) {
      return dcur_run_curate(cfg.get(), manifest_path.c_str(), out);
    });
  }
  if (*embed) {
    return run(g_embed, true, [&](const char* out) {
      return dcur_run_embed(cfg.get(), dataset_dir.c_str(), out);
    });
  }
  if (*train) {
    return run(g_train, true, [&](const char* out) {
      return dcur_run_train_toy(cfg.get(), dataset_dir.c_str(), out);
    });
  }
  if (*eval_cmd) {
    return run(g_eval, true, [&](const char* out) {
      char* report = nullptr;
      const dcur_status rc = dcur_run_eval(cfg.get(), dataset_dir.c_str(),
                                           model_path.c_str(), out, &report);
      if (rc == DCUR_OK && report) std::printf("%s", report);
      CString holder(report);
      return rc;
    });
  }
  if (*inspect) {
    dcur_status rc = apply_config(g_inspect, cfg.get());
    if (rc != DCUR_OK) return fail(rc);
    char* json = nullptr;
    rc = dcur_inspect_sample(dataset_dir.c_str(), inspect_object.c_str(),
                             inspect_frame.c_str(), &json);
    if (rc != DCUR_OK) return fail(rc);
    CString holder(json);
    std::printf("%s\n", json);
    return 0;
  }
  return fail_usage("no command given");
}
