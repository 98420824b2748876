// Command-line front end: train, eval, compare, plot, serve.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "hap/hap.hpp"

namespace fs = std::filesystem;
using namespace hap;

namespace {

service::LiveServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int train(const std::string& spec_path, const std::string& out, const std::vector<std::uint64_t>& seeds, bool quiet) {
  auto spec = harness::load_spec(spec_path);
  if (!seeds.empty()) spec.run.seeds = seeds;
  for (auto seed : spec.run.seeds) {
    const auto dir = (fs::path(out) / ("seed_" + std::to_string(seed))).string();
    fs::create_directories(dir);
    auto progress = [&](const harness::EvalPoint& e) {
      if (quiet) return;
      std::printf("seed %llu step %lld success", static_cast<unsigned long long>(seed), static_cast<long long>(e.step));
      for (double s : e.success) std::printf(" %.2f", s);
      std::printf("\n");
      std::fflush(stdout);
    };
    auto r = harness::run_experiment(spec, seed, dir, progress);
    auto all = r.steps_to_all(spec.run.threshold);
    std::printf("seed %llu done: %lld steps, %lld episodes, steps_to_all=%s, %.1fs -> %s\n",
                static_cast<unsigned long long>(seed), static_cast<long long>(r.steps),
                static_cast<long long>(r.episodes), all ? std::to_string(*all).c_str() : "-", r.wall_seconds,
                dir.c_str());
  }
  return 0;
}

int eval(const std::string& dir, int episodes) {
  const auto spec = harness::load_spec(dir + "/config.resolved");
  const auto tasks = envs::make_environment(spec.env)->tasks();
  const auto success = harness::evaluate_sweep(dir, episodes);
  std::printf("task,success\n");
  for (std::size_t t = 0; t < success.size(); ++t) std::printf("%s,%s\n", tasks.name(t).c_str(), harness::fmt(success[t]).c_str());
  return 0;
}

/// Expands a directory holding seed_* subdirectories into those run directories.
std::vector<std::string> run_dirs(const std::string& path) {
  if (fs::exists(fs::path(path) / "metrics.csv")) return {path};
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_directory() && fs::exists(e.path() / "metrics.csv")) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw FormatError(path + ": no run directories");
  return out;
}

std::vector<harness::RunCurve> load_groups(const std::vector<std::string>& paths) {
  std::vector<harness::RunCurve> curves;
  for (const auto& p : paths)
    for (const auto& d : run_dirs(p)) {
      auto c = harness::load_curve(d);
      c.label = fs::path(p).filename().string();
      if (c.label.empty()) c.label = c.teacher;
      curves.push_back(std::move(c));
    }
  return curves;
}

int compare(const std::vector<std::string>& paths, const std::string& svg) {
  auto curves = load_groups(paths);
  std::cout << harness::compare_report(curves);
  if (!svg.empty()) harness::write_text(svg, harness::render_svg(harness::compare_chart(curves)));
  return 0;
}

int plot(const std::string& dir) {
  for (const auto& f : harness::emit_plots(dir)) std::printf("%s\n", f.c_str());
  return 0;
}

int serve(service::ServeOptions opts) {
  service::LiveServer server;
  if (!opts.ui_dir.empty()) server.mount_ui(opts.ui_dir);
  const int port = server.bind(opts.host, opts.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("serving on http://%s:%d\n", opts.host.c_str(), port);
  std::fflush(stdout);
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial curriculum laboratory"};
  app.require_subcommand(1);

  std::string spec_path, out = "runs/out";
  std::vector<std::uint64_t> seeds;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Run every seed of an experiment spec");
  train_cmd->add_option("--spec", spec_path, "Config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out, "Output directory (one seed_<n> subdirectory per seed)");
  train_cmd->add_option("--seeds", seeds, "Override run.seeds");
  train_cmd->add_flag("--quiet", quiet, "Only print the per-seed summary");

  std::string run_dir;
  int episodes = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Greedy evaluation of a run's final checkpoint");
  eval_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--episodes", episodes, "Episodes per task (default: run.eval_episodes)");

  std::vector<std::string> runs;
  std::string svg;
  auto* compare_cmd = app.add_subcommand("compare", "Compare groups of runs (a run dir or a dir of seed_* runs)");
  compare_cmd->add_option("--runs", runs, "Run groups")->required()->check(CLI::ExistingDirectory);
  compare_cmd->add_option("--svg", svg, "Also write a mean-success overlay chart");

  auto* plot_cmd = app.add_subcommand("plot", "Write SVG charts into a run directory");
  plot_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  service::ServeOptions serve_opts;
  auto* serve_cmd = app.add_subcommand("serve", "Start the live session server");
  auto* host_opt = serve_cmd->add_option("--host", serve_opts.host, "Bind address (env HAP_HOST)");
  auto* port_opt = serve_cmd->add_option("--port", serve_opts.port, "Port, 0 = any free port (env HAP_PORT)");
  auto* ui_opt = serve_cmd->add_option("--ui-dir", serve_opts.ui_dir, "Static UI bundle to serve at / (env HAP_UI_DIR)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train_cmd) return train(spec_path, out, seeds, quiet);
    if (*eval_cmd) return eval(run_dir, episodes);
    if (*compare_cmd) return compare(runs, svg);
    if (*plot_cmd) return plot(run_dir);
    if (*serve_cmd)
      return serve(service::options_from_env(serve_opts, host_opt->count() > 0, port_opt->count() > 0,
                                             ui_opt->count() > 0));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
