// podbench: workload replay, sweeps, optimizer comparison and self-checks.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "podstore/podstore.h"

namespace {

struct Options {
  std::string backend = "mem";
  std::string dir = "podbench-store";
  std::string optimizer = "lga";
  double c_pod = 1200.0;
  int max_pod_depth = 3;
  uint32_t page_size = 1024;
  uint64_t thesaurus_bytes = 64ULL << 20;
  bool async = false;
  uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
};

ps_config to_config(const Options& o) {
  ps_config c;
  ps_config_default(&c);
  c.backend = o.backend.c_str();
  c.dir = o.dir.c_str();
  c.optimizer = o.optimizer.c_str();
  c.c_pod = o.c_pod;
  c.max_pod_depth = o.max_pod_depth;
  c.page_size = o.page_size;
  c.thesaurus_bytes = o.thesaurus_bytes;
  c.async_save = o.async ? 1 : 0;
  c.seed = o.seed;
  return c;
}

ps_format to_format(const Options& o) { return o.format == "json" ? PS_FORMAT_JSON : PS_FORMAT_CSV; }

int fail(ps_status s) {
  std::cerr << "podbench: " << ps_status_name(s) << ": " << ps_last_error() << "\n";
  return s == PS_TOO_LARGE ? 2 : 1;
}

int emit(const Options& o, char* text) {
  if (o.out.empty()) {
    std::fputs(text, stdout);
  } else {
    std::ofstream f(o.out, std::ios::binary);
    f << text;
    if (!f) {
      ps_free(text);
      std::cerr << "podbench: cannot write " << o.out << "\n";
      return 1;
    }
  }
  ps_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental pod store benchmark harness"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--backend", o.backend, "Storage backend")->check(CLI::IsMember({"mem", "dir"}));
  app.add_option("--dir", o.dir, "Store directory for the dir backend");
  app.add_option("--optimizer", o.optimizer, "Podding strategy")
      ->check(CLI::IsMember({"bundle-all", "split-all", "random", "tbh", "lga-0", "lga-1", "lga",
                             "exhaustive"}));
  app.add_option("--c-pod", o.c_pod, "Per-pod fixed cost in bytes");
  app.add_option("--max-pod-depth", o.max_pod_depth, "Maximum split depth");
  app.add_option("--page-size", o.page_size, "Memo page size")->check(CLI::PositiveNumber);
  app.add_option("--thesaurus-bytes", o.thesaurus_bytes, "Pod thesaurus capacity");
  app.add_flag("--async", o.async, "Pod on a worker thread");
  app.add_option("--seed", o.seed, "Workload seed");
  app.add_option("--out", o.out, "Write output to this file");
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

  auto* run = app.add_subcommand("run", "Replay a workload script");
  std::string script_path;
  run->add_option("script", script_path, "Workload script")->required()->check(CLI::ExistingFile);

  auto* mut = app.add_subcommand("sweep-mutation", "Mutation fraction sweep");
  double scale = 0.01;
  bool emit_scripts = false;
  mut->add_option("--scale", scale, "Strings per list relative to 100000");
  mut->add_flag("--emit-scripts", emit_scripts, "Print the generated scripts instead");

  auto* sc = app.add_subcommand("sweep-scale", "Object count sweep");
  bool small_only = false;
  sc->add_flag("--small-only", small_only, "Only the {1,2,3} x {1,2,3} variants");
  sc->add_flag("--emit-scripts", emit_scripts, "Print the generated scripts instead");

  auto* cmp = app.add_subcommand("compare", "Compare strategies on generated workloads");
  std::string strategies;
  std::string workload = "mutation";
  cmp->add_option("--strategies", strategies, "Comma separated strategies (default all)");
  cmp->add_option("--workload", workload, "mutation, scale or small")
      ->check(CLI::IsMember({"mutation", "scale", "small"}));
  cmp->add_option("--scale", scale, "Mutation sweep scale");

  app.add_subcommand("verify", "Run oracle and property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const ps_config config = to_config(o);
  char* text = nullptr;
  ps_status s = PS_OK;

  if (run->parsed()) {
    std::ifstream in(script_path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    s = ps_run_script(&config, buf.str().c_str(), to_format(o), &text);
  } else if (mut->parsed()) {
    s = emit_scripts ? ps_gen_mutation_sweep(scale, o.seed == 0 ? 1 : o.seed, &text)
                     : ps_sweep_mutation(&config, scale, to_format(o), &text);
  } else if (sc->parsed()) {
    s = emit_scripts ? ps_gen_scale_sweep(small_only ? 0 : 1, &text)
                     : ps_sweep_scale(&config, small_only ? 0 : 1, to_format(o), &text);
  } else if (cmp->parsed()) {
    s = ps_compare(&config, strategies.c_str(), workload.c_str(), scale, &text);
  } else {
    int32_t passed = 0;
    s = ps_verify(&config, &passed, &text);
    if (s == PS_OK) {
      const int rc = emit(o, text);
      return rc != 0 ? rc : (passed ? 0 : 1);
    }
  }
  if (s != PS_OK) return fail(s);
  return emit(o, text);
}
