/**
 * Copyright 2026 The pipelab Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// pipelab command line: simulate, validate, runtime-check, sweep,
// overlap-threshold. Exit codes: 0 ok, 1 comparison or check failure,
// 2 malformed config or usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "pipelab/experiment.h"
#include "pipelab/schedule_gen.h"
#include "pipelab/schedule_io.h"

namespace {

using namespace pipelab;

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  std::string out;
  std::string methods;
  double tolerance = -1.0;
};

void AddCommon(CLI::App* app, Common* c) {
  app->add_option("-c,--config", c->config, "experiment config (INI)")->required();
  app->add_option("-o,--out", c->out, "output directory (overrides run.output)");
  app->add_option("-m,--methods", c->methods, "comma-separated method filter");
  app->add_option("-t,--tolerance", c->tolerance, "relative tolerance override");
}

ExperimentConfig Load(const Common& c) {
  ExperimentConfig cfg = LoadConfig(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.tolerance >= 0) cfg.tolerance = c.tolerance;
  if (!c.methods.empty()) {
    std::vector<Method> keep;
    std::string names = c.methods;
    for (char& ch : names) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream is(names);
    for (std::string w; is >> w;) {
      const Method m = ParseMethod(w);
      for (Method have : cfg.methods) {
        if (have == m) keep.push_back(m);
      }
    }
    if (keep.empty()) throw ConfigError("method filter leaves no methods");
    cfg.methods = keep;
  }
  return cfg;
}

uint64_t Seed() {
  const char* env = std::getenv("PIPELAB_SEED");
  if (!env || !*env) return 0;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw ConfigError(std::string("PIPELAB_SEED is not an integer: ") + env);
  }
}

int Simulate(const Common& c, bool sweep) {
  const ExperimentConfig cfg = Load(c);
  const RunSummary summary = RunPoints(cfg, SweepPoints(cfg, sweep));
  std::filesystem::create_directories(cfg.output_dir);
  const auto dir = std::filesystem::path(cfg.output_dir);
  {
    std::ofstream csv(dir / "metrics.csv");
    WriteMetricsCsv(summary, csv);
  }
  {
    std::ofstream rep(dir / "report.txt");
    WriteReport(summary, rep);
  }
  WriteReport(summary, std::cout);
  std::cout << "wrote " << (dir / "metrics.csv").string() << '\n';
  return summary.all_pass ? 0 : kExitFail;
}

int Validate(const Common& c, const std::string& schedule_file) {
  if (!schedule_file.empty()) {
    std::ifstream in(schedule_file);
    if (!in) throw ConfigError("cannot read schedule " + schedule_file);
    const Schedule sched = ReadSchedule(in);
    const ValidationReport v = ValidateSchedule(sched);
    std::cout << schedule_file << ": " << (v.ok ? "valid" : "INVALID: " + v.violation) << '\n';
    return v.ok ? 0 : kExitFail;
  }
  const ExperimentConfig cfg = Load(c);
  bool ok = true;
  for (Method m : cfg.methods) {
    if (cfg.recompute && m == Method::kHelixTwoFold) m = Method::kHelixTwoFoldRecompute;
    GenOptions opts;
    opts.qkv_optimized = cfg.qkv_optimization;
    try {
      const Schedule sched = GenerateSchedule(m, cfg.model, opts);
      const ValidationReport v = ValidateSchedule(sched);
      std::cout << MethodName(m) << ": " << (v.ok ? "valid" : "INVALID: " + v.violation)
                << " (" << sched.tasks.size() << " tasks)\n";
      ok = ok && v.ok;
      if (!c.out.empty() && v.ok) {
        std::filesystem::create_directories(c.out);
        std::ofstream os(std::filesystem::path(c.out) /
                         (std::string(MethodName(m)) + ".schedule"));
        WriteSchedule(sched, os);
      }
    } catch (const ScheduleError& e) {
      std::cout << MethodName(m) << ": cannot generate: " << e.what() << '\n';
      ok = false;
    }
  }
  return ok ? 0 : kExitFail;
}

int RuntimeCheckCmd(const Common& c) {
  const ExperimentConfig cfg = Load(c);
  bool ok = true;
  for (const RuntimeCheckRow& r : RuntimeCheck(cfg, Seed())) {
    std::cout << MethodName(r.method) << ": " << (r.ok ? "PASS" : "FAIL") << " (" << r.detail
              << ")\n";
    ok = ok && r.ok;
  }
  return ok ? 0 : kExitFail;
}

int OverlapCmd(const Common& c) {
  const ExperimentConfig cfg = Load(c);
  if (cfg.mode != TimeMode::kFlops) throw ConfigError("overlap-threshold needs run.mode = flops");
  const OverlapThreshold t = FindOverlapThreshold(cfg.model, cfg.device, cfg.qkv_optimization,
                                                  cfg.overlap_min_seq, cfg.overlap_max_seq);
  if (!t.found) {
    std::cout << "no crossover in s = [" << cfg.overlap_min_seq << ", " << cfg.overlap_max_seq
              << "]: transfers stay longer than attention\n";
    return 0;
  }
  std::cout << "crossover s = " << t.seq_length << " (attention forward " << t.attn_ticks
            << " ticks >= pre->attention transfer " << t.comm_ticks << " ticks)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipelab: pipeline schedule simulator and toy runtime"};
  app.require_subcommand(1);

  Common sim, swp, val, rt, ovl;
  std::string schedule_file;
  CLI::App* c_sim = app.add_subcommand("simulate", "simulate the base config");
  AddCommon(c_sim, &sim);
  CLI::App* c_swp = app.add_subcommand("sweep", "simulate every sweep point");
  AddCommon(c_swp, &swp);
  CLI::App* c_val = app.add_subcommand("validate", "generate and validate schedules");
  c_val->add_option("-c,--config", val.config, "experiment config (INI)");
  c_val->add_option("-o,--out", val.out, "write schedule files here");
  c_val->add_option("-m,--methods", val.methods, "comma-separated method filter");
  c_val->add_option("-s,--schedule", schedule_file, "validate a schedule file instead");
  CLI::App* c_rt = app.add_subcommand("runtime-check", "run schedules on real tensors");
  AddCommon(c_rt, &rt);
  CLI::App* c_ovl = app.add_subcommand("overlap-threshold", "attention/transfer crossover");
  AddCommon(c_ovl, &ovl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*c_sim) return Simulate(sim, false);
    if (*c_swp) return Simulate(swp, true);
    if (*c_val) {
      if (val.config.empty() && schedule_file.empty()) {
        throw ConfigError("validate needs --config or --schedule");
      }
      return Validate(val, schedule_file);
    }
    if (*c_rt) return RuntimeCheckCmd(rt);
    if (*c_ovl) return OverlapCmd(ovl);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitConfig;
}
