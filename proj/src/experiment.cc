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

#include "pipelab/experiment.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pipelab/model.h"
#include "pipelab/schedule_gen.h"
#include "pipelab/toy_runtime.h"
#include "pipelab/trace_export.h"

namespace pipelab {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& AllowedKeys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model",
       {"layers", "hidden", "heads", "micro_batch", "seq_length", "micro_batches", "pipeline",
        "sp"}},
      {"run",
       {"mode", "methods", "unit_times", "unit_comm", "overlap", "recompute",
        "qkv_optimization", "tolerance", "output", "trace"}},
      {"device",
       {"preset", "compute_rate", "link_bandwidth", "link_latency", "bytes_per_element"}},
      {"sweep", {"seq_length", "pipeline", "micro_batches", "layers", "token_budget"}},
      {"overlap", {"min_seq", "max_seq"}},
  };
  return keys;
}

std::vector<std::string> Split(const std::string& text) {
  std::string t = text;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream is(t);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

int64_t ToInt(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("expected an integer for " + key + ": '" + v + "'");
  }
}

double ToDouble(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("expected a number for " + key + ": '" + v + "'");
  }
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true or false for " + key + ": '" + v + "'");
}

std::vector<int64_t> ToInts(const std::string& key, const std::string& v) {
  std::vector<int64_t> out;
  for (const std::string& w : Split(v)) out.push_back(ToInt(key, w));
  if (out.empty()) throw ConfigError("sweep axis " + key + " is empty");
  return out;
}

std::string Join(const std::vector<int64_t>& v) {
  std::string out;
  for (size_t k = 0; k < v.size(); ++k) {
    if (k) out += ';';
    out += std::to_string(v[k]);
  }
  return out;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string TraceName(Method m, const ModelConfig& c) {
  return std::string(MethodName(m)) + "_L" + std::to_string(c.num_layers) + "_p" +
         std::to_string(c.pipeline_size) + "_m" + std::to_string(c.num_micro_batches) + "_s" +
         std::to_string(c.seq_length) + ".json";
}

Method Resolve(const ExperimentConfig& cfg, Method m) {
  return cfg.recompute && m == Method::kHelixTwoFold ? Method::kHelixTwoFoldRecompute : m;
}

}  // namespace

ExperimentConfig ParseConfig(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c;
  bool have_methods = false;
  for (const auto& [section, body] : tree) {
    auto allowed = AllowedKeys().find(section);
    if (allowed == AllowedKeys().end()) {
      throw ConfigError(body.empty() ? "key outside a section: " + section
                                     : "unknown section: " + section);
    }
    for (const auto& [key, node] : body) {
      if (!allowed->second.count(key)) throw ConfigError("unknown key " + section + "." + key);
      const std::string v = node.get_value<std::string>();
      const std::string name = section + "." + key;
      if (section == "model") {
        const int64_t x = ToInt(name, v);
        if (key == "layers") c.model.num_layers = x;
        if (key == "hidden") c.model.hidden_size = x;
        if (key == "heads") c.model.num_heads = x;
        if (key == "micro_batch") c.model.micro_batch_size = x;
        if (key == "seq_length") c.model.seq_length = x;
        if (key == "micro_batches") c.model.num_micro_batches = x;
        if (key == "pipeline") c.model.pipeline_size = x;
        if (key == "sp") c.model.sp_size = x;
      } else if (section == "run") {
        if (key == "mode") {
          if (v == "unit") {
            c.mode = TimeMode::kUnit;
          } else if (v == "flops") {
            c.mode = TimeMode::kFlops;
          } else {
            throw ConfigError("run.mode must be unit or flops");
          }
        } else if (key == "methods") {
          have_methods = true;
          for (const std::string& w : Split(v)) c.methods.push_back(ParseMethod(w));
        } else if (key == "unit_times") {
          const std::vector<std::string> w = Split(v);
          if (w.size() != 3) throw ConfigError("run.unit_times needs three values");
          c.t_pre = ToInt(name, w[0]);
          c.t_attn = ToInt(name, w[1]);
          c.t_post = ToInt(name, w[2]);
        } else if (key == "unit_comm") {
          c.t_comm = ToInt(name, v);
        } else if (key == "overlap") {
          c.overlap = ToBool(name, v);
        } else if (key == "recompute") {
          c.recompute = ToBool(name, v);
        } else if (key == "qkv_optimization") {
          c.qkv_optimization = ToBool(name, v);
        } else if (key == "tolerance") {
          c.tolerance = ToDouble(name, v);
        } else if (key == "output") {
          c.output_dir = v;
        } else if (key == "trace") {
          c.trace = ToBool(name, v);
        }
      } else if (section == "device") {
        if (key == "preset") {
          if (v == "h20") {
            c.device = DeviceSpec::H20Like();
          } else if (v == "a800") {
            c.device = DeviceSpec::A800Like();
          } else {
            throw ConfigError("device.preset must be h20 or a800");
          }
        }
      } else if (section == "sweep") {
        if (key == "token_budget") {
          c.sweep.token_budget = ToInt(name, v);
        } else {
          std::vector<int64_t> axis = ToInts(name, v);
          if (key == "seq_length") c.sweep.seq_length = axis;
          if (key == "pipeline") c.sweep.pipeline = axis;
          if (key == "micro_batches") c.sweep.micro_batches = axis;
          if (key == "layers") c.sweep.layers = axis;
        }
      } else if (section == "overlap") {
        if (key == "min_seq") c.overlap_min_seq = ToInt(name, v);
        if (key == "max_seq") c.overlap_max_seq = ToInt(name, v);
      }
    }
  }
  // Explicit device numbers override the preset regardless of key order.
  if (auto dev = tree.get_child_optional("device")) {
    if (auto v = dev->get_optional<std::string>("compute_rate")) {
      c.device.compute_rate = ToDouble("device.compute_rate", *v);
    }
    if (auto v = dev->get_optional<std::string>("link_bandwidth")) {
      c.device.link_bandwidth = ToDouble("device.link_bandwidth", *v);
    }
    if (auto v = dev->get_optional<std::string>("link_latency")) {
      c.device.link_latency = ToDouble("device.link_latency", *v);
    }
    if (auto v = dev->get_optional<std::string>("bytes_per_element")) {
      c.device.bytes_per_element = ToInt("device.bytes_per_element", *v);
    }
  }
  if (!have_methods || c.methods.empty()) throw ConfigError("method list is empty");
  c.model.Validate();
  c.device.Validate();
  if (c.t_pre < 0 || c.t_attn < 0 || c.t_post < 0 || c.t_comm < 0) {
    throw ConfigError("unit times must be non-negative");
  }
  if (c.tolerance < 0) throw ConfigError("tolerance must be non-negative");
  if (c.overlap_min_seq < 1 || c.overlap_max_seq < c.overlap_min_seq) {
    throw ConfigError("overlap range must satisfy 1 <= min_seq <= max_seq");
  }
  for (const auto* axis : {&c.sweep.seq_length, &c.sweep.pipeline, &c.sweep.micro_batches,
                           &c.sweep.layers}) {
    for (int64_t x : *axis) {
      if (x <= 0) throw ConfigError("sweep values must be positive");
    }
  }
  if (c.sweep.token_budget < 0) throw ConfigError("token_budget must be non-negative");
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::vector<ModelConfig> SweepPoints(const ExperimentConfig& config, bool use_axes) {
  const ModelConfig& base = config.model;
  auto axis = [&](const std::vector<int64_t>& v, int64_t dflt) {
    return use_axes && !v.empty() ? v : std::vector<int64_t>{dflt};
  };
  std::vector<ModelConfig> out;
  for (int64_t L : axis(config.sweep.layers, base.num_layers)) {
    for (int64_t p : axis(config.sweep.pipeline, base.pipeline_size)) {
      for (int64_t m : axis(config.sweep.micro_batches, base.num_micro_batches)) {
        for (int64_t s : axis(config.sweep.seq_length, base.seq_length)) {
          ModelConfig c = base;
          c.num_layers = L;
          c.pipeline_size = p;
          c.num_micro_batches = m;
          c.seq_length = s;
          if (use_axes && config.sweep.token_budget > 0) {
            c.num_micro_batches = config.sweep.token_budget / (c.micro_batch_size * s);
            if (c.num_micro_batches < 1) {
              throw ConfigError("token_budget smaller than one micro batch at s=" +
                                std::to_string(s));
            }
          }
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

DurationTable Durations(const ExperimentConfig& config, const ModelConfig& model,
                        bool qkv_optimized) {
  if (config.mode == TimeMode::kUnit) {
    return DurationTable::FromUnits(config.t_pre, config.t_attn, config.t_post, config.t_comm);
  }
  return DurationTable::FromFlops(ComponentFlops(model, qkv_optimized),
                                  ComputeCommVolumes(model, qkv_optimized), config.device,
                                  model.sp_size);
}

RunSummary RunPoints(const ExperimentConfig& config, const std::vector<ModelConfig>& points) {
  struct Job {
    Method method;
    const ModelConfig* model;
  };
  std::vector<Job> jobs;
  for (const ModelConfig& pt : points) {
    for (Method m : config.methods) jobs.push_back({Resolve(config, m), &pt});
  }
  if (config.trace) std::filesystem::create_directories(config.output_dir);

  std::vector<PointResult> rows(jobs.size());
  std::vector<std::string> errors(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t k = 0; k < jobs.size(); ++k) {
    PointResult& r = rows[k];
    r.method = jobs[k].method;
    r.model = *jobs[k].model;
    try {
      GenOptions opts;
      opts.qkv_optimized = config.qkv_optimization;
      Schedule sched;
      try {
        sched = GenerateSchedule(r.method, r.model, opts);
      } catch (const std::exception& e) {
        r.feasible = false;
        r.note = e.what();
        continue;
      }
      const DurationTable dur = Durations(config, r.model, sched.qkv_optimized);
      CommModel comm;
      comm.enabled = config.overlap;
      comm.bytes_per_element = config.device.bytes_per_element;
      const SimResult sim = Simulate(sched, dur, comm);
      r.metrics = sim.metrics;
      r.seconds_per_tick = sim.timeline.seconds_per_tick;
      r.bubble_checked = !config.overlap;
      r.report = Compare(Predict(r.method, r.model, dur), sim.metrics, config.tolerance,
                         r.bubble_checked);
      if (config.trace) {
        r.trace_file = (std::filesystem::path(config.output_dir) / TraceName(r.method, r.model))
                           .string();
        std::ofstream os(r.trace_file);
        WriteChromeTrace(sched, sim.timeline, os);
        if (!os) throw std::runtime_error("cannot write " + r.trace_file);
        const auto csv_path = std::filesystem::path(r.trace_file).replace_extension(".csv");
        std::ofstream csv(csv_path);
        WriteTimelineCsv(sched, sim.timeline, csv);
        if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
      }
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }
  RunSummary summary;
  for (PointResult& r : rows) {
    if (r.feasible && !r.report.pass) summary.all_pass = false;
    summary.rows.push_back(std::move(r));
  }
  return summary;
}

void WriteMetricsCsv(const RunSummary& summary, std::ostream& os) {
  os << "method,layers,p,m,s,status,makespan,makespan_seconds,bubble_fraction,"
        "bubble_per_stage,peak_activation_per_stage,peak_bytes_per_stage,analytic\n";
  for (const PointResult& r : summary.rows) {
    os << MethodName(r.method) << ',' << r.model.num_layers << ',' << r.model.pipeline_size
       << ',' << r.model.num_micro_batches << ',' << r.model.seq_length << ',';
    if (!r.feasible) {
      os << "infeasible,,,,,,,skipped\n";
      continue;
    }
    char secs[64];
    std::snprintf(secs, sizeof secs, "%.9g",
                  static_cast<double>(r.metrics.makespan) * r.seconds_per_tick);
    os << "ok," << r.metrics.makespan << ',' << secs << ','
       << Fixed(r.metrics.bubble_fraction, 6) << ',' << Join(r.metrics.per_stage_bubble) << ','
       << Join(r.metrics.per_stage_peak_activation) << ','
       << Join(r.metrics.per_stage_peak_bytes) << ',' << (r.report.pass ? "pass" : "fail")
       << '\n';
  }
}

void WriteReport(const RunSummary& summary, std::ostream& os) {
  for (const PointResult& r : summary.rows) {
    os << MethodName(r.method) << " L=" << r.model.num_layers << " p=" << r.model.pipeline_size
       << " m=" << r.model.num_micro_batches << " s=" << r.model.seq_length << ": ";
    if (!r.feasible) {
      os << "infeasible (" << r.note << ")\n";
      continue;
    }
    os << "makespan " << r.metrics.makespan << ", bubble fraction "
       << Fixed(r.metrics.bubble_fraction, 4) << ", analytic "
       << (r.report.pass ? "PASS" : "FAIL");
    if (!r.bubble_checked) os << " (memory only)";
    if (!r.report.pass) os << ": " << r.report.detail;
    os << '\n';
  }
  os << (summary.all_pass ? "all comparisons passed" : "comparison failures") << '\n';
}

OverlapThreshold FindOverlapThreshold(const ModelConfig& base, const DeviceSpec& device,
                                      bool qkv_optimized, int64_t lo, int64_t hi) {
  if (lo < 1 || hi < lo) throw ConfigError("bad sequence range");
  auto eval = [&](int64_t s, Ticks* attn, Ticks* comm) {
    ModelConfig c = base;
    c.seq_length = s;
    const DurationTable t = DurationTable::FromFlops(
        ComponentFlops(c, qkv_optimized), ComputeCommVolumes(c, qkv_optimized), device,
        c.sp_size);
    *attn = t.Compute(Component::kAttn, PassKind::kFwd);
    *comm = t.Comm(BoundaryKind::kHelixPreToAttn);
    return *attn >= *comm;
  };
  OverlapThreshold r;
  Ticks a = 0, c = 0;
  if (!eval(hi, &a, &c)) return r;
  // Attention grows quadratically in s against a linear transfer, so the
  // predicate flips once on the range of interest.
  while (lo < hi) {
    const int64_t mid = lo + (hi - lo) / 2;
    if (eval(mid, &a, &c)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  r.found = true;
  r.seq_length = lo;
  eval(lo, &r.attn_ticks, &r.comm_ticks);
  return r;
}

std::vector<RuntimeCheckRow> RuntimeCheck(const ExperimentConfig& config, uint64_t seed) {
  const ModelConfig& cfg = config.model;
  const ToyModel model = ToyModel::Random(cfg, seed);
  const std::vector<Tensor> inputs = RandomInputs(cfg, seed);
  const TrainStepResult ref = SequentialTrainStep(model, inputs);
  std::vector<RuntimeCheckRow> rows;
  for (Method m0 : config.methods) {
    RuntimeCheckRow row;
    row.method = Resolve(config, m0);
    try {
      GenOptions opts;
      opts.qkv_optimized = config.qkv_optimization;
      const Schedule sched = GenerateSchedule(row.method, cfg, opts);
      const ValidationReport v = ValidateSchedule(sched);
      if (!v.ok) throw std::runtime_error("invalid schedule: " + v.violation);
      std::ostringstream detail;
      row.ok = true;
      for (RuntimeMode mode : {RuntimeMode::kReplay, RuntimeMode::kThreaded}) {
        const RuntimeResult res = ExecuteSchedule(sched, model, inputs, {mode});
        bool same = res.step.losses == ref.losses;
        for (size_t l = 0; same && l < ref.grads.size(); ++l) {
          const auto a = res.step.grads[l].All();
          const auto b = ref.grads[l].All();
          for (size_t k = 0; k < a.size(); ++k) same = same && BitwiseEqual(*a[k], *b[k]);
        }
        row.ok = row.ok && same;
        detail << (mode == RuntimeMode::kReplay ? "replay " : "threaded ")
               << (same ? "bitwise equal" : "MISMATCH") << "; ";
      }
      row.detail = detail.str();
    } catch (const std::exception& e) {
      row.ok = false;
      row.detail = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pipelab
