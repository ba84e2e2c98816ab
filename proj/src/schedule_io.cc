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

#include "pipelab/schedule_io.h"

#include <map>
#include <sstream>

namespace pipelab {

namespace {

std::string JoinIds(const std::vector<TaskId>& ids) {
  if (ids.empty()) return "-";
  std::string out;
  for (size_t k = 0; k < ids.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(ids[k]);
  }
  return out;
}

std::vector<TaskId> SplitIds(const std::string& text) {
  std::vector<TaskId> ids;
  if (text == "-") return ids;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) ids.push_back(static_cast<TaskId>(std::stol(tok)));
  return ids;
}

std::map<std::string, std::string> Fields(std::istringstream& is) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got " + tok);
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

const std::string& Need(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("missing field " + key);
  return it->second;
}

}  // namespace

void WriteSchedule(const Schedule& s, std::ostream& os) {
  const ModelConfig& c = s.cfg;
  os << "pipelab-schedule " << kScheduleFormatVersion << '\n';
  os << "method " << MethodName(s.method) << '\n';
  os << "config L=" << c.num_layers << " h=" << c.hidden_size << " heads=" << c.num_heads
     << " b=" << c.micro_batch_size << " s=" << c.seq_length << " m=" << c.num_micro_batches
     << " p=" << c.pipeline_size << " sp=" << c.sp_size << '\n';
  os << "flags qkv_optimized=" << s.qkv_optimized << " recomputed=" << s.recomputed << '\n';
  for (const Task& t : s.tasks) {
    os << "task " << t.id << " stage=" << t.stage << " kind=" << TaskKindName(t.kind)
       << " comp=" << ComponentName(t.component) << " i=" << t.micro_batch << " l=" << t.layer
       << " n=" << t.num_layers << " mem=" << t.mem_delta << " deps=" << JoinIds(t.deps)
       << " ctrl=" << JoinIds(t.control_deps);
    if (t.is_comm()) {
      os << " boundary=" << BoundaryKindName(t.boundary) << " volume=" << t.volume
         << " grad=" << t.gradient << " peer=" << t.peer;
    }
    os << '\n';
  }
  for (int64_t st = 0; st < s.num_stages(); ++st) {
    os << "order " << st << ' ' << JoinIds(s.stage_order[st]) << '\n';
  }
}

std::string ScheduleToString(const Schedule& sched) {
  std::ostringstream os;
  WriteSchedule(sched, os);
  return os.str();
}

Schedule ReadSchedule(std::istream& is) {
  Schedule s;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty schedule");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "pipelab-schedule") throw ConfigError("not a schedule file");
    if (version != kScheduleFormatVersion) {
      throw ConfigError("unsupported schedule version " + std::to_string(version));
    }
  }
  try {
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string head;
      ls >> head;
      if (head == "method") {
        std::string name;
        ls >> name;
        s.method = ParseMethod(name);
      } else if (head == "config") {
        const auto kv = Fields(ls);
        ModelConfig& c = s.cfg;
        c.num_layers = std::stoll(Need(kv, "L"));
        c.hidden_size = std::stoll(Need(kv, "h"));
        c.num_heads = std::stoll(Need(kv, "heads"));
        c.micro_batch_size = std::stoll(Need(kv, "b"));
        c.seq_length = std::stoll(Need(kv, "s"));
        c.num_micro_batches = std::stoll(Need(kv, "m"));
        c.pipeline_size = std::stoll(Need(kv, "p"));
        c.sp_size = std::stoll(Need(kv, "sp"));
        s.stage_order.resize(c.pipeline_size);
      } else if (head == "flags") {
        const auto kv = Fields(ls);
        s.qkv_optimized = Need(kv, "qkv_optimized") == "1";
        s.recomputed = Need(kv, "recomputed") == "1";
      } else if (head == "task") {
        Task t;
        ls >> t.id;
        const auto kv = Fields(ls);
        t.stage = std::stoll(Need(kv, "stage"));
        t.kind = ParseTaskKind(Need(kv, "kind"));
        t.component = ParseComponent(Need(kv, "comp"));
        t.micro_batch = std::stoll(Need(kv, "i"));
        t.layer = std::stoll(Need(kv, "l"));
        t.num_layers = std::stoll(Need(kv, "n"));
        t.mem_delta = std::stoll(Need(kv, "mem"));
        t.deps = SplitIds(Need(kv, "deps"));
        t.control_deps = SplitIds(Need(kv, "ctrl"));
        if (t.is_comm()) {
          t.boundary = ParseBoundaryKind(Need(kv, "boundary"));
          t.volume = std::stoll(Need(kv, "volume"));
          t.gradient = Need(kv, "grad") == "1";
          t.peer = static_cast<TaskId>(std::stol(Need(kv, "peer")));
        }
        if (t.id != static_cast<TaskId>(s.tasks.size())) throw ConfigError("task ids out of sequence");
        s.tasks.push_back(std::move(t));
      } else if (head == "order") {
        size_t st = 0;
        std::string ids;
        ls >> st >> ids;
        if (st >= s.stage_order.size()) throw ConfigError("order for unknown stage");
        s.stage_order[st] = SplitIds(ids);
      } else {
        throw ConfigError("unknown record " + head);
      }
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(std::string("malformed schedule: ") + e.what());
  }
  return s;
}

Schedule ScheduleFromString(const std::string& text) {
  std::istringstream is(text);
  return ReadSchedule(is);
}

}  // namespace pipelab
