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

#include "pipelab/trace_export.h"

#include <json.hpp>

namespace pipelab {

void WriteChromeTrace(const Schedule& sched, const Timeline& timeline, std::ostream& os) {
  const double us_per_tick = timeline.seconds_per_tick * 1e6;
  nlohmann::json events = nlohmann::json::array();
  for (int64_t st = 0; st < sched.num_stages(); ++st) {
    events.push_back({{"name", "process_name"},
                      {"ph", "M"},
                      {"pid", st},
                      {"args", {{"name", "stage " + std::to_string(st)}}}});
  }
  for (const Task& t : sched.tasks) {
    int tid = 0;
    if (t.kind == TaskKind::kSend) tid = 1;
    if (t.kind == TaskKind::kRecv) tid = 2;
    const Ticks start = timeline.start.at(t.id);
    const Ticks end = timeline.end.at(t.id);
    events.push_back({{"name", t.Label()},
                      {"cat", TaskKindName(t.kind)},
                      {"ph", "X"},
                      {"pid", t.stage},
                      {"tid", tid},
                      {"ts", static_cast<double>(start) * us_per_tick},
                      {"dur", static_cast<double>(end - start) * us_per_tick},
                      {"args",
                       {{"id", t.id},
                        {"microbatch", t.micro_batch},
                        {"layer", t.layer},
                        {"start_ticks", start},
                        {"end_ticks", end}}}});
  }
  nlohmann::json doc = {{"traceEvents", events}, {"displayTimeUnit", "ms"}};
  os << doc.dump(1) << '\n';
}

void WriteTimelineCsv(const Schedule& sched, const Timeline& timeline, std::ostream& os) {
  os << "task_id,stage,kind,component,microbatch,layer,start,end\n";
  for (const Task& t : sched.tasks) {
    os << t.id << ',' << t.stage << ',' << TaskKindName(t.kind) << ','
       << (t.is_comm() ? BoundaryKindName(t.boundary) : ComponentName(t.component)) << ','
       << t.micro_batch << ',' << t.layer << ',' << timeline.start.at(t.id) << ','
       << timeline.end.at(t.id) << '\n';
  }
}

}  // namespace pipelab
