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

#ifndef PIPELAB_TRACE_EXPORT_H_
#define PIPELAB_TRACE_EXPORT_H_

#include <ostream>

#include "pipelab/schedule.h"
#include "pipelab/sim_engine.h"

namespace pipelab {

// Chrome trace-event JSON: one complete ("X") event per task, pid = stage,
// tid 0 = compute, 1 = outbound sends, 2 = inbound receives, times in us.
void WriteChromeTrace(const Schedule& sched, const Timeline& timeline, std::ostream& os);

// Columns: task_id,stage,kind,component,microbatch,layer,start,end (ticks).
void WriteTimelineCsv(const Schedule& sched, const Timeline& timeline, std::ostream& os);

}  // namespace pipelab

#endif  // PIPELAB_TRACE_EXPORT_H_
