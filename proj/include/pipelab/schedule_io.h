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

#ifndef PIPELAB_SCHEDULE_IO_H_
#define PIPELAB_SCHEDULE_IO_H_

#include <istream>
#include <ostream>
#include <string>

#include "pipelab/schedule.h"

namespace pipelab {

inline constexpr int kScheduleFormatVersion = 1;

// Line-oriented text form, one task per line. See docs/formats.md.
void WriteSchedule(const Schedule& sched, std::ostream& os);
std::string ScheduleToString(const Schedule& sched);

// Throws ConfigError on malformed input or an unsupported version.
Schedule ReadSchedule(std::istream& is);
Schedule ScheduleFromString(const std::string& text);

}  // namespace pipelab

#endif  // PIPELAB_SCHEDULE_IO_H_
