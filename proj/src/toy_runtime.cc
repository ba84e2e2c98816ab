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

#include "pipelab/toy_runtime.h"

#include <algorithm>
#include <condition_variable>
#include <exception>
#include <map>
#include <mutex>
#include <queue>
#include <thread>
#include <tuple>

#include "pipelab/sim_engine.h"

namespace pipelab {

namespace {

using Key = std::pair<int64_t, int64_t>;  // (micro batch, layer)

template <typename T>
T Take(std::map<Key, T>& m, Key key, const Task& t, const char* what) {
  auto it = m.find(key);
  if (it == m.end()) throw RuntimeError(std::string("stash miss (") + what + ") at " + t.Label());
  T v = std::move(it->second);
  m.erase(it);
  return v;
}

int64_t NumElements(const LayerStash& s) {
  return pipelab::NumElements(s.pre) + pipelab::NumElements(s.attn) +
         pipelab::NumElements(s.post);
}
int64_t NumElements(const Message& m) { return m.numel(); }
int64_t NumElements(const Tensor& t) { return t.numel(); }
int64_t NumElements(const std::pair<PreWork, PostWork>& w) {
  return pipelab::NumElements(w.first) + pipelab::NumElements(w.second);
}

template <typename T>
int64_t Sum(const std::map<Key, T>& m) {
  int64_t n = 0;
  for (const auto& [k, v] : m) n += NumElements(v);
  return n;
}

// Everything a stage keeps between tasks.
struct StageState {
  std::map<Key, LayerStash> layer;  // layer-wise chunks
  std::map<Key, std::pair<PreWork, PostWork>> work;
  std::map<Key, PreStash> pre;
  std::map<Key, AttnStash> attn;
  std::map<Key, PostStash> post;
  std::map<Key, Message> post_inputs;  // recompute mode: {ctx, x}
  std::map<Key, Tensor> regen;         // recomputed layer inputs
  std::map<Key, Tensor> seed;          // loss gradients, key (mb, L)
  std::map<TaskId, Message> outbox;

  int64_t Live() const {
    return Sum(layer) + Sum(work) + Sum(pre) + Sum(attn) + Sum(post) + Sum(post_inputs) +
           Sum(regen) + Sum(seed);
  }
};

class Executor {
 public:
  Executor(const Schedule& sched, const ToyModel& model, const std::vector<Tensor>& inputs)
      : s_(sched), model_(model), inputs_(inputs), cfg_(sched.cfg), stages_(sched.num_stages()) {
    const int64_t L = cfg_.num_layers, m = cfg_.num_micro_batches;
    if (static_cast<int64_t>(model.layers.size()) != L || model.dims.hidden != cfg_.hidden_size ||
        model.dims.seq != cfg_.seq_length || model.dims.batch != cfg_.micro_batch_size ||
        model.dims.heads != cfg_.num_heads) {
      throw RuntimeError("model dimensions do not match the schedule config");
    }
    if (static_cast<int64_t>(inputs.size()) != m) {
      throw RuntimeError("expected one input per micro batch");
    }
    for (const Tensor& x : inputs) {
      if (x.shape != std::vector<int64_t>{cfg_.seq_length * cfg_.micro_batch_size,
                                          cfg_.hidden_size}) {
        throw RuntimeError("input shape does not match the schedule config");
      }
    }
    grads_.assign(m, std::vector<LayerParams>(L, LayerParams::Zeros(cfg_.hidden_size)));
    result_.step.losses.assign(m, 0.0);
    result_.step.input_grads.assign(m, Tensor());
    result_.memory.series.assign(stages_.size(), {});
    result_.memory.peak.assign(stages_.size(), 0);
    retained_.assign(m, std::vector<int64_t>(L, 0));
  }

  void Run(const Task& t) {
    switch (t.kind) {
      case TaskKind::kSend: Send(t); break;
      case TaskKind::kRecv: break;
      default:
        if (t.component == Component::kChunk) {
          RunChunk(t);
        } else {
          RunHelix(t);
        }
    }
    if (!t.is_comm()) Audit(t.stage);
  }

  RuntimeResult Finish() {
    for (size_t st = 0; st < stages_.size(); ++st) {
      if (stages_[st].Live() != 0) {
        throw RuntimeError("activations leaked on stage " + std::to_string(st));
      }
    }
    if (!mailbox_.empty()) throw RuntimeError("undelivered messages at the end of the step");
    result_.step.grads = ReduceGrads(grads_);
    for (const auto& mb : retained_) {
      for (int64_t v : mb) {
        result_.memory.max_retained_per_layer = std::max(result_.memory.max_retained_per_layer, v);
      }
    }
    return std::move(result_);
  }

 private:
  bool Opt() const { return s_.qkv_optimized; }
  int64_t Chunk() const { return model_.mlp_chunk_rows(); }
  const LayerParams& W(int64_t l) const { return model_.layers[l]; }

  void Send(const Task& t) {
    const TaskId producer = t.deps.at(0);
    StageState& st = stages_[t.stage];
    auto it = st.outbox.find(producer);
    if (it == st.outbox.end()) throw RuntimeError("no payload to send at " + t.Label());
    Message msg = std::move(it->second);
    st.outbox.erase(it);
    if (msg.numel() != t.volume) {
      throw RuntimeError("payload volume mismatch at " + t.Label() + ": " +
                         std::to_string(msg.numel()) + " elements, expected " +
                         std::to_string(t.volume));
    }
    std::lock_guard<std::mutex> lk(mu_);
    result_.transfers.push_back({t.id, t.boundary, t.gradient, msg.numel()});
    mailbox_[t.peer] = std::move(msg);
  }

  // The payload a compute task consumes: a received message or the output of
  // a same-stage producer in the same direction.
  Message Input(const Task& t) {
    const bool backward = t.kind != TaskKind::kFwd;
    for (TaskId d : t.deps) {
      const Task& dep = s_.task(d);
      if (dep.kind == TaskKind::kRecv) {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = mailbox_.find(d);
        if (it == mailbox_.end()) throw RuntimeError("message not delivered for " + t.Label());
        Message msg = std::move(it->second);
        mailbox_.erase(it);
        return msg;
      }
      const bool dep_backward = dep.kind == TaskKind::kBwd || dep.kind == TaskKind::kBwdB;
      if (dep.kind == TaskKind::kRecomputeFwd || dep.kind == TaskKind::kBwdW) continue;
      if (dep_backward != backward) continue;
      StageState& st = stages_[t.stage];
      auto it = st.outbox.find(d);
      if (it == st.outbox.end()) throw RuntimeError("missing local input for " + t.Label());
      Message msg = std::move(it->second);
      st.outbox.erase(it);
      return msg;
    }
    throw RuntimeError("no input edge for " + t.Label());
  }

  Tensor Single(Message msg, const Task& t) {
    if (msg.tensors.size() != 1) throw RuntimeError("expected a single tensor at " + t.Label());
    return std::move(msg.tensors[0]);
  }

  void Output(const Task& t, Tensor x) {
    Message msg;
    msg.tensors.push_back(std::move(x));
    stages_[t.stage].outbox[t.id] = std::move(msg);
  }

  void FinalForward(const Task& t, const Tensor& out, bool keep_seed) {
    result_.step.losses[t.micro_batch] = Loss(out);
    if (keep_seed) stages_[t.stage].seed[{t.micro_batch, cfg_.num_layers}] = LossGrad(out);
  }

  Tensor Seed(const Task& t) {
    return Take(stages_[t.stage].seed, {t.micro_batch, cfg_.num_layers}, t, "loss gradient");
  }

  void Retain(int64_t mb, int64_t l, int64_t n) {
    std::lock_guard<std::mutex> lk(mu_);
    retained_[mb][l] += n;
  }

  void RunChunk(const Task& t) {
    StageState& st = stages_[t.stage];
    const int64_t i = t.micro_batch, first = t.layer, last = t.layer + t.num_layers;
    auto& g = grads_[i];
    switch (t.kind) {
      case TaskKind::kFwd: {
        Tensor x = first == 0 ? inputs_[i] : Single(Input(t), t);
        for (int64_t l = first; l < last; ++l) {
          LayerStash stash;
          x = LayerForward(W(l), x, model_.dims, Chunk(), &stash);
          Retain(i, l, NumElements(stash));
          st.layer[{i, l}] = std::move(stash);
        }
        if (last == cfg_.num_layers) {
          FinalForward(t, x, true);
        } else {
          Output(t, std::move(x));
        }
        break;
      }
      case TaskKind::kBwd:
      case TaskKind::kBwdB: {
        Tensor dx = last == cfg_.num_layers ? Seed(t) : Single(Input(t), t);
        for (int64_t l = last - 1; l >= first; --l) {
          LayerStash stash = Take(st.layer, {i, l}, t, "layer");
          if (t.kind == TaskKind::kBwd) {
            dx = LayerBackward(W(l), dx, std::move(stash), model_.dims, Chunk(), &g[l]);
            continue;
          }
          std::pair<PreWork, PostWork> work;
          Message m = PostBackwardB(W(l), dx, std::move(stash.post), Chunk(), &work.second);
          m = AttnBackwardB(m, std::move(stash.attn), model_.dims, false, nullptr);
          dx = PreBackwardB(W(l), m, std::move(stash.pre), false, &work.first);
          st.work[{i, l}] = std::move(work);
        }
        if (first == 0) {
          result_.step.input_grads[i] = std::move(dx);
        } else {
          Output(t, std::move(dx));
        }
        break;
      }
      case TaskKind::kBwdW:
        for (int64_t l = first; l < last; ++l) {
          auto work = Take(st.work, {i, l}, t, "weight-gradient work");
          PostBackwardW(std::move(work.second), Chunk(), &g[l]);
          PreBackwardW(std::move(work.first), false, &g[l]);
        }
        break;
      default:
        throw RuntimeError("unsupported task kind for a layer-wise chunk: " + t.Label());
    }
  }

  void RunHelix(const Task& t) {
    StageState& st = stages_[t.stage];
    const int64_t i = t.micro_batch, l = t.layer, L = cfg_.num_layers;
    const bool rc = s_.recomputed;
    const Key key{i, l};
    switch (t.kind) {
      case TaskKind::kFwd:
        if (t.component == Component::kPre) {
          const Tensor x = l == 0 ? inputs_[i] : Single(Input(t), t);
          PreStash stash;
          stages_[t.stage].outbox[t.id] = PreForward(W(l), x, Opt(), rc ? nullptr : &stash);
          if (!rc) {
            Retain(i, l, NumElements(stash));
            st.pre[key] = std::move(stash);
          }
        } else if (t.component == Component::kAttn) {
          AttnStash stash;
          st.outbox[t.id] = AttnForward(Input(t), model_.dims, Opt(), &stash);
          Retain(i, l, NumElements(stash));
          st.attn[key] = std::move(stash);
        } else {
          Message in = Input(t);
          PostStash stash;
          Tensor out = PostForward(W(l), in, Chunk(), rc ? nullptr : &stash);
          if (rc) {
            Retain(i, l, in.numel());
            st.post_inputs[key] = std::move(in);
          } else {
            Retain(i, l, NumElements(stash));
            st.post[key] = std::move(stash);
          }
          if (l == L - 1) {
            FinalForward(t, out, !rc);
          } else {
            Output(t, std::move(out));
          }
        }
        break;
      case TaskKind::kRecomputeFwd:
        if (t.component == Component::kPre) {
          const Tensor x = l == 0 ? inputs_[i] : Take(st.regen, key, t, "recomputed input");
          PreStash stash;
          PreForward(W(l), x, Opt(), &stash);
          st.pre[key] = std::move(stash);
        } else if (t.component == Component::kPost) {
          const Message in = Take(st.post_inputs, key, t, "post-attention input");
          PostStash stash;
          Tensor out = PostForward(W(l), in, Chunk(), &stash);
          st.post[key] = std::move(stash);
          if (l == L - 1) {
            st.seed[{i, L}] = LossGrad(out);
          } else {
            st.regen[{i, l + 1}] = std::move(out);
          }
        } else {
          throw RuntimeError("attention is never recomputed: " + t.Label());
        }
        break;
      case TaskKind::kBwd:
        if (t.component == Component::kPre) {
          PreWork work;
          Tensor dx = PreBackwardB(W(l), Input(t), Take(st.pre, key, t, "pre-attention"), Opt(),
                                   &work);
          PreBackwardW(std::move(work), Opt(), &grads_[i][l]);
          if (l == 0) {
            result_.step.input_grads[i] = std::move(dx);
          } else {
            Output(t, std::move(dx));
          }
        } else if (t.component == Component::kAttn) {
          st.outbox[t.id] =
              AttnBackward(Input(t), Take(st.attn, key, t, "attention"), model_.dims, Opt());
        } else {
          const Tensor dout = l == L - 1 ? Seed(t) : Single(Input(t), t);
          PostWork work;
          st.outbox[t.id] =
              PostBackwardB(W(l), dout, Take(st.post, key, t, "post-attention"), Chunk(), &work);
          PostBackwardW(std::move(work), Chunk(), &grads_[i][l]);
        }
        break;
      default:
        throw RuntimeError("unsupported task kind for a helix schedule: " + t.Label());
    }
  }

  void Audit(int64_t stage) {
    const int64_t live = stages_[stage].Live();
    result_.memory.series[stage].push_back(live);
    result_.memory.peak[stage] = std::max(result_.memory.peak[stage], live);
  }

  const Schedule& s_;
  const ToyModel& model_;
  const std::vector<Tensor>& inputs_;
  const ModelConfig& cfg_;
  std::vector<StageState> stages_;
  std::vector<std::vector<LayerParams>> grads_;
  std::vector<std::vector<int64_t>> retained_;
  RuntimeResult result_;

  std::mutex mu_;  // mailbox, transfer log and retained counts
  std::map<TaskId, Message> mailbox_;  // keyed by RECV id
};

// Topological order of all tasks, preferring earlier simulated starts.
std::vector<TaskId> ReplayOrder(const Schedule& sched) {
  SimResult sim;
  try {
    sim = Simulate(sched, DurationTable::FromUnits(1, 3, 2, 1));
  } catch (const SimulationError& e) {
    throw RuntimeError(std::string("schedule deadlocks: ") + e.what());
  }
  const size_t n = sched.tasks.size();
  std::vector<std::vector<TaskId>> out(n);
  std::vector<int> indeg(n, 0);
  auto edge = [&](TaskId a, TaskId b) {
    out[a].push_back(b);
    ++indeg[b];
  };
  for (const Task& t : sched.tasks) {
    for (TaskId d : t.deps) edge(d, t.id);
    for (TaskId d : t.control_deps) edge(d, t.id);
  }
  for (const auto& order : sched.stage_order) {
    for (size_t k = 1; k < order.size(); ++k) edge(order[k - 1], order[k]);
  }
  using Item = std::pair<Ticks, TaskId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> ready;
  for (const Task& t : sched.tasks) {
    if (indeg[t.id] == 0) ready.push({sim.timeline.start[t.id], t.id});
  }
  std::vector<TaskId> order;
  while (!ready.empty()) {
    const TaskId id = ready.top().second;
    ready.pop();
    order.push_back(id);
    for (TaskId b : out[id]) {
      if (--indeg[b] == 0) ready.push({sim.timeline.start[b], b});
    }
  }
  if (order.size() != n) throw RuntimeError("schedule deadlocks");
  return order;
}

void RunThreaded(const Schedule& sched, Executor& exec) {
  const int64_t p = sched.num_stages();
  std::vector<std::vector<TaskId>> sends(sched.tasks.size());
  for (const Task& t : sched.tasks) {
    if (t.kind == TaskKind::kSend) sends[t.deps.at(0)].push_back(t.id);
  }

  std::mutex mu;
  std::condition_variable cv;
  std::vector<char> done(sched.tasks.size(), 0);
  std::vector<char> waiting(p, 0);
  int64_t running = p;
  bool failed = false;
  std::string error;

  auto ready = [&](const Task& t) {
    for (TaskId d : t.deps) {
      if (!done[d]) return false;
    }
    for (TaskId d : t.control_deps) {
      if (!done[d]) return false;
    }
    return true;
  };
  auto fail = [&](const std::string& what) {
    if (!failed) error = what;
    failed = true;
    cv.notify_all();
  };

  auto worker = [&](int64_t stage) {
    try {
      for (TaskId id : sched.stage_order[stage]) {
        const Task& t = sched.task(id);
        {
          std::unique_lock<std::mutex> lk(mu);
          while (!failed && !ready(t)) {
            waiting[stage] = 1;
            if (std::count(waiting.begin(), waiting.end(), 1) == running) {
              fail("deadlock: every stage is waiting (stage " + std::to_string(stage) +
                   " blocked at " + t.Label() + ")");
              break;
            }
            cv.wait(lk);
            waiting[stage] = 0;
          }
          waiting[stage] = 0;
          if (failed) break;
        }
        exec.Run(t);
        for (TaskId send : sends[id]) exec.Run(sched.task(send));
        std::lock_guard<std::mutex> lk(mu);
        done[id] = 1;
        for (TaskId send : sends[id]) {
          done[send] = 1;
          done[sched.task(send).peer] = 1;
        }
        std::fill(waiting.begin(), waiting.end(), 0);
        cv.notify_all();
      }
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lk(mu);
      fail(e.what());
    }
    std::lock_guard<std::mutex> lk(mu);
    --running;
    waiting[stage] = 0;
    // A finished stage may leave the others all waiting.
    if (running > 0 && std::count(waiting.begin(), waiting.end(), 1) == running) {
      fail("deadlock: remaining stages wait on tasks that never run");
    }
    cv.notify_all();
  };

  std::vector<std::thread> threads;
  for (int64_t st = 0; st < p; ++st) threads.emplace_back(worker, st);
  for (auto& th : threads) th.join();
  if (failed) throw RuntimeError(error);
}

}  // namespace

RuntimeResult ExecuteSchedule(const Schedule& sched, const ToyModel& model,
                              const std::vector<Tensor>& inputs, const RuntimeOptions& options) {
  Executor exec(sched, model, inputs);
  if (options.mode == RuntimeMode::kReplay) {
    for (TaskId id : ReplayOrder(sched)) exec.Run(sched.task(id));
  } else {
    RunThreaded(sched, exec);
  }
  return exec.Finish();
}

}  // namespace pipelab
