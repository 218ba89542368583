#include "spdc/netsim.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <sstream>
#include <thread>

#include "spdc/error.hpp"

namespace spdc {

namespace {

struct Envelope {
  ServerMessage msg;
  std::uint64_t cp_stamp = 0;  // critical-path cost accumulated at emission
  std::uint64_t lamport = 0;
};

// Log entry used by both simulator modes; deliveries participate in step
// numbering and phase bookkeeping but are not trace events.
struct LogEntry {
  bool is_delivery = false;
  int node = 0;
  std::uint64_t lamport = 0;
  std::uint64_t seq = 0;
  TraceEvent event;        // valid when !is_delivery
  bool made_progress = false;  // valid when is_delivery
};

class FaultInjector {
 public:
  FaultInjector(const std::vector<FaultSpec>& faults, std::uint64_t seed) {
    std::uint64_t salt = 0x9e3779b97f4a7c15ull;
    for (const auto& f : faults) {
      pending_.push_back({f, false, seed ^ salt});
      salt = salt * 6364136223846793005ull + 1442695040888963407ull;
    }
  }

  void apply(ServerMessage& msg, std::vector<std::string>& record) {
    std::lock_guard<std::mutex> lk(mu_);
    for (auto& p : pending_) {
      if (p.applied) continue;
      if (msg.from != static_cast<int>(p.spec.target_server)) continue;
      const MsgKind want =
          p.spec.where == FaultWhere::transit ? MsgKind::u_blocks : MsgKind::result;
      if (msg.kind != want) continue;
      for (auto& b : msg.blocks) {
        if (b.label != p.spec.block) continue;
        perturb(b.m, p);
        p.applied = true;
        std::ostringstream os;
        os << "server " << p.spec.target_server << " block " << p.spec.block << " "
           << (p.spec.kind == FaultKind::additive ? "additive" : "replaced") << " rel "
           << p.spec.magnitude << " in "
           << (p.spec.where == FaultWhere::transit ? "transit" : "result");
        record.push_back(os.str());
        break;
      }
    }
  }

 private:
  struct Pending {
    FaultSpec spec;
    bool applied;
    std::uint64_t seed;
  };

  static void perturb(Matrix& m, const Pending& p) {
    std::mt19937_64 rng(p.seed);
    auto unit = [&rng]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };
    double scale = m.max_abs();
    if (scale == 0.0) scale = 1.0;
    const double amp = p.spec.magnitude * scale;
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) {
        if (p.spec.kind == FaultKind::additive)
          out.at(i, j) = m.at(i, j) + amp * unit();
        else
          out.at(i, j) = amp * unit();
      }
    m = std::move(out);
  }

  std::mutex mu_;
  std::vector<Pending> pending_;
};

std::vector<ServerMessage> build_assignments(const BlockGrid& grid) {
  const std::size_t n = grid.servers();
  std::vector<ServerMessage> out;
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<LabeledBlock> blocks;
    for (std::size_t j = 1; j <= n; ++j)
      blocks.push_back(LabeledBlock{block_label('X', i, j), grid.block(i - 1, j - 1)});
    out.push_back(make_message(kClientNode, static_cast<int>(i), MsgKind::assign_row,
                               std::move(blocks)));
  }
  return out;
}

TraceEvent event_of(const ServerMessage& msg) {
  TraceEvent ev;
  ev.from = msg.from;
  ev.to = msg.to;
  ev.kind = msg.kind;
  ev.size = msg.size;
  ev.failure = msg.failure;
  for (const auto& b : msg.blocks) ev.labels.push_back(b.label);
  return ev;
}

void accept_result(SimOutcome& outcome, const ServerMessage& msg) {
  ServerResult res;
  res.server = static_cast<std::size_t>(msg.from);
  res.blocks = msg.blocks;
  res.failure = msg.failure;
  res.fail_reason = msg.fail_reason;
  if (msg.failure && !outcome.failed) {
    outcome.failed = true;
    outcome.failed_server = res.server;
    outcome.fail_reason = res.fail_reason;
  }
  outcome.results[res.server - 1] = std::move(res);
}

SimOutcome run_deterministic(const BlockGrid& grid, const std::vector<FaultSpec>& faults,
                             std::uint64_t seed) {
  const std::size_t n = grid.servers();
  FaultInjector injector(faults, seed);
  SimOutcome outcome;
  outcome.results.resize(n);
  Trace& trace = outcome.trace;

  std::vector<ServerState> states;
  states.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) states.emplace_back(i, n, std::vector<Matrix>{});

  std::vector<std::deque<Envelope>> inbox(n + 1);
  std::vector<std::uint64_t> node_cp(n + 1, 0);
  std::uint64_t step = 0;
  std::size_t results_seen = 0;

  for (auto& msg : build_assignments(grid)) {
    TraceEvent ev = event_of(msg);
    ev.step = ++step;
    trace.events.push_back(std::move(ev));
    inbox[static_cast<std::size_t>(msg.to)].push_back(Envelope{std::move(msg), 0, 0});
  }

  while (results_seen < n && !outcome.failed) {
    bool progress = false;
    for (std::size_t i = 1; i <= n && !outcome.failed; ++i) {
      if (inbox[i].empty()) continue;
      Envelope env = std::move(inbox[i].front());
      inbox[i].pop_front();
      progress = true;
      ++step;  // delivery tick

      ServerState& st = states[i - 1];
      const std::size_t tasks_before = st.tasks_completed();
      const std::uint64_t flops_before = st.flops();
      const std::uint64_t base = std::max(node_cp[i], env.cp_stamp);

      std::vector<ServerMessage> outs = st.handle(env.msg);

      if (st.tasks_completed() > tasks_before && !trace.phases[static_cast<int>(i)].activated) {
        trace.phases[static_cast<int>(i)].activation = step;
        trace.phases[static_cast<int>(i)].activated = true;
      }

      for (auto& out : outs) {
        injector.apply(out, trace.faults);
        const std::uint64_t out_cp = base + (out.emit_flops - flops_before);
        TraceEvent ev = event_of(out);
        ev.step = ++step;
        trace.events.push_back(std::move(ev));
        if (out.to == kClientNode) {
          trace.phases[out.from].result = step;
          trace.phases[out.from].resulted = true;
          trace.critical_path_flops = std::max(trace.critical_path_flops, out_cp);
          accept_result(outcome, out);
          ++results_seen;
        } else {
          inbox[static_cast<std::size_t>(out.to)].push_back(Envelope{std::move(out), out_cp, 0});
        }
      }
      node_cp[i] = base + (st.flops() - flops_before);
    }
    if (!progress && results_seen < n && !outcome.failed) {
      throw DeadlockError("simulation stalled with incomplete results; trace:\n" +
                          trace.to_text());
    }
  }

  for (std::size_t i = 1; i <= n; ++i)
    trace.flops[static_cast<int>(i)] = states[i - 1].flops();
  return outcome;
}

class Channel {
 public:
  void push(Envelope e) {
    {
      std::lock_guard<std::mutex> lk(mu_);
      q_.push_back(std::move(e));
    }
    cv_.notify_all();
  }

  std::optional<Envelope> pop() {
    std::unique_lock<std::mutex> lk(mu_);
    cv_.wait(lk, [this] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    Envelope e = std::move(q_.front());
    q_.pop_front();
    return e;
  }

  void close() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> q_;
  bool closed_ = false;
};

SimOutcome run_concurrent(const BlockGrid& grid, const std::vector<FaultSpec>& faults,
                          std::uint64_t seed) {
  const std::size_t n = grid.servers();
  FaultInjector injector(faults, seed);
  SimOutcome outcome;
  outcome.results.resize(n);

  std::vector<Channel> inbox(n + 1);
  Channel to_client;
  std::vector<std::vector<LogEntry>> logs(n + 1);

  // All assignments land before any server runs, so each server sees its
  // assignment strictly before upstream traffic.
  std::uint64_t client_clock = 0;
  {
    std::uint64_t seq = 0;
    for (auto& msg : build_assignments(grid)) {
      ++client_clock;
      LogEntry le;
      le.node = kClientNode;
      le.lamport = client_clock;
      le.seq = seq++;
      le.event = event_of(msg);
      logs[0].push_back(std::move(le));
      inbox[static_cast<std::size_t>(msg.to)].push(Envelope{std::move(msg), 0, client_clock});
    }
  }

  std::vector<std::thread> workers;
  std::mutex fault_log_mu;
  std::vector<std::string> fault_log;

  for (std::size_t i = 1; i <= n; ++i) {
    workers.emplace_back([&, i] {
      ServerState st(i, n, {});
      std::uint64_t clock = 0, seq = 0, node_cp = 0;
      auto& log = logs[i];
      while (!st.done()) {
        auto env = inbox[i].pop();
        if (!env) break;
        clock = std::max(clock, env->lamport) + 1;
        const std::size_t tasks_before = st.tasks_completed();
        const std::uint64_t flops_before = st.flops();
        const std::uint64_t base = std::max(node_cp, env->cp_stamp);

        std::vector<ServerMessage> outs;
        try {
          outs = st.handle(env->msg);
        } catch (const Error& e) {
          // Stale traffic after an abort, or a genuine protocol bug: either
          // way the collector must not wait on this server forever.
          ServerMessage fail =
              make_message(static_cast<int>(i), kClientNode, MsgKind::result, {});
          fail.failure = true;
          fail.fail_reason = e.what();
          to_client.push(Envelope{std::move(fail), 0, ++clock});
          break;
        }

        LogEntry del;
        del.is_delivery = true;
        del.node = static_cast<int>(i);
        del.lamport = clock;
        del.seq = seq++;
        del.made_progress = st.tasks_completed() > tasks_before;
        log.push_back(del);

        for (auto& out : outs) {
          {
            std::lock_guard<std::mutex> lk(fault_log_mu);
            injector.apply(out, fault_log);
          }
          ++clock;
          const std::uint64_t out_cp = base + (out.emit_flops - flops_before);
          LogEntry le;
          le.node = static_cast<int>(i);
          le.lamport = clock;
          le.seq = seq++;
          le.event = event_of(out);
          log.push_back(le);
          Envelope e{std::move(out), out_cp, clock};
          if (e.msg.to == kClientNode)
            to_client.push(std::move(e));
          else
            inbox[static_cast<std::size_t>(e.msg.to)].push(std::move(e));
        }
        node_cp = base + (st.flops() - flops_before);
      }
      // Final flop count rides out as a pseudo entry, stripped at merge.
      LogEntry fin;
      fin.is_delivery = true;
      fin.node = static_cast<int>(i);
      fin.lamport = ~0ull;  // stripped before merge
      fin.seq = st.flops();
      log.push_back(fin);
    });
  }

  std::size_t results_seen = 0;
  std::vector<std::uint64_t> result_cp(n + 1, 0);
  while (results_seen < n) {
    auto env = to_client.pop();
    if (!env) break;
    result_cp[static_cast<std::size_t>(env->msg.from)] = env->cp_stamp;
    accept_result(outcome, env->msg);
    ++results_seen;
    if (outcome.failed) break;
  }
  for (auto& ch : inbox) ch.close();
  to_client.close();
  for (auto& w : workers) w.join();

  // Merge per-node logs on the deterministic (lamport, node, seq) key.
  Trace& trace = outcome.trace;
  trace.faults = std::move(fault_log);
  std::vector<LogEntry> merged;
  for (std::size_t i = 0; i <= n; ++i) {
    for (auto& le : logs[i]) {
      if (le.lamport == ~0ull) {
        trace.flops[le.node] = le.seq;
        continue;
      }
      merged.push_back(std::move(le));
    }
  }
  std::sort(merged.begin(), merged.end(), [](const LogEntry& a, const LogEntry& b) {
    if (a.lamport != b.lamport) return a.lamport < b.lamport;
    if (a.node != b.node) return a.node < b.node;
    return a.seq < b.seq;
  });
  std::uint64_t step = 0;
  for (auto& le : merged) {
    ++step;
    if (le.is_delivery) {
      if (le.made_progress && !trace.phases[le.node].activated) {
        trace.phases[le.node].activation = step;
        trace.phases[le.node].activated = true;
      }
      continue;
    }
    le.event.step = step;
    if (le.event.kind == MsgKind::result && le.event.to == kClientNode) {
      trace.phases[le.event.from].result = step;
      trace.phases[le.event.from].resulted = true;
    }
    trace.events.push_back(le.event);
  }
  for (std::size_t i = 1; i <= n; ++i)
    trace.critical_path_flops = std::max(trace.critical_path_flops, result_cp[i]);

  if (results_seen < n && !outcome.failed)
    throw DeadlockError("concurrent simulation ended with incomplete results; trace:\n" +
                        trace.to_text());
  return outcome;
}

}  // namespace

std::size_t Trace::message_count(MsgKind kind) const {
  std::size_t c = 0;
  for (const auto& e : events)
    if (e.kind == kind) ++c;
  return c;
}

std::size_t Trace::total_reals() const {
  std::size_t c = 0;
  for (const auto& e : events) c += e.size;
  return c;
}

std::string Trace::to_text() const {
  std::ostringstream os;
  for (const auto& e : events)
    os << e.step << " " << e.from << " " << e.to << " " << to_string(e.kind) << " " << e.size
       << "\n";
  return os.str();
}

Trace Trace::from_text(const std::string& text) {
  Trace t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TraceEvent ev;
    std::string kind;
    if (!(ls >> ev.step >> ev.from >> ev.to >> kind >> ev.size))
      throw IoError("trace line " + std::to_string(lineno) + ": expected 'step from to kind size'");
    if (kind == "ASSIGN_ROW")
      ev.kind = MsgKind::assign_row;
    else if (kind == "U_BLOCKS")
      ev.kind = MsgKind::u_blocks;
    else if (kind == "RESULT")
      ev.kind = MsgKind::result;
    else
      throw IoError("trace line " + std::to_string(lineno) + ": unknown kind \"" + kind + "\"");
    t.events.push_back(std::move(ev));
  }
  return t;
}

SimOutcome run_simulation(const PartitionPlan& plan, const BlockGrid& grid, SimMode mode,
                          const std::vector<FaultSpec>& faults, std::uint64_t seed) {
  if (plan.servers != grid.servers() || plan.block_size != grid.block_size())
    throw DimensionError("run_simulation: grid does not match the partition plan");
  return mode == SimMode::deterministic ? run_deterministic(grid, faults, seed)
                                        : run_concurrent(grid, faults, seed);
}

std::vector<std::string> validate_trace(const Trace& trace, std::size_t n_servers) {
  std::vector<std::string> violations;
  std::vector<std::size_t> results_per_server(n_servers + 1, 0);
  std::vector<std::uint64_t> result_step(n_servers + 1, 0);
  std::vector<std::uint64_t> first_send(n_servers + 1, 0);

  for (const auto& e : trace.events) {
    if (e.from == kClientNode) {
      if (e.kind != MsgKind::assign_row)
        violations.push_back("client sent a non-assignment message at step " +
                             std::to_string(e.step));
      continue;
    }
    const auto from = static_cast<std::size_t>(e.from);
    if (from > n_servers) {
      violations.push_back("unknown sender " + std::to_string(e.from));
      continue;
    }
    if (first_send[from] == 0) first_send[from] = e.step;
    if (result_step[from] != 0 && e.step > result_step[from])
      violations.push_back("server " + std::to_string(from) + " sent after its result (step " +
                           std::to_string(e.step) + ")");
    if (e.kind == MsgKind::u_blocks) {
      if (e.to != e.from + 1)
        violations.push_back("non-adjacent transfer " + std::to_string(e.from) + "->" +
                             std::to_string(e.to) + " at step " + std::to_string(e.step));
    } else if (e.kind == MsgKind::result) {
      if (e.to != kClientNode)
        violations.push_back("result not addressed to the client at step " +
                             std::to_string(e.step));
      ++results_per_server[from];
      result_step[from] = e.step;
    } else {
      violations.push_back("server " + std::to_string(from) + " sent an assignment");
    }
  }

  for (std::size_t i = 1; i <= n_servers; ++i) {
    if (results_per_server[i] != 1)
      violations.push_back("server " + std::to_string(i) + " sent " +
                           std::to_string(results_per_server[i]) + " results (expected 1)");
  }

  if (!trace.phases.empty()) {
    for (std::size_t i = 1; i < n_servers; ++i) {
      const auto self = trace.phases.find(static_cast<int>(i));
      const auto next = trace.phases.find(static_cast<int>(i + 1));
      if (self == trace.phases.end() || next == trace.phases.end() || !next->second.activated)
        continue;
      if (first_send[i] != 0 && next->second.activation <= first_send[i])
        violations.push_back("server " + std::to_string(i + 1) +
                             " activated before its upstream neighbor first sent");
    }
  }

  if (n_servers == 3) {
    // Reference three-server schedule: three singleton sends on the 1->2
    // channel, then {U_11,U_12}, {U_13,U_22}, {U_23} on the 2->3 channel.
    static const std::vector<std::vector<std::string>> want12 = {{"U_11"}, {"U_12"}, {"U_13"}};
    static const std::vector<std::vector<std::string>> want23 = {
        {"U_11", "U_12"}, {"U_13", "U_22"}, {"U_23"}};
    std::vector<std::vector<std::string>> got12, got23;
    bool have_labels = true;
    for (const auto& e : trace.events) {
      if (e.kind != MsgKind::u_blocks) continue;
      if (e.labels.empty()) have_labels = false;
      if (e.from == 1 && e.to == 2) got12.push_back(e.labels);
      if (e.from == 2 && e.to == 3) got23.push_back(e.labels);
    }
    if (got12.size() != 3 || got23.size() != 3) {
      violations.push_back("three-server schedule: expected 3+3 U_BLOCKS messages, saw " +
                           std::to_string(got12.size()) + "+" + std::to_string(got23.size()));
    } else if (have_labels && (got12 != want12 || got23 != want23)) {
      violations.push_back("three-server schedule: payload sequence differs from the reference");
    }
  }

  return violations;
}

}  // namespace spdc
