#ifndef SPDC_NETSIM_HPP
#define SPDC_NETSIM_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spdc/blocklu.hpp"
#include "spdc/matrix.hpp"
#include "spdc/plan.hpp"

namespace spdc {

enum class SimMode { deterministic, concurrent };

enum class FaultKind { additive, replace_random };

// Where the tampered copy travels: the downstream U_BLOCKS relay or the
// result bundle returned to the client.
enum class FaultWhere { transit, result };

struct FaultSpec {
  std::size_t target_server = 0;
  std::string block;  // label, e.g. "U_12" or "L_22"
  FaultKind kind = FaultKind::additive;
  FaultWhere where = FaultWhere::transit;
  double magnitude = 1e-3;  // relative to the block's max magnitude
};

struct TraceEvent {
  std::uint64_t step = 0;
  int from = 0;
  int to = 0;
  MsgKind kind = MsgKind::assign_row;
  std::size_t size = 0;
  std::vector<std::string> labels;  // payload labels; empty when parsed from disk
  bool failure = false;
};

struct NodePhase {
  std::uint64_t activation = 0;  // step of the first message that triggered work
  std::uint64_t result = 0;      // step of the result emission
  bool activated = false;
  bool resulted = false;
};

struct Trace {
  std::vector<TraceEvent> events;
  std::map<int, std::uint64_t> flops;  // per server
  std::map<int, NodePhase> phases;
  std::vector<std::string> faults;  // descriptions of injected faults
  std::uint64_t critical_path_flops = 0;

  std::size_t message_count(MsgKind kind) const;
  std::size_t total_reals() const;

  // One event per line: "step from to kind size".
  std::string to_text() const;
  static Trace from_text(const std::string& text);
};

struct ServerResult {
  std::size_t server = 0;
  std::vector<LabeledBlock> blocks;
  bool failure = false;
  std::string fail_reason;
};

struct SimOutcome {
  std::vector<ServerResult> results;  // one per server, index order
  Trace trace;
  bool failed = false;
  std::size_t failed_server = 0;
  std::string fail_reason;
};

// Hosts the client and N server state machines over FIFO channels.
// Deterministic mode delivers round-robin over ready nodes and is
// bit-reproducible; concurrent mode runs one thread per server and must
// produce identical result values (the trace is merged on a deterministic
// logical-clock key, so it is reproducible too, though its event order may
// differ from deterministic mode). Faults are applied to the named block
// at emission time.
SimOutcome run_simulation(const PartitionPlan& plan, const BlockGrid& grid, SimMode mode,
                          const std::vector<FaultSpec>& faults, std::uint64_t seed);

// Structural checks on a completed trace: chain-only edges, one result per
// server, staggered activations, silence after results, and for N=3 the
// reference message schedule. Violations come back as data.
std::vector<std::string> validate_trace(const Trace& trace, std::size_t n_servers);

}  // namespace spdc

#endif
