#include <random>

#include "doctest.h"
#include "spdc/error.hpp"
#include "spdc/netsim.hpp"
#include "spdc/plan.hpp"
#include "test_support.hpp"

using namespace spdc;
using namespace spdc::test;

namespace {

PartitionPlan plan_for(std::size_t side, std::size_t servers) {
  PartitionPlan p;
  p.n = side;
  p.servers = servers;
  p.pad = 0;
  p.block_size = side / servers;
  return p;
}

bool same_results(const SimOutcome& a, const SimOutcome& b) {
  if (a.results.size() != b.results.size()) return false;
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    const auto& ra = a.results[i];
    const auto& rb = b.results[i];
    if (ra.blocks.size() != rb.blocks.size()) return false;
    for (std::size_t k = 0; k < ra.blocks.size(); ++k) {
      if (ra.blocks[k].label != rb.blocks[k].label) return false;
      if (!(ra.blocks[k].m == rb.blocks[k].m)) return false;  // bit-exact
    }
  }
  return true;
}

}  // namespace

TEST_CASE("three-server honest run matches the reference schedule") {
  std::mt19937_64 rng(41);
  const Matrix m = random_dominant(6, rng);
  const auto out = run_simulation(plan_for(6, 3), partition(m, 3), SimMode::deterministic, {}, 7);

  REQUIRE(!out.failed);
  CHECK(validate_trace(out.trace, 3).empty());

  std::vector<std::vector<std::string>> got23;
  for (const auto& e : out.trace.events)
    if (e.kind == MsgKind::u_blocks && e.from == 2 && e.to == 3) got23.push_back(e.labels);
  CHECK(got23 == std::vector<std::vector<std::string>>{
                     {"U_11", "U_12"}, {"U_13", "U_22"}, {"U_23"}});
  CHECK(out.trace.message_count(MsgKind::result) == 3);
}

TEST_CASE("deterministic mode is bit-reproducible") {
  std::mt19937_64 rng(42);
  const Matrix m = random_dominant(8, rng);
  const auto a = run_simulation(plan_for(8, 4), partition(m, 4), SimMode::deterministic, {}, 3);
  const auto b = run_simulation(plan_for(8, 4), partition(m, 4), SimMode::deterministic, {}, 3);
  CHECK(a.trace.to_text() == b.trace.to_text());
  CHECK(same_results(a, b));
  CHECK(a.trace.critical_path_flops == b.trace.critical_path_flops);
}

TEST_CASE("concurrent mode produces identical result values and a stable trace") {
  std::mt19937_64 rng(43);
  for (std::size_t servers : {2, 3, 4, 6}) {
    const std::size_t side = servers * 3;
    const Matrix m = random_dominant(side, rng);
    const auto plan = plan_for(side, servers);
    const auto det = run_simulation(plan, partition(m, servers), SimMode::deterministic, {}, 5);
    const auto con = run_simulation(plan, partition(m, servers), SimMode::concurrent, {}, 5);
    const auto con2 = run_simulation(plan, partition(m, servers), SimMode::concurrent, {}, 5);
    CHECK(same_results(det, con));
    CHECK(con.trace.to_text() == con2.trace.to_text());
    CHECK(validate_trace(con.trace, servers).empty());
    CHECK(con.trace.critical_path_flops == det.trace.critical_path_flops);
  }
}

TEST_CASE("three-server transmitted reals match a hand count of the schedule") {
  // Block size 2: assignments 3 x 3 blocks = 36 reals, chain 1->2 carries
  // {U_11},{U_12},{U_13} = 12, chain 2->3 carries {U_11,U_12},{U_13,U_22},
  // {U_23} = 20, and each result bundle holds four blocks = 48 in total.
  std::mt19937_64 rng(40);
  const Matrix m = random_dominant(6, rng);
  const auto out = run_simulation(plan_for(6, 3), partition(m, 3), SimMode::deterministic, {}, 1);
  CHECK(out.trace.total_reals() == 36 + 12 + 20 + 48);
  CHECK(out.trace.events.size() == 3 + 3 + 3 + 3);
}

TEST_CASE("per-node flops populate the trace and bound the critical path") {
  std::mt19937_64 rng(44);
  const Matrix m = random_dominant(12, rng);
  const auto out = run_simulation(plan_for(12, 3), partition(m, 3), SimMode::deterministic, {}, 1);
  std::uint64_t total = 0, mx = 0;
  for (const auto& [node, f] : out.trace.flops) {
    CHECK(f > 0);
    total += f;
    mx = std::max(mx, f);
  }
  CHECK(out.trace.critical_path_flops >= mx);
  CHECK(out.trace.critical_path_flops <= total);
}

TEST_CASE("critical path strictly decreases as servers are added") {
  std::mt19937_64 rng(45);
  const Matrix m = random_dominant(24, rng);
  std::uint64_t prev = ~0ull;
  for (std::size_t servers : {2, 3, 4}) {
    const auto out =
        run_simulation(plan_for(24, servers), partition(m, servers), SimMode::deterministic, {}, 1);
    CHECK(out.trace.critical_path_flops < prev);
    prev = out.trace.critical_path_flops;
  }
}

TEST_CASE("transit fault alters downstream results but not the clean upstream copy") {
  std::mt19937_64 rng(46);
  const Matrix m = random_dominant(6, rng);
  const auto plan = plan_for(6, 3);
  const auto clean = run_simulation(plan, partition(m, 3), SimMode::deterministic, {}, 9);

  FaultSpec fault;
  fault.target_server = 1;
  fault.block = "U_12";
  fault.kind = FaultKind::additive;
  fault.where = FaultWhere::transit;
  fault.magnitude = 1e-3;
  const auto faulty = run_simulation(plan, partition(m, 3), SimMode::deterministic, {fault}, 9);

  REQUIRE(faulty.trace.faults.size() == 1);
  CHECK(!same_results(clean, faulty));
  // res_1 carries the untampered U_12: the fault hit only the relay copy.
  const auto& res1_clean = clean.results[0];
  const auto& res1_faulty = faulty.results[0];
  for (std::size_t k = 0; k < res1_clean.blocks.size(); ++k)
    CHECK(res1_clean.blocks[k].m == res1_faulty.blocks[k].m);
}

TEST_CASE("result fault is never silently absorbed") {
  std::mt19937_64 rng(47);
  const Matrix m = random_dominant(8, rng);
  const auto plan = plan_for(8, 2);
  const auto clean = run_simulation(plan, partition(m, 2), SimMode::deterministic, {}, 11);

  for (const char* label : {"L_21", "U_22", "L_11", "U_12"}) {
    FaultSpec fault;
    fault.target_server = label[2] == '1' && label[0] == 'L' && label[3] == '1' ? 1 : 2;
    fault.target_server = (label[2] == '1') ? 1 : 2;
    fault.block = label;
    fault.where = FaultWhere::result;
    fault.magnitude = 1e-3;
    const auto faulty = run_simulation(plan, partition(m, 2), SimMode::deterministic, {fault}, 11);
    CHECK(faulty.trace.faults.size() == 1);
    CHECK(!same_results(clean, faulty));
  }
}

TEST_CASE("trace text round trip") {
  std::mt19937_64 rng(48);
  const Matrix m = random_dominant(6, rng);
  const auto out = run_simulation(plan_for(6, 2), partition(m, 2), SimMode::deterministic, {}, 2);
  const Trace parsed = Trace::from_text(out.trace.to_text());
  REQUIRE(parsed.events.size() == out.trace.events.size());
  for (std::size_t i = 0; i < parsed.events.size(); ++i) {
    CHECK(parsed.events[i].step == out.trace.events[i].step);
    CHECK(parsed.events[i].from == out.trace.events[i].from);
    CHECK(parsed.events[i].to == out.trace.events[i].to);
    CHECK(parsed.events[i].kind == out.trace.events[i].kind);
    CHECK(parsed.events[i].size == out.trace.events[i].size);
  }
  CHECK_THROWS_AS(Trace::from_text("1 2 3 BOGUS 4\n"), IoError);
  CHECK_THROWS_AS(Trace::from_text("nonsense\n"), IoError);
}

TEST_CASE("validate_trace flags forged traces") {
  Trace forged;
  TraceEvent skip;
  skip.step = 1;
  skip.from = 1;
  skip.to = 3;  // non-adjacent
  skip.kind = MsgKind::u_blocks;
  forged.events.push_back(skip);
  TraceEvent res2a;
  res2a.step = 2;
  res2a.from = 2;
  res2a.to = kClientNode;
  res2a.kind = MsgKind::result;
  forged.events.push_back(res2a);
  TraceEvent res2b = res2a;
  res2b.step = 3;
  forged.events.push_back(res2b);

  const auto violations = validate_trace(forged, 2);
  bool non_adjacent = false, twice = false, missing1 = false;
  for (const auto& v : violations) {
    if (v.find("non-adjacent") != std::string::npos) non_adjacent = true;
    if (v.find("server 2 sent 2 results") != std::string::npos) twice = true;
    if (v.find("server 1 sent 0 results") != std::string::npos) missing1 = true;
  }
  CHECK(non_adjacent);
  CHECK(twice);
  CHECK(missing1);
}

TEST_CASE("mismatched plan and grid are rejected") {
  std::mt19937_64 rng(49);
  const Matrix m = random_dominant(6, rng);
  CHECK_THROWS_AS(
      run_simulation(plan_for(6, 2), partition(m, 3), SimMode::deterministic, {}, 1),
      DimensionError);
}
