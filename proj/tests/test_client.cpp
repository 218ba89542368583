#include <cmath>
#include <random>

#include "doctest.h"
#include "spdc/client.hpp"
#include "spdc/error.hpp"
#include "test_support.hpp"

using namespace spdc;
using namespace spdc::test;

namespace {

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

ProtocolConfig config_with_seed(std::uint64_t seed) {
  ProtocolConfig cfg;
  cfg.lambda1 = bytes_of("lambda-one-test");
  cfg.lambda2 = bytes_of("lambda-two-test");
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("partition plan reproduces the published examples") {
  const PartitionPlan a = plan_partition(4, 3);
  CHECK(a.pad == 2);
  CHECK(a.block_size == 2);

  const PartitionPlan b = plan_partition(6, 2);
  CHECK(b.pad == 0);
  CHECK(b.block_size == 3);

  const PartitionPlan c = plan_partition(2, 2);
  CHECK(c.pad == 2);
  CHECK(c.block_size == 2);

  CHECK_THROWS_AS(plan_partition(4, 1), DimensionError);
}

TEST_CASE("partition plan matches an exhaustive scan of the two conditions") {
  for (std::size_t n = 1; n <= 64; ++n) {
    for (std::size_t servers = 2; servers <= 8; ++servers) {
      const PartitionPlan plan = plan_partition(n, servers);
      std::size_t p = 0;
      while (!((n + p) % servers == 0 && (n + p) / servers > 1)) ++p;
      CHECK(plan.pad == p);
      CHECK(plan.block_size == (n + p) / servers);
      CHECK(plan.block_size > 1);
    }
  }
}

TEST_CASE("det_from_lu diagonal products") {
  std::uint64_t ops = 0;
  const Matrix l = Matrix::identity(2);
  const Matrix u{{2, 0}, {0, 3}};
  const DetValue d = det_from_lu(l, u, &ops);
  CHECK(d.value() == 6.0);
  CHECK(ops <= 4);

  CHECK(det_from_lu(Matrix::identity(3), Matrix::identity(3)) == DetValue::one());
  CHECK(det_from_lu(Matrix::identity(2), Matrix{{0, 1}, {0, 0}}).sign() == 0);

  std::mt19937_64 rng(51);
  const Matrix m = random_dominant(8, rng);
  const auto [lf, uf] = lu_plain(m);
  ops = 0;
  CHECK(det_from_lu(lf, uf, &ops).approx_equal(det_oracle(m), 1e-9));
  CHECK(ops <= 2 * 8);
}

TEST_CASE("threshold formula and linearity in the server count") {
  const Matrix zero(4, 4);
  CHECK(threshold(2, 4, zero, AuthMethod::q3) == doctest::Approx(0x1.0p-40 * 8));
  CHECK(threshold(4, 4, zero, AuthMethod::q3) ==
        doctest::Approx(2.0 * threshold(2, 4, zero, AuthMethod::q3)));

  std::vector<double> r{1.0, 2.0, 3.0, 4.0};
  const double eps_q2 = threshold(2, 4, Matrix::identity(4), AuthMethod::q2, &r);
  CHECK(eps_q2 == doctest::Approx(0x1.0p-40 * 8 * (1.0 + 30.0)));  // r.r = 30
  CHECK_THROWS_AS(threshold(2, 4, zero, AuthMethod::q2), Error);
}

TEST_CASE("authenticate accepts the identity triple under all methods") {
  std::mt19937_64 rng(52);
  const Matrix i4 = Matrix::identity(4);
  for (AuthMethod method : {AuthMethod::q1, AuthMethod::q2, AuthMethod::q3}) {
    const AuthReport rep = authenticate(i4, i4, i4, method, 2, rng);
    CHECK(rep.value == 0.0);
    CHECK(rep.verdict == 1);
    if (method == AuthMethod::q3)
      CHECK(rep.r.empty());
    else
      CHECK(rep.r.size() == 4);
  }
}

TEST_CASE("authenticate accepts exact factorizations") {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 20; ++t) {
    const Matrix m = random_dominant(8, rng);
    const auto [l, u] = lu_plain(m);
    for (AuthMethod method : {AuthMethod::q1, AuthMethod::q2, AuthMethod::q3}) {
      CHECK(authenticate(l, u, m, method, 3, rng).verdict == 1);
    }
  }
}

TEST_CASE("a unit bump in U(1,1) drives Q2 to exactly r_1 squared") {
  std::mt19937_64 rng(54);
  const Matrix x = Matrix::identity(2);
  Matrix u = Matrix::identity(2);
  u.at(0, 0) += 1.0;
  const AuthReport rep = authenticate(Matrix::identity(2), u, x, AuthMethod::q2, 2, rng);
  CHECK(rep.value == rep.r[0] * rep.r[0]);
  CHECK(rep.verdict == 0);
}

TEST_CASE("q3 equals the dense trace residual") {
  std::mt19937_64 rng(55);
  for (std::size_t n : {4, 9, 16}) {
    const Matrix x = random_matrix(n, rng);
    const Matrix l = [&] {
      Matrix out = random_matrix(n, rng);
      for (std::size_t i = 0; i < n; ++i) {
        out.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) out.at(i, j) = 0.0;
      }
      return out;
    }();
    const Matrix u = [&] {
      Matrix out = random_matrix(n, rng);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) out.at(i, j) = 0.0;
      return out;
    }();
    const AuthReport rep = authenticate(l, u, x, AuthMethod::q3, 2, rng);
    const Matrix lu = multiply(l, u);
    double want = 0.0;
    for (std::size_t i = 0; i < n; ++i) want += lu.at(i, i) - x.at(i, i);
    CHECK(rel_diff(rep.value, std::fabs(want)) < 1e-12);
  }
}

TEST_CASE("assemble produces block-triangular factors that reproduce X") {
  std::mt19937_64 rng(56);
  const Matrix x = random_dominant(8, rng);
  const PartitionPlan plan = plan_partition(8, 2);
  const auto sim = run_simulation(plan, partition(x, 2), SimMode::deterministic, {}, 1);
  REQUIRE(!sim.failed);
  const auto [l, u] = assemble(sim.results, plan);

  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 4; j < 8; ++j) CHECK(l.at(i, j) == 0.0);
  for (std::size_t i = 4; i < 8; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(u.at(i, j) == 0.0);
  CHECK(max_componentwise_rel(multiply(l, u), x) < 1e-9);
}

TEST_CASE("assemble names the missing server") {
  std::mt19937_64 rng(57);
  const Matrix x = random_dominant(8, rng);
  const PartitionPlan plan = plan_partition(8, 2);
  auto sim = run_simulation(plan, partition(x, 2), SimMode::deterministic, {}, 1);
  sim.results.pop_back();
  CHECK_THROWS_WITH_AS(assemble(sim.results, plan), doctest::Contains("S_2"), Error);
}

TEST_CASE("end-to-end round trip recovers the oracle determinant") {
  std::mt19937_64 rng(58);
  const Matrix m = random_dominant(8, rng);
  const DetValue want = det_oracle(m);
  const ProtocolOutcome out =
      run_protocol(m, 2, ObfuscationMode::ewd, AuthMethod::q3, config_with_seed(100));
  REQUIRE(out.auth.verdict == 1);
  REQUIRE(out.det_m.has_value());
  CHECK(out.det_m->sign() == want.sign());
  CHECK(out.det_m->approx_equal(want, 1e-8));
  CHECK(out.retries == 0);
}

TEST_CASE("odd sizes pad, run, and report the examples' geometry") {
  std::mt19937_64 rng(59);
  const Matrix m = random_dominant(4, rng);
  const ProtocolOutcome out =
      run_protocol(m, 3, ObfuscationMode::ewm, AuthMethod::q2, config_with_seed(101));
  CHECK(out.plan.pad == 2);
  CHECK(out.plan.block_size == 2);
  CHECK(out.trace.message_count(MsgKind::result) == 3);
  REQUIRE(out.det_m.has_value());
  CHECK(out.det_m->approx_equal(det_oracle(m), 1e-8));
}

TEST_CASE("padding choice does not change the recovered determinant") {
  std::mt19937_64 rng(60);
  const Matrix m = random_dominant(6, rng);
  const auto padded =
      run_protocol(m, 4, ObfuscationMode::ewd, AuthMethod::q3, config_with_seed(102));
  const auto unpadded =
      run_protocol(m, 2, ObfuscationMode::ewd, AuthMethod::q3, config_with_seed(103));
  REQUIRE(padded.det_m.has_value());
  REQUIRE(unpadded.det_m.has_value());
  CHECK(padded.plan.pad == 2);
  CHECK(unpadded.plan.pad == 0);
  CHECK(padded.det_m->sign() == unpadded.det_m->sign());
  CHECK(std::fabs(padded.det_m->log_magnitude() - unpadded.det_m->log_magnitude()) < 1e-8);
}

TEST_CASE("instrumentation counters honor the published budgets") {
  std::mt19937_64 rng(61);
  for (std::size_t n : {8, 16, 32}) {
    const Matrix m = random_dominant(n, rng);
    const ProtocolOutcome out =
        run_protocol(m, 2, ObfuscationMode::ewd, AuthMethod::q3, config_with_seed(200 + n));
    REQUIRE(out.det_m.has_value());
    CHECK(out.counters.cipher_flops == n * n);
    CHECK(out.counters.decipher_ops <= 2 * (n + out.plan.pad));
    const std::size_t padded = n + out.plan.pad;
    CHECK(out.counters.auth_flops <= 2 * padded * (padded + 1));
  }
}

TEST_CASE("the retained vector method also carries a full run") {
  std::mt19937_64 rng(64);
  const Matrix m = random_dominant(6, rng);
  const ProtocolOutcome out =
      run_protocol(m, 3, ObfuscationMode::ewd, AuthMethod::q1, config_with_seed(600));
  REQUIRE(out.auth.verdict == 1);
  CHECK(out.auth.r.size() == 6);
  REQUIRE(out.det_m.has_value());
  CHECK(out.det_m->approx_equal(det_oracle(m), 1e-8));
}

TEST_CASE("tampered runs return verdict 0 with no determinant") {
  std::mt19937_64 rng(62);
  const Matrix m = random_dominant(8, rng);
  ProtocolConfig cfg = config_with_seed(300);
  FaultSpec fault;
  fault.target_server = 2;
  fault.block = "U_22";
  fault.where = FaultWhere::result;
  fault.magnitude = 1e-2;
  cfg.faults.push_back(fault);

  for (AuthMethod method : {AuthMethod::q2, AuthMethod::q3}) {
    const ProtocolOutcome out = run_protocol(m, 2, ObfuscationMode::ewd, method, cfg);
    CHECK(out.auth.verdict == 0);
    CHECK(!out.det_m.has_value());
  }
}

TEST_CASE("an in-transit fault is caught even though the returned copy is clean") {
  // Tampering with U_12 on the wire poisons the downstream server's whole
  // row while the client receives the honest U_12 in res_1, so the
  // assembled factors cannot reproduce X.
  std::mt19937_64 rng(65);
  const Matrix m = random_dominant(8, rng);
  ProtocolConfig cfg = config_with_seed(350);
  FaultSpec fault;
  fault.target_server = 1;
  fault.block = "U_12";
  fault.where = FaultWhere::transit;
  fault.magnitude = 1e-2;
  cfg.faults.push_back(fault);
  const ProtocolOutcome out = run_protocol(m, 2, ObfuscationMode::ewd, AuthMethod::q2, cfg);
  CHECK(out.auth.verdict == 0);
  CHECK(!out.det_m.has_value());
}

TEST_CASE("singular plaintext exhausts retries") {
  Matrix singular(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) singular.at(i, j) = static_cast<double>(i + 1);
  ProtocolConfig cfg = config_with_seed(400);
  cfg.max_retries = 2;
  CHECK_THROWS_AS(run_protocol(singular, 2, ObfuscationMode::ewd, AuthMethod::q3, cfg),
                  RetryExhaustedError);
}

TEST_CASE("threshold margins at the largest configuration") {
  // Honest runs at n=64, N=8 must clear the threshold by at least 10x;
  // tampering at rel 1e-3 must land far above it.
  std::mt19937_64 rng(66);
  for (int t = 0; t < 5; ++t) {
    const Matrix m = random_dominant(64, rng);
    ProtocolConfig cfg = config_with_seed(700 + static_cast<std::uint64_t>(t));
    cfg.lambda1.push_back(static_cast<std::uint8_t>(t));
    for (AuthMethod method : {AuthMethod::q2, AuthMethod::q3}) {
      const auto honest = run_protocol(m, 8, ObfuscationMode::ewd, method, cfg);
      REQUIRE(honest.auth.verdict == 1);
      CHECK(honest.auth.value * 10.0 <= honest.auth.epsilon);

      ProtocolConfig faulty = cfg;
      FaultSpec fault;
      fault.target_server = 3;
      fault.block = "U_33";
      fault.where = FaultWhere::result;
      fault.magnitude = 1e-3;
      faulty.faults.push_back(fault);
      const auto bad = run_protocol(m, 8, ObfuscationMode::ewd, method, faulty);
      CHECK(bad.auth.verdict == 0);
      CHECK(bad.auth.value >= 100.0 * bad.auth.epsilon);
    }
  }
}

TEST_CASE("deterministic and concurrent protocol runs agree") {
  std::mt19937_64 rng(63);
  const Matrix m = random_dominant(9, rng);
  ProtocolConfig det_cfg = config_with_seed(500);
  ProtocolConfig con_cfg = config_with_seed(500);
  con_cfg.sim_mode = SimMode::concurrent;
  const auto det = run_protocol(m, 3, ObfuscationMode::ewm, AuthMethod::q3, det_cfg);
  const auto con = run_protocol(m, 3, ObfuscationMode::ewm, AuthMethod::q3, con_cfg);
  REQUIRE(det.det_m.has_value());
  REQUIRE(con.det_m.has_value());
  CHECK(det.det_m->value() == con.det_m->value());  // bit-exact
  CHECK(det.auth.value == con.auth.value);
}
