#ifndef SPDC_CLIENT_HPP
#define SPDC_CLIENT_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spdc/det_value.hpp"
#include "spdc/matrix.hpp"
#include "spdc/netsim.hpp"
#include "spdc/obfuscation.hpp"
#include "spdc/plan.hpp"

namespace spdc {

enum class AuthMethod { q1, q2, q3 };

std::string to_string(AuthMethod m);
AuthMethod auth_method_from_string(const std::string& s);

struct AuthReport {
  AuthMethod method = AuthMethod::q3;
  double value = 0.0;  // scalar residual; for Q1 the max-norm of the vector
  double epsilon = 0.0;
  int verdict = 0;        // 1 accept, 0 reject
  std::vector<double> r;  // random probe vector; empty for Q3
};

// Base tolerance of the acceptance threshold eps = tau0 * N * n * S.
constexpr double kThresholdBase = 0x1.0p-40;

// Data-magnitude scale S is 1 + sum |x_ii| for Q3 and 1 + |r^T X r| for
// Q1/Q2 (r required there).
double threshold(std::size_t servers, std::size_t n, const Matrix& x, AuthMethod method,
                 const std::vector<double>* r = nullptr);

// Glues result bundles into block-triangular L and U; off-triangle blocks
// are exact zeros. Throws naming the missing servers if any bundle is
// absent or failed.
LuPair assemble(const std::vector<ServerResult>& results, const PartitionPlan& plan);

// Sign/log product of the diagonal pairs L_ii * U_ii; a zero diagonal
// yields the zero determinant. Multiplicative operations are counted into
// *ops (unit L diagonals cost nothing).
DetValue det_from_lu(const Matrix& l, const Matrix& u, std::uint64_t* ops = nullptr);

// Verifies L*U = X without ever forming L*U: Q1 is the residual vector
// L(Ur) - Xr reduced to a max-norm, Q2 the scalar (L^T r).(Ur) - r.(Xr),
// Q3 the deterministic diagonal residual |sum_i ((LU)_ii - x_ii)|.
// r entries are uniform integers in {1..2^16}.
AuthReport authenticate(const Matrix& l, const Matrix& u, const Matrix& x, AuthMethod method,
                        std::size_t servers, std::mt19937_64& rng,
                        std::uint64_t* flops = nullptr);

struct ProtocolConfig {
  Bytes lambda1;
  Bytes lambda2;
  std::uint64_t rng_seed = 1;
  int max_retries = 3;
  SimMode sim_mode = SimMode::deterministic;
  std::vector<FaultSpec> faults;
};

struct ClientCounters {
  std::uint64_t seedgen_ops = 0;  // measured, not asserted: the mean needs n^2
  std::uint64_t cipher_flops = 0;
  std::uint64_t auth_flops = 0;
  std::uint64_t decipher_ops = 0;  // includes the det-from-LU accumulation
};

struct ProtocolOutcome {
  std::optional<DetValue> det_m;  // populated only when auth.verdict == 1
  AuthReport auth;
  Trace trace;
  int retries = 0;
  PartitionPlan plan;
  Rotation theta = Rotation::cw90;
  ObfuscationMode mode = ObfuscationMode::ewd;
  std::string psi_digest;  // hash prefix of the seed, never the seed itself
  ClientCounters counters;
};

// Full pipeline: seed, key, cipher, pad, partition, simulate, assemble,
// authenticate, recover. A singular pivot re-blinds with a fresh lambda2
// and retries up to max_retries; exhaustion throws RetryExhaustedError.
// A verdict of 0 comes back in the outcome with det_m unset.
ProtocolOutcome run_protocol(const Matrix& m, std::size_t servers, ObfuscationMode mode,
                             AuthMethod method, const ProtocolConfig& config);

}  // namespace spdc

#endif
