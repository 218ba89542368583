#include "spdc/client.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "spdc/error.hpp"
#include "spdc/hash.hpp"

namespace spdc {

namespace {

std::vector<double> draw_probe(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> r(n);
  for (auto& v : r) v = static_cast<double>(1 + (rng() % 65536));
  return r;
}

double scale_from(const Matrix& x, AuthMethod method, const std::vector<double>* r,
                  std::uint64_t* flops) {
  if (method == AuthMethod::q3) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) s += std::fabs(x.at(i, i));
    if (flops) *flops += x.rows();
    return 1.0 + s;
  }
  if (!r) throw Error("threshold: Q1/Q2 scale needs the probe vector");
  // Termwise magnitude of the quadratic form r^T X r. The signed form can
  // cancel arbitrarily close to zero, which would starve the threshold.
  const std::vector<double> xr = matvec(x, *r, flops);
  double s = 0.0;
  for (std::size_t i = 0; i < r->size(); ++i) s += std::fabs((*r)[i] * xr[i]);
  if (flops) *flops += 2ull * r->size();
  return 1.0 + s;
}

}  // namespace

std::string to_string(AuthMethod m) {
  switch (m) {
    case AuthMethod::q1: return "Q1";
    case AuthMethod::q2: return "Q2";
    case AuthMethod::q3: return "Q3";
  }
  return "?";
}

AuthMethod auth_method_from_string(const std::string& s) {
  if (s == "Q1") return AuthMethod::q1;
  if (s == "Q2") return AuthMethod::q2;
  if (s == "Q3") return AuthMethod::q3;
  throw IoError("unknown authentication method \"" + s + "\" (expected Q1, Q2 or Q3)");
}

PartitionPlan plan_partition(std::size_t n, std::size_t servers) {
  if (n < 1) throw DimensionError("plan_partition: n must be >= 1");
  if (servers < 2) throw DimensionError("plan_partition: need at least two servers");
  PartitionPlan plan;
  plan.n = n;
  plan.servers = servers;
  std::size_t p = 0;
  while ((n + p) % servers != 0 || (n + p) / servers <= 1) ++p;
  plan.pad = p;
  plan.block_size = (n + p) / servers;
  return plan;
}

double threshold(std::size_t servers, std::size_t n, const Matrix& x, AuthMethod method,
                 const std::vector<double>* r) {
  return kThresholdBase * static_cast<double>(servers) * static_cast<double>(n) *
         scale_from(x, method, r, nullptr);
}

LuPair assemble(const std::vector<ServerResult>& results, const PartitionPlan& plan) {
  const std::size_t n_servers = plan.servers;
  const std::size_t bs = plan.block_size;
  std::string missing;
  std::vector<const ServerResult*> by_index(n_servers + 1, nullptr);
  for (const auto& res : results) {
    if (res.server >= 1 && res.server <= n_servers && !res.failure && !res.blocks.empty())
      by_index[res.server] = &res;
  }
  for (std::size_t i = 1; i <= n_servers; ++i) {
    if (!by_index[i]) missing += (missing.empty() ? "S_" : ", S_") + std::to_string(i);
  }
  if (!missing.empty()) throw Error("assemble: missing or failed results from " + missing);

  const std::size_t side = n_servers * bs;
  Matrix l(side, side), u(side, side);
  for (std::size_t i = 1; i <= n_servers; ++i) {
    for (const auto& b : by_index[i]->blocks) {
      if (b.m.rows() != bs || b.m.cols() != bs)
        throw DimensionError("assemble: block " + b.label + " has the wrong size");
      const auto [bi, bj] = block_indices(b.label);
      Matrix& dst = b.label[0] == 'L' ? l : u;
      for (std::size_t r = 0; r < bs; ++r)
        for (std::size_t c = 0; c < bs; ++c)
          dst.at((bi - 1) * bs + r, (bj - 1) * bs + c) = b.m.at(r, c);
    }
  }
  return {std::move(l), std::move(u)};
}

DetValue det_from_lu(const Matrix& l, const Matrix& u, std::uint64_t* ops) {
  if (!l.square() || !u.square() || l.rows() != u.rows())
    throw DimensionError("det_from_lu: L and U must be square and equal-sized");
  DetValue det = DetValue::one();
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < l.rows(); ++i) {
    double pair = u.at(i, i);
    if (l.at(i, i) != 1.0) {
      pair *= l.at(i, i);
      ++count;
    }
    det.scale(pair);
    if (i > 0) ++count;  // fold into the running product
  }
  if (ops) *ops += count;
  return det;
}

AuthReport authenticate(const Matrix& l, const Matrix& u, const Matrix& x, AuthMethod method,
                        std::size_t servers, std::mt19937_64& rng, std::uint64_t* flops) {
  if (!x.square() || l.rows() != x.rows() || u.rows() != x.rows())
    throw DimensionError("authenticate: L, U, X sizes differ");
  const std::size_t n = x.rows();
  AuthReport report;
  report.method = method;

  double scale = 0.0;
  if (method == AuthMethod::q3) {
    // Triangular diagonal residual: sum_i (sum_{j<=i} L_ij U_ji - x_ii).
    double q = 0.0;
    std::uint64_t ops = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        acc += l.at(i, j) * u.at(j, i);
        ops += 2;
      }
      q += acc - x.at(i, i);
      ops += 2;
    }
    report.value = std::fabs(q);
    scale = scale_from(x, method, nullptr, &ops);
    if (flops) *flops += ops;
  } else {
    report.r = draw_probe(n, rng);
    std::uint64_t ops = 0;
    const std::vector<double> xr = matvec(x, report.r, &ops);
    if (method == AuthMethod::q1) {
      const std::vector<double> ur = matvec(u, report.r, &ops);
      const std::vector<double> lur = matvec(l, ur, &ops);
      double mx = 0.0;
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, std::fabs(lur[i] - xr[i]));
      ops += n;
      report.value = mx;
    } else {
      const std::vector<double> lt_r = matvec_transposed(l, report.r, &ops);
      const std::vector<double> ur = matvec(u, report.r, &ops);
      report.value = std::fabs(dot(lt_r, ur, &ops) - dot(report.r, xr, &ops));
      ops += 1;
    }
    scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) scale += std::fabs(report.r[i] * xr[i]);
    ops += 2 * n;
    if (flops) *flops += ops;
  }

  report.epsilon = kThresholdBase * static_cast<double>(servers) * static_cast<double>(n) * scale;
  report.verdict = report.value <= report.epsilon ? 1 : 0;
  return report;
}

ProtocolOutcome run_protocol(const Matrix& m, std::size_t servers, ObfuscationMode mode,
                             AuthMethod method, const ProtocolConfig& config) {
  if (!m.square()) throw DimensionError("run_protocol: matrix must be square");
  const std::size_t n = m.rows();
  std::mt19937_64 rng(config.rng_seed);

  std::uint64_t seedgen_ops = 0;
  const SeedBundle seed = seed_gen(config.lambda1, m, &seedgen_ops);

  ProtocolOutcome outcome;
  outcome.mode = mode;
  {
    Bytes psi_bytes(8);
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(seed.psi));
    std::memcpy(&bits, &seed.psi, sizeof(bits));
    for (int i = 0; i < 8; ++i) psi_bytes[i] = static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff);
    const auto digest = sha256(psi_bytes);
    outcome.psi_digest = hex_encode(digest.data(), 8);
  }

  for (int attempt = 0;; ++attempt) {
    Bytes lambda2 = config.lambda2;
    if (attempt > 0) lambda2.push_back(static_cast<std::uint8_t>(attempt));

    const BlindingKey key = key_gen(lambda2, seed, n, mode);
    ClientCounters counters;
    counters.seedgen_ops = seedgen_ops;
    CipherEnvelope env = cipher(key, seed, m, &counters.cipher_flops);

    const PartitionPlan plan = plan_partition(env.x.rows(), servers);
    env.pad = plan.pad;
    const Matrix x_padded = augment(env.x, plan.pad, AugmentFill::zero_col, rng);
    const BlockGrid grid = partition(x_padded, servers);

    SimOutcome sim = run_simulation(plan, grid, config.sim_mode, config.faults,
                                    config.rng_seed + static_cast<std::uint64_t>(attempt));
    if (sim.failed) {
      if (attempt >= config.max_retries)
        throw RetryExhaustedError("run_protocol: retries exhausted; server " +
                                  std::to_string(sim.failed_server) +
                                  " reported: " + sim.fail_reason);
      continue;
    }

    LuPair lu = assemble(sim.results, plan);
    AuthReport auth =
        authenticate(lu.l, lu.u, x_padded, method, servers, rng, &counters.auth_flops);

    outcome.auth = std::move(auth);
    outcome.trace = std::move(sim.trace);
    outcome.retries = attempt;
    outcome.plan = plan;
    outcome.theta = env.theta;
    outcome.counters = counters;
    if (outcome.auth.verdict == 1) {
      DetValue det_x = det_from_lu(lu.l, lu.u, &outcome.counters.decipher_ops);
      outcome.det_m = decipher(seed, env, det_x, &outcome.counters.decipher_ops);
    }
    return outcome;
  }
}

}  // namespace spdc
