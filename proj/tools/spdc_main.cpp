// spdc: secure outsourced determinant computation over simulated edge
// servers. Subcommands: run one protocol execution, bench a sweep into a
// metrics CSV, verify the built-in invariant suites, and re-validate a
// stored trace.
#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spdc/client.hpp"
#include "spdc/error.hpp"
#include "spdc/matrix_io.hpp"
#include "spdc/netsim.hpp"
#include "spdc/obfuscation.hpp"

using namespace spdc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitTamper = 2;
constexpr int kExitSingular = 3;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Matrix random_square(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> data(n * n);
  for (auto& v : data) v = 2.0 * unit_draw(rng) - 1.0;
  return Matrix(n, n, std::move(data));
}

Matrix dominant_square(std::size_t n, std::mt19937_64& rng) {
  Matrix m = random_square(n, rng);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row += std::fabs(m.at(i, j));
    m.at(i, i) = (rng() & 1 ? 1.0 : -1.0) * (row + 1.0 + unit_draw(rng));
  }
  return m;
}

FaultSpec parse_fault(const std::string& text) {
  FaultSpec fault;
  bool have_server = false, have_block = false;
  std::istringstream in(text);
  std::string item;
  const auto numeric = [](const std::string& key, const std::string& value) {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw IoError("fault '" + key + "' needs a number, got \"" + value + "\"");
    }
  };
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw IoError("fault spec item \"" + item + "\" is not key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "server") {
      fault.target_server = static_cast<std::size_t>(numeric(key, value));
      have_server = true;
    } else if (key == "block") {
      fault.block = value;
      have_block = true;
    } else if (key == "rel") {
      fault.magnitude = numeric(key, value);
    } else if (key == "where") {
      if (value == "transit")
        fault.where = FaultWhere::transit;
      else if (value == "result")
        fault.where = FaultWhere::result;
      else
        throw IoError("fault 'where' must be transit or result");
    } else if (key == "kind") {
      if (value == "add")
        fault.kind = FaultKind::additive;
      else if (value == "replace")
        fault.kind = FaultKind::replace_random;
      else
        throw IoError("fault 'kind' must be add or replace");
    } else {
      throw IoError("unknown fault key \"" + key + "\"");
    }
  }
  if (!have_server || !have_block)
    throw IoError("fault spec needs at least server=<i>,block=<label>");
  return fault;
}

struct CommonOpts {
  std::size_t servers = 2;
  std::string mode = "EWD";
  std::string method = "Q3";
  std::uint64_t seed = 1;
  std::string lambda1_hex = "00112233445566778899aabbccddeeff";
  std::string lambda2_hex = "ffeeddccbbaa99887766554433221100";
  int max_retries = 3;
  bool concurrent = false;
  std::string fault_text;
};

ProtocolConfig to_config(const CommonOpts& o) {
  ProtocolConfig cfg;
  cfg.lambda1 = hex_decode(o.lambda1_hex);
  cfg.lambda2 = hex_decode(o.lambda2_hex);
  cfg.rng_seed = o.seed;
  cfg.max_retries = o.max_retries;
  cfg.sim_mode = o.concurrent ? SimMode::concurrent : SimMode::deterministic;
  if (!o.fault_text.empty()) cfg.faults.push_back(parse_fault(o.fault_text));
  return cfg;
}

std::string report_text(const std::string& matrix_path, std::size_t n, const CommonOpts& opts,
                        const ProtocolOutcome& out) {
  std::ostringstream os;
  os << "spdc run report\n";
  os << "matrix=" << matrix_path << "\n";
  os << "n=" << n << "\n";
  os << "servers=" << opts.servers << "\n";
  os << "mode=" << opts.mode << "\n";
  os << "method=" << opts.method << "\n";
  os << "seed=" << opts.seed << "\n";
  os << "padding=" << out.plan.pad << "\n";
  os << "block_size=" << out.plan.block_size << "\n";
  os << "theta=" << degrees(out.theta) << "\n";
  os << "psi_digest=" << out.psi_digest << "\n";
  os << "retries=" << out.retries << "\n";
  os << "auth_method=" << to_string(out.auth.method) << "\n";
  os << "auth_value=" << fmt(out.auth.value) << "\n";
  os << "auth_epsilon=" << fmt(out.auth.epsilon) << "\n";
  os << "auth_verdict=" << out.auth.verdict << "\n";
  if (out.det_m) {
    os << "det_sign=" << out.det_m->sign() << "\n";
    os << "det_log_magnitude=" << fmt(out.det_m->sign() == 0 ? 0.0 : out.det_m->log_magnitude())
       << "\n";
    const double plain = out.det_m->value();
    os << "det_value=" << (std::isfinite(plain) ? fmt(plain) : "overflow") << "\n";
  } else {
    os << "tamper_detected=1\n";
  }
  os << "messages=" << out.trace.events.size() << "\n";
  os << "reals_sent=" << out.trace.total_reals() << "\n";
  os << "critical_path_flops=" << out.trace.critical_path_flops << "\n";
  os << "seedgen_ops=" << out.counters.seedgen_ops << "\n";
  os << "cipher_flops=" << out.counters.cipher_flops << "\n";
  os << "auth_flops=" << out.counters.auth_flops << "\n";
  os << "decipher_ops=" << out.counters.decipher_ops << "\n";
  for (const auto& f : out.trace.faults) os << "fault=" << f << "\n";
  return os.str();
}

constexpr const char* kMetricsHeader =
    "n,N,method,cipher_flops,max_server_flops,critical_path_flops,auth_flops,"
    "decipher_flops,messages,reals_sent,verdict";

std::string metrics_row(std::size_t n, std::size_t servers, const std::string& method,
                        const ProtocolOutcome& out) {
  std::uint64_t max_server = 0;
  for (const auto& [node, f] : out.trace.flops) max_server = std::max(max_server, f);
  std::ostringstream os;
  os << n << "," << servers << "," << method << "," << out.counters.cipher_flops << ","
     << max_server << "," << out.trace.critical_path_flops << "," << out.counters.auth_flops
     << "," << out.counters.decipher_ops << "," << out.trace.events.size() << ","
     << out.trace.total_reals() << "," << out.auth.verdict;
  return os.str();
}

int cmd_run(const CommonOpts& opts, const std::string& matrix_path, const std::string& out_path,
            const std::string& trace_out, const std::string& metrics_out,
            const std::string& key_out) {
  Matrix m = load_matrix(matrix_path);
  if (!m.square()) {
    std::cerr << "error: " << matrix_path << ": matrix must be square (" << m.rows() << "x"
              << m.cols() << ")\n";
    return kExitUsage;
  }
  const ProtocolConfig cfg = to_config(opts);
  const ObfuscationMode mode = obfuscation_mode_from_string(opts.mode);
  const AuthMethod method = auth_method_from_string(opts.method);

  ProtocolOutcome out = [&] {
    try {
      return run_protocol(m, opts.servers, mode, method, cfg);
    } catch (const RetryExhaustedError& e) {
      std::cerr << "error: " << e.what() << "\n";
      std::exit(kExitSingular);
    }
  }();

  const std::string report = report_text(matrix_path, m.rows(), opts, out);
  std::cout << report;
  if (!out_path.empty()) write_file(out_path, report);
  if (!trace_out.empty()) write_file(trace_out, out.trace.to_text());
  if (!metrics_out.empty())
    write_file(metrics_out,
               std::string(kMetricsHeader) + "\n" +
                   metrics_row(m.rows(), opts.servers, opts.method, out) + "\n");
  if (!key_out.empty()) {
    // Reconstruct the key of the attempt that actually produced the
    // result: retries re-blind with the attempt number appended.
    Bytes lambda2 = cfg.lambda2;
    if (out.retries > 0) lambda2.push_back(static_cast<std::uint8_t>(out.retries));
    const SeedBundle seed = seed_gen(cfg.lambda1, m);
    const BlindingKey key = key_gen(lambda2, seed, m.rows(), mode);
    KeyFile kf{cfg.lambda1, seed.psi, mode, key.v, rotate_select(seed.psi)};
    write_file(key_out, write_key_file(kf));
  }
  return out.auth.verdict == 1 ? kExitOk : kExitTamper;
}

int cmd_bench(const CommonOpts& opts, const std::vector<std::size_t>& sizes,
              const std::vector<std::size_t>& server_sweep, const std::string& metrics_out) {
  const ObfuscationMode mode = obfuscation_mode_from_string(opts.mode);
  const AuthMethod method = auth_method_from_string(opts.method);
  std::ostringstream csv;
  csv << kMetricsHeader << "\n";
  for (const std::size_t n : sizes) {
    std::mt19937_64 gen(opts.seed ^ (0x9e3779b97f4a7c15ull * n));
    const Matrix m = dominant_square(n, gen);
    for (const std::size_t servers : server_sweep) {
      CommonOpts local = opts;
      local.servers = servers;
      const ProtocolOutcome out = run_protocol(m, servers, mode, method, to_config(local));
      csv << metrics_row(n, servers, opts.method, out) << "\n";
    }
  }
  if (metrics_out.empty())
    std::cout << csv.str();
  else
    write_file(metrics_out, csv.str());
  return kExitOk;
}

int cmd_trace(const std::string& trace_path, std::size_t servers) {
  const Trace trace = Trace::from_text(read_file(trace_path));
  if (servers == 0) {
    for (const auto& e : trace.events) {
      if (e.from > 0) servers = std::max(servers, static_cast<std::size_t>(e.from));
      if (e.to > 0) servers = std::max(servers, static_cast<std::size_t>(e.to));
    }
  }
  const auto violations = validate_trace(trace, servers);
  if (violations.empty()) {
    std::cout << "trace ok: " << trace.events.size() << " events, " << servers << " servers\n";
    return kExitOk;
  }
  for (const auto& v : violations) std::cout << "violation: " << v << "\n";
  return kExitTamper;
}

int cmd_verify(std::uint64_t seed) {
  int failures = 0;
  const auto check = [&failures](const char* name, bool ok) {
    std::cout << (ok ? "PASS" : "FAIL") << " " << name << "\n";
    if (!ok) ++failures;
  };

  {
    std::mt19937_64 rng(seed);
    bool ok = true;
    for (std::size_t n = 1; n <= 8 && ok; ++n)
      for (int t = 0; t < 20 && ok; ++t) {
        const Matrix m = random_square(n, rng);
        const DetValue base = det_oracle(m);
        for (Rotation theta :
             {Rotation::cw90, Rotation::cw180, Rotation::cw270, Rotation::cw360}) {
          DetValue want = base;
          want.flip_sign(rotation_sign(n, theta));
          if (!det_oracle(rotate(m, theta)).approx_equal(want, 1e-10)) ok = false;
        }
      }
    check("rotation sign law", ok);
  }
  {
    bool ok = true;
    for (std::size_t n = 1; n <= 64 && ok; ++n)
      for (std::size_t servers = 2; servers <= 8 && ok; ++servers) {
        const PartitionPlan plan = plan_partition(n, servers);
        std::size_t p = 0;
        while (!((n + p) % servers == 0 && (n + p) / servers > 1)) ++p;
        if (plan.pad != p) ok = false;
      }
    check("padding rule", ok);
  }
  {
    std::mt19937_64 rng(seed + 1);
    bool ok = true;
    for (std::size_t servers : {2, 3}) {
      const std::size_t side = servers * 3;
      const Matrix x = dominant_square(side, rng);
      PartitionPlan plan{side, servers, 0, 3};
      const auto sim = run_simulation(plan, partition(x, servers), SimMode::deterministic, {}, 1);
      if (sim.failed) {
        ok = false;
        continue;
      }
      const auto [l, u] = assemble(sim.results, plan);
      const auto dense = lu_plain(x);
      double mx = 0.0;
      const double scale = std::max(dense.u.max_abs(), 1.0);
      for (std::size_t i = 0; i < side; ++i)
        for (std::size_t j = 0; j < side; ++j) {
          mx = std::max(mx, std::fabs(l.at(i, j) - dense.l.at(i, j)) / scale);
          mx = std::max(mx, std::fabs(u.at(i, j) - dense.u.at(i, j)) / scale);
        }
      if (mx > 1e-9) ok = false;
    }
    check("block factorization equals the dense factorization", ok);
  }
  {
    std::mt19937_64 rng(seed + 2);
    const Matrix m = dominant_square(6, rng);
    PartitionPlan plan{6, 3, 0, 2};
    const auto sim = run_simulation(plan, partition(m, 3), SimMode::deterministic, {}, 1);
    check("three-server message schedule", !sim.failed && validate_trace(sim.trace, 3).empty());
  }
  {
    std::mt19937_64 rng(seed + 3);
    bool ok = true;
    ProtocolConfig cfg;
    cfg.lambda1 = hex_decode("aa00");
    cfg.lambda2 = hex_decode("bb11");
    cfg.rng_seed = seed + 3;
    for (std::size_t n : {5, 8}) {
      for (ObfuscationMode mode : {ObfuscationMode::ewd, ObfuscationMode::ewm}) {
        const Matrix m = dominant_square(n, rng);
        const auto out = run_protocol(m, 2, mode, AuthMethod::q3, cfg);
        if (!out.det_m || !out.det_m->approx_equal(det_oracle(m), 1e-7)) ok = false;
      }
    }
    check("end-to-end determinant recovery", ok);
  }
  {
    std::mt19937_64 rng(seed + 4);
    ProtocolConfig cfg;
    cfg.lambda1 = hex_decode("cc22");
    cfg.lambda2 = hex_decode("dd33");
    cfg.rng_seed = seed + 4;
    const std::size_t n = 16;
    const Matrix m = dominant_square(n, rng);
    const auto out = run_protocol(m, 2, ObfuscationMode::ewd, AuthMethod::q3, cfg);
    const bool ok = out.det_m.has_value() && out.counters.cipher_flops == n * n &&
                    out.counters.decipher_ops <= 2 * n &&
                    out.counters.auth_flops <= 2 * n * (n + 1);
    check("operation-count budgets", ok);
  }
  return failures == 0 ? kExitOk : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"secure parallel determinant computation laboratory"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string matrix_path, out_path, trace_out, metrics_out, key_out, trace_path;
  std::vector<std::size_t> sizes{8, 16, 32};
  std::vector<std::size_t> server_sweep{2, 3, 4};
  std::size_t trace_servers = 0;

  const auto add_common = [&](CLI::App* cmd, bool with_servers) {
    if (with_servers)
      cmd->add_option("--servers", opts.servers, "edge server count N")->check(CLI::Range(2, 64));
    cmd->add_option("--mode", opts.mode, "EWD or EWM")
        ->check(CLI::IsMember({"EWD", "EWM"}));
    cmd->add_option("--method", opts.method, "Q1, Q2 or Q3")
        ->check(CLI::IsMember({"Q1", "Q2", "Q3"}));
    cmd->add_option("--seed", opts.seed, "master RNG seed");
    cmd->add_option("--lambda1", opts.lambda1_hex, "hex security parameter for seeding");
    cmd->add_option("--lambda2", opts.lambda2_hex, "hex security parameter for key generation");
    cmd->add_option("--max-retries", opts.max_retries, "re-randomized retries on singularity");
    cmd->add_flag("--concurrent", opts.concurrent, "one worker thread per server");
  };

  auto* run = app.add_subcommand("run", "run the protocol on a matrix file");
  run->add_option("matrix", matrix_path, "matrix file")->required();
  add_common(run, true);
  run->add_option("--fault", opts.fault_text,
                  "inject a fault: server=<i>,block=<label>[,rel=<x>][,where=transit|result]"
                  "[,kind=add|replace]");
  run->add_option("--out", out_path, "write the report here");
  run->add_option("--trace-out", trace_out, "write the message trace here");
  run->add_option("--metrics-out", metrics_out, "write a one-row metrics CSV here");
  run->add_option("--key-out", key_out, "export the seed/key material here");

  auto* bench = app.add_subcommand("bench", "sweep sizes and server counts into a metrics CSV");
  bench->add_option("--sizes", sizes, "matrix sizes to sweep")->delimiter(',');
  bench->add_option("--servers", server_sweep, "server counts to sweep")->delimiter(',');
  bench->add_option("--mode", opts.mode)->check(CLI::IsMember({"EWD", "EWM"}));
  bench->add_option("--method", opts.method)->check(CLI::IsMember({"Q1", "Q2", "Q3"}));
  bench->add_option("--seed", opts.seed);
  bench->add_option("--lambda1", opts.lambda1_hex);
  bench->add_option("--lambda2", opts.lambda2_hex);
  bench->add_flag("--concurrent", opts.concurrent);
  bench->add_option("--metrics-out", metrics_out, "metrics CSV path (stdout when omitted)");

  auto* verify = app.add_subcommand("verify", "run the built-in invariant suites");
  verify->add_option("--seed", opts.seed);

  auto* trace_cmd = app.add_subcommand("trace", "re-validate a stored trace file");
  trace_cmd->add_option("trace", trace_path, "trace file")->required();
  trace_cmd->add_option("--servers", trace_servers, "server count (inferred when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed())
      return cmd_run(opts, matrix_path, out_path, trace_out, metrics_out, key_out);
    if (bench->parsed()) return cmd_bench(opts, sizes, server_sweep, metrics_out);
    if (verify->parsed()) return cmd_verify(opts.seed);
    if (trace_cmd->parsed()) return cmd_trace(trace_path, trace_servers);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
