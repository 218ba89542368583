#include "spdc/obfuscation.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "spdc/error.hpp"

namespace spdc {

namespace {

constexpr double kPsiLow = 2.0;
constexpr double kPsiHigh = 1048576.0;  // 2^20
constexpr double kLn8 = 2.0794415416798357;
constexpr double kLn64 = 4.1588830833596715;
constexpr int kVectorResamples = 256;
constexpr int kElementRedraws = 64;

void append_u64_le(Bytes& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void append_double_le(Bytes& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  append_u64_le(buf, bits);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(ObfuscationMode m) {
  return m == ObfuscationMode::ewd ? "EWD" : "EWM";
}

ObfuscationMode obfuscation_mode_from_string(const std::string& s) {
  if (s == "EWD") return ObfuscationMode::ewd;
  if (s == "EWM") return ObfuscationMode::ewm;
  throw IoError("unknown obfuscation mode \"" + s + "\" (expected EWD or EWM)");
}

SeedBundle seed_gen(const Bytes& lambda1, const Matrix& m, std::uint64_t* ops) {
  if (!m.square()) throw DimensionError("seed_gen: matrix must be square");
  double sum = 0.0, mx = m.at(0, 0);
  for (double v : m.data()) {
    sum += v;
    if (v > mx) mx = v;
  }
  if (ops) *ops += 2 * m.size() + 1;
  SeedBundle out;
  out.lambda1 = lambda1;
  out.mu = sum / static_cast<double>(m.size());
  out.m_max = mx;

  Bytes enc;
  append_u64_le(enc, lambda1.size());
  enc.insert(enc.end(), lambda1.begin(), lambda1.end());
  append_double_le(enc, out.mu);
  append_double_le(enc, out.m_max);
  const auto digest = sha256(enc);
  std::uint64_t top = 0;
  for (int i = 0; i < 8; ++i) top = (top << 8) | digest[i];
  out.psi = kPsiLow + (static_cast<double>(top) * 0x1.0p-64) * (kPsiHigh - kPsiLow);
  return out;
}

BlindingKey key_gen(const Bytes& lambda2, const SeedBundle& seed, std::size_t n,
                    ObfuscationMode mode) {
  if (n == 0) throw KeyGenError("key_gen: vector length must be >= 1");
  if (!(seed.psi >= kPsiLow && seed.psi <= kPsiHigh))
    throw KeyGenError("key_gen: seed out of range");

  BlindingKey key;
  key.mode = mode;
  key.lambda2 = lambda2;

  if (n == 1) {
    if (std::fabs(seed.psi - 1.0) <= 1e-6)
      throw KeyGenError("key_gen: seed too close to 1 for a single-element vector");
    key.v = {seed.psi};
    return key;
  }

  Bytes material = lambda2;
  append_double_le(material, seed.psi);
  HashStream stream(material);

  const double center = std::log(seed.psi) / static_cast<double>(n);
  for (int attempt = 0; attempt < kVectorResamples; ++attempt) {
    std::vector<double> v(n);
    double partial = 1.0;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < n && ok; ++i) {
      double draw = 0.0;
      ok = false;
      for (int r = 0; r < kElementRedraws; ++r) {
        draw = std::exp(center + stream.next_range(-kLn8, kLn8));
        if (std::fabs(draw - 1.0) > 1e-3) {
          ok = true;
          break;
        }
      }
      v[i] = draw;
      partial *= draw;
    }
    if (!ok) continue;
    const double last = seed.psi / partial;
    if (std::fabs(std::log(last) - center) > kLn64) continue;
    if (std::fabs(last - 1.0) <= 1e-6) continue;
    v[n - 1] = last;
    key.v = std::move(v);
    return key;
  }
  throw KeyGenError("key_gen: resample budget exhausted");
}

Rotation rotate_select(double psi) {
  if (!(psi > 0.0) || !std::isfinite(psi)) throw Error("rotate_select: seed must be positive");
  const auto quantized = static_cast<std::uint64_t>(std::floor(psi));
  switch (quantized % 3 + 1) {
    case 1: return Rotation::cw90;
    case 2: return Rotation::cw180;
    default: return Rotation::cw270;
  }
}

Matrix apply_blinding(const BlindingKey& key, const Matrix& m, std::uint64_t* flops) {
  if (!m.square()) throw DimensionError("apply_blinding: matrix must be square");
  if (key.v.size() != m.rows())
    throw DimensionError("apply_blinding: key length does not match matrix side");
  const std::size_t n = m.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double vi = key.v[i];
    for (std::size_t j = 0; j < n; ++j)
      out.at(i, j) = key.mode == ObfuscationMode::ewd ? m.at(i, j) / vi : m.at(i, j) * vi;
  }
  if (flops) *flops += n * n;
  return out;
}

CipherEnvelope cipher(const BlindingKey& key, const SeedBundle& seed, const Matrix& m,
                      std::uint64_t* flops) {
  const Matrix blinded = apply_blinding(key, m, flops);
  const Rotation theta = rotate_select(seed.psi);
  return CipherEnvelope{rotate(blinded, theta), m.rows(), theta, key.mode, 0};
}

DetValue decipher(const SeedBundle& seed, const CipherEnvelope& env_meta, const DetValue& det_x,
                  std::uint64_t* ops) {
  const int s = rotation_sign(env_meta.n_original, env_meta.theta);
  DetValue result = det_x;
  result.flip_sign(s);
  if (env_meta.mode == ObfuscationMode::ewd)
    result.scale(seed.psi);
  else
    result.scale(1.0 / seed.psi);
  if (ops) *ops += 2;
  return result;
}

std::string write_key_file(const KeyFile& kf) {
  std::string out;
  out += "lambda1=" + hex_encode(kf.lambda1.data(), kf.lambda1.size()) + "\n";
  out += "psi=" + format_double(kf.psi) + "\n";
  out += "mode=" + to_string(kf.mode) + "\n";
  out += "v=";
  for (std::size_t i = 0; i < kf.v.size(); ++i) {
    if (i) out += ",";
    out += format_double(kf.v[i]);
  }
  out += "\n";
  out += "theta=" + std::to_string(degrees(kf.theta)) + "\n";
  return out;
}

KeyFile parse_key_file(const std::string& text) {
  KeyFile kf;
  bool have_lambda1 = false, have_psi = false, have_mode = false, have_v = false,
       have_theta = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  const auto parse_double = [&lineno](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw IoError("key file line " + std::to_string(lineno) + ": bad number \"" + s + "\"");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("key file line " + std::to_string(lineno) + ": missing '='");
    const std::string name = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (name == "lambda1") {
      kf.lambda1 = hex_decode(value);
      have_lambda1 = true;
    } else if (name == "psi") {
      kf.psi = parse_double(value);
      have_psi = true;
    } else if (name == "mode") {
      kf.mode = obfuscation_mode_from_string(value);
      have_mode = true;
    } else if (name == "v") {
      kf.v.clear();
      std::istringstream vs(value);
      std::string item;
      while (std::getline(vs, item, ',')) kf.v.push_back(parse_double(item));
      have_v = true;
    } else if (name == "theta") {
      if (value != "90" && value != "180" && value != "270")
        throw IoError("key file line " + std::to_string(lineno) + ": theta must be 90/180/270");
      kf.theta = rotation_from_degrees(std::stoi(value));
      have_theta = true;
    } else {
      throw IoError("key file line " + std::to_string(lineno) + ": unknown field \"" + name +
                    "\"");
    }
  }
  if (!(have_lambda1 && have_psi && have_mode && have_v && have_theta))
    throw IoError("key file is missing required fields");
  return kf;
}

}  // namespace spdc
