#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "spdc/error.hpp"
#include "spdc/obfuscation.hpp"
#include "test_support.hpp"

using namespace spdc;
using namespace spdc::test;

namespace {

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

SeedBundle fixed_seed(double psi) {
  SeedBundle s;
  s.lambda1 = bytes_of("fixed");
  s.psi = psi;
  s.mu = 0.0;
  s.m_max = 1.0;
  return s;
}

}  // namespace

TEST_CASE("seed statistics and determinism") {
  const Matrix m{{1, 2}, {3, 4}};
  const SeedBundle s = seed_gen(bytes_of("lambda-one"), m);
  CHECK(s.mu == doctest::Approx(2.5));
  CHECK(s.m_max == 4.0);
  CHECK(s.psi >= 2.0);
  CHECK(s.psi <= 1048576.0);

  const SeedBundle again = seed_gen(bytes_of("lambda-one"), m);
  CHECK(again.psi == s.psi);
  CHECK(seed_gen(bytes_of("lambda-two"), m).psi != s.psi);
}

TEST_CASE("seed range sweep over many random matrices") {
  std::mt19937_64 rng(21);
  std::set<double> seen;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng() % 7);
    const SeedBundle s = seed_gen(bytes_of("sweep"), random_matrix(n, rng));
    CHECK(s.psi >= 2.0);
    CHECK(s.psi <= 1048576.0);
    CHECK(s.psi != 1.0);
    seen.insert(s.psi);
  }
  CHECK(seen.size() > 990);  // distinct inputs should not collide
}

TEST_CASE("blinding key: forced single element and product constraint") {
  const BlindingKey k1 = key_gen(bytes_of("l2"), fixed_seed(6.0), 1, ObfuscationMode::ewd);
  REQUIRE(k1.v.size() == 1);
  CHECK(k1.v[0] == 6.0);

  const BlindingKey k3 = key_gen(bytes_of("l2"), fixed_seed(6.0), 3, ObfuscationMode::ewd);
  REQUIRE(k3.v.size() == 3);
  CHECK(std::fabs(k3.v[0] * k3.v[1] * k3.v[2] - 6.0) <= 6e-12);
  for (double v : k3.v) CHECK(std::fabs(v - 1.0) > 1e-6);
}

TEST_CASE("blinding key determinism and sensitivity") {
  const SeedBundle s = fixed_seed(977.25);
  const BlindingKey a = key_gen(bytes_of("k"), s, 8, ObfuscationMode::ewm);
  const BlindingKey b = key_gen(bytes_of("k"), s, 8, ObfuscationMode::ewm);
  CHECK(a.v == b.v);
  CHECK(key_gen(bytes_of("other"), s, 8, ObfuscationMode::ewm).v != a.v);
}

TEST_CASE("blinding key product constraint across the seed range") {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 200; ++t) {
    const double psi = std::exp(uniform(rng, std::log(2.0), std::log(1048576.0)));
    const std::size_t n = 2 + static_cast<std::size_t>(rng() % 31);
    const BlindingKey k = key_gen(bytes_of("range"), fixed_seed(psi), n, ObfuscationMode::ewd);
    double prod = 1.0;
    const double center = std::log(psi) / static_cast<double>(n);
    for (double v : k.v) {
      prod *= v;
      CHECK(std::fabs(v - 1.0) > 1e-6);
      CHECK(std::fabs(std::log(v) - center) <= std::log(64.0) + 1e-9);
    }
    CHECK(std::fabs(prod - psi) <= psi * 1e-12);
  }
}

TEST_CASE("key_gen rejects n = 0") {
  CHECK_THROWS_AS(key_gen(bytes_of("x"), fixed_seed(6.0), 0, ObfuscationMode::ewd), KeyGenError);
}

TEST_CASE("rotation selection quantizes the seed") {
  CHECK(rotate_select(6.7) == Rotation::cw90);
  CHECK(rotate_select(7.2) == Rotation::cw180);
  CHECK(rotate_select(8.9) == Rotation::cw270);
  CHECK_THROWS_AS(rotate_select(-1.0), Error);
}

TEST_CASE("cipher worked example, EWD + quarter turn") {
  const Matrix m{{1, 2}, {3, 4}};
  BlindingKey key{{2.0, 3.0}, ObfuscationMode::ewd, bytes_of("l2")};

  const Matrix blinded = apply_blinding(key, m);
  CHECK(blinded == Matrix{{0.5, 1.0}, {1.0, 4.0 / 3.0}});
  CHECK(det_cofactor(blinded) == doctest::Approx(-1.0 / 3.0));

  const SeedBundle seed = fixed_seed(6.0);  // floor(6) % 3 + 1 = 1 -> 90 degrees
  std::uint64_t flops = 0;
  const CipherEnvelope env = cipher(key, seed, m, &flops);
  CHECK(env.theta == Rotation::cw90);
  CHECK(env.x == Matrix{{1.0, 0.5}, {4.0 / 3.0, 1.0}});
  CHECK(det_cofactor(env.x) == doctest::Approx(1.0 / 3.0));
  CHECK(flops == 4);  // n^2 scaling operations, rotation is free
  CHECK(env.n_original == 2);
}

TEST_CASE("cipher worked example, EWM + half turn") {
  const Matrix m{{1, 2}, {3, 4}};
  BlindingKey key{{2.0, 3.0}, ObfuscationMode::ewm, bytes_of("l2")};

  const Matrix blinded = apply_blinding(key, m);
  CHECK(blinded == Matrix{{2.0, 4.0}, {9.0, 12.0}});
  CHECK(det_cofactor(blinded) == doctest::Approx(-12.0));

  const SeedBundle seed = fixed_seed(7.5);  // floor -> 7, 7 % 3 + 1 = 2 -> 180 degrees
  const CipherEnvelope env = cipher(key, seed, m);
  CHECK(env.theta == Rotation::cw180);
  CHECK(det_cofactor(env.x) == doctest::Approx(-12.0));
}

TEST_CASE("cipher rejects a key of the wrong length") {
  BlindingKey key{{2.0, 3.0}, ObfuscationMode::ewd, bytes_of("l2")};
  CHECK_THROWS_AS(apply_blinding(key, Matrix::identity(3)), DimensionError);
}

TEST_CASE("cipher with the blinding layer removed is a pure rotation") {
  std::mt19937_64 rng(23);
  const Matrix m = random_matrix(5, rng);
  const SeedBundle seed = fixed_seed(41.0);
  BlindingKey key = key_gen(bytes_of("sep"), seed, 5, ObfuscationMode::ewd);
  const CipherEnvelope env = cipher(key, seed, m);
  CHECK(env.x == rotate(apply_blinding(key, m), env.theta));
}

TEST_CASE("decipher inverts the worked examples") {
  // EWD: det_x = 1/3, theta 90, n = 2 (sign -1), psi 6 -> det(M) = -2
  CipherEnvelope meta{Matrix::identity(2), 2, Rotation::cw90, ObfuscationMode::ewd, 0};
  std::uint64_t ops = 0;
  const DetValue ewd =
      decipher(fixed_seed(6.0), meta, DetValue::from_value(1.0 / 3.0), &ops);
  CHECK(ewd.sign() == -1);
  CHECK(ewd.value() == doctest::Approx(-2.0));
  CHECK(ops == 2);

  // EWM: det_x = -12, theta 180 (sign +1), psi 6 -> det(M) = -2
  meta.theta = Rotation::cw180;
  meta.mode = ObfuscationMode::ewm;
  const DetValue ewm = decipher(fixed_seed(6.0), meta, DetValue::from_value(-12.0));
  CHECK(ewm.sign() == -1);
  CHECK(ewm.value() == doctest::Approx(-2.0));
}

TEST_CASE("decipher propagates a singular input") {
  CipherEnvelope meta{Matrix::identity(2), 2, Rotation::cw90, ObfuscationMode::ewd, 0};
  CHECK(decipher(fixed_seed(6.0), meta, DetValue::zero()).sign() == 0);
}

TEST_CASE("cipher/decipher round trip recovers the determinant") {
  std::mt19937_64 rng(24);
  for (std::size_t n = 2; n <= 32; n += 3) {
    for (ObfuscationMode mode : {ObfuscationMode::ewd, ObfuscationMode::ewm}) {
      const Matrix m = random_dominant(n, rng);
      const SeedBundle seed = seed_gen(bytes_of("round"), m);
      const BlindingKey key = key_gen(bytes_of("trip"), seed, n, mode);
      const CipherEnvelope env = cipher(key, seed, m);
      const DetValue recovered = decipher(seed, env, det_oracle(env.x));
      const DetValue want = det_oracle(m);
      CHECK(recovered.sign() == want.sign());
      CHECK(recovered.approx_equal(want, 1e-8));
    }
  }
}

TEST_CASE("key file round trip") {
  KeyFile kf;
  kf.lambda1 = bytes_of("\x01\x02\xff");
  kf.psi = 977.2578125;
  kf.mode = ObfuscationMode::ewm;
  kf.v = {2.0, 3.0, 977.2578125 / 6.0};
  kf.theta = Rotation::cw270;

  const std::string text = write_key_file(kf);
  const KeyFile back = parse_key_file(text);
  CHECK(back.lambda1 == kf.lambda1);
  CHECK(back.psi == kf.psi);
  CHECK(back.mode == kf.mode);
  CHECK(back.v == kf.v);
  CHECK(back.theta == kf.theta);

  CHECK_THROWS_AS(parse_key_file("psi=6\n"), IoError);
  CHECK_THROWS_AS(parse_key_file("bogus\n"), IoError);
}
