#ifndef SPDC_OBFUSCATION_HPP
#define SPDC_OBFUSCATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spdc/det_value.hpp"
#include "spdc/hash.hpp"
#include "spdc/matrix.hpp"

namespace spdc {

// Element-wise obfuscation variant: rows divided or multiplied by the
// blinding vector.
enum class ObfuscationMode { ewd, ewm };

std::string to_string(ObfuscationMode m);
ObfuscationMode obfuscation_mode_from_string(const std::string& s);

// Hash-derived scalar seed plus the matrix statistics it was derived from.
struct SeedBundle {
  Bytes lambda1;
  double psi = 0.0;  // in [2, 2^20]
  double mu = 0.0;
  double m_max = 0.0;
};

// Secret per-row blinding factors with product psi, none equal to 1.
struct BlindingKey {
  std::vector<double> v;
  ObfuscationMode mode = ObfuscationMode::ewd;
  Bytes lambda2;
};

// Ciphertext with the metadata determinant recovery needs (everything
// except psi itself).
struct CipherEnvelope {
  Matrix x;
  std::size_t n_original = 0;
  Rotation theta = Rotation::cw90;
  ObfuscationMode mode = ObfuscationMode::ewd;
  std::size_t pad = 0;  // set later by the partition plan
};

// psi = H(lambda1, mu, m_max) mapped into [2, 2^20): the hash runs over
// lambda1 length-prefixed plus both statistics as little-endian IEEE bits,
// and the top 64 digest bits select the point in the range. The mean needs
// a full n^2 scan; *ops reports it as measured, one unit per add/compare.
SeedBundle seed_gen(const Bytes& lambda1, const Matrix& m, std::uint64_t* ops = nullptr);

// Blinding vector from a hash stream keyed by (lambda2, psi). Elements are
// log-uniform in a factor-8 band around psi^(1/n) so the forced last
// element lands in a factor-64 band of the same center for every
// psi in range; the whole vector is resampled until it does.
BlindingKey key_gen(const Bytes& lambda2, const SeedBundle& seed, std::size_t n,
                    ObfuscationMode mode);

// floor(psi) mod 3 selects 90/180/270 degrees.
Rotation rotate_select(double psi);

// Row scaling only (the first cipher layer); counts one scalar op per
// element.
Matrix apply_blinding(const BlindingKey& key, const Matrix& m, std::uint64_t* flops = nullptr);

// Full cipher: blinding then rotation by rotate_select(psi). Exactly n^2
// scalar ops are charged; the rotation is a free permutation.
CipherEnvelope cipher(const BlindingKey& key, const SeedBundle& seed, const Matrix& m,
                      std::uint64_t* flops = nullptr);

// det(M) from det(X): undoes the rotation sign and the blinding product.
// Two multiplicative updates in sign/log form.
DetValue decipher(const SeedBundle& seed, const CipherEnvelope& env_meta, const DetValue& det_x,
                  std::uint64_t* ops = nullptr);

// Line-oriented key/seed export for reproducible experiments:
//   lambda1=<hex> / psi=<decimal> / mode=EWD|EWM / v=<comma separated> /
//   theta=<90|180|270>
struct KeyFile {
  Bytes lambda1;
  double psi = 0.0;
  ObfuscationMode mode = ObfuscationMode::ewd;
  std::vector<double> v;
  Rotation theta = Rotation::cw90;
};

std::string write_key_file(const KeyFile& kf);
KeyFile parse_key_file(const std::string& text);

}  // namespace spdc

#endif
