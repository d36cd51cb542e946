#pragma once
// SHA-256 helpers (OpenSSL EVP) used to fingerprint configs and witness data.

#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <string>

#include "core.hpp"

namespace kplab {

inline std::string sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

// Canonical matrix serialization: row-major shortest-round-trip decimals.
inline std::string serializeMatrix(const Mat& m) {
  std::string s;
  char buf[40];
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g,", m(r, c));
      s += buf;
    }
  return s;
}

}  // namespace kplab
