#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace han {

// Incremental SHA-256 (FIPS 180-4).
class Sha256 {
 public:
  Sha256() { reset(); }

  void reset();
  void update(const void* data, std::size_t len);
  // Finalizes and returns the lowercase hex digest. The object must be
  // reset() before reuse.
  std::string hex_digest();

 private:
  void process_block(const std::uint8_t* block);

  std::uint32_t state_[8];
  std::uint8_t buffer_[64];
  std::size_t buffered_ = 0;
  std::uint64_t total_bytes_ = 0;
};

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
// Streaming hash of a file's bytes; throws han::Error if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace han
