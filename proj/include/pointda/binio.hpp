#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pointda/common.hpp"

namespace pointda {

// Little-endian binary writer that tracks an FNV-1a checksum of everything
// written. All on-disk formats in this project end with the 8-byte checksum.
class BinWriter {
 public:
  explicit BinWriter(const std::string& path);
  ~BinWriter();

  void raw(const void* data, std::size_t n);
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i64(std::int64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s);
  void f32_array(const float* p, std::size_t n) { raw(p, 4 * n); }
  void f64_array(const double* p, std::size_t n) { raw(p, 8 * n); }

  // Writes the checksum and closes. Must be the last call.
  void finish();

  std::uint64_t checksum() const { return hash_; }

 private:
  std::ofstream out_;
  std::string path_;
  std::uint64_t hash_ = kFnvOffset;
  bool finished_ = false;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path);

  void raw(void* data, std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  float f32();
  double f64();
  std::string str();
  void f32_array(float* p, std::size_t n) { raw(p, 4 * n); }
  void f64_array(double* p, std::size_t n) { raw(p, 8 * n); }

  // Reads the trailing checksum and verifies it against the bytes consumed
  // so far. Throws IoError on mismatch or trailing garbage.
  void verify_checksum();

  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::uint64_t hash_ = kFnvOffset;
  std::uint64_t size_ = 0;
  std::uint64_t consumed_ = 0;
};

std::uint64_t file_checksum(const std::string& path);

}  // namespace pointda
