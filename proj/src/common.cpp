#include "pointda/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>

#include "pointda/binio.hpp"
#include "pointda/parallel.hpp"

namespace pointda {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  const int nt = static_cast<int>(
      std::max<std::int64_t>(1, std::min<std::int64_t>(resolve_threads(threads), n)));
  if (nt == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  const std::int64_t chunk = std::max<std::int64_t>(1, n / (nt * 8));
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex err_mu;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&] {
      try {
        for (;;) {
          const std::int64_t lo = next.fetch_add(chunk);
          if (lo >= n) break;
          const std::int64_t hi = std::min(n, lo + chunk);
          for (std::int64_t i = lo; i < hi; ++i) fn(i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

BinWriter::BinWriter(const std::string& path)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw IoError("cannot open for write: " + path);
}

BinWriter::~BinWriter() {
  // Missing finish() leaves a file without checksum; readers will reject it.
}

void BinWriter::raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed: " + path_);
  hash_ = fnv1a(data, n, hash_);
}

void BinWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s.data(), s.size());
}

void BinWriter::finish() {
  const std::uint64_t h = hash_;
  out_.write(reinterpret_cast<const char*>(&h), 8);
  out_.close();
  if (!out_) throw IoError("close failed: " + path_);
  finished_ = true;
}

BinReader::BinReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open for read: " + path);
  in_.seekg(0, std::ios::end);
  size_ = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0, std::ios::beg);
  if (size_ < 8) throw IoError("file truncated: " + path);
}

void BinReader::raw(void* data, std::size_t n) {
  if (consumed_ + n > size_ - 8)
    throw IoError("read past end of payload: " + path_);
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in_) throw IoError("read failed: " + path_);
  consumed_ += n;
  hash_ = fnv1a(data, n, hash_);
}

std::uint32_t BinReader::u32() {
  std::uint32_t v;
  raw(&v, 4);
  return v;
}
std::uint64_t BinReader::u64() {
  std::uint64_t v;
  raw(&v, 8);
  return v;
}
std::int64_t BinReader::i64() {
  std::int64_t v;
  raw(&v, 8);
  return v;
}
float BinReader::f32() {
  float v;
  raw(&v, 4);
  return v;
}
double BinReader::f64() {
  double v;
  raw(&v, 8);
  return v;
}
std::string BinReader::str() {
  const std::uint32_t n = u32();
  if (n > (1u << 24)) throw IoError("implausible string length: " + path_);
  std::string s(n, '\0');
  raw(s.data(), n);
  return s;
}

void BinReader::verify_checksum() {
  if (consumed_ != size_ - 8)
    throw IoError("payload size mismatch (corrupt or truncated): " + path_);
  std::uint64_t stored;
  in_.read(reinterpret_cast<char*>(&stored), 8);
  if (!in_) throw IoError("checksum read failed: " + path_);
  if (stored != hash_)
    throw IoError("checksum mismatch (corrupt file): " + path_);
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::uint64_t h = kFnvOffset;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace pointda
