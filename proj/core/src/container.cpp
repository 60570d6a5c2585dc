#include "fmlab/container.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "fmlab/digest.hpp"

namespace fmlab {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'L', 'B'};

std::string serialize(const Container& c) {
  if (c.kind.size() != 4) {
    throw std::runtime_error("container kind must be 4 chars, got '" + c.kind +
                             "'");
  }
  std::string out;
  auto put = [&out](const void* p, size_t n) {
    out.append(static_cast<const char*>(p), n);
  };
  put(kMagic, 4);
  uint32_t version = kContainerVersion;
  put(&version, 4);
  put(c.kind.data(), 4);
  const std::string header = c.header.dump();
  uint64_t header_len = header.size();
  put(&header_len, 8);
  put(header.data(), header.size());
  uint64_t count = c.payload.size();
  put(&count, 8);
  put(c.payload.data(), count * sizeof(double));
  uint64_t digest = Digest64().update(out.data(), out.size()).value();
  put(&digest, 8);
  return out;
}

}  // namespace

uint64_t container_digest(const Container& c) {
  const std::string bytes = serialize(c);
  uint64_t digest;
  std::memcpy(&digest, bytes.data() + bytes.size() - 8, 8);
  return digest;
}

void write_container(const std::string& path, const Container& c) {
  const std::string bytes = serialize(c);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Container read_container(const std::string& path,
                         const std::string& expected_kind) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 4 + 4 + 4 + 8 + 8 + 8) {
    throw std::runtime_error("container truncated: " + path);
  }
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  uint64_t actual =
      Digest64().update(bytes.data(), bytes.size() - 8).value();
  if (stored != actual) {
    throw std::runtime_error("container digest mismatch: " + path);
  }

  size_t off = 0;
  auto get = [&](void* p, size_t n) {
    if (off + n > bytes.size()) {
      throw std::runtime_error("container truncated: " + path);
    }
    std::memcpy(p, bytes.data() + off, n);
    off += n;
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("bad magic in: " + path);
  }
  uint32_t version;
  get(&version, 4);
  if (version != kContainerVersion) {
    throw std::runtime_error("unsupported container version " +
                             std::to_string(version) + " in: " + path);
  }
  Container c;
  c.kind.resize(4);
  get(c.kind.data(), 4);
  if (!expected_kind.empty() && c.kind != expected_kind) {
    throw std::runtime_error("expected kind " + expected_kind + " but found " +
                             c.kind + " in: " + path);
  }
  uint64_t header_len;
  get(&header_len, 8);
  std::string header(header_len, '\0');
  get(header.data(), header_len);
  c.header = nlohmann::json::parse(header);
  uint64_t count;
  get(&count, 8);
  c.payload.resize(count);
  get(c.payload.data(), count * sizeof(double));
  return c;
}

}  // namespace fmlab
