#include "fmlab/store.hpp"

#include <filesystem>

#include "fmlab/digest.hpp"

namespace fs = std::filesystem;

namespace fmlab {

ArtifactStore::ArtifactStore(std::string root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

std::string ArtifactStore::dir_for(uint64_t digest) const {
  return (fs::path(root_) / digest_hex(digest)).string();
}

std::string ArtifactStore::path(uint64_t digest,
                                const std::string& filename) const {
  return (fs::path(dir_for(digest)) / filename).string();
}

bool ArtifactStore::has(uint64_t digest, const std::string& filename) const {
  return fs::exists(path(digest, filename));
}

std::string ArtifactStore::ensure(
    uint64_t digest, const std::string& filename,
    const std::function<void(const std::string&)>& produce) {
  fs::create_directories(dir_for(digest));
  std::string p = path(digest, filename);
  if (!fs::exists(p)) produce(p);
  return p;
}

std::string ArtifactStore::require(uint64_t digest, const std::string& filename,
                                   const std::string& producer_verb) const {
  std::string p = path(digest, filename);
  if (!fs::exists(p)) {
    throw MissingArtifact("missing artifact " + p + "; produce it with `" +
                          producer_verb + "`");
  }
  return p;
}

}  // namespace fmlab
