#pragma once

// Content-addressed artifact store: one directory per 64-bit digest
// (store/<hex16>/...). Writers go through ensure(), which reuses an existing
// artifact and never overwrites; missing upstream artifacts surface as
// MissingArtifact with the producing verb's name.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace fmlab {

struct MissingArtifact : std::runtime_error {
  explicit MissingArtifact(const std::string& what) : std::runtime_error(what) {}
};

class ArtifactStore {
 public:
  explicit ArtifactStore(std::string root);

  const std::string& root() const { return root_; }
  std::string dir_for(uint64_t digest) const;
  std::string path(uint64_t digest, const std::string& filename) const;
  bool has(uint64_t digest, const std::string& filename) const;

  // Returns the artifact path; calls `produce(path)` only when the file does
  // not exist yet. Production is atomic per file (produce writes, then the
  // result is left in place).
  std::string ensure(uint64_t digest, const std::string& filename,
                     const std::function<void(const std::string&)>& produce);

  // Like has()+path() but throws MissingArtifact naming `producer_verb` when
  // absent.
  std::string require(uint64_t digest, const std::string& filename,
                      const std::string& producer_verb) const;

 private:
  std::string root_;
};

}  // namespace fmlab
