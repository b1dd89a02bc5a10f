#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cp3er/ndgrad.hpp"
#include "cp3er/optim.hpp"

namespace cp3er {

inline constexpr const char* kCheckpointMagic = "CP3ER-CKPT-1";

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

// Versioned container of named float64 arrays plus string metadata.
//
// Layout: the magic string and a newline, a little-endian u64 byte count,
// a JSON header {"metadata": {...}, "arrays": [{"name", "shape", "offset"}]},
// then the raw little-endian float64 payload.
class Checkpoint {
 public:
  void set_meta(const std::string& key, std::string value) { metadata_[key] = std::move(value); }
  const std::string& meta(const std::string& key) const;
  bool has_meta(const std::string& key) const { return metadata_.count(key) != 0; }

  void add_array(NamedArray array);
  const NamedArray& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
  const std::vector<NamedArray>& arrays() const { return arrays_; }

  // Stores each parameter as "<prefix>/<name>".
  void add_params(const std::string& prefix, const ParamSet& params);
  // Copies values back into existing tensors; shapes must match.
  void restore_params(const std::string& prefix, ParamSet& params) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> metadata_;
  std::vector<NamedArray> arrays_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cp3er
