#include "cp3er/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace cp3er {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata_.find(key);
  if (it == metadata_.end()) throw CheckpointError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

void Checkpoint::add_array(NamedArray array) {
  if (shape_numel(array.shape) != array.data.size()) {
    throw DimensionError("checkpoint: array '" + array.name + "' shape does not match data");
  }
  if (has_array(array.name)) throw CheckpointError("checkpoint: duplicate array '" + array.name + "'");
  arrays_.push_back(std::move(array));
}

const NamedArray& Checkpoint::array(const std::string& name) const {
  for (const auto& a : arrays_) {
    if (a.name == name) return a;
  }
  throw CheckpointError("checkpoint: missing array '" + name + "'");
}

bool Checkpoint::has_array(const std::string& name) const {
  for (const auto& a : arrays_) {
    if (a.name == name) return true;
  }
  return false;
}

void Checkpoint::add_params(const std::string& prefix, const ParamSet& params) {
  for (const auto& e : params.entries()) {
    auto values = e.tensor.data();
    add_array({prefix + "/" + e.name, e.tensor.shape(), {values.begin(), values.end()}});
  }
}

void Checkpoint::restore_params(const std::string& prefix, ParamSet& params) const {
  for (auto& e : params.entries()) {
    const NamedArray& a = array(prefix + "/" + e.name);
    if (a.shape != e.tensor.shape()) {
      throw DimensionError("checkpoint: shape mismatch for '" + a.name + "': stored " +
                           shape_str(a.shape) + ", expected " + shape_str(e.tensor.shape()));
    }
    std::ranges::copy(a.data, e.tensor.data().begin());
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["metadata"] = metadata_;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays_) {
    header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    offset += a.data.size();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
  out << kCheckpointMagic << '\n';
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays_) {
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) {
    throw CheckpointError("checkpoint: " + path.string() + " is not a " + kCheckpointMagic + " file");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("checkpoint: truncated header in " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint: malformed header in " + path.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  ckpt.metadata_ = header.at("metadata").get<std::map<std::string, std::string>>();
  for (const auto& entry : header.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<Shape>();
    a.data.resize(shape_numel(a.shape));
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!in) throw CheckpointError("checkpoint: truncated payload for '" + a.name + "'");
    ckpt.arrays_.push_back(std::move(a));
  }
  return ckpt;
}

}  // namespace cp3er
