#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "drive/io.hpp"
#include "drive/nn/autograd.hpp"

namespace drive::nn {

inline constexpr const char* kCheckpointVersion = "drive-ckpt-v1";

// Named-tensor archive.
//   8 bytes  magic "DRVCKPT1"
//   8 bytes  manifest length N (u64, little-endian)
//   N bytes  JSON manifest {version, meta, tensors:[{name, shape, dtype, offset, nbytes}]}
//   ...      raw little-endian tensor payloads; offsets are relative to this region
class Checkpoint {
 public:
  enum class DType { f32, f64, i64 };

  template <typename T>
  void put(const std::string& name, const NdArray<T>& array);
  void put_int(const std::string& name, std::int64_t value);
  void put_params(const std::string& prefix, const ParamList<float>& params);
  void put_params(const std::string& prefix, const ParamList<double>& params);

  // Reads a float tensor, converting between f32 and f64 if needed.
  template <typename T>
  NdArray<T> get(const std::string& name) const;
  std::int64_t get_int(const std::string& name) const;
  // Overwrites parameter values in place from `prefix.<name>` entries.
  template <typename T>
  void load_params(const std::string& prefix, const ParamList<T>& params) const;

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::vector<std::string> names() const;
  DType dtype(const std::string& name) const;

  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  io::Bytes serialize() const;
  static Checkpoint deserialize(const io::Bytes& bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  bool operator==(const Checkpoint& other) const;

 private:
  struct Entry {
    std::string name;
    DType dtype;
    Shape shape;
    io::Bytes payload;
  };
  const Entry& entry(const std::string& name) const;
  void insert(Entry e);

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  nlohmann::json meta_ = nlohmann::json::object();
};

}  // namespace drive::nn
