#include "drive/nn/checkpoint.hpp"

#include <cstring>

namespace drive::nn {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'V', 'C', 'K', 'P', 'T', '1'};

const char* dtype_name(Checkpoint::DType d) {
  switch (d) {
    case Checkpoint::DType::f32:
      return "f32";
    case Checkpoint::DType::f64:
      return "f64";
    case Checkpoint::DType::i64:
      return "i64";
  }
  return "?";
}

Checkpoint::DType parse_dtype(const std::string& s, std::size_t offset) {
  if (s == "f32") return Checkpoint::DType::f32;
  if (s == "f64") return Checkpoint::DType::f64;
  if (s == "i64") return Checkpoint::DType::i64;
  throw FormatError("unknown dtype '" + s + "'", offset);
}

std::size_t dtype_size(Checkpoint::DType d) { return d == Checkpoint::DType::f32 ? 4 : 8; }

template <typename T>
constexpr Checkpoint::DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return Checkpoint::DType::f32;
  else return Checkpoint::DType::f64;
}

template <typename V>
std::vector<V> decode(const io::Bytes& payload) {
  std::vector<V> out(payload.size() / sizeof(V));
  io::ByteReader r(payload);
  r.get_array(out.data(), out.size());
  return out;
}

}  // namespace

void Checkpoint::insert(Entry e) {
  const auto it = index_.find(e.name);
  if (it != index_.end()) {
    entries_[it->second] = std::move(e);
    return;
  }
  index_[e.name] = entries_.size();
  entries_.push_back(std::move(e));
}

template <typename T>
void Checkpoint::put(const std::string& name, const NdArray<T>& array) {
  io::ByteWriter w;
  w.put_array(array.data(), array.size());
  insert({name, dtype_of<T>(), array.shape(), std::move(w.bytes())});
}

void Checkpoint::put_int(const std::string& name, std::int64_t value) {
  io::ByteWriter w;
  w.put(value);
  insert({name, DType::i64, Shape{}, std::move(w.bytes())});
}

void Checkpoint::put_params(const std::string& prefix, const ParamList<float>& params) {
  for (const auto& p : params) put(prefix + "." + p.name, p.var.value());
}
void Checkpoint::put_params(const std::string& prefix, const ParamList<double>& params) {
  for (const auto& p : params) put(prefix + "." + p.name, p.var.value());
}

const Checkpoint::Entry& Checkpoint::entry(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("checkpoint has no entry '" + name + "'");
  return entries_[it->second];
}

template <typename T>
NdArray<T> Checkpoint::get(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dtype == DType::f32) {
    auto v = decode<float>(e.payload);
    return NdArray<T>(e.shape, std::vector<T>(v.begin(), v.end()));
  }
  if (e.dtype == DType::f64) {
    auto v = decode<double>(e.payload);
    return NdArray<T>(e.shape, std::vector<T>(v.begin(), v.end()));
  }
  throw ContractError("checkpoint entry '" + name + "' is not a float tensor");
}

std::int64_t Checkpoint::get_int(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dtype != DType::i64) throw ContractError("checkpoint entry '" + name + "' is not an integer");
  io::ByteReader r(e.payload);
  return r.get<std::int64_t>();
}

template <typename T>
void Checkpoint::load_params(const std::string& prefix, const ParamList<T>& params) const {
  for (const auto& p : params) {
    auto arr = get<T>(prefix + "." + p.name);
    DRIVE_REQUIRE(arr.shape() == p.var.shape(), "checkpoint shape mismatch for " + prefix + "." + p.name +
                                                    ": " + shape_str(arr.shape()) + " vs " +
                                                    shape_str(p.var.shape()));
    auto v = p.var;
    v.value_mut() = std::move(arr);
  }
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

Checkpoint::DType Checkpoint::dtype(const std::string& name) const { return entry(name).dtype; }

io::Bytes Checkpoint::serialize() const {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["meta"] = meta_;
  auto& tensors = manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries_) {
    tensors.push_back({{"name", e.name},
                       {"shape", e.shape},
                       {"dtype", dtype_name(e.dtype)},
                       {"offset", offset},
                       {"nbytes", e.payload.size()}});
    offset += e.payload.size();
  }
  const std::string text = manifest.dump();
  io::ByteWriter w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put(static_cast<std::uint64_t>(text.size()));
  w.put_bytes(text.data(), text.size());
  for (const auto& e : entries_) w.put_bytes(e.payload.data(), e.payload.size());
  return std::move(w.bytes());
}

Checkpoint Checkpoint::deserialize(const io::Bytes& bytes) {
  io::ByteReader r(bytes);
  const std::string magic = r.get_string(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("bad checkpoint magic", 0);
  const auto manifest_len = r.get<std::uint64_t>();
  const std::size_t manifest_at = r.position();
  const std::string text = r.get_string(static_cast<std::size_t>(manifest_len));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + ex.what(), manifest_at);
  }
  if (manifest.value("version", std::string()) != kCheckpointVersion)
    throw UnsupportedVersionError("unsupported checkpoint version '" + manifest.value("version", std::string()) + "'",
                                  manifest_at);
  const std::size_t data_at = r.position();
  Checkpoint ck;
  ck.meta_ = manifest.value("meta", nlohmann::json::object());
  for (const auto& t : manifest.at("tensors")) {
    Entry e;
    e.name = t.at("name").get<std::string>();
    e.dtype = parse_dtype(t.at("dtype").get<std::string>(), manifest_at);
    e.shape = t.at("shape").get<Shape>();
    const auto off = t.at("offset").get<std::uint64_t>();
    const auto nbytes = t.at("nbytes").get<std::uint64_t>();
    if (nbytes != shape_size(e.shape) * dtype_size(e.dtype))
      throw FormatError("tensor '" + e.name + "' byte count does not match shape", manifest_at);
    if (data_at + off + nbytes > bytes.size())
      throw FormatError("tensor '" + e.name + "' extends past end of file", data_at + off);
    e.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_at + off),
                     bytes.begin() + static_cast<std::ptrdiff_t>(data_at + off + nbytes));
    ck.insert(std::move(e));
  }
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const { io::write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  return deserialize(io::read_file(path));
}

bool Checkpoint::operator==(const Checkpoint& other) const {
  if (meta_ != other.meta_ || entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.dtype != b.dtype || a.shape != b.shape || a.payload != b.payload) return false;
  }
  return true;
}

template void Checkpoint::put(const std::string&, const NdArray<float>&);
template void Checkpoint::put(const std::string&, const NdArray<double>&);
template NdArray<float> Checkpoint::get(const std::string&) const;
template NdArray<double> Checkpoint::get(const std::string&) const;
template void Checkpoint::load_params(const std::string&, const ParamList<float>&) const;
template void Checkpoint::load_params(const std::string&, const ParamList<double>&) const;

}  // namespace drive::nn
