#include "pen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "pen/dataset.hpp"
#include "pen/error.hpp"

namespace pen {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'E', 'N', 'C', 'K', 'P', 'T', '\0'};

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

struct Reader {
  std::string_view bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw SchemaError("checkpoint truncated at byte " + std::to_string(pos));
  }
  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes.data() + pos, sizeof(U));
    pos += sizeof(U);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

template <typename T>
std::string encode_checkpoint(const PenParams<T>& params, const nlohmann::json& extra) {
  nlohmann::json manifest = extra.is_object() ? extra : nlohmann::json::object();
  manifest["arch"] = params.arch;
  manifest["format_version"] = kCheckpointVersion;
  nlohmann::json list = nlohmann::json::array();
  const auto ts = tensors(params);
  for (const auto& t : ts) list.push_back({{"name", t.name}, {"rows", t.tensor->rows()}, {"cols", t.tensor->cols()}});
  manifest["tensors"] = list;
  const std::string mj = manifest.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, mj.size());
  out += mj;
  put<std::uint64_t>(out, ts.size());
  for (const auto& t : ts) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.tensor->rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.tensor->cols()));
    const T* data = t.tensor->data();
    for (Eigen::Index i = 0; i < t.tensor->size(); ++i) put<double>(out, static_cast<double>(data[i]));
  }
  return out;
}

template <typename T>
LoadedCheckpoint<T> decode_checkpoint(std::string_view bytes) {
  Reader r{bytes};
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) throw SchemaError("not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  const auto mlen = r.get<std::uint64_t>();
  LoadedCheckpoint<T> out;
  try {
    out.manifest = nlohmann::json::parse(r.take(mlen));
    out.params.arch = out.manifest.at("arch").template get<ArchConfig>();
    out.params.arch.validate();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint manifest: ") + e.what());
  }
  // Build the expected layout, then fill it from the stored tensors.
  const ArchConfig& a = out.params.arch;
  out.params = PenParams<T>::init(a, 0);
  auto ts = tensors(out.params);
  const auto count = r.get<std::uint64_t>();
  if (count != ts.size())
    throw SchemaError("checkpoint has " + std::to_string(count) + " tensors, architecture expects " +
                      std::to_string(ts.size()));
  for (auto& t : ts) {
    const auto nlen = r.get<std::uint32_t>();
    const std::string name(r.take(nlen));
    if (name != t.name) throw SchemaError("checkpoint tensor '" + name + "' where '" + t.name + "' was expected");
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(t.tensor->rows()) || cols != static_cast<std::uint64_t>(t.tensor->cols()))
      throw SchemaError("checkpoint tensor '" + name + "' has the wrong shape");
    T* data = t.tensor->data();
    for (Eigen::Index i = 0; i < t.tensor->size(); ++i) data[i] = static_cast<T>(r.get<double>());
  }
  if (r.pos != bytes.size()) throw SchemaError("trailing bytes after checkpoint tensors");
  return out;
}

template <typename T>
void save_checkpoint(const std::string& path, const PenParams<T>& params, const nlohmann::json& extra) {
  write_file_atomic(path, encode_checkpoint(params, extra));
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  return decode_checkpoint<T>(read_file(path));
}

#define PEN_INSTANTIATE(T)                                                                 \
  template std::string encode_checkpoint(const PenParams<T>&, const nlohmann::json&);     \
  template LoadedCheckpoint<T> decode_checkpoint(std::string_view);                       \
  template void save_checkpoint(const std::string&, const PenParams<T>&, const nlohmann::json&); \
  template LoadedCheckpoint<T> load_checkpoint(const std::string&);

PEN_INSTANTIATE(float)
PEN_INSTANTIATE(double)
#undef PEN_INSTANTIATE

}  // namespace pen
