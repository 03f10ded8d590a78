#include "semistereo/model/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semistereo/error.hpp"

namespace semistereo::model {

namespace {

constexpr const char* kMagic = "semistereo-container";

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
  return r;
}

std::uint32_t to_le32(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

void check_token(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos)
    throw ContractError(std::string("container ") + what + " must be a non-empty token: '" + s + "'");
}

}  // namespace

const std::string& Container::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  throw FormatError("container: missing metadata '" + key + "'");
}

bool Container::has_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return true;
  return false;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  check_token(c.kind, "kind");
  std::ostringstream head;
  head << kMagic << ' ' << kContainerVersion << '\n' << "kind " << c.kind << '\n';
  for (const auto& [k, v] : c.meta) {
    check_token(k, "metadata key");
    if (v.find('\n') != std::string::npos) throw ContractError("container metadata value contains a newline");
    head << "meta " << k << ' ' << v << '\n';
  }
  std::uint64_t offset = 0;
  for (const auto& [name, t] : c.tensors) {
    check_token(name, "tensor name");
    const std::uint64_t bytes = t.size() * 8;
    head << "tensor " << name << " f64 " << t.rank();
    for (int d : t.shape()) head << ' ' << d;
    head << ' ' << offset << ' ' << bytes << '\n';
    offset += bytes;
  }
  head << "payload " << offset << '\n';

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string h = head.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : c.tensors) {
    std::vector<std::uint64_t> raw(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) raw[i] = to_le(std::bit_cast<std::uint64_t>(t[i]));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(in, line)) throw FormatError("container: truncated manifest in " + path.string());
    return std::istringstream(line);
  };

  {
    auto s = next_line();
    std::string magic;
    int version = 0;
    if (!(s >> magic >> version) || magic != kMagic) throw FormatError("not a container file: " + path.string());
    if (version != kContainerVersion)
      throw VersionError("container version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kContainerVersion) + ")");
  }
  Container c;
  {
    auto s = next_line();
    std::string key;
    if (!(s >> key >> c.kind) || key != "kind") throw FormatError("container: missing kind line");
    if (!expected_kind.empty() && c.kind != expected_kind)
      throw VersionError("container holds '" + c.kind + "', expected '" + expected_kind + "'");
  }

  struct Pending {
    std::string name;
    bool f32;
    std::vector<int> shape;
    std::uint64_t offset, bytes;
  };
  std::vector<Pending> pending;
  std::uint64_t payload = 0;
  for (;;) {
    auto s = next_line();
    std::string key;
    s >> key;
    if (key == "meta") {
      std::string k;
      s >> k;
      std::string v;
      std::getline(s, v);
      if (!v.empty() && v.front() == ' ') v.erase(0, 1);
      c.meta.emplace_back(k, v);
    } else if (key == "tensor") {
      Pending p;
      std::string dtype;
      int rank = 0;
      if (!(s >> p.name >> dtype >> rank) || rank < 0 || rank > 8) throw FormatError("container: bad tensor line");
      if (dtype != "f64" && dtype != "f32") throw FormatError("container: unsupported dtype " + dtype);
      p.f32 = dtype == "f32";
      p.shape.resize(static_cast<std::size_t>(rank));
      for (int& d : p.shape)
        if (!(s >> d) || d < 0) throw FormatError("container: bad tensor shape");
      if (!(s >> p.offset >> p.bytes)) throw FormatError("container: bad tensor extent");
      std::uint64_t n = 1;
      for (int d : p.shape) n *= static_cast<std::uint64_t>(d);
      if (n * (p.f32 ? 4 : 8) != p.bytes) throw FormatError("container: tensor byte count disagrees with shape");
      pending.push_back(std::move(p));
    } else if (key == "payload") {
      if (!(s >> payload)) throw FormatError("container: bad payload line");
      break;
    } else {
      throw FormatError("container: unexpected manifest line '" + line + "'");
    }
  }

  const auto start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  if (start < 0 || end < start || static_cast<std::uint64_t>(end - start) != payload)
    throw FormatError("container: payload length mismatch in " + path.string());
  in.seekg(start);
  std::vector<char> bytes(payload);
  in.read(bytes.data(), static_cast<std::streamsize>(payload));
  if (static_cast<std::uint64_t>(in.gcount()) != payload) throw FormatError("container: short read");

  for (const Pending& p : pending) {
    if (p.offset + p.bytes > payload) throw FormatError("container: tensor extends past payload");
    Tensor t(p.shape);
    const char* src = bytes.data() + p.offset;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (p.f32) {
        std::uint32_t v;
        std::memcpy(&v, src + 4 * i, 4);
        t[i] = std::bit_cast<float>(to_le32(v));
      } else {
        std::uint64_t v;
        std::memcpy(&v, src + 8 * i, 8);
        t[i] = std::bit_cast<double>(to_le(v));
      }
    }
    c.tensors.emplace_back(p.name, std::move(t));
  }
  return c;
}

}  // namespace semistereo::model
