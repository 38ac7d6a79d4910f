#include "agral/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "agral/errors.hpp"

namespace agral {

namespace {

constexpr unsigned char kMagic[4] = {0x41, 0x4C, 0x54, 0x53};  // "ALTS"
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kMaxRank = 4;
constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 32;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size()) {
      throw TruncatedPayloadError(std::string("container truncated while reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
};

Metadata parse_meta(const std::string& text) {
  Metadata meta;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("container metadata line without '=': " + line);
    }
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

}  // namespace

void write_container(const std::filesystem::path& path, const Tensor& tensor,
                     const Metadata& meta) {
  if (tensor.dims.size() > kMaxRank) {
    throw DimOverflowError("tensor rank " + std::to_string(tensor.dims.size()) +
                           " exceeds maximum rank 4");
  }
  for (auto d : tensor.dims) {
    if (d > kMaxDim) {
      throw DimOverflowError("dimension " + std::to_string(d) + " exceeds 2^32");
    }
  }

  std::string out;
  out.append(reinterpret_cast<const char*>(kMagic), 4);
  put_u32(out, kVersion);
  out.push_back(static_cast<char>(tensor.dtype));
  out.push_back(static_cast<char>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u64(out, d);

  std::string meta_text;
  for (const auto& [k, v] : meta) {
    meta_text += k;
    meta_text += '=';
    meta_text += v;
    meta_text += '\n';
  }
  put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;

  const std::size_t n = tensor.element_count();
  if (tensor.dtype == Dtype::F32) {
    if (tensor.f32.size() != n) throw DataError("f32 payload does not match dims");
    static_assert(std::endian::native == std::endian::little,
                  "payload serialization assumes a little-endian host");
    out.append(reinterpret_cast<const char*>(tensor.f32.data()), n * 4);
  } else {
    if (tensor.u8.size() != n) throw DataError("u8 payload does not match dims");
    out.append(reinterpret_cast<const char*>(tensor.u8.data()), n);
  }

  const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::pair<Tensor, Metadata> read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  r.need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw BadMagicError("bad magic in " + path.string());
  }
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw DataError("unsupported container version " + std::to_string(version));
  }
  const std::uint8_t dtype_code = r.u8("dtype");
  if (dtype_code != static_cast<std::uint8_t>(Dtype::F32) &&
      dtype_code != static_cast<std::uint8_t>(Dtype::U8)) {
    throw DataError("unknown dtype code " + std::to_string(dtype_code));
  }
  const std::uint8_t rank = r.u8("rank");
  if (rank > kMaxRank) {
    throw DimOverflowError("rank " + std::to_string(rank) + " exceeds maximum rank 4");
  }

  Tensor t;
  t.dtype = static_cast<Dtype>(dtype_code);
  std::size_t count = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    const std::uint64_t d = r.u64("dims");
    if (d > kMaxDim) throw DimOverflowError("dimension " + std::to_string(d) + " exceeds 2^32");
    t.dims.push_back(d);
    count *= static_cast<std::size_t>(d);
  }

  const std::uint32_t meta_len = r.u32("metadata length");
  r.need(meta_len, "metadata");
  const Metadata meta = parse_meta(buf.substr(r.pos, meta_len));
  r.pos += meta_len;

  const std::size_t elem_size = (t.dtype == Dtype::F32) ? 4 : 1;
  const std::size_t payload = count * elem_size;
  if (buf.size() - r.pos != payload) {
    throw TruncatedPayloadError("payload size mismatch in " + path.string() + ": expected " +
                                std::to_string(payload) + " bytes, found " +
                                std::to_string(buf.size() - r.pos));
  }
  if (t.dtype == Dtype::F32) {
    t.f32.resize(count);
    std::memcpy(t.f32.data(), buf.data() + r.pos, payload);
  } else {
    t.u8.resize(count);
    std::memcpy(t.u8.data(), buf.data() + r.pos, payload);
  }
  return {std::move(t), meta};
}

}  // namespace agral
