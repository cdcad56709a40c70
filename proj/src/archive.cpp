#include "depthstyle/archive.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace depthstyle {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'D', 'S', 'T', 'Y', 'L', 'A', 'R', 'C'};
constexpr std::size_t kPreamble = 32;

const char* dtype_name(Dtype d) { return d == Dtype::F32 ? "f32" : "f64"; }

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t at) {
  T v;
  std::memcpy(&v, in.data() + at, sizeof(T));
  return v;
}

std::uint32_t crc(const char* data, std::size_t n, std::uint32_t seed) {
  uLong c = seed;
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace

void Archive::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["kind"] = kind_;
  header["meta"] = meta_;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& name : order_) {
    const Blob& b = blobs_.at(name);
    header["tensors"].push_back({{"name", name},
                                 {"dtype", dtype_name(b.dtype)},
                                 {"shape", {b.shape[0], b.shape[1], b.shape[2], b.shape[3]}},
                                 {"offset", offset},
                                 {"bytes", b.bytes.size()}});
    offset += b.bytes.size();
  }
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(kPreamble + header_text.size() + offset + 4);
  out.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kArchiveVersion);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, header_text.size());
  put_le<std::uint64_t>(out, offset);
  out += header_text;
  for (const auto& name : order_) {
    const Blob& b = blobs_.at(name);
    out.append(reinterpret_cast<const char*>(b.bytes.data()), b.bytes.size());
  }
  const std::uint32_t sum = crc(out.data() + kPreamble, out.size() - kPreamble, 0);
  put_le<std::uint32_t>(out, sum);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw SetupError("cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw SetupError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SetupError("cannot open archive " + path.string());
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (in.size() < kPreamble || std::memcmp(in.data(), kMagic.data(), kMagic.size()) != 0) {
    if (in.size() >= kMagic.size() && std::memcmp(in.data(), kMagic.data(), kMagic.size()) == 0)
      throw IntegrityError("archive truncated: " + path.string());
    throw FormatError("not a depthstyle archive: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(in, 8);
  if (version != kArchiveVersion)
    throw VersionError("archive " + path.string() + " has format version " + std::to_string(version) +
                       ", this build reads version " + std::to_string(kArchiveVersion));
  const auto header_len = get_le<std::uint64_t>(in, 16);
  const auto payload_len = get_le<std::uint64_t>(in, 24);
  if (header_len > in.size() || payload_len > in.size() ||
      in.size() != kPreamble + header_len + payload_len + 4)
    throw IntegrityError("archive truncated or padded: " + path.string());
  const std::uint32_t stored = get_le<std::uint32_t>(in, in.size() - 4);
  if (crc(in.data() + kPreamble, header_len + payload_len, 0) != stored)
    throw IntegrityError("archive checksum mismatch: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.begin() + kPreamble, in.begin() + static_cast<long>(kPreamble + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("archive header is not valid JSON: " + std::string(e.what()));
  }

  Archive a(header.value("kind", std::string{}));
  a.meta_ = header.value("meta", nlohmann::json::object());
  const std::size_t payload_at = kPreamble + header_len;
  for (const auto& t : header.at("tensors")) {
    Blob b;
    const std::string dt = t.at("dtype");
    if (dt == "f32") {
      b.dtype = Dtype::F32;
    } else if (dt == "f64") {
      b.dtype = Dtype::F64;
    } else {
      throw FormatError("unknown dtype " + dt);
    }
    const auto& s = t.at("shape");
    for (std::size_t i = 0; i < 4; ++i) b.shape[i] = s.at(i).get<Index>();
    const auto off = t.at("offset").get<std::uint64_t>();
    const auto len = t.at("bytes").get<std::uint64_t>();
    if (off + len > payload_len) throw IntegrityError("tensor extends past payload");
    b.bytes.assign(in.begin() + static_cast<long>(payload_at + off),
                   in.begin() + static_cast<long>(payload_at + off + len));
    const std::string name = t.at("name");
    a.order_.push_back(name);
    a.blobs_[name] = std::move(b);
  }
  return a;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SetupError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (f) {
    f.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

void verify_asset(const std::filesystem::path& path, const std::string& expected_sha256,
                  const std::string& source_hint) {
  if (path.empty() || !std::filesystem::exists(path))
    throw SetupError("weight asset '" + path.string() + "' not found. " + source_hint);
  if (!expected_sha256.empty()) {
    const std::string got = sha256_file(path);
    if (got != expected_sha256)
      throw IntegrityError("weight asset " + path.string() + " has sha256 " + got + ", expected " + expected_sha256);
  }
}

}  // namespace depthstyle
