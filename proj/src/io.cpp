#include "motorseg/cloud_io.hpp"
#include "motorseg/json_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace motorseg {

namespace {

static_assert(std::endian::native == std::endian::little, "MPC1 encoding assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'P', 'C', '1'};
constexpr std::size_t kHeaderBytes = 8;
constexpr std::size_t kRecordBytes = 13;

template <class T>
void put(std::vector<char>& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <class T>
T get(const std::vector<char>& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_bytes(const std::vector<char>& bytes, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace

std::vector<char> encode_mpc(const PointCloud& cloud) {
  cloud.validate();
  if (cloud.size() > 0xffffffffULL) throw SizeError("point cloud too large for MPC1");
  std::vector<char> out;
  out.reserve(kHeaderBytes + kRecordBytes * cloud.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    put<float>(out, static_cast<float>(p.x()));
    put<float>(out, static_cast<float>(p.y()));
    put<float>(out, static_cast<float>(p.z()));
    put<std::uint8_t>(out, cloud.has_labels() ? cloud.labels[i] : 0);
  }
  return out;
}

PointCloud decode_mpc(const std::vector<char>& bytes) {
  if (bytes.size() < 4) throw ParseError("truncated MPC1 magic", bytes.size());
  for (std::size_t i = 0; i < 4; ++i)
    if (bytes[i] != kMagic[i]) throw ParseError("bad MPC1 magic", i);
  if (bytes.size() < kHeaderBytes) throw ParseError("truncated MPC1 point count", bytes.size());
  const auto n = get<std::uint32_t>(bytes, 4);
  const std::size_t expected = kHeaderBytes + kRecordBytes * static_cast<std::size_t>(n);
  if (bytes.size() < expected)
    throw ParseError("truncated MPC1 body: header declares " + std::to_string(n) + " points",
                     kHeaderBytes + kRecordBytes * ((bytes.size() - kHeaderBytes) / kRecordBytes));
  if (bytes.size() > expected) throw ParseError("trailing bytes after MPC1 body", expected);
  PointCloud cloud;
  cloud.points.resize(n);
  cloud.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t o = kHeaderBytes + kRecordBytes * i;
    cloud.points[i] = Vec3(get<float>(bytes, o), get<float>(bytes, o + 4), get<float>(bytes, o + 8));
    const auto label = get<std::uint8_t>(bytes, o + 12);
    if (label >= kNumCategories) throw ParseError("label out of range", o + 12);
    cloud.labels[i] = label;
  }
  return cloud;
}

void write_mpc(const PointCloud& cloud, const std::filesystem::path& path) {
  write_bytes(encode_mpc(cloud), path);
}

PointCloud read_mpc(const std::filesystem::path& path) { return decode_mpc(read_bytes(path)); }

nlohmann::json read_json_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  const std::string text = j.dump(2) + "\n";
  write_bytes(std::vector<char>(text.begin(), text.end()), path);
}

}  // namespace motorseg
