#include "motorseg/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace motorseg::model {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::vector<char>& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(std::vector<double>& out, const char* what) {
    need(out.size() * sizeof(double), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(double));
    pos_ += out.size() * sizeof(double);
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw ParseError(std::string("truncated checkpoint: ") + what, pos_);
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> encode_checkpoint(const Checkpoint& ck) {
  if (!ck.params.all_finite()) throw ValidationError("refusing to write non-finite parameters");
  std::vector<char> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kVersion);
  const std::string header = nlohmann::json{{"config", ck.config}, {"meta", ck.meta}}.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.params.values.size()));
  for (std::size_t a = 0; a < ck.params.values.size(); ++a) {
    const auto& name = ck.params.names[a];
    const auto& m = ck.params.values[a];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
    const auto* raw = reinterpret_cast<const char*>(m.data.data());
    out.insert(out.end(), raw, raw + m.data.size() * sizeof(double));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  Reader r(bytes);
  const std::string magic = r.string(4, "magic");
  if (magic != std::string(kMagic, 4)) throw ParseError("bad checkpoint magic", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
  const auto header_len = r.get<std::uint32_t>("header length");
  const std::size_t header_at = r.pos();
  const std::string header = r.string(header_len, "header");
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(header);
    ck.config = j.at("config").get<ModelConfig>();
    ck.meta = j.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint header: ") + e.what(), header_at);
  }
  const auto arrays = r.get<std::uint32_t>("array count");
  for (std::uint32_t a = 0; a < arrays; ++a) {
    const auto name_len = r.get<std::uint32_t>("array name length");
    ck.params.names.push_back(r.string(name_len, "array name"));
    const auto rows = r.get<std::uint32_t>("array rows");
    const auto cols = r.get<std::uint32_t>("array cols");
    Matrix m(rows, cols);
    r.doubles(m.data, "array data");
    ck.params.values.push_back(std::move(m));
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint", r.pos());
  const ModelParams expected = init_params(ck.config, 0);
  if (expected.names != ck.params.names) throw ValidationError("checkpoint arrays do not match its config");
  for (std::size_t a = 0; a < expected.values.size(); ++a)
    if (!expected.values[a].same_shape(ck.params.values[a]))
      throw ValidationError("checkpoint array '" + ck.params.names[a] + "' has the wrong shape");
  if (!ck.params.all_finite()) throw ValidationError("checkpoint holds non-finite parameters");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed for " + path.string());
  return decode_checkpoint(bytes);
}

}  // namespace motorseg::model
