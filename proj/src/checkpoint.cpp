#include "ahrm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ahrm/errors.hpp"

namespace ahrm::ppo {

namespace {

constexpr char kMagic[8] = {'A', 'H', 'R', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxHidden = 64;
constexpr std::uint32_t kMaxWidth = 1u << 20;

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T value) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }
  void put_raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  std::vector<unsigned char> take() { return std::move(bytes_); }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("truncated checkpoint while reading ") + what, pos_);
    }
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const unsigned char* cursor() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const NetParams& params) {
  Writer w;
  w.put_raw(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.obs_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.act_dim()));
  const auto hidden = params.policy.hidden_widths();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(hidden.size()));
  for (int width : hidden) w.put<std::uint32_t>(static_cast<std::uint32_t>(width));
  const Eigen::VectorXd flat = params.flatten();
  w.put<std::uint64_t>(static_cast<std::uint64_t>(flat.size()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) w.put<double>(flat(i));
  return w.take();
}

NetParams decode_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  r.need(sizeof(kMagic), "magic");
  if (std::memcmp(r.cursor(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not an AHRM checkpoint (bad magic)", 0);
  }
  r.skip(sizeof(kMagic));
  const std::size_t version_at = r.pos();
  if (r.get<std::uint32_t>("version") != kVersion) {
    throw ParseError("unsupported checkpoint version", version_at);
  }
  const std::size_t dims_at = r.pos();
  const auto obs_dim = r.get<std::uint32_t>("obs_dim");
  const auto act_dim = r.get<std::uint32_t>("act_dim");
  const auto num_hidden = r.get<std::uint32_t>("hidden layer count");
  if (obs_dim == 0 || act_dim == 0 || obs_dim > kMaxWidth || act_dim > kMaxWidth ||
      num_hidden > kMaxHidden) {
    throw ParseError("implausible network dimensions", dims_at);
  }
  std::vector<int> hidden;
  for (std::uint32_t i = 0; i < num_hidden; ++i) {
    const std::size_t at = r.pos();
    const auto width = r.get<std::uint32_t>("hidden width");
    if (width == 0 || width > kMaxWidth) throw ParseError("implausible hidden width", at);
    hidden.push_back(static_cast<int>(width));
  }

  // Shapes only; values are overwritten below.
  NetParams params = init_params(static_cast<int>(obs_dim), static_cast<int>(act_dim), hidden, 0);
  const std::size_t count_at = r.pos();
  const auto count = r.get<std::uint64_t>("parameter count");
  if (count != params.num_params()) {
    throw ParseError("parameter count does not match the declared shapes", count_at);
  }
  r.need(count * sizeof(double), "parameters");
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) flat(static_cast<Eigen::Index>(i)) = r.get<double>("parameters");
  if (r.remaining() != 0) throw ParseError("trailing bytes after checkpoint", r.pos());
  params.assign(flat);
  return params;
}

void save(const NetParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

NetParams load(const std::filesystem::path& path, std::optional<int> expected_obs_dim,
               std::optional<int> expected_act_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  NetParams params = decode_checkpoint(bytes);
  if (expected_obs_dim && params.obs_dim() != *expected_obs_dim) {
    throw ShapeMismatch("checkpoint expects observations of length " +
                        std::to_string(params.obs_dim()) + ", environment provides " +
                        std::to_string(*expected_obs_dim));
  }
  if (expected_act_dim && params.act_dim() != *expected_act_dim) {
    throw ShapeMismatch("checkpoint produces actions of length " +
                        std::to_string(params.act_dim()) + ", environment expects " +
                        std::to_string(*expected_act_dim));
  }
  return params;
}

}  // namespace ahrm::ppo
