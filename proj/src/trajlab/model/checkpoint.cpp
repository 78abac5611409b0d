#include "trajlab/model/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "trajlab/data/ppm.hpp"
#include "trajlab/error.hpp"

namespace trajlab::model {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'T', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

[[noreturn]] void ckpt_error(const std::string& what) {
  fail(ErrorKind::Checkpoint, "checkpoint: " + what);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void need(std::size_t n, const std::string& field) const {
    if (b_.size() - pos_ < n)
      ckpt_error("truncated while reading " + field + " at byte " + std::to_string(pos_));
  }
  std::uint32_t u32(const std::string& field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n, const std::string& field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& c, const Params& p) {
  check_params(p, c);
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  const std::string cfg = config_dump(c);
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.insert(out.end(), cfg.begin(), cfg.end());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const auto& name = p.names[i];
    const auto& t = p.tensors[i];
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float f : t.values()) put_f32(out, f);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.bytes(4, "magic") != std::string(kMagic, 4)) ckpt_error("bad magic (expected CLTM)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    ckpt_error("unsupported version " + std::to_string(version));
  const std::uint32_t cfg_len = r.u32("config length");
  const std::string cfg_text = r.bytes(cfg_len, "config");

  Checkpoint ck;
  try {
    ck.config = config_from_json(nlohmann::json::parse(cfg_text));
  } catch (const nlohmann::json::exception& e) {
    ckpt_error(std::string("config block does not parse: ") + e.what());
  } catch (const Error& e) {
    ckpt_error(std::string("config block invalid: ") + e.what());
  }

  for (const ParamSpec& spec : param_specs(ck.config)) {
    const std::string& name = spec.name;
    const std::uint32_t name_len = r.u32("name length of " + name);
    const std::string got = r.bytes(name_len, "name of " + name);
    if (got != name) ckpt_error("tensor name '" + got + "' where '" + name + "' was expected");
    const std::uint32_t rank = r.u32("rank of " + name);
    if (rank != spec.dims.size())
      ckpt_error("rank of " + name + " is " + std::to_string(rank) + ", config implies " +
                 std::to_string(spec.dims.size()));
    nn::Shape dims;
    for (std::uint32_t k = 0; k < rank; ++k) dims.push_back(r.u32("dims of " + name));
    if (dims != spec.dims)
      ckpt_error("dims of " + name + " are " + nn::shape_str(dims) + ", config implies " +
                 nn::shape_str(spec.dims));
    const std::size_t n = nn::shape_numel(dims);
    r.need(4 * n, "data of " + name);
    std::vector<float> data(n);
    for (std::size_t k = 0; k < n; ++k) data[k] = std::bit_cast<float>(r.u32("data of " + name));
    ck.params.names.push_back(name);
    ck.params.tensors.emplace_back(dims, std::move(data));
  }
  if (!r.done())
    ckpt_error(std::to_string(bytes.size() - r.pos()) + " trailing bytes after the last tensor");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& c, const Params& p) {
  const auto bytes = encode_checkpoint(c, p);
  data::write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(data::read_file_bytes(path));
}

std::size_t checkpoint_size(const ModelConfig& c) {
  std::size_t n = 4 + 4 + 4 + config_dump(c).size();
  for (const auto& s : param_specs(c))
    n += 4 + s.name.size() + 4 + 4 * s.dims.size() + 4 * nn::shape_numel(s.dims);
  return n;
}

}  // namespace trajlab::model
