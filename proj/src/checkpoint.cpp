#include "weedpilot/deploy/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace weedpilot::deploy {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'W', 'P', 'C', 'K'};

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& b, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(b, u);
}

class Reader {
 public:
  Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw Error("checkpoint " + path_ + " truncated at offset " + std::to_string(pos_) +
                  " (need " + std::to_string(n) + " more bytes)");
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint8_t>(bytes_[pos_]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes_[pos_ + 1])) << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    std::uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json config{{"model", ckpt.graph.to_json()},
              {"meta", {{"epoch", ckpt.meta.epoch}, {"val_loss", ckpt.meta.val_loss}}}};
  config["taxonomy"] =
      ckpt.taxonomy_json.empty() ? json(nullptr) : json::parse(ckpt.taxonomy_json);
  const std::string config_str = config.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, Checkpoint::kVersion);
  put_u32(out, static_cast<std::uint32_t>(config_str.size()));
  out.append(config_str);
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params.entries()) {
    if (name.size() > 0xffff) throw Error("checkpoint: tensor name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
    out.push_back(static_cast<char>(t.shape().rank));
    for (int i = 0; i < t.shape().rank; ++i)
      put_u32(out, static_cast<std::uint32_t>(t.shape().d[i]));
    for (long long i = 0; i < t.size(); ++i) put_f32(out, t[i]);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);

  if (r.str(4) != std::string(kMagic, 4))
    throw Error("checkpoint format error: bad magic in " + path);
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion)
    throw Error("checkpoint format error: unsupported version " + std::to_string(version));

  const std::uint32_t config_len = r.u32();
  json config = json::parse(r.str(config_len), nullptr, false);
  if (config.is_discarded()) throw Error("checkpoint format error: malformed config JSON");

  Checkpoint ckpt;
  ckpt.graph = nn::ModelGraph::from_json(config.at("model"));
  ckpt.meta.epoch = config.at("meta").at("epoch").get<int>();
  ckpt.meta.val_loss = config.at("meta").at("val_loss").get<double>();
  if (config.contains("taxonomy") && !config.at("taxonomy").is_null())
    ckpt.taxonomy_json = config.at("taxonomy").dump();

  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const int ndim = r.u8();
    if (ndim < 1 || ndim > 4)
      throw Error("checkpoint format error: tensor " + name + " has rank " +
                  std::to_string(ndim));
    nn::Shape shape;
    shape.rank = ndim;
    for (int i = 0; i < ndim; ++i) {
      shape.d[i] = static_cast<int>(r.u32());
      if (shape.d[i] <= 0) throw Error("checkpoint format error: bad dim in tensor " + name);
    }
    nn::Tensor<float> t(shape);
    for (long long i = 0; i < t.size(); ++i) t[i] = r.f32();
    ckpt.params.add(std::move(name), std::move(t));
  }

  // Shapes must agree with the declared graph; the error names the tensor.
  nn::validate_params(nn::compile(ckpt.graph), ckpt.params);
  return ckpt;
}

}  // namespace weedpilot::deploy
