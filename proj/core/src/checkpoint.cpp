#include "superedge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "superedge/errors.hpp"

namespace superedge {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

class Reader {
 public:
  Reader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  template <class T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw IoError(name_ + ": truncated checkpoint");
  }
  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::string buf = "SEDG";
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff) throw std::invalid_argument("checkpoint: tensor name too long");
    if (t.rank() > 0xff) throw std::invalid_argument("checkpoint: tensor rank too large");
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(name.size()));
    buf += name;
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
    const auto data = t.data();
    buf.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
  }
  if (path.has_parent_path()) {
    std::error_code dir_ec;
    std::filesystem::create_directories(path.parent_path(), dir_ec);
    if (dir_ec) throw IoError("cannot create " + path.parent_path().string() + ": " + dir_ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

NamedTensors read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  if (r.bytes(4) != "SEDG") throw IoError(path.string() + ": not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>();
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>();
    std::string name = r.bytes(len);
    const auto rank = r.get<std::uint8_t>();
    Shape shape;
    for (int d = 0; d < rank; ++d) shape.push_back(r.get<std::uint32_t>());
    const std::string raw = r.bytes(static_cast<std::size_t>(shape_numel(shape)) * sizeof(float));
    std::vector<float> values(static_cast<std::size_t>(shape_numel(shape)));
    std::memcpy(values.data(), raw.data(), raw.size());
    out.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw IoError(path.string() + ": trailing bytes after tensor table");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const AdamState& adam, int epoch) {
  NamedTensors all;
  const auto named = params.named_tensors();
  std::size_t slot = 0;
  for (const auto& [name, t] : named) all.emplace_back(name, t.detach());
  for (const auto& [name, t] : named) {
    if (!t.requires_grad()) continue;
    if (slot < adam.m.size() && !adam.m[slot].empty()) {
      all.emplace_back("adam.m." + name, Tensor::from_data(t.shape(), adam.m[slot]));
      all.emplace_back("adam.v." + name, Tensor::from_data(t.shape(), adam.v[slot]));
    }
    ++slot;
  }
  // Integers up to 2^24 are exact in float32; larger counters are split.
  const auto step = static_cast<std::uint64_t>(adam.step);
  all.emplace_back("adam.step", Tensor::from_data({2}, {static_cast<float>(step & 0xffffffULL),
                                                        static_cast<float>(step >> 24)}));
  all.emplace_back("adam.hyper", Tensor::from_data({4}, {adam.lr, adam.beta1, adam.beta2, adam.eps}));
  all.emplace_back("train.epoch", Tensor::from_data({1}, {static_cast<float>(epoch)}));
  write_tensor_file(path, all);
}

TrainingState load_checkpoint(const std::filesystem::path& path, const ModelShape& shape) {
  std::map<std::string, Tensor> table;
  for (auto& [name, t] : read_tensor_file(path)) table.emplace(name, std::move(t));
  auto take = [&](const std::string& name) -> Tensor& {
    auto it = table.find(name);
    if (it == table.end()) throw IoError(path.string() + ": missing tensor " + name);
    return it->second;
  };

  TrainingState st{ModelParams::zeros(shape), AdamState{}, 0};
  const auto named = st.params.named_tensors();
  for (const auto& [name, t] : named) {
    const Tensor& src = take(name);
    if (src.shape() != t.shape()) {
      throw IoError(path.string() + ": tensor " + name + " has shape " + shape_to_string(src.shape()) + ", expected " +
                    shape_to_string(t.shape()));
    }
    Tensor dst = t;
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  }
  for (const auto& [name, t] : named) {
    if (!t.requires_grad()) continue;
    auto m = table.find("adam.m." + name);
    auto v = table.find("adam.v." + name);
    if (m == table.end() || v == table.end()) {
      st.adam.m.emplace_back(t.numel(), 0.0F);
      st.adam.v.emplace_back(t.numel(), 0.0F);
      continue;
    }
    st.adam.m.emplace_back(m->second.data().begin(), m->second.data().end());
    st.adam.v.emplace_back(v->second.data().begin(), v->second.data().end());
  }
  const auto step = take("adam.step").data();
  st.adam.step = static_cast<std::int64_t>(static_cast<std::uint64_t>(step[0]) | (static_cast<std::uint64_t>(step[1]) << 24));
  const auto hyper = take("adam.hyper").data();
  st.adam.lr = hyper[0];
  st.adam.beta1 = hyper[1];
  st.adam.beta2 = hyper[2];
  st.adam.eps = hyper[3];
  st.epoch = static_cast<int>(take("train.epoch").data()[0]);
  return st;
}

}  // namespace superedge
