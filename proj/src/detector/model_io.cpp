#include "hc/detector/model_io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace hc::detector {

namespace {

constexpr std::array<char, 5> kMagic = {'H', 'C', 'M', 'D', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

bool try_get(std::istream& in, unsigned char* buf, std::size_t n) {
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!try_get(in, b, 4)) throw ModelFormatError("model file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!try_get(in, b, 8)) throw ModelFormatError("model file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

template <class Tensor>
void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  if constexpr (Tensor::ColsAtCompileTime == 1) {
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(t.size()));
  } else {
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(t.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.cols()));
  }
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) put_f64(out, t(r, c));
}

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

}  // namespace

void save_model(const DetectionModel& model, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  for (std::size_t v : {model.hp.D, model.hp.F, model.hp.C1, model.hp.C2, model.hp.k})
    put_u32(out, static_cast<std::uint32_t>(v));
  for_each_tensor([&](const std::string& name, const auto& t) { write_tensor(out, name, t); },
                  model.params);
  if (!out) throw std::runtime_error("failed writing model");
}

void save_model(const DetectionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_model(model, out);
}

DetectionModel load_model(std::istream& in) {
  std::array<char, 5> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic)
    throw ModelFormatError("unknown model file magic");

  Hyperparams hp;
  hp.D = get_u32(in);
  hp.F = get_u32(in);
  hp.C1 = get_u32(in);
  hp.C2 = get_u32(in);
  hp.k = get_u32(in);
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("bad model header: ") + e.what());
  }

  std::map<std::string, RawTensor> raw;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = get_u32(in);
    if (name_len > 256) throw ModelFormatError("tensor name too long");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (static_cast<std::uint32_t>(in.gcount()) != name_len) throw ModelFormatError("model file truncated");
    RawTensor t;
    const std::uint32_t rank = get_u32(in);
    if (rank < 1 || rank > 2) throw ModelFormatError("tensor " + name + ": unsupported rank");
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.dims.push_back(get_u32(in));
      count *= t.dims.back();
    }
    if (count > (1u << 26)) throw ModelFormatError("tensor " + name + " too large");
    t.values.resize(count);
    for (auto& v : t.values) v = get_f64(in);
    if (!raw.emplace(name, std::move(t)).second) throw ModelFormatError("duplicate tensor " + name);
  }

  DetectionModel model{hp, Parameters::zeros(hp)};
  std::size_t consumed = 0;
  for_each_tensor(
      [&](const std::string& name, auto& t) {
        auto it = raw.find(name);
        if (it == raw.end()) throw ModelFormatError("missing tensor " + name);
        const RawTensor& r = it->second;
        const bool vector_like = std::decay_t<decltype(t)>::ColsAtCompileTime == 1;
        const bool dims_ok =
            vector_like ? (r.dims.size() == 1 && r.dims[0] == t.size())
                        : (r.dims.size() == 2 && r.dims[0] == t.rows() && r.dims[1] == t.cols());
        if (!dims_ok) throw ModelFormatError("tensor " + name + ": dimension mismatch");
        std::size_t i = 0;
        for (Eigen::Index row = 0; row < t.rows(); ++row)
          for (Eigen::Index col = 0; col < t.cols(); ++col) t(row, col) = r.values[i++];
        ++consumed;
      },
      model.params);
  if (consumed != raw.size()) throw ModelFormatError("model file has unknown tensors");
  if (!all_finite(model.params)) throw ModelFormatError("model weights are not finite");
  return model;
}

DetectionModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  return load_model(in);
}

std::string model_version(const DetectionModel& model) {
  std::ostringstream buf;
  save_model(model, buf);
  const std::string bytes = buf.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char out[32];
  std::snprintf(out, sizeof out, "hcmd1-%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace hc::detector
