#include "splatdrop/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace splatdrop {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) throw InputError("truncated checkpoint");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(s_[pos_ + k]);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(s_[pos_ + k]);
    pos_ += 4;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

// Row-wise in PLY property order; normals are written as zeros.
void write_block(Writer& w, const ParamBlock& b) {
  const int rest = sh_coeff_count(b.sh_degree) - 1;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (int k = 0; k < 3; ++k) w.f64(b.row(Param::Mean, i)[k]);
    for (int k = 0; k < 3; ++k) w.f64(0.0);
    for (int k = 0; k < 3; ++k) w.f64(b.row(Param::ShDc, i)[k]);
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < rest; ++k) w.f64(b.row(Param::ShRest, i)[k * 3 + c]);
    }
    w.f64(b[Param::OpacityLogit][i]);
    for (int k = 0; k < 3; ++k) w.f64(b.row(Param::LogScale, i)[k]);
    for (int k = 0; k < 4; ++k) w.f64(b.row(Param::Rotation, i)[k]);
  }
}

ParamBlock read_block(Reader& r, std::size_t n, int degree) {
  ParamBlock b = ParamBlock::zeros(n, degree);
  const int rest = sh_coeff_count(degree) - 1;
  r.need(n * (17 + 3 * rest) * 8);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) b.row(Param::Mean, i)[k] = r.f64();
    for (int k = 0; k < 3; ++k) r.f64();
    for (int k = 0; k < 3; ++k) b.row(Param::ShDc, i)[k] = r.f64();
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < rest; ++k) b.row(Param::ShRest, i)[k * 3 + c] = r.f64();
    }
    b[Param::OpacityLogit][i] = r.f64();
    for (int k = 0; k < 3; ++k) b.row(Param::LogScale, i)[k] = r.f64();
    for (int k = 0; k < 4; ++k) b.row(Param::Rotation, i)[k] = r.f64();
  }
  return b;
}

}  // namespace

std::string encode_checkpoint(const CheckpointData& data) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(data.config.to_json().dump());
  w.i64(data.iteration);
  w.f64(data.cloud.scene_extent);
  w.u64(data.cloud.size());
  w.u32(static_cast<std::uint32_t>(data.cloud.sh_degree()));
  write_block(w, data.cloud.params);
  w.u64(data.adam.step);
  w.f64(data.adam.beta1);
  w.f64(data.adam.beta2);
  w.f64(data.adam.eps);
  write_block(w, data.adam.m);
  write_block(w, data.adam.v);
  for (double g : data.stats.grad_accum) w.f64(g);
  for (double d : data.stats.denom) w.f64(d);
  return w.take();
}

CheckpointData decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw InputError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData data;
  try {
    data.config = TrainConfig::from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("corrupt checkpoint config: ") + e.what());
  }
  data.iteration = static_cast<int>(r.i64());
  const double extent = r.f64();
  const std::uint64_t n = r.u64();
  const std::uint32_t degree = r.u32();
  if (degree > 3) throw InputError("corrupt checkpoint (SH degree " + std::to_string(degree) + ")");
  if (n > bytes.size()) throw InputError("truncated checkpoint");
  data.cloud.params = read_block(r, n, static_cast<int>(degree));
  data.cloud.scene_extent = extent;
  data.adam.step = r.u64();
  data.adam.beta1 = r.f64();
  data.adam.beta2 = r.f64();
  data.adam.eps = r.f64();
  data.adam.m = read_block(r, n, static_cast<int>(degree));
  data.adam.v = read_block(r, n, static_cast<int>(degree));
  r.need(16 * n);
  data.stats.resize(n);
  for (auto& g : data.stats.grad_accum) g = r.f64();
  for (auto& d : data.stats.denom) d = r.f64();
  if (!r.done()) throw InputError("checkpoint has trailing bytes");
  return data;
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  const std::string bytes = encode_checkpoint(data);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing '" + path + "'");
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace splatdrop
