#include "dipsim/traces/trace_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace dipsim {

static_assert(std::endian::native == std::endian::little, "file codecs assume a little-endian host");

namespace {

using Kind = FormatError::Kind;

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_magic(const char (&m)[5]) { out_.insert(out_.end(), m, m + 4); }
  void put_varint(std::uint64_t v) {
    while (v >= 0x80) {
      out_.push_back(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    out_.push_back(static_cast<std::uint8_t>(v));
  }

 private:
  Bytes& out_;
};

class Reader {
 public:
  explicit Reader(const Bytes& in) : in_(in) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void expect_magic(const char (&m)[5]) {
    if (in_.size() < 4 || std::memcmp(in_.data(), m, 4) != 0)
      throw FormatError(Kind::BadMagic, std::string("bad magic, expected '") + m + "'");
    pos_ = 4;
  }
  std::uint64_t get_varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const auto b = get<std::uint8_t>();
      v |= std::uint64_t(b & 0x7f) << shift;
      if ((b & 0x80) == 0) return v;
    }
    throw FormatError(Kind::Corrupt, "varint longer than 10 bytes");
  }
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError(Kind::Truncated, "truncated payload");
  }
  void expect_end() const {
    if (pos_ != in_.size()) throw FormatError(Kind::TrailingBytes, "unexpected bytes after payload");
  }

 private:
  const Bytes& in_;
  std::size_t pos_ = 0;
};

std::uint32_t narrow_u32(Index v, const char* what) {
  if (v < 0 || v > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument(std::string(what) + " does not fit the file header");
  return static_cast<std::uint32_t>(v);
}

void put_header(Writer& w, Index layers, Index d_model, Index d_ff, Index tokens, PayloadKind kind) {
  w.put_magic("DSTR");
  w.put<std::uint32_t>(kTraceVersion);
  w.put<std::uint32_t>(narrow_u32(layers, "num_layers"));
  w.put<std::uint32_t>(narrow_u32(d_model, "d_model"));
  w.put<std::uint32_t>(narrow_u32(d_ff, "d_ff"));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(tokens));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(kind));
  for (int i = 0; i < 3; ++i) w.put<std::uint8_t>(0);
}

}  // namespace

void round_to_float(Eigen::MatrixXd& m) {
  m = m.unaryExpr([](double v) { return double(static_cast<float>(v)); });
}

Bytes encode_trace(const ActivationTrace& trace) {
  for (const auto& l : trace.layers)
    require_dims(l.rows() == trace.d_model && l.cols() == trace.num_tokens(), "encode_trace: ragged layers");
  Bytes out;
  Writer w(out);
  put_header(w, trace.num_layers(), trace.d_model, trace.d_ff, trace.num_tokens(), PayloadKind::Activations);
  out.reserve(out.size() + std::size_t(trace.num_layers() * trace.d_model * trace.num_tokens()) * 4);
  for (Index t = 0; t < trace.num_tokens(); ++t)
    for (const auto& l : trace.layers)
      for (Index i = 0; i < trace.d_model; ++i) w.put<float>(static_cast<float>(l(i, t)));
  return out;
}

Bytes encode_trace(const UnitAccessTrace& trace) {
  Bytes out;
  Writer w(out);
  put_header(w, trace.num_layers, trace.d_model, trace.d_ff, trace.num_tokens(), PayloadKind::UnitAccesses);
  for (const auto& tok : trace.tokens) {
    require_dims(static_cast<Index>(tok.size()) == trace.num_layers, "encode_trace: token layer count");
    for (const auto& units : tok) {
      w.put_varint(units.size());
      Index prev = -1;
      for (Index u : units) {
        if (u <= prev) throw std::invalid_argument("encode_trace: unit indices must be ascending and unique");
        if (u >= std::max(trace.d_model, trace.d_ff)) throw std::invalid_argument("encode_trace: unit index out of range");
        w.put_varint(static_cast<std::uint64_t>(u));
        prev = u;
      }
    }
  }
  return out;
}

TraceFile decode_trace(const Bytes& bytes) {
  Reader r(bytes);
  r.expect_magic("DSTR");
  const auto version = r.get<std::uint32_t>();
  if (version != kTraceVersion)
    throw FormatError(Kind::UnsupportedVersion, "unsupported trace version " + std::to_string(version));
  const Index layers = r.get<std::uint32_t>();
  const Index d_model = r.get<std::uint32_t>();
  const Index d_ff = r.get<std::uint32_t>();
  const auto tokens64 = r.get<std::uint64_t>();
  const auto kind = r.get<std::uint8_t>();
  for (int i = 0; i < 3; ++i)
    if (r.get<std::uint8_t>() != 0) throw FormatError(Kind::Corrupt, "reserved header bytes must be zero");
  if (tokens64 > std::uint64_t(std::numeric_limits<std::int32_t>::max()))
    throw FormatError(Kind::Corrupt, "token count out of range");
  const auto tokens = static_cast<Index>(tokens64);

  if (kind == static_cast<std::uint8_t>(PayloadKind::Activations)) {
    if (layers > 0 && d_model > 0 && tokens > 0) r.need(std::size_t(layers) * std::size_t(d_model) * std::size_t(tokens) * 4);
    ActivationTrace t = ActivationTrace::zeros(layers, d_model, d_ff, tokens);
    for (Index k = 0; k < tokens; ++k)
      for (auto& l : t.layers)
        for (Index i = 0; i < d_model; ++i) l(i, k) = double(r.get<float>());
    r.expect_end();
    return t;
  }
  if (kind == static_cast<std::uint8_t>(PayloadKind::UnitAccesses)) {
    UnitAccessTrace t;
    t.num_layers = layers;
    t.d_model = d_model;
    t.d_ff = d_ff;
    t.tokens.resize(static_cast<std::size_t>(tokens));
    // Indices address any group of the layer; the widest has max(d_model, d_ff) units.
    const auto bound = std::uint64_t(std::max(d_model, d_ff));
    for (auto& tok : t.tokens) {
      tok.resize(static_cast<std::size_t>(layers));
      for (auto& units : tok) {
        const auto count = r.get_varint();
        r.need(count);  // every varint takes at least one byte
        units.reserve(count);
        std::uint64_t prev = 0;
        for (std::uint64_t i = 0; i < count; ++i) {
          const auto u = r.get_varint();
          if (i > 0 && u <= prev) throw FormatError(Kind::Corrupt, "unit indices not ascending");
          if (u >= bound) throw FormatError(Kind::Corrupt, "unit index out of range");
          units.push_back(static_cast<Index>(u));
          prev = u;
        }
      }
    }
    r.expect_end();
    return t;
  }
  throw FormatError(Kind::Corrupt, "unknown payload kind " + std::to_string(kind));
}

Bytes encode_tensors(const std::vector<Eigen::MatrixXd>& tensors) {
  Bytes out;
  Writer w(out);
  w.put_magic("DWTS");
  w.put<std::uint32_t>(kWeightsVersion);
  w.put<std::uint32_t>(narrow_u32(static_cast<Index>(tensors.size()), "tensor count"));
  for (const auto& m : tensors) {
    w.put<std::uint32_t>(2);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) w.put<float>(static_cast<float>(m(i, j)));
  }
  return out;
}

std::vector<Eigen::MatrixXd> decode_tensors(const Bytes& bytes) {
  Reader r(bytes);
  r.expect_magic("DWTS");
  const auto version = r.get<std::uint32_t>();
  if (version != kWeightsVersion)
    throw FormatError(Kind::UnsupportedVersion, "unsupported weights version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  std::vector<Eigen::MatrixXd> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto ndim = r.get<std::uint32_t>();
    if (ndim == 0 || ndim > 2) throw FormatError(Kind::Corrupt, "only 1-d and 2-d tensors are supported");
    const auto rows = r.get<std::uint64_t>();
    const auto cols = ndim == 2 ? r.get<std::uint64_t>() : std::uint64_t{1};
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw FormatError(Kind::Corrupt, "tensor dims out of range");
    r.need(rows * cols * 4);
    Eigen::MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = double(r.get<float>());
    out.push_back(std::move(m));
  }
  r.expect_end();
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  Bytes data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return data;
}

void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!f) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto '" + path.string() + "'");
  }
}

void write_trace(const std::filesystem::path& path, const TraceFile& trace) {
  const Bytes b = std::visit([](const auto& t) { return encode_trace(t); }, trace);
  write_file_atomic(path, b.data(), b.size());
}

TraceFile read_trace(const std::filesystem::path& path) { return decode_trace(read_file(path)); }

ActivationTrace read_activation_trace(const std::filesystem::path& path) {
  auto t = read_trace(path);
  if (!std::holds_alternative<ActivationTrace>(t))
    throw FormatError(Kind::Corrupt, "'" + path.string() + "' holds unit accesses, not activations");
  return std::get<ActivationTrace>(std::move(t));
}

void write_mlp_weights(const std::filesystem::path& path, const std::vector<MlpWeightsd>& layers) {
  std::vector<Eigen::MatrixXd> tensors;
  for (const auto& w : layers) {
    tensors.push_back(w.up);
    tensors.push_back(w.gate);
    tensors.push_back(w.down);
  }
  const Bytes b = encode_tensors(tensors);
  write_file_atomic(path, b.data(), b.size());
}

std::vector<MlpWeightsd> read_mlp_weights(const std::filesystem::path& path) {
  auto tensors = decode_tensors(read_file(path));
  if (tensors.size() % 3 != 0) throw FormatError(Kind::Corrupt, "MLP weight file needs 3 tensors per layer");
  std::vector<MlpWeightsd> layers;
  for (std::size_t i = 0; i < tensors.size(); i += 3) {
    MlpWeightsd w{std::move(tensors[i]), std::move(tensors[i + 1]), std::move(tensors[i + 2])};
    w.validate();
    layers.push_back(std::move(w));
  }
  return layers;
}

}  // namespace dipsim
