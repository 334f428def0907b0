#pragma once

// Binary trace ('DSTR') and weight tensor ('DWTS') files. All numbers are
// little-endian; floats are IEEE-754 binary32 on disk and double in memory.
//
// DSTR layout (32-byte header, then token-major payload):
//   0  char[4]  magic "DSTR"
//   4  u32      version (1)
//   8  u32      num_layers
//   12 u32      d_model
//   16 u32      d_ff
//   20 u64      num_tokens
//   28 u8       payload kind: 0 = activations, 1 = unit accesses
//   29 u8[3]    reserved, zero
//   payload, for each token, for each layer:
//     activations:  d_model x f32
//     unit accesses: varint count, then count varint indices, ascending
//
// DWTS layout:
//   0  char[4]  magic "DWTS"
//   4  u32      version (1)
//   8  u32      tensor count
//   per tensor: u32 ndim, ndim x u64 dims, prod(dims) x f32 row-major

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "dipsim/core/swiglu.hpp"
#include "dipsim/traces/trace.hpp"

namespace dipsim {

inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::uint32_t kWeightsVersion = 1;

enum class PayloadKind : std::uint8_t { Activations = 0, UnitAccesses = 1 };

class FormatError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, UnsupportedVersion, Truncated, Corrupt, TrailingBytes };
  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Unreadable or unwritable path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Bytes = std::vector<std::uint8_t>;
using TraceFile = std::variant<ActivationTrace, UnitAccessTrace>;

Bytes encode_trace(const ActivationTrace& trace);
Bytes encode_trace(const UnitAccessTrace& trace);
TraceFile decode_trace(const Bytes& bytes);

void write_trace(const std::filesystem::path& path, const TraceFile& trace);
TraceFile read_trace(const std::filesystem::path& path);
/// Reads a file that must hold activations.
ActivationTrace read_activation_trace(const std::filesystem::path& path);

Bytes encode_tensors(const std::vector<Eigen::MatrixXd>& tensors);
std::vector<Eigen::MatrixXd> decode_tensors(const Bytes& bytes);

/// Up, gate, down per layer, in that order.
void write_mlp_weights(const std::filesystem::path& path, const std::vector<MlpWeightsd>& layers);
std::vector<MlpWeightsd> read_mlp_weights(const std::filesystem::path& path);

/// Whole-file helpers. write_file goes through a temp file and rename.
Bytes read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size);

/// Rounds every entry through binary32, matching what the file stores.
void round_to_float(Eigen::MatrixXd& m);

}  // namespace dipsim
