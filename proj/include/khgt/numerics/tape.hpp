#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "khgt/numerics/tensor.hpp"

namespace khgt::numerics {

using Index = std::vector<std::uint32_t>;
using SharedIndex = std::shared_ptr<const Index>;

inline SharedIndex share(Index idx) { return std::make_shared<const Index>(std::move(idx)); }

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kMatMul,
  kMatMulNT,
  kTranspose,
  kReshape,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddConst,
  kAddRowBroadcast,
  kSum,
  kSumSquares,
  kRelu,
  kLeakyRelu,
  kRowSoftmax,
  kGatherRows,
  kScatterAddRows,
  kSegmentSoftmax,
  kHeadDot,
  kHeadScale,
  kConcatRows,
  kSliceRows,
};

const char* op_name(Op op);

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so the node list is always topologically sorted. Not thread-safe; use
/// one tape per worker.
class Tape {
 public:
  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    Tensor value;
    SharedIndex index;
    std::size_t count = 0;
    double scalar = 0.0;
    std::string name;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is reported by backward() under `name`.
  Var parameter(const std::string& name, Tensor value);

  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradients of a scalar node with respect to every registered parameter.
  /// Parameters that do not influence the loss get zero tensors.
  GradientMap backward(Var loss) const;

  Var push(Op op, std::vector<std::size_t> inputs, Tensor value, SharedIndex index = nullptr,
           std::size_t count = 0, double scalar = 0.0);

 private:
  std::deque<Node> nodes_;
  std::unordered_map<std::string, std::size_t> parameters_;
};

// Differentiable operations. All inputs must live on the same tape.

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Elementwise product.
Var operator*(Var a, Var b);
Var scale(Var a, double c);
Var add_constant(Var a, double c);
/// a: n x m, b: m entries, added to every row.
Var add_row_broadcast(Var a, Var b);
Var sum(Var a);
Var sum_squares(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
/// Softmax of every row of a matrix.
Var softmax_rows(Var a);
Var gather_rows(Var a, SharedIndex index);
/// out[index[e]] += a[e]; out has `rows` rows.
Var scatter_add_rows(Var a, SharedIndex index, std::size_t rows);
/// Column-wise softmax within groups of rows sharing a segment id.
Var segment_softmax(Var a, SharedIndex segments, std::size_t num_segments);
/// out[e, h] = factor * <a[e, head h], b[e, head h]> with equal-width head blocks.
Var head_dot(Var a, Var b, std::size_t heads, double factor);
/// out[e, c] = w[e, head(c)] * v[e, c].
Var head_scale(Var w, Var v);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);

}  // namespace khgt::numerics
