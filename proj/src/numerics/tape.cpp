#include "khgt/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "khgt/errors.hpp"

namespace khgt::numerics {

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("operands live on different tapes");
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ContractError("variable is not attached to a tape");
  return *a.tape;
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + " expects a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + " shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// out += a * b^T, a: m x k, b: n x k
void gemm_nt_acc(const double* a, const double* b, double* out, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* br = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      out[i * n + j] += acc;
    }
  }
}

// out += a * b, a: m x k, b: k x n
void gemm_nn_acc(const double* a, const double* b, double* out, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* br = b + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

// out += a^T * b, a: k x m, b: k x n
void gemm_tn_acc(const double* a, const double* b, double* out, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ar = a + p * m;
    const double* br = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double* o = out + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulNT: return "matmul_nt";
    case Op::kTranspose: return "transpose";
    case Op::kReshape: return "reshape";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAddConst: return "add_const";
    case Op::kAddRowBroadcast: return "add_row_broadcast";
    case Op::kSum: return "sum";
    case Op::kSumSquares: return "sum_squares";
    case Op::kRelu: return "relu";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kRowSoftmax: return "softmax_rows";
    case Op::kGatherRows: return "gather_rows";
    case Op::kScatterAddRows: return "scatter_add_rows";
    case Op::kSegmentSoftmax: return "segment_softmax";
    case Op::kHeadDot: return "head_dot";
    case Op::kHeadScale: return "head_scale";
    case Op::kConcatRows: return "concat_rows";
    case Op::kSliceRows: return "slice_rows";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (tape == nullptr) throw ContractError("variable is not attached to a tape");
  return tape->node(id).value;
}

Var Tape::push(Op op, std::vector<std::size_t> inputs, Tensor value, SharedIndex index, std::size_t count,
               double scalar) {
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), std::move(index), count, scalar, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) { return push(Op::kConstant, {}, std::move(value)); }

Var Tape::parameter(const std::string& name, Tensor value) {
  if (parameters_.count(name)) throw ContractError("parameter '" + name + "' registered twice");
  Var v = push(Op::kParameter, {}, std::move(value));
  nodes_.back().name = name;
  parameters_.emplace(name, v.id);
  return v;
}

GradientMap Tape::backward(Var loss) const {
  if (loss.tape != this) throw ContractError("loss does not belong to this tape");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.size() != 1) throw ContractError("backward needs a scalar loss, got shape " + shape_string(lv.shape()));

  std::vector<Tensor> grads(loss.id + 1);
  grads[loss.id] = Tensor::filled(lv.shape(), 1.0);

  auto acc = [&](std::size_t id) -> Tensor& {
    if (grads[id].empty() && nodes_[id].value.size() > 0) grads[id] = Tensor(nodes_[id].value.shape());
    if (grads[id].shape() != nodes_[id].value.shape()) grads[id] = Tensor(nodes_[id].value.shape());
    return grads[id];
  };

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (grads[id].empty()) continue;
    const Tensor& g = grads[id];
    const auto& in = n.inputs;
    switch (n.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kMatMul: {
        const Tensor& a = nodes_[in[0]].value;
        const Tensor& b = nodes_[in[1]].value;
        const std::size_t m = a.shape()[0], k = a.shape()[1], nn = b.shape()[1];
        gemm_nt_acc(g.data().data(), b.data().data(), acc(in[0]).data().data(), m, k, nn);
        gemm_tn_acc(a.data().data(), g.data().data(), acc(in[1]).data().data(), k, nn, m);
        break;
      }
      case Op::kMatMulNT: {
        const Tensor& a = nodes_[in[0]].value;
        const Tensor& b = nodes_[in[1]].value;
        const std::size_t m = a.shape()[0], k = a.shape()[1], nn = b.shape()[0];
        gemm_nn_acc(g.data().data(), b.data().data(), acc(in[0]).data().data(), m, k, nn);
        gemm_tn_acc(g.data().data(), a.data().data(), acc(in[1]).data().data(), nn, k, m);
        break;
      }
      case Op::kTranspose: {
        Tensor& ga = acc(in[0]);
        const std::size_t r = g.shape()[0], c = g.shape()[1];
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[j * r + i] += g[i * c + j];
        break;
      }
      case Op::kReshape:
      case Op::kAddConst: {
        Tensor& ga = acc(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::kAdd: {
        for (std::size_t s = 0; s < 2; ++s) {
          Tensor& ga = acc(in[s]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor& ga = acc(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Tensor& gb = acc(in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        break;
      }
      case Op::kMul: {
        const Tensor& a = nodes_[in[0]].value;
        const Tensor& b = nodes_[in[1]].value;
        Tensor& ga = acc(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
        Tensor& gb = acc(in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        break;
      }
      case Op::kScale: {
        Tensor& ga = acc(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
        break;
      }
      case Op::kAddRowBroadcast: {
        Tensor& ga = acc(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Tensor& gb = acc(in[1]);
        const std::size_t c = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
        break;
      }
      case Op::kSum: {
        Tensor& ga = acc(in[0]);
        for (double& x : ga.data()) x += g[0];
        break;
      }
      case Op::kSumSquares: {
        const Tensor& a = nodes_[in[0]].value;
        Tensor& ga = acc(in[0]);
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += 2.0 * a[i] * g[0];
        break;
      }
      case Op::kRelu: {
        const Tensor& a = nodes_[in[0]].value;
        Tensor& ga = acc(in[0]);
        for (std::size_t i = 0; i < a.size(); ++i)
          if (a[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::kLeakyRelu: {
        const Tensor& a = nodes_[in[0]].value;
        Tensor& ga = acc(in[0]);
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += a[i] >= 0.0 ? g[i] : n.scalar * g[i];
        break;
      }
      case Op::kRowSoftmax: {
        const Tensor& y = n.value;
        Tensor& ga = acc(in[0]);
        const std::size_t r = y.rows(), c = y.cols();
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
          for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
        }
        break;
      }
      case Op::kGatherRows: {
        Tensor& ga = acc(in[0]);
        const std::size_t c = ga.cols();
        const Index& idx = *n.index;
        for (std::size_t e = 0; e < idx.size(); ++e) {
          double* dst = ga.data().data() + idx[e] * c;
          const double* src = g.data().data() + e * c;
          for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
        }
        break;
      }
      case Op::kScatterAddRows: {
        Tensor& ga = acc(in[0]);
        const std::size_t c = ga.cols();
        const Index& idx = *n.index;
        for (std::size_t e = 0; e < idx.size(); ++e) {
          double* dst = ga.data().data() + e * c;
          const double* src = g.data().data() + idx[e] * c;
          for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
        }
        break;
      }
      case Op::kSegmentSoftmax: {
        const Tensor& y = n.value;
        Tensor& ga = acc(in[0]);
        const std::size_t c = y.cols();
        const Index& seg = *n.index;
        std::vector<double> dots(n.count * c, 0.0);
        for (std::size_t e = 0; e < seg.size(); ++e)
          for (std::size_t h = 0; h < c; ++h) dots[seg[e] * c + h] += g[e * c + h] * y[e * c + h];
        for (std::size_t e = 0; e < seg.size(); ++e)
          for (std::size_t h = 0; h < c; ++h)
            ga[e * c + h] += y[e * c + h] * (g[e * c + h] - dots[seg[e] * c + h]);
        break;
      }
      case Op::kHeadDot: {
        const Tensor& a = nodes_[in[0]].value;
        const Tensor& b = nodes_[in[1]].value;
        const std::size_t rows = a.rows(), width = a.cols(), heads = n.count, hw = width / heads;
        Tensor& ga = acc(in[0]);
        Tensor& gb = acc(in[1]);
        for (std::size_t e = 0; e < rows; ++e)
          for (std::size_t h = 0; h < heads; ++h) {
            const double ge = n.scalar * g[e * heads + h];
            for (std::size_t c = h * hw; c < (h + 1) * hw; ++c) {
              ga[e * width + c] += ge * b[e * width + c];
              gb[e * width + c] += ge * a[e * width + c];
            }
          }
        break;
      }
      case Op::kHeadScale: {
        const Tensor& w = nodes_[in[0]].value;
        const Tensor& v = nodes_[in[1]].value;
        const std::size_t rows = v.rows(), width = v.cols(), heads = w.cols(), hw = width / heads;
        Tensor& gw = acc(in[0]);
        Tensor& gv = acc(in[1]);
        for (std::size_t e = 0; e < rows; ++e)
          for (std::size_t h = 0; h < heads; ++h) {
            const double we = w[e * heads + h];
            double s = 0.0;
            for (std::size_t c = h * hw; c < (h + 1) * hw; ++c) {
              s += g[e * width + c] * v[e * width + c];
              gv[e * width + c] += g[e * width + c] * we;
            }
            gw[e * heads + h] += s;
          }
        break;
      }
      case Op::kConcatRows: {
        std::size_t offset = 0;
        for (std::size_t s = 0; s < in.size(); ++s) {
          Tensor& ga = acc(in[s]);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[offset + i];
          offset += nodes_[in[s]].value.size();
        }
        break;
      }
      case Op::kSliceRows: {
        Tensor& ga = acc(in[0]);
        const std::size_t offset = n.count * ga.cols();
        for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
        break;
      }
    }
  }

  GradientMap out;
  for (const auto& [name, id] : parameters_) {
    if (id < grads.size() && !grads[id].empty() && grads[id].shape() == nodes_[id].value.shape()) {
      out.emplace(name, std::move(grads[id]));
    } else {
      out.emplace(name, Tensor(nodes_[id].value.shape()));
    }
  }
  return out;
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.push(Op::kMatMul, {a.id, b.id}, matmul(a.value(), b.value()));
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[1]) {
    throw DimensionError("matmul_nt shape mismatch: " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
  }
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[0];
  Tensor out({m, n});
  gemm_nt_acc(av.data().data(), bv.data().data(), out.data().data(), m, n, k);
  return t.push(Op::kMatMulNT, {a.id, b.id}, std::move(out));
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t r = av.shape()[0], c = av.shape()[1];
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return t.push(Op::kTranspose, {a.id}, std::move(out));
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  return t.push(Op::kReshape, {a.id}, a.value().reshaped(std::move(shape)));
}

Var operator+(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return t.push(Op::kAdd, {a.id, b.id}, std::move(out));
}

Var operator-(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return t.push(Op::kSub, {a.id, b.id}, std::move(out));
}

Var operator*(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.push(Op::kMul, {a.id, b.id}, std::move(out));
}

Var scale(Var a, double c) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& x : out.data()) x *= c;
  return t.push(Op::kScale, {a.id}, std::move(out), nullptr, 0, c);
}

Var add_constant(Var a, double c) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& x : out.data()) x += c;
  return t.push(Op::kAddConst, {a.id}, std::move(out), nullptr, 0, c);
}

Var add_row_broadcast(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.size()) {
    throw DimensionError("add_row_broadcast shape mismatch: " + shape_string(av.shape()) + " + " +
                         shape_string(bv.shape()));
  }
  Tensor out = av;
  const std::size_t c = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % c];
  return t.push(Op::kAddRowBroadcast, {a.id, b.id}, std::move(out));
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return t.push(Op::kSum, {a.id}, Tensor::scalar(s));
}

Var sum_squares(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  return t.push(Op::kSumSquares, {a.id}, Tensor::scalar(s));
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return t.push(Op::kRelu, {a.id}, std::move(out));
}

Var leaky_relu(Var a, double slope) {
  Tape& t = tape_of(a);
  return t.push(Op::kLeakyRelu, {a.id}, leaky_relu(a.value(), slope), nullptr, 0, slope);
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(av.shape());
  const std::size_t r = av.rows(), c = av.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, av[i * c + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += out[i * c + j] = std::exp(av[i * c + j] - mx);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= total;
  }
  return t.push(Op::kRowSoftmax, {a.id}, std::move(out));
}

Var gather_rows(Var a, SharedIndex index) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (av.rank() == 0) throw DimensionError("gather_rows needs rank >= 1");
  const std::size_t c = av.cols();
  Shape shape = av.shape();
  shape[0] = index->size();
  Tensor out(shape);
  for (std::size_t e = 0; e < index->size(); ++e) {
    const std::uint32_t r = (*index)[e];
    if (r >= av.rows()) throw RangeError("gather_rows index " + std::to_string(r) + " out of " + std::to_string(av.rows()));
    std::copy_n(av.data().data() + r * c, c, out.data().data() + e * c);
  }
  return t.push(Op::kGatherRows, {a.id}, std::move(out), std::move(index));
}

Var scatter_add_rows(Var a, SharedIndex index, std::size_t rows) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (av.rows() != index->size()) {
    throw DimensionError("scatter_add_rows: " + std::to_string(index->size()) + " indices for " +
                         shape_string(av.shape()));
  }
  const std::size_t c = av.cols();
  Shape shape = av.shape();
  shape[0] = rows;
  Tensor out(shape);
  for (std::size_t e = 0; e < index->size(); ++e) {
    const std::uint32_t r = (*index)[e];
    if (r >= rows) throw RangeError("scatter_add_rows index " + std::to_string(r) + " out of " + std::to_string(rows));
    double* dst = out.data().data() + r * c;
    const double* src = av.data().data() + e * c;
    for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
  }
  return t.push(Op::kScatterAddRows, {a.id}, std::move(out), std::move(index), rows);
}

Var segment_softmax(Var a, SharedIndex segments, std::size_t num_segments) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (av.rows() != segments->size()) {
    throw DimensionError("segment_softmax: " + std::to_string(segments->size()) + " segment ids for " +
                         shape_string(av.shape()));
  }
  const std::size_t c = av.cols();
  const Index& seg = *segments;
  std::vector<double> mx(num_segments * c, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < seg.size(); ++e) {
    if (seg[e] >= num_segments) throw RangeError("segment id out of range");
    for (std::size_t h = 0; h < c; ++h) mx[seg[e] * c + h] = std::max(mx[seg[e] * c + h], av[e * c + h]);
  }
  Tensor out(av.shape());
  std::vector<double> total(num_segments * c, 0.0);
  for (std::size_t e = 0; e < seg.size(); ++e)
    for (std::size_t h = 0; h < c; ++h)
      total[seg[e] * c + h] += out[e * c + h] = std::exp(av[e * c + h] - mx[seg[e] * c + h]);
  for (std::size_t e = 0; e < seg.size(); ++e)
    for (std::size_t h = 0; h < c; ++h) out[e * c + h] /= total[seg[e] * c + h];
  return t.push(Op::kSegmentSoftmax, {a.id}, std::move(out), std::move(segments), num_segments);
}

Var head_dot(Var a, Var b, std::size_t heads, double factor) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "head_dot");
  require_matrix(av, "head_dot");
  const std::size_t rows = av.rows(), width = av.cols();
  if (heads == 0 || width % heads != 0) {
    throw DimensionError("head_dot: width " + std::to_string(width) + " not divisible by " + std::to_string(heads));
  }
  const std::size_t hw = width / heads;
  Tensor out({rows, heads});
  for (std::size_t e = 0; e < rows; ++e)
    for (std::size_t h = 0; h < heads; ++h) {
      double s = 0.0;
      for (std::size_t c = h * hw; c < (h + 1) * hw; ++c) s += av[e * width + c] * bv[e * width + c];
      out[e * heads + h] = factor * s;
    }
  return t.push(Op::kHeadDot, {a.id, b.id}, std::move(out), nullptr, heads, factor);
}

Var head_scale(Var w, Var v) {
  Tape& t = same_tape(w, v);
  const Tensor& wv = w.value();
  const Tensor& vv = v.value();
  require_matrix(vv, "head_scale");
  const std::size_t rows = vv.rows(), width = vv.cols(), heads = wv.cols();
  if (wv.rows() != rows || heads == 0 || width % heads != 0) {
    throw DimensionError("head_scale shape mismatch: " + shape_string(wv.shape()) + " vs " + shape_string(vv.shape()));
  }
  const std::size_t hw = width / heads;
  Tensor out(vv.shape());
  for (std::size_t e = 0; e < rows; ++e)
    for (std::size_t c = 0; c < width; ++c) out[e * width + c] = wv[e * heads + c / hw] * vv[e * width + c];
  return t.push(Op::kHeadScale, {w.id, v.id}, std::move(out));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  Tape& t = tape_of(parts[0]);
  const std::size_t c = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    same_tape(parts[0], p);
    if (p.value().cols() != c || p.value().rank() != parts[0].value().rank()) {
      throw DimensionError("concat_rows shape mismatch: " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    rows += p.value().rows();
    ids.push_back(p.id);
  }
  Shape shape = parts[0].shape();
  shape[0] = rows;
  Tensor out(shape);
  std::size_t offset = 0;
  for (Var p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + offset);
    offset += p.value().size();
  }
  return t.push(Op::kConcatRows, std::move(ids), std::move(out));
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (begin > end || end > av.rows()) {
    throw RangeError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                     shape_string(av.shape()));
  }
  const std::size_t c = av.cols();
  Shape shape = av.shape();
  shape[0] = end - begin;
  Tensor out(shape, std::vector<double>(av.data().begin() + begin * c, av.data().begin() + end * c));
  return t.push(Op::kSliceRows, {a.id}, std::move(out), nullptr, begin);
}

}  // namespace khgt::numerics
