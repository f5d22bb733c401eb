#include "oqa/tape.hpp"

#include <cmath>
#include <utility>

namespace oqa {

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_id(NodeId id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
    throw ContractError("tape: node id out of range");
}

NodeId Tape::constant(Mat v) {
  Node n;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::param(Mat v) {
  Node n;
  n.value = std::move(v);
  n.requires_grad = true;
  return push(std::move(n));
}

NodeId Tape::unary(Op op, NodeId a, Mat value) {
  check_id(a);
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.a = a;
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

NodeId Tape::binary(Op op, NodeId a, NodeId b, Mat value) {
  check_id(a);
  check_id(b);
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.a = a;
  n.b = b;
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  return binary(Op::MatMul, a, b, oqa::matmul(at(a).value, at(b).value));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Mat& va = at(a).value;
  const Mat& vb = at(b).value;
  if (!va.same_shape(vb))
    throw DimensionError("add: shape mismatch " + shape_str(va) + " vs " +
                         shape_str(vb));
  Mat out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
  return binary(Op::Add, a, b, std::move(out));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Mat& va = at(a).value;
  const Mat& vb = at(b).value;
  if (!va.same_shape(vb))
    throw DimensionError("sub: shape mismatch " + shape_str(va) + " vs " +
                         shape_str(vb));
  Mat out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
  return binary(Op::Sub, a, b, std::move(out));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Mat& va = at(a).value;
  const Mat& vb = at(b).value;
  if (!va.same_shape(vb))
    throw DimensionError("mul: shape mismatch " + shape_str(va) + " vs " +
                         shape_str(vb));
  Mat out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
  return binary(Op::Mul, a, b, std::move(out));
}

NodeId Tape::div(NodeId a, NodeId b) {
  const Mat& va = at(a).value;
  const Mat& vb = at(b).value;
  if (!va.same_shape(vb))
    throw DimensionError("div: shape mismatch " + shape_str(va) + " vs " +
                         shape_str(vb));
  Mat out = va;
  for (size_t i = 0; i < out.data.size(); ++i) {
    if (vb.data[i] == 0.0) throw ContractError("div: zero divisor");
    out.data[i] /= vb.data[i];
  }
  return binary(Op::Div, a, b, std::move(out));
}

NodeId Tape::add_col(NodeId m, NodeId bias) {
  const Mat& vm = at(m).value;
  const Mat& vb = at(bias).value;
  if (vb.rows != vm.rows || vb.cols != 1)
    throw DimensionError("add_col: bias " + shape_str(vb) + " for matrix " +
                         shape_str(vm));
  Mat out = vm;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) += vb.at(i, 0);
  return binary(Op::AddCol, m, bias, std::move(out));
}

NodeId Tape::scale(NodeId a, double c) {
  Mat out = at(a).value;
  for (double& x : out.data) x *= c;
  NodeId id = unary(Op::Scale, a, std::move(out));
  nodes_[static_cast<size_t>(id)].attr = c;
  return id;
}

NodeId Tape::add_scalar(NodeId a, double c) {
  Mat out = at(a).value;
  for (double& x : out.data) x += c;
  NodeId id = unary(Op::AddScalar, a, std::move(out));
  nodes_[static_cast<size_t>(id)].attr = c;
  return id;
}

NodeId Tape::relu(NodeId a) {
  Mat out = at(a).value;
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  return unary(Op::Relu, a, std::move(out));
}

NodeId Tape::sigmoid(NodeId a) {
  Mat out = at(a).value;
  for (double& x : out.data) {
    if (x >= 0.0) {
      x = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      x = e / (1.0 + e);
    }
  }
  return unary(Op::Sigmoid, a, std::move(out));
}

NodeId Tape::abs(NodeId a) {
  Mat out = at(a).value;
  for (double& x : out.data) x = std::fabs(x);
  return unary(Op::Abs, a, std::move(out));
}

NodeId Tape::xlogx(NodeId a) {
  Mat out = at(a).value;
  for (double& x : out.data) x = x > 0.0 ? x * std::log(x) : 0.0;
  return unary(Op::XLogX, a, std::move(out));
}

NodeId Tape::min2(NodeId a, NodeId b) {
  const Mat& va = at(a).value;
  const Mat& vb = at(b).value;
  if (!va.same_shape(vb))
    throw DimensionError("min2: shape mismatch " + shape_str(va) + " vs " +
                         shape_str(vb));
  Mat out = va;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = va.data[i] <= vb.data[i] ? va.data[i] : vb.data[i];
  return binary(Op::Min2, a, b, std::move(out));
}

NodeId Tape::max2(NodeId a, NodeId b) {
  const Mat& va = at(a).value;
  const Mat& vb = at(b).value;
  if (!va.same_shape(vb))
    throw DimensionError("max2: shape mismatch " + shape_str(va) + " vs " +
                         shape_str(vb));
  Mat out = va;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = va.data[i] >= vb.data[i] ? va.data[i] : vb.data[i];
  return binary(Op::Max2, a, b, std::move(out));
}

NodeId Tape::transp(NodeId a) {
  return unary(Op::Transpose, a, oqa::transpose(at(a).value));
}

NodeId Tape::softmax_rows(NodeId a) {
  return unary(Op::SoftmaxRows, a, oqa::softmax_rows(at(a).value));
}

NodeId Tape::log_softmax_rows(NodeId a) {
  return unary(Op::LogSoftmaxRows, a, oqa::log_softmax_rows(at(a).value));
}

NodeId Tape::slice_rows(NodeId a, int row0, int count) {
  const Mat& v = at(a).value;
  if (row0 < 0 || count < 1 || row0 + count > v.rows)
    throw DimensionError("slice_rows: [" + std::to_string(row0) + ", " +
                         std::to_string(row0 + count) + ") of " + shape_str(v));
  Mat out(count, v.cols);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < v.cols; ++j) out.at(i, j) = v.at(row0 + i, j);
  NodeId id = unary(Op::SliceRows, a, std::move(out));
  nodes_[static_cast<size_t>(id)].i0 = row0;
  return id;
}

NodeId Tape::col(NodeId a, int j) {
  const Mat& v = at(a).value;
  if (j < 0 || j >= v.cols)
    throw DimensionError("col: index " + std::to_string(j) + " of " + shape_str(v));
  Mat out(v.rows, 1);
  for (int i = 0; i < v.rows; ++i) out.at(i, 0) = v.at(i, j);
  NodeId id = unary(Op::Col, a, std::move(out));
  nodes_[static_cast<size_t>(id)].i0 = j;
  return id;
}

NodeId Tape::concat_rows(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  int rows = 0;
  const int cols = at(parts[0]).value.cols;
  bool rg = false;
  for (NodeId p : parts) {
    check_id(p);
    const Mat& v = at(p).value;
    if (v.cols != cols)
      throw DimensionError("concat_rows: column mismatch " + shape_str(v));
    rows += v.rows;
    rg = rg || at(p).requires_grad;
  }
  Mat out(rows, cols);
  int r = 0;
  for (NodeId p : parts) {
    const Mat& v = at(p).value;
    for (int i = 0; i < v.rows; ++i)
      for (int j = 0; j < cols; ++j) out.at(r + i, j) = v.at(i, j);
    r += v.rows;
  }
  Node n;
  n.value = std::move(out);
  n.op = Op::ConcatRows;
  n.list = parts;
  n.requires_grad = rg;
  return push(std::move(n));
}

NodeId Tape::col_mean(NodeId a) {
  const Mat& v = at(a).value;
  if (v.cols < 1) throw DimensionError("col_mean: empty matrix");
  Mat out(v.rows, 1);
  for (int i = 0; i < v.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < v.cols; ++j) s += v.at(i, j);
    out.at(i, 0) = s / v.cols;
  }
  return unary(Op::ColMean, a, std::move(out));
}

NodeId Tape::sum(NodeId a) {
  double s = 0.0;
  for (double x : at(a).value.data) s += x;
  return unary(Op::Sum, a, Mat::scalar(s));
}

NodeId Tape::mean(NodeId a) {
  const Mat& v = at(a).value;
  if (v.size() == 0) throw DimensionError("mean: empty matrix");
  double s = 0.0;
  for (double x : v.data) s += x;
  return unary(Op::Mean, a, Mat::scalar(s / v.size()));
}

NodeId Tape::nll_rows(NodeId logp, std::vector<int> labels) {
  const Mat& v = at(logp).value;
  if (static_cast<int>(labels.size()) != v.rows)
    throw DimensionError("nll_rows: " + std::to_string(labels.size()) +
                         " labels for " + shape_str(v));
  double s = 0.0;
  for (int i = 0; i < v.rows; ++i) {
    const int l = labels[static_cast<size_t>(i)];
    if (l < 0 || l >= v.cols) throw ContractError("nll_rows: label out of range");
    s -= v.at(i, l);
  }
  NodeId id = unary(Op::NllRows, logp, Mat::scalar(s / v.rows));
  nodes_[static_cast<size_t>(id)].labels = std::move(labels);
  return id;
}

const Mat& Tape::grad(NodeId id) const {
  check_id(id);
  const Node& n = at(id);
  if (n.grad.size() == 0)
    throw ContractError("grad: backward() has not populated this node");
  return n.grad;
}

void Tape::backprop_into(NodeId parent, const Mat& contribution) {
  Node& p = nodes_[static_cast<size_t>(parent)];
  if (!p.requires_grad) return;
  for (size_t i = 0; i < p.grad.data.size(); ++i)
    p.grad.data[i] += contribution.data[i];
}

void Tape::backward(NodeId root) {
  check_id(root);
  if (at(root).value.rows != 1 || at(root).value.cols != 1)
    throw ContractError("backward: root must be 1x1, got " +
                        shape_str(at(root).value));
  for (Node& n : nodes_) {
    if (n.requires_grad)
      n.grad = Mat(n.value.rows, n.value.cols);
    else
      n.grad = Mat();
  }
  Node& r = nodes_[static_cast<size_t>(root)];
  if (!r.requires_grad) return;  // no parameters feed the root
  r.grad.at(0, 0) = 1.0;
  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.requires_grad && n.op != Op::Leaf) step_back(n);
  }
}

void Tape::step_back(Node& n) {
  const Mat& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul: {
      // C = A·B: dA += dC·Bᵀ, dB += Aᵀ·dC
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      Node& pb = nodes_[static_cast<size_t>(n.b)];
      if (pa.requires_grad) matmul_acc(pa.grad, g, false, pb.value, true);
      if (pb.requires_grad) matmul_acc(pb.grad, pa.value, true, g, false);
      break;
    }
    case Op::Add: {
      backprop_into(n.a, g);
      backprop_into(n.b, g);
      break;
    }
    case Op::Sub: {
      backprop_into(n.a, g);
      Node& pb = nodes_[static_cast<size_t>(n.b)];
      if (pb.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i) pb.grad.data[i] -= g.data[i];
      break;
    }
    case Op::Mul: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      Node& pb = nodes_[static_cast<size_t>(n.b)];
      if (pa.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          pa.grad.data[i] += g.data[i] * pb.value.data[i];
      if (pb.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          pb.grad.data[i] += g.data[i] * pa.value.data[i];
      break;
    }
    case Op::Div: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      Node& pb = nodes_[static_cast<size_t>(n.b)];
      if (pa.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          pa.grad.data[i] += g.data[i] / pb.value.data[i];
      if (pb.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          pb.grad.data[i] -= g.data[i] * pa.value.data[i] /
                             (pb.value.data[i] * pb.value.data[i]);
      break;
    }
    case Op::AddCol: {
      backprop_into(n.a, g);
      Node& pb = nodes_[static_cast<size_t>(n.b)];
      if (pb.requires_grad)
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) pb.grad.at(i, 0) += g.at(i, j);
      break;
    }
    case Op::Scale: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          pa.grad.data[i] += n.attr * g.data[i];
      break;
    }
    case Op::AddScalar: {
      backprop_into(n.a, g);
      break;
    }
    case Op::Relu: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          if (pa.value.data[i] > 0.0) pa.grad.data[i] += g.data[i];
      break;
    }
    case Op::Sigmoid: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i) {
          const double s = n.value.data[i];
          pa.grad.data[i] += g.data[i] * s * (1.0 - s);
        }
      break;
    }
    case Op::Abs: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i) {
          const double x = pa.value.data[i];
          if (x > 0.0)
            pa.grad.data[i] += g.data[i];
          else if (x < 0.0)
            pa.grad.data[i] -= g.data[i];
        }
      break;
    }
    case Op::XLogX: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad)
        for (size_t i = 0; i < g.data.size(); ++i) {
          const double x = pa.value.data[i];
          if (x > 0.0) pa.grad.data[i] += g.data[i] * (std::log(x) + 1.0);
        }
      break;
    }
    case Op::Min2: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      Node& pb = nodes_[static_cast<size_t>(n.b)];
      for (size_t i = 0; i < g.data.size(); ++i) {
        const bool take_a = pa.value.data[i] <= pb.value.data[i];
        if (take_a && pa.requires_grad) pa.grad.data[i] += g.data[i];
        if (!take_a && pb.requires_grad) pb.grad.data[i] += g.data[i];
      }
      break;
    }
    case Op::Max2: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      Node& pb = nodes_[static_cast<size_t>(n.b)];
      for (size_t i = 0; i < g.data.size(); ++i) {
        const bool take_a = pa.value.data[i] >= pb.value.data[i];
        if (take_a && pa.requires_grad) pa.grad.data[i] += g.data[i];
        if (!take_a && pb.requires_grad) pb.grad.data[i] += g.data[i];
      }
      break;
    }
    case Op::Transpose: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad)
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) pa.grad.at(j, i) += g.at(i, j);
      break;
    }
    case Op::SoftmaxRows: {
      // dx_j = s_j·(dy_j − Σ_k dy_k·s_k) per row
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (!pa.requires_grad) break;
      for (int i = 0; i < g.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < g.cols; ++j) dot += g.at(i, j) * n.value.at(i, j);
        for (int j = 0; j < g.cols; ++j)
          pa.grad.at(i, j) += n.value.at(i, j) * (g.at(i, j) - dot);
      }
      break;
    }
    case Op::LogSoftmaxRows: {
      // dx_j = dy_j − softmax_j·Σ_k dy_k per row
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (!pa.requires_grad) break;
      for (int i = 0; i < g.rows; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < g.cols; ++j) rowsum += g.at(i, j);
        for (int j = 0; j < g.cols; ++j)
          pa.grad.at(i, j) += g.at(i, j) - std::exp(n.value.at(i, j)) * rowsum;
      }
      break;
    }
    case Op::SliceRows: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad)
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) pa.grad.at(n.i0 + i, j) += g.at(i, j);
      break;
    }
    case Op::Col: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad)
        for (int i = 0; i < g.rows; ++i) pa.grad.at(i, n.i0) += g.at(i, 0);
      break;
    }
    case Op::ConcatRows: {
      int r = 0;
      for (NodeId p : n.list) {
        Node& pp = nodes_[static_cast<size_t>(p)];
        if (pp.requires_grad)
          for (int i = 0; i < pp.value.rows; ++i)
            for (int j = 0; j < g.cols; ++j) pp.grad.at(i, j) += g.at(r + i, j);
        r += pp.value.rows;
      }
      break;
    }
    case Op::ColMean: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad) {
        const double inv = 1.0 / pa.value.cols;
        for (int i = 0; i < pa.value.rows; ++i)
          for (int j = 0; j < pa.value.cols; ++j)
            pa.grad.at(i, j) += inv * g.at(i, 0);
      }
      break;
    }
    case Op::Sum: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad) {
        const double gv = g.at(0, 0);
        for (double& x : pa.grad.data) x += gv;
      }
      break;
    }
    case Op::Mean: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad) {
        const double gv = g.at(0, 0) / pa.value.size();
        for (double& x : pa.grad.data) x += gv;
      }
      break;
    }
    case Op::NllRows: {
      Node& pa = nodes_[static_cast<size_t>(n.a)];
      if (pa.requires_grad) {
        const double gv = g.at(0, 0) / pa.value.rows;
        for (int i = 0; i < pa.value.rows; ++i)
          pa.grad.at(i, n.labels[static_cast<size_t>(i)]) -= gv;
      }
      break;
    }
  }
}

double grad_check(
    const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build,
    const std::vector<Mat>& params, double h) {
  if (h <= 0.0) throw ParameterError("grad_check: h must be positive");

  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const Mat& p : params) ids.push_back(tape.param(p));
  const NodeId loss = build(tape, ids);
  tape.backward(loss);
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (NodeId id : ids) analytic.push_back(tape.grad(id));

  auto eval = [&build](const std::vector<Mat>& p) {
    Tape t;
    std::vector<NodeId> pid;
    pid.reserve(p.size());
    for (const Mat& m : p) pid.push_back(t.param(m));
    return t.value(build(t, pid)).at(0, 0);
  };

  std::vector<Mat> work = params;
  double max_rel = 0.0;
  for (size_t i = 0; i < work.size(); ++i) {
    for (size_t c = 0; c < work[i].data.size(); ++c) {
      const double orig = work[i].data[c];
      work[i].data[c] = orig + h;
      const double fp = eval(work);
      work[i].data[c] = orig - h;
      const double fm = eval(work);
      work[i].data[c] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double an = analytic[i].data[c];
      const double rel = std::fabs(an - numeric) /
                         std::max({1.0, std::fabs(an), std::fabs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace oqa
