#include "mob/graph.hpp"

#include <cmath>

#include "mob/errors.hpp"
#include "mob/gaussian.hpp"

namespace mob::nd {

Tape::Node& Tape::fresh(Op op, std::size_t val_size) {
  if (n_ == static_cast<int>(nodes_.size())) nodes_.emplace_back();
  Node& nd = nodes_[n_++];
  nd.op = op;
  nd.a = nd.b = nd.c = -1;
  nd.i0 = nd.i1 = 0;
  nd.c0 = 0.0;
  nd.w = nullptr;
  nd.gw = nullptr;
  nd.parents_off = nd.parents_n = 0;
  nd.val.assign(val_size, 0.0);
  nd.grad.assign(val_size, 0.0);
  nd.aux.clear();
  return nd;
}

void Tape::reset() {
  n_ = 0;
  pool_n_ = 0;
  parent_pool_.clear();
}

int Tape::leaf(std::span<const double> v) {
  Node& nd = fresh(Op::kLeaf, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) nd.val[i] = v[i];
  return n_ - 1;
}

int Tape::leaf(double v) { return leaf(std::span<const double>(&v, 1)); }

int Tape::affine(int x, const double* wb, double* gwb, int in, int out) {
  if (static_cast<int>(nodes_[x].val.size()) != in)
    throw ContractError("tape affine: input width mismatch");
  Node& nd = fresh(Op::kAffine, static_cast<std::size_t>(out));
  nd.a = x;
  nd.w = wb;
  nd.gw = gwb;
  nd.i0 = in;
  nd.i1 = out;
  const double* b = wb + static_cast<std::size_t>(out) * in;
  const double* xv = nodes_[x].val.data();
  for (int o = 0; o < out; ++o) {
    const double* row = wb + static_cast<std::size_t>(o) * in;
    double s = b[o];
    for (int k = 0; k < in; ++k) s += row[k] * xv[k];
    nd.val[o] = s;
  }
  return n_ - 1;
}

int Tape::tanh_(int x) {
  Node& nd = fresh(Op::kTanh, nodes_[x].val.size());
  nd.a = x;
  for (std::size_t i = 0; i < nd.val.size(); ++i)
    nd.val[i] = std::tanh(nodes_[x].val[i]);
  return n_ - 1;
}

int Tape::softplus_(int x) {
  Node& nd = fresh(Op::kSoftplus, nodes_[x].val.size());
  nd.a = x;
  for (std::size_t i = 0; i < nd.val.size(); ++i)
    nd.val[i] = softplus(nodes_[x].val[i]);
  return n_ - 1;
}

int Tape::add_const(int x, double c) {
  Node& nd = fresh(Op::kAddConst, nodes_[x].val.size());
  nd.a = x;
  nd.c0 = c;
  for (std::size_t i = 0; i < nd.val.size(); ++i)
    nd.val[i] = nodes_[x].val[i] + c;
  return n_ - 1;
}

int Tape::scale(int x, double c) {
  Node& nd = fresh(Op::kScale, nodes_[x].val.size());
  nd.a = x;
  nd.c0 = c;
  for (std::size_t i = 0; i < nd.val.size(); ++i)
    nd.val[i] = nodes_[x].val[i] * c;
  return n_ - 1;
}

int Tape::add(int a, int b) {
  Node& nd = fresh(Op::kAdd, nodes_[a].val.size());
  nd.a = a;
  nd.b = b;
  for (std::size_t i = 0; i < nd.val.size(); ++i)
    nd.val[i] = nodes_[a].val[i] + nodes_[b].val[i];
  return n_ - 1;
}

int Tape::sub(int a, int b) {
  Node& nd = fresh(Op::kSub, nodes_[a].val.size());
  nd.a = a;
  nd.b = b;
  for (std::size_t i = 0; i < nd.val.size(); ++i)
    nd.val[i] = nodes_[a].val[i] - nodes_[b].val[i];
  return n_ - 1;
}

int Tape::mul(int a, int b) {
  Node& nd = fresh(Op::kMul, nodes_[a].val.size());
  nd.a = a;
  nd.b = b;
  for (std::size_t i = 0; i < nd.val.size(); ++i)
    nd.val[i] = nodes_[a].val[i] * nodes_[b].val[i];
  return n_ - 1;
}

int Tape::mul_aux(int a, std::span<const double> k) {
  Node& nd = fresh(Op::kMulAux, nodes_[a].val.size());
  nd.a = a;
  nd.aux.assign(k.begin(), k.end());
  for (std::size_t i = 0; i < nd.val.size(); ++i)
    nd.val[i] = nodes_[a].val[i] * nd.aux[i];
  return n_ - 1;
}

int Tape::concat(int a, int b) {
  std::size_t na = nodes_[a].val.size(), nb = nodes_[b].val.size();
  Node& nd = fresh(Op::kConcat, na + nb);
  nd.a = a;
  nd.b = b;
  nd.i0 = static_cast<int>(na);
  for (std::size_t i = 0; i < na; ++i) nd.val[i] = nodes_[a].val[i];
  for (std::size_t i = 0; i < nb; ++i) nd.val[na + i] = nodes_[b].val[i];
  return n_ - 1;
}

int Tape::slice(int a, int offset, int len) {
  Node& nd = fresh(Op::kSlice, static_cast<std::size_t>(len));
  nd.a = a;
  nd.i0 = offset;
  nd.i1 = len;
  for (int i = 0; i < len; ++i) nd.val[i] = nodes_[a].val[offset + i];
  return n_ - 1;
}

int Tape::gauss_logpdf(std::span<const double> y, int mu, int sigma) {
  Node& nd = fresh(Op::kGaussConstY, 1);
  nd.a = mu;
  nd.b = sigma;
  nd.aux.assign(y.begin(), y.end());
  double lp = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    double s = nodes_[sigma].val[k];
    double r = (y[k] - nodes_[mu].val[k]) / s;
    lp += -kHalfLog2Pi - std::log(s) - 0.5 * r * r;
  }
  nd.val[0] = lp;
  return n_ - 1;
}

int Tape::gauss_logpdf(int y, int mu, int sigma) {
  Node& nd = fresh(Op::kGauss, 1);
  nd.a = y;
  nd.b = mu;
  nd.c = sigma;
  double lp = 0.0;
  for (std::size_t k = 0; k < nodes_[y].val.size(); ++k) {
    double s = nodes_[sigma].val[k];
    double r = (nodes_[y].val[k] - nodes_[mu].val[k]) / s;
    lp += -kHalfLog2Pi - std::log(s) - 0.5 * r * r;
  }
  nd.val[0] = lp;
  return n_ - 1;
}

int Tape::log_softmax(int x) {
  std::size_t n = nodes_[x].val.size();
  Node& nd = fresh(Op::kLogSoftmax, n);
  nd.a = x;
  double lse = log_sum_exp(nodes_[x].val);
  nd.aux.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    nd.val[i] = nodes_[x].val[i] - lse;
    nd.aux[i] = std::exp(nd.val[i]);  // softmax, for backward
  }
  return n_ - 1;
}

int Tape::pack(std::span<const int> scalars) {
  Node& nd = fresh(Op::kPack, scalars.size());
  nd.parents_off = static_cast<int>(parent_pool_.size());
  nd.parents_n = static_cast<int>(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    parent_pool_.push_back(scalars[i]);
    nd.val[i] = nodes_[scalars[i]].val[0];
  }
  return n_ - 1;
}

int Tape::logsumexp(int xvec) {
  Node& nd = fresh(Op::kLogSumExp, 1);
  nd.a = xvec;
  double lse = log_sum_exp(nodes_[xvec].val);
  std::size_t n = nodes_[xvec].val.size();
  nd.aux.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    nd.aux[i] = std::exp(nodes_[xvec].val[i] - lse);
  nd.val[0] = lse;
  return n_ - 1;
}

int Tape::sum(int xvec) {
  Node& nd = fresh(Op::kSum, 1);
  nd.a = xvec;
  double s = 0.0;
  for (double v : nodes_[xvec].val) s += v;
  nd.val[0] = s;
  return n_ - 1;
}

int Tape::apply_mlp(const Mlp& net, double* grad_sink, int x) {
  int cur = x;
  std::size_t off = 0;
  for (int l = 0; l < net.layer_count(); ++l) {
    int in = net.widths[l], out = net.widths[l + 1];
    cur = affine(cur, net.params.data() + off,
                 grad_sink ? grad_sink + off : nullptr, in, out);
    if (l + 1 < net.layer_count()) cur = tanh_(cur);
    off += net.layer_size(l);
  }
  return cur;
}

void Tape::backward(int root, double seed) {
  nodes_[root].grad[0] += seed;
  for (int id = root; id >= 0; --id) {
    Node& nd = nodes_[id];
    switch (nd.op) {
      case Op::kLeaf:
        break;
      case Op::kAffine: {
        int in = nd.i0, out = nd.i1;
        Node& xn = nodes_[nd.a];
        const double* xv = xn.val.data();
        for (int o = 0; o < out; ++o) {
          double u = nd.grad[o];
          if (u == 0.0) continue;
          const double* row = nd.w + static_cast<std::size_t>(o) * in;
          double* gx = xn.grad.data();
          for (int k = 0; k < in; ++k) gx[k] += u * row[k];
          if (nd.gw) {
            double* grow = nd.gw + static_cast<std::size_t>(o) * in;
            for (int k = 0; k < in; ++k) grow[k] += u * xv[k];
            nd.gw[static_cast<std::size_t>(out) * in + o] += u;
          }
        }
        break;
      }
      case Op::kTanh: {
        Node& xn = nodes_[nd.a];
        for (std::size_t i = 0; i < nd.val.size(); ++i)
          xn.grad[i] += nd.grad[i] * (1.0 - nd.val[i] * nd.val[i]);
        break;
      }
      case Op::kSoftplus: {
        Node& xn = nodes_[nd.a];
        for (std::size_t i = 0; i < nd.val.size(); ++i)
          xn.grad[i] += nd.grad[i] * logistic(xn.val[i]);
        break;
      }
      case Op::kAddConst: {
        Node& xn = nodes_[nd.a];
        for (std::size_t i = 0; i < nd.val.size(); ++i)
          xn.grad[i] += nd.grad[i];
        break;
      }
      case Op::kScale: {
        Node& xn = nodes_[nd.a];
        for (std::size_t i = 0; i < nd.val.size(); ++i)
          xn.grad[i] += nd.grad[i] * nd.c0;
        break;
      }
      case Op::kAdd: {
        Node& an = nodes_[nd.a];
        Node& bn = nodes_[nd.b];
        for (std::size_t i = 0; i < nd.val.size(); ++i) {
          an.grad[i] += nd.grad[i];
          bn.grad[i] += nd.grad[i];
        }
        break;
      }
      case Op::kSub: {
        Node& an = nodes_[nd.a];
        Node& bn = nodes_[nd.b];
        for (std::size_t i = 0; i < nd.val.size(); ++i) {
          an.grad[i] += nd.grad[i];
          bn.grad[i] -= nd.grad[i];
        }
        break;
      }
      case Op::kMul: {
        Node& an = nodes_[nd.a];
        Node& bn = nodes_[nd.b];
        for (std::size_t i = 0; i < nd.val.size(); ++i) {
          an.grad[i] += nd.grad[i] * bn.val[i];
          bn.grad[i] += nd.grad[i] * an.val[i];
        }
        break;
      }
      case Op::kMulAux: {
        Node& xn = nodes_[nd.a];
        for (std::size_t i = 0; i < nd.val.size(); ++i)
          xn.grad[i] += nd.grad[i] * nd.aux[i];
        break;
      }
      case Op::kConcat: {
        Node& an = nodes_[nd.a];
        Node& bn = nodes_[nd.b];
        std::size_t na = an.val.size();
        for (std::size_t i = 0; i < na; ++i) an.grad[i] += nd.grad[i];
        for (std::size_t i = 0; i < bn.val.size(); ++i)
          bn.grad[i] += nd.grad[na + i];
        break;
      }
      case Op::kSlice: {
        Node& xn = nodes_[nd.a];
        for (int i = 0; i < nd.i1; ++i) xn.grad[nd.i0 + i] += nd.grad[i];
        break;
      }
      case Op::kGaussConstY: {
        Node& mu = nodes_[nd.a];
        Node& sg = nodes_[nd.b];
        double u = nd.grad[0];
        for (std::size_t k = 0; k < nd.aux.size(); ++k) {
          double s = sg.val[k];
          double r = nd.aux[k] - mu.val[k];
          mu.grad[k] += u * r / (s * s);
          sg.grad[k] += u * (r * r / (s * s * s) - 1.0 / s);
        }
        break;
      }
      case Op::kGauss: {
        Node& yv = nodes_[nd.a];
        Node& mu = nodes_[nd.b];
        Node& sg = nodes_[nd.c];
        double u = nd.grad[0];
        for (std::size_t k = 0; k < yv.val.size(); ++k) {
          double s = sg.val[k];
          double r = yv.val[k] - mu.val[k];
          yv.grad[k] -= u * r / (s * s);
          mu.grad[k] += u * r / (s * s);
          sg.grad[k] += u * (r * r / (s * s * s) - 1.0 / s);
        }
        break;
      }
      case Op::kLogSoftmax: {
        Node& xn = nodes_[nd.a];
        double gsum = 0.0;
        for (double g : nd.grad) gsum += g;
        for (std::size_t i = 0; i < nd.val.size(); ++i)
          xn.grad[i] += nd.grad[i] - gsum * nd.aux[i];
        break;
      }
      case Op::kPack: {
        for (int i = 0; i < nd.parents_n; ++i)
          nodes_[parent_pool_[nd.parents_off + i]].grad[0] += nd.grad[i];
        break;
      }
      case Op::kLogSumExp: {
        Node& xn = nodes_[nd.a];
        for (std::size_t i = 0; i < xn.val.size(); ++i)
          xn.grad[i] += nd.grad[0] * nd.aux[i];
        break;
      }
      case Op::kSum: {
        Node& xn = nodes_[nd.a];
        for (std::size_t i = 0; i < xn.val.size(); ++i)
          xn.grad[i] += nd.grad[0];
        break;
      }
    }
  }
}

}  // namespace mob::nd
