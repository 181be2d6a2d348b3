#ifndef MOB_GRAPH_HPP
#define MOB_GRAPH_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "mob/mlp.hpp"

namespace mob::nd {

// Reverse-mode tape over vector-valued nodes. Parameters stay outside the
// tape: affine nodes hold pointers into an Mlp's flat [W | b] block and an
// optional grad sink of the same layout (null sink = frozen parameters).
// Node slots are pooled so repeated build/backward cycles stop allocating
// after the first pass.
class Tape {
 public:
  enum class Op : std::uint8_t {
    kLeaf,
    kAffine,      // a: x;             w/gw: layer block; i0=in, i1=out
    kTanh,        // a
    kSoftplus,    // a
    kAddConst,    // a; c0
    kScale,       // a; c0
    kAdd,         // a, b (same size)
    kSub,         // a, b
    kMul,         // a, b
    kMulAux,      // a; aux: constant multiplier vector
    kConcat,      // a, b
    kSlice,       // a; i0=offset, i1=len
    kGaussConstY, // a: mu, b: sigma; aux: observed y  -> scalar
    kGauss,       // a: y, b: mu, c: sigma             -> scalar
    kLogSoftmax,  // a
    kPack,        // parent list -> vector of their scalars
    kLogSumExp,   // a: vector -> scalar
    kSum,         // a: vector -> scalar
  };

  int leaf(std::span<const double> v);
  int leaf(double v);
  int affine(int x, const double* wb, double* gwb, int in, int out);
  int tanh_(int x);
  int softplus_(int x);
  int add_const(int x, double c);
  int scale(int x, double c);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int mul_aux(int a, std::span<const double> k);
  int concat(int a, int b);
  int slice(int a, int offset, int len);
  int gauss_logpdf(std::span<const double> y, int mu, int sigma);
  int gauss_logpdf(int y, int mu, int sigma);
  int log_softmax(int x);
  int pack(std::span<const int> scalars);
  int logsumexp(int xvec);
  int sum(int xvec);

  // Full forward pass through `net`, reading parameters from net.params and
  // accumulating parameter gradients into `grad_sink` (nullable, flat layout).
  int apply_mlp(const Mlp& net, double* grad_sink, int x);

  const std::vector<double>& val(int id) const { return nodes_[id].val; }
  const std::vector<double>& grad(int id) const { return nodes_[id].grad; }

  // Seeds d(root) = seed and propagates to leaves and external sinks.
  void backward(int root, double seed = 1.0);

  // Keeps node capacity for reuse.
  void reset();

  int size() const { return n_; }

 private:
  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    int i0 = 0, i1 = 0;
    double c0 = 0.0;
    const double* w = nullptr;
    double* gw = nullptr;
    int parents_off = 0, parents_n = 0;
    std::vector<double> val, grad, aux;
  };

  Node& fresh(Op op, std::size_t val_size);
  std::vector<Node> nodes_;
  std::vector<int> parent_pool_;
  int n_ = 0;
  int pool_n_ = 0;
};

}  // namespace mob::nd

#endif
