#include "mob/latent.hpp"

#include <cmath>

#include "mob/errors.hpp"
#include "mob/gaussian.hpp"

namespace mob::latent {

namespace {

// Shift the raw-std half of the output head so initial stds start small.
void shift_raw_bias(nd::Mlp& net, int d, double offset) {
  int last = net.layer_count() - 1;
  double* b = net.layer(last) +
              static_cast<std::size_t>(net.widths[last + 1]) * net.widths[last];
  for (int k = 0; k < d; ++k) b[d + k] += offset;
}

}  // namespace

InferenceNet make_inference_net(const LatentConfig& cfg, nd::Rng& rng) {
  std::vector<int> widths;
  widths.push_back(cfg.d + 2);
  for (int h : cfg.latent_hidden) widths.push_back(h);
  widths.push_back(2 * cfg.d);
  InferenceNet q;
  q.d = cfg.d;
  q.net = nd::mlp_init(widths, rng, cfg.init_gain, cfg.init_bias_std);
  return q;
}

PriorNet make_prior_net(const LatentConfig& cfg, nd::Rng& rng) {
  std::vector<int> widths;
  widths.push_back(cfg.d);
  for (int h : cfg.latent_hidden) widths.push_back(h);
  widths.push_back(2 * cfg.d);
  PriorNet p;
  p.d = cfg.d;
  p.net = nd::mlp_init(widths, rng, cfg.init_gain, cfg.init_bias_std);
  shift_raw_bias(p.net, cfg.d, cfg.prior_raw_std_bias);
  return p;
}

MixingNet make_mixing_net(const LatentConfig& cfg, int basis_count,
                          nd::Rng& rng) {
  std::vector<int> widths;
  widths.push_back(cfg.d);
  for (int h : cfg.mixing_hidden) widths.push_back(h);
  widths.push_back(basis_count);
  MixingNet w;
  w.d = cfg.d;
  w.net = nd::mlp_init(widths, rng, cfg.init_gain, cfg.init_bias_std);
  return w;
}

namespace {

LatentState head_to_state(std::vector<double> out, int d,
                          std::span<const double> eps) {
  LatentState s;
  s.mu.assign(out.begin(), out.begin() + d);
  s.sigma.resize(d);
  s.z.resize(d);
  for (int k = 0; k < d; ++k) {
    s.sigma[k] = nd::softplus(out[d + k]) + kStdFloor;
    s.z[k] = s.mu[k] + s.sigma[k] * eps[k];
  }
  return s;
}

}  // namespace

LatentState infer_step(const InferenceNet& q, std::span<const double> z_prev,
                       double x, double y, std::span<const double> eps) {
  std::vector<double> in(z_prev.begin(), z_prev.end());
  in.push_back(x);
  in.push_back(y);
  return head_to_state(mlp_forward(q.net, in), q.d, eps);
}

LatentState prior_step(const PriorNet& p, std::span<const double> z_prev,
                       std::span<const double> eps) {
  return head_to_state(mlp_forward(p.net, z_prev), p.d, eps);
}

std::vector<double> mixing_weights(const MixingNet& w,
                                   std::span<const double> z) {
  std::vector<double> logits = mlp_forward(w.net, z);
  double lse = nd::log_sum_exp(logits);
  for (auto& v : logits) v = std::exp(v - lse);
  return logits;
}

double state_log_density(const LatentState& s, std::span<const double> at) {
  return nd::gaussian_log_pdf(at, s.mu, s.sigma);
}

void grow_mixing_head(MixingNet& w, double init_logit_scale, nd::Rng& rng,
                      nd::AdamState* adam) {
  nd::Mlp& net = w.net;
  int last = net.layer_count() - 1;
  int in = net.widths[last];
  int out = net.widths[last + 1];
  std::size_t w_end = net.layer_offset(last) +
                      static_cast<std::size_t>(out) * in;  // start of b block
  // New weight row goes at the end of W, new bias at the end of b.
  std::vector<double> row(in);
  for (auto& v : row) v = rng.normal(0.0, init_logit_scale);
  net.params.insert(net.params.begin() + w_end, row.begin(), row.end());
  net.params.push_back(0.0);
  if (adam) {
    adam->insert(w_end, static_cast<std::size_t>(in));
    adam->insert(adam->m.size(), 1);
  }
  net.widths[last + 1] = out + 1;
}

namespace {

// Reconstruction term at a given latent node: log of Eq. 1's mixture with
// Eq. 4 ensemble bases.
int recon_term(nd::Tape& t, const ElboModel& model, const ElboSinks& sinks,
               int z_node, double x, double y) {
  int logits = t.apply_mlp(model.mixing->net,
                           sinks.mixing ? sinks.mixing->data() : nullptr,
                           z_node);
  int lw = t.log_softmax(logits);
  int x_leaf = t.leaf(x);
  std::vector<int> basis_lls;
  for (std::size_t i = 0; i < model.bases.size(); ++i) {
    const auto& b = model.bases[i];
    int m_count = b.ensemble_size();
    std::vector<int> member_lls;
    for (int j = 0; j < m_count; ++j) {
      double* sink = nullptr;
      if (sinks.basis_members)
        sink = (*sinks.basis_members)[i * m_count + j].data();
      int out = t.apply_mlp(b.members[j], sink, x_leaf);
      int mu = t.slice(out, 0, 1);
      int sg = t.add_const(t.softplus_(t.slice(out, 1, 1)), b.sigma_floor);
      member_lls.push_back(
          t.gauss_logpdf(std::span<const double>(&y, 1), mu, sg));
    }
    basis_lls.push_back(t.add_const(t.logsumexp(t.pack(member_lls)),
                                    -std::log(double(m_count))));
  }
  return t.logsumexp(t.add(lw, t.pack(basis_lls)));
}

}  // namespace

int build_elbo(nd::Tape& t, const ElboModel& model, const ElboSinks& sinks,
               std::span<const double> z_init, bool recon_at_init,
               std::span<const double> xs, std::span<const double> ys,
               std::span<const std::vector<double>> eps) {
  if (xs.empty() || xs.size() != ys.size())
    throw ContractError("build_elbo: empty or mismatched stream");
  int d = model.inference->d;
  std::size_t start = recon_at_init ? 1 : 0;
  if (eps.size() != xs.size() - start)
    throw ContractError("build_elbo: eps count mismatch");

  std::vector<int> terms;
  int z_prev = t.leaf(z_init);
  if (recon_at_init)
    terms.push_back(recon_term(t, model, sinks, z_prev, xs[0], ys[0]));

  double* q_sink = sinks.inference ? sinks.inference->data() : nullptr;
  double* p_sink = sinks.prior ? sinks.prior->data() : nullptr;
  for (std::size_t s = start; s < xs.size(); ++s) {
    const std::vector<double>& e = eps[s - start];
    double xy[2] = {xs[s], ys[s]};
    int input = t.concat(z_prev, t.leaf(std::span<const double>(xy, 2)));
    int q_out = t.apply_mlp(model.inference->net, q_sink, input);
    int q_mu = t.slice(q_out, 0, d);
    int q_sigma = t.add_const(t.softplus_(t.slice(q_out, d, d)), kStdFloor);
    int z = t.add(q_mu, t.mul_aux(q_sigma, e));

    terms.push_back(recon_term(t, model, sinks, z, xs[s], ys[s]));

    int p_out = t.apply_mlp(model.prior->net, p_sink, z_prev);
    int p_mu = t.slice(p_out, 0, d);
    int p_sigma = t.add_const(t.softplus_(t.slice(p_out, d, d)), kStdFloor);
    terms.push_back(t.gauss_logpdf(z, p_mu, p_sigma));
    terms.push_back(t.scale(t.gauss_logpdf(z, q_mu, q_sigma), -1.0));

    z_prev = z;
  }
  return t.sum(t.pack(terms));
}

double elbo_value(const ElboModel& model, std::span<const double> xs,
                  std::span<const double> ys,
                  std::span<const std::vector<double>> eps) {
  nd::Tape t;
  std::vector<double> z0(model.inference->d, 0.0);
  ElboSinks none;
  return t.val(build_elbo(t, model, none, z0, true, xs, ys, eps))[0];
}

double elbo_estimate(const ElboModel& model, std::span<const double> xs,
                     std::span<const double> ys, nd::Rng& rng) {
  if (xs.empty()) throw ContractError("elbo_estimate: empty trajectory");
  std::vector<std::vector<double>> eps(xs.size() - 1);
  for (auto& e : eps) {
    e.resize(model.inference->d);
    for (auto& v : e) v = rng.normal();
  }
  return elbo_value(model, xs, ys, eps);
}

}  // namespace mob::latent
