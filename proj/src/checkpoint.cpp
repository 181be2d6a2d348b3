#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "mob/config_json.hpp"
#include "mob/engine.hpp"
#include "mob/errors.hpp"

using nlohmann::json;

namespace mob::engine {

namespace {

constexpr char kMagic[4] = {'M', 'O', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void put_f64(std::string& out, const std::vector<double>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * 8);
}

// Named tensor entries written in manifest order.
struct BlobWriter {
  json entries = json::array();
  std::string data;

  void add(const std::string& name, const std::vector<double>& v) {
    entries.push_back(json{{"len", v.size()}, {"name", name}});
    put_f64(data, v);
  }
};

struct BlobReader {
  const json& entries;
  const char* data;
  std::size_t size;
  std::size_t pos = 0;
  std::size_t index = 0;

  std::vector<double> take(const std::string& name) {
    if (index >= entries.size())
      throw IoError("checkpoint: missing tensor entry " + name);
    const json& e = entries[index++];
    if (e.at("name").get<std::string>() != name)
      throw IoError("checkpoint: expected entry " + name + ", found " +
                    e.at("name").get<std::string>());
    std::size_t len = e.at("len").get<std::size_t>();
    if (pos + len * 8 > size) throw IoError("checkpoint: blob truncated");
    std::vector<double> v(len);
    std::memcpy(v.data(), data + pos, len * 8);
    pos += len * 8;
    return v;
  }
};

json entry_list(const odds::OddsBuffer& buffer) {
  json arr = json::array();
  for (const auto& e : buffer.entries)
    arr.push_back(json{{"step", e.step}, {"x", e.x}, {"y", e.y}});
  return arr;
}

json entry_list(const std::deque<odds::OddsEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries)
    arr.push_back(json{{"step", e.step}, {"x", e.x}, {"y", e.y}});
  return arr;
}

void parse_entries(const json& arr, std::deque<odds::OddsEntry>& out) {
  for (const auto& e : arr)
    out.push_back(odds::OddsEntry{e.at("x").get<double>(),
                                  e.at("y").get<double>(),
                                  e.at("step").get<long>()});
}

}  // namespace

void save_checkpoint(const MoBModel& model, const std::string& path) {
  if (model.pending)
    throw ContractError("save_checkpoint: prediction in flight");

  int m_count = model.cfg.ensemble_size;
  BlobWriter blob;
  for (int j = 0; j < model.meta_prior.ensemble_size(); ++j)
    blob.add("meta_prior." + std::to_string(j),
             model.meta_prior.members[j].params);
  for (std::size_t i = 0; i < model.bases.size(); ++i)
    for (int j = 0; j < m_count; ++j)
      blob.add("basis." + std::to_string(i) + "." + std::to_string(j),
               model.bases[i].members[j].params);
  blob.add("mixing", model.mixing.net.params);
  blob.add("prior", model.prior_net.net.params);
  blob.add("inference", model.inference.net.params);
  for (std::size_t k = 0; k < model.basis_adam.size(); ++k) {
    blob.add("adam.basis." + std::to_string(k) + ".m", model.basis_adam[k].m);
    blob.add("adam.basis." + std::to_string(k) + ".v", model.basis_adam[k].v);
  }
  blob.add("adam.mixing.m", model.mixing_adam.m);
  blob.add("adam.mixing.v", model.mixing_adam.v);
  blob.add("adam.prior.m", model.prior_adam.m);
  blob.add("adam.prior.v", model.prior_adam.v);
  blob.add("adam.inference.m", model.inference_adam.m);
  blob.add("adam.inference.v", model.inference_adam.v);
  blob.add("z", model.z);
  blob.add("window_anchor", model.window_anchor);
  {
    std::vector<double> wx, wy, wz;
    for (const auto& w : model.window) {
      wx.push_back(w.x);
      wy.push_back(w.y);
      wz.insert(wz.end(), w.z.begin(), w.z.end());
    }
    blob.add("window.x", wx);
    blob.add("window.y", wy);
    blob.add("window.z", wz);
  }
  bool has_candidate = model.detector.candidate().ensemble_size() > 0;
  if (has_candidate)
    for (int j = 0; j < model.detector.candidate().ensemble_size(); ++j)
      blob.add("candidate." + std::to_string(j),
               model.detector.candidate().members[j].params);

  json manifest;
  manifest["cfg"] = model.cfg;
  json bases_meta = json::array();
  for (const auto& b : model.bases)
    bases_meta.push_back(json{{"origin", static_cast<int>(b.origin)},
                              {"source_task", b.source_task},
                              {"creation_step", b.creation_step}});
  manifest["bases"] = bases_meta;
  manifest["widths"] = json{
      {"basis", model.bases.empty() ? model.meta_prior.members[0].widths
                                    : model.bases[0].members[0].widths},
      {"meta_prior", model.meta_prior.members[0].widths},
      {"mixing", model.mixing.net.widths},
      {"prior", model.prior_net.net.widths},
      {"inference", model.inference.net.widths}};
  json adam_t = json::array();
  for (const auto& a : model.basis_adam) adam_t.push_back(a.t);
  manifest["adam_t"] = json{{"basis", adam_t},
                            {"mixing", model.mixing_adam.t},
                            {"prior", model.prior_adam.t},
                            {"inference", model.inference_adam.t}};
  manifest["detector"] =
      json{{"buffer", entry_list(model.detector.buffer())},
           {"recent", entry_list(model.detector.recent())},
           {"has_candidate", has_candidate},
           {"last_refit", has_candidate ? model.detector.last_refit() : 0},
           {"refit_period", model.detector.config().refit_period}};
  manifest["state"] = json{{"global_step", model.global_step},
                           {"update_counter", model.update_counter},
                           {"rng", std::to_string(model.rng.state())},
                           {"window_len", model.window.size()},
                           {"adam_lr", model.mixing_adam.lr},
                           {"adam_basis_lr",
                            model.basis_adam.empty()
                                ? model.cfg.learning_rate
                                : model.basis_adam.front().lr}};
  manifest["entries"] = blob.entries;
  manifest["version"] = kVersion;

  std::string bytes;
  bytes.append(kMagic, 4);
  put_u32(bytes, kVersion);
  std::string mtext = manifest.dump();
  put_u64(bytes, mtext.size());
  bytes += mtext;
  bytes += blob.data;
  put_u64(bytes, fnv1a(bytes));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_checkpoint: cannot open " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

MoBModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 24) throw IoError("load_checkpoint: truncated file");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("load_checkpoint: not a MoB checkpoint");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kVersion)
    throw IoError("load_checkpoint: unsupported version " +
                  std::to_string(version));
  std::uint64_t stored_hash;
  std::memcpy(&stored_hash, bytes.data() + bytes.size() - 8, 8);
  std::string body = bytes.substr(0, bytes.size() - 8);
  if (fnv1a(body) != stored_hash)
    throw IoError("load_checkpoint: checksum mismatch (corrupt file)");

  std::uint64_t mlen;
  std::memcpy(&mlen, bytes.data() + 8, 8);
  if (16 + mlen > body.size())
    throw IoError("load_checkpoint: manifest truncated");
  json manifest = json::parse(body.substr(16, mlen));

  MoBModel model;
  manifest.at("cfg").get_to(model.cfg);

  BlobReader blob{manifest.at("entries"), body.data() + 16 + mlen,
                  body.size() - 16 - mlen};

  auto read_mlp = [&](const std::string& name,
                      const std::vector<int>& widths) {
    nd::Mlp net;
    net.widths = widths;
    net.params = blob.take(name);
    std::size_t expect = 0;
    for (int l = 0; l + 1 < static_cast<int>(widths.size()); ++l)
      expect += net.layer_size(l);
    if (net.params.size() != expect)
      throw IoError("load_checkpoint: tensor size mismatch for " + name);
    return net;
  };

  const auto& widths = manifest.at("widths");
  std::vector<int> w_meta = widths.at("meta_prior").get<std::vector<int>>();
  std::vector<int> w_basis = widths.at("basis").get<std::vector<int>>();
  std::vector<int> w_mix = widths.at("mixing").get<std::vector<int>>();
  std::vector<int> w_pri = widths.at("prior").get<std::vector<int>>();
  std::vector<int> w_inf = widths.at("inference").get<std::vector<int>>();

  model.meta_prior.inner_lr = model.cfg.maml.inner_lr;
  model.meta_prior.inner_steps = model.cfg.maml.inner_steps;
  model.meta_prior.sigma_floor = model.cfg.maml.sigma_floor;
  model.meta_prior.clip_norm = model.cfg.maml.clip_norm;
  for (int j = 0; j < model.cfg.ensemble_size; ++j)
    model.meta_prior.members.push_back(
        read_mlp("meta_prior." + std::to_string(j), w_meta));

  const json& bases_meta = manifest.at("bases");
  for (std::size_t i = 0; i < bases_meta.size(); ++i) {
    basis::EnsembleBasis b;
    b.origin =
        static_cast<basis::BasisOrigin>(bases_meta[i].at("origin").get<int>());
    b.source_task = bases_meta[i].at("source_task").get<int>();
    b.creation_step = bases_meta[i].at("creation_step").get<long>();
    b.sigma_floor = model.cfg.maml.sigma_floor;
    for (int j = 0; j < model.cfg.ensemble_size; ++j)
      b.members.push_back(read_mlp(
          "basis." + std::to_string(i) + "." + std::to_string(j), w_basis));
    model.bases.push_back(std::move(b));
  }
  if (static_cast<int>(model.bases.size()) != w_mix.back())
    throw IoError("load_checkpoint: mixing head width does not match basis count");

  model.mixing.d = model.cfg.latent_dim;
  model.mixing.net = read_mlp("mixing", w_mix);
  model.prior_net.d = model.cfg.latent_dim;
  model.prior_net.net = read_mlp("prior", w_pri);
  model.inference.d = model.cfg.latent_dim;
  model.inference.net = read_mlp("inference", w_inf);

  const json& adam_t = manifest.at("adam_t");
  for (std::size_t k = 0; k < model.bases.size() *
                                  static_cast<std::size_t>(
                                      model.cfg.ensemble_size);
       ++k) {
    nd::AdamState a(model.cfg.learning_rate);
    a.m = blob.take("adam.basis." + std::to_string(k) + ".m");
    a.v = blob.take("adam.basis." + std::to_string(k) + ".v");
    a.t = adam_t.at("basis")[k].get<std::int64_t>();
    model.basis_adam.push_back(std::move(a));
  }
  auto read_adam = [&](const std::string& name, std::int64_t t) {
    nd::AdamState a(model.cfg.learning_rate);
    a.m = blob.take("adam." + name + ".m");
    a.v = blob.take("adam." + name + ".v");
    a.t = t;
    return a;
  };
  model.mixing_adam = read_adam("mixing", adam_t.at("mixing"));
  model.prior_adam = read_adam("prior", adam_t.at("prior"));
  model.inference_adam = read_adam("inference", adam_t.at("inference"));

  model.z = blob.take("z");
  model.window_anchor = blob.take("window_anchor");
  {
    std::vector<double> wx = blob.take("window.x");
    std::vector<double> wy = blob.take("window.y");
    std::vector<double> wz = blob.take("window.z");
    std::size_t n = manifest.at("state").at("window_len").get<std::size_t>();
    if (wx.size() != n || wz.size() != n * model.cfg.latent_dim)
      throw IoError("load_checkpoint: window size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      WindowObs obs;
      obs.x = wx[i];
      obs.y = wy[i];
      obs.z.assign(wz.begin() + i * model.cfg.latent_dim,
                   wz.begin() + (i + 1) * model.cfg.latent_dim);
      model.window.push_back(std::move(obs));
    }
  }

  model.detector = odds::OddsDetector(model.cfg.odds);
  const json& det = manifest.at("detector");
  model.detector.set_refit_period(det.at("refit_period").get<int>());
  parse_entries(det.at("buffer"), model.detector.buffer().entries);
  parse_entries(det.at("recent"), model.detector.recent());
  if (det.at("has_candidate").get<bool>()) {
    basis::EnsembleBasis cand;
    cand.origin = basis::BasisOrigin::kOddsCandidate;
    cand.sigma_floor = model.cfg.maml.sigma_floor;
    for (int j = 0; j < model.cfg.ensemble_size; ++j)
      cand.members.push_back(
          read_mlp("candidate." + std::to_string(j), w_basis));
    model.detector.set_candidate(std::move(cand),
                                 det.at("last_refit").get<long>());
  }

  const json& state = manifest.at("state");
  model.global_step = state.at("global_step").get<long>();
  model.update_counter = state.at("update_counter").get<long>();
  model.rng.set_state(
      std::stoull(state.at("rng").get<std::string>()));
  double latent_lr = state.at("adam_lr").get<double>();
  double basis_lr = state.at("adam_basis_lr").get<double>();
  for (auto& a : model.basis_adam) a.lr = basis_lr;
  model.mixing_adam.lr = latent_lr;
  model.prior_adam.lr = latent_lr;
  model.inference_adam.lr = latent_lr;
  return model;
}

}  // namespace mob::engine
