#include "metaland/checkpoint.hpp"

#include "metaland/binary_io.hpp"

#include <filesystem>
#include <fstream>
#include <map>

namespace metaland {

namespace {

struct Array {
  std::uint64_t rows = 0, cols = 0;
  std::vector<double> data;
};

void put_array(std::ostream& os, const std::string& name, const MatX& m) {
  binio::put_string(os, name);
  binio::put_u64(os, static_cast<std::uint64_t>(m.rows()));
  binio::put_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) binio::put_f64(os, m(i, j));
}

VecX take_vector(std::map<std::string, Array>& arrays, const std::string& name, std::size_t expected) {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw ConfigError("checkpoint: missing array '" + name + "'");
  const Array& a = it->second;
  if (a.cols != 1 || a.rows != expected) throw ConfigError("checkpoint: array '" + name + "' has the wrong shape");
  VecX v(static_cast<Eigen::Index>(a.rows));
  for (std::size_t k = 0; k < a.data.size(); ++k) v[static_cast<Eigen::Index>(k)] = a.data[k];
  return v;
}

void put_adam(std::ostream& os, const std::string& prefix, const Adam& adam) {
  put_array(os, prefix + ".m", adam.m);
  put_array(os, prefix + ".v", adam.v);
  VecX hyper(6);
  hyper << static_cast<double>(adam.t), adam.lr, adam.beta1, adam.beta2, adam.eps, 0.0;
  put_array(os, prefix + ".hyper", hyper);
}

Adam take_adam(std::map<std::string, Array>& arrays, const std::string& prefix, std::size_t n) {
  Adam adam;
  adam.m = take_vector(arrays, prefix + ".m", n);
  adam.v = take_vector(arrays, prefix + ".v", n);
  const VecX hyper = take_vector(arrays, prefix + ".hyper", 6);
  adam.t = static_cast<std::uint64_t>(hyper[0]);
  adam.lr = hyper[1];
  adam.beta1 = hyper[2];
  adam.beta2 = hyper[3];
  adam.eps = hyper[4];
  return adam;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& st, const std::string& metadata) {
  const Agent& a = st.agent;
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write checkpoint " + path);
    os.write("MLCK", 4);
    binio::put_u32(os, kCheckpointVersion);
    binio::put_u32(os, static_cast<std::uint32_t>(a.obs_dim()));
    binio::put_u32(os, static_cast<std::uint32_t>(a.act_dim()));
    binio::put_u32(os, static_cast<std::uint32_t>(a.unroll));
    binio::put_u32(os, a.recurrent() ? 1U : 0U);
    binio::put_u64(os, st.iteration);
    binio::put_u64(os, st.episodes);
    binio::put_f64(os, st.clip);
    binio::put_string(os, metadata);
    binio::put_u32(os, 13);
    put_array(os, "policy", a.policy.params());
    put_array(os, "log_std", a.log_std);
    put_array(os, "value", a.value.params());
    put_array(os, "norm.mean", a.norm.mean);
    put_array(os, "norm.m2", a.norm.m2);
    VecX norm_state(2);
    norm_state << a.norm.count, a.norm.clip;
    put_array(os, "norm.state", norm_state);
    VecX value_affine(2);
    value_affine << a.value_offset, a.value_scale;
    put_array(os, "value.affine", value_affine);
    put_adam(os, "adam.policy", st.opt.policy);
    put_adam(os, "adam.value", st.opt.value);
    if (!os) throw ConfigError("failed while writing checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint " + path);
  Checkpoint out;
  try {
    binio::expect_magic(is, "MLCK");
    const std::uint32_t version = binio::get_u32(is);
    if (version != kCheckpointVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    const std::size_t obs_dim = binio::get_u32(is);
    const std::size_t act_dim = binio::get_u32(is);
    const std::size_t unroll = binio::get_u32(is);
    const bool recurrent = binio::get_u32(is) != 0;
    out.state.iteration = binio::get_u64(is);
    out.state.episodes = binio::get_u64(is);
    out.state.clip = binio::get_f64(is);
    out.metadata = binio::get_string(is);
    const std::uint32_t n_arrays = binio::get_u32(is);
    std::map<std::string, Array> arrays;
    for (std::uint32_t k = 0; k < n_arrays; ++k) {
      const std::string name = binio::get_string(is, 256);
      Array a;
      a.rows = binio::get_u64(is);
      a.cols = binio::get_u64(is);
      if (a.rows * a.cols > (1ULL << 28)) throw ConfigError("checkpoint: array '" + name + "' is implausibly large");
      a.data.resize(a.rows * a.cols);
      for (double& x : a.data) x = binio::get_f64(is);
      arrays.emplace(name, std::move(a));
    }
    if (obs_dim == 0 || act_dim == 0) throw ConfigError("checkpoint: zero dimension");

    Agent& ag = out.state.agent;
    const Layer2 layer2 = recurrent ? Layer2::gru : Layer2::dense;
    ag.policy = Network(obs_dim, layer_sizes(obs_dim, act_dim, NetKind::policy), layer2);
    ag.value = Network(obs_dim, layer_sizes(obs_dim, act_dim, NetKind::value), layer2);
    ag.unroll = unroll;
    ag.policy.set_params(take_vector(arrays, "policy", ag.policy.num_params()));
    ag.value.set_params(take_vector(arrays, "value", ag.value.num_params()));
    ag.log_std = take_vector(arrays, "log_std", act_dim);
    ag.norm.mean = take_vector(arrays, "norm.mean", obs_dim);
    ag.norm.m2 = take_vector(arrays, "norm.m2", obs_dim);
    const VecX norm_state = take_vector(arrays, "norm.state", 2);
    ag.norm.count = norm_state[0];
    ag.norm.clip = norm_state[1];
    const VecX value_affine = take_vector(arrays, "value.affine", 2);
    ag.value_offset = value_affine[0];
    ag.value_scale = value_affine[1];
    out.state.opt.policy = take_adam(arrays, "adam.policy", ag.policy.num_params() + act_dim);
    out.state.opt.value = take_adam(arrays, "adam.value", ag.value.num_params());
  } catch (const std::runtime_error& e) {
    throw ConfigError("corrupt checkpoint " + path + ": " + e.what());
  }
  return out;
}

}  // namespace metaland
