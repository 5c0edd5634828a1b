#pragma once

// Named parameter store with Adam updates, global-norm gradient clipping,
// and a binary checkpoint format (values only; optimizer moments are not
// persisted, so each training phase starts with fresh Adam state).

#include <map>
#include <string>
#include <vector>

#include "headliner/autodiff.hpp"
#include "headliner/common.hpp"
#include "headliner/tensor.hpp"

namespace headliner::optim {

using ad::Tensor;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 2.0;  // global 2-norm across all updated parameters
};

class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor m;  // first moment
    Tensor v;  // second moment
  };

  void create(const std::string& name, Tensor init) {
    if (params_.count(name)) fail("param store: \"%s\" already exists", name.c_str());
    Entry e;
    e.m = Tensor(init.shape, 0.0);
    e.v = Tensor(init.shape, 0.0);
    e.value = std::move(init);
    params_.emplace(name, std::move(e));
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  Entry& entry(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) fail("param store: unknown parameter \"%s\"", name.c_str());
    return it->second;
  }

  const Tensor& value(const std::string& name) { return entry(name).value; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : params_) out.push_back(k);
    return out;
  }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [k, v] : params_) n += v.value.numel();
    return n;
  }

  long long step_count() const { return step_; }
  double last_grad_norm() const { return last_grad_norm_; }
  double last_clip_scale() const { return last_clip_scale_; }

  // One optimizer step over the given (name, graph leaf) bindings: clip the
  // concatenated gradient to clip_norm, then apply Adam per parameter.
  void apply_gradients(const std::map<std::string, ad::Value>& bound,
                       const AdamConfig& cfg) {
    if (bound.empty()) fail("optimizer step: no bound parameters");
    double sq = 0.0;
    for (const auto& [name, leaf] : bound) {
      const Tensor& g = leaf.grad();
      if (!g.all_finite()) fail("optimizer step: non-finite gradient in \"%s\"", name.c_str());
      for (double x : g.data) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    const double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm)
                             ? cfg.clip_norm / norm
                             : 1.0;
    last_grad_norm_ = norm;
    last_clip_scale_ = scale;
    ++step_;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (const auto& [name, leaf] : bound) {
      Entry& e = entry(name);
      if (!e.value.same_shape(leaf.val()))
        fail("optimizer step: \"%s\" bound with mismatched shape", name.c_str());
      const Tensor& g = leaf.grad();
      for (std::size_t i = 0; i < e.value.numel(); ++i) {
        const double gi = g.data[i] * scale;
        e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * gi;
        e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
        const double mhat = e.m.data[i] / c1;
        const double vhat = e.v.data[i] / c2;
        e.value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      }
    }
  }

  // ---- checkpointing: magic, version, manifest, then contiguous payload ----

  void save(const std::string& path) const {
    std::string out;
    out += "HLCP";
    le::put_u32(out, 1);
    le::put_u64(out, params_.size());
    for (const auto& [name, e] : params_) {
      le::put_str(out, name);
      le::put_u32(out, 0);  // dtype: f64
      le::put_u32(out, static_cast<std::uint32_t>(e.value.rank()));
      for (std::size_t d : e.value.shape) le::put_u64(out, d);
    }
    for (const auto& [name, e] : params_)
      for (double v : e.value.data) le::put_f64(out, v);
    write_file(path, out);
  }

  static ParamStore load(const std::string& path) {
    le::Reader r(read_file(path), path);
    r.expect_magic("HLCP");
    const std::uint32_t version = r.u32();
    if (version != 1) fail("%s: unsupported checkpoint version %u", path.c_str(), version);
    const std::uint64_t n = r.u64();
    std::vector<std::pair<std::string, std::vector<std::size_t>>> manifest;
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string name = r.str();
      const std::uint32_t dtype = r.u32();
      if (dtype != 0) fail("%s: unsupported dtype %u for \"%s\"", path.c_str(), dtype, name.c_str());
      const std::uint32_t rank = r.u32();
      if (rank > 2) fail("%s: rank %u too large for \"%s\"", path.c_str(), rank, name.c_str());
      std::vector<std::size_t> shape;
      for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u64());
      manifest.emplace_back(std::move(name), std::move(shape));
    }
    ParamStore store;
    for (auto& [name, shape] : manifest) {
      Tensor t(shape);
      for (double& v : t.data) v = r.f64();
      store.create(name, std::move(t));
    }
    if (!r.at_end()) fail("%s: trailing bytes after checkpoint payload", path.c_str());
    return store;
  }

 private:
  std::map<std::string, Entry> params_;  // ordered: deterministic iteration
  long long step_ = 0;
  double last_grad_norm_ = 0.0;
  double last_clip_scale_ = 1.0;
};

// Per-tape view of a ParamStore: hands out one shared leaf per parameter so
// repeated uses accumulate into a single gradient, and remembers the bindings
// for the optimizer step.
class GraphParams {
 public:
  GraphParams(ad::Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

  ad::Value operator[](const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    ad::Value leaf = tape_->leaf(store_->value(name));
    bound_.emplace(name, leaf);
    return leaf;
  }

  const std::map<std::string, ad::Value>& bound() const { return bound_; }

  void step(const AdamConfig& cfg) { store_->apply_gradients(bound_, cfg); }

 private:
  ad::Tape* tape_;
  ParamStore* store_;
  std::map<std::string, ad::Value> bound_;
};

// ---- deterministic initializers ----

inline Tensor xavier_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t({rows, cols});
  for (double& v : t.data) v = rng.uniform_real(-limit, limit);
  return t;
}

inline Tensor uniform_vector(Rng& rng, std::size_t n, double limit) {
  Tensor t({n});
  for (double& v : t.data) v = rng.uniform_real(-limit, limit);
  return t;
}

inline Tensor zeros_vector(std::size_t n) { return Tensor({n}, 0.0); }

}  // namespace headliner::optim
