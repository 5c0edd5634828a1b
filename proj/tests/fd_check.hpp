#pragma once
// Shared test oracle: central-difference gradient checks for losses defined
// over a ParamStore. The loss closure must be a deterministic pure function
// of the store contents.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <catch_amalgamated.hpp>

#include "headliner/autodiff.hpp"
#include "headliner/common.hpp"
#include "headliner/optim.hpp"

namespace fdtest {

using LossFn =
    std::function<headliner::ad::Value(headliner::ad::Tape&, headliner::optim::GraphParams&)>;

inline double loss_value(headliner::optim::ParamStore& store, const LossFn& loss) {
  headliner::ad::Tape tape;
  headliner::optim::GraphParams p(tape, store);
  return loss(tape, p).val().item();
}

// Checks d(loss)/d(theta) against central differences for a sample of entries
// in every parameter tensor. Relative error uses a unity floor so near-zero
// gradients are held to an absolute 'tol'.
inline void check_gradients(headliner::optim::ParamStore& store, const LossFn& loss,
                            double tol = 1e-6, double h = 1e-5,
                            std::size_t probes_per_param = 6, std::uint64_t probe_seed = 1234) {
  using namespace headliner;

  ad::Tape tape;
  optim::GraphParams p(tape, store);
  std::vector<std::string> names = store.names();
  for (const auto& n : names) (void)p[n];  // bind every leaf before backward
  ad::Value loss_node = loss(tape, p);
  const double base = loss_node.val().item();
  REQUIRE(std::isfinite(base));
  tape.backward(loss_node);

  Rng rng(probe_seed);
  for (const auto& name : names) {
    const ad::Tensor grad = p[name].grad();
    std::vector<double>& value = store.entry(name).value.data;
    REQUIRE(grad.data.size() == value.size());

    std::vector<std::size_t> picks;
    if (value.size() <= probes_per_param) {
      for (std::size_t i = 0; i < value.size(); ++i) picks.push_back(i);
    } else {
      picks.push_back(0);
      while (picks.size() < probes_per_param) picks.push_back(rng.uniform_index(value.size()));
    }

    for (std::size_t i : picks) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = loss_value(store, loss);
      value[i] = saved - h;
      const double down = loss_value(store, loss);
      value[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double g = grad.data[i];
      const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1.0});
      INFO("param " << name << " entry " << i << ": tape " << g << " vs fd " << fd);
      REQUIRE(rel < tol);
    }
  }
}

}  // namespace fdtest
