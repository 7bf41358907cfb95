#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "ssq/nn/tensor.hpp"

namespace ssq::nn {

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-9;
    double decay_gamma = 0.1;
    int decay_every = 10;  // epochs
    int batch_size = 64;
    int epochs = 30;
    std::uint64_t seed = 0;

    // Optional early stop: finish once train top-1 reconstruction reaches
    // this fraction (checked once per epoch); 0 disables.
    double stop_at_top1 = 0.0;

    void validate() const {
        if (lr <= 0) throw ConfigError("lr must be positive");
        if (!(0 < beta1 && beta1 < 1) || !(0 < beta2 && beta2 < 1))
            throw ConfigError("betas must lie in (0,1)");
        if (eps <= 0) throw ConfigError("eps must be positive");
        if (!(0 < decay_gamma && decay_gamma <= 1)) throw ConfigError("gamma must be in (0,1]");
        if (decay_every <= 0 || batch_size <= 0 || epochs <= 0)
            throw ConfigError("counts must be positive");
    }

    double effective_lr(int epoch) const {
        double lr_eff = lr;
        for (int k = 0; k < epoch / decay_every; ++k) lr_eff *= decay_gamma;
        return lr_eff;
    }
};

// Adam with bias correction and epoch-indexed step decay. Moments are keyed
// by parameter identity; a parameter set is single-writer.
class Adam {
  public:
    Adam(std::vector<Parameter*> params, TrainConfig cfg);

    void zero_grad();
    // Applies one update from the accumulated gradients.
    void step(int epoch);
    int step_count() const { return step_; }

    const Tensor* first_moment(const Parameter* p) const;

  private:
    struct Moments {
        Tensor m, v;
    };
    std::vector<Parameter*> params_;
    std::unordered_map<const Parameter*, Moments> state_;
    TrainConfig cfg_;
    int step_ = 0;
};

}  // namespace ssq::nn
