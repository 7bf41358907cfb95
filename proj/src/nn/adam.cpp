#include "ssq/nn/adam.hpp"

#include <cmath>

namespace ssq::nn {

Adam::Adam(std::vector<Parameter*> params, TrainConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    for (Parameter* p : params_)
        state_[p] = Moments{Tensor(p->value.shape), Tensor(p->value.shape)};
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

void Adam::step(int epoch) {
    ++step_;
    const double lr = cfg_.effective_lr(epoch);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, step_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, step_);
    for (Parameter* p : params_) {
        Moments& mo = state_[p];
        for (size_t i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad.data[i];
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p->name);
            mo.m.data[i] = cfg_.beta1 * mo.m.data[i] + (1.0 - cfg_.beta1) * g;
            mo.v.data[i] = cfg_.beta2 * mo.v.data[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = mo.m.data[i] / bc1;
            const double vhat = mo.v.data[i] / bc2;
            p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

const Tensor* Adam::first_moment(const Parameter* p) const {
    auto it = state_.find(p);
    return it == state_.end() ? nullptr : &it->second.m;
}

}  // namespace ssq::nn
