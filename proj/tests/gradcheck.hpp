#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ssq/nn/graph.hpp"

// Central finite-difference check for the reverse-mode gradients. `build`
// constructs a scalar loss over fresh input nodes each call; inputs are the
// checked leaves. Returns the worst error, relative with a unit floor:
// |analytic - numeric| / max(1, |analytic|, |numeric|).
inline double gradcheck(std::vector<ssq::nn::Tensor> inputs,
                        const std::function<int(ssq::nn::Graph&, const std::vector<int>&)>& build,
                        double h = 1e-5, bool train_mode = false) {
    using namespace ssq::nn;

    auto eval = [&](const std::vector<Tensor>& xs) {
        Graph g(train_mode);
        std::vector<int> ids;
        ids.reserve(xs.size());
        for (const auto& x : xs) ids.push_back(g.input(x, false));
        return g.val(build(g, ids)).data[0];
    };

    // Analytic gradients.
    Graph g(train_mode);
    std::vector<int> ids;
    for (const auto& x : inputs) ids.push_back(g.input(x, true));
    int loss = build(g, ids);
    g.backward(loss);
    std::vector<Tensor> analytic;
    for (int id : ids) {
        Tensor grad = g.grad(id);
        if (grad.shape.empty()) grad = Tensor(g.val(id).shape);  // untouched leaf
        analytic.push_back(std::move(grad));
    }

    double worst = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        for (size_t j = 0; j < inputs[i].numel(); ++j) {
            auto plus = inputs;
            auto minus = inputs;
            plus[i].data[j] += h;
            minus[i].data[j] -= h;
            const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
            const double a = analytic[i].data[j];
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

inline ssq::nn::Tensor random_tensor(std::vector<int> shape, ssq::Rng& rng, double scale = 1.0) {
    ssq::nn::Tensor t(std::move(shape));
    for (auto& v : t.data) v = scale * rng.normal();
    return t;
}
