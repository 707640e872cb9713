#include "oasis/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "oasis/pretrain.hpp"

namespace oasis {

double gradient_relative_error(const Model& model, const std::function<double(const Model&)>& loss,
                               const ParameterSet& analytic, double step)
{
    Model probe = model;
    std::vector<double> theta = flatten(model.parameters());
    const std::vector<double> a = flatten(analytic);
    std::vector<double> numeric(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double saved = theta[k];
        theta[k] = saved + step;
        unflatten(theta, probe.parameters());
        const double up = loss(probe);
        theta[k] = saved - step;
        unflatten(theta, probe.parameters());
        const double down = loss(probe);
        theta[k] = saved;
        numeric[k] = (up - down) / (2.0 * step);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        diff += (a[k] - numeric[k]) * (a[k] - numeric[k]);
        na += a[k] * a[k];
        nn += numeric[k] * numeric[k];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

GradCheckReport run_gradcheck(int networks, std::uint64_t seed, double step, double tolerance)
{
    const auto start = std::chrono::steady_clock::now();
    GradCheckReport report;
    report.tolerance = tolerance;
    Rng rng(seed);
    std::uniform_int_distribution<int> width(3, 6);
    std::uniform_int_distribution<int> classes(3, 5);
    std::normal_distribution<double> normal(0.0, 1.0);

    auto record = [&](const std::string& name, int net, double err) {
        report.cases.push_back({name, net, err});
        report.max_relative_error = std::max(report.max_relative_error, err);
    };

    for (int net = 0; net < networks; ++net) {
        const int k = classes(rng);
        const int input = width(rng);
        Model model = Model::initialized({input, width(rng), width(rng), width(rng), k}, 2, 2, rng);
        for (auto& layer : model.parameters())
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
                layer.bias[i] = 0.3 * normal(rng);
        auto random_x = [&] {
            Vector x(input);
            for (int d = 0; d < input; ++d)
                x[d] = normal(rng);
            return x;
        };
        const Vector x_i = random_x();
        const Vector x_j = random_x();
        const int y_i = net % k;
        const int y_j = (net + 1) % k;

        {
            ParameterSet g = model.zero_gradients();
            class_loss_gradient(model, x_i, y_i, g);
            record("cross_entropy", net, gradient_relative_error(
                                             model, [&](const Model& m) { return cross_entropy(m.forward(x_i), y_i); },
                                             g, step));
        }
        // Different-class pair with an active hinge, then a same-class pair.
        for (const auto& [name, yj, balance] : {std::tuple{"pretrain_different_class", y_j, 0.25},
                                                std::tuple{"pretrain_same_class", y_i, 0.25},
                                                std::tuple{"contrastive_different_class", y_j, 0.0},
                                                std::tuple{"contrastive_same_class", y_i, 0.0}}) {
            const double margin = 10.0;
            ParameterSet g = model.zero_gradients();
            pretrain_loss_gradient(model, x_i, y_i, x_j, yj, balance, margin, g);
            record(name, net, gradient_relative_error(
                                  model,
                                  [&](const Model& m) {
                                      return pretrain_loss(m, x_i, y_i, x_j, yj, balance, margin).total;
                                  },
                                  g, step));
        }
        {
            // Refinement pull: anchor and borderline sample of one class.
            ParameterSet g = model.zero_gradients();
            const double balance = 0.25;
            pretrain_loss_gradient(model, x_j, y_i, x_i, y_i, balance, 10.0, g);
            record("refinement_pull", net, gradient_relative_error(
                                               model,
                                               [&](const Model& m) {
                                                   return pretrain_loss(m, x_j, y_i, x_i, y_i, balance, 10.0).total;
                                               },
                                               g, step));
        }
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace oasis
