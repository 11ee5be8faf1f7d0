#pragma once

// Finite-difference oracle for losses over model parameters, shared by the
// unit tests and the acceptance runner.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ganad/model.hpp"
#include "ganad/training.hpp"

namespace ganad::testing {

struct GradCheck {
    double relative_error = 0.0;  // ||analytic - fd|| / (||analytic|| + ||fd||)
    double max_entry_error = 0.0;  // max |a - f| / max(|a| + |f|, 1e-3)
    std::size_t parameters = 0;
    std::size_t kinked = 0;      // entries whose central difference crossed a kink
    std::size_t unresolved = 0;  // entries with no kink-free stencil down to h/1000
};

// Backprop through analytic_loss() is compared against finite differences of
// loss(); both must read the current parameter values each call.
//
// Leaky ReLU and |x| make the losses piecewise smooth. Each perturbed
// evaluation records its branch pattern; the central difference is used only
// when both sides stay on the base point's piece, otherwise a second-order
// one-sided difference from a clean side, otherwise the step is reduced.
inline GradCheck check_gradients(const std::function<Var<double>()>& analytic_loss,
                                 const std::function<Var<double>()>& loss, std::vector<ParamSet<double>*> sets,
                                 double h = 1e-6)
{
    std::vector<Var<double>> params;
    for (auto* s : sets)
        for (auto& [name, v] : *s)
            params.push_back(v);
    const auto analytic = grad(analytic_loss(), params);
    struct Eval {
        double value;
        std::vector<std::int8_t> branches;
    };
    auto evaluate = [&] {
        BranchTrace trace;
        const double v = loss().item();
        return Eval{v, trace.branches()};
    };
    const Eval base = evaluate();

    GradCheck out;
    double diff2 = 0.0, an2 = 0.0, fd2 = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& values = params[k].mutable_value().data;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            auto at = [&](double offset) {
                values[i] = saved + offset;
                auto e = evaluate();
                values[i] = saved;
                return e;
            };
            double fd = 0.0;
            bool clean = false;
            for (double step = h; step >= h * 1e-3 && !clean; step /= 10.0) {
                const auto p1 = at(step), m1 = at(-step);
                if (p1.branches == base.branches && m1.branches == base.branches) {
                    fd = (p1.value - m1.value) / (2.0 * step);
                    clean = true;
                    break;
                }
                if (step == h)
                    ++out.kinked;
                for (double dir : {1.0, -1.0}) {
                    const auto& e1 = dir > 0 ? p1 : m1;
                    if (e1.branches != base.branches)
                        continue;
                    const auto e2 = at(2.0 * dir * step);
                    if (e2.branches == base.branches) {
                        fd = dir * (-3.0 * base.value + 4.0 * e1.value - e2.value) / (2.0 * step);
                        clean = true;
                        break;
                    }
                }
            }
            if (!clean)
                ++out.unresolved;
            const double an = analytic[k].value().data[i];
            diff2 += (an - fd) * (an - fd);
            an2 += an * an;
            fd2 += fd * fd;
            out.max_entry_error =
                std::max(out.max_entry_error, std::abs(an - fd) / std::max(std::abs(an) + std::abs(fd), 1e-3));
            ++out.parameters;
        }
    }
    out.relative_error = std::sqrt(diff2) / std::max(std::sqrt(an2) + std::sqrt(fd2), 1e-300);
    return out;
}

inline GradCheck check_gradients(const std::function<Var<double>()>& loss, std::vector<ParamSet<double>*> sets,
                                 double h = 1e-6)
{
    return check_gradients(loss, loss, std::move(sets), h);
}

inline ModelConfig toy_model(std::uint64_t seed)
{
    ModelConfig c;
    c.latent_dim = 4;
    c.base_channels = 2;
    c.target_resolution = 8;
    c.seed = seed;
    return c;
}

inline std::size_t count_parameters(const ParamSet<double>& params)
{
    std::size_t n = 0;
    for (const auto& [name, v] : params)
        n += v.size();
    return n;
}

struct ToyProblem {
    BasicBundle<double> bundle;
    GrowthPhase phase{8, 0.5};
    Tensor<double> real;
    Tensor<double> z_unit;
    Tensor<double> z_raw;
    Tensor<double> eps;
};

inline ToyProblem make_toy(std::uint64_t seed, int batch = 3)
{
    ToyProblem p;
    p.bundle = init_bundle<double>(toy_model(seed));
    std::mt19937_64 rng(seed * 7919 + 1);
    std::uniform_real_distribution<double> u(-1.0, 1.0), e(0.0, 1.0);
    p.real = Tensor<double>({batch, 1, 8, 8});
    for (auto& v : p.real.data)
        v = u(rng);
    const auto prior = sample_prior(static_cast<std::size_t>(batch), 4, seed + 17);
    p.z_unit = prior.unit.cast<double>();
    p.z_raw = prior.raw.cast<double>();
    p.eps = Tensor<double>({batch});
    for (auto& v : p.eps.data)
        v = e(rng);
    return p;
}

inline NetFn<double> generator_fn(const ToyProblem& p)
{
    return [&p](const Var<double>& z) { return generator_forward(p.bundle, z, p.phase); };
}
inline NetFn<double> critic_fn(const ToyProblem& p)
{
    return [&p](const Var<double>& x) { return critic_forward(p.bundle, x, p.phase); };
}
inline NetFn<double> encoder_fn(const ToyProblem& p)
{
    return [&p](const Var<double>& x) { return encoder_forward(p.bundle, x, p.phase); };
}

// Full critic objective (Wasserstein term + 10 * GP) w.r.t. θ_D.
inline GradCheck check_critic_loss(std::uint64_t seed)
{
    auto p = make_toy(seed);
    const auto fake = generator_forward(p.bundle, Var<double>::constant(p.z_unit), p.phase).value();
    auto loss = [&] {
        return critic_loss<double>(critic_fn(p), Var<double>::constant(p.real), Var<double>::constant(fake), p.eps,
                                   10.0)
            .loss;
    };
    return check_gradients(loss, {&p.bundle.discriminator});
}

// Generator loss + encoder loss w.r.t. θ_G and θ_E. With detach_inner the
// reference treats the inner sample G(z) as a constant frozen at the base
// point, which is what a stop-gradient differentiates.
inline GradCheck check_encoder_loss(std::uint64_t seed, EncoderMode mode, bool detach_inner = false)
{
    auto p = make_toy(seed);
    const Var<double> z = Var<double>::constant(p.z_unit);
    auto loss = [&] {
        return generator_encoder_loss<double>(generator_fn(p), critic_fn(p), encoder_fn(p), z,
                                              Var<double>::constant(p.z_raw), mode, detach_inner)
            .total;
    };
    if (!detach_inner)
        return check_gradients(loss, {&p.bundle.generator, &p.bundle.encoder});

    const Var<double> inner = Var<double>::constant(generator_forward(p.bundle, z, p.phase).value());
    auto reference = [&] {
        const auto g = generator_fn(p);
        const auto adversarial = ag::scale(ag::mean(critic_fn(p)(g(z))), -1.0);
        const auto z_hat = encoder_fn(p)(inner);
        const auto d = mode == EncoderMode::JointLatentSpace
                           ? ag::mean(ag::abs(ag::sub(Var<double>::constant(p.z_raw), z_hat)))
                           : ag::mean(ag::abs(ag::sub(inner, g(z_hat))));
        return ag::add(adversarial, d);
    };
    return check_gradients(loss, reference, {&p.bundle.generator, &p.bundle.encoder});
}

}  // namespace ganad::testing
