#include "ganad/training.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "ganad/errors.hpp"
#include "ganad/tensor_ops.hpp"

namespace ganad {

std::string_view to_string(EncoderMode mode)
{
    switch (mode) {
    case EncoderMode::JointImageSpace: return "joint_image";
    case EncoderMode::JointLatentSpace: return "joint_latent";
    case EncoderMode::PostHoc: return "posthoc";
    }
    return "?";
}

EncoderMode parse_encoder_mode(std::string_view text)
{
    if (text == "joint_image" || text == "d_I")
        return EncoderMode::JointImageSpace;
    if (text == "joint_latent" || text == "d_z")
        return EncoderMode::JointLatentSpace;
    if (text == "posthoc")
        return EncoderMode::PostHoc;
    throw std::invalid_argument("unknown encoder mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const
{
    model.validate();
    if (critic_steps < 1)
        throw std::invalid_argument("critic_steps must be >= 1");
    if (!(gp_weight > 0.0))
        throw std::invalid_argument("gradient penalty weight must be > 0");
    if (!(adam.learning_rate > 0.0) || adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 ||
        adam.beta2 >= 1.0 || !(adam.epsilon > 0.0))
        throw std::invalid_argument("invalid optimizer hyperparameters");
    if (batch_start < 1 || batch_end < 1)
        throw std::invalid_argument("batch sizes must be >= 1");
    if (steps_per_phase < 0 || posthoc_encoder_steps < 0)
        throw std::invalid_argument("step counts must be >= 0");
    if (log_every < 1)
        throw std::invalid_argument("log_every must be >= 1");
    if (encoder_loss_weight < 0.0)
        throw std::invalid_argument("encoder loss weight must be >= 0");
}

bool TrainConfig::progressive_enabled() const
{
    return progressive.value_or(model.target_resolution >= 16);
}

std::string train_log_header()
{
    return "step,stage,resolution,fade_in,batch_size,critic_loss,wasserstein,gradient_penalty,generator_loss,"
           "encoder_loss,wall_time";
}

std::string train_log_row(const TrainLogRecord& r)
{
    std::ostringstream os;
    os << std::setprecision(9);
    os << r.step << ',' << r.stage << ',' << r.resolution << ',' << r.fade_in << ',' << r.batch_size << ','
       << r.critic_loss << ',' << r.wasserstein << ',' << r.gradient_penalty << ',' << r.generator_loss << ','
       << r.encoder_loss << ',' << std::setprecision(4) << std::fixed << r.wall_time;
    return os.str();
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
Var<T> gradient_penalty(const NetFn<T>& critic, const Tensor<T>& points)
{
    const Var<T> x = Var<T>::leaf(points, true);
    const Var<T> scores = critic(x);
    const Var<T> gx = grad(ag::sum(scores), {x}, /*create_graph=*/true)[0];
    const Var<T> norms = ag::sqrt(ag::sum_rows(ag::square(gx)));
    return ag::mean(ag::square(ag::add_scalar(norms, T(-1))));
}

template <typename T>
CriticLoss<T> critic_loss(const NetFn<T>& critic, const Var<T>& real, const Var<T>& fake, const Tensor<T>& eps,
                          T gp_weight)
{
    if (real.shape() != fake.shape())
        throw std::invalid_argument("critic_loss: real batch " + shape_str(real.shape()) + " vs fake batch " +
                                    shape_str(fake.shape()));
    const int n = real.shape()[0];
    if (eps.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("critic_loss: need one interpolation weight per sample");

    Tensor<T> mixed(real.shape());
    const std::size_t per = real.size() / static_cast<std::size_t>(n);
    for (int i = 0; i < n; ++i) {
        const T e = eps[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < per; ++k) {
            const std::size_t idx = static_cast<std::size_t>(i) * per + k;
            mixed[idx] = e * real.value()[idx] + (T(1) - e) * fake.value()[idx];
        }
    }

    const Var<T> fake_data = fake.detach();
    const Var<T> w = ag::sub(ag::mean(critic(real)), ag::mean(critic(fake_data)));
    const Var<T> gp = gradient_penalty(critic, mixed);
    CriticLoss<T> out;
    out.loss = ag::add(ag::scale(w, T(-1)), ag::scale(gp, gp_weight));
    out.wasserstein = w.item();
    out.gradient_penalty = gp.item();
    return out;
}

template <typename T>
GeneratorEncoderLoss<T> generator_encoder_loss(const NetFn<T>& generator, const NetFn<T>& critic,
                                               const NetFn<T>& encoder, const Var<T>& z_input,
                                               const Var<T>& z_target, EncoderMode mode, bool detach_inner,
                                               T encoder_weight)
{
    GeneratorEncoderLoss<T> out;
    const Var<T> generated = generator(z_input);
    Var<T> total;
    if (critic) {
        const Var<T> g_loss = ag::scale(ag::mean(critic(generated)), T(-1));
        out.generator_loss = g_loss.item();
        total = g_loss;
    }
    if (encoder) {
        const Var<T> inner = detach_inner ? generated.detach() : generated;
        const Var<T> z_hat = encoder(inner);
        Var<T> e_loss;
        if (mode == EncoderMode::JointLatentSpace) {
            if (z_target.shape() != z_hat.shape())
                throw std::invalid_argument("d_z: encoder output " + shape_str(z_hat.shape()) + " vs latent " +
                                            shape_str(z_target.shape()));
            e_loss = ag::mean(ag::abs(ag::sub(z_target, z_hat)));
        } else {
            e_loss = ag::mean(ag::abs(ag::sub(inner, generator(z_hat))));
        }
        out.encoder_loss = e_loss.item();
        const Var<T> weighted = ag::scale(e_loss, encoder_weight);
        total = total.defined() ? ag::add(total, weighted) : weighted;
    }
    if (!total.defined())
        throw std::invalid_argument("generator_encoder_loss: neither critic nor encoder supplied");
    out.total = total;
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer

template <typename T>
std::vector<Var<T>> param_list(const ParamSet<T>& params)
{
    std::vector<Var<T>> out;
    out.reserve(params.size());
    for (const auto& [name, v] : params)
        out.push_back(v);
    return out;
}

template <typename T>
void Adam<T>::step(ParamSet<T>& params, const std::vector<Var<T>>& grads)
{
    if (grads.size() != params.size())
        throw std::invalid_argument("Adam::step: gradient count mismatch");
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = config_.learning_rate * std::sqrt(c2) / c1;
    std::size_t i = 0;
    for (auto& [name, var] : params) {
        const Tensor<T>& g = grads[i++].value();
        Tensor<T>& p = var.mutable_value();
        auto [mit, m_new] = m_.try_emplace(name, Tensor<T>(p.shape));
        auto [vit, v_new] = v_.try_emplace(name, Tensor<T>(p.shape));
        Tensor<T>& m = mit->second;
        Tensor<T>& v = vit->second;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = static_cast<double>(g[k]);
            const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
            const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
            m[k] = static_cast<T>(mk);
            v[k] = static_cast<T>(vk);
            p[k] = static_cast<T>(static_cast<double>(p[k]) - lr * mk / (std::sqrt(vk) + config_.epsilon));
        }
    }
}

template <typename T>
void Adam<T>::reset()
{
    m_.clear();
    v_.clear();
    t_ = 0;
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

void check_finite(double v, const char* what)
{
    if (!std::isfinite(v))
        throw NonFiniteError(std::string(what) + " became non-finite");
}

template <typename T>
void check_finite_grads(const std::vector<Var<T>>& grads, const char* what)
{
    for (const auto& g : grads)
        for (T v : g.value().data)
            if (!std::isfinite(v))
                throw NonFiniteError(std::string("non-finite gradient in ") + what);
}

}  // namespace

Trainer::Trainer(ModelBundle bundle, TrainConfig config)
    : bundle_(std::move(bundle)),
      config_(std::move(config)),
      critic_opt_(config_.adam),
      generator_opt_(config_.adam),
      encoder_opt_(config_.adam),
      rng_(derive_seed(config_.seed, 201))
{
    config_.validate();
    if (!bundle_.has_discriminator())
        throw std::invalid_argument("training requires a bundle with discriminator parameters");
}

void Trainer::set_phase(const GrowthPhase& phase) { bundle_.phase = phase; }

void Trainer::reset_optimizers()
{
    critic_opt_.reset();
    generator_opt_.reset();
    encoder_opt_.reset();
}

CriticStepStats Trainer::critic_step(const Tensor<float>& real, const Tensor<float>& z_unit)
{
    if (real.dim(0) != z_unit.dim(0))
        throw std::invalid_argument("critic_step: real and latent batch sizes differ");
    const GrowthPhase phase = bundle_.phase;
    Tensor<float> fake;
    {
        NoGradGuard guard;
        fake = generator_forward(bundle_, Var<float>::constant(z_unit), phase).value();
    }
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    Tensor<float> eps(Shape{real.dim(0)});
    for (auto& e : eps.data)
        e = unit(rng_);

    const NetFn<float> critic = [this, phase](const Var<float>& x) { return critic_forward(bundle_, x, phase); };
    const auto terms = critic_loss<float>(critic, Var<float>::constant(real), Var<float>::constant(std::move(fake)),
                                          eps, static_cast<float>(config_.gp_weight));
    check_finite(terms.loss.item(), "critic loss");
    const auto params = param_list(bundle_.discriminator);
    const auto grads = grad(terms.loss, params);
    check_finite_grads(grads, "critic");
    critic_opt_.step(bundle_.discriminator, grads);
    return {terms.loss.item(), terms.wasserstein, terms.gradient_penalty};
}

GeneratorStepStats Trainer::generator_encoder_step(const PriorBatch& z)
{
    const GrowthPhase phase = bundle_.phase;
    const NetFn<float> gen = [this, phase](const Var<float>& v) { return generator_forward(bundle_, v, phase); };
    const NetFn<float> critic = [this, phase](const Var<float>& v) { return critic_forward(bundle_, v, phase); };
    NetFn<float> enc;
    const bool joint = config_.encoder_mode != EncoderMode::PostHoc;
    if (joint)
        enc = [this, phase](const Var<float>& v) { return encoder_forward(bundle_, v, phase); };
    const Tensor<float>& target = config_.latent_target == LatentTarget::Raw ? z.raw : z.unit;
    const auto terms = generator_encoder_loss<float>(gen, critic, enc, Var<float>::constant(z.unit),
                                                     Var<float>::constant(target), config_.encoder_mode,
                                                     config_.detach_inner_sample,
                                                     static_cast<float>(config_.encoder_loss_weight));
    check_finite(terms.total.item(), "generator/encoder loss");

    if (joint) {
        // θ_G and θ_E share one optimizer step.
        ParamSet<float> joint_params;
        for (const auto& [k, v] : bundle_.generator)
            joint_params.emplace("generator." + k, v);
        for (const auto& [k, v] : bundle_.encoder)
            joint_params.emplace("encoder." + k, v);
        const auto grads = grad(terms.total, param_list(joint_params));
        check_finite_grads(grads, "generator/encoder");
        generator_opt_.step(joint_params, grads);
    } else {
        const auto grads = grad(terms.total, param_list(bundle_.generator));
        check_finite_grads(grads, "generator");
        generator_opt_.step(bundle_.generator, grads);
    }
    return {terms.generator_loss, terms.encoder_loss};
}

double Trainer::encoder_step(const PriorBatch& z)
{
    const GrowthPhase phase = bundle_.phase;
    // The generator enters as a fixed function: its parameters are read as constants.
    ParamSet<float> frozen_generator;
    for (const auto& [k, v] : bundle_.generator)
        frozen_generator.emplace(k, v.detach());
    ModelBundle view;
    view.generator_spec = bundle_.generator_spec;
    view.generator = std::move(frozen_generator);
    const NetFn<float> gen = [&view, phase](const Var<float>& v) { return generator_forward(view, v, phase); };
    const NetFn<float> enc = [this, phase](const Var<float>& v) { return encoder_forward(bundle_, v, phase); };
    const auto terms = generator_encoder_loss<float>(gen, NetFn<float>{}, enc, Var<float>::constant(z.unit),
                                                     Var<float>::constant(z.unit), EncoderMode::JointImageSpace,
                                                     false, 1.0f);
    check_finite(terms.total.item(), "encoder loss");
    const auto grads = grad(terms.total, param_list(bundle_.encoder));
    check_finite_grads(grads, "encoder");
    encoder_opt_.step(bundle_.encoder, grads);
    return terms.encoder_loss;
}

// ---------------------------------------------------------------------------
// Schedule

std::vector<PhasePlan> plan_phases(const TrainConfig& config)
{
    std::vector<int> resolutions = config.progressive_enabled()
                                       ? resolution_ladder(config.model.target_resolution)
                                       : std::vector<int>{config.model.target_resolution};
    std::vector<PhasePlan> plan;
    const std::size_t count = resolutions.size();
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
        const int batch = static_cast<int>(std::lround(config.batch_start + t * (config.batch_end - config.batch_start)));
        plan.push_back({resolutions[i], config.steps_per_phase, batch});
    }
    return plan;
}

double fade_in_at(const PhasePlan& phase, int step)
{
    if (phase.resolution <= 4)
        return 1.0;
    const double half = 0.5 * phase.steps;
    if (half <= 0.0)
        return 1.0;
    return std::min(1.0, static_cast<double>(step) / half);
}

Tensor<float> prepare_real_batch(const std::vector<const Image*>& images, const GrowthPhase& phase)
{
    if (images.empty())
        throw std::invalid_argument("empty real batch");
    const Image& first = *images.front();
    Tensor<float> t(Shape{static_cast<int>(images.size()), first.depth, first.height, first.width});
    std::size_t offset = 0;
    for (const Image* img : images) {
        if (!img->same_shape(first))
            throw std::invalid_argument("training stream mixes image shapes");
        std::copy(img->values.begin(), img->values.end(), t.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += img->size();
    }
    if (first.width != first.height || first.width < phase.resolution || first.width % phase.resolution != 0)
        throw std::invalid_argument("stream resolution " + std::to_string(first.width) +
                                    " incompatible with phase resolution " + std::to_string(phase.resolution));
    while (t.dim(2) > phase.resolution)
        t = kernels::avgpool2(t);
    if (phase.resolution > 4 && phase.fade_in < 1.0) {
        const Tensor<float> coarse = kernels::upsample2(kernels::avgpool2(t));
        const float a = static_cast<float>(phase.fade_in);
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = (1.0f - a) * coarse[i] + a * t[i];
    }
    return t;
}

TrainResult train(const TrainStream& stream, const TrainConfig& config, const TrainCallbacks& callbacks)
{
    ModelConfig mc = config.model;
    mc.seed = derive_seed(config.seed, 100);
    return train(init_bundle<float>(mc), stream, config, callbacks);
}

TrainResult train(ModelBundle initial, const TrainStream& stream, const TrainConfig& config,
                  const TrainCallbacks& callbacks)
{
    config.validate();
    if (stream.images.empty())
        throw std::invalid_argument("training stream is empty");
    const int target = config.model.target_resolution;
    if (initial.target_resolution() != target)
        throw std::invalid_argument("bundle target resolution differs from config");
    for (const auto& img : stream.images)
        if (img.width != target || img.height != target || img.depth != initial.image_channels())
            throw std::invalid_argument("stream image " + std::to_string(img.width) + "x" +
                                        std::to_string(img.height) + "x" + std::to_string(img.depth) +
                                        " does not match target " + std::to_string(target));

    const auto plan = plan_phases(config);
    if (plan.back().resolution != target)
        throw std::invalid_argument("phase schedule does not end at the target resolution");

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    Trainer trainer(std::move(initial), config);
    std::mt19937_64& rng = trainer.rng();
    std::uniform_int_distribution<std::size_t> pick(0, stream.images.size() - 1);
    TrainResult result;
    auto emit = [&](TrainLogRecord rec) {
        rec.wall_time = elapsed();
        if (callbacks.on_log)
            callbacks.on_log(rec);
        result.log.push_back(std::move(rec));
    };

    long global_step = 0;
    for (std::size_t pi = 0; pi < plan.size(); ++pi) {
        const PhasePlan& phase = plan[pi];
        trainer.set_phase({phase.resolution, fade_in_at(phase, 0)});
        trainer.reset_optimizers();
        if (callbacks.checkpoint)
            callbacks.checkpoint(trainer.bundle(), "phase_" + std::to_string(phase.resolution));
        for (int step = 0; step < phase.steps; ++step, ++global_step) {
            const GrowthPhase gp{phase.resolution, fade_in_at(phase, step)};
            trainer.set_phase(gp);
            CriticStepStats cs;
            for (int k = 0; k < config.critic_steps; ++k) {
                std::vector<const Image*> batch(static_cast<std::size_t>(phase.batch_size));
                for (auto& b : batch)
                    b = &stream.images[pick(rng)];
                const Tensor<float> real = prepare_real_batch(batch, gp);
                const PriorBatch z = sample_prior(static_cast<std::size_t>(phase.batch_size),
                                                  config.model.latent_dim, rng);
                cs = trainer.critic_step(real, z.unit);
            }
            const PriorBatch z =
                sample_prior(static_cast<std::size_t>(phase.batch_size), config.model.latent_dim, rng);
            const GeneratorStepStats gs = trainer.generator_encoder_step(z);
            if (step % config.log_every == 0 || step + 1 == phase.steps)
                emit({global_step, "gan", gp.resolution, gp.fade_in, phase.batch_size, cs.loss, cs.wasserstein,
                      cs.gradient_penalty, gs.generator_loss, gs.encoder_loss, 0.0});
        }
    }
    trainer.set_phase({target, 1.0});

    if (config.encoder_mode == EncoderMode::PostHoc) {
        const int steps = config.posthoc_encoder_steps > 0 ? config.posthoc_encoder_steps : config.steps_per_phase;
        const int batch = plan.back().batch_size;
        if (callbacks.checkpoint && steps > 0)
            callbacks.checkpoint(trainer.bundle(), "gan_complete");
        for (int step = 0; step < steps; ++step, ++global_step) {
            const PriorBatch z = sample_prior(static_cast<std::size_t>(batch), config.model.latent_dim, rng);
            const double e = trainer.encoder_step(z);
            if (step % config.log_every == 0 || step + 1 == steps)
                emit({global_step, "encoder", target, 1.0, batch, 0.0, 0.0, 0.0, 0.0, e, 0.0});
        }
    }

    result.bundle = trainer.release();
    result.bundle.frozen = true;
    if (callbacks.checkpoint)
        callbacks.checkpoint(result.bundle, "final");
    return result;
}

#define GANAD_INSTANTIATE_TRAINING(T)                                                                        \
    template Var<T> gradient_penalty<T>(const NetFn<T>&, const Tensor<T>&);                                 \
    template CriticLoss<T> critic_loss<T>(const NetFn<T>&, const Var<T>&, const Var<T>&, const Tensor<T>&, T); \
    template GeneratorEncoderLoss<T> generator_encoder_loss<T>(const NetFn<T>&, const NetFn<T>&,              \
                                                               const NetFn<T>&, const Var<T>&, const Var<T>&, \
                                                               EncoderMode, bool, T);                         \
    template class Adam<T>;                                                                                 \
    template std::vector<Var<T>> param_list<T>(const ParamSet<T>&);

GANAD_INSTANTIATE_TRAINING(float)
GANAD_INSTANTIATE_TRAINING(double)

}  // namespace ganad
