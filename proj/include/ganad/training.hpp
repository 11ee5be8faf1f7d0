#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ganad/data.hpp"
#include "ganad/model.hpp"

namespace ganad {

enum class EncoderMode {
    JointImageSpace,   // d_I, encoder trained with the generator
    JointLatentSpace,  // d_z, encoder trained with the generator
    PostHoc,           // GAN first, then the encoder alone against a frozen generator
};

std::string_view to_string(EncoderMode mode);
EncoderMode parse_encoder_mode(std::string_view text);

// Which prior vector d_z compares against: the raw Gaussian draw or the
// unit-length vector the generator consumed.
enum class LatentTarget { Raw, Unit };

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.0;
    double beta2 = 0.99;
    double epsilon = 1e-8;
};

struct TrainConfig {
    ModelConfig model;
    EncoderMode encoder_mode = EncoderMode::JointImageSpace;
    int critic_steps = 1;
    double gp_weight = 10.0;
    AdamConfig adam;
    int batch_start = 32;
    int batch_end = 32;
    int steps_per_phase = 500;
    std::optional<bool> progressive;  // default: on when target >= 16
    int posthoc_encoder_steps = 0;    // 0: same as steps_per_phase
    bool detach_inner_sample = false;
    LatentTarget latent_target = LatentTarget::Raw;
    double encoder_loss_weight = 1.0;
    int log_every = 10;
    std::uint64_t seed = 0;

    void validate() const;
    bool progressive_enabled() const;
};

struct TrainLogRecord {
    long step = 0;
    std::string stage;  // "gan" or "encoder"
    int resolution = 0;
    double fade_in = 1.0;
    int batch_size = 0;
    double critic_loss = 0.0;
    double wasserstein = 0.0;
    double gradient_penalty = 0.0;
    double generator_loss = 0.0;
    double encoder_loss = 0.0;
    double wall_time = 0.0;  // seconds since training start
};

// One CSV row per record; wall_time is the last column.
std::string train_log_header();
std::string train_log_row(const TrainLogRecord& r);

template <typename T>
using NetFn = std::function<Var<T>(const Var<T>&)>;

template <typename T>
struct CriticLoss {
    Var<T> loss;  // -(mean D(real) - mean D(fake)) + gp_weight * GP
    T wasserstein = T(0);
    T gradient_penalty = T(0);
};

// fake is treated as data (no gradient to the generator). eps holds one
// interpolation weight per sample: x_hat = eps * real + (1 - eps) * fake.
template <typename T>
CriticLoss<T> critic_loss(const NetFn<T>& critic, const Var<T>& real, const Var<T>& fake, const Tensor<T>& eps,
                          T gp_weight);

// Mean over samples of (||grad_x critic(x)||_2 - 1)^2, differentiable in the
// critic's parameters.
template <typename T>
Var<T> gradient_penalty(const NetFn<T>& critic, const Tensor<T>& points);

template <typename T>
struct GeneratorEncoderLoss {
    Var<T> total;
    T generator_loss = T(0);
    T encoder_loss = T(0);
};

// generator loss -mean D(G(z)) (skipped when critic is empty); encoder loss
// d_I = mean|G(z) - G(E(G(z)))| or d_z = mean|z_target - E(G(z))|.
template <typename T>
GeneratorEncoderLoss<T> generator_encoder_loss(const NetFn<T>& generator, const NetFn<T>& critic,
                                               const NetFn<T>& encoder, const Var<T>& z_input,
                                               const Var<T>& z_target, EncoderMode mode, bool detach_inner,
                                               T encoder_weight = T(1));

template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}
    // grads aligned with the map order of params.
    void step(ParamSet<T>& params, const std::vector<Var<T>>& grads);
    void reset();
    long steps() const { return t_; }

private:
    AdamConfig config_;
    std::map<std::string, Tensor<T>> m_, v_;
    long t_ = 0;
};

template <typename T>
std::vector<Var<T>> param_list(const ParamSet<T>& params);

struct CriticStepStats {
    double loss = 0.0;
    double wasserstein = 0.0;
    double gradient_penalty = 0.0;
};

struct GeneratorStepStats {
    double generator_loss = 0.0;
    double encoder_loss = 0.0;
};

// Owns the optimizer state for one training run over a single bundle.
class Trainer {
public:
    Trainer(ModelBundle bundle, TrainConfig config);

    // Updates θ_D only. real is NCHW at the current phase resolution, z_unit [N, N_z].
    CriticStepStats critic_step(const Tensor<float>& real, const Tensor<float>& z_unit);
    // Updates θ_G and θ_E (θ_G only in PostHoc mode).
    GeneratorStepStats generator_encoder_step(const PriorBatch& z);
    // PostHoc second stage: updates θ_E against the frozen generator.
    double encoder_step(const PriorBatch& z);

    void set_phase(const GrowthPhase& phase);
    void reset_optimizers();
    const ModelBundle& bundle() const { return bundle_; }
    ModelBundle release() { return std::move(bundle_); }
    std::mt19937_64& rng() { return rng_; }

private:
    ModelBundle bundle_;
    TrainConfig config_;
    Adam<float> critic_opt_, generator_opt_, encoder_opt_;
    std::mt19937_64 rng_;
};

struct PhasePlan {
    int resolution = 4;
    int steps = 0;
    int batch_size = 32;
};

std::vector<PhasePlan> plan_phases(const TrainConfig& config);
// Linear over the first half of the phase, 1 afterwards (always 1 for 4x4).
double fade_in_at(const PhasePlan& phase, int step);

// Real images at a phase: box-downsampled from the target resolution and,
// during fade-in, blended with their 2x coarser version.
Tensor<float> prepare_real_batch(const std::vector<const Image*>& images, const GrowthPhase& phase);

struct TrainResult {
    ModelBundle bundle;
    std::vector<TrainLogRecord> log;
};

struct TrainCallbacks {
    // Called with the bundle at the start of each phase and once at completion.
    std::function<void(const ModelBundle&, const std::string& tag)> checkpoint;
    std::function<void(const TrainLogRecord&)> on_log;
};

TrainResult train(const TrainStream& stream, const TrainConfig& config, const TrainCallbacks& callbacks = {});
TrainResult train(ModelBundle initial, const TrainStream& stream, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

}  // namespace ganad
