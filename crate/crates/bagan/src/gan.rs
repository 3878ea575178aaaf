//! Adversarial training: the class-balancing pipeline (autoencoder-seeded
//! generator, (n+1)-label discriminator, class-conditional latent sampling)
//! plus the two reference baselines it is compared against — an auxiliary-
//! classifier GAN and a plain minority-only GAN.
//!
//! All three trainers share one [`TrainConfig`] and the same per-purpose
//! random streams, so runs are reproducible bit-for-bit from (config, seed).

use crate::autoencoder::{self, train_autoencoder, Autoencoder};
use crate::config::TrainConfig;
use crate::dataset::{batch_iterator, Dataset};
use crate::error::{Error, Result};
use crate::latent::{fit_class_distributions, sample_uniform_classes, ConditionalLatentGenerator};
use crate::layers::{Activation, LayerSpec};
use crate::loss::{binary_cross_entropy, sparse_categorical_cross_entropy};
use crate::network::Network;
use crate::optim::{adam_step, AdamState};
use crate::rng::{self, tags};
use crate::tensor::Tensor;
use rand_chacha::ChaCha8Rng;

/// Network names inside a [`ModelBundle`].
pub const NET_GENERATOR: &str = "generator";
pub const NET_DISCRIMINATOR: &str = "discriminator";
pub const NET_DISC_BODY: &str = "disc_body";
pub const NET_DISC_REAL_FAKE: &str = "disc_real_fake";
pub const NET_DISC_CLASS: &str = "disc_class";

/// Which trainer produced a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanMethod {
    /// Autoencoder-initialized, class-conditional, (n+1)-label training.
    Bagan,
    /// Auxiliary-classifier baseline: real/fake head plus class head.
    Acgan,
    /// Unconditional baseline trained on minority-class images only.
    PlainGan,
}

impl GanMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            GanMethod::Bagan => "bagan",
            GanMethod::Acgan => "acgan",
            GanMethod::PlainGan => "gan",
        }
    }

    pub fn parse(text: &str) -> Result<GanMethod> {
        match text {
            "bagan" => Ok(GanMethod::Bagan),
            "acgan" => Ok(GanMethod::Acgan),
            "gan" => Ok(GanMethod::PlainGan),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected bagan, acgan, or gan)"
            ))),
        }
    }

    pub(crate) fn code(&self) -> u8 {
        match self {
            GanMethod::Bagan => 0,
            GanMethod::Acgan => 1,
            GanMethod::PlainGan => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<GanMethod> {
        match code {
            0 => Ok(GanMethod::Bagan),
            1 => Ok(GanMethod::Acgan),
            2 => Ok(GanMethod::PlainGan),
            other => Err(Error::InvalidArgument(format!("unknown method code {other}"))),
        }
    }
}

/// Everything a trainer produces: the networks, the class-conditional
/// latent model (when the method has one), and the loss histories.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub method: GanMethod,
    pub config: TrainConfig,
    pub image_shape: [usize; 3],
    pub n_classes: usize,
    /// The class the plain baseline was trained on; `None` for class-aware
    /// methods.
    pub minority_class: Option<usize>,
    pub networks: Vec<(String, Network<f32>)>,
    pub distributions: Option<ConditionalLatentGenerator>,
    /// Autoencoder pretraining epoch-mean l2 losses (empty for baselines).
    pub ae_history: Vec<f64>,
    /// Adversarial epoch-mean (discriminator, generator) losses.
    pub adv_history: Vec<(f64, f64)>,
}

impl ModelBundle {
    pub fn network(&self, name: &str) -> Result<&Network<f32>> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
            .ok_or_else(|| Error::InvalidArgument(format!("bundle has no `{name}` network")))
    }

    pub fn generator(&self) -> Result<&Network<f32>> {
        self.network(NET_GENERATOR)
    }
}

/// Number of fake images in one discriminator batch: round(B/(n+1)), so
/// fakes take the same share of the batch as each real class.
pub fn fake_count(batch_size: usize, n_classes: usize) -> Result<usize> {
    let f = (batch_size as f64 / (n_classes + 1) as f64).round() as usize;
    if f == 0 || f >= batch_size {
        return Err(Error::Config(format!(
            "batch_size {batch_size} cannot host {} real classes plus fakes",
            n_classes
        )));
    }
    Ok(f)
}

/// Discriminator stack for the (n+1)-label method: the encoder topology
/// followed by a dense softmax head over n real classes plus one fake label.
pub fn balancing_discriminator_specs(
    image_shape: [usize; 3],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<Vec<LayerSpec>> {
    let mut specs = autoencoder::encoder_specs(image_shape, cfg)?;
    specs.push(LayerSpec::Dense { fan_in: cfg.latent_dim, fan_out: n_classes + 1 });
    specs.push(LayerSpec::Activation(Activation::Softmax));
    Ok(specs)
}

/// Builds the adversarial pair from a pretrained autoencoder: the generator
/// starts as a bit-identical copy of the decoder, the discriminator's
/// feature layers start as bit-identical copies of the encoder, and only the
/// discriminator's (n+1)-way head is freshly initialized.
pub fn init_gan(
    ae: &Autoencoder,
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<(Network<f32>, Network<f32>)> {
    let generator = Network::from_params(
        autoencoder::decoder_specs(ae.image_shape, cfg)?,
        ae.decoder.params().clone(),
    )?;
    let d_specs = balancing_discriminator_specs(ae.image_shape, n_classes, cfg)?;
    let mut head_rng = rng::stream(cfg.seed, tags::HEAD_INIT);
    let mut discriminator = Network::init(d_specs, &mut head_rng);
    let encoder_layers = ae.encoder.params().layers();
    for (i, src) in encoder_layers.iter().enumerate() {
        discriminator.params_mut().layers_mut()[i] = src.clone();
    }
    Ok((generator, discriminator))
}

/// One discriminator update for the (n+1)-label method: `reals` keep their
/// class labels, `fakes` generated images get label n, sparse categorical
/// cross-entropy over all n+1 outputs. Returns the batch loss.
pub fn discriminator_step(
    discriminator: &mut Network<f32>,
    opt: &mut AdamState<f32>,
    generator: &Network<f32>,
    latents: &ConditionalLatentGenerator,
    reals: &Tensor<f32>,
    real_labels: &[usize],
    fakes: usize,
    label_rng: &mut ChaCha8Rng,
    latent_rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let n_classes = latents.n_classes();
    let fake_classes = sample_uniform_classes(n_classes, fakes, label_rng);
    let z = latents.sample(&fake_classes, latent_rng)?;
    let fake_images = generator.forward(&z)?;
    let batch = reals.concat_rows(&fake_images);
    let mut labels: Vec<usize> = real_labels.to_vec();
    labels.extend(std::iter::repeat(n_classes).take(fakes));
    let tape = discriminator.forward_recorded(&batch)?;
    let ce = sparse_categorical_cross_entropy(tape.output(), &labels)?;
    let (grads, _) = discriminator.backward_fused(&tape, &ce.dlogits)?;
    adam_step(discriminator.params_mut(), &grads, opt)?;
    Ok(ce.loss as f64)
}

/// One generator update for the (n+1)-label method: generated images are
/// scored against their own class labels — never the fake label — so the
/// generator is pushed toward class-typical images. Returns the batch loss.
pub fn generator_step(
    generator: &mut Network<f32>,
    opt: &mut AdamState<f32>,
    discriminator: &Network<f32>,
    latents: &ConditionalLatentGenerator,
    batch: usize,
    label_rng: &mut ChaCha8Rng,
    latent_rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let classes = sample_uniform_classes(latents.n_classes(), batch, label_rng);
    let z = latents.sample(&classes, latent_rng)?;
    let g_tape = generator.forward_recorded(&z)?;
    let d_tape = discriminator.forward_recorded(g_tape.output())?;
    let ce = sparse_categorical_cross_entropy(d_tape.output(), &classes)?;
    let (_, dx) = discriminator.backward_fused(&d_tape, &ce.dlogits)?;
    let (g_grads, _) = generator.backward(&g_tape, &dx)?;
    adam_step(generator.params_mut(), &g_grads, opt)?;
    Ok(ce.loss as f64)
}

fn adversarial_divergence(e: Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::Divergence { stage: "adversarial".into(), detail: what },
        other => other,
    }
}

fn check_epoch_losses(method: GanMethod, epoch: usize, d: f64, g: f64) -> Result<()> {
    if !d.is_finite() || !g.is_finite() {
        return Err(Error::Divergence {
            stage: format!("{} epoch {epoch}", method.as_str()),
            detail: format!("epoch-mean losses d={d} g={g}"),
        });
    }
    Ok(())
}

/// Full balancing pipeline: autoencoder pretraining, per-class latent fit,
/// weight-transfer initialization, then alternating (n+1)-label adversarial
/// updates (one generator step per discriminator step).
pub fn train_bagan(ds: &Dataset, cfg: &TrainConfig) -> Result<ModelBundle> {
    cfg.validate()?;
    let n = ds.n_classes();
    let fakes = fake_count(cfg.batch_size, n)?;
    let (ae, ae_history) = train_autoencoder(ds, cfg)?;
    let latents = fit_class_distributions(&ae, ds, cfg)?;
    let (mut generator, mut discriminator) = init_gan(&ae, n, cfg)?;
    // Fresh optimizer state for the adversarial phase: the transferred
    // weights arrive without their pretraining moments.
    let mut opt_g =
        AdamState::new(generator.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut opt_d =
        AdamState::new(discriminator.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut label_rng = rng::stream(cfg.seed, tags::FAKE_LABELS);
    let mut latent_rng = rng::stream(cfg.seed, tags::LATENT);
    let real_batch = cfg.batch_size - fakes;
    let mut adv_history = Vec::with_capacity(cfg.gan_epochs);
    for epoch in 0..cfg.gan_epochs {
        let epoch_seed = rng::derived_seed(cfg.seed, tags::GAN_BATCHES, epoch as u64);
        let (mut d_total, mut g_total, mut steps) = (0.0f64, 0.0f64, 0usize);
        for (reals, labels) in batch_iterator(ds, real_batch, epoch_seed)? {
            let d_loss = discriminator_step(
                &mut discriminator,
                &mut opt_d,
                &generator,
                &latents,
                &reals,
                &labels,
                fakes,
                &mut label_rng,
                &mut latent_rng,
            )
            .map_err(adversarial_divergence)?;
            let g_loss = generator_step(
                &mut generator,
                &mut opt_g,
                &discriminator,
                &latents,
                cfg.batch_size,
                &mut label_rng,
                &mut latent_rng,
            )
            .map_err(adversarial_divergence)?;
            d_total += d_loss;
            g_total += g_loss;
            steps += 1;
        }
        let (d_mean, g_mean) = (d_total / steps as f64, g_total / steps as f64);
        check_epoch_losses(GanMethod::Bagan, epoch, d_mean, g_mean)?;
        adv_history.push((d_mean, g_mean));
    }
    Ok(ModelBundle {
        method: GanMethod::Bagan,
        config: cfg.clone(),
        image_shape: ds.image_shape(),
        n_classes: n,
        minority_class: None,
        networks: vec![
            (NET_GENERATOR.to_string(), generator),
            (NET_DISCRIMINATOR.to_string(), discriminator),
        ],
        distributions: Some(latents),
        ae_history,
        adv_history,
    })
}

/// Latent code for the auxiliary-classifier baseline: standard normal with
/// the first `n_classes` entries replaced by a one-hot class indicator.
pub fn acgan_latent(
    labels: &[usize],
    latent_dim: usize,
    n_classes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor<f32>> {
    if latent_dim <= n_classes {
        return Err(Error::Config(format!(
            "latent_dim {latent_dim} must exceed n_classes {n_classes} for one-hot conditioning"
        )));
    }
    let mut row = vec![0.0f64; latent_dim];
    let mut out = Vec::with_capacity(labels.len() * latent_dim);
    for &label in labels {
        if label >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        rng::fill_standard_normal(rng, &mut row);
        for (i, v) in row.iter().enumerate() {
            out.push(if i < n_classes {
                if i == label {
                    1.0
                } else {
                    0.0
                }
            } else {
                *v as f32
            });
        }
    }
    Tensor::from_vec(&[labels.len(), latent_dim], out)
}

/// Auxiliary-classifier baseline, randomly initialized end to end. The
/// discriminator is a shared feature body with two dense heads: a sigmoid
/// real/fake head scored on all images and a softmax class head scored on
/// real images only. Both generator losses weigh equally.
pub fn train_acgan(ds: &Dataset, cfg: &TrainConfig) -> Result<ModelBundle> {
    cfg.validate()?;
    let n = ds.n_classes();
    if cfg.latent_dim <= n {
        return Err(Error::Config(format!(
            "latent_dim {} must exceed n_classes {n} for one-hot conditioning",
            cfg.latent_dim
        )));
    }
    let image_shape = ds.image_shape();
    let mut gen_rng = rng::stream(cfg.seed, tags::GEN_INIT);
    let mut generator = Network::init(autoencoder::decoder_specs(image_shape, cfg)?, &mut gen_rng);
    let mut disc_rng = rng::stream(cfg.seed, tags::DISC_INIT);
    let mut body = Network::init(autoencoder::encoder_specs(image_shape, cfg)?, &mut disc_rng);
    let mut head_rf = Network::init(
        vec![
            LayerSpec::Dense { fan_in: cfg.latent_dim, fan_out: 1 },
            LayerSpec::Activation(Activation::Sigmoid),
        ],
        &mut disc_rng,
    );
    let mut head_cls = Network::init(
        vec![
            LayerSpec::Dense { fan_in: cfg.latent_dim, fan_out: n },
            LayerSpec::Activation(Activation::Softmax),
        ],
        &mut disc_rng,
    );
    let mut opt_g =
        AdamState::new(generator.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut opt_body = AdamState::new(body.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut opt_rf =
        AdamState::new(head_rf.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut opt_cls =
        AdamState::new(head_cls.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut label_rng = rng::stream(cfg.seed, tags::FAKE_LABELS);
    let mut latent_rng = rng::stream(cfg.seed, tags::LATENT);
    let half = (cfg.batch_size / 2).max(1);
    let mut adv_history = Vec::with_capacity(cfg.gan_epochs);
    for epoch in 0..cfg.gan_epochs {
        let epoch_seed = rng::derived_seed(cfg.seed, tags::GAN_BATCHES, epoch as u64);
        let (mut d_total, mut g_total, mut steps) = (0.0f64, 0.0f64, 0usize);
        for (reals, real_labels) in batch_iterator(ds, half, epoch_seed)? {
            let r = reals.shape()[0];
            // Discriminator update: r reals + r fakes.
            let fake_classes = sample_uniform_classes(n, r, &mut label_rng);
            let z = acgan_latent(&fake_classes, cfg.latent_dim, n, &mut latent_rng)?;
            let fake_images = generator.forward(&z).map_err(adversarial_divergence)?;
            let batch = reals.concat_rows(&fake_images);
            let body_tape = body.forward_recorded(&batch).map_err(adversarial_divergence)?;
            let features = body_tape.output();
            let rf_tape = head_rf.forward_recorded(features).map_err(adversarial_divergence)?;
            let mut rf_targets = vec![1.0f32; r];
            rf_targets.extend(std::iter::repeat(0.0f32).take(r));
            let rf = binary_cross_entropy(rf_tape.output(), &rf_targets)?;
            let real_features = features.slice_rows(0, r);
            let cls_tape =
                head_cls.forward_recorded(&real_features).map_err(adversarial_divergence)?;
            let cls = sparse_categorical_cross_entropy(cls_tape.output(), &real_labels)?;
            let (rf_grads, dfeat_rf) = head_rf.backward_fused(&rf_tape, &rf.dlogits)?;
            let (cls_grads, dfeat_cls) = head_cls.backward_fused(&cls_tape, &cls.dlogits)?;
            let mut dfeat = dfeat_rf;
            {
                // Class-head gradient flows into the real rows only.
                let width = cfg.latent_dim;
                let dst = dfeat.data_mut();
                for (i, v) in dfeat_cls.data().iter().enumerate() {
                    dst[i] += v;
                }
                debug_assert_eq!(dfeat_cls.numel(), r * width);
            }
            let (body_grads, _) = body.backward(&body_tape, &dfeat)?;
            adam_step(head_rf.params_mut(), &rf_grads, &mut opt_rf)?;
            adam_step(head_cls.params_mut(), &cls_grads, &mut opt_cls)?;
            adam_step(body.params_mut(), &body_grads, &mut opt_body)?;
            let d_loss = (rf.loss + cls.loss) as f64;

            // Generator update: fool the real/fake head and satisfy the
            // class head, equally weighted.
            let g_classes = sample_uniform_classes(n, cfg.batch_size, &mut label_rng);
            let zg = acgan_latent(&g_classes, cfg.latent_dim, n, &mut latent_rng)?;
            let g_tape = generator.forward_recorded(&zg).map_err(adversarial_divergence)?;
            let gb_tape = body.forward_recorded(g_tape.output()).map_err(adversarial_divergence)?;
            let gf = gb_tape.output();
            let grf_tape = head_rf.forward_recorded(gf).map_err(adversarial_divergence)?;
            let grf = binary_cross_entropy(grf_tape.output(), &vec![1.0f32; cfg.batch_size])?;
            let gcls_tape = head_cls.forward_recorded(gf).map_err(adversarial_divergence)?;
            let gcls = sparse_categorical_cross_entropy(gcls_tape.output(), &g_classes)?;
            let (_, dgf_rf) = head_rf.backward_fused(&grf_tape, &grf.dlogits)?;
            let (_, dgf_cls) = head_cls.backward_fused(&gcls_tape, &gcls.dlogits)?;
            let mut dgf = dgf_rf;
            dgf.add_assign(&dgf_cls);
            let (_, dgx) = body.backward(&gb_tape, &dgf)?;
            let (g_grads, _) = generator.backward(&g_tape, &dgx)?;
            adam_step(generator.params_mut(), &g_grads, &mut opt_g)?;
            let g_loss = (grf.loss + gcls.loss) as f64;

            d_total += d_loss;
            g_total += g_loss;
            steps += 1;
        }
        let (d_mean, g_mean) = (d_total / steps as f64, g_total / steps as f64);
        check_epoch_losses(GanMethod::Acgan, epoch, d_mean, g_mean)?;
        adv_history.push((d_mean, g_mean));
    }
    Ok(ModelBundle {
        method: GanMethod::Acgan,
        config: cfg.clone(),
        image_shape,
        n_classes: n,
        minority_class: None,
        networks: vec![
            (NET_GENERATOR.to_string(), generator),
            (NET_DISC_BODY.to_string(), body),
            (NET_DISC_REAL_FAKE.to_string(), head_rf),
            (NET_DISC_CLASS.to_string(), head_cls),
        ],
        distributions: None,
        ae_history: Vec::new(),
        adv_history,
    })
}

/// Plain unconditional baseline: trains only on `minority_class` images with
/// a binary discriminator and z ~ N(0, I). Its step budget matches what the
/// class-aware methods get on the full dataset (same discriminator-step
/// count per epoch), so all three methods do comparable optimization work.
pub fn train_plain_gan(ds: &Dataset, minority_class: usize, cfg: &TrainConfig) -> Result<ModelBundle> {
    cfg.validate()?;
    if minority_class >= ds.n_classes() {
        return Err(Error::InvalidArgument(format!(
            "minority class {minority_class} out of range for {} classes",
            ds.n_classes()
        )));
    }
    let minority = ds.filter_class(minority_class)?;
    let image_shape = ds.image_shape();
    let mut gen_rng = rng::stream(cfg.seed, tags::GEN_INIT);
    let mut generator = Network::init(autoencoder::decoder_specs(image_shape, cfg)?, &mut gen_rng);
    let mut d_specs = autoencoder::encoder_specs(image_shape, cfg)?;
    d_specs.push(LayerSpec::Dense { fan_in: cfg.latent_dim, fan_out: 1 });
    d_specs.push(LayerSpec::Activation(Activation::Sigmoid));
    let mut disc_rng = rng::stream(cfg.seed, tags::DISC_INIT);
    let mut discriminator = Network::init(d_specs, &mut disc_rng);
    let mut opt_g =
        AdamState::new(generator.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut opt_d =
        AdamState::new(discriminator.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut latent_rng = rng::stream(cfg.seed, tags::PLAIN_LATENT);
    let half = (cfg.batch_size / 2).max(1);
    let steps_per_epoch = ds.len().div_ceil(cfg.batch_size).max(1);
    let mut adv_history = Vec::with_capacity(cfg.gan_epochs);
    let mut cycle: Vec<(Tensor<f32>, Vec<usize>)> = Vec::new();
    let mut cycle_pos = 0usize;
    let mut cycle_index = 0u64;
    for epoch in 0..cfg.gan_epochs {
        let (mut d_total, mut g_total) = (0.0f64, 0.0f64);
        for _ in 0..steps_per_epoch {
            if cycle_pos >= cycle.len() {
                // Refill with one fresh pass over the minority images.
                let seed = rng::derived_seed(cfg.seed, tags::GAN_BATCHES, cycle_index);
                cycle = batch_iterator(&minority, half, seed)?.collect();
                cycle_pos = 0;
                cycle_index += 1;
            }
            let (reals, _) = &cycle[cycle_pos];
            cycle_pos += 1;
            let r = reals.shape()[0];
            // Discriminator update: r reals + r fakes (half/half).
            let z = standard_latent(r, cfg.latent_dim, &mut latent_rng)?;
            let fakes = generator.forward(&z).map_err(adversarial_divergence)?;
            let batch = reals.concat_rows(&fakes);
            let mut targets = vec![1.0f32; r];
            targets.extend(std::iter::repeat(0.0f32).take(r));
            let tape = discriminator.forward_recorded(&batch).map_err(adversarial_divergence)?;
            let bce = binary_cross_entropy(tape.output(), &targets)?;
            let (d_grads, _) = discriminator.backward_fused(&tape, &bce.dlogits)?;
            adam_step(discriminator.params_mut(), &d_grads, &mut opt_d)?;

            // Generator update: a full batch of fakes labeled real.
            let zg = standard_latent(cfg.batch_size, cfg.latent_dim, &mut latent_rng)?;
            let g_tape = generator.forward_recorded(&zg).map_err(adversarial_divergence)?;
            let d_tape =
                discriminator.forward_recorded(g_tape.output()).map_err(adversarial_divergence)?;
            let g_bce =
                binary_cross_entropy(d_tape.output(), &vec![1.0f32; cfg.batch_size])?;
            let (_, dx) = discriminator.backward_fused(&d_tape, &g_bce.dlogits)?;
            let (g_grads, _) = generator.backward(&g_tape, &dx)?;
            adam_step(generator.params_mut(), &g_grads, &mut opt_g)?;

            d_total += bce.loss as f64;
            g_total += g_bce.loss as f64;
        }
        let (d_mean, g_mean) =
            (d_total / steps_per_epoch as f64, g_total / steps_per_epoch as f64);
        check_epoch_losses(GanMethod::PlainGan, epoch, d_mean, g_mean)?;
        adv_history.push((d_mean, g_mean));
    }
    Ok(ModelBundle {
        method: GanMethod::PlainGan,
        config: cfg.clone(),
        image_shape,
        n_classes: ds.n_classes(),
        minority_class: Some(minority_class),
        networks: vec![
            (NET_GENERATOR.to_string(), generator),
            (NET_DISCRIMINATOR.to_string(), discriminator),
        ],
        distributions: None,
        ae_history: Vec::new(),
        adv_history,
    })
}

/// z ~ N(0, I) rows for the unconditional baseline.
fn standard_latent(n: usize, latent_dim: usize, rng: &mut ChaCha8Rng) -> Result<Tensor<f32>> {
    let mut row = vec![0.0f64; latent_dim];
    let mut out = Vec::with_capacity(n * latent_dim);
    for _ in 0..n {
        rng::fill_standard_normal(rng, &mut row);
        out.extend(row.iter().map(|&v| v as f32));
    }
    Tensor::from_vec(&[n, latent_dim], out)
}

/// Upper bound on generation chunk size, to keep activation memory flat.
const GENERATE_CHUNK: usize = 256;

/// Generates one image per label with the bundle's method-specific latent
/// scheme. The plain baseline ignores label values (it models a single
/// class) but still produces `labels.len()` images. `labels` may be empty.
pub fn generate(bundle: &ModelBundle, labels: &[usize], seed: u64) -> Result<Tensor<f32>> {
    let generator = bundle.generator()?;
    let [c, h, w] = bundle.image_shape;
    let mut rng = rng::stream(seed, tags::GENERATE);
    let mut out = Tensor::zeros(&[0, c, h, w]);
    for chunk in labels.chunks(GENERATE_CHUNK) {
        let z = match bundle.method {
            GanMethod::Bagan => {
                let dists = bundle.distributions.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("bundle lacks latent distributions".into())
                })?;
                dists.sample(chunk, &mut rng)?
            }
            GanMethod::Acgan => {
                acgan_latent(chunk, bundle.config.latent_dim, bundle.n_classes, &mut rng)?
            }
            GanMethod::PlainGan => standard_latent(chunk.len(), bundle.config.latent_dim, &mut rng)?,
        };
        let images = generator.forward(&z)?;
        out = out.concat_rows(&images);
    }
    Ok(out)
}
