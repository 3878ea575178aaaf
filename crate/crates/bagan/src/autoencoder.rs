//! Unconditional autoencoder pretraining: encoder E (image → latent) and
//! decoder Δ (latent → image) trained jointly with l2 reconstruction loss on
//! all classes, never reading labels. Δ later seeds the generator and E the
//! discriminator's feature extractor.

use crate::config::TrainConfig;
use crate::dataset::{batch_iterator, Dataset};
use crate::error::{Error, Result};
use crate::layers::{Activation, LayerSpec};
use crate::loss::l2_loss;
use crate::network::Network;
use crate::optim::{adam_step, AdamState};
use crate::rng::{self, tags};
use crate::tensor::Tensor;

/// Stops autoencoder training early when the epoch-mean loss improves by
/// less than this amount.
pub const EARLY_STOP_DELTA: f64 = 1e-5;

/// Encoder layer stack for the given image shape.
///
/// Images of at least 8×8 (sides divisible by 4) get two stride-2
/// convolutions plus a dense projection; 1×1 "images" (synthetic 2-D points)
/// get a purely dense stack so the same pipeline covers both.
pub fn encoder_specs(image_shape: [usize; 3], cfg: &TrainConfig) -> Result<Vec<LayerSpec>> {
    let [c, h, w] = image_shape;
    if h >= 8 && w >= 8 {
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::InvalidArgument(format!(
                "convolutional stack needs sides divisible by 4, got {h}x{w}"
            )));
        }
        let (c1, c2) = (cfg.conv_channels.0, cfg.conv_channels.1);
        Ok(vec![
            LayerSpec::Conv2d { in_ch: c, out_ch: c1, kernel: 4, stride: 2, padding: 1 },
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::Conv2d { in_ch: c1, out_ch: c2, kernel: 4, stride: 2, padding: 1 },
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::Flatten,
            LayerSpec::Dense { fan_in: c2 * (h / 4) * (w / 4), fan_out: cfg.latent_dim },
        ])
    } else if h == 1 && w == 1 {
        Ok(vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { fan_in: c, fan_out: cfg.dense_hidden },
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::Dense { fan_in: cfg.dense_hidden, fan_out: cfg.latent_dim },
        ])
    } else {
        Err(Error::InvalidArgument(format!(
            "unsupported image shape {image_shape:?}: need 1x1 vectors or >=8x8 images"
        )))
    }
}

/// Decoder layer stack mirroring [`encoder_specs`], with a tanh output in
/// [−1, 1].
pub fn decoder_specs(image_shape: [usize; 3], cfg: &TrainConfig) -> Result<Vec<LayerSpec>> {
    let [c, h, w] = image_shape;
    if h >= 8 && w >= 8 {
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::InvalidArgument(format!(
                "convolutional stack needs sides divisible by 4, got {h}x{w}"
            )));
        }
        let (c1, c2) = (cfg.conv_channels.0, cfg.conv_channels.1);
        Ok(vec![
            LayerSpec::Dense { fan_in: cfg.latent_dim, fan_out: c2 * (h / 4) * (w / 4) },
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::Reshape { dims: vec![c2, h / 4, w / 4] },
            LayerSpec::TConv2d { in_ch: c2, out_ch: c1, kernel: 4, stride: 2, padding: 1 },
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::TConv2d { in_ch: c1, out_ch: c, kernel: 4, stride: 2, padding: 1 },
            LayerSpec::Activation(Activation::Tanh),
        ])
    } else if h == 1 && w == 1 {
        Ok(vec![
            LayerSpec::Dense { fan_in: cfg.latent_dim, fan_out: cfg.dense_hidden },
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::Dense { fan_in: cfg.dense_hidden, fan_out: c },
            LayerSpec::Activation(Activation::Tanh),
            LayerSpec::Reshape { dims: vec![c, 1, 1] },
        ])
    } else {
        Err(Error::InvalidArgument(format!(
            "unsupported image shape {image_shape:?}: need 1x1 vectors or >=8x8 images"
        )))
    }
}

/// Trained encoder/decoder pair.
#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub encoder: Network<f32>,
    pub decoder: Network<f32>,
    pub latent_dim: usize,
    pub image_shape: [usize; 3],
}

impl Autoencoder {
    /// Freshly initialized (untrained) autoencoder for the given shape.
    pub fn init(image_shape: [usize; 3], cfg: &TrainConfig) -> Result<Autoencoder> {
        let mut rng = rng::stream(cfg.seed, tags::AE_INIT);
        let encoder = Network::init(encoder_specs(image_shape, cfg)?, &mut rng);
        let decoder = Network::init(decoder_specs(image_shape, cfg)?, &mut rng);
        Ok(Autoencoder { encoder, decoder, latent_dim: cfg.latent_dim, image_shape })
    }

    /// Maps images `[N, C, H, W]` to latent rows `[N, latent_dim]`.
    pub fn encode(&self, images: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.encoder.forward(images)
    }

    /// Maps latent rows `[N, latent_dim]` to images in [−1, 1].
    pub fn decode(&self, latents: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.decoder.forward(latents)
    }
}

/// Trains E and Δ jointly on all images (labels unread) with l2 loss.
/// Returns the autoencoder and the epoch-mean loss history.
pub fn train_autoencoder(ds: &Dataset, cfg: &TrainConfig) -> Result<(Autoencoder, Vec<f64>)> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let mut ae = Autoencoder::init(ds.image_shape(), cfg)?;
    let mut opt_e = AdamState::new(ae.encoder.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut opt_d = AdamState::new(ae.decoder.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut history = Vec::with_capacity(cfg.ae_epochs);
    for epoch in 0..cfg.ae_epochs {
        let mut total = 0.0f64;
        let mut batches = 0usize;
        let epoch_seed = rng::derived_seed(cfg.seed, tags::BATCHES, epoch as u64);
        for (images, _labels) in batch_iterator(ds, cfg.ae_batch_size, epoch_seed)? {
            let enc_tape = ae.encoder.forward_recorded(&images).map_err(divergence)?;
            let dec_tape = ae.decoder.forward_recorded(enc_tape.output()).map_err(divergence)?;
            let (loss, dout) = l2_loss(dec_tape.output(), &images).map_err(divergence)?;
            let (dec_grads, dlatent) = ae.decoder.backward(&dec_tape, &dout).map_err(divergence)?;
            let (enc_grads, _) = ae.encoder.backward(&enc_tape, &dlatent).map_err(divergence)?;
            adam_step(ae.decoder.params_mut(), &dec_grads, &mut opt_d).map_err(divergence)?;
            adam_step(ae.encoder.params_mut(), &enc_grads, &mut opt_e).map_err(divergence)?;
            total += loss as f64;
            batches += 1;
        }
        let mean = total / batches as f64;
        let improved = history.last().map_or(f64::INFINITY, |prev| prev - mean);
        history.push(mean);
        if improved < EARLY_STOP_DELTA && epoch > 0 {
            break;
        }
    }
    Ok((ae, history))
}

fn divergence(e: Error) -> Error {
    match e {
        Error::NonFinite(what) => {
            Error::Divergence { stage: "autoencoder".into(), detail: what }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_mixture;

    fn vector_config(seed: u64) -> TrainConfig {
        TrainConfig { latent_dim: 4, dense_hidden: 16, ae_epochs: 300, ae_batch_size: 4, seed, ..TrainConfig::default() }
    }

    #[test]
    fn training_reduces_epoch_mean_loss() {
        let ds = synth_mixture(4, &[12; 4], 0.05, 3).unwrap();
        let cfg = TrainConfig { ae_epochs: 30, ..vector_config(7) };
        let (_, history) = train_autoencoder(&ds, &cfg).unwrap();
        assert!(history.len() >= 2);
        assert!(
            history.last().unwrap() < history.first().unwrap(),
            "final epoch loss {:?} not below first {:?}",
            history.last(),
            history.first()
        );
    }

    #[test]
    fn single_point_memorization_reconstructs_tightly() {
        // Two images, many epochs, brisk step size → reconstruction l2 below 1e-2.
        let ds = synth_mixture(2, &[1, 1], 0.01, 5).unwrap();
        let cfg = TrainConfig { learning_rate: 1e-2, ..vector_config(11) };
        let (ae, _) = train_autoencoder(&ds, &cfg).unwrap();
        let (images, _) = ds.gather(&[0, 1]);
        let recon = ae.decode(&ae.encode(&images).unwrap()).unwrap();
        let (loss, _) = l2_loss(&recon, &images).unwrap();
        assert!(loss < 1e-2, "memorization l2 {loss}");
    }

    #[test]
    fn same_seed_trains_identical_weights() {
        let ds = synth_mixture(3, &[8; 3], 0.05, 2).unwrap();
        let cfg = TrainConfig { ae_epochs: 5, ..vector_config(9) };
        let (a, ha) = train_autoencoder(&ds, &cfg).unwrap();
        let (b, hb) = train_autoencoder(&ds, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.encoder.params(), b.encoder.params());
        assert_eq!(a.decoder.params(), b.decoder.params());
    }

    #[test]
    fn label_permutation_does_not_change_training() {
        // Same images, shuffled labels → identical autoencoder (labels unread).
        let ds = synth_mixture(2, &[6, 6], 0.05, 4).unwrap();
        let (imgs, _, shape, n) = ds.raw_parts();
        let mut swapped_labels: Vec<u16> = Vec::new();
        for i in 0..ds.len() {
            swapped_labels.push((1 - ds.label(i)) as u16);
        }
        let ds2 = Dataset::from_raw_parts(
            imgs.to_vec(),
            swapped_labels,
            shape,
            n,
            ds.provenance().clone(),
        )
        .unwrap();
        let cfg = TrainConfig { ae_epochs: 4, ..vector_config(6) };
        let (a, _) = train_autoencoder(&ds, &cfg).unwrap();
        let (b, _) = train_autoencoder(&ds2, &cfg).unwrap();
        assert_eq!(a.encoder.params(), b.encoder.params());
    }

    #[test]
    fn decode_output_stays_in_tanh_range() {
        let ds = synth_mixture(3, &[4; 3], 0.05, 8).unwrap();
        let cfg = TrainConfig { ae_epochs: 2, ..vector_config(3) };
        let (ae, _) = train_autoencoder(&ds, &cfg).unwrap();
        let z = Tensor::full(&[5, cfg.latent_dim], 3.0);
        let out = ae.decode(&z).unwrap();
        assert_eq!(out.shape(), &[5, 2, 1, 1]);
        assert!(out.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn encode_produces_latent_rows() {
        let ds = synth_mixture(2, &[3, 3], 0.05, 8).unwrap();
        let cfg = vector_config(1);
        let ae = Autoencoder::init(ds.image_shape(), &cfg).unwrap();
        let (images, _) = ds.gather(&[0, 1, 2]);
        let z = ae.encode(&images).unwrap();
        assert_eq!(z.shape(), &[3, cfg.latent_dim]);
    }
}
