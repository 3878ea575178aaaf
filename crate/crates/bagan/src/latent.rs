//! Class-conditional latent modeling: each class c gets a Gaussian
//! N(μ_c, Σ_c) fitted in f64 to the encoder's latent codes for that class.
//! Sampling draws ε ~ N(0, I) and returns μ + L·ε where L·Lᵀ = Σ + λI is a
//! Cholesky factor, with an escalating jitter λ and a diagonal fallback for
//! badly conditioned fits.

use crate::autoencoder::Autoencoder;
use crate::config::TrainConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::tensor::Tensor;
use rand_chacha::ChaCha8Rng;

/// Largest jitter tried before falling back to a diagonal factor.
pub const MAX_JITTER: f64 = 1e-1;

/// Batch size used when encoding a class's images for fitting.
const ENCODE_BATCH: usize = 256;

/// Gaussian fitted to one class's latent codes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLatentDistribution {
    /// Mean latent vector, length d.
    pub mean: Vec<f64>,
    /// Covariance, d×d row-major, unbiased (N−1) normalization; zero when
    /// the class has a single sample.
    pub covariance: Vec<f64>,
    /// Lower-triangular factor with L·Lᵀ = Σ + λI (d×d row-major), or the
    /// diagonal fallback factor.
    pub chol: Vec<f64>,
    /// Jitter λ that made the factorization succeed (0 when none needed).
    pub jitter: f64,
    /// Number of latent codes the fit saw.
    pub sample_count: u64,
    /// True when no jitter up to [`MAX_JITTER`] produced a valid factor and
    /// the factor is diag(√max(Σ_ii, jitter floor)) instead.
    pub diagonal_fallback: bool,
}

/// Per-class latent Gaussians for one trained encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLatentGenerator {
    pub latent_dim: usize,
    pub classes: Vec<ClassLatentDistribution>,
}

/// Plain Cholesky–Banachiewicz; `None` when a pivot is non-positive or the
/// arithmetic leaves the finite range.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * d + i] = sum.sqrt();
            } else {
                let pivot = l[j * d + j];
                let v = sum / pivot;
                if !v.is_finite() {
                    return None;
                }
                l[i * d + j] = v;
            }
        }
    }
    Some(l)
}

/// Recomputes the factor recorded by a fit: Cholesky of Σ + λI, or the
/// diagonal fallback. Deterministic, so reloading a stored (Σ, λ, fallback)
/// triple reproduces L bit-for-bit.
pub(crate) fn factorize(
    covariance: &[f64],
    d: usize,
    jitter: f64,
    diagonal_fallback: bool,
    jitter_floor: f64,
) -> Result<Vec<f64>> {
    if diagonal_fallback {
        let mut l = vec![0.0f64; d * d];
        for i in 0..d {
            l[i * d + i] = covariance[i * d + i].max(jitter_floor).sqrt();
        }
        return Ok(l);
    }
    let mut a = covariance.to_vec();
    for i in 0..d {
        a[i * d + i] += jitter;
    }
    cholesky(&a, d).ok_or_else(|| {
        Error::NonFinite(format!("covariance factorization failed at recorded jitter {jitter}"))
    })
}

/// Fits one Gaussian to `n` rows of length `d` (row-major), escalating the
/// jitter from 0 through `initial_jitter`×10ᵏ up to [`MAX_JITTER`] and
/// falling back to a diagonal factor beyond that.
pub fn fit_rows(
    rows: &[f64],
    n: usize,
    d: usize,
    initial_jitter: f64,
    diagonal_covariance: bool,
) -> Result<ClassLatentDistribution> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot fit a distribution to zero samples".into()));
    }
    if rows.len() != n * d {
        return Err(Error::ShapeMismatch(format!(
            "expected {n}×{d} = {} values, got {}",
            n * d,
            rows.len()
        )));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("latent codes contain non-finite values".into()));
    }
    let mut mean = vec![0.0f64; d];
    for row in rows.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut covariance = vec![0.0f64; d * d];
    if n > 1 {
        let mut dev = vec![0.0f64; d];
        for row in rows.chunks_exact(d) {
            for (dv, (v, m)) in dev.iter_mut().zip(row.iter().zip(&mean)) {
                *dv = v - m;
            }
            for i in 0..d {
                let di = dev[i];
                if di == 0.0 {
                    continue;
                }
                for j in 0..d {
                    covariance[i * d + j] += di * dev[j];
                }
            }
        }
        let denom = (n - 1) as f64;
        for v in covariance.iter_mut() {
            *v /= denom;
        }
    }
    if diagonal_covariance {
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    covariance[i * d + j] = 0.0;
                }
            }
        }
    }
    // Jitter schedule: exact Σ first, then initial_jitter ×10 per step.
    let mut jitters = vec![0.0f64];
    let mut j = initial_jitter;
    while j <= MAX_JITTER * (1.0 + 1e-12) {
        jitters.push(j);
        j *= 10.0;
    }
    for &jitter in &jitters {
        if let Ok(chol) = factorize(&covariance, d, jitter, false, initial_jitter) {
            return Ok(ClassLatentDistribution {
                mean,
                covariance,
                chol,
                jitter,
                sample_count: n as u64,
                diagonal_fallback: false,
            });
        }
    }
    let chol = factorize(&covariance, d, 0.0, true, initial_jitter)?;
    Ok(ClassLatentDistribution {
        mean,
        covariance,
        chol,
        jitter: 0.0,
        sample_count: n as u64,
        diagonal_fallback: true,
    })
}

/// Encodes every class's images and fits one Gaussian per class.
pub fn fit_class_distributions(
    ae: &Autoencoder,
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<ConditionalLatentGenerator> {
    let d = ae.latent_dim;
    let mut classes = Vec::with_capacity(ds.n_classes());
    for class in 0..ds.n_classes() {
        let indices = ds.class_indices(class);
        if indices.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "class {class} has no samples; cannot fit its latent distribution"
            )));
        }
        let mut rows = Vec::with_capacity(indices.len() * d);
        for chunk in indices.chunks(ENCODE_BATCH) {
            let (images, _) = ds.gather(chunk);
            let latents = ae.encode(&images)?;
            rows.extend(latents.data().iter().map(|&v| v as f64));
        }
        let fitted = fit_rows(&rows, indices.len(), d, cfg.jitter, cfg.diagonal_covariance)?;
        if fitted.diagonal_fallback {
            eprintln!(
                "warning: class {class} covariance not factorizable up to jitter {MAX_JITTER}; \
                 using diagonal fallback"
            );
        }
        classes.push(fitted);
    }
    Ok(ConditionalLatentGenerator { latent_dim: d, classes })
}

impl ConditionalLatentGenerator {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Draws one latent row per label: z = μ_label + L_label·ε.
    pub fn sample(&self, labels: &[usize], rng: &mut ChaCha8Rng) -> Result<Tensor<f32>> {
        let d = self.latent_dim;
        let mut out = Vec::with_capacity(labels.len() * d);
        let mut eps = vec![0.0f64; d];
        for &label in labels {
            let dist = self.classes.get(label).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "label {label} out of range for {} classes",
                    self.classes.len()
                ))
            })?;
            rng::fill_standard_normal(rng, &mut eps);
            for i in 0..d {
                let mut z = dist.mean[i];
                // L is lower-triangular: only j ≤ i contributes.
                for j in 0..=i {
                    z += dist.chol[i * d + j] * eps[j];
                }
                out.push(z as f32);
            }
        }
        Tensor::from_vec(&[labels.len(), d], out)
    }
}

/// Draws `m` class labels uniformly from `0..n_classes`.
pub fn sample_uniform_classes(n_classes: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::Rng;
    (0..m).map(|_| rng.random_range(0..n_classes)).collect()
}

/// `m` labels split as evenly as possible across classes (class-stratified),
/// in class order: used by evaluation protocols that need exact per-class
/// counts.
pub fn stratified_classes(n_classes: usize, per_class: usize) -> Vec<usize> {
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for c in 0..n_classes {
        labels.extend(std::iter::repeat(c).take(per_class));
    }
    labels
}
