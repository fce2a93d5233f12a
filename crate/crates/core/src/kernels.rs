//! Reference encoder kernels in f64: rotary position embeddings (1D and the
//! blocked 2D split), patch-grid coordinates, slice sampling, prompt mixing
//! and the two-layer projector with its analytic gradient.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::normal_cdf;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("head dimension {0} must be a positive multiple of {1}")]
    BadHeadDim(usize, usize),
    #[error("non-finite value in input")]
    NonFiniteInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RopeConfig {
    pub head_dim: usize,
    pub base: f64,
}

impl RopeConfig {
    pub fn new(head_dim: usize) -> Self {
        Self { head_dim, base: 10_000.0 }
    }

    /// θ_i = base^(−2i/d) for i = 0..d/2.
    pub fn frequencies(&self) -> Vec<f64> {
        let d = self.head_dim as f64;
        (0..self.head_dim / 2).map(|i| self.base.powf(-2.0 * i as f64 / d)).collect()
    }
}

fn rotate_pairs(vec: &[f64], position: f64, freqs: &[f64], out: &mut [f64]) {
    for (i, theta) in freqs.iter().enumerate() {
        let (s, c) = (position * theta).sin_cos();
        let (x, y) = (vec[2 * i], vec[2 * i + 1]);
        out[2 * i] = x * c - y * s;
        out[2 * i + 1] = x * s + y * c;
    }
}

/// Rotates each adjacent pair (2i, 2i+1) by `position · θ_i`.
pub fn rope_rotate(vec: &[f64], position: i64, cfg: &RopeConfig) -> Result<Vec<f64>, KernelError> {
    if cfg.head_dim == 0 || !cfg.head_dim.is_multiple_of(2) {
        return Err(KernelError::BadHeadDim(cfg.head_dim, 2));
    }
    if vec.len() != cfg.head_dim {
        return Err(KernelError::DimensionMismatch { expected: cfg.head_dim, got: vec.len() });
    }
    let mut out = vec![0.0; vec.len()];
    rotate_pairs(vec, position as f64, &cfg.frequencies(), &mut out);
    Ok(out)
}

/// Blocked 2D rotation: dims [0, d/2) encode the row `m`, dims [d/2, d)
/// the column `n`, each rotated as a d/2-dimensional 1D embedding.
pub fn rope_2d(vec: &[f64], coords: (i64, i64), cfg: &RopeConfig) -> Result<Vec<f64>, KernelError> {
    if cfg.head_dim == 0 || !cfg.head_dim.is_multiple_of(4) {
        return Err(KernelError::BadHeadDim(cfg.head_dim, 4));
    }
    if vec.len() != cfg.head_dim {
        return Err(KernelError::DimensionMismatch { expected: cfg.head_dim, got: vec.len() });
    }
    let half = cfg.head_dim / 2;
    let sub = RopeConfig { head_dim: half, base: cfg.base };
    let mut out = rope_rotate(&vec[..half], coords.0, &sub)?;
    out.extend(rope_rotate(&vec[half..], coords.1, &sub)?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major (row, col) of patch `k`.
    pub fn coord(&self, k: usize) -> Option<(usize, usize)> {
        (k < self.len()).then(|| (k / self.cols, k % self.cols))
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(|k| (k / self.cols, k % self.cols))
    }
}

/// All slices when the scan has at most `n`, otherwise `floor(k·S/N)` for
/// k = 0..N.
pub fn sample_slices(scan_length: usize, n: usize) -> Vec<usize> {
    if scan_length <= n {
        return (0..scan_length).collect();
    }
    (0..n).map(|k| ((k as u128 * scan_length as u128) / n as u128) as usize).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    WithDiagnosis,
    Without,
}

/// Number of items that get the diagnosis variant: n·a/(a+b) rounded half up.
pub fn with_diagnosis_count(n: usize, ratio: (u32, u32)) -> usize {
    let (a, b) = (ratio.0 as u128, ratio.1 as u128);
    ((2 * n as u128 * a + a + b) / (2 * (a + b))) as usize
}

/// Assigns prompt variants so that exactly `with_diagnosis_count` items get
/// the diagnosis; which ones is a seeded shuffle. Output keeps input order.
pub fn mix_prompts<T: Clone>(ids: &[T], ratio: (u32, u32), seed: u64) -> Vec<(T, PromptVariant)> {
    assert!(ratio.0 > 0 && ratio.1 > 0, "ratio parts must be positive");
    let k = with_diagnosis_count(ids.len(), ratio);
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut variant = vec![PromptVariant::Without; ids.len()];
    for &i in &order[..k] {
        variant[i] = PromptVariant::WithDiagnosis;
    }
    ids.iter().cloned().zip(variant).collect()
}

/// Instruction text for a variant; the diagnosis field is dropped entirely
/// for the `Without` variant.
pub fn prompt_text(variant: PromptVariant, clinical_diagnosis: &str) -> String {
    const TASK: &str =
        "Provide a complete clinical CBCT report integrating findings and impression based on this 3D medical image";
    match variant {
        PromptVariant::WithDiagnosis => format!("Clinical Diagnosis: {clinical_diagnosis}. {TASK}"),
        PromptVariant::Without => TASK.to_string(),
    }
}

// ---- projector ----

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gelu {
    /// u · Φ(u)
    #[default]
    Exact,
    Tanh,
}

const TANH_C: f64 = 0.044_715;

impl Gelu {
    pub fn value(self, u: f64) -> f64 {
        match self {
            Gelu::Exact => u * normal_cdf(u),
            Gelu::Tanh => {
                let k = (2.0 / std::f64::consts::PI).sqrt();
                0.5 * u * (1.0 + (k * (u + TANH_C * u * u * u)).tanh())
            }
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Gelu::Exact => {
                let pdf = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
                normal_cdf(u) + u * pdf
            }
            Gelu::Tanh => {
                let k = (2.0 / std::f64::consts::PI).sqrt();
                let t = (k * (u + TANH_C * u * u * u)).tanh();
                0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * k * (1.0 + 3.0 * TANH_C * u * u)
            }
        }
    }
}

/// g(x) = W2 · GELU(W1 x + b1) + b2, applied to each row of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorParams {
    /// [h × d_v]
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// [d × h]
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Vision feature width of the reference encoder.
pub const VISION_DIM: usize = 1152;

impl ProjectorParams {
    pub fn zeros(d_v: usize, h: usize, d: usize) -> Self {
        Self {
            w1: Array2::zeros((h, d_v)),
            b1: Array1::zeros(h),
            w2: Array2::zeros((d, h)),
            b2: Array1::zeros(d),
        }
    }

    /// Entries drawn from N(0, scale²).
    pub fn random(d_v: usize, h: usize, d: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect() };
        Self {
            w1: Array2::from_shape_vec((h, d_v), draw(h * d_v)).expect("shape"),
            b1: Array1::from(draw(h)),
            w2: Array2::from_shape_vec((d, h), draw(d * h)).expect("shape"),
            b2: Array1::from(draw(d)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.nrows()
    }

    fn check(&self) -> Result<(), KernelError> {
        let h = self.hidden_dim();
        if self.b1.len() != h {
            return Err(KernelError::DimensionMismatch { expected: h, got: self.b1.len() });
        }
        if self.w2.ncols() != h {
            return Err(KernelError::DimensionMismatch { expected: h, got: self.w2.ncols() });
        }
        if self.b2.len() != self.output_dim() {
            return Err(KernelError::DimensionMismatch { expected: self.output_dim(), got: self.b2.len() });
        }
        let finite = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).all(|v| v.is_finite());
        if !finite {
            return Err(KernelError::NonFiniteInput);
        }
        Ok(())
    }
}

fn check_input(x: &Array2<f64>, params: &ProjectorParams) -> Result<(), KernelError> {
    params.check()?;
    if x.ncols() != params.input_dim() {
        return Err(KernelError::DimensionMismatch { expected: params.input_dim(), got: x.ncols() });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(KernelError::NonFiniteInput);
    }
    Ok(())
}

/// Pre-activations [N_v × h].
fn hidden(x: &Array2<f64>, params: &ProjectorParams) -> Array2<f64> {
    x.dot(&params.w1.t()) + &params.b1
}

/// Maps [N_v × d_v] vision features to [N_v × d] decoder embeddings.
pub fn projector_forward(x: &Array2<f64>, params: &ProjectorParams, gelu: Gelu) -> Result<Array2<f64>, KernelError> {
    check_input(x, params)?;
    let a = hidden(x, params).mapv(|u| gelu.value(u));
    Ok(a.dot(&params.w2.t()) + &params.b2)
}

/// Gradients of a scalar loss with respect to the input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorGrads {
    pub x: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Back-propagates `upstream` = ∂L/∂output [N_v × d].
pub fn projector_backward(
    x: &Array2<f64>,
    params: &ProjectorParams,
    gelu: Gelu,
    upstream: &Array2<f64>,
) -> Result<ProjectorGrads, KernelError> {
    check_input(x, params)?;
    if upstream.dim() != (x.nrows(), params.output_dim()) {
        return Err(KernelError::DimensionMismatch {
            expected: x.nrows() * params.output_dim(),
            got: upstream.len(),
        });
    }
    let z = hidden(x, params);
    let a = z.mapv(|u| gelu.value(u));
    let da = upstream.dot(&params.w2);
    let dz = da * z.mapv(|u| gelu.derivative(u));
    Ok(ProjectorGrads {
        x: dz.dot(&params.w1),
        w1: dz.t().dot(x),
        b1: dz.sum_axis(Axis(0)),
        w2: upstream.t().dot(&a),
        b2: upstream.sum_axis(Axis(0)),
    })
}

/// |a − n| / max(|a|, |n|, 1e-7).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Largest relative error between the analytic gradient and central finite
/// differences of L = Σ output ⊙ R, over every input and parameter entry.
pub fn gradient_check(seed: u64, shape: (usize, usize, usize, usize), step: f64, gelu: Gelu) -> f64 {
    let (n_v, d_v, h, d) = shape;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ProjectorParams::random(d_v, h, d, 0.7, &mut rng);
    let x = Array2::from_shape_fn((n_v, d_v), |_| rng.sample::<f64, _>(StandardNormal));
    let r = Array2::from_shape_fn((n_v, d), |_| rng.sample::<f64, _>(StandardNormal));
    let loss = |x: &Array2<f64>, p: &ProjectorParams| -> f64 {
        (projector_forward(x, p, gelu).expect("valid shapes") * &r).sum()
    };
    let grads = projector_backward(&x, &params, gelu, &r).expect("valid shapes");
    let mut worst: f64 = 0.0;

    let mut probe = |analytic: f64, perturb: &dyn Fn(f64) -> f64| {
        let numeric = (perturb(step) - perturb(-step)) / (2.0 * step);
        worst = worst.max(relative_error(analytic, numeric));
    };
    for (idx, g) in grads.x.indexed_iter() {
        probe(*g, &|e| {
            let mut xx = x.clone();
            xx[idx] += e;
            loss(&xx, &params)
        });
    }
    for (idx, g) in grads.w1.indexed_iter() {
        probe(*g, &|e| {
            let mut p = params.clone();
            p.w1[idx] += e;
            loss(&x, &p)
        });
    }
    for (i, g) in grads.b1.indexed_iter() {
        probe(*g, &|e| {
            let mut p = params.clone();
            p.b1[i] += e;
            loss(&x, &p)
        });
    }
    for (idx, g) in grads.w2.indexed_iter() {
        probe(*g, &|e| {
            let mut p = params.clone();
            p.w2[idx] += e;
            loss(&x, &p)
        });
    }
    for (i, g) in grads.b2.indexed_iter() {
        probe(*g, &|e| {
            let mut p = params.clone();
            p.b2[i] += e;
            loss(&x, &p)
        });
    }
    worst
}

// ---- self test ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub observed: f64,
    pub tolerance: f64,
}

fn check(name: &str, observed: f64, tolerance: f64) -> Check {
    Check {
        name: name.to_string(),
        passed: observed <= tolerance,
        observed,
        tolerance,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Runs every kernel property check; deterministic given `seed`.
pub fn selftest(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RopeConfig::new(64);
    let mut out = Vec::new();

    let mut identity: f64 = 0.0;
    let mut norm_err: f64 = 0.0;
    let mut relative: f64 = 0.0;
    let mut compose: f64 = 0.0;
    for _ in 0..1000 {
        let q = random_vec(&mut rng, cfg.head_dim);
        let k = random_vec(&mut rng, cfg.head_dim);
        let m = rng.random_range(0..=64i64);
        let n = rng.random_range(0..=64i64);
        let r0 = rope_rotate(&q, 0, &cfg).unwrap();
        identity = identity.max(q.iter().zip(&r0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let qm = rope_rotate(&q, m, &cfg).unwrap();
        norm_err = norm_err.max((norm(&qm) - norm(&q)).abs());
        let kn = rope_rotate(&k, n, &cfg).unwrap();
        let shifted = rope_rotate(&q, m - n, &cfg).unwrap();
        relative = relative.max((dot(&qm, &kn) - dot(&shifted, &k)).abs());
        let twice = rope_rotate(&qm, n, &cfg).unwrap();
        let once = rope_rotate(&q, m + n, &cfg).unwrap();
        compose = compose.max(twice.iter().zip(&once).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    out.push(check("rope_identity_at_zero", identity, 0.0));
    out.push(check("rope_norm_preservation", norm_err, 1e-12));
    out.push(check("rope_relative_position", relative, 1e-9));
    out.push(check("rope_composition", compose, 1e-9));

    let mut norm2: f64 = 0.0;
    let mut translation: f64 = 0.0;
    for _ in 0..200 {
        let q = random_vec(&mut rng, cfg.head_dim);
        let k = random_vec(&mut rng, cfg.head_dim);
        let c1 = (rng.random_range(0..32i64), rng.random_range(0..32i64));
        let c2 = (rng.random_range(0..32i64), rng.random_range(0..32i64));
        let t = (rng.random_range(0..32i64), rng.random_range(0..32i64));
        let a = rope_2d(&q, c1, &cfg).unwrap();
        norm2 = norm2.max((norm(&a) - norm(&q)).abs());
        let s1 = dot(&a, &rope_2d(&k, c2, &cfg).unwrap());
        let s2 = dot(
            &rope_2d(&q, (c1.0 + t.0, c1.1 + t.1), &cfg).unwrap(),
            &rope_2d(&k, (c2.0 + t.0, c2.1 + t.1), &cfg).unwrap(),
        );
        translation = translation.max((s1 - s2).abs());
    }
    out.push(check("rope_2d_norm_preservation", norm2, 1e-12));
    out.push(check("rope_2d_translation_invariance", translation, 1e-9));

    let even: Vec<usize> = (0..96).map(|k| 2 * k).collect();
    out.push(check("sample_slices_192_96_even", f64::from(u8::from(sample_slices(192, 96) != even)), 0.0));
    let ids: Vec<usize> = (0..10).collect();
    let with = mix_prompts(&ids, (1, 4), seed)
        .iter()
        .filter(|(_, v)| *v == PromptVariant::WithDiagnosis)
        .count();
    out.push(check("mix_prompts_10_1to4", (with as f64 - 2.0).abs(), 0.0));

    let worst = (0..100)
        .map(|s| gradient_check(seed.wrapping_add(s), (3, 5, 4, 6), 1e-5, Gelu::Exact))
        .fold(0.0, f64::max);
    out.push(check("projector_gradient_vs_finite_differences", worst, 1e-4));
    out
}
