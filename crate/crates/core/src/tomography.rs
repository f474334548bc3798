//! State estimation from count images.
//!
//! Two estimators live here: a least-squares fit of one image to a
//! superposition of spatial modes, and a joint maximum-likelihood estimate of
//! the 4×4 density matrix from the images of one input behind all analyzers.
//!
//! The density matrix is parametrized as `ρ = T†T / Tr(T†T)` with `T` lower
//! triangular (real diagonal), so every candidate is Hermitian and PSD. The
//! likelihood depends on `T` only through `ρ`, so no normalization penalty
//! is needed.

use std::fmt::Write as _;

use nalgebra::{SMatrix, SVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::full_channel;
use crate::error::{Error, Result};
use crate::measurement::{pixel_functionals, CountsImage, IntensityImage};
use crate::modes::{GridSpec, ModeBank, ModeField, RadialProfile};
use crate::optimize::{self, Options};
use crate::states::{fidelity, Basis, DensityDoc, DensityMatrix, Matrix4c, Polarization, Vector4c};
use crate::C64;

/// Log terms use `max(q, LOG_FLOOR)`.
pub const LOG_FLOOR: f64 = 1e-12;

const FIT_RESTARTS: usize = 12;
const FIT_SEED: u64 = 0x00f1_7c0e;
const RECON_SEED: u64 = 0x7a3d_0b5e;

/// Result of a least-squares mode fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFit {
    /// Unit-norm, first coefficient above 1e-6 in magnitude real and positive.
    pub coefficients: Vec<C64>,
    /// Mean over pixels of `(data − model)²` with both normalized to unit sum.
    pub residual: f64,
    pub basis: Vec<String>,
    pub converged: bool,
    pub restarts_converged: usize,
}

fn check_grid(img: &GridSpec, modes: &[ModeField]) -> Result<()> {
    for m in modes {
        if m.grid != *img {
            return Err(Error::Dimension(format!(
                "mode {} is sampled on a different grid",
                m.label
            )));
        }
    }
    Ok(())
}

/// Fits `counts / Σcounts` with `|Σ c_k f_k|²` normalized to unit sum.
pub fn fit_coefficients(img: &CountsImage, basis: &[ModeField]) -> Result<CoefficientFit> {
    let total = img.total();
    if total == 0 {
        return Err(Error::Input("cannot fit an image without counts".into()));
    }
    let data: Vec<f64> = img
        .counts
        .iter()
        .map(|&c| c as f64 / total as f64)
        .collect();
    fit_distribution(&img.grid, &data, basis)
}

/// Same fit applied to a rendered probability map.
pub fn fit_intensity(img: &IntensityImage, basis: &[ModeField]) -> Result<CoefficientFit> {
    fit_distribution(&img.grid, &img.probabilities, basis)
}

fn fit_distribution(grid: &GridSpec, data: &[f64], basis: &[ModeField]) -> Result<CoefficientFit> {
    if basis.is_empty() {
        return Err(Error::Input("empty fit basis".into()));
    }
    check_grid(grid, basis)?;
    if data.len() != grid.len() {
        return Err(Error::Dimension("data and grid sizes differ".into()));
    }
    let k = basis.len();
    let npix = data.len();
    let d2: f64 = data.iter().map(|d| d * d).sum();

    let objective = |z: &[f64], grad: &mut [f64]| -> f64 {
        let coeffs: Vec<C64> = (0..k).map(|j| C64::new(z[2 * j], z[2 * j + 1])).collect();
        let mut psi = vec![C64::new(0.0, 0.0); npix];
        for (c, m) in coeffs.iter().zip(basis) {
            for (p, u) in psi.iter_mut().zip(&m.values) {
                *p += c * u;
            }
        }
        let inten: Vec<f64> = psi.iter().map(|p| p.norm_sqr()).collect();
        let s: f64 = inten.iter().sum();
        grad.iter_mut().for_each(|g| *g = 0.0);
        if !(s > 0.0) {
            return f64::INFINITY;
        }
        let mut value = 0.0;
        let mut rp = 0.0;
        let r: Vec<f64> = data
            .iter()
            .zip(&inten)
            .map(|(d, i)| {
                let p = i / s;
                let r = d - p;
                value += r * r;
                rp += r * p;
                r
            })
            .collect();
        for (j, m) in basis.iter().enumerate() {
            let (mut gre, mut gim) = (0.0, 0.0);
            for x in 0..npix {
                let w = -2.0 / s * (r[x] - rp);
                let t = psi[x].conj() * m.values[x];
                gre += w * 2.0 * t.re;
                gim -= w * 2.0 * t.im;
            }
            grad[2 * j] = gre / d2;
            grad[2 * j + 1] = gim / d2;
        }
        value / d2
    };

    let opts = Options {
        max_iter: 3000,
        rel_tol: 1e-12,
        f_scale: 1e-9,
        grad_tol: 1e-10,
        memory: 12,
    };
    let outcomes: Vec<optimize::Outcome> = (0..FIT_RESTARTS)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(FIT_SEED + r as u64);
            let x0: Vec<f64> = (0..2 * k)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            optimize::minimize(objective, x0, &opts)
        })
        .collect();

    let n_conv = outcomes.iter().filter(|o| o.converged).count();
    let best = pick_best(&outcomes, |o| o.value);
    let o = &outcomes[best];
    let coefficients = gauge_coefficients(
        &(0..k)
            .map(|j| C64::new(o.x[2 * j], o.x[2 * j + 1]))
            .collect::<Vec<_>>(),
    );
    let fit = CoefficientFit {
        coefficients,
        residual: o.value * d2 / npix as f64,
        basis: basis.iter().map(|m| m.label.clone()).collect(),
        converged: o.converged,
        restarts_converged: n_conv,
    };
    if !fit.converged {
        return Err(Error::FitNonConvergence(Box::new(fit)));
    }
    Ok(fit)
}

/// Lowest value among converged outcomes (lowest index on ties), else lowest overall.
fn pick_best(outcomes: &[optimize::Outcome], value: impl Fn(&optimize::Outcome) -> f64) -> usize {
    let pool: Vec<usize> = if outcomes.iter().any(|o| o.converged) {
        (0..outcomes.len())
            .filter(|&i| outcomes[i].converged)
            .collect()
    } else {
        (0..outcomes.len()).collect()
    };
    let mut best = pool[0];
    for &i in &pool[1..] {
        if value(&outcomes[i]) < value(&outcomes[best]) {
            best = i;
        }
    }
    best
}

/// Unit norm, first coefficient above 1e-6 rotated onto the positive real axis.
pub fn gauge_coefficients(c: &[C64]) -> Vec<C64> {
    let n = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut out: Vec<C64> = c.iter().map(|v| v / n).collect();
    if let Some(first) = out.iter().find(|v| v.norm() > 1e-6).copied() {
        let phase = first.conj() / first.norm();
        out.iter_mut().for_each(|v| *v *= phase);
        // make the reference entry exactly real
        if let Some(r) = out.iter_mut().find(|v| v.norm() > 1e-6) {
            *r = C64::new(r.norm(), 0.0);
        }
    }
    out
}

/// `|⟨a|b⟩|²` for unit vectors.
pub fn overlap(a: &[C64], b: &[C64]) -> f64 {
    let s: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    s.norm_sqr() / (na * nb)
}

/// Pixel weights for one analyzer image.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub analyzer: Polarization,
    pub weights: Vec<f64>,
    /// Expected fraction of counts spread uniformly over the grid.
    pub background: f64,
}

impl Observation {
    /// Uses the counts as weights; `background` is the expected uniform fraction.
    pub fn from_counts(img: &CountsImage, background: f64) -> Result<Self> {
        let analyzer: Polarization = img
            .meta
            .analyzer
            .as_deref()
            .ok_or_else(|| Error::Input("count image does not name its analyzer".into()))?
            .parse()?;
        Ok(Observation {
            analyzer,
            weights: img.counts.iter().map(|&c| c as f64).collect(),
            background,
        })
    }

    /// Expected-value data: the probability map scaled to `total` counts.
    pub fn from_intensity(img: &IntensityImage, analyzer: Polarization, total: f64) -> Self {
        Observation {
            analyzer,
            weights: img.probabilities.iter().map(|p| p * total).collect(),
            background: 0.0,
        }
    }
}

/// Uniform fraction of the expected counts implied by a count image's noise metadata.
pub fn expected_background(img: &CountsImage) -> f64 {
    let m = &img.meta;
    let npix = img.grid.len() as f64;
    let signal = if m.dark {
        0.0
    } else {
        m.n_frames as f64 * m.noise.detection_efficiency
    };
    let dark = m.n_frames as f64 * npix * m.noise.dark_count_prob;
    let uniform = signal * m.noise.background_uniform + dark;
    let total = signal + dark;
    if total > 0.0 {
        uniform / total
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructOptions {
    pub basis: Basis,
    pub restarts: usize,
    /// Ideal state for the fidelity report.
    pub ideal: Option<DensityMatrix>,
    /// Model the uniform background recorded in the image metadata.
    pub model_background: bool,
    pub optimizer: Options,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            basis: Basis::CircOam,
            restarts: 8,
            ideal: None,
            model_background: true,
            optimizer: Options {
                max_iter: 5000,
                memory: 12,
                rel_tol: 1e-10,
                f_scale: 1.0,
                grad_tol: 1e-8,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fidelity_vs_ideal: Option<f64>,
    pub grad_norm: f64,
    pub input: Option<String>,
    pub restarts_converged: usize,
    /// Objective `−L / Σweights` after every accepted step of the chosen restart.
    pub trace: Vec<f64>,
}

/// Serialized form of a reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionDoc {
    pub input: Option<String>,
    pub rho: DensityDoc,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fidelity_vs_ideal: Option<f64>,
    pub grad_norm: f64,
    pub restarts_converged: usize,
}

impl ReconstructionResult {
    pub fn to_doc(&self) -> ReconstructionDoc {
        ReconstructionDoc {
            input: self.input.clone(),
            rho: self.rho.to_doc(),
            log_likelihood: self.log_likelihood,
            iterations: self.iterations,
            converged: self.converged,
            fidelity_vs_ideal: self.fidelity_vs_ideal,
            grad_norm: self.grad_norm,
            restarts_converged: self.restarts_converged,
        }
    }

    pub fn from_doc(doc: &ReconstructionDoc) -> Result<Self> {
        Ok(ReconstructionResult {
            rho: DensityMatrix::from_doc(&doc.rho)?,
            log_likelihood: doc.log_likelihood,
            iterations: doc.iterations,
            converged: doc.converged,
            fidelity_vs_ideal: doc.fidelity_vs_ideal,
            grad_norm: doc.grad_norm,
            input: doc.input.clone(),
            restarts_converged: doc.restarts_converged,
            trace: Vec::new(),
        })
    }
}

struct ImageTerm {
    v: Vec<Vector4c>,
    n: Vec<f64>,
    gram: Matrix4c,
    total: f64,
    beta: f64,
    npix: f64,
}

struct Likelihood {
    terms: Vec<ImageTerm>,
    total: f64,
}

impl Likelihood {
    fn build(obs: &[Observation], bank: &ModeBank, basis: Basis) -> Result<Self> {
        let mut terms = Vec::with_capacity(obs.len());
        for o in obs {
            if o.weights.len() != bank.grid.len() {
                return Err(Error::Dimension(
                    "image size does not match the grid".into(),
                ));
            }
            if !(0.0..1.0).contains(&o.background) {
                return Err(Error::Input(format!(
                    "background fraction {} outside [0, 1)",
                    o.background
                )));
            }
            let vs = pixel_functionals(&o.analyzer.jones(), bank, basis);
            let mut gram = Matrix4c::zeros();
            for v in &vs {
                gram += v * v.adjoint();
            }
            let (mut v, mut n) = (Vec::new(), Vec::new());
            for (x, &w) in o.weights.iter().enumerate() {
                if w > 0.0 {
                    v.push(vs[x]);
                    n.push(w);
                }
            }
            let total = n.iter().sum();
            terms.push(ImageTerm {
                v,
                n,
                gram,
                total,
                beta: o.background,
                npix: vs.len() as f64,
            });
        }
        let total: f64 = terms.iter().map(|t| t.total).sum();
        if !(total > 0.0) {
            return Err(Error::Input("no counts in any image".into()));
        }
        Ok(Likelihood { terms, total })
    }

    /// Log-likelihood and its gradient `R` with `dL = Tr(R dρ)`.
    fn eval(&self, rho: &Matrix4c) -> (f64, Matrix4c) {
        let mut l = 0.0;
        let mut r = Matrix4c::zeros();
        for t in &self.terms {
            if t.total == 0.0 {
                continue;
            }
            let tr = (rho * t.gram).trace().re;
            let (b, keep) = (t.beta / t.npix, 1.0 - t.beta);
            let mut acc = Matrix4c::zeros();
            let mut gsum = 0.0;
            for (v, &n) in t.v.iter().zip(&t.n) {
                let w = rho * v;
                let q = v.dotc(&w).re / tr;
                let big_q = keep * q + b;
                if big_q > LOG_FLOOR {
                    l += n * big_q.ln();
                    let c = n * keep / (big_q * tr);
                    acc += (v * v.adjoint()) * C64::new(c, 0.0);
                    gsum += n * keep * q / big_q;
                } else {
                    l += n * LOG_FLOOR.ln();
                }
            }
            r += acc - t.gram * C64::new(gsum / tr, 0.0);
        }
        (l, r)
    }
}

const N_PARAMS: usize = 16;

fn t_from_params(x: &[f64]) -> Matrix4c {
    let mut t = Matrix4c::zeros();
    for i in 0..4 {
        t[(i, i)] = C64::new(x[i], 0.0);
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            t[(i, j)] = C64::new(x[k], x[k + 1]);
            k += 2;
        }
    }
    t
}

fn grad_to_params(m: &Matrix4c, g: &mut [f64]) {
    // dL = 2 Re Σ M_ji dT_ij with M = R T†
    for i in 0..4 {
        g[i] = 2.0 * m[(i, i)].re;
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            g[k] = 2.0 * m[(j, i)].re;
            g[k + 1] = -2.0 * m[(j, i)].im;
            k += 2;
        }
    }
}

fn rho_from_t(t: &Matrix4c) -> Matrix4c {
    let raw = t.adjoint() * t;
    let tr = raw.trace().re;
    raw / C64::new(tr, 0.0)
}

/// Frobenius-orthonormal basis of the 4×4 Hermitian matrices.
fn hermitian_basis() -> Vec<Matrix4c> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(N_PARAMS);
    for i in 0..4 {
        let mut m = Matrix4c::zeros();
        m[(i, i)] = C64::new(1.0, 0.0);
        out.push(m);
    }
    for i in 0..4 {
        for j in i + 1..4 {
            let mut re = Matrix4c::zeros();
            re[(i, j)] = C64::new(h, 0.0);
            re[(j, i)] = C64::new(h, 0.0);
            let mut im = Matrix4c::zeros();
            im[(i, j)] = C64::new(0.0, h);
            im[(j, i)] = C64::new(0.0, -h);
            out.push(re);
            out.push(im);
        }
    }
    out
}

/// Traceless directions `δ` that leave every normalized image unchanged,
/// i.e. `v†δv ∝ v†ρv` over all pixels of each analyzer. The likelihood is
/// exactly constant on `ρ + span(δ)`. With the four standard analyzers this
/// always contains `Im ρ₁₂` of the circular basis, and more for mixed states.
fn plateau_directions(rho: &Matrix4c, functionals: &[Vec<Vector4c>]) -> Vec<Matrix4c> {
    let e = hermitian_basis();
    let mut m = SMatrix::<f64, N_PARAMS, N_PARAMS>::zeros();
    for vs in functionals {
        let mut ff = SMatrix::<f64, N_PARAMS, N_PARAMS>::zeros();
        let mut fg = SVector::<f64, N_PARAMS>::zeros();
        let mut gg = 0.0;
        for v in vs {
            let f = SVector::<f64, N_PARAMS>::from_fn(|k, _| v.dotc(&(e[k] * v)).re);
            let g = v.dotc(&(rho * v)).re;
            ff += f * f.transpose();
            fg += f * g;
            gg += g * g;
        }
        m += ff;
        if gg > 0.0 {
            m -= fg * fg.transpose() / gg;
        }
    }
    let t = SVector::<f64, N_PARAMS>::from_fn(|k, _| e[k].trace().re);
    let scale = m.abs().max().max(1e-300);
    m += t * t.transpose() * scale;
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.max();
    (0..N_PARAMS)
        .filter(|&i| eig.eigenvalues[i] <= 1e-10 * top)
        .map(|i| {
            e.iter()
                .enumerate()
                .fold(Matrix4c::zeros(), |acc, (k, ek)| {
                    acc + ek * C64::new(eig.eigenvectors[(k, i)], 0.0)
                })
        })
        .collect()
}

/// Least-pure state of the plateau `rho + span(dirs)` along the straight
/// path from `rho`, stopped at the PSD boundary.
fn least_pure_on_plateau(rho: &Matrix4c, dirs: &[Matrix4c]) -> Matrix4c {
    if dirs.is_empty() {
        return *rho;
    }
    let step = dirs.iter().fold(Matrix4c::zeros(), |acc, d| {
        acc + d * C64::new((rho * d).trace().re, 0.0)
    });
    let min_eig = |m: &Matrix4c| SymmetricEigen::new(*m).eigenvalues.min();
    let at = |s: f64| rho - step * C64::new(s, 0.0);
    if min_eig(&at(1.0)) >= -1e-14 {
        return at(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_eig(&at(mid)) >= -1e-14 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

/// Maximum-likelihood density matrix from the images of one input.
pub fn reconstruct_observations(
    obs: &[Observation],
    bank: &ModeBank,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    let required = [
        Polarization::H,
        Polarization::V,
        Polarization::SigmaPlus,
        Polarization::SigmaMinus,
    ];
    for a in required {
        if !obs.iter().any(|o| o.analyzer == a) {
            return Err(Error::Input(format!(
                "reconstruction needs an image behind analyzer {a}"
            )));
        }
    }
    if opts.restarts == 0 {
        return Err(Error::Input("at least one restart is required".into()));
    }
    let lk = Likelihood::build(obs, bank, opts.basis)?;
    let total = lk.total;

    let objective = |x: &[f64], g: &mut [f64]| -> f64 {
        let t = t_from_params(x);
        let raw = t.adjoint() * t;
        if !(raw.trace().re > 0.0) {
            g.iter_mut().for_each(|v| *v = 0.0);
            return f64::INFINITY;
        }
        let (l, r) = lk.eval(&raw);
        let m = r * t.adjoint();
        grad_to_params(&m, g);
        g.iter_mut().for_each(|v| *v = -*v / total);
        -l / total
    };

    let outcomes: Vec<optimize::Outcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(RECON_SEED + k as u64);
            let x0: Vec<f64> = (0..N_PARAMS)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            optimize::minimize(objective, x0, &opts.optimizer)
        })
        .collect();

    let n_conv = outcomes.iter().filter(|o| o.converged).count();
    let best = pick_best(&outcomes, |o| o.value);
    let o = &outcomes[best];
    let mut rho = rho_from_t(&t_from_params(&o.x));

    // the data cannot tell apart states on the likelihood plateau; report the least pure one
    let functionals: Vec<Vec<Vector4c>> = obs
        .iter()
        .map(|o| pixel_functionals(&o.analyzer.jones(), bank, opts.basis))
        .collect();
    rho = least_pure_on_plateau(&rho, &plateau_directions(&rho, &functionals));
    let rho = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let rho = DensityMatrix::new(rho / C64::new(rho.trace().re, 0.0), opts.basis)?;
    let log_likelihood = lk.eval(&rho.entries).0;
    let fidelity_vs_ideal = match &opts.ideal {
        Some(ideal) => Some(fidelity(&rho, &ideal.change_basis(opts.basis))?),
        None => None,
    };
    let result = ReconstructionResult {
        rho,
        log_likelihood,
        iterations: o.iterations,
        converged: o.converged,
        fidelity_vs_ideal,
        grad_norm: o.grad_norm,
        input: None,
        restarts_converged: n_conv,
        trace: o.trace.clone(),
    };
    if !result.converged {
        let grad_norm = result.grad_norm;
        return Err(Error::ReconstructionNonConvergence {
            best: Box::new(result),
            grad_norm,
        });
    }
    Ok(result)
}

/// Reconstructs the state of one input from its analyzer images, using the
/// noise metadata of each image as a known uniform background.
pub fn reconstruct_density(
    images: &[CountsImage],
    grid: &GridSpec,
    profile: &RadialProfile,
) -> Result<ReconstructionResult> {
    reconstruct_with(images, grid, profile, &ReconstructOptions::default())
}

pub fn reconstruct_with(
    images: &[CountsImage],
    grid: &GridSpec,
    profile: &RadialProfile,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    for img in images {
        if img.grid != *grid {
            return Err(Error::Dimension(
                "image grid differs from the reconstruction grid".into(),
            ));
        }
    }
    let obs = images
        .iter()
        .map(|img| {
            let b = if opts.model_background {
                expected_background(img)
            } else {
                0.0
            };
            Observation::from_counts(img, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = ModeBank::new(grid, profile)?;
    let mut opts = opts.clone();
    let input = images.first().and_then(|i| i.meta.input.clone());
    if opts.ideal.is_none() {
        if let Some(p) = input
            .as_deref()
            .and_then(|s| s.parse::<Polarization>().ok())
        {
            opts.ideal = Some(full_channel(&p.jones()).to_density());
        }
    }
    let mut r = reconstruct_observations(&obs, &bank, &opts).map_err(|e| match e {
        Error::ReconstructionNonConvergence {
            mut best,
            grad_norm,
        } => {
            best.input = input.clone();
            Error::ReconstructionNonConvergence { best, grad_norm }
        }
        other => other,
    })?;
    r.input = input;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub input: String,
    pub fidelity: Option<f64>,
    pub purity: f64,
    pub max_imag: f64,
    pub log_likelihood: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

/// Tabulates one reconstruction per input; at least four are required.
pub fn report(results: &[ReconstructionResult]) -> Result<Summary> {
    if results.len() < 4 {
        return Err(Error::Input(format!(
            "report needs the reconstructions of all 4 inputs, got {}",
            results.len()
        )));
    }
    let rows = results
        .iter()
        .enumerate()
        .map(|(k, r)| SummaryRow {
            input: r.input.clone().unwrap_or_else(|| format!("#{k}")),
            fidelity: r.fidelity_vs_ideal,
            purity: r.rho.purity(),
            max_imag: r.rho.max_imag(),
            log_likelihood: r.log_likelihood,
            converged: r.converged,
        })
        .collect();
    Ok(Summary { rows })
}

impl Summary {
    pub fn table(&self) -> String {
        let header = [
            "input",
            "fidelity",
            "purity",
            "max|Im rho|",
            "log-likelihood",
            "converged",
        ];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.input.clone(),
                    r.fidelity.map_or("-".into(), |f| format!("{f:.6}")),
                    format!("{:.6}", r.purity),
                    format!("{:.3e}", r.max_imag),
                    format!("{:.4}", r.log_likelihood),
                    r.converged.to_string(),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: &[&str]| {
            let parts: Vec<String> = row
                .iter()
                .zip(width)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &header);
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "{}", rule.join("  "));
        for row in &cells {
            let r: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&mut out, &r);
        }
        out
    }
}
