//! Heralded single-photon imaging behind a polarization analyzer.
//!
//! Each heralded frame lights at most one signal pixel, drawn from the
//! Fourier-plane intensity of the analyzed state; dark counts are added per
//! pixel. Randomness is counter-based: frame `f` always consumes words
//! `4f..4f+4` of stream 0 of a ChaCha8 generator keyed on the image seed,
//! and pixel `x` draws its dark counts from stream `1 + x`, so counts do not
//! depend on how the work is scheduled.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::full_channel;
use crate::error::{Error, Result};
use crate::modes::{GridSpec, ModeBank, RadialProfile};
use crate::states::{
    basis_transform, Basis, DensityMatrix, JonesVector, Polarization, SpinOrbitState, Vector4c,
    CIRC_SLOTS,
};
use crate::{C64, OAM_ORDER};

/// Projection probabilities below this are treated as dark.
pub const DARK_PROB: f64 = 1e-15;

const FRAME_CHUNK: u64 = 8192;

/// Analyzer projection of a spin-orbit state onto the OAM components.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub prob: f64,
    /// Unnormalized coefficients over [`OAM_ORDER`].
    pub raw: [C64; 3],
    /// Normalized coefficients, `None` for a dark projection.
    pub coeffs: Option<[C64; 3]>,
}

impl Projection {
    pub fn is_dark(&self) -> bool {
        self.coeffs.is_none()
    }
}

pub fn oam_index(l: i32) -> Option<usize> {
    OAM_ORDER.iter().position(|&k| k == l)
}

/// Contracts the spin part of `s` with `⟨a|`.
pub fn project_analyzer(s: &SpinOrbitState, a: &JonesVector) -> Result<Projection> {
    if s.basis != Basis::CircOam {
        return Err(Error::Input(
            "analyzer projection needs a circ-oam state".into(),
        ));
    }
    let mut raw = [C64::new(0.0, 0.0); 3];
    for (k, &(spin, l)) in CIRC_SLOTS.iter().enumerate() {
        let idx = oam_index(l).expect("logical slots carry l in {-2, 0, 2}");
        raw[idx] += a.inner(&spin.jones()) * s.amplitudes[k];
    }
    let prob: f64 = raw.iter().map(|c| c.norm_sqr()).sum();
    let coeffs = (prob >= DARK_PROB).then(|| {
        let n = prob.sqrt();
        raw.map(|c| c / n)
    });
    Ok(Projection { prob, raw, coeffs })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub input: Option<String>,
    pub analyzer: Option<String>,
    pub projection_prob: f64,
    /// Set when the projection was dark and the image is uniform background.
    #[serde(default)]
    pub dark: bool,
}

/// Normalized per-pixel detection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub grid: GridSpec,
    pub probabilities: Vec<f64>,
    pub meta: ImageMeta,
}

impl IntensityImage {
    pub fn uniform(grid: &GridSpec, meta: ImageMeta) -> Self {
        let n = grid.len();
        IntensityImage {
            grid: *grid,
            probabilities: vec![1.0 / n as f64; n],
            meta,
        }
    }

    fn from_intensity(
        grid: &GridSpec,
        intensity: Vec<f64>,
        analyzer: Option<&str>,
    ) -> Result<Self> {
        let total: f64 = intensity.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DarkProjection {
                analyzer: analyzer.unwrap_or("?").to_string(),
                prob: 0.0,
            });
        }
        let inv = 1.0 / total;
        Ok(IntensityImage {
            grid: *grid,
            probabilities: intensity.into_iter().map(|v| v * inv).collect(),
            meta: ImageMeta {
                projection_prob: 1.0,
                ..ImageMeta::default()
            },
        })
    }
}

/// `|Σ_l c_l u_l|²` normalized over the grid; coefficients over [`OAM_ORDER`].
pub fn render_with_bank(coeffs: &[C64; 3], bank: &ModeBank) -> Result<IntensityImage> {
    if coeffs.iter().all(|c| c.norm() == 0.0) {
        return Err(Error::DarkProjection {
            analyzer: "?".into(),
            prob: 0.0,
        });
    }
    let [a, b, c] = &bank.oam;
    let intensity: Vec<f64> = a
        .values
        .par_iter()
        .zip(&b.values)
        .zip(&c.values)
        .map(|((x, y), z)| (coeffs[0] * x + coeffs[1] * y + coeffs[2] * z).norm_sqr())
        .collect();
    IntensityImage::from_intensity(&bank.grid, intensity, None)
}

pub fn render_intensity(
    coeffs: &[C64; 3],
    grid: &GridSpec,
    profile: &RadialProfile,
) -> Result<IntensityImage> {
    render_with_bank(coeffs, &ModeBank::new(grid, profile)?)
}

/// Per-pixel vectors `v_x` with intensity `v_x† ρ v_x` behind analyzer `a`,
/// for `ρ` expressed in `basis`.
pub fn pixel_functionals(a: &JonesVector, bank: &ModeBank, basis: Basis) -> Vec<Vector4c> {
    let spin: [C64; 4] = CIRC_SLOTS.map(|(s, _)| a.inner(&s.jones()));
    let fields = CIRC_SLOTS.map(|(_, l)| &bank.oam[oam_index(l).expect("logical l")]);
    // ρ_circ = U† ρ_basis U, so v_basis = U v_circ
    let u = basis_transform(Basis::CircOam, basis);
    let transform = basis != Basis::CircOam;
    (0..bank.grid.len())
        .into_par_iter()
        .map(|x| {
            let v = Vector4c::from_fn(|k, _| (spin[k] * fields[k].values[x]).conj());
            if transform {
                u * v
            } else {
                v
            }
        })
        .collect()
}

/// Probability that a photon in state `rho` passes analyzer `a`.
pub fn analyzer_probability(rho: &DensityMatrix, a: &JonesVector) -> f64 {
    let r = rho.change_basis(Basis::CircOam).entries;
    let alpha = CIRC_SLOTS.map(|(s, _)| a.inner(&s.jones()));
    let mut p = C64::new(0.0, 0.0);
    for k in 0..4 {
        for j in 0..4 {
            if CIRC_SLOTS[k].1 == CIRC_SLOTS[j].1 {
                p += alpha[k] * alpha[j].conj() * r[(k, j)];
            }
        }
    }
    p.re
}

/// Image of a density matrix behind an analyzer.
pub fn render_density(
    rho: &DensityMatrix,
    a: &JonesVector,
    bank: &ModeBank,
) -> Result<IntensityImage> {
    let vs = pixel_functionals(a, bank, rho.basis);
    let intensity: Vec<f64> = vs
        .par_iter()
        .map(|v| v.dotc(&(rho.entries * v)).re.max(0.0))
        .collect();
    IntensityImage::from_intensity(&bank.grid, intensity, None)
}

/// Camera noise and losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default = "default_dark")]
    pub dark_count_prob: f64,
    #[serde(default = "default_efficiency")]
    pub detection_efficiency: f64,
    #[serde(default)]
    pub background_uniform: f64,
}

fn default_dark() -> f64 {
    1e-5
}

fn default_efficiency() -> f64 {
    1.0
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            dark_count_prob: 1e-5,
            detection_efficiency: 1.0,
            background_uniform: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            dark_count_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dark_count_prob) {
            return Err(Error::Input(format!(
                "dark_count_prob {} outside [0, 1]",
                self.dark_count_prob
            )));
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(Error::Input(format!(
                "detection_efficiency {} outside (0, 1]",
                self.detection_efficiency
            )));
        }
        if !(0.0..=1.0).contains(&self.background_uniform) {
            return Err(Error::Input(format!(
                "background_uniform {} outside [0, 1]",
                self.background_uniform
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsMeta {
    pub input: Option<String>,
    pub analyzer: Option<String>,
    pub n_frames: u64,
    pub seed: u64,
    pub noise: NoiseModel,
    pub projection_prob: f64,
    #[serde(default)]
    pub dark: bool,
}

/// Photon counts per pixel accumulated over heralded frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsImage {
    pub grid: GridSpec,
    pub counts: Vec<u64>,
    pub meta: CountsMeta,
}

impl CountsImage {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng.set_word_pos(frame as u128 * 4);
    rng
}

/// Draws `n_frames` heralded frames from `img` plus dark counts.
pub fn sample_counts(
    img: &IntensityImage,
    n_frames: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<CountsImage> {
    sample_counts_with(img, n_frames, noise, noise.detection_efficiency, seed)
}

fn sample_counts_with(
    img: &IntensityImage,
    n_frames: u64,
    noise: &NoiseModel,
    efficiency: f64,
    seed: u64,
) -> Result<CountsImage> {
    noise.validate()?;
    let npix = img.grid.len();
    if img.probabilities.len() != npix {
        return Err(Error::Dimension(format!(
            "{} probabilities for a {npix}-pixel grid",
            img.probabilities.len()
        )));
    }
    let b = noise.background_uniform;
    let mut cdf = Vec::with_capacity(npix);
    let mut acc = 0.0;
    for &p in &img.probabilities {
        acc += (1.0 - b) * p + b / npix as f64;
        cdf.push(acc);
    }
    let total = acc;

    let mut counts = vec![0u64; npix];
    if !img.meta.dark && n_frames > 0 {
        let n_chunks = n_frames.div_ceil(FRAME_CHUNK);
        let hits: Vec<Vec<u32>> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let start = chunk * FRAME_CHUNK;
                let end = (start + FRAME_CHUNK).min(n_frames);
                let mut rng = frame_rng(seed, start);
                let mut out = Vec::with_capacity((end - start) as usize);
                for _ in start..end {
                    // exactly two 64-bit draws per frame keeps frames aligned to 4 words
                    let detect: f64 = rng.random();
                    let pick: f64 = rng.random();
                    if detect < efficiency {
                        let target = pick * total;
                        let idx = cdf.partition_point(|&c| c <= target).min(npix - 1);
                        out.push(idx as u32);
                    }
                }
                out
            })
            .collect();
        for chunk in hits {
            for idx in chunk {
                counts[idx as usize] += 1;
            }
        }
    }

    if noise.dark_count_prob > 0.0 && n_frames > 0 {
        let dist = Binomial::new(n_frames, noise.dark_count_prob)
            .map_err(|e| Error::Input(format!("dark-count distribution: {e}")))?;
        counts.par_iter_mut().enumerate().for_each(|(x, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + x as u64);
            *c += dist.sample(&mut rng);
        });
    }

    Ok(CountsImage {
        grid: img.grid,
        counts,
        meta: CountsMeta {
            input: img.meta.input.clone(),
            analyzer: img.meta.analyzer.clone(),
            n_frames,
            seed,
            noise: *noise,
            projection_prob: img.meta.projection_prob,
            dark: img.meta.dark,
        },
    })
}

/// Everything needed to synthesize a tomography dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub inputs: Vec<Polarization>,
    pub analyzers: Vec<Polarization>,
    pub n_frames: u64,
    pub grid: GridSpec,
    pub profile: RadialProfile,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Amplitude transmission of the coupling stage; thins detections by `t²`.
    pub transmission: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        let grid = GridSpec::default();
        DatasetSpec {
            inputs: Polarization::STANDARD.to_vec(),
            analyzers: Polarization::STANDARD.to_vec(),
            n_frames: 10_000,
            grid,
            profile: RadialProfile::default_for(&grid),
            noise: NoiseModel::default(),
            seed: 0,
            transmission: 1.0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.profile.validate()?;
        self.noise.validate()?;
        if self.inputs.is_empty() || self.analyzers.is_empty() {
            return Err(Error::Input(
                "dataset needs at least one input and one analyzer".into(),
            ));
        }
        if self.analyzers.len() > 16 {
            return Err(Error::Input("at most 16 analyzers per input".into()));
        }
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(Error::Input(format!(
                "transmission {} outside (0, 1]",
                self.transmission
            )));
        }
        Ok(())
    }

    pub fn image_seed(&self, row: usize, col: usize) -> u64 {
        self.seed.wrapping_add(16 * row as u64 + col as u64)
    }
}

/// Grid of count images, `images[row * analyzers.len() + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyDataset {
    pub inputs: Vec<Polarization>,
    pub analyzers: Vec<Polarization>,
    pub grid: GridSpec,
    pub profile: RadialProfile,
    pub noise: NoiseModel,
    pub seed: u64,
    pub n_frames: u64,
    pub images: Vec<CountsImage>,
}

impl TomographyDataset {
    pub fn image(&self, row: usize, col: usize) -> &CountsImage {
        &self.images[row * self.analyzers.len() + col]
    }

    /// The images of one input, in analyzer order.
    pub fn row_for(&self, input: Polarization) -> Result<(&[Polarization], &[CountsImage])> {
        let row = self
            .inputs
            .iter()
            .position(|&p| p == input)
            .ok_or_else(|| Error::Input(format!("dataset has no input {input}")))?;
        let n = self.analyzers.len();
        Ok((&self.analyzers, &self.images[row * n..(row + 1) * n]))
    }
}

/// Images of a given state behind each analyzer; pure states go through the
/// analyzer projection, mixed ones through the pixel functionals.
pub fn simulate_row(
    source: &DensityMatrix,
    label: &str,
    row: usize,
    spec: &DatasetSpec,
    bank: &ModeBank,
) -> Result<Vec<CountsImage>> {
    let efficiency = spec.noise.detection_efficiency * spec.transmission.powi(2);
    spec.analyzers
        .par_iter()
        .enumerate()
        .map(|(col, a)| {
            let aj = a.jones();
            let vs = pixel_functionals(&aj, bank, source.basis);
            let intensity: Vec<f64> = vs
                .iter()
                .map(|v| v.dotc(&(source.entries * v)).re.max(0.0))
                .collect();
            let prob = analyzer_probability(source, &aj);
            let meta = ImageMeta {
                input: Some(label.to_string()),
                analyzer: Some(a.name().to_string()),
                projection_prob: prob,
                dark: prob < DARK_PROB,
            };
            let img = if meta.dark {
                IntensityImage::uniform(&spec.grid, meta)
            } else {
                let mut img =
                    IntensityImage::from_intensity(&spec.grid, intensity, Some(a.name()))?;
                img.meta = meta;
                img
            };
            sample_counts_with(
                &img,
                spec.n_frames,
                &spec.noise,
                efficiency,
                spec.image_seed(row, col),
            )
        })
        .collect()
}

/// Pure-state image of `full_channel(input)` behind `analyzer`.
pub fn channel_image(
    input: Polarization,
    analyzer: Polarization,
    bank: &ModeBank,
) -> Result<IntensityImage> {
    let s = full_channel(&input.jones());
    let proj = project_analyzer(&s, &analyzer.jones())?;
    let meta = ImageMeta {
        input: Some(input.name().to_string()),
        analyzer: Some(analyzer.name().to_string()),
        projection_prob: proj.prob,
        dark: proj.is_dark(),
    };
    match proj.coeffs {
        None => Ok(IntensityImage::uniform(&bank.grid, meta)),
        Some(c) => {
            let mut img = render_with_bank(&c, bank)?;
            img.meta = meta;
            Ok(img)
        }
    }
}

/// The full input × analyzer dataset of the ideal channel.
pub fn synthesize_dataset(spec: &DatasetSpec) -> Result<TomographyDataset> {
    spec.validate()?;
    let bank = ModeBank::new(&spec.grid, &spec.profile)?;
    let efficiency = spec.noise.detection_efficiency * spec.transmission.powi(2);
    let na = spec.analyzers.len();
    let images: Vec<CountsImage> = (0..spec.inputs.len() * na)
        .into_par_iter()
        .map(|k| {
            let (row, col) = (k / na, k % na);
            let img = channel_image(spec.inputs[row], spec.analyzers[col], &bank)?;
            sample_counts_with(
                &img,
                spec.n_frames,
                &spec.noise,
                efficiency,
                spec.image_seed(row, col),
            )
        })
        .collect::<Result<_>>()?;
    Ok(TomographyDataset {
        inputs: spec.inputs.clone(),
        analyzers: spec.analyzers.clone(),
        grid: spec.grid,
        profile: spec.profile,
        noise: spec.noise,
        seed: spec.seed,
        n_frames: spec.n_frames,
        images,
    })
}

/// 16-bit big-endian binary PGM; row 0 is `y = -extent`.
pub fn write_pgm<W: Write>(img: &CountsImage, mut w: W) -> Result<()> {
    let n = img.grid.n_pixels;
    if let Some(&m) = img.counts.iter().find(|&&c| c > u16::MAX as u64) {
        return Err(Error::Input(format!(
            "count {m} does not fit a 16-bit image"
        )));
    }
    write!(w, "P5\n{n} {n}\n65535\n")?;
    let mut buf = Vec::with_capacity(2 * img.counts.len());
    for &c in &img.counts {
        buf.extend_from_slice(&(c as u16).to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn pgm_token<R: Read>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let b = byte[0];
        if b == b'#' && tok.is_empty() {
            while r.read(&mut byte)? == 1 && byte[0] != b'\n' {}
            continue;
        }
        if b.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b);
    }
    String::from_utf8(tok).map_err(|_| Error::format("PGM", "non-ASCII header"))
}

/// Reads a 16-bit PGM written by [`write_pgm`]; returns `(n_pixels, counts)`.
pub fn read_pgm<R: Read>(mut r: R) -> Result<(usize, Vec<u64>)> {
    if pgm_token(&mut r)? != "P5" {
        return Err(Error::format("PGM", "expected P5 magic"));
    }
    let mut num = |what: &str| -> Result<usize> {
        pgm_token(&mut r)?
            .parse()
            .map_err(|_| Error::format("PGM", format!("bad {what}")))
    };
    let w = num("width")?;
    let h = num("height")?;
    let max = num("max value")?;
    if w != h || max != 65535 {
        return Err(Error::format(
            "PGM",
            format!("expected square 16-bit image, got {w}x{h} max {max}"),
        ));
    }
    let mut data = vec![0u8; 2 * w * h];
    r.read_exact(&mut data)
        .map_err(|_| Error::format("PGM", "truncated pixel data"))?;
    let counts = data
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) as u64)
        .collect();
    Ok((w, counts))
}

/// Sidecar document stored next to each PGM.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub input_pol: Option<String>,
    pub analyzer: Option<String>,
    pub n_frames: u64,
    pub seed: u64,
    pub noise: NoiseModel,
    pub grid: GridSpec,
    pub profile: RadialProfile,
    pub projection_prob: f64,
    pub dark: bool,
}

/// Index of a dataset directory, images listed row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub inputs: Vec<Polarization>,
    pub analyzers: Vec<Polarization>,
    pub grid: GridSpec,
    pub profile: RadialProfile,
    pub noise: NoiseModel,
    pub seed: u64,
    pub n_frames: u64,
    pub images: Vec<IndexEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub image: String,
    pub sidecar: String,
}

pub const DATASET_INDEX: &str = "dataset.json";

fn file_tag(p: Polarization) -> &'static str {
    match p {
        Polarization::SigmaPlus => "sp",
        Polarization::SigmaMinus => "sm",
        other => other.name(),
    }
}

impl TomographyDataset {
    /// Writes images, sidecars and the index; returns the written file names.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<(String, &'static str)>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut entries = Vec::new();
        let na = self.analyzers.len();
        for (k, img) in self.images.iter().enumerate() {
            let (row, col) = (k / na, k % na);
            let stem = format!(
                "r{row}c{col}_{}_{}",
                file_tag(self.inputs[row]),
                file_tag(self.analyzers[col])
            );
            let image = format!("{stem}.pgm");
            let sidecar = format!("{stem}.json");
            write_pgm(img, BufWriter::new(File::create(dir.join(&image))?))?;
            let doc = Sidecar {
                input_pol: img.meta.input.clone(),
                analyzer: img.meta.analyzer.clone(),
                n_frames: img.meta.n_frames,
                seed: img.meta.seed,
                noise: img.meta.noise,
                grid: img.grid,
                profile: self.profile,
                projection_prob: img.meta.projection_prob,
                dark: img.meta.dark,
            };
            let mut f = BufWriter::new(File::create(dir.join(&sidecar))?);
            serde_json::to_writer_pretty(&mut f, &doc)?;
            f.flush()?;
            written.push((image.clone(), "image"));
            written.push((sidecar.clone(), "sidecar"));
            entries.push(IndexEntry { image, sidecar });
        }
        let index = DatasetIndex {
            inputs: self.inputs.clone(),
            analyzers: self.analyzers.clone(),
            grid: self.grid,
            profile: self.profile,
            noise: self.noise,
            seed: self.seed,
            n_frames: self.n_frames,
            images: entries,
        };
        let mut f = BufWriter::new(File::create(dir.join(DATASET_INDEX))?);
        serde_json::to_writer_pretty(&mut f, &index)?;
        f.flush()?;
        written.push((DATASET_INDEX.to_string(), "index"));
        Ok(written)
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let index: DatasetIndex =
            serde_json::from_reader(BufReader::new(File::open(dir.join(DATASET_INDEX))?))?;
        index.grid.validate()?;
        index.profile.validate()?;
        if index.images.len() != index.inputs.len() * index.analyzers.len() {
            return Err(Error::format(
                "dataset index",
                "image count does not match inputs × analyzers",
            ));
        }
        let mut images = Vec::with_capacity(index.images.len());
        for e in &index.images {
            let sc: Sidecar =
                serde_json::from_reader(BufReader::new(File::open(dir.join(&e.sidecar))?))?;
            if sc.grid != index.grid || sc.profile != index.profile {
                return Err(Error::format(
                    "dataset",
                    format!("{} disagrees with the index grid/profile", e.sidecar),
                ));
            }
            let (n, counts) = read_pgm(BufReader::new(File::open(dir.join(&e.image))?))?;
            if n != index.grid.n_pixels {
                return Err(Error::format(
                    "dataset",
                    format!("{} is {n} pixels wide", e.image),
                ));
            }
            images.push(CountsImage {
                grid: sc.grid,
                counts,
                meta: CountsMeta {
                    input: sc.input_pol,
                    analyzer: sc.analyzer,
                    n_frames: sc.n_frames,
                    seed: sc.seed,
                    noise: sc.noise,
                    projection_prob: sc.projection_prob,
                    dark: sc.dark,
                },
            });
        }
        Ok(TomographyDataset {
            inputs: index.inputs,
            analyzers: index.analyzers,
            grid: index.grid,
            profile: index.profile,
            noise: index.noise,
            seed: index.seed,
            n_frames: index.n_frames,
            images,
        })
    }
}
