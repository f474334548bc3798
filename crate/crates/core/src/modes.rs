//! Free-space spatial modes sampled on the camera grid.
//!
//! OAM ring modes `u_l(r, φ) = R_|l|(r) e^{ilφ}` and the Hermite-Bessel
//! combinations built from them. Every field is L2-normalized with respect
//! to the discrete quadrature `Σ |u|² · pixel_area`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j;
use crate::error::{Error, Result};

/// Largest |l| accepted by [`oam_mode`].
pub const MAX_ABS_L: i32 = 8;

/// Square sampling grid of the Fourier (camera) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_pixels: usize,
    pub extent: f64,
}

impl GridSpec {
    pub fn new(n_pixels: usize, extent: f64) -> Result<Self> {
        let g = GridSpec { n_pixels, extent };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pixels < 8 {
            return Err(Error::Input(format!(
                "grid needs at least 8 pixels per axis, got {}",
                self.n_pixels
            )));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::Input(format!(
                "grid extent must be positive, got {}",
                self.extent
            )));
        }
        Ok(())
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 * self.extent / self.n_pixels as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size().powi(2)
    }

    /// Center of pixel `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.pixel_size()
    }

    pub fn len(&self) -> usize {
        self.n_pixels * self.n_pixels
    }

    pub fn is_empty(&self) -> bool {
        self.n_pixels == 0
    }

    /// `(x, y)` of the flat pixel index; rows run along y, row 0 at `y = -extent`.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        (
            self.coord(idx % self.n_pixels),
            self.coord(idx / self.n_pixels),
        )
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_pixels: 128,
            extent: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `J_|l|(k_r r) · exp(-r²/w²)`
    BesselWindowed,
    /// `(r/r₀)^|l| · exp(-(r - r₀)²/w²)`
    GaussianRing,
}

/// Radial factor shared by all OAM components of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialProfile {
    pub kind: ProfileKind,
    /// Radial wavenumber `k_r` (bessel-windowed) or ring radius `r₀` (gaussian-ring).
    pub ring_scale: f64,
    pub window_width: f64,
}

impl RadialProfile {
    /// Default bessel-windowed profile for a grid: `k_r = 6/extent`, `w = extent/5`.
    pub fn default_for(grid: &GridSpec) -> Self {
        RadialProfile {
            kind: ProfileKind::BesselWindowed,
            ring_scale: 6.0 / grid.extent,
            window_width: grid.extent / 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ring_scale > 0.0 && self.ring_scale.is_finite()) {
            return Err(Error::Input(format!(
                "ring_scale must be positive, got {}",
                self.ring_scale
            )));
        }
        if !(self.window_width > 0.0 && self.window_width.is_finite()) {
            return Err(Error::Input(format!(
                "window_width must be positive, got {}",
                self.window_width
            )));
        }
        Ok(())
    }

    pub fn eval(&self, abs_l: u32, r: f64) -> f64 {
        let w2 = self.window_width * self.window_width;
        match self.kind {
            ProfileKind::BesselWindowed => {
                bessel_j(abs_l as i32, self.ring_scale * r) * (-r * r / w2).exp()
            }
            ProfileKind::GaussianRing => {
                let r0 = self.ring_scale;
                (r / r0).powi(abs_l as i32) * (-(r - r0).powi(2) / w2).exp()
            }
        }
    }
}

/// Complex scalar field sampled on a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub grid: GridSpec,
    pub values: Vec<C64>,
    pub label: String,
}

impl ModeField {
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.pixel_area()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        // already unit within rounding: leave untouched so normalization is idempotent
        if n > 0.0 && (n - 1.0).abs() > 1e-13 {
            let inv = 1.0 / n;
            for v in &mut self.values {
                *v *= inv;
            }
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn at(&self, ix: usize, iy: usize) -> C64 {
        self.values[iy * self.grid.n_pixels + ix]
    }

    /// Samples the field on a grid turned by `quarter_turns · 90°`, i.e.
    /// `out(p) = self(R p)`. For an OAM mode this multiplies by `e^{ilθ}`.
    pub fn rotated(&self, quarter_turns: i32) -> ModeField {
        let n = self.grid.n_pixels;
        let mut cur = self.values.clone();
        for _ in 0..quarter_turns.rem_euclid(4) {
            let mut next = vec![C64::new(0.0, 0.0); cur.len()];
            for iy in 0..n {
                for ix in 0..n {
                    // R(x, y) = (-y, x)
                    next[iy * n + ix] = cur[ix * n + (n - 1 - iy)];
                }
            }
            cur = next;
        }
        ModeField {
            grid: self.grid,
            values: cur,
            label: self.label.clone(),
        }
    }

    /// Linear combination `Σ c_k f_k` of fields on a common grid.
    pub fn combine(terms: &[(C64, &ModeField)], label: impl Into<String>) -> Result<ModeField> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Input("empty mode combination".into()))?
            .1;
        let mut values = vec![C64::new(0.0, 0.0); first.values.len()];
        for (c, f) in terms {
            if f.grid != first.grid {
                return Err(Error::Dimension(
                    "mode fields live on different grids".into(),
                ));
            }
            for (acc, v) in values.iter_mut().zip(&f.values) {
                *acc += c * v;
            }
        }
        Ok(ModeField {
            grid: first.grid,
            values,
            label: label.into(),
        })
    }

    /// CSV: `# label,n_pixels,extent` header then one row per grid row of `re+imj` cells.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.label.contains(',') || self.label.contains('\n') {
            return Err(Error::Input(format!(
                "label {:?} cannot be stored in CSV",
                self.label
            )));
        }
        writeln!(
            w,
            "# {},{},{}",
            self.label, self.grid.n_pixels, self.grid.extent
        )?;
        let n = self.grid.n_pixels;
        for row in self.values.chunks(n) {
            let cells: Vec<String> = row.iter().map(|v| format!("{}{:+}j", v.re, v.im)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<ModeField> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("mode CSV", "empty file"))??;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::format("mode CSV", "header must start with '# '"))?;
        let mut parts = header.rsplitn(3, ',');
        let extent: f64 = parse_num(parts.next(), "extent")?;
        let n_pixels: usize = parse_num(parts.next(), "n_pixels")?;
        let label = parts
            .next()
            .ok_or_else(|| Error::format("mode CSV", "missing label"))?
            .to_string();
        let grid = GridSpec::new(n_pixels, extent)?;
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for cell in line.split(',') {
                values.push(parse_complex(cell.trim())?);
            }
            if values.len() - before != n_pixels {
                return Err(Error::format(
                    "mode CSV",
                    format!(
                        "row {row} has {} cells, expected {n_pixels}",
                        values.len() - before
                    ),
                ));
            }
        }
        if values.len() != grid.len() {
            return Err(Error::format(
                "mode CSV",
                format!(
                    "expected {} rows, found {}",
                    n_pixels,
                    values.len() / n_pixels
                ),
            ));
        }
        Ok(ModeField {
            grid,
            values,
            label,
        })
    }
}

fn parse_num<T: FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    s.and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::format("mode CSV", format!("bad {what} in header")))
}

fn parse_complex(cell: &str) -> Result<C64> {
    let bad = || Error::format("mode CSV", format!("bad complex cell {cell:?}"));
    let body = cell.strip_suffix('j').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im: f64 = body[split..].parse().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

/// OAM ring mode `R_|l|(r) e^{ilφ}`, L2-normalized on the grid.
pub fn oam_mode(l: i32, grid: &GridSpec, profile: &RadialProfile) -> Result<ModeField> {
    grid.validate()?;
    profile.validate()?;
    if l.abs() > MAX_ABS_L {
        return Err(Error::Input(format!(
            "|l| = {} exceeds {MAX_ABS_L}",
            l.abs()
        )));
    }
    let required = 8 * l.unsigned_abs() as usize;
    if grid.n_pixels < required {
        return Err(Error::Resolution {
            l,
            n_pixels: grid.n_pixels,
            required,
        });
    }
    let n = grid.n_pixels;
    let abs_l = l.unsigned_abs();
    let mut values = vec![C64::new(0.0, 0.0); grid.len()];
    values.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
        let y = grid.coord(iy);
        for (ix, v) in row.iter_mut().enumerate() {
            let x = grid.coord(ix);
            let r = x.hypot(y);
            let phi = y.atan2(x);
            *v = C64::from_polar(1.0, l as f64 * phi) * profile.eval(abs_l, r);
        }
    });
    Ok(ModeField {
        grid: *grid,
        values,
        label: format!("l={l:+}"),
    }
    .normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HbKind {
    HB11,
    HB20,
    HB02,
}

impl HbKind {
    pub const ALL: [HbKind; 3] = [HbKind::HB20, HbKind::HB11, HbKind::HB02];

    /// Coefficients on `(|l=-2⟩, |l=0⟩, |l=2⟩)`, unnormalized as written.
    pub fn oam_coefficients(self) -> [C64; 3] {
        let s = FRAC_1_SQRT_2;
        match self {
            HbKind::HB11 => [C64::new(0.0, s), C64::new(0.0, 0.0), C64::new(0.0, -s)],
            HbKind::HB20 => [C64::new(0.5, 0.0), C64::new(1.0, 0.0), C64::new(0.5, 0.0)],
            HbKind::HB02 => [C64::new(-0.5, 0.0), C64::new(1.0, 0.0), C64::new(-0.5, 0.0)],
        }
    }
}

impl fmt::Display for HbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HbKind::HB11 => "HB11",
            HbKind::HB20 => "HB20",
            HbKind::HB02 => "HB02",
        };
        f.write_str(s)
    }
}

impl FromStr for HbKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HB11" => Ok(HbKind::HB11),
            "HB20" => Ok(HbKind::HB20),
            "HB02" => Ok(HbKind::HB02),
            _ => Err(Error::Input(format!("unknown Hermite-Bessel mode {s:?}"))),
        }
    }
}

/// The three OAM modes `l = -2, 0, 2` that span every image of the platform.
#[derive(Debug, Clone)]
pub struct ModeBank {
    pub grid: GridSpec,
    pub profile: RadialProfile,
    /// Ordered as [`crate::OAM_ORDER`].
    pub oam: [ModeField; 3],
}

impl ModeBank {
    pub fn new(grid: &GridSpec, profile: &RadialProfile) -> Result<Self> {
        let oam = [
            oam_mode(-2, grid, profile)?,
            oam_mode(0, grid, profile)?,
            oam_mode(2, grid, profile)?,
        ];
        Ok(ModeBank {
            grid: *grid,
            profile: *profile,
            oam,
        })
    }

    pub fn mode(&self, l: i32) -> Option<&ModeField> {
        crate::OAM_ORDER
            .iter()
            .position(|&k| k == l)
            .map(|i| &self.oam[i])
    }

    pub fn hermite_bessel(&self, kind: HbKind) -> ModeField {
        let c = kind.oam_coefficients();
        let terms: Vec<(C64, &ModeField)> = c.iter().copied().zip(self.oam.iter()).collect();
        ModeField::combine(&terms, kind.to_string())
            .expect("bank modes share a grid")
            .normalized()
    }
}

/// Hermite-Bessel mode built from the OAM modes with its defining coefficients.
pub fn hermite_bessel_mode(
    kind: HbKind,
    grid: &GridSpec,
    profile: &RadialProfile,
) -> Result<ModeField> {
    Ok(ModeBank::new(grid, profile)?.hermite_bessel(kind))
}

/// Discrete `⟨a|b⟩ = Σ conj(a)·b·pixel_area`.
pub fn inner_product(a: &ModeField, b: &ModeField) -> Result<C64> {
    if a.grid != b.grid {
        return Err(Error::Dimension(format!(
            "grid {:?} vs {:?}",
            (a.grid.n_pixels, a.grid.extent),
            (b.grid.n_pixels, b.grid.extent)
        )));
    }
    let s: C64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(s * a.grid.pixel_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(n: usize) -> (GridSpec, RadialProfile) {
        let g = GridSpec::new(n, 4.0).unwrap();
        (g, RadialProfile::default_for(&g))
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(7, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        let g = GridSpec::new(8, 2.0).unwrap();
        assert_eq!(g.coord(0), -1.75);
        assert_eq!(g.coord(7), 1.75);
        assert_eq!(g.pixel_area(), 0.25);
    }

    #[test]
    fn vortex_core_is_dark() {
        // odd grid so that one pixel sits on the axis
        let (g, p) = setup(129);
        let u = oam_mode(2, &g, &p).unwrap();
        let c = u.at(64, 64);
        assert!(c.norm() < 1e-6 * u.max_abs());
    }

    #[test]
    fn l0_is_real_and_rotation_symmetric() {
        let (g, p) = setup(64);
        let u = oam_mode(0, &g, &p).unwrap();
        assert!(u.values.iter().all(|v| v.im.abs() < 1e-15));
        let r = u.rotated(1);
        let dev = u
            .values
            .iter()
            .zip(&r.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-12, "{dev}");
    }

    #[test]
    fn opposite_charges_are_conjugate() {
        let (g, p) = setup(64);
        let a = oam_mode(2, &g, &p).unwrap();
        let b = oam_mode(-2, &g, &p).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x.norm() - y.norm()).abs() < 1e-14);
            assert!((x - y.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn resolution_and_range_errors() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let p = RadialProfile::default_for(&g);
        assert!(matches!(
            oam_mode(3, &g, &p),
            Err(Error::Resolution { l: 3, .. })
        ));
        assert!(oam_mode(2, &g, &p).is_ok());
        let big = GridSpec::new(128, 4.0).unwrap();
        assert!(matches!(oam_mode(9, &big, &p), Err(Error::Input(_))));
    }

    #[test]
    fn hb11_vanishes_on_x_axis_and_has_four_lobes() {
        let (g, p) = setup(129);
        let hb = hermite_bessel_mode(HbKind::HB11, &g, &p).unwrap();
        let max = hb.max_abs();
        for ix in 65..129 {
            assert!(hb.at(ix, 64).norm() < 1e-6 * max);
        }
        // sample the ring of maximal intensity on a fine circle
        let bank = ModeBank::new(&g, &p).unwrap();
        let ring_r = (0..4000)
            .map(|k| k as f64 * 4.0 / 4000.0)
            .max_by(|a, b| p.eval(2, *a).abs().total_cmp(&p.eval(2, *b).abs()))
            .unwrap();
        let lobe = |phi: f64| (2.0 * phi).sin().powi(2) * p.eval(2, ring_r).powi(2);
        let maxima: Vec<f64> = (0..360)
            .map(|d| d as f64 * PI / 180.0)
            .filter(|&t| {
                let h = PI / 180.0;
                lobe(t) > lobe(t - h) && lobe(t) >= lobe(t + h)
            })
            .collect();
        assert_eq!(maxima.len(), 4);
        for (m, want) in
            maxima
                .iter()
                .zip([PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0])
        {
            assert!((m - want).abs() < 1e-9);
        }
        // the sampled field agrees with √2·sin 2φ·R₂ up to normalization
        let u2 = bank.mode(2).unwrap();
        let scale = hb.at(100, 100).norm() / u2.at(100, 100).norm();
        let (x, y) = (g.coord(100), g.coord(100));
        let expected = (2.0 * y.atan2(x)).sin().abs() * 2f64.sqrt();
        assert!((scale - expected).abs() < 1e-9);
    }

    #[test]
    fn hb20_hb02_overlap_follows_coefficients() {
        // (1,2,1)·(-1,2,-1) / (|(1,2,1)|·|(-1,2,-1)|) = 2/6
        let (g, p) = setup(128);
        let a = hermite_bessel_mode(HbKind::HB20, &g, &p).unwrap();
        let b = hermite_bessel_mode(HbKind::HB02, &g, &p).unwrap();
        let ip = inner_product(&a, &b).unwrap();
        assert!((ip.re - 1.0 / 3.0).abs() < 1e-12, "{ip}");
        assert!(ip.im.abs() < 1e-14);
        let c = hermite_bessel_mode(HbKind::HB11, &g, &p).unwrap();
        assert!(inner_product(&a, &c).unwrap().norm() < 1e-12);
        assert!(inner_product(&b, &c).unwrap().norm() < 1e-12);
    }

    #[test]
    fn normalization_and_conjugate_symmetry() {
        let (g, p) = setup(128);
        let u = oam_mode(2, &g, &p).unwrap();
        assert!((inner_product(&u, &u).unwrap().re - 1.0).abs() < 1e-9);
        let v = oam_mode(0, &g, &p).unwrap();
        let w = hermite_bessel_mode(HbKind::HB20, &g, &p).unwrap();
        let ab = inner_product(&v, &w).unwrap();
        let ba = inner_product(&w, &v).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-15);
        let renorm = u.clone().normalized();
        for (a, b) in u.values.iter().zip(&renorm.values) {
            assert!((a - b).norm() <= 1e-15);
        }
    }

    #[test]
    fn grid_mismatch_is_dimension_error() {
        let (g, p) = setup(64);
        let (h, _) = setup(32);
        let a = oam_mode(0, &g, &p).unwrap();
        let b = oam_mode(0, &h, &p).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn rotation_covariance() {
        let (g, p) = setup(64);
        for l in [-2, 0, 1, 2, 3] {
            let u = oam_mode(l, &g, &p).unwrap();
            for k in 1..4 {
                let theta = k as f64 * PI / 2.0;
                let phase = C64::from_polar(1.0, l as f64 * theta);
                let r = u.rotated(k);
                let err = r
                    .values
                    .iter()
                    .zip(&u.values)
                    .map(|(a, b)| (a - phase * b).norm())
                    .fold(0.0, f64::max);
                assert!(err <= 1e-6, "l={l} k={k} err={err}");
            }
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let g = GridSpec::new(8, 1.5).unwrap();
        let p = RadialProfile::default_for(&g);
        let mut u = oam_mode(-1, &g, &p).unwrap();
        u.values[3] = C64::new(-0.0, -1e-300);
        u.values[4] = C64::new(1.0e10, -0.0);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = ModeField::read_csv(&buf[..]).unwrap();
        assert_eq!(back.label, u.label);
        assert_eq!(back.grid, u.grid);
        for (a, b) in back.values.iter().zip(&u.values) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let text = "# x,8,1\n1+0j,2+0j\n";
        assert!(ModeField::read_csv(text.as_bytes()).is_err());
    }
}
