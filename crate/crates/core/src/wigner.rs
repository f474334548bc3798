//! Wigner function of one photon shared among `d` modes.
//!
//! For a state confined to the single-photon subspace with mode density
//! matrix `ρ₁`, `W(z) = (2/π)^d · e^{−2|z|²} · (4 z†ρ₁z − 1)`. Rotating the
//! modes so that the photon occupies a single mode reduces this to a Fock-1
//! Wigner function times vacuum factors.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::full_channel;
use crate::error::{Error, Result};
use crate::states::{DensityMatrix, Polarization};
use crate::C64;

/// Complex phase-space coordinate per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub z: Vec<C64>,
}

impl PhasePoint {
    pub fn new(z: Vec<C64>) -> Result<Self> {
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Input(
                "phase-space point has non-finite entries".into(),
            ));
        }
        Ok(PhasePoint { z })
    }

    pub fn origin(d: usize) -> Self {
        PhasePoint {
            z: vec![C64::new(0.0, 0.0); d],
        }
    }
}

/// One photon in `d` modes, described by its `d×d` mode density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhotonModeState {
    pub rho1: DMatrix<C64>,
    pub labels: Vec<String>,
}

impl SinglePhotonModeState {
    pub fn new(rho1: DMatrix<C64>, labels: Vec<String>) -> Result<Self> {
        let d = rho1.nrows();
        if d == 0 || rho1.ncols() != d {
            return Err(Error::Input(
                "mode density matrix must be square and nonempty".into(),
            ));
        }
        if labels.len() != d {
            return Err(Error::Input(format!(
                "{} labels for {d} modes",
                labels.len()
            )));
        }
        let herm = (&rho1 - rho1.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::Validity(format!(
                "mode density matrix not Hermitian ({herm:e})"
            )));
        }
        let tr = rho1.trace().re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::Validity(format!("mode density matrix trace {tr}")));
        }
        let s = SinglePhotonModeState { rho1, labels };
        let min = s.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::Validity(format!(
                "mode density matrix eigenvalue {min:e}"
            )));
        }
        Ok(s)
    }

    /// Pure state with the given (renormalized) amplitudes.
    pub fn pure(amps: &[C64], labels: Vec<String>) -> Result<Self> {
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(Error::Input("zero mode amplitudes".into()));
        }
        let d = amps.len();
        let rho = DMatrix::from_fn(d, d, |i, j| amps[i] * amps[j].conj() / (n * n));
        Self::new(rho, labels)
    }

    pub fn dim(&self) -> usize {
        self.rho1.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.rho1 + self.rho1.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(1 − eps)·self + eps·other`
    pub fn mix(&self, other: &SinglePhotonModeState, eps: f64) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::Input(
                "mixing states of different mode counts".into(),
            ));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Input(format!("mixing weight {eps} outside [0, 1]")));
        }
        let rho = &self.rho1 * C64::new(1.0 - eps, 0.0) + &other.rho1 * C64::new(eps, 0.0);
        Self::new(rho, self.labels.clone())
    }

    /// Mode density matrix of `rho` restricted to the given circular-basis slots and renormalized.
    pub fn from_density(rho: &DensityMatrix, slots: &[usize], labels: Vec<String>) -> Result<Self> {
        let r = rho.change_basis(crate::Basis::CircOam).entries;
        if slots.iter().any(|&s| s >= 4) {
            return Err(Error::Input("slot index out of range".into()));
        }
        let d = slots.len();
        let sub = DMatrix::from_fn(d, d, |i, j| r[(slots[i], slots[j])]);
        let tr = sub.trace().re;
        if !(tr > 1e-12) {
            return Err(Error::Input(
                "state has no weight on the selected modes".into(),
            ));
        }
        let sub = sub / C64::new(tr, 0.0);
        let sub = (&sub + sub.adjoint()) * C64::new(0.5, 0.0);
        Self::new(sub, labels)
    }
}

/// Output states of the platform with a fixed choice of Wigner modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputState {
    #[serde(rename = "J1")]
    J1,
    #[serde(rename = "J-1")]
    JMinus1,
    #[serde(rename = "J+")]
    JPlus,
    #[serde(rename = "J-")]
    JMinus,
}

impl OutputState {
    pub const ALL: [OutputState; 4] = [
        OutputState::J1,
        OutputState::JMinus1,
        OutputState::JPlus,
        OutputState::JMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutputState::J1 => "J1",
            OutputState::JMinus1 => "J-1",
            OutputState::JPlus => "J+",
            OutputState::JMinus => "J-",
        }
    }

    /// Input polarization that produces this state.
    pub fn polarization(self) -> Polarization {
        match self {
            OutputState::J1 => Polarization::SigmaPlus,
            OutputState::JMinus1 => Polarization::SigmaMinus,
            OutputState::JPlus => Polarization::H,
            OutputState::JMinus => Polarization::V,
        }
    }

    /// Circular-basis slots used as modes `(α, β, ...)`.
    pub fn slots(self) -> &'static [usize] {
        match self {
            // α = |σ-, 2⟩, β = |σ+, 0⟩
            OutputState::J1 => &[3, 0],
            // α = |σ-, 0⟩, β = |σ+, -2⟩
            OutputState::JMinus1 => &[1, 2],
            OutputState::JPlus | OutputState::JMinus => &[0, 1, 2, 3],
        }
    }

    pub fn labels(self) -> Vec<String> {
        const NAMES: [&str; 4] = ["sigma+,l=0", "sigma-,l=0", "sigma+,l=-2", "sigma-,l=2"];
        self.slots().iter().map(|&s| NAMES[s].to_string()).collect()
    }

    /// Mode state of `rho` in this state's frame.
    pub fn mode_state(self, rho: &DensityMatrix) -> Result<SinglePhotonModeState> {
        SinglePhotonModeState::from_density(rho, self.slots(), self.labels())
    }

    /// Mode state of the ideal channel output.
    pub fn ideal(self) -> SinglePhotonModeState {
        let rho = full_channel(&self.polarization().jones()).to_density();
        self.mode_state(&rho)
            .expect("ideal outputs populate their modes")
    }

    /// The opposite output (J1 ↔ J-1, J+ ↔ J-) seen in this state's mode frame.
    /// J1 and J-1 share no modes, so the two-mode partner is taken as the
    /// orthogonal state `I − ρ₁` of the ideal pure output.
    pub fn partner(self) -> SinglePhotonModeState {
        let own = self.ideal();
        match self {
            OutputState::J1 | OutputState::JMinus1 => {
                let d = own.dim();
                let rho = DMatrix::<C64>::identity(d, d) - &own.rho1;
                SinglePhotonModeState::new(rho, own.labels)
                    .expect("complement of a pure state is a state")
            }
            OutputState::JPlus => OutputState::JMinus.ideal(),
            OutputState::JMinus => OutputState::JPlus.ideal(),
        }
    }
}

impl fmt::Display for OutputState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OutputState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OutputState::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown output state {s:?}")))
    }
}

fn closed_form(rho1: &DMatrix<C64>, z: &[C64]) -> f64 {
    let d = z.len();
    let mut r2 = 0.0;
    let mut quad = C64::new(0.0, 0.0);
    for i in 0..d {
        r2 += z[i].norm_sqr();
        let mut row = C64::new(0.0, 0.0);
        for j in 0..d {
            row += rho1[(i, j)] * z[j];
        }
        quad += z[i].conj() * row;
    }
    (2.0 / PI).powi(d as i32) * (-2.0 * r2).exp() * (4.0 * quad.re - 1.0)
}

pub fn wigner_value(s: &SinglePhotonModeState, p: &PhasePoint) -> Result<f64> {
    if p.z.len() != s.dim() {
        return Err(Error::Input(format!(
            "phase point has {} coordinates for {} modes",
            p.z.len(),
            s.dim()
        )));
    }
    Ok(closed_form(&s.rho1, &p.z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    Re,
    Im,
}

/// One real phase-space coordinate: a quadrature of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub mode: usize,
    pub quadrature: Quadrature,
}

impl Axis {
    fn set(&self, z: &mut [C64], value: f64) {
        match self.quadrature {
            Quadrature::Re => z[self.mode].re = value,
            Quadrature::Im => z[self.mode].im = value,
        }
    }

    pub fn name(&self) -> String {
        let q = match self.quadrature {
            Quadrature::Re => "Re",
            Quadrature::Im => "Im",
        };
        let m = match self.mode {
            0 => "A".to_string(),
            1 => "B".to_string(),
            k => format!("M{k}"),
        };
        format!("{q}{m}")
    }
}

/// The six coordinate pairs of a two-mode phase space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlicePair {
    ReAImA,
    ReBImB,
    ReAReB,
    ImAImB,
    ReAImB,
    ReBImA,
}

impl SlicePair {
    pub const ALL: [SlicePair; 6] = [
        SlicePair::ReAImA,
        SlicePair::ReBImB,
        SlicePair::ReAReB,
        SlicePair::ImAImB,
        SlicePair::ReAImB,
        SlicePair::ReBImA,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SlicePair::ReAImA => "ReA-ImA",
            SlicePair::ReBImB => "ReB-ImB",
            SlicePair::ReAReB => "ReA-ReB",
            SlicePair::ImAImB => "ImA-ImB",
            SlicePair::ReAImB => "ReA-ImB",
            SlicePair::ReBImA => "ReB-ImA",
        }
    }

    pub fn axes(self) -> (Axis, Axis) {
        let ax = |mode, quadrature| Axis { mode, quadrature };
        use Quadrature::{Im, Re};
        match self {
            SlicePair::ReAImA => (ax(0, Re), ax(0, Im)),
            SlicePair::ReBImB => (ax(1, Re), ax(1, Im)),
            SlicePair::ReAReB => (ax(0, Re), ax(1, Re)),
            SlicePair::ImAImB => (ax(0, Im), ax(1, Im)),
            SlicePair::ReAImB => (ax(0, Re), ax(1, Im)),
            SlicePair::ReBImA => (ax(1, Re), ax(0, Im)),
        }
    }
}

impl FromStr for SlicePair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SlicePair::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::Input(format!("unknown slice pair {s:?}")))
    }
}

pub const DEFAULT_POINTS: usize = 121;
pub const DEFAULT_EXTENT: f64 = 3.0;

/// `W` on an `n × n` grid over two coordinates, the rest held at 0.
/// `values[iy * n + ix]` with `x` along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerSlice {
    pub pair: String,
    pub axes: (Axis, Axis),
    pub n_points: usize,
    pub extent: f64,
    pub values: Vec<f64>,
}

impl WignerSlice {
    /// Axis sample `i`, spanning `[-extent, extent]` inclusive.
    pub fn coord(&self, i: usize) -> f64 {
        axis_coord(i, self.n_points, self.extent)
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.n_points + ix]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_points;
        DMatrix::from_fn(n, n, |iy, ix| self.values[iy * n + ix])
    }

    /// Singular values of the value matrix, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.matrix().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Max-abs residual of the best rank-`k` approximation `Σ σ_i u_i v_iᵀ`.
    pub fn rank_residual(&self, k: usize) -> f64 {
        let m = self.matrix();
        let svd = m.clone().svd(true, true);
        let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut approx = DMatrix::zeros(m.nrows(), m.ncols());
        for &i in order.iter().take(k) {
            approx += u.column(i) * vt.row(i) * svd.singular_values[i];
        }
        (m - approx).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// CSV: `# pair,n_points,extent`, an axis row, then one row per second-axis value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {},{},{}", self.pair, self.n_points, self.extent)?;
        let xs: Vec<String> = (0..self.n_points)
            .map(|i| self.coord(i).to_string())
            .collect();
        writeln!(
            w,
            "{}\\{},{}",
            self.axes.1.name(),
            self.axes.0.name(),
            xs.join(",")
        )?;
        for iy in 0..self.n_points {
            let row: Vec<String> = (0..self.n_points)
                .map(|ix| self.at(ix, iy).to_string())
                .collect();
            writeln!(w, "{},{}", self.coord(iy), row.join(","))?;
        }
        Ok(())
    }

    /// Reads the values back from [`WignerSlice::write_csv`] output.
    pub fn read_csv<R: BufRead>(r: R, axes: (Axis, Axis)) -> Result<WignerSlice> {
        let bad = |d: &str| Error::format("slice CSV", d.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))??;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| bad("missing header"))?;
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 3 {
            return Err(bad("header needs pair,n_points,extent"));
        }
        let n: usize = parts[1].parse().map_err(|_| bad("n_points"))?;
        let extent: f64 = parts[2].parse().map_err(|_| bad("extent"))?;
        lines.next().ok_or_else(|| bad("missing axis row"))??;
        let mut values = Vec::with_capacity(n * n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for cell in line.split(',').skip(1) {
                values.push(cell.parse::<f64>().map_err(|_| bad("value"))?);
            }
        }
        if values.len() != n * n {
            return Err(bad("value count does not match n_points"));
        }
        Ok(WignerSlice {
            pair: parts[0].to_string(),
            axes,
            n_points: n,
            extent,
            values,
        })
    }
}

fn axis_coord(i: usize, n: usize, extent: f64) -> f64 {
    -extent + 2.0 * extent * i as f64 / (n - 1) as f64
}

/// Slice over two arbitrary coordinates of a `d`-mode state.
pub fn wigner_slice_axes(
    s: &SinglePhotonModeState,
    x_axis: Axis,
    y_axis: Axis,
    n_points: usize,
    extent: f64,
) -> Result<WignerSlice> {
    if n_points < 3 {
        return Err(Error::Input(format!(
            "slice needs at least 3 points per axis, got {n_points}"
        )));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::Input(format!(
            "slice extent must be positive, got {extent}"
        )));
    }
    let d = s.dim();
    if x_axis.mode >= d || y_axis.mode >= d || x_axis == y_axis {
        return Err(Error::Input(
            "slice axes must be two distinct coordinates of the state".into(),
        ));
    }
    let values: Vec<f64> = (0..n_points * n_points)
        .into_par_iter()
        .map(|k| {
            let mut z = vec![C64::new(0.0, 0.0); d];
            x_axis.set(&mut z, axis_coord(k % n_points, n_points, extent));
            y_axis.set(&mut z, axis_coord(k / n_points, n_points, extent));
            closed_form(&s.rho1, &z)
        })
        .collect();
    Ok(WignerSlice {
        pair: format!("{}-{}", x_axis.name(), y_axis.name()),
        axes: (x_axis, y_axis),
        n_points,
        extent,
        values,
    })
}

/// One of the six named slices of a two-mode state.
pub fn wigner_slice(
    s: &SinglePhotonModeState,
    pair: SlicePair,
    n_points: usize,
    extent: f64,
) -> Result<WignerSlice> {
    if s.dim() != 2 {
        return Err(Error::Input(format!(
            "named slices need 2 modes, state has {}",
            s.dim()
        )));
    }
    let (a, b) = pair.axes();
    let mut slice = wigner_slice_axes(s, a, b, n_points, extent)?;
    slice.pair = pair.id().to_string();
    Ok(slice)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceDifference {
    pub max_abs: f64,
    pub values: Vec<f64>,
}

/// Pointwise `a − b`.
pub fn slice_difference(a: &WignerSlice, b: &WignerSlice) -> Result<SliceDifference> {
    if a.pair != b.pair || a.n_points != b.n_points || a.extent != b.extent {
        return Err(Error::Input(format!(
            "slices differ in pair or grid ({} {}×{} vs {} {}×{})",
            a.pair, a.n_points, a.extent, b.pair, b.n_points, b.extent
        )));
    }
    let values: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let max_abs = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(SliceDifference { max_abs, values })
}

/// Tensor trapezoid rule of `W·f` over `[-extent, extent]^4` for a two-mode state.
pub fn phase_space_average<F>(
    s: &SinglePhotonModeState,
    extent: f64,
    n_points: usize,
    weight: F,
) -> Result<f64>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    if s.dim() != 2 {
        return Err(Error::Input(format!(
            "phase-space integrals need 2 modes, state has {}",
            s.dim()
        )));
    }
    if !(extent >= 3.0) {
        return Err(Error::Input(format!(
            "quadrature extent must be at least 3, got {extent}"
        )));
    }
    if n_points < 3 {
        return Err(Error::Input(
            "quadrature needs at least 3 points per axis".into(),
        ));
    }
    let h = 2.0 * extent / (n_points - 1) as f64;
    let w = |i: usize| {
        if i == 0 || i == n_points - 1 {
            0.5
        } else {
            1.0
        }
    };
    let partial: Vec<f64> = (0..n_points)
        .into_par_iter()
        .map(|i0| {
            let mut acc = 0.0;
            let mut z = [
                C64::new(axis_coord(i0, n_points, extent), 0.0),
                C64::new(0.0, 0.0),
            ];
            for i1 in 0..n_points {
                z[0].im = axis_coord(i1, n_points, extent);
                for i2 in 0..n_points {
                    z[1].re = axis_coord(i2, n_points, extent);
                    for i3 in 0..n_points {
                        z[1].im = axis_coord(i3, n_points, extent);
                        let wt = w(i1) * w(i2) * w(i3);
                        acc += wt * closed_form(&s.rho1, &z) * weight(&z);
                    }
                }
            }
            w(i0) * acc
        })
        .collect();
    Ok(partial.iter().sum::<f64>() * h.powi(4))
}

/// `∫ W d⁴z`, equal to 1 for a normalized state.
pub fn wigner_norm(s: &SinglePhotonModeState, extent: f64, n_points: usize) -> Result<f64> {
    phase_space_average(s, extent, n_points, |_| 1.0)
}

/// `∫ W·(|α|² + |β|² − 1) d⁴z`: the mean photon number, 1 for a single photon.
/// Symmetric ordering maps `|z_i|²` to `a_i†a_i + 1/2`, hence the offset of 1.
pub fn photon_number(s: &SinglePhotonModeState, extent: f64, n_points: usize) -> Result<f64> {
    phase_space_average(s, extent, n_points, |z| {
        z[0].norm_sqr() + z[1].norm_sqr() - 1.0
    })
}
