//! Polarization and four-level spin-orbit state algebra.
//!
//! The circular logical basis is
//! `|1⟩ = |σ+, l=0⟩, |2⟩ = |σ-, l=0⟩, |3⟩ = |σ+, l=-2⟩, |4⟩ = |σ-, l=2⟩`.
//! The linear/Hermite-Bessel basis `|1̃⟩..|4̃⟩` is related to it by the fixed
//! unitary [`lin_hb_frame`].

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

pub type Matrix4c = Matrix4<C64>;
pub type Vector4c = Vector4<C64>;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const READ_HERMITIAN_TOL: f64 = 1e-9;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pure polarization state `c_H |H⟩ + c_V |V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesVector {
    pub h: C64,
    pub v: C64,
}

impl JonesVector {
    pub fn new(h: C64, v: C64) -> Result<Self> {
        let j = JonesVector { h, v };
        let n = j.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Validity(format!(
                "Jones vector norm² {n} differs from 1"
            )));
        }
        Ok(j)
    }

    pub fn normalized(h: C64, v: C64) -> Result<Self> {
        let n = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Input(
                "Jones vector must be nonzero and finite".into(),
            ));
        }
        Ok(JonesVector { h: h / n, v: v / n })
    }

    /// Builds `c₊|σ+⟩ + c₋|σ-⟩`.
    pub fn from_circular(plus: C64, minus: C64) -> Result<Self> {
        let s = FRAC_1_SQRT_2;
        let i = c(0.0, 1.0);
        Self::new((plus + minus) * s, (plus - minus) * i * s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &JonesVector) -> C64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// Amplitudes `(⟨σ+|p⟩, ⟨σ-|p⟩)`.
    pub fn circular_coeffs(&self) -> [C64; 2] {
        [
            Polarization::SigmaPlus.jones().inner(self),
            Polarization::SigmaMinus.jones().inner(self),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    #[serde(rename = "sigma+")]
    SigmaPlus,
    #[serde(rename = "sigma-")]
    SigmaMinus,
    D,
    A,
}

impl Polarization {
    /// The analyzer and input set of the standard measurement.
    pub const STANDARD: [Polarization; 4] = [
        Polarization::H,
        Polarization::V,
        Polarization::SigmaPlus,
        Polarization::SigmaMinus,
    ];

    pub fn jones(self) -> JonesVector {
        let s = FRAC_1_SQRT_2;
        let (h, v) = match self {
            Polarization::H => (c(1.0, 0.0), c(0.0, 0.0)),
            Polarization::V => (c(0.0, 0.0), c(1.0, 0.0)),
            Polarization::SigmaPlus => (c(s, 0.0), c(0.0, s)),
            Polarization::SigmaMinus => (c(s, 0.0), c(0.0, -s)),
            Polarization::D => (c(s, 0.0), c(s, 0.0)),
            Polarization::A => (c(s, 0.0), c(-s, 0.0)),
        };
        JonesVector { h, v }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarization::H => "H",
            Polarization::V => "V",
            Polarization::SigmaPlus => "sigma+",
            Polarization::SigmaMinus => "sigma-",
            Polarization::D => "D",
            Polarization::A => "A",
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Polarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Polarization::H,
            Polarization::V,
            Polarization::SigmaPlus,
            Polarization::SigmaMinus,
            Polarization::D,
            Polarization::A,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::Input(format!("unknown polarization {s:?}")))
    }
}

/// Jones vector for one of the named polarizations.
pub fn polarization(name: &str) -> Result<JonesVector> {
    Ok(name.parse::<Polarization>()?.jones())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    pub fn jones(self) -> JonesVector {
        match self {
            Spin::Plus => Polarization::SigmaPlus.jones(),
            Spin::Minus => Polarization::SigmaMinus.jones(),
        }
    }
}

/// `(spin, l)` content of each circular-basis slot.
pub const CIRC_SLOTS: [(Spin, i32); 4] = [
    (Spin::Plus, 0),
    (Spin::Minus, 0),
    (Spin::Plus, -2),
    (Spin::Minus, 2),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    #[serde(rename = "circ-oam")]
    CircOam,
    #[serde(rename = "lin-hb")]
    LinHb,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::CircOam => "circ-oam",
            Basis::LinHb => "lin-hb",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circ-oam" => Ok(Basis::CircOam),
            "lin-hb" => Ok(Basis::LinHb),
            _ => Err(Error::Input(format!("unknown basis {s:?}"))),
        }
    }
}

/// Columns are `|1̃⟩..|4̃⟩` expressed in the circular basis.
pub fn lin_hb_frame() -> Matrix4c {
    let s = FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let p = c(s, 0.0);
    let m = c(-s, 0.0);
    Matrix4c::from_columns(&[
        Vector4c::new(z, p, z, p),
        Vector4c::new(p, z, p, z),
        Vector4c::new(z, m, z, p),
        Vector4c::new(p, z, m, z),
    ])
}

/// Unitary taking coordinates in `from` to coordinates in `to`.
pub fn basis_transform(from: Basis, to: Basis) -> Matrix4c {
    match (from, to) {
        (a, b) if a == b => Matrix4c::identity(),
        (Basis::CircOam, Basis::LinHb) => lin_hb_frame().adjoint(),
        _ => lin_hb_frame(),
    }
}

/// Pure four-level state with a basis tag.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOrbitState {
    pub amplitudes: Vector4c,
    pub basis: Basis,
}

impl SpinOrbitState {
    pub fn new(amplitudes: Vector4c, basis: Basis) -> Result<Self> {
        let n = amplitudes.norm_squared();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Validity(format!("state norm² {n} differs from 1")));
        }
        Ok(SpinOrbitState { amplitudes, basis })
    }

    pub fn normalized(amplitudes: Vector4c, basis: Basis) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Input(
                "state vector must be nonzero and finite".into(),
            ));
        }
        Ok(SpinOrbitState {
            amplitudes: amplitudes / c(n, 0.0),
            basis,
        })
    }

    pub fn change_basis(&self, target: Basis) -> SpinOrbitState {
        if target == self.basis {
            return self.clone();
        }
        SpinOrbitState {
            amplitudes: basis_transform(self.basis, target) * self.amplitudes,
            basis: target,
        }
    }

    /// `⟨self|other⟩`, both in the same basis.
    pub fn inner(&self, other: &SpinOrbitState) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::Input(format!(
                "inner product across bases {} and {}",
                self.basis, other.basis
            )));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            entries: self.amplitudes * self.amplitudes.adjoint(),
            basis: self.basis,
        }
    }
}

/// 4×4 density matrix with a basis tag.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: Matrix4c,
    pub basis: Basis,
}

/// On-disk form: real and imaginary parts as row-major 4×4 arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityDoc {
    pub basis: Basis,
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
}

impl DensityMatrix {
    pub fn new(entries: Matrix4c, basis: Basis) -> Result<Self> {
        let d = DensityMatrix { entries, basis };
        d.validate()?;
        Ok(d)
    }

    pub fn maximally_mixed(basis: Basis) -> Self {
        DensityMatrix {
            entries: Matrix4c::identity() * c(0.25, 0.0),
            basis,
        }
    }

    /// Convex combination `Σ w_k ρ_k`; weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let basis = parts
            .first()
            .ok_or_else(|| Error::Input("empty mixture".into()))?
            .1
            .basis;
        let mut acc = Matrix4c::zeros();
        let mut total = 0.0;
        for (w, rho) in parts {
            if *w < 0.0 || rho.basis != basis {
                return Err(Error::Input(
                    "mixture needs nonnegative weights and one basis".into(),
                ));
            }
            acc += rho.entries * c(*w, 0.0);
            total += w;
        }
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::Input(format!("mixture weights sum to {total}")));
        }
        DensityMatrix::new(acc, basis)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let a = self.entries;
        (a - a.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let e = SymmetricEigen::new(hermitize(&self.entries));
        let mut v: [f64; 4] = [
            e.eigenvalues[0],
            e.eigenvalues[1],
            e.eigenvalues[2],
            e.eigenvalues[3],
        ];
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .entries
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::Validity(
                "density matrix has non-finite entries".into(),
            ));
        }
        let h = self.hermiticity_defect();
        if h > HERMITIAN_TOL {
            return Err(Error::Validity(format!(
                "density matrix not Hermitian (defect {h:e})"
            )));
        }
        let t = self.trace();
        if (t - 1.0).abs() > TRACE_TOL {
            return Err(Error::Validity(format!(
                "density matrix trace {t} differs from 1"
            )));
        }
        let min = self.eigenvalues()[0];
        if min < -PSD_TOL {
            return Err(Error::Validity(format!(
                "density matrix has eigenvalue {min:e} < 0"
            )));
        }
        Ok(())
    }

    pub fn change_basis(&self, target: Basis) -> DensityMatrix {
        if target == self.basis {
            return self.clone();
        }
        let u = basis_transform(self.basis, target);
        DensityMatrix {
            entries: hermitize(&(u * self.entries * u.adjoint())),
            basis: target,
        }
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn max_imag(&self) -> f64 {
        self.entries.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn expectation(&self, psi: &Vector4c) -> f64 {
        psi.dotc(&(self.entries * psi)).re
    }

    pub fn to_doc(&self) -> DensityDoc {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                re[i][j] = self.entries[(i, j)].re;
                im[i][j] = self.entries[(i, j)].im;
            }
        }
        DensityDoc {
            basis: self.basis,
            re,
            im,
        }
    }

    /// Accepts matrices Hermitian to 1e-9, symmetrizes them, then validates.
    pub fn from_doc(doc: &DensityDoc) -> Result<Self> {
        let m = Matrix4c::from_fn(|i, j| c(doc.re[i][j], doc.im[i][j]));
        let defect = (m - m.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if !(defect <= READ_HERMITIAN_TOL) {
            return Err(Error::Validity(format!(
                "density matrix document is not Hermitian (defect {defect:e})"
            )));
        }
        DensityMatrix::new(hermitize(&m), doc.basis)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.to_doc())?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let doc: DensityDoc = serde_json::from_reader(r)?;
        Self::from_doc(&doc)
    }
}

pub(crate) fn hermitize(m: &Matrix4c) -> Matrix4c {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// PSD square root by eigendecomposition; negative eigenvalues are clamped to 0.
/// Returns the root and the largest clamped magnitude.
pub fn sqrt_psd(m: &Matrix4c) -> (Matrix4c, f64) {
    let e = SymmetricEigen::new(hermitize(m));
    let mut clamped: f64 = 0.0;
    let roots = e.eigenvalues.map(|l| {
        if l < 0.0 {
            clamped = clamped.max(-l);
        }
        c(l.max(0.0).sqrt(), 0.0)
    });
    let v = e.eigenvectors;
    (v * Matrix4c::from_diagonal(&roots) * v.adjoint(), clamped)
}

/// Principal eigenvector when `m` is pure to 1e-12.
fn pure_vector(m: &DensityMatrix) -> Option<Vector4c> {
    let e = SymmetricEigen::new(hermitize(&m.entries));
    let (k, lmax) = e
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    (lmax >= 1.0 - 1e-12).then(|| e.eigenvectors.column(k).into_owned())
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`; if either argument is pure the
/// expectation value of the other is returned instead.
pub fn fidelity(rho: &DensityMatrix, target: &DensityMatrix) -> Result<f64> {
    rho.validate()?;
    target.validate()?;
    if rho.basis != target.basis {
        return Err(Error::Input(format!(
            "fidelity across bases {} and {}",
            rho.basis, target.basis
        )));
    }
    if let Some(psi) = pure_vector(target) {
        return Ok(rho.expectation(&psi).clamp(0.0, 1.0));
    }
    if let Some(psi) = pure_vector(rho) {
        return Ok(target.expectation(&psi).clamp(0.0, 1.0));
    }
    Ok(uhlmann(&rho.entries, &target.entries).clamp(0.0, 1.0))
}

/// The general formula without any pure-state shortcut.
pub fn uhlmann(rho: &Matrix4c, sigma: &Matrix4c) -> f64 {
    let (s, c1) = sqrt_psd(rho);
    let inner = hermitize(&(s * sigma * s));
    let e = SymmetricEigen::new(inner);
    // eigenvalues at roundoff level relative to the largest are numerically zero
    let floor = 64.0 * f64::EPSILON * e.eigenvalues.max().max(0.0);
    let mut c2: f64 = 0.0;
    let tr: f64 = e
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < 0.0 {
                c2 = c2.max(-l);
            }
            if l > floor {
                l.sqrt()
            } else {
                0.0
            }
        })
        .sum();
    if c1.max(c2) > 0.0 {
        log::debug!(
            "fidelity: clamped negative eigenvalues up to {:e}",
            c1.max(c2)
        );
    }
    tr * tr
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}
