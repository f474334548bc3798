//! The coupling maps of the platform as a quantum channel.
//!
//! `in_couple` sends circular polarization `σ±` to the near-field TAM mode
//! `|J±1⟩`; `out_couple` sends `|J_n⟩` to `(|σ-, n+1⟩ − |σ+, n−1⟩)/√2`.
//! Their composition is an isometry from polarization space into the
//! four-level spin-orbit space.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{
    fidelity, Basis, DensityMatrix, JonesVector, Matrix4c, Spin, SpinOrbitState, Vector4c,
    CIRC_SLOTS,
};
use crate::C64;

const NORM_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Amplitudes over `(|J-1⟩, |J+1⟩)` plus an optional `|J0⟩` component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamState {
    pub j_minus: C64,
    pub j_plus: C64,
    pub j_zero: Option<C64>,
}

impl TamState {
    pub fn new(j_minus: C64, j_plus: C64) -> Result<Self> {
        Self {
            j_minus,
            j_plus,
            j_zero: None,
        }
        .checked()
    }

    pub fn extended(j_minus: C64, j_zero: C64, j_plus: C64) -> Result<Self> {
        Self {
            j_minus,
            j_plus,
            j_zero: Some(j_zero),
        }
        .checked()
    }

    fn checked(self) -> Result<Self> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Validity(format!(
                "TAM state norm² {n} differs from 1"
            )));
        }
        Ok(self)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.j_minus.norm_sqr() + self.j_plus.norm_sqr() + self.j_zero.map_or(0.0, |z| z.norm_sqr())
    }

    /// `(n, amplitude)` pairs for the populated TAM orders.
    pub fn terms(&self) -> Vec<(i32, C64)> {
        let mut t = vec![(-1, self.j_minus)];
        if let Some(z) = self.j_zero {
            t.push((0, z));
        }
        t.push((1, self.j_plus));
        t
    }
}

/// `σ+ ↦ |J+1⟩`, `σ- ↦ |J-1⟩`.
pub fn in_couple(p: &JonesVector) -> TamState {
    let [plus, minus] = p.circular_coeffs();
    TamState {
        j_minus: minus,
        j_plus: plus,
        j_zero: None,
    }
}

/// Out-coupled image of a single TAM mode as `(spin, l, amplitude)` terms.
pub fn out_couple_mode(n: i32) -> [(Spin, i32, C64); 2] {
    let s = FRAC_1_SQRT_2;
    if n == 0 {
        [(Spin::Plus, -1, c(s, 0.0)), (Spin::Minus, 1, c(-s, 0.0))]
    } else {
        [
            (Spin::Minus, n + 1, c(s, 0.0)),
            (Spin::Plus, n - 1, c(-s, 0.0)),
        ]
    }
}

/// Sparse spin ⊗ OAM state, for outputs that may leave the logical basis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamOamState {
    pub terms: BTreeMap<(Spin, i32), C64>,
}

impl SamOamState {
    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Restriction to the circular logical basis; fails if any weight lies outside it.
    pub fn to_logical(&self) -> Result<SpinOrbitState> {
        let mut amps = Vector4c::zeros();
        for (&(spin, l), &a) in &self.terms {
            match CIRC_SLOTS.iter().position(|&k| k == (spin, l)) {
                Some(k) => amps[k] += a,
                None if a.norm() == 0.0 => {}
                None => {
                    return Err(Error::UnsupportedMode(format!(
                        "component ({spin:?}, l={l}) lies outside the logical basis"
                    )))
                }
            }
        }
        SpinOrbitState::new(amps, Basis::CircOam)
    }
}

/// Out-coupling for any TAM state, including `|J0⟩`.
pub fn out_couple_extended(t: &TamState) -> SamOamState {
    let mut out = SamOamState::default();
    for (n, amp) in t.terms() {
        for (spin, l, k) in out_couple_mode(n) {
            *out.terms.entry((spin, l)).or_insert(c(0.0, 0.0)) += amp * k;
        }
    }
    out
}

/// Out-coupling into the circular logical basis. A populated `|J0⟩`
/// component leaves the basis and is rejected.
pub fn out_couple(t: &TamState) -> Result<SpinOrbitState> {
    if let Some(z) = t.j_zero {
        if z.norm() != 0.0 {
            return Err(Error::UnsupportedMode(
                "|J0⟩ out-couples to l = ±1, outside the logical basis; use out_couple_extended"
                    .into(),
            ));
        }
    }
    out_couple_extended(t).to_logical()
}

/// `out_couple(in_couple(p))`.
pub fn full_channel(p: &JonesVector) -> SpinOrbitState {
    SpinOrbitState {
        amplitudes: ChannelIsometry::default().v * nalgebra::Vector2::from(p.circular_coeffs()),
        basis: Basis::CircOam,
    }
}

/// The channel as a 4×2 isometry from `(σ+, σ-)` amplitudes to the circular basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelIsometry {
    pub v: nalgebra::Matrix4x2<C64>,
}

impl Default for ChannelIsometry {
    fn default() -> Self {
        let col = |n: i32| {
            let t = TamState {
                j_minus: c(if n < 0 { 1.0 } else { 0.0 }, 0.0),
                j_plus: c(if n > 0 { 1.0 } else { 0.0 }, 0.0),
                j_zero: None,
            };
            out_couple(&t)
                .expect("J±1 stays in the logical basis")
                .amplitudes
        };
        ChannelIsometry {
            v: nalgebra::Matrix4x2::from_columns(&[col(1), col(-1)]),
        }
    }
}

impl ChannelIsometry {
    /// Max deviation of `V†V` from the 2×2 identity.
    pub fn isometry_defect(&self) -> f64 {
        (self.v.adjoint() * self.v - Matrix2::identity())
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    /// `V ρ V†` for a 2×2 polarization density matrix in the `(σ+, σ-)` basis.
    pub fn apply(&self, rho_in: &Matrix2<C64>) -> Result<DensityMatrix> {
        DensityMatrix::new(self.v * rho_in * self.v.adjoint(), Basis::CircOam)
    }
}

pub fn as_isometry() -> ChannelIsometry {
    ChannelIsometry::default()
}

fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4c {
    Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

fn pauli_x() -> Matrix2<C64> {
    Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

fn hadamard() -> Matrix2<C64> {
    let s = FRAC_1_SQRT_2;
    Matrix2::new(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0))
}

/// Register index `2·tam + sam`; CNOT flipping `target` when `control` is 1.
fn cnot(control_is_tam: bool) -> Matrix4c {
    Matrix4::from_fn(|i, j| {
        let (tam, sam) = (j / 2, j % 2);
        let (t2, s2) = if control_is_tam {
            (tam, sam ^ tam)
        } else {
            (tam ^ sam, sam)
        };
        if i == 2 * t2 + s2 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

/// Two-qubit realization (TAM qubit ⊗ SAM qubit) of the channel:
/// prepare SAM, reset TAM to |0⟩, `M1`, Hadamard on TAM, X on SAM, `M2`.
/// Register state `|tam, sam⟩` is read as circular slot `2·tam + sam`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitModel {
    pub m1: Matrix4c,
    pub m2: Matrix4c,
}

impl Default for CircuitModel {
    fn default() -> Self {
        let id = Matrix2::identity();
        let sign = Matrix4::from_diagonal(&Vector4::new(
            c(-1.0, 0.0),
            c(1.0, 0.0),
            c(1.0, 0.0),
            c(1.0, 0.0),
        ));
        CircuitModel {
            // copy SAM into the freshly reset TAM qubit
            m1: cnot(false),
            m2: sign * kron2(&id, &pauli_x()) * cnot(true),
        }
    }
}

fn unitary_defect(m: &Matrix4c) -> f64 {
    (m.adjoint() * m - Matrix4c::identity())
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max)
}

impl CircuitModel {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("M1", &self.m1), ("M2", &self.m2)] {
            let d = unitary_defect(m);
            if !(d <= UNITARY_TOL) {
                return Err(Error::Validity(format!(
                    "{name} is not unitary (defect {d:e})"
                )));
            }
        }
        Ok(())
    }

    /// Everything after the reset as one unitary on the register.
    pub fn unitary(&self) -> Matrix4c {
        let id = Matrix2::identity();
        let fixed = kron2(&id, &pauli_x()) * kron2(&hadamard(), &id);
        self.m2 * fixed * self.m1
    }

    /// Full channel on a two-qubit register density matrix, including the
    /// dissipative TAM reset with Kraus operators `|0⟩⟨0|`, `|0⟩⟨1|`.
    pub fn apply_register(&self, rho: &Matrix4c) -> Result<Matrix4c> {
        self.validate()?;
        let k0 = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let k1 = Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let id = Matrix2::identity();
        let mut reset = Matrix4c::zeros();
        for k in [k0, k1] {
            let kk = kron2(&k, &id);
            reset += kk * rho * kk.adjoint();
        }
        let u = self.unitary();
        Ok(u * reset * u.adjoint())
    }
}

/// Runs a polarization state through the circuit and reads the register in the circular basis.
pub fn circuit_apply(model: &CircuitModel, p: &JonesVector) -> Result<SpinOrbitState> {
    model.validate()?;
    let [plus, minus] = p.circular_coeffs();
    // TAM reset to |0⟩, SAM carries the polarization
    let register = Vector4c::new(plus, minus, c(0.0, 0.0), c(0.0, 0.0));
    SpinOrbitState::new(model.unitary() * register, Basis::CircOam)
}

/// State fidelity between the circuit output and `full_channel`.
pub fn circuit_fidelity(model: &CircuitModel, p: &JonesVector) -> Result<f64> {
    let a = circuit_apply(model, p)?.to_density();
    let b = full_channel(p).to_density();
    fidelity(&a, &b)
}
