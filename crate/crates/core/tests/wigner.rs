use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tamq_core::wigner::*;
use tamq_core::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn labels(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("m{i}")).collect()
}

fn random_state(rng: &mut impl Rng, d: usize) -> SinglePhotonModeState {
    let a = DMatrix::from_fn(d, d, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace().re;
    SinglePhotonModeState::new(rho / c(tr, 0.0), labels(d)).unwrap()
}

fn random_point(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<C64> {
    (0..d)
        .map(|_| {
            c(
                scale * rng.sample::<f64, _>(StandardNormal),
                scale * rng.sample::<f64, _>(StandardNormal),
            )
        })
        .collect()
}

fn at(s: &SinglePhotonModeState, z: &[C64]) -> f64 {
    wigner_value(s, &PhasePoint::new(z.to_vec()).unwrap()).unwrap()
}

// ---- displaced-parity oracle in a truncated Fock space ----

const FOCK: usize = 6;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    (0..=n)
        .map(|i| (-1f64).powi(i as i32) * binomial(n + k, n - i) * x.powi(i as i32) / factorial(i))
        .sum()
}

/// `⟨m|D(a)|n⟩`
fn displacement(m: usize, n: usize, a: C64) -> C64 {
    let x = a.norm_sqr();
    let g = (-x / 2.0).exp();
    if m >= n {
        (factorial(n) / factorial(m)).sqrt() * a.powu((m - n) as u32) * g * laguerre(n, m - n, x)
    } else {
        (factorial(m) / factorial(n)).sqrt()
            * (-a.conj()).powu((n - m) as u32)
            * g
            * laguerre(m, n - m, x)
    }
}

/// `D(z)ΠD(z)† = D(2z)Π` on modes 0..=FOCK.
fn displaced_parity(z: C64) -> DMatrix<C64> {
    let k = FOCK + 1;
    DMatrix::from_fn(k, k, |m, n| {
        displacement(m, n, 2.0 * z) * if n % 2 == 0 { 1.0 } else { -1.0 }
    })
}

fn oracle(rho1: &DMatrix<C64>, z: &[C64]) -> f64 {
    assert_eq!(z.len(), 2);
    let op = displaced_parity(z[0]).kronecker(&displaced_parity(z[1]));
    // one photon in mode A: |1,0>; in mode B: |0,1>
    let k = FOCK + 1;
    let slot = [k, 1];
    let mut tr = c(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            tr += rho1[(i, j)] * op[(slot[j], slot[i])];
        }
    }
    assert!(tr.im.abs() < 1e-12);
    (2.0 / PI).powi(2) * tr.re
}

#[test]
fn closed_form_matches_displaced_parity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut states: Vec<SinglePhotonModeState> =
        (0..4).map(|_| random_state(&mut rng, 2)).collect();
    states.push(OutputState::J1.ideal());
    let mut worst: f64 = 0.0;
    for s in &states {
        for _ in 0..20 {
            let z = random_point(&mut rng, 2, 0.6);
            worst = worst.max((at(s, &z) - oracle(&s.rho1, &z)).abs());
        }
    }
    assert!(worst <= 1e-8, "worst deviation {worst:e}");
}

#[test]
fn origin_value_is_state_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let s = random_state(&mut rng, 2);
        let w = at(&s, &[c(0.0, 0.0); 2]);
        assert!((w + 4.0 / (PI * PI)).abs() <= 1e-12);
        // product of a one-photon and a vacuum value at the origin
        assert!((w - (-2.0 / PI) * (2.0 / PI)).abs() <= 1e-12);
        assert!((oracle(&s.rho1, &[c(0.0, 0.0); 2]) - w).abs() <= 1e-12);
    }
}

#[test]
fn zero_crossing_on_the_alpha_plane() {
    let s = OutputState::J1.ideal();
    for phase in [0.0, 0.7, 2.0, 4.5] {
        let r = FRAC_1_SQRT_2;
        let z = [C64::from_polar(r, phase), c(0.0, 0.0)];
        assert!(at(&s, &z).abs() < 1e-15);
        assert!(oracle(&s.rho1, &z).abs() < 1e-10);
        let inside = [C64::from_polar(0.9 * r, phase), c(0.0, 0.0)];
        let outside = [C64::from_polar(1.1 * r, phase), c(0.0, 0.0)];
        assert!(at(&s, &inside) < 0.0 && at(&s, &outside) > 0.0);
    }
}

#[test]
fn sign_follows_the_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = random_state(&mut rng, 2);
    for _ in 0..200 {
        let z = random_point(&mut rng, 2, 0.8);
        let q: f64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (z[i].conj() * s.rho1[(i, j)] * z[j]).re)
            .sum();
        assert_eq!(at(&s, &z) > 0.0, 4.0 * q > 1.0);
    }
}

#[test]
fn rea_reb_anchors_of_j1() {
    let s = OutputState::J1.ideal();
    let k = 4.0 / (PI * PI);
    for t in [0.1, 0.5, 1.0, 1.7] {
        let diag = at(&s, &[c(t, 0.0), c(t, 0.0)]);
        assert!((diag + k * (-4.0 * t * t).exp()).abs() < 1e-14);
        assert!(diag < 0.0);
    }
    let anti = at(&s, &[c(1.0, 0.0), c(-1.0, 0.0)]);
    assert!((anti - k * 7.0 * (-4.0f64).exp()).abs() < 1e-14);

    let slice = wigner_slice(&s, SlicePair::ReAReB, 121, 3.0).unwrap();
    for i in 0..121 {
        assert!(slice.at(i, i) < 0.0);
    }
    // (1, -1) is grid point 80, 40
    assert!((slice.coord(80) - 1.0).abs() < 1e-12 && (slice.coord(40) + 1.0).abs() < 1e-12);
    assert!((slice.at(80, 40) - anti).abs() < 1e-15);
}

#[test]
fn single_mode_slice_is_rotation_symmetric() {
    let s = OutputState::J1.ideal();
    let n = 121;
    let slice = wigner_slice(&s, SlicePair::ReAImA, n, 3.0).unwrap();
    let mid = n / 2;
    assert!((slice.at(mid, mid) + 4.0 / (PI * PI)).abs() <= 1e-12);
    let mut worst: f64 = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            // 90° rotation of the grid: (x, y) -> (-y, x)
            worst = worst.max((slice.at(ix, iy) - slice.at(n - 1 - iy, ix)).abs());
        }
    }
    assert!(worst <= 1e-12, "{worst:e}");
}

#[test]
fn slice_rank_structure() {
    let s = OutputState::J1.ideal();
    let scale = 4.0 / (PI * PI);
    for pair in [SlicePair::ReAImB, SlicePair::ReBImA] {
        let slice = wigner_slice(&s, pair, 61, 3.0).unwrap();
        // e^{-2(x²+y²)}(4ρ_AA x² + 4ρ_BB y² − 1) is a sum of two products
        assert!(slice.rank_residual(1) > 1e-2 * scale, "{}", pair.id());
        assert!(slice.rank_residual(2) < 1e-12 * scale, "{}", pair.id());
    }
    let corr = wigner_slice(&s, SlicePair::ReAReB, 61, 3.0).unwrap();
    assert!(corr.rank_residual(2) > 1e-2 * scale);
    assert!(corr.rank_residual(3) < 1e-12 * scale);

    // a photon in mode A alone factorizes on every pair except its own plane
    let one = SinglePhotonModeState::pure(&[c(1.0, 0.0), c(0.0, 0.0)], labels(2)).unwrap();
    for pair in SlicePair::ALL
        .into_iter()
        .filter(|&p| p != SlicePair::ReAImA)
    {
        let slice = wigner_slice(&one, pair, 61, 3.0).unwrap();
        assert!(slice.rank_residual(1) < 1e-12 * scale, "{}", pair.id());
    }
}

#[test]
fn mode_exchange_symmetry_of_j1() {
    let s = OutputState::J1.ideal();
    let a = wigner_slice(&s, SlicePair::ReAImA, 41, 3.0).unwrap();
    let mut b = wigner_slice(&s, SlicePair::ReBImB, 41, 3.0).unwrap();
    b.pair = a.pair.clone();
    assert!(slice_difference(&a, &b).unwrap().max_abs <= 1e-10);
    assert_eq!(slice_difference(&a, &a).unwrap().max_abs, 0.0);
}

#[test]
fn admixture_asymmetry_is_percent_level() {
    let ideal = OutputState::J1.ideal();
    let partner = OutputState::J1.partner();
    assert!((partner.rho1.trace().re - 1.0).abs() < 1e-15);
    let mixed = ideal.mix(&partner, 0.02).unwrap();
    let worst = SlicePair::ALL
        .iter()
        .map(|&p| {
            let a = wigner_slice(&ideal, p, 121, 3.0).unwrap();
            let b = wigner_slice(&mixed, p, 121, 3.0).unwrap();
            slice_difference(&a, &b).unwrap().max_abs
        })
        .fold(0.0, f64::max);
    // (16ε/π²)·max 2|xy|e^{-2(x²+y²)} = (16ε/π²)·e^{-1}/2, hit exactly at x = y = 1/2
    let expected = 16.0 * 0.02 / (PI * PI) * (-1.0f64).exp() / 2.0;
    assert!((worst - expected).abs() < 1e-12, "{worst} vs {expected}");
    assert!((5e-3..=5e-2).contains(&worst));
}

#[test]
fn quadrature_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut states = vec![
        OutputState::J1.ideal(),
        SinglePhotonModeState::new(DMatrix::identity(2, 2) * c(0.5, 0.0), labels(2)).unwrap(),
    ];
    states.push(random_state(&mut rng, 2));
    for s in &states {
        let norm = wigner_norm(s, 4.0, 41).unwrap();
        assert!((norm - 1.0).abs() <= 1e-3, "{norm}");
    }
    assert!(wigner_norm(&states[0], 2.0, 41).is_err());
}

#[test]
fn photon_number_witness() {
    let s = OutputState::J1.ideal();
    let n = photon_number(&s, 4.0, 41).unwrap();
    assert!((n - 1.0).abs() <= 5e-3, "{n}");
    // symmetric ordering: ∫W(2|α|²+2|β|²−1) = 2⟨N⟩ + 1
    let w = phase_space_average(&s, 4.0, 41, |z| {
        2.0 * (z[0].norm_sqr() + z[1].norm_sqr()) - 1.0
    })
    .unwrap();
    assert!((w - 3.0).abs() <= 5e-3, "{w}");
}

#[test]
fn four_mode_states() {
    for o in [OutputState::JPlus, OutputState::JMinus] {
        let s = o.ideal();
        assert_eq!(s.dim(), 4);
        assert!((at(&s, &[c(0.0, 0.0); 4]) + (2.0 / PI).powi(4)).abs() < 1e-15);
        let ax = |mode, quadrature| Axis { mode, quadrature };
        let slice =
            wigner_slice_axes(&s, ax(0, Quadrature::Re), ax(3, Quadrature::Re), 21, 3.0).unwrap();
        assert_eq!(slice.values.len(), 441);
        assert!(slice.min() < 0.0);
    }
    // the four-mode partner swaps the linear outputs
    assert_eq!(OutputState::JPlus.partner(), OutputState::JMinus.ideal());
}

#[test]
fn csv_round_trip() {
    let s = OutputState::J1.ideal();
    let slice = wigner_slice(&s, SlicePair::ReAReB, 31, 2.5).unwrap();
    let mut buf = Vec::new();
    slice.write_csv(&mut buf).unwrap();
    let back = WignerSlice::read_csv(buf.as_slice(), slice.axes).unwrap();
    assert_eq!(back, slice);
    assert!(WignerSlice::read_csv(&b"# ReA-ReB,3,1\nx\n0,1,2\n"[..], slice.axes).is_err());
}

#[test]
fn invalid_inputs() {
    let s = OutputState::J1.ideal();
    assert!(wigner_value(&s, &PhasePoint::origin(3)).is_err());
    assert!(PhasePoint::new(vec![c(f64::NAN, 0.0)]).is_err());
    assert!(wigner_slice(&s, SlicePair::ReAImA, 2, 3.0).is_err());
    assert!(SinglePhotonModeState::new(DMatrix::identity(2, 2), labels(2)).is_err());
    let not_herm =
        DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]);
    assert!(SinglePhotonModeState::new(not_herm, labels(2)).is_err());
    assert!("J2".parse::<OutputState>().is_err());
    assert!("ReA-ReA".parse::<SlicePair>().is_err());
}

fn unitary(rng: &mut impl Rng, d: usize) -> DMatrix<C64> {
    let a = DMatrix::from_fn(d, d, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    a.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_in_the_state(seed in any::<u64>(), eps in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_state(&mut rng, 2);
        let b = random_state(&mut rng, 2);
        let m = a.mix(&b, eps).unwrap();
        for _ in 0..10 {
            let z = random_point(&mut rng, 2, 1.0);
            let lhs = at(&m, &z);
            let rhs = (1.0 - eps) * at(&a, &z) + eps * at(&b, &z);
            prop_assert!((lhs - rhs).abs() <= 1e-14);
        }
    }

    #[test]
    fn covariant_under_mode_unitaries(seed in any::<u64>(), d in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, d);
        let u = unitary(&mut rng, d);
        let rotated = SinglePhotonModeState::new(&u * &s.rho1 * u.adjoint(), labels(d));
        // rounding can leave a 1e-16 Hermiticity defect; symmetrize
        let r = rotated.unwrap_or_else(|_| {
            let m = &u * &s.rho1 * u.adjoint();
            SinglePhotonModeState::new((&m + m.adjoint()) * c(0.5, 0.0), labels(d)).unwrap()
        });
        for _ in 0..10 {
            let z = random_point(&mut rng, d, 0.8);
            let zv = nalgebra::DVector::from_vec(z.clone());
            let back: Vec<C64> = (u.adjoint() * zv).iter().copied().collect();
            prop_assert!((at(&r, &z) - at(&s, &back)).abs() <= 1e-12);
        }
    }

    #[test]
    fn bounded_everywhere(seed in any::<u64>(), d in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, d);
        let lmax = s.lambda_max();
        let pref = (2.0 / PI).powi(d as i32);
        for _ in 0..20 {
            let z = random_point(&mut rng, d, 1.2);
            let r2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            let w = at(&s, &z);
            prop_assert!(w.abs() <= pref * (4.0 * lmax * r2).max(1.0) * (-2.0 * r2).exp() + 1e-15);
            prop_assert!(w >= -pref);
        }
    }
}
