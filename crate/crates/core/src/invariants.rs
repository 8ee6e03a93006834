//! Property tests over random fields.

use std::sync::OnceLock;

use crate::analytic::{sample, TrigField};
use crate::moment_maps::{conformal_pull, conformal_push, constraint_quantity};
use crate::operators::{self, pointwise_norm_sq, MetricState};
use crate::{build_surface, SectionField, SurfaceKind, SurfaceModel, Weight};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: Complex64 = Complex64 { re: 0.2, im: 1.3 };

fn torus() -> &'static SurfaceModel {
    static S: OnceLock<SurfaceModel> = OnceLock::new();
    S.get_or_init(|| build_surface(SurfaceKind::Torus { modulus: TAU }, 16).unwrap())
}

fn bolza() -> &'static SurfaceModel {
    static S: OnceLock<SurfaceModel> = OnceLock::new();
    S.get_or_init(|| build_surface(SurfaceKind::Bolza, 48).unwrap())
}

fn noise(s: &SurfaceModel, w: Weight, seed: u64, amp: f64) -> SectionField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SectionField::new(w, (0..s.len()).map(|_| Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))).collect())
}

fn trig(seed: u64, real: bool) -> TrigField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for _ in 0..5 {
        let (m, n) = (rng.gen_range(-4..=4), rng.gen_range(-4..=4));
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        modes.push((m, n, c));
        if real {
            modes.push((-m, -n, c.conj()));
        }
    }
    TrigField { tau: TAU, modes }
}

fn trig_section(w: Weight, seed: u64, real: bool) -> SectionField {
    let t = trig(seed, real);
    let f = sample(torus(), w, |z| t.value(z));
    if real {
        SectionField::from_real(w, &f.real_parts())
    } else {
        f
    }
}

#[test]
fn automorphy_round_trip_is_exact_for_small_weights() {
    for a in -2..=2 {
        for b in -2..=2 {
            let w = Weight(a, b);
            assert!(bolza().automorphy_round_trip(w) < 1e-12, "{w:?}");
            assert!(torus().automorphy_round_trip(w) < 1e-14, "{w:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inner_product_is_hermitian(seed in any::<u64>(), bolza_side in any::<bool>()) {
        let s = if bolza_side { bolza() } else { torus() };
        let a = noise(s, Weight::ONE_FORM, seed, 1.0);
        let b = noise(s, Weight::ONE_FORM, seed ^ 0x5555, 1.0);
        let m = MetricState::background(s);
        let ab = m.l2_inner(&a, &b).unwrap();
        let ba = m.l2_inner(&b, &a).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-13 * m.l2_norm(&a).unwrap() * m.l2_norm(&b).unwrap());
        prop_assert!(m.l2_inner(&a, &a).unwrap().re > 0.0);
    }

    #[test]
    fn constraint_transport(seed in any::<u64>(), amp in 0.01f64..2.0, bolza_side in any::<bool>()) {
        let s = if bolza_side { bolza() } else { torus() };
        let m = MetricState::background(s);
        let q = noise(s, Weight::QUADRATIC, seed, amp);
        let f = noise(s, Weight::FUNCTION, seed.wrapping_add(1), 1.0).real_parts();
        let lhs = constraint_quantity(&m, &f, &q).unwrap();
        let rhs = pointwise_norm_sq(&MetricState::conformal(s, &f).unwrap(), &q).unwrap();
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() <= 1e-13 * r.abs().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn push_then_pull_restores_the_metric(seed in any::<u64>(), bolza_side in any::<bool>()) {
        let s = if bolza_side { bolza() } else { torus() };
        let m = MetricState::background(s);
        let raw = noise(s, Weight::QUADRATIC, seed, 1.0);
        let peak = pointwise_norm_sq(&m, &raw).unwrap().into_iter().fold(0.0, f64::max);
        let q = raw.scaled(Complex64::new((0.95 / peak).sqrt(), 0.0));
        let back = conformal_pull(&conformal_push(&m, &q).unwrap(), &q).unwrap();
        for (a, b) in back.density.iter().zip(&m.density) {
            prop_assert!((a - b).abs() <= 1e-13 * b);
        }
    }

    #[test]
    fn norm_scales_inversely_with_density(seed in any::<u64>(), c in 0.1f64..10.0) {
        let s = torus();
        let m = MetricState::background(s);
        let q = noise(s, Weight::QUADRATIC, seed, 1.0);
        let n0 = pointwise_norm_sq(&m, &q).unwrap();
        let n1 = pointwise_norm_sq(&m.scaled(&vec![c; s.len()]).unwrap(), &q).unwrap();
        for (a, b) in n0.iter().zip(&n1) {
            prop_assert!((a / (c * c) - b).abs() <= 1e-13 * b);
        }
    }

    #[test]
    fn laplacian_integrates_to_zero(seed in any::<u64>()) {
        let s = torus();
        let m = MetricState::background(s);
        let f = trig_section(Weight::FUNCTION, seed, true).real_parts();
        let lf = operators::laplacian_real(&m, &f).unwrap();
        let scale: f64 = lf.iter().fold(0.0, |a, v| a.max(v.abs()));
        prop_assert!(m.integrate_real(&lf).abs() <= 1e-12 * scale.max(1.0));
        let energy: Vec<f64> = lf.iter().zip(&f).map(|(a, b)| a * b).collect();
        prop_assert!(m.integrate_real(&energy) >= -1e-12 * scale.max(1.0));
    }

    #[test]
    fn torus_adjointness(seed in any::<u64>(), k in 1i32..=2) {
        let s = torus();
        let m = MetricState::background(s);
        let a = trig_section(Weight::holomorphic(k - 1), seed, false);
        let b = trig_section(Weight::holomorphic(k), seed.wrapping_mul(31).wrapping_add(7), false);
        let lhs = m.l2_inner(&operators::nabla10(&m, &a).unwrap(), &b).unwrap();
        let rhs = m.l2_inner(&a, &operators::nabla10_adjoint(&m, &b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * m.l2_norm(&a).unwrap() * m.l2_norm(&b).unwrap());
    }

    #[test]
    fn dump_round_trip(seed in any::<u64>(), a in -2i32..=2, b in -2i32..=2) {
        let s = torus();
        let f = noise(s, Weight(a, b), seed, 1e3);
        let mut buf = Vec::new();
        f.write_dump(&mut buf, (16, 16), s.lattice()).unwrap();
        let back = SectionField::read_dump(&buf[..]).unwrap();
        prop_assert_eq!(back.field, f);
    }
}
