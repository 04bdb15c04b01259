use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::netcore::expr::{c, input};
use crate::netcore::{Component, Expr, Factor, Head, MlpParams, MlpSpec};

fn mass(exprs: Vec<Expr>, n: usize) -> Component {
    Component::closed(exprs, Head::MassInv { n, epsilon: 0.0, factor: Factor::Direct })
}

fn gmat(exprs: Vec<Expr>, rows: usize, cols: usize) -> Component {
    Component::closed(exprs, Head::InputMatrix { rows, cols })
}

fn raw(exprs: Vec<Expr>) -> Component {
    Component::closed(exprs, Head::Raw)
}

fn bundle(variant: Variant, dims: Dims, parts: Vec<(&str, Component)>) -> ModelBundle {
    let comps = parts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    ModelBundle::new(variant, dims, comps).unwrap()
}

fn pendulum_rn() -> ModelBundle {
    bundle(
        Variant::SymRn,
        Dims::new(1, 0, 1),
        vec![
            (MASS_INV, mass(vec![c(3.0)], 1)),
            (POTENTIAL, raw(vec![c(5.0) * (c(1.0) - input(0).cos())])),
            (INPUT, gmat(vec![c(1.0)], 1, 1)),
        ],
    )
}

fn pendulum_embedded() -> ModelBundle {
    bundle(
        Variant::SymEmbedded,
        Dims::new(0, 1, 1),
        vec![
            (MASS_INV, mass(vec![c(3.0)], 1)),
            (POTENTIAL, raw(vec![c(5.0) * (c(1.0) - input(0))])),
            (INPUT, gmat(vec![c(1.0)], 1, 1)),
        ],
    )
}

fn hidden(names: &[&str], w: usize) -> BTreeMap<String, Vec<usize>> {
    names.iter().map(|n| (n.to_string(), vec![w, w])).collect()
}

fn random_bundle(variant: Variant, dims: Dims, seed: u64) -> ModelBundle {
    let names = [MASS_INV, POTENTIAL, INPUT, HAMILTONIAN, FIELD, GEOMETRIC];
    let mut b = ModelBundle::build(variant, dims, &hidden(&names, 8), 0.01, seed).unwrap();
    // non-zero biases so no structure hides behind the zero initial bias
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for p in b.params_mut() {
        if p.rows() == 1 {
            p.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        }
    }
    b
}

fn random_state(dims: Dims, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut s: Vec<f64> = (0..dims.n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let phis: Vec<f64> = (0..dims.m).map(|_| rng.gen_range(-PI..PI)).collect();
    s.extend(phis.iter().map(|p| p.cos()));
    s.extend(phis.iter().map(|p| p.sin()));
    s.extend((0..dims.dof()).map(|_| rng.gen_range(-2.0..2.0)));
    s
}

#[test]
fn rn_standin_matches_pendulum() {
    let b = pendulum_rn();
    assert_eq!(b.vector_field_rn(&[0.0], &[1.0], &[0.0]).unwrap(), (vec![3.0], vec![0.0]));
    let (qd, pd) = b.vector_field_rn(&[PI / 2.0], &[0.0], &[0.0]).unwrap();
    assert_eq!(qd, vec![0.0]);
    assert!((pd[0] + 5.0).abs() < 1e-15);
}

#[test]
fn rn_energy_values() {
    let b = pendulum_rn();
    assert_eq!(b.energy_of(&[0.0, 0.0]).unwrap(), 0.0);
    assert_eq!(b.energy_of(&[PI, 0.0]).unwrap(), 10.0);
    assert_eq!(b.energy_of(&[0.0, 2.0]).unwrap(), 6.0);
}

#[test]
fn augmented_field_has_frozen_control() {
    let b = pendulum_rn();
    let f = augment_with_control(|x: &[f64], u: &[f64]| b.field(x, u), 1);
    assert_eq!(f(&[0.0, 1.0, 2.0]).unwrap(), vec![3.0, 2.0, 0.0]);
}

#[test]
fn embedded_standin() {
    let b = pendulum_embedded();
    let (a, s, v) = b.vector_field_embedded(&[1.0], &[0.0], &[0.0], &[0.0]).unwrap();
    assert_eq!((a[0], s[0], v[0]), (0.0, 0.0, 0.0));
    let (_, _, v) = b.vector_field_embedded(&[0.0], &[1.0], &[0.0], &[1.0]).unwrap();
    assert!((v[0] + 12.0).abs() < 1e-12);
}

#[test]
fn wrong_variant_or_length_is_rejected() {
    let b = pendulum_rn();
    assert!(matches!(b.vector_field_embedded(&[1.0], &[0.0], &[0.0], &[0.0]), Err(Error::Contract(_))));
    assert!(matches!(b.field(&[0.0], &[0.0]), Err(Error::Contract(_))));
    assert!(matches!(b.field(&[0.0, 0.0], &[0.0, 1.0]), Err(Error::Contract(_))));
}

#[test]
fn symplectic_orthogonality_for_random_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (variant, dims) in [
        (Variant::SymRn, Dims::new(1, 0, 1)),
        (Variant::SymRn, Dims::new(2, 0, 2)),
        (Variant::Unstructured, Dims::new(1, 0, 1)),
    ] {
        for seed in 0..5 {
            let b = random_bundle(variant, dims, seed);
            for _ in 0..20 {
                let s: Vec<f64> = (0..dims.state_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let r = b.energy_rate(&s, &vec![0.0; dims.ctrl]).unwrap();
                assert!(r.abs() < 1e-10, "{variant} {r}");
            }
        }
    }
}

#[test]
fn embedded_energy_is_conserved_and_circle_kept() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (variant, dims) in [
        (Variant::SymEmbedded, Dims::new(0, 1, 1)),
        (Variant::SymEmbedded, Dims::new(0, 2, 1)),
        (Variant::SymHybrid, Dims::new(1, 1, 1)),
        (Variant::Unstructured, Dims::new(1, 1, 2)),
        (Variant::GeometricBaseline, Dims::new(0, 2, 1)),
    ] {
        let b = random_bundle(variant, dims, 7);
        for _ in 0..20 {
            let s = random_state(dims, &mut rng);
            let u: Vec<f64> = (0..dims.ctrl).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = b.field(&s, &u).unwrap();
            let (n, m) = (dims.n, dims.m);
            for j in 0..m {
                let tang = s[n + j] * f[n + j] + s[n + m + j] * f[n + m + j];
                assert!(tang.abs() < 1e-15, "{variant} {tang}");
            }
            if variant.has_energy() {
                let r = b.energy_rate(&s, &vec![0.0; dims.ctrl]).unwrap();
                let scale = b.energy_of(&s).unwrap().abs().max(1.0);
                assert!(r.abs() < 1e-10 * scale, "{variant} {r}");
            }
        }
    }
}

#[test]
fn hybrid_without_angles_matches_rn() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nets = random_bundle(Variant::SymRn, Dims::new(1, 0, 1), 5);
    let mut parts = nets.components.clone();
    parts.insert(MASS_INV.into(), mass(vec![c(2.5)], 1));
    let rn = ModelBundle::new(Variant::SymRn, Dims::new(1, 0, 1), parts.clone()).unwrap();
    let hy = ModelBundle::new(Variant::SymHybrid, Dims::new(1, 0, 1), parts).unwrap();
    for _ in 0..100 {
        let (r, v, u) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let p = v / 2.5;
        let (qd, pd) = rn.vector_field_rn(&[r], &[p], &[u]).unwrap();
        let f = hy.vector_field_hybrid(&[r], &[], &[], &[v], &[], &[u]).unwrap();
        assert!((f[0] - qd[0]).abs() < 1e-12);
        assert!((f[1] - 2.5 * pd[0]).abs() < 1e-12);
    }
}

#[test]
fn hybrid_without_translation_matches_embedded() {
    let emb = random_bundle(Variant::SymEmbedded, Dims::new(0, 1, 1), 9);
    let hy = ModelBundle::new(Variant::SymHybrid, Dims::new(0, 1, 1), emb.components.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let s = random_state(emb.dims, &mut rng);
        let (a, b, v) = emb.vector_field_embedded(&[s[0]], &[s[1]], &[s[2]], &[0.3]).unwrap();
        let f = hy.vector_field_hybrid(&[], &[s[0]], &[s[1]], &[], &[s[2]], &[0.3]).unwrap();
        assert_eq!(f, vec![a[0], b[0], v[0]]);
    }
}

#[test]
fn flat_cartpole_at_rest_is_still() {
    let (mt, ml, ipole) = (1.1, 0.05, 0.1 * 0.25 * 4.0 / 3.0);
    let det = c(mt * ipole) - c(ml * ml) * input(1) * input(1);
    let minv = mass(vec![c(ipole) / det.clone(), -(c(ml) * input(1)) / det.clone(), c(mt) / det], 2);
    let b = bundle(
        Variant::SymHybrid,
        Dims::new(1, 1, 1),
        vec![(MASS_INV, minv), (POTENTIAL, raw(vec![c(2.0)])), (INPUT, gmat(vec![c(1.0), c(0.0)], 2, 1))],
    );
    let f = b.vector_field_hybrid(&[0.3], &[0.6], &[0.8], &[0.0], &[0.0], &[0.0]).unwrap();
    assert!(f.iter().all(|v| v.abs() < 1e-15), "{f:?}");
}

#[test]
fn unstructured_special_cases() {
    let dims = Dims::new(1, 0, 1);
    let zero = bundle(
        Variant::Unstructured,
        dims,
        vec![(HAMILTONIAN, raw(vec![c(0.0)])), (INPUT, gmat(vec![c(0.0)], 1, 1))],
    );
    assert_eq!(zero.vector_field_unstructured(&[0.4, -1.0], &[2.0]).unwrap(), vec![0.0, 0.0]);
    let free = bundle(
        Variant::Unstructured,
        dims,
        vec![(HAMILTONIAN, raw(vec![c(0.5) * input(1) * input(1)])), (INPUT, gmat(vec![c(0.0)], 1, 1))],
    );
    assert_eq!(free.vector_field_unstructured(&[0.0, 2.0], &[0.0]).unwrap(), vec![2.0, 0.0]);
}

#[test]
fn naive_nets() {
    let dims = Dims::new(1, 0, 1);
    let spec = MlpSpec::new(vec![3, 3, 2]).unwrap();
    let zero = bundle(
        Variant::NaiveBaseline,
        dims,
        vec![(FIELD, Component { net: crate::netcore::Net::Mlp(MlpParams::zeros(&spec)), head: Head::Raw })],
    );
    assert_eq!(zero.vector_field_naive(&[1.0, 2.0], &[3.0]).unwrap(), vec![0.0, 0.0]);
    assert!(matches!(zero.energy_of(&[0.0, 0.0]), Err(Error::Unsupported(_))));

    // a tanh layer with tiny weights is linear up to O(ε²)
    let eps = 1e-4;
    let a = [[0.0, 3.0], [-5.0, 0.0]];
    let bvec = [0.0, 1.0];
    let mut p = MlpParams::zeros(&spec);
    for i in 0..3 {
        p.layers[0].w.set(i, i, eps);
    }
    for r in 0..2 {
        p.layers[1].w.set(r, 0, a[r][0] / eps);
        p.layers[1].w.set(r, 1, a[r][1] / eps);
        p.layers[1].w.set(r, 2, bvec[r] / eps);
    }
    let lin = bundle(Variant::NaiveBaseline, dims, vec![(FIELD, Component { net: crate::netcore::Net::Mlp(p), head: Head::Raw })]);
    let (x, u) = ([0.2, -0.4], [0.5]);
    let f = lin.vector_field_naive(&x, &u).unwrap();
    for r in 0..2 {
        let want = a[r][0] * x[0] + a[r][1] * x[1] + bvec[r] * u[0];
        assert!((f[r] - want).abs() < 1e-7);
    }
}

#[test]
fn bundle_json_round_trip_and_validation() {
    let b = random_bundle(Variant::SymHybrid, Dims::new(1, 1, 1), 3);
    let s = b.to_json().unwrap();
    assert_eq!(ModelBundle::from_json(&s).unwrap(), b);
    let mut broken = b.components.clone();
    broken.remove(POTENTIAL);
    assert!(ModelBundle::new(Variant::SymHybrid, b.dims, broken).is_err());
    let wrong = s.replace("\"sym_hybrid\"", "\"sym_rn\"");
    assert!(ModelBundle::from_json(&wrong).is_err());
}

#[test]
fn potential_gradient_of_standin() {
    let (v, g) = pendulum_embedded().potential_grad(&[0.0, 1.0]).unwrap();
    assert_eq!(v, 5.0);
    assert_eq!(g, vec![-5.0, 0.0]);
}
