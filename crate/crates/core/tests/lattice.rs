mod common;

use cgl_core::lattice::{enumerate_shell, schur_bound, search_separated_n, PhiSpectrum, WaveVector};
use common::shell::{dense_norm, naive_shell, random_phi};
use common::{c, rng};

fn frozen_separated() -> Vec<u64> {
    include_str!("data/separated_l1_rho2.1.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.trim().parse().unwrap())
        .collect()
}

#[test]
fn separated_search_matches_frozen_enumeration() {
    let expected = frozen_separated();
    assert_eq!(expected.len(), 279);
    assert_eq!(search_separated_n(1, 2.1, 10, 5000).unwrap(), expected);
}

#[test]
fn shells_match_cube_scan() {
    for n in 0..=60 {
        for l in (0..=3).filter(|&l| l < n) {
            let mut got = enumerate_shell(n, l).unwrap();
            got.sort();
            assert_eq!(got, naive_shell(n, l), "N = {n}, L = {l}");
        }
    }
}

#[test]
fn schur_bound_dominates_dense_norm_on_small_shell() {
    let mut r = rng(11);
    let shell = naive_shell(2, 1);
    assert_eq!(shell.len(), 26);
    for _ in 0..20 {
        let phi = random_phi(&mut r, 2, 1.0);
        let bound = schur_bound(&phi, 2, 1, 0.5).unwrap().eps_bound;
        let norm = dense_norm(&phi, &shell);
        assert!(norm <= bound * (1.0 + 1e-12), "{norm} > {bound}");
    }
}

#[test]
fn cosine_multiplier_bound_is_tight_when_unit_steps_exist() {
    let phi = PhiSpectrum::new(1, [(WaveVector::new(1, 0, 0), c(1.0, 0.0)), (WaveVector::new(-1, 0, 0), c(1.0, 0.0))])
        .unwrap();
    let shell = naive_shell(2, 1);
    let bound = schur_bound(&phi, 2, 1, 0.5).unwrap().eps_bound;
    let norm = dense_norm(&phi, &shell);
    assert!(bound > 0.0 && norm <= bound * (1.0 + 1e-12));
    // every row has at most one neighbour in each direction
    assert!(bound <= 2.0);
}
