use super::*;
use crate::qmath::random;
use approx::assert_abs_diff_eq;

fn plus_state() -> DensityMatrix {
    DensityMatrix::new(CMatrix::from_element(2, 2, c(0.5, 0.0))).unwrap()
}

fn rotation(theta: f64) -> CMatrix {
    let (s, co) = (0.5 * theta).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// Near-pure qubit photons, `S_2` a rotation close to pi: records become
/// distinguishable after a few photons while coherences die quickly.
fn distinguishable(n_t: usize, f: f64) -> OutState {
    let env = DensityMatrix::diagonal(&[0.999, 0.001]).unwrap();
    evolve_out_state(
        &plus_state(),
        &env,
        &CMatrix::identity(2, 2),
        &rotation(0.95 * std::f64::consts::PI),
        n_t,
        f,
        0.25,
        OracleCaps::default(),
    )
    .unwrap()
}

fn random_instance(seed: u64, n_t: usize, f: f64, m: f64) -> (DensityMatrix, DensityMatrix, CMatrix, CMatrix, OutState) {
    let mut rng = random::seeded(seed);
    let rho_s = random::random_mixed(&mut rng, 2);
    let env = random::random_mixed(&mut rng, 2);
    let s1 = random::random_unitary(&mut rng, 2);
    let s2 = random::random_unitary(&mut rng, 2);
    let st = evolve_out_state(&rho_s, &env, &s1, &s2, n_t, f, m, OracleCaps::default()).unwrap();
    (rho_s, env, s1, s2, st)
}

#[test]
fn zero_photons_give_zero_information() {
    let st = distinguishable(0, 0.5);
    assert_eq!(mutual_information(&st).unwrap(), 0.0);
    let dense = assemble_dense(&st).unwrap();
    assert_eq!(dense.dim(), 2);
}

#[test]
fn equal_scattering_is_a_product() {
    let mut rng = random::seeded(5);
    let env = random::random_mixed(&mut rng, 2);
    let s = random::random_unitary(&mut rng, 2);
    let rho_s = random::random_mixed(&mut rng, 2);
    let st = evolve_out_state(&rho_s, &env, &s, &s, 4, 0.5, 0.25, OracleCaps::default()).unwrap();
    let dense = assemble_dense(&st).unwrap();
    let local = env.conjugate_by(&s).unwrap();
    let expected = kron(rho_s.entries(), &kron_power(local.entries(), 2));
    assert!((dense.entries() - expected).camax() < 1e-14);
    assert!(mutual_information(&st).unwrap().abs() < 1e-10);
}

#[test]
fn assembly_matches_brute_force_evolution() {
    let (rho_s, env, s1, s2, st) = random_instance(17, 6, 0.5, 0.5);
    let dense = assemble_dense(&st).unwrap();
    let brute = brute_force_out_state(&rho_s, &env, &s1, &s2, 6, 3, 1 << 8).unwrap();
    assert!((dense.entries() - brute.entries()).camax() < 1e-12);
    let i_brute = qmath::mutual_information(&brute, 2, 8).unwrap();
    assert!((mutual_information(&st).unwrap() - i_brute).abs() < 1e-10);
}

#[test]
fn structured_entropies_match_dense_for_larger_photons() {
    // photon dim 3 exercises the Gram and dense routes
    let mut rng = random::seeded(23);
    let rho_s = random::random_mixed(&mut rng, 2);
    let s1 = random::random_unitary(&mut rng, 3);
    let s2 = random::random_unitary(&mut rng, 3);
    for env in [random::random_mixed(&mut rng, 3), random::random_density(&mut rng, 3, 1)] {
        let st = evolve_out_state(&rho_s, &env, &s1, &s2, 4, 0.5, 0.5, OracleCaps::default()).unwrap();
        let dense = assemble_dense(&st).unwrap();
        let i_dense = qmath::mutual_information(&dense, 2, 9).unwrap();
        assert!((mutual_information(&st).unwrap() - i_dense).abs() < 1e-9);
    }
}

#[test]
fn tail_norm_examples() {
    let (_, _, _, _, st) = random_instance(8, 8, 0.5, 0.5);
    let dense = assemble_off_diagonal(&st).unwrap();
    let tn = qmath::hermitian_trace_norm(&dense);
    assert!((coherent_tail_norm(&st) - tn).abs() < 1e-10);
    let full = st.with_fraction(1.0).unwrap();
    assert_abs_diff_eq!(coherent_tail_norm(&full), 2.0 * st.c[(0, 1)].norm(), epsilon = 1e-15);
    let diag = evolve_out_state(
        &DensityMatrix::diagonal(&[0.3, 0.7]).unwrap(),
        st.env(),
        &st.scattering()[0],
        &st.scattering()[1],
        8,
        0.5,
        0.5,
        OracleCaps::default(),
    )
    .unwrap();
    assert_eq!(coherent_tail_norm(&diag), 0.0);
}

#[test]
fn macro_state_examples() {
    let (_, _, _, _, st) = random_instance(2, 5, 0.0, 1.0);
    let (a, b) = macro_states(&st, 0).unwrap();
    let bm = qmath::generalized_overlap(&a, &b).unwrap();
    assert!((bm - micro_overlap(&st).unwrap().powi(5)).abs() < 1e-10);
    assert!(macro_states(&st, 1).is_err());
    let one = st.with_photon_count(1).unwrap();
    let (a1, _) = macro_states(&one, 0).unwrap();
    assert_eq!(a1.entries(), st.block_same[0].entries());
    let mut rng = random::seeded(1);
    let s = random::random_unitary(&mut rng, 2);
    let same = evolve_out_state(&plus_state(), st.env(), &s, &s, 4, 0.5, 0.5, OracleCaps::default()).unwrap();
    assert!((macro_overlap(&same).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn capacity_errors_name_the_parameter() {
    let caps = OracleCaps { assembled: 64, dense: 64 };
    let env = DensityMatrix::maximally_mixed(2);
    let err = evolve_out_state(&plus_state(), &env, &CMatrix::identity(2, 2), &rotation(1.0), 12, 0.5, 0.5, caps)
        .unwrap_err();
    match err {
        Error::Capacity { limiting, .. } => assert_eq!(limiting, "f*N_t"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn identity_scattering_has_no_information() {
    let env = DensityMatrix::diagonal(&[0.8, 0.2]).unwrap();
    let id = CMatrix::identity(2, 2);
    let st = evolve_out_state(&plus_state(), &env, &id, &id, 8, 0.5, 0.25, OracleCaps::default()).unwrap();
    let curve = mutual_info_curve(&st, &[0.0, 0.25, 0.5, 0.75, 1.0], &PhaseThresholds::default(), None, false).unwrap();
    for (&i, &ph) in curve.i_bits.iter().zip(&curve.phase) {
        assert!(i.abs() < 1e-10);
        assert_eq!(ph, Phase::Product);
    }
}

#[test]
fn plateau_and_three_phases() {
    let st = distinguishable(12, 0.25);
    assert!(macro_overlap(&st).unwrap() < 0.01);
    let fs = [0.0, 0.25, 0.5, 0.75, 1.0];
    let curve = mutual_info_curve(&st, &fs, &PhaseThresholds::default(), None, true).unwrap();
    assert_abs_diff_eq!(curve.h_s, 1.0, epsilon = 1e-12);
    for k in 1..=3 {
        assert!(curve.tail_norm[k] < 0.01);
        assert!((curve.i_bits[k] - 1.0).abs() < 0.05, "f={} I={}", fs[k], curve.i_bits[k]);
        assert_eq!(curve.phase[k], Phase::Broadcasting);
    }
    assert!(curve.max_decrease() < 1e-9);
    assert_eq!(curve.phase[0], Phase::Product);
    assert_eq!(curve.phase[4], Phase::FullInformation);
    assert!(curve.broadcast_distance[1].unwrap() < 0.05);
}

#[test]
fn broadcast_distance_examples() {
    // exact broadcast structure: orthogonal records, no coherence
    let env = DensityMatrix::pure(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
    let flip = rotation(std::f64::consts::PI);
    let st = evolve_out_state(
        &DensityMatrix::diagonal(&[0.4, 0.6]).unwrap(),
        &env,
        &CMatrix::identity(2, 2),
        &flip,
        4,
        0.5,
        0.25,
        OracleCaps::default(),
    )
    .unwrap();
    assert!(broadcast_distance(&st).unwrap() < 1e-10);

    // identical scattering: only the coherent tail separates rho from sigma
    let mut rng = random::seeded(4);
    let s = random::random_unitary(&mut rng, 2);
    let env = random::random_mixed(&mut rng, 2);
    let st = evolve_out_state(&plus_state(), &env, &s, &s, 4, 0.5, 0.5, OracleCaps::default()).unwrap();
    let d = broadcast_distance(&st).unwrap();
    assert!(d >= coherent_tail_norm(&st) - 1e-10);

    // decreasing in time for the distinguishable instance
    let mut last = f64::INFINITY;
    for n_t in [4, 8, 12] {
        let d = broadcast_distance(&distinguishable(n_t, 0.5)).unwrap();
        assert!(d <= last + 1e-12);
        last = d;
    }
    assert!(last < 0.05);
}

#[test]
fn classify_examples() {
    let th = PhaseThresholds::default();
    assert_eq!(classify_phase(0.01, 1.0, &th), Phase::Product);
    assert_eq!(classify_phase(0.95, 1.0, &th), Phase::Broadcasting);
    assert_eq!(classify_phase(1.6, 1.0, &th), Phase::FullInformation);
    let short = distinguishable(4, 1.0);
    let i = mutual_information(&short).unwrap();
    assert_eq!(classify_phase(i, short.h_s(), &th), Phase::FullInformation);
}

#[test]
fn cc_channel_examples() {
    let st = distinguishable(24, 0.5);
    let ch = CcChannel::from_out_state(&st).unwrap();
    assert_eq!(ch.copies, 2);
    let out = cc_channel_apply(&plus_state(), &ch).unwrap();
    assert_eq!(out.probs, vec![0.5, 0.5]);
    assert!(out.orthogonal);
    let diag = DensityMatrix::diagonal(&[0.2, 0.8]).unwrap();
    assert_eq!(cc_channel_apply(&diag, &ch).unwrap().probs, vec![0.2, 0.8]);
    let mut rng = random::seeded(77);
    let r = random::random_mixed(&mut rng, 2);
    let out = cc_channel_apply(&r, &ch).unwrap();
    for i in 0..2 {
        assert!((out.probs[i] - r.entries()[(i, i)].re).abs() < 1e-12);
    }
    // non-orthogonal records only warn
    let weak = CcChannel::new(vec![DensityMatrix::maximally_mixed(2), DensityMatrix::maximally_mixed(2)], 1).unwrap();
    assert!(!cc_channel_apply(&r, &weak).unwrap().orthogonal);
}
