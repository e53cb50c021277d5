use definetti_core::cumulant::{cumulant, even_partitions, fourier_cumulant, moment, partition_sign, LadderIndex};
use definetti_core::definetti::ProductMixture;
use definetti_core::even_state::{EvenParams, SingleSiteState};
use definetti_core::fock::random_even_state;
use definetti_core::invariance::{mu_family_max_mu, mu_family_state, verify_lemma3, MuFamilyParams};
use definetti_core::majorana::{OperatorExpansion, SystemShape};
use definetti_core::meanfield::{
    all_k_subsets, verify_convexity, verify_gs_bound, HamiltonianFamily, HamiltonianSpec, ProductSearch,
};
use definetti_core::rdm::{spectrum_rows, CirculantParams};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ladder(shape: SystemShape, rng: &mut ChaCha8Rng) -> LadderIndex {
    let site = rng.gen_range(1..=shape.sites());
    let mode = rng.gen_range(1..=shape.modes_per_site());
    if rng.gen_bool(0.5) {
        LadderIndex::annihilate(site, mode)
    } else {
        LadderIndex::create(site, mode)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn cumulants_recombine_into_moments(
        (v, p) in prop_oneof![Just((1, 1)), Just((2, 1)), Just((3, 1)), Just((1, 2)), Just((1, 3))],
        half in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let shape = SystemShape::new(v, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_even_state(shape, &mut rng).unwrap();
        let ops: Vec<LadderIndex> = (0..2 * half).map(|_| ladder(shape, &mut rng)).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for part in even_partitions(ops.len()).unwrap() {
            let mut term = Complex64::new(partition_sign(&part) as f64, 0.0);
            for block in &part.blocks {
                let sub: Vec<LadderIndex> = block.iter().map(|&i| ops[i - 1]).collect();
                term *= cumulant(&rho, &sub).unwrap();
            }
            total += term;
        }
        prop_assert!((total - moment(&rho, &ops).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn odd_moments_vanish(
        (v, p) in prop_oneof![Just((2, 1)), Just((3, 1)), Just((2, 2))],
        len in prop_oneof![Just(1usize), Just(3), Just(5)],
        seed in any::<u64>(),
    ) {
        let shape = SystemShape::new(v, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_even_state(shape, &mut rng).unwrap();
        let ops: Vec<LadderIndex> = (0..len).map(|_| ladder(shape, &mut rng)).collect();
        prop_assert!(moment(&rho, &ops).unwrap().norm() < 1e-12);
    }

    #[test]
    fn second_cumulants_follow_the_delta_rule(v in 2usize..=5, a in 0usize..5, b in 0usize..5, occupation in 0.0f64..1.0) {
        let labels = definetti_core::cumulant::fourier_labels(v);
        let (q1, q2) = (labels[a % v], labels[b % v]);
        let xi = SingleSiteState::diagonal(occupation).unwrap();
        let ops = [LadderIndex::fourier(-1, 1, q1), LadderIndex::fourier(1, 1, q2)];
        let k = fourier_cumulant(&xi, v, &ops, true).unwrap();
        let direct = k.direct.unwrap();
        prop_assert!((direct - k.closed_form).norm() < 1e-9);
        if (q2 - q1).rem_euclid(v as i64) != 0 {
            prop_assert!(direct.norm() < 1e-12);
        } else {
            prop_assert!((direct - k.single_site).norm() < 1e-9);
        }
    }

    #[test]
    fn lemma3_holds_inside_the_positivity_window(v in 6usize..=7, frac in -1.0f64..1.0) {
        let mu = frac * mu_family_max_mu(v) * 0.999;
        let rho = mu_family_state(MuFamilyParams { sites: v, modes_per_site: 1, mu }).unwrap();
        for k in 1..v {
            let report = verify_lemma3(&rho, k).unwrap();
            prop_assert!(report.pass, "{}", report.summary_line());
        }
    }

    #[test]
    fn spectrum_formula_matches(v in 2usize..=12, a in 0.0f64..1.0, re in -0.3f64..0.3, im in -0.3f64..0.3, complex in any::<bool>()) {
        let b = Complex64::new(re, if complex { im } else { 0.0 });
        for row in spectrum_rows(CirculantParams { sites: v, a, b }).unwrap() {
            if let Some(d) = row.abs_diff {
                prop_assert!(d < 1e-10, "V={v} k={} diff={d}", row.k);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn product_gap_is_never_negative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let two = SystemShape::new(2, 1).unwrap();
        let rho = random_even_state(two, &mut rng).unwrap();
        let template = definetti_core::fock::to_expansion(&rho);
        let spec = HamiltonianSpec::new(SystemShape::new(4, 1).unwrap(), all_k_subsets(4, 2), template, true).unwrap();
        let search = ProductSearch { restarts: 3, iters: 200, seed };
        let (res, _) = verify_gs_bound(&spec, &search).unwrap();
        prop_assert!(res.gap >= -1e-9);
    }

    #[test]
    fn mixtures_never_beat_the_product_minimum(seed in any::<u64>(), family in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = [HamiltonianFamily::Field, HamiltonianFamily::PairHopping, HamiltonianFamily::Interacting][family];
        let spec = family.spec(5).unwrap();
        let r = rng.gen_range(1..=4);
        let mut weights: Vec<f64> = (0..r).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let comps = (0..r).map(|_| EvenParams::random(1, &mut rng).state()).collect();
        let mixture = ProductMixture::new(weights, comps).unwrap();
        let report = verify_convexity(&spec, &mixture, &ProductSearch { restarts: 2, iters: 200, seed }).unwrap();
        prop_assert!(report.pass, "{}", report.summary_line());
    }
}

#[test]
fn identity_template_is_flat() {
    let one = OperatorExpansion::identity(SystemShape::new(1, 2).unwrap());
    let spec = HamiltonianSpec::new(SystemShape::new(3, 2).unwrap(), all_k_subsets(3, 1), one, false).unwrap();
    let (res, report) = verify_gs_bound(&spec, &ProductSearch::default()).unwrap();
    assert!(res.gap.abs() < 1e-12);
    assert!(report.pass);
}
