//! Randomized property tests for the permutation and exposure invariants.

use proptest::prelude::*;

use scrd::exposure::{exposure_quadruple, exposure_table, ExposureQuad, QuadMode};
use scrd::population::{Assignment, Population};
use scrd::symmetry::{apply_permutation, sample_uniform_stabilizer, Permutation, StabilizerSpec};

fn permutation_strategy(n: usize) -> impl Strategy<Value = Permutation> {
    Just(()).prop_perturb(move |_, mut rng| {
        let mut forward: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            forward.swap(i, j);
        }
        Permutation::from_forward(forward).unwrap()
    })
}

proptest! {
    #[test]
    fn permutation_action_preserves_the_multiset(
        values in proptest::collection::vec(0u8..5, 12),
        pi in permutation_strategy(12),
    ) {
        let permuted = apply_permutation(&pi, &values).unwrap();
        let mut before = values.clone();
        let mut after = permuted.clone();
        before.sort_unstable();
        after.sort_unstable();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn inverse_undoes_the_action(
        values in proptest::collection::vec(0u32..100, 9),
        pi in permutation_strategy(9),
    ) {
        let inverse = Permutation::from_forward(pi.inverse().to_vec()).unwrap();
        let back = apply_permutation(&inverse, &apply_permutation(&pi, &values).unwrap()).unwrap();
        prop_assert_eq!(back, values);
    }

    #[test]
    fn stabilizer_draws_preserve_the_exposure_table(
        attrs in proptest::collection::vec(0u8..2, 12),
        treats in proptest::collection::vec(0u8..2, 12),
        seed in any::<u64>(),
    ) {
        let population = Population::new(attrs, vec![0, 1]).unwrap();
        let groups: Vec<usize> = (0..12).map(|i| i / 3 + 1).collect();
        let assignment = Assignment::new(groups, treats, 3).unwrap();
        let quads = exposure_quadruple(&population, &assignment, QuadMode::Full).unwrap();
        let table = exposure_table(&population, &quads).unwrap();

        let spec = StabilizerSpec::from_codes(population.attributes());
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let pi = sample_uniform_stabilizer(&spec, &mut rng);
        let permuted = scrd::symmetry::apply_to_assignment(&pi, &assignment).unwrap();
        let quads2 = exposure_quadruple(&population, &permuted, QuadMode::Full).unwrap();
        prop_assert_eq!(exposure_table(&population, &quads2).unwrap(), table);
    }

    #[test]
    fn quad_wire_format_round_trips(
        a in 0u32..10, w in 0u32..10, aw in 0u32..10, own in 0u8..2,
    ) {
        let quad = ExposureQuad::new(a, w, aw, own);
        let parsed: ExposureQuad = quad.to_string().parse().unwrap();
        prop_assert_eq!(parsed, quad);
    }
}
