//! Permutation engine: group action on labeled vectors and uniform sampling
//! from the stabilizer subgroup of a label vector.

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;

use crate::error::{Error, Result};
use crate::population::Assignment;

/// A permutation of {0..N-1}, stored with its inverse.
///
/// The group action indexes by the inverse, so it is precomputed once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    /// Build from the image vector `forward[i] = π(i)`; checks bijectivity.
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (i, &img) in forward.iter().enumerate() {
            if img >= n || inverse[img] != usize::MAX {
                return Err(Error::InvalidAssignment(format!(
                    "forward vector is not a bijection on 0..{n}"
                )));
            }
            inverse[img] = i;
        }
        Ok(Self { forward, inverse })
    }

    pub fn identity(n: usize) -> Self {
        let forward: Vec<usize> = (0..n).collect();
        Self {
            inverse: forward.clone(),
            forward,
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Permutation) -> Self {
        let forward: Vec<usize> = (0..self.len()).map(|i| self.forward[other.forward[i]]).collect();
        Self::from_forward(forward).expect("composition of bijections is a bijection")
    }
}

/// Label vector whose stabilizer we sample from: π is in the stabilizer iff
/// relabeling by π leaves the vector unchanged.
#[derive(Debug, Clone)]
pub struct StabilizerSpec {
    labels: Vec<u64>,
    strata: Vec<Vec<usize>>,
}

impl StabilizerSpec {
    pub fn new(labels: Vec<u64>) -> Self {
        let mut strata_of: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            strata_of.entry(l).or_default().push(i);
        }
        let strata = strata_of.into_values().collect();
        Self { labels, strata }
    }

    /// Stabilizer of a single code vector (e.g. the attribute vector A).
    pub fn from_codes<T: Into<u64> + Copy>(codes: &[T]) -> Self {
        Self::new(codes.iter().map(|&c| c.into()).collect())
    }

    /// Stabilizer of the paired vector ((A_i, U_i))_i.
    pub fn from_pairs<T: Into<u64> + Copy, U: Into<u64> + Copy>(a: &[T], b: &[U]) -> Self {
        assert_eq!(a.len(), b.len());
        Self::new(
            a.iter()
                .zip(b)
                .map(|(&x, &y)| (x.into() << 32) | y.into())
                .collect(),
        )
    }

    pub fn n_units(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Unit index lists of the label strata.
    pub fn strata(&self) -> &[Vec<usize>] {
        &self.strata
    }

    /// True iff π fixes the label vector.
    pub fn is_satisfied_by(&self, perm: &Permutation) -> bool {
        perm.len() == self.labels.len()
            && (0..self.labels.len()).all(|i| self.labels[perm.inverse()[i]] == self.labels[i])
    }
}

/// The group action π·v: entry i of the result is `v[π⁻¹(i)]`.
pub fn apply_permutation<T: Clone>(perm: &Permutation, vector: &[T]) -> Result<Vec<T>> {
    if vector.len() != perm.len() {
        return Err(Error::LengthMismatch {
            what: "vector under permutation",
            got: vector.len(),
            expected: perm.len(),
        });
    }
    Ok(perm.inverse().iter().map(|&j| vector[j].clone()).collect())
}

/// Apply π jointly to both components of an assignment (group action on C).
pub fn apply_to_assignment(perm: &Permutation, assignment: &Assignment) -> Result<Assignment> {
    Ok(Assignment {
        groups: apply_permutation(perm, &assignment.groups)?,
        treatments: apply_permutation(perm, &assignment.treatments)?,
        group_size: assignment.group_size,
        n_groups: assignment.n_groups,
    })
}

/// Draw π uniformly from the stabilizer of the label vector.
///
/// A permutation fixes the labels iff it maps each label stratum onto itself,
/// so independent Fisher-Yates shuffles within the strata enumerate the
/// stabilizer exactly and uniformly.
pub fn sample_uniform_stabilizer<R: Rng + ?Sized>(spec: &StabilizerSpec, rng: &mut R) -> Permutation {
    let n = spec.n_units();
    let mut forward = vec![usize::MAX; n];
    for stratum in spec.strata() {
        let mut images = stratum.clone();
        // Unbiased Fisher-Yates.
        for i in (1..images.len()).rev() {
            let j = rng.gen_range(0..=i);
            images.swap(i, j);
        }
        for (&src, &dst) in stratum.iter().zip(&images) {
            forward[src] = dst;
        }
    }
    let perm = Permutation::from_forward(forward).expect("within-stratum shuffles are bijections");
    debug_assert!(spec.is_satisfied_by(&perm));
    perm
}

/// Enumerate every element of the stabilizer (all within-stratum
/// permutations combined). Errors when the order exceeds `cap`; intended for
/// exhaustive tests on small strata.
pub fn enumerate_stabilizer(spec: &StabilizerSpec, cap: usize) -> Result<Vec<Permutation>> {
    let order = stabilizer_order(spec);
    if order > BigUint::from(cap) {
        return Err(Error::InsufficientSamples(
            "stabilizer too large to enumerate; raise the cap or sample instead",
        ));
    }
    let n = spec.n_units();
    let mut perms = vec![Permutation::identity(n)];
    for stratum in spec.strata() {
        if stratum.len() < 2 {
            continue;
        }
        let mut extended = Vec::new();
        let mut images = stratum.clone();
        heap_permutations(&mut images, &mut |ordering| {
            for base in &perms {
                let mut forward = base.forward().to_vec();
                for (&src, &dst) in stratum.iter().zip(ordering) {
                    forward[src] = dst;
                }
                extended.push(Permutation::from_forward(forward).expect("bijection"));
            }
        });
        perms = extended;
    }
    Ok(perms)
}

/// Heap's algorithm; calls `visit` on every ordering of `items`.
fn heap_permutations<T: Copy>(items: &mut [T], visit: &mut impl FnMut(&[T])) {
    fn go<T: Copy>(k: usize, items: &mut [T], visit: &mut impl FnMut(&[T])) {
        if k <= 1 {
            visit(items);
            return;
        }
        for i in 0..k {
            go(k - 1, items, visit);
            if k.is_multiple_of(2) {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    go(items.len(), items, visit);
}

/// |S_labels| = Π over strata of (stratum size)!, exact.
pub fn stabilizer_order(spec: &StabilizerSpec) -> BigUint {
    let mut order = BigUint::one();
    for stratum in spec.strata() {
        for f in 2..=stratum.len() {
            order *= BigUint::from(f);
        }
    }
    order
}
