//! Fixed experimental population and assignment validity checks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::{Attr, Treat};

/// The fixed side of the experiment: unit attributes and derived strata.
///
/// Immutable after construction; all randomness lives in [`Assignment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    attributes: Vec<Attr>,
    attr_alphabet: Vec<Attr>,
    strata_index: BTreeMap<Attr, Vec<usize>>,
}

impl Population {
    /// Build a population from per-unit attribute codes, deriving strata.
    ///
    /// The attribute alphabet is declared explicitly so that empty strata are
    /// representable; codes outside it are rejected.
    pub fn new(attributes: Vec<Attr>, attr_alphabet: Vec<Attr>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::EmptyInput("attribute vector"));
        }
        let mut strata_index: BTreeMap<Attr, Vec<usize>> =
            attr_alphabet.iter().map(|&a| (a, Vec::new())).collect();
        for (i, &a) in attributes.iter().enumerate() {
            strata_index
                .get_mut(&a)
                .ok_or(Error::UnknownAttribute { code: a })?
                .push(i);
        }
        Ok(Self {
            attributes,
            attr_alphabet,
            strata_index,
        })
    }

    /// Build with the alphabet inferred as the distinct codes present.
    pub fn from_attributes(attributes: Vec<Attr>) -> Result<Self> {
        let mut alphabet: Vec<Attr> = attributes.clone();
        alphabet.sort_unstable();
        alphabet.dedup();
        Self::new(attributes, alphabet)
    }

    pub fn n_units(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[Attr] {
        &self.attributes
    }

    pub fn attribute(&self, unit: usize) -> Attr {
        self.attributes[unit]
    }

    pub fn attr_alphabet(&self) -> &[Attr] {
        &self.attr_alphabet
    }

    /// Ordered unit indices for each attribute level (empty strata included).
    pub fn strata_index(&self) -> &BTreeMap<Attr, Vec<usize>> {
        &self.strata_index
    }

    /// Number of units N_[a] in stratum `a` (0 for unseen alphabet levels).
    pub fn stratum_size(&self, a: Attr) -> usize {
        self.strata_index.get(&a).map_or(0, Vec::len)
    }

    /// True iff both the attribute alphabet is {0,1}.
    pub fn is_binary(&self) -> bool {
        self.attr_alphabet == [0, 1] || self.attr_alphabet == [0] || self.attr_alphabet == [1]
    }
}

/// The random side: group labels L and treatment codes W, plus (m, K).
///
/// Group labels are 1-based in `{1..K}` to match the usual presentation;
/// unit indices are 0-based everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub groups: Vec<usize>,
    pub treatments: Vec<Treat>,
    pub group_size: usize,
    pub n_groups: usize,
}

impl Assignment {
    pub fn new(groups: Vec<usize>, treatments: Vec<Treat>, group_size: usize) -> Result<Self> {
        if group_size == 0 {
            return Err(Error::InvalidAssignment("group size must be positive".into()));
        }
        let n = groups.len();
        if !n.is_multiple_of(group_size) {
            return Err(Error::InvalidAssignment(format!(
                "N = {n} is not a multiple of m = {group_size}"
            )));
        }
        let asg = Self {
            groups,
            treatments,
            group_size,
            n_groups: n / group_size,
        };
        Ok(asg)
    }

    pub fn n_units(&self) -> usize {
        self.groups.len()
    }

    /// Unit indices of each group, keyed 1..=K.
    pub fn group_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::with_capacity(self.group_size); self.n_groups];
        for (i, &g) in self.groups.iter().enumerate() {
            if g >= 1 && g <= self.n_groups {
                members[g - 1].push(i);
            }
        }
        members
    }
}

/// A single violated invariant, reported with enough detail to act on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    GroupCount { group: usize, count: usize, expected: usize },
    GroupLabelOutOfRange { unit: usize, label: usize, n_groups: usize },
    TreatmentOutOfAlphabet { unit: usize, code: Treat },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::GroupCount { group, count, expected } => {
                write!(f, "group {group} has {count} members, expected {expected}")
            }
            Violation::GroupLabelOutOfRange { unit, label, n_groups } => {
                write!(f, "unit {unit} has group label {label} outside 1..={n_groups}")
            }
            Violation::TreatmentOutOfAlphabet { unit, code } => {
                write!(f, "unit {unit} has treatment code {code} outside the alphabet")
            }
        }
    }
}

/// Check an assignment against a population and the declared treatment alphabet.
///
/// Returns the first violated invariant, or `None` when all hold. Length
/// mismatches between L/W and N are hard errors rather than violations.
pub fn validate_assignment(
    assignment: &Assignment,
    population: &Population,
    treat_alphabet: &[Treat],
) -> Result<Option<Violation>> {
    let n = population.n_units();
    if assignment.groups.len() != n {
        return Err(Error::LengthMismatch {
            what: "group labels L",
            got: assignment.groups.len(),
            expected: n,
        });
    }
    if assignment.treatments.len() != n {
        return Err(Error::LengthMismatch {
            what: "treatments W",
            got: assignment.treatments.len(),
            expected: n,
        });
    }
    let k = assignment.n_groups;
    let mut counts = vec![0usize; k];
    for (i, &g) in assignment.groups.iter().enumerate() {
        if g < 1 || g > k {
            return Ok(Some(Violation::GroupLabelOutOfRange {
                unit: i,
                label: g,
                n_groups: k,
            }));
        }
        counts[g - 1] += 1;
    }
    for (g, &c) in counts.iter().enumerate() {
        if c != assignment.group_size {
            return Ok(Some(Violation::GroupCount {
                group: g + 1,
                count: c,
                expected: assignment.group_size,
            }));
        }
    }
    for (i, &w) in assignment.treatments.iter().enumerate() {
        if !treat_alphabet.contains(&w) {
            return Ok(Some(Violation::TreatmentOutOfAlphabet { unit: i, code: w }));
        }
    }
    Ok(None)
}
