//! Exposure mappings: own treatment plus the multiset of peer
//! (attribute, treatment) pairs, the compact quadruple form for binary
//! alphabets, and the induced per-stratum count table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::population::{validate_assignment, Assignment, Population};
use crate::{Attr, Treat};

/// General-form exposure: own treatment and the canonical (sorted) multiset
/// of the m-1 peers' (attribute, treatment) pairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exposure {
    pub own_treatment: Treat,
    /// Lexicographically sorted so equal multisets compare equal.
    pub peer_profile: Vec<(Attr, Treat)>,
}

impl Exposure {
    pub fn new(own_treatment: Treat, mut peers: Vec<(Attr, Treat)>) -> Self {
        peers.sort_unstable();
        Self {
            own_treatment,
            peer_profile: peers,
        }
    }
}

impl fmt::Display for Exposure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs: Vec<String> = self
            .peer_profile
            .iter()
            .map(|(a, w)| format!("({a},{w})"))
            .collect();
        write!(f, "[{}]+own={}", pairs.join(" "), self.own_treatment)
    }
}

/// Binary-case exposure: peer attribute sum, peer treatment sum, peer
/// attribute-treatment interaction sum, and own treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct ExposureQuad {
    pub peer_attr_sum: u32,
    pub peer_treat_sum: u32,
    pub peer_attr_treat_sum: u32,
    pub own_treatment: Treat,
}

impl ExposureQuad {
    pub fn new(peer_attr_sum: u32, peer_treat_sum: u32, peer_attr_treat_sum: u32, own: Treat) -> Self {
        Self {
            peer_attr_sum,
            peer_treat_sum,
            peer_attr_treat_sum,
            own_treatment: own,
        }
    }

    /// Sums recomputed from a general-form exposure (binary alphabets).
    pub fn from_exposure(exp: &Exposure) -> Self {
        let mut quad = ExposureQuad::new(0, 0, 0, exp.own_treatment);
        for &(a, w) in &exp.peer_profile {
            quad.peer_attr_sum += u32::from(a);
            quad.peer_treat_sum += u32::from(w);
            quad.peer_attr_treat_sum += u32::from(a) * u32::from(w);
        }
        quad
    }

    /// Drop the interaction sum (reduced exposure mode).
    pub fn reduced(self) -> Self {
        Self {
            peer_attr_treat_sum: 0,
            ..self
        }
    }

    /// True iff some unit in a group of size m can realize this exposure:
    /// sums must fit in m-1 peers and the interaction sum is dominated.
    pub fn attainable(&self, group_size: usize) -> bool {
        let m1 = (group_size - 1) as u32;
        self.peer_attr_sum <= m1
            && self.peer_treat_sum <= m1
            && self.peer_attr_treat_sum <= self.peer_attr_sum.min(self.peer_treat_sum)
            && self.own_treatment <= 1
    }
}

/// CSV wire format `a_sum:w_sum:aw_sum:own`.
impl fmt::Display for ExposureQuad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.peer_attr_sum, self.peer_treat_sum, self.peer_attr_treat_sum, self.own_treatment
        )
    }
}

impl FromStr for ExposureQuad {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::BadQuadSpec(s.to_string()));
        }
        let nums: Vec<u32> = parts
            .iter()
            .map(|p| p.parse::<u32>().map_err(|_| Error::BadQuadSpec(s.to_string())))
            .collect::<Result<_>>()?;
        if nums[3] > 1 {
            return Err(Error::BadQuadSpec(s.to_string()));
        }
        Ok(ExposureQuad::new(nums[0], nums[1], nums[2], nums[3] as Treat))
    }
}

/// Whether the quadruple keeps or drops the peer interaction sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum QuadMode {
    #[default]
    Full,
    /// Interaction sum zeroed out of the exposure key.
    Reduced,
}

/// Count table n_{a,h}: units per (attribute stratum, exposure) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SCRDDescriptor<H: Ord> {
    pub counts: BTreeMap<Attr, BTreeMap<H, usize>>,
}

impl<H: Ord + Clone> SCRDDescriptor<H> {
    pub fn count(&self, a: Attr, h: &H) -> usize {
        self.counts.get(&a).and_then(|m| m.get(h)).copied().unwrap_or(0)
    }

    /// Σ_h n_{a,h} for one stratum.
    pub fn stratum_total(&self, a: Attr) -> usize {
        self.counts.get(&a).map_or(0, |m| m.values().sum())
    }
}

/// Compute the exposure of every unit: peers are the other members of the
/// unit's group, carrying their fixed attribute and assigned treatment.
pub fn exposure_map(population: &Population, assignment: &Assignment) -> Result<Vec<Exposure>> {
    // Group-structure validity only; the treatment alphabet is whatever W uses.
    let mut treat_alphabet = assignment.treatments.clone();
    treat_alphabet.sort_unstable();
    treat_alphabet.dedup();
    if let Some(v) = validate_assignment(assignment, population, &treat_alphabet)? {
        return Err(Error::InvalidAssignment(v.to_string()));
    }
    let members = assignment.group_members();
    let mut out = Vec::with_capacity(population.n_units());
    for i in 0..population.n_units() {
        let group = &members[assignment.groups[i] - 1];
        let peers: Vec<(Attr, Treat)> = group
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| (population.attribute(j), assignment.treatments[j]))
            .collect();
        out.push(Exposure::new(assignment.treatments[i], peers));
    }
    Ok(out)
}

/// Compute the quadruple form directly (binary attributes and treatments).
pub fn exposure_quadruple(
    population: &Population,
    assignment: &Assignment,
    mode: QuadMode,
) -> Result<Vec<ExposureQuad>> {
    if population.attributes().iter().any(|&a| a > 1) {
        return Err(Error::NonBinaryAlphabet("attributes must be 0/1 for the quadruple form"));
    }
    if assignment.treatments.iter().any(|&w| w > 1) {
        return Err(Error::NonBinaryAlphabet("treatments must be 0/1 for the quadruple form"));
    }
    let exposures = exposure_map(population, assignment)?;
    Ok(exposures
        .iter()
        .map(|e| {
            let q = ExposureQuad::from_exposure(e);
            match mode {
                QuadMode::Full => q,
                QuadMode::Reduced => q.reduced(),
            }
        })
        .collect())
}

/// Tabulate n_{a,h} from per-unit exposures.
pub fn exposure_table<H: Ord + Clone>(
    population: &Population,
    exposures: &[H],
) -> Result<SCRDDescriptor<H>> {
    if exposures.len() != population.n_units() {
        return Err(Error::LengthMismatch {
            what: "exposure vector",
            got: exposures.len(),
            expected: population.n_units(),
        });
    }
    let mut counts: BTreeMap<Attr, BTreeMap<H, usize>> = population
        .attr_alphabet()
        .iter()
        .map(|&a| (a, BTreeMap::new()))
        .collect();
    for (i, h) in exposures.iter().enumerate() {
        *counts
            .get_mut(&population.attribute(i))
            .expect("attribute in alphabet")
            .entry(h.clone())
            .or_insert(0) += 1;
    }
    Ok(SCRDDescriptor { counts })
}
