//! CSV input/output. Unit indices are 0-based in every file format.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::population::{Assignment, Population};
use crate::{Attr, Real, Treat};

#[derive(Debug, Deserialize)]
struct PopulationRow {
    unit: usize,
    attribute: Attr,
    treatment0: Option<Treat>,
    group0: Option<usize>,
}

/// Read `unit,attribute[,treatment0,group0]`. Rows may arrive in any order
/// but must cover 0..N exactly once; when the optional columns are present
/// on every row the initial assignment is returned too.
pub fn read_population(path: &Path) -> Result<(Population, Option<Assignment>)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let mut rows: Vec<PopulationRow> = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("population file"));
    }
    let n = rows.len();
    rows.sort_by_key(|r| r.unit);
    for (i, row) in rows.iter().enumerate() {
        if row.unit != i {
            return Err(Error::Config(format!(
                "population units must be 0..{} exactly once; saw unit {}",
                n - 1,
                row.unit
            )));
        }
    }
    let attrs: Vec<Attr> = rows.iter().map(|r| r.attribute).collect();
    let mut alphabet = attrs.clone();
    alphabet.sort_unstable();
    alphabet.dedup();
    let population = Population::new(attrs, alphabet)?;

    let with_init = rows.iter().all(|r| r.treatment0.is_some() && r.group0.is_some());
    let assignment = if with_init {
        let groups: Vec<usize> = rows.iter().map(|r| r.group0.unwrap()).collect();
        let treatments: Vec<Treat> = rows.iter().map(|r| r.treatment0.unwrap()).collect();
        let mut sizes = std::collections::BTreeMap::new();
        for &g in &groups {
            *sizes.entry(g).or_insert(0usize) += 1;
        }
        let group_size = *sizes.values().next().unwrap();
        Some(Assignment::new(groups, treatments, group_size)?)
    } else {
        None
    };
    Ok((population, assignment))
}

#[derive(Debug, Deserialize)]
struct AssignmentRow {
    unit: usize,
    group: usize,
    treatment: Treat,
}

/// Read `unit,group,treatment` covering 0..N exactly once.
pub fn read_assignment(path: &Path) -> Result<Assignment> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows: Vec<AssignmentRow> = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("assignment file"));
    }
    rows.sort_by_key(|r| r.unit);
    for (i, row) in rows.iter().enumerate() {
        if row.unit != i {
            return Err(Error::Config(format!("assignment rows must cover units 0..{}", rows.len() - 1)));
        }
    }
    let mut sizes = std::collections::BTreeMap::new();
    for row in &rows {
        *sizes.entry(row.group).or_insert(0usize) += 1;
    }
    let group_size = *sizes.values().next().unwrap();
    Assignment::new(
        rows.iter().map(|r| r.group).collect(),
        rows.iter().map(|r| r.treatment).collect(),
        group_size,
    )
}

/// Write `unit,group,treatment`.
pub fn write_assignment(path: &Path, assignment: &Assignment) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["unit", "group", "treatment"])?;
    for i in 0..assignment.n_units() {
        wtr.write_record([
            i.to_string(),
            assignment.groups[i].to_string(),
            assignment.treatments[i].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Append-style long format: `draw,unit,group,treatment` for a batch of draws.
pub fn write_draws(path: &Path, draws: &[Assignment]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["draw", "unit", "group", "treatment"])?;
    for (d, asg) in draws.iter().enumerate() {
        for i in 0..asg.n_units() {
            wtr.write_record([
                d.to_string(),
                i.to_string(),
                asg.groups[i].to_string(),
                asg.treatments[i].to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct OutcomeRow {
    unit: usize,
    y: Real,
}

/// Read `unit,y` covering 0..N exactly once.
pub fn read_outcomes(path: &Path) -> Result<Vec<Real>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows: Vec<OutcomeRow> = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("outcomes file"));
    }
    rows.sort_by_key(|r| r.unit);
    for (i, row) in rows.iter().enumerate() {
        if row.unit != i {
            return Err(Error::Config(format!("outcome rows must cover units 0..{}", rows.len() - 1)));
        }
    }
    Ok(rows.into_iter().map(|r| r.y).collect())
}
