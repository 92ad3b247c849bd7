//! Population and sample containers.
//!
//! A [`Population`] is a census frame split by area into sampled units (with
//! observed outcomes) and unsampled units (outcomes optional; simulations keep
//! the truth around, real data leave it empty). A [`Sample`] is the flat view
//! the fitting routines consume: only the sampled units, grouped by area.
//!
//! Covariate vectors always carry an explicit leading intercept of 1. The CSV
//! layer adds it on ingestion; constructors here validate it.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};

pub type AreaId = u32;

/// A unit drawn into the sample: covariates plus the observed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledUnit {
    pub x: Vec<f64>,
    pub y: f64,
}

/// A frame unit outside the sample. `y` is `Some` only when the truth is
/// known, as in simulation studies.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusUnit {
    pub x: Vec<f64>,
    pub y: Option<f64>,
}

/// One small area: the sampled units and the rest of its frame.
#[derive(Debug, Clone)]
pub struct Area {
    pub id: AreaId,
    pub sampled: Vec<SampledUnit>,
    pub unsampled: Vec<CensusUnit>,
}

impl Area {
    /// Sample size n_j.
    pub fn n(&self) -> usize {
        self.sampled.len()
    }

    /// Frame size N_j.
    pub fn big_n(&self) -> usize {
        self.sampled.len() + self.unsampled.len()
    }

    pub fn is_sampled(&self) -> bool {
        !self.sampled.is_empty()
    }

    /// Observed outcomes in sampled-unit order.
    pub fn observed(&self) -> Vec<f64> {
        self.sampled.iter().map(|u| u.y).collect()
    }
}

/// The full frame, areas sorted by id.
#[derive(Debug, Clone)]
pub struct Population {
    areas: Vec<Area>,
}

impl Population {
    /// Builds a population, sorting areas by id and validating the layout.
    pub fn new(mut areas: Vec<Area>) -> Result<Self> {
        if areas.is_empty() {
            return Err(Error::Empty("population with no areas"));
        }
        areas.sort_by_key(|a| a.id);
        for pair in areas.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(invalid(format!("duplicate area id {}", pair[0].id)));
            }
        }
        let pop = Population { areas };
        pop.validate()?;
        Ok(pop)
    }

    fn validate(&self) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Err(Error::Empty("population with no covariates"));
        }
        for area in &self.areas {
            if area.big_n() == 0 {
                return Err(invalid(format!("area {} has no units", area.id)));
            }
            for x in area
                .sampled
                .iter()
                .map(|u| &u.x)
                .chain(area.unsampled.iter().map(|u| &u.x))
            {
                if x.len() != p {
                    return Err(invalid(format!(
                        "area {}: covariate length {} does not match {}",
                        area.id,
                        x.len(),
                        p
                    )));
                }
                if x[0] != 1.0 {
                    return Err(invalid(format!(
                        "area {}: covariate vectors must start with an intercept of 1",
                        area.id
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(format!("area {}: non-finite covariate", area.id)));
                }
            }
            for y in area
                .sampled
                .iter()
                .map(|u| Some(u.y))
                .chain(area.unsampled.iter().map(|u| u.y))
                .flatten()
            {
                if !y.is_finite() {
                    return Err(invalid(format!("area {}: non-finite outcome", area.id)));
                }
            }
        }
        Ok(())
    }

    pub fn areas(&self) -> &[Area] {
        &self.areas
    }

    pub fn area(&self, id: AreaId) -> Result<&Area> {
        self.areas
            .binary_search_by_key(&id, |a| a.id)
            .map(|i| &self.areas[i])
            .map_err(|_| Error::UnknownArea(id))
    }

    /// Covariate dimension, including the intercept.
    pub fn p(&self) -> usize {
        self.areas
            .first()
            .and_then(|a| {
                a.sampled
                    .first()
                    .map(|u| u.x.len())
                    .or_else(|| a.unsampled.first().map(|u| u.x.len()))
            })
            .unwrap_or(0)
    }

    /// Total sample size over all areas.
    pub fn total_n(&self) -> usize {
        self.areas.iter().map(Area::n).sum()
    }

    pub fn sampled_area_ids(&self) -> Vec<AreaId> {
        self.areas.iter().filter(|a| a.is_sampled()).map(|a| a.id).collect()
    }

    pub fn out_of_sample_area_ids(&self) -> Vec<AreaId> {
        self.areas.iter().filter(|a| !a.is_sampled()).map(|a| a.id).collect()
    }
}

/// Sampled units of one area, as consumed by the fitting routines.
#[derive(Debug, Clone)]
pub struct SampleArea {
    pub id: AreaId,
    pub units: Vec<SampledUnit>,
}

impl SampleArea {
    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.y).collect()
    }
}

/// The sampled part of a population, areas sorted by id.
#[derive(Debug, Clone)]
pub struct Sample {
    areas: Vec<SampleArea>,
}

impl Sample {
    pub fn new(mut areas: Vec<SampleArea>) -> Result<Self> {
        areas.retain(|a| !a.units.is_empty());
        if areas.is_empty() {
            return Err(Error::Empty("sample with no sampled units"));
        }
        areas.sort_by_key(|a| a.id);
        for pair in areas.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(invalid(format!("duplicate area id {} in sample", pair[0].id)));
            }
        }
        let p = areas[0].units[0].x.len();
        for area in &areas {
            for u in &area.units {
                if u.x.len() != p || p == 0 {
                    return Err(invalid("inconsistent covariate length in sample".to_string()));
                }
            }
        }
        Ok(Sample { areas })
    }

    /// Extracts the sampled units from a population. Unsampled areas are
    /// skipped; they contribute nothing to fitting.
    pub fn from_population(pop: &Population) -> Result<Self> {
        let areas = pop
            .areas()
            .iter()
            .filter(|a| a.is_sampled())
            .map(|a| SampleArea { id: a.id, units: a.sampled.clone() })
            .collect();
        Sample::new(areas)
    }

    pub fn areas(&self) -> &[SampleArea] {
        &self.areas
    }

    pub fn area(&self, id: AreaId) -> Result<&SampleArea> {
        self.areas
            .binary_search_by_key(&id, |a| a.id)
            .map(|i| &self.areas[i])
            .map_err(|_| Error::UnknownArea(id))
    }

    pub fn total_n(&self) -> usize {
        self.areas.iter().map(SampleArea::n).sum()
    }

    /// Covariate dimension, including the intercept.
    pub fn p(&self) -> usize {
        self.areas[0].units[0].x.len()
    }
}

/// Residuals keyed by area, in sampled-unit order.
pub type AreaResiduals = BTreeMap<AreaId, Vec<f64>>;

/// Flattens residuals over areas in ascending id order.
pub fn pooled_residuals(residuals: &AreaResiduals) -> Vec<f64> {
    residuals.values().flat_map(|v| v.iter().copied()).collect()
}
