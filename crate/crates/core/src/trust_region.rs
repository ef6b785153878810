//! Trust-region coordinate maps, output-value normalization, and the
//! shrink/shift lifecycle.
//!
//! Optimizers work in normalized coordinates `u`; the trust region maps them
//! into the search domain Ω. The tanh map keeps its image inside Ω by
//! construction (the scale is capped at the distance to the boundary); the
//! linear map clips instead. Stalls are classified by the normalized-space
//! distance covered since the last region change: long moves mean the
//! incumbent ran into the region's edge, so only the center shifts; short
//! moves mean genuine interior convergence, so the region shrinks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Movement at or above `0.2 * sqrt(dim)` marks a boundary event.
pub const MOVEMENT_COEFF: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Tanh,
    Linear,
}

#[derive(Debug, Clone)]
pub struct TrustRegion {
    center: Vector,
    scale: Vector,
    kind: MapKind,
    generation: u32,
    bounds: Vec<(f64, f64)>,
}

impl TrustRegion {
    /// Initial region covering all of Ω: center at the midpoint, scale at the
    /// half-width.
    pub fn covering(bounds: &[(f64, f64)], kind: MapKind) -> Self {
        let center = Vector::from_fn(bounds.len(), |i, _| 0.5 * (bounds[i].0 + bounds[i].1));
        let scale = Vector::from_fn(bounds.len(), |i, _| 0.5 * (bounds[i].1 - bounds[i].0));
        Self {
            center,
            scale,
            kind,
            generation: 0,
            bounds: bounds.to_vec(),
        }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn scale(&self) -> &Vector {
        &self.scale
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Normalized coordinates to search-space coordinates.
    pub fn to_search(&self, u: &Vector) -> Vector {
        match self.kind {
            MapKind::Tanh => Vector::from_fn(self.dim(), |i, _| {
                self.center[i] + self.scale[i] * u[i].tanh()
            }),
            MapKind::Linear => Vector::from_fn(self.dim(), |i, _| {
                (self.center[i] + self.scale[i] * u[i]).clamp(self.bounds[i].0, self.bounds[i].1)
            }),
        }
    }

    /// Inverse of [`to_search`] on the open image of the map.
    pub fn from_search(&self, x: &Vector) -> Result<Vector> {
        let mut u = Vector::zeros(self.dim());
        for i in 0..self.dim() {
            match self.kind {
                MapKind::Tanh => {
                    let t = (x[i] - self.center[i]) / self.scale[i];
                    if t <= -1.0 || t >= 1.0 || !t.is_finite() {
                        return Err(Error::OutsideTrustRegion);
                    }
                    u[i] = t.atanh();
                }
                MapKind::Linear => {
                    if x[i] < self.bounds[i].0 || x[i] > self.bounds[i].1 {
                        return Err(Error::OutsideTrustRegion);
                    }
                    u[i] = (x[i] - self.center[i]) / self.scale[i];
                }
            }
        }
        Ok(u)
    }

    /// Interior convergence: recenter at `best` and shrink the scale by
    /// `gamma`. For the tanh map the scale is additionally capped at the
    /// distance from the new center to the domain boundary, keeping the image
    /// inside Ω.
    pub fn shrink_to(&self, best: &Vector, gamma: f64) -> Self {
        let mut scale = &self.scale * gamma;
        if self.kind == MapKind::Tanh {
            for i in 0..self.dim() {
                let room = (best[i] - self.bounds[i].0)
                    .min(self.bounds[i].1 - best[i])
                    .max(1e-15 * (self.bounds[i].1 - self.bounds[i].0));
                scale[i] = scale[i].min(room);
            }
        }
        Self {
            center: best.clone(),
            scale,
            kind: self.kind,
            generation: self.generation + 1,
            bounds: self.bounds.clone(),
        }
    }

    /// Boundary convergence: move the center without touching the scale. The
    /// tanh map clamps the shift so the image stays inside Ω.
    pub fn shift_to(&self, best: &Vector) -> Self {
        let center = match self.kind {
            MapKind::Tanh => Vector::from_fn(self.dim(), |i, _| {
                let lo = self.bounds[i].0 + self.scale[i];
                let hi = self.bounds[i].1 - self.scale[i];
                if lo <= hi {
                    best[i].clamp(lo, hi)
                } else {
                    0.5 * (self.bounds[i].0 + self.bounds[i].1)
                }
            }),
            MapKind::Linear => best.clone(),
        };
        Self {
            center,
            scale: self.scale.clone(),
            kind: self.kind,
            generation: self.generation + 1,
            bounds: self.bounds.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEvent {
    pub kind: EventKind,
    pub movement: f64,
}

/// Stall classification from the normalized-space path length covered since
/// the last trust-region event.
pub fn classify_convergence(movement: f64, dim: usize) -> ConvergenceEvent {
    let threshold = MOVEMENT_COEFF * (dim as f64).sqrt();
    let kind = if movement >= threshold {
        EventKind::Boundary
    } else {
        EventKind::Interior
    };
    ConvergenceEvent { kind, movement }
}

/// Affine normalizer for objective values, fitted robustly: values outside
/// the `[q, 1-q]` quantile band are clipped before the shift (median) and
/// scale (interquartile range) are estimated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueNormalizer {
    pub outlier_quantile: f64,
    pub shift: f64,
    pub scale: f64,
    band: (f64, f64),
}

pub const SCALE_FLOOR: f64 = 1e-12;

/// Type-7 (linear interpolation) quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn fit_value_normalizer(ys: &[f64], outlier_quantile: f64) -> Result<ValueNormalizer> {
    if ys.len() < 2 {
        return Err(Error::Config(format!(
            "value normalizer needs at least 2 samples, got {}",
            ys.len()
        )));
    }
    if !(outlier_quantile > 0.0 && outlier_quantile < 0.5) {
        return Err(Error::Config(format!(
            "outlier quantile must lie in (0, 0.5), got {outlier_quantile}"
        )));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Domain("non-finite objective value".into()));
    }

    let mut sorted = ys.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = quantile_sorted(&sorted, outlier_quantile);
    let hi = quantile_sorted(&sorted, 1.0 - outlier_quantile);

    let mut clipped: Vec<f64> = sorted.iter().map(|y| y.clamp(lo, hi)).collect();
    clipped.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let shift = quantile_sorted(&clipped, 0.5);
    let iqr = quantile_sorted(&clipped, 0.75) - quantile_sorted(&clipped, 0.25);

    Ok(ValueNormalizer {
        outlier_quantile,
        shift,
        scale: iqr.max(SCALE_FLOOR),
        band: (lo, hi),
    })
}

impl ValueNormalizer {
    pub fn apply(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }

    /// Clipping bounds used while fitting.
    pub fn band(&self) -> (f64, f64) {
        self.band
    }
}
