//! Densities between L0-valued measures.
//!
//! For nonnegative measures that are absolutely continuous at the product
//! level (per cell and atom: the reference vanishing forces the numerator to
//! vanish), the derivative is the unique scalar map reconstructing the
//! numerator measure by integration against the reference. It is computed by
//! two deliberately different routes: a direct cellwise-atomwise ratio, and a
//! projection route through the auxiliary density against the sum measure.
//!
//! The product-level continuity check is strictly stronger than the setwise
//! one, even over a finite base: a measure can vanish on no cell (making the
//! setwise check vacuous) while still placing mass on a (cell, atom) pair
//! where the reference is zero. The tests exhibit such a pair; only the
//! implication from the product-level check to the setwise one holds.

use std::str::FromStr;

use crate::foundations::L0Element;
use crate::l0_measure::L0Measure;
use crate::module_integration::SimpleMap;
use crate::{RnmError, RnmResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnMode {
    Direct,
    Projection,
}

impl RnMode {
    pub fn name(&self) -> &'static str {
        match self {
            RnMode::Direct => "direct",
            RnMode::Projection => "projection",
        }
    }
}

impl FromStr for RnMode {
    type Err = RnmError;

    fn from_str(s: &str) -> RnmResult<Self> {
        match s {
            "direct" => Ok(RnMode::Direct),
            "projection" => Ok(RnMode::Projection),
            other => Err(RnmError::BadParameter(format!(
                "unknown derivative mode {other:?}, expected direct or projection"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RnResult {
    delta: SimpleMap,
    mode: RnMode,
    reconstruction_error: f64,
}

impl RnResult {
    pub fn delta(&self) -> &SimpleMap {
        &self.delta
    }

    pub fn mode(&self) -> RnMode {
        self.mode
    }

    pub fn reconstruction_error(&self) -> f64 {
        self.reconstruction_error
    }
}

/// Absolute continuity at the product level: wherever the reference measure
/// puts no mass on a (cell, atom) pair, neither does `mu`.
pub fn check_hat_ac(mu: &L0Measure, nu: &L0Measure) -> RnmResult<bool> {
    if !mu.is_nonnegative() {
        return Err(RnmError::SignedMeasure("check_hat_ac"));
    }
    if !nu.is_nonnegative() {
        return Err(RnmError::SignedMeasure("check_hat_ac"));
    }
    mu.check_same_shape(nu)?;
    let tol = mu.base().tolerance();
    for c in 0..mu.sigma().cell_count() {
        let m = mu.cell_value(c).values();
        let n = nu.cell_value(c).values();
        for x in 0..m.len() {
            if n[x] <= tol && m[x] > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The density of `mu` against `nu`, with the reconstruction residual over
/// all measurable sets.
pub fn rn_derivative(mu: &L0Measure, nu: &L0Measure, mode: RnMode) -> RnmResult<RnResult> {
    if !mu.is_nonnegative() {
        return Err(RnmError::SignedMeasure("rn_derivative"));
    }
    if !check_hat_ac(mu, nu)? {
        return Err(RnmError::NotAbsContinuous(
            "mu puts mass on a (cell, atom) pair where nu vanishes".into(),
        ));
    }
    let delta = derivative_cells(mu, nu, mode)?;
    finish(mu, nu, delta, mode)
}

/// Density of a signed measure: the difference of the densities of its
/// nonnegative and nonpositive parts.
pub fn rn_derivative_signed(
    mu: &L0Measure,
    nu: &L0Measure,
    mode: RnMode,
) -> RnmResult<RnResult> {
    let (pos, neg) = mu.jordan_parts();
    if !check_hat_ac(&pos, nu)? || !check_hat_ac(&neg, nu)? {
        return Err(RnmError::NotAbsContinuous(
            "a variation part puts mass where nu vanishes".into(),
        ));
    }
    let dp = derivative_cells(&pos, nu, mode)?;
    let dn = derivative_cells(&neg, nu, mode)?;
    let delta = dp
        .iter()
        .zip(&dn)
        .map(|(p, n)| p.sub(n))
        .collect::<RnmResult<Vec<_>>>()?;
    finish(mu, nu, delta, mode)
}

fn derivative_cells(
    mu: &L0Measure,
    nu: &L0Measure,
    mode: RnMode,
) -> RnmResult<Vec<L0Element>> {
    if !nu.is_nonnegative() {
        return Err(RnmError::SignedMeasure("rn_derivative"));
    }
    mu.check_same_shape(nu)?;
    let tol = mu.base().tolerance();
    let base = mu.base();
    let mut cells = Vec::with_capacity(mu.sigma().cell_count());
    match mode {
        RnMode::Direct => {
            for c in 0..mu.sigma().cell_count() {
                let m = mu.cell_value(c).values();
                let n = nu.cell_value(c).values();
                let values = m
                    .iter()
                    .zip(n)
                    .map(|(&mv, &nv)| if nv > tol { mv / nv } else { 0.0 })
                    .collect();
                cells.push(L0Element::new(base, values)?);
            }
        }
        RnMode::Projection => {
            // density against the sum measure first, then transform; the
            // pairs where it would reach one are exactly the continuity
            // violations, so after the entry check there must be none
            for c in 0..mu.sigma().cell_count() {
                let m = mu.cell_value(c).values();
                let n = nu.cell_value(c).values();
                let mut values = Vec::with_capacity(m.len());
                for (&mv, &nv) in m.iter().zip(n) {
                    let s = mv + nv;
                    let h = if s > tol { mv / s } else { 0.0 };
                    if h > 1.0 - tol && nv > tol {
                        return Err(RnmError::InvariantViolated(
                            "intermediate density reached one on a reference-positive pair"
                                .into(),
                        ));
                    }
                    let d = if nv > tol { h / (1.0 - h) } else { 0.0 };
                    values.push(d);
                }
                cells.push(L0Element::new(base, values)?);
            }
        }
    }
    Ok(cells)
}

fn finish(
    mu: &L0Measure,
    nu: &L0Measure,
    delta: Vec<L0Element>,
    mode: RnMode,
) -> RnmResult<RnResult> {
    let err = reconstruction_error(mu, nu, &delta);
    let tol = mu.base().tolerance();
    if err > tol {
        return Err(RnmError::InvariantViolated(format!(
            "reconstruction residual {err} exceeds tolerance {tol}"
        )));
    }
    let delta = SimpleMap::scalar(mu.sigma(), delta)?;
    Ok(RnResult {
        delta,
        mode,
        reconstruction_error: err,
    })
}

/// Largest deviation, over all measurable sets and atoms, between evaluating
/// `mu` and integrating the candidate density against `nu`. Additivity lets
/// the worst set be found from the per-cell residuals: per atom it is the
/// larger of the summed positive and summed negative parts.
fn reconstruction_error(mu: &L0Measure, nu: &L0Measure, delta: &[L0Element]) -> f64 {
    let atoms = mu.base().atom_count();
    let mut worst = 0.0f64;
    for x in 0..atoms {
        let mut pos = 0.0f64;
        let mut neg = 0.0f64;
        for c in 0..mu.sigma().cell_count() {
            let r = mu.cell_value(c).values()[x]
                - delta[c].values()[x] * nu.cell_value(c).values()[x];
            if r > 0.0 {
                pos += r;
            } else {
                neg -= r;
            }
        }
        worst = worst.max(pos.max(neg));
    }
    worst
}

/// True when the two scalar maps agree wherever the reference measure is
/// positive; values on reference-null pairs are conventions, not data.
pub fn agree_on_positive_pairs(
    a: &SimpleMap,
    b: &SimpleMap,
    nu: &L0Measure,
    tol: f64,
) -> RnmResult<bool> {
    let av = a.scalar_values()?;
    let bv = b.scalar_values()?;
    if !a.sigma().same_partition(nu.sigma()) || !b.sigma().same_partition(nu.sigma()) {
        return Err(RnmError::IncompatibleSigma(
            "maps must share the measure's partition".into(),
        ));
    }
    let null_tol = nu.base().tolerance();
    for c in 0..nu.sigma().cell_count() {
        for x in 0..nu.base().atom_count() {
            if nu.cell_value(c).values()[x] > null_tol
                && (av[c].values()[x] - bv[c].values()[x]).abs() > tol
            {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub use helpers::measure_from_density;

mod helpers {
    use super::*;

    /// The measure A -> integral over A of the density against `nu`; the
    /// inverse direction of the derivative, used by tests and the command
    /// line round trip.
    pub fn measure_from_density(delta: &SimpleMap, nu: &L0Measure) -> RnmResult<L0Measure> {
        let values = delta.scalar_values()?;
        if !delta.sigma().same_partition(nu.sigma()) {
            return Err(RnmError::IncompatibleSigma(
                "density and measure must share a partition".into(),
            ));
        }
        let cells = values
            .iter()
            .zip(nu.cell_values())
            .map(|(d, n)| d.mul(n))
            .collect::<RnmResult<Vec<_>>>()?;
        L0Measure::new(nu.sigma(), nu.base(), cells)
    }
}
