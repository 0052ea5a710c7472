//! Random sets of finite perimeter on pixel grids.
//!
//! A random set is one binary image per atom of the base. Its perimeter is
//! computed per atom as the spacing times the number of interior
//! four-neighbor pixel pairs with differing values; pairs across the
//! domain boundary are not counted, so the full and the empty image both
//! have perimeter zero. Volume distance between two fields is the squared
//! spacing times the count of differing pixels, per atom.

use std::sync::Arc;

use crate::foundations::{same_base, BaseSpace, L0Element};
use crate::{RnmError, RnmResult};

/// One binary image per atom over a shared pixel grid.
#[derive(Debug, Clone)]
pub struct RandomBinaryField {
    base: Arc<BaseSpace>,
    width: usize,
    height: usize,
    spacing: f64,
    images: Vec<Vec<u8>>,
}

impl RandomBinaryField {
    pub fn new(
        base: &Arc<BaseSpace>,
        width: usize,
        height: usize,
        spacing: f64,
        images: Vec<Vec<u8>>,
    ) -> RnmResult<Self> {
        if width == 0 || height == 0 {
            return Err(RnmError::BadParameter("grid dimensions must be positive".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(RnmError::BadParameter(format!("bad pixel spacing {spacing}")));
        }
        if images.len() != base.atom_count() {
            return Err(RnmError::BadParameter(format!(
                "expected {} images, got {}",
                base.atom_count(),
                images.len()
            )));
        }
        for (x, image) in images.iter().enumerate() {
            if image.len() != width * height {
                return Err(RnmError::BadParameter(format!(
                    "image {x} has {} pixels, grid wants {}",
                    image.len(),
                    width * height
                )));
            }
            if let Some(v) = image.iter().find(|&&v| v > 1) {
                return Err(RnmError::BadParameter(format!(
                    "image {x} holds non-binary pixel value {v}"
                )));
            }
        }
        Ok(RandomBinaryField {
            base: base.clone(),
            width,
            height,
            spacing,
            images,
        })
    }

    pub fn base(&self) -> &Arc<BaseSpace> {
        &self.base
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn images(&self) -> &[Vec<u8>] {
        &self.images
    }

    pub fn image(&self, atom: usize) -> &[u8] {
        &self.images[atom]
    }

    pub fn pixel(&self, atom: usize, row: usize, col: usize) -> u8 {
        self.images[atom][row * self.width + col]
    }

    /// The same pattern with every pixel flipped.
    pub fn complement(&self) -> Self {
        let images = self
            .images
            .iter()
            .map(|img| img.iter().map(|&v| 1 - v).collect())
            .collect();
        RandomBinaryField {
            base: self.base.clone(),
            width: self.width,
            height: self.height,
            spacing: self.spacing,
            images,
        }
    }

    /// The same pixel pattern measured at a different physical spacing.
    pub fn with_spacing(&self, spacing: f64) -> RnmResult<Self> {
        Self::new(&self.base, self.width, self.height, spacing, self.images.clone())
    }

    /// Total covered volume per atom.
    pub fn volume(&self) -> L0Element {
        let cell = self.spacing * self.spacing;
        let values = self
            .images
            .iter()
            .map(|img| img.iter().filter(|&&v| v == 1).count() as f64 * cell)
            .collect();
        L0Element::new(&self.base, values).expect("finite counts")
    }

    fn check_same_shape(&self, other: &Self) -> RnmResult<()> {
        if !same_base(&self.base, &other.base) {
            return Err(RnmError::MixedBases);
        }
        if self.width != other.width
            || self.height != other.height
            || self.spacing != other.spacing
        {
            return Err(RnmError::BadParameter(format!(
                "grid mismatch: {}x{}@{} vs {}x{}@{}",
                self.width, self.height, self.spacing, other.width, other.height, other.spacing
            )));
        }
        Ok(())
    }
}

/// Spacing times the per-atom count of interior neighbor pairs with
/// differing values.
pub fn random_perimeter(chi: &RandomBinaryField) -> L0Element {
    let w = chi.width;
    let values = chi
        .images
        .iter()
        .map(|img| {
            let mut edges = 0usize;
            for row in 0..chi.height {
                let at = row * w;
                for col in 0..w - 1 {
                    if img[at + col] != img[at + col + 1] {
                        edges += 1;
                    }
                }
                if row + 1 < chi.height {
                    for col in 0..w {
                        if img[at + col] != img[at + w + col] {
                            edges += 1;
                        }
                    }
                }
            }
            edges as f64 * chi.spacing
        })
        .collect();
    L0Element::new(&chi.base, values).expect("finite counts")
}

/// Squared spacing times the per-atom count of differing pixels.
pub fn symdiff_volume(a: &RandomBinaryField, b: &RandomBinaryField) -> RnmResult<L0Element> {
    a.check_same_shape(b)?;
    let cell = a.spacing * a.spacing;
    let values = a
        .images
        .iter()
        .zip(&b.images)
        .map(|(ia, ib)| {
            ia.iter().zip(ib).filter(|(p, q)| p != q).count() as f64 * cell
        })
        .collect();
    L0Element::new(&a.base, values)
}

/// Fraction of the domain volume the last sequence element may still miss
/// for the sequence to count as convergent.
pub const CONVERGENCE_VOLUME_FRACTION: f64 = 0.05;

/// Outcome of probing lower semicontinuity of the perimeter along a
/// volume-convergent sequence of fields.
#[derive(Debug, Clone)]
pub struct LscReport {
    pub tolerance: f64,
    pub limit_perimeter: L0Element,
    pub tail_min_perimeter: L0Element,
    pub volume_trace: Vec<L0Element>,
    pub atom_ok: Vec<bool>,
    pub atom_strict: Vec<bool>,
}

impl LscReport {
    /// True when the limit perimeter is below every tail perimeter, up to
    /// the tolerance, in every fiber.
    pub fn passes(&self) -> bool {
        self.atom_ok.iter().all(|&ok| ok)
    }

    /// True when some fiber shows a genuine gap: the tail perimeters stay
    /// strictly above the limit's.
    pub fn any_strict(&self) -> bool {
        self.atom_strict.iter().any(|&s| s)
    }
}

/// Checks that the sequence converges to the limit in symmetric-difference
/// volume, then compares the limit perimeter against the smallest
/// perimeter over the trailing quarter of the sequence, per atom.
///
/// Convergence gate: per atom the volume trace must be nonincreasing up to
/// one pixel of slack and end below a fixed fraction of the domain volume.
pub fn lsc_probe(
    sequence: &[RandomBinaryField],
    limit: &RandomBinaryField,
    tolerance: f64,
) -> RnmResult<LscReport> {
    if sequence.is_empty() {
        return Err(RnmError::EmptyFamily("field sequence"));
    }
    if !(tolerance >= 0.0) || !tolerance.is_finite() {
        return Err(RnmError::BadParameter(format!("bad tolerance {tolerance}")));
    }
    let volume_trace = sequence
        .iter()
        .map(|chi| symdiff_volume(chi, limit))
        .collect::<RnmResult<Vec<_>>>()?;
    let pixel = limit.spacing * limit.spacing;
    let domain = pixel * (limit.width * limit.height) as f64;
    let allowed = CONVERGENCE_VOLUME_FRACTION * domain;
    for x in 0..limit.base.atom_count() {
        for n in 1..volume_trace.len() {
            let prev = volume_trace[n - 1].values()[x];
            let here = volume_trace[n].values()[x];
            if here > prev + pixel {
                return Err(RnmError::NonConvergent(format!(
                    "fiber {x}: volume distance grows from {prev} to {here} at step {n}"
                )));
            }
        }
        let last = volume_trace.last().expect("nonempty").values()[x];
        if last > allowed {
            return Err(RnmError::NonConvergent(format!(
                "fiber {x}: final volume distance {last} above the allowance {allowed}"
            )));
        }
    }
    let tail_start = sequence.len() - (sequence.len() / 4).max(1);
    let mut tail_min = random_perimeter(&sequence[tail_start]);
    for chi in &sequence[tail_start + 1..] {
        tail_min = tail_min.inf(&random_perimeter(chi))?;
    }
    let limit_perimeter = random_perimeter(limit);
    let atom_ok = limit_perimeter
        .values()
        .iter()
        .zip(tail_min.values())
        .map(|(&l, &t)| l <= t + tolerance)
        .collect();
    let atom_strict = limit_perimeter
        .values()
        .iter()
        .zip(tail_min.values())
        .map(|(&l, &t)| t > l + tolerance)
        .collect();
    Ok(LscReport {
        tolerance,
        limit_perimeter,
        tail_min_perimeter: tail_min,
        volume_trace,
        atom_ok,
        atom_strict,
    })
}
