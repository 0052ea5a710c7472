//! Slow reference computations used by the test suites.
//!
//! Everything here favors obviousness over speed: exhaustive enumeration over
//! partitions, covers, and sign patterns. Production code must not call into
//! this module; tests compare fast implementations against these.

use crate::foundations::{L0Element, LatticeMode, PointSet};
use crate::l0_measure::{GaugeFunction, L0Measure};
use crate::module_integration::SimpleMap;
use crate::{RnmError, RnmResult};

/// All set partitions of {0, .., n-1}, as lists of blocks.
///
/// Enumerated via restricted growth strings, so the order is deterministic.
/// Counts follow the Bell numbers: 1, 1, 2, 5, 15, 52, 203, ...
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn recurse(i: usize, max_used: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        let n = labels.len();
        if i == n {
            let blocks = max_used + 1;
            let mut part = vec![Vec::new(); blocks];
            for (p, &l) in labels.iter().enumerate() {
                part[l].push(p);
            }
            out.push(part);
            return;
        }
        for l in 0..=max_used + 1 {
            labels[i] = l;
            recurse(i + 1, max_used.max(l), labels, out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    labels[0] = 0;
    recurse(1, 0, &mut labels, &mut out);
    out
}

/// Total variation as the atomwise supremum, over all partitions of the cell
/// set, of the summed absolute block masses.
pub fn tv_partition_sup(mu: &L0Measure) -> L0Element {
    let cells = mu.sigma().cell_count();
    let mut sup: Option<L0Element> = None;
    for part in set_partitions(cells) {
        let mut total = L0Element::zero(mu.base());
        for block in part {
            let mut block_mass = L0Element::zero(mu.base());
            for c in block {
                block_mass = block_mass.add(mu.cell_value(c)).unwrap();
            }
            total = total.add(&block_mass.abs()).unwrap();
        }
        sup = Some(match sup {
            None => total,
            Some(s) => s.sup(&total).unwrap(),
        });
    }
    sup.expect("at least the one-block partition exists")
}

/// Lattice value on one set by exhaustive split-and-assign enumeration: every
/// partition of the set into measurable pieces, every assignment of a family
/// member to each piece, atomwise extremum of the summed masses.
pub fn lattice_partition_value(
    family: &[L0Measure],
    set: &PointSet,
    mode: LatticeMode,
) -> RnmResult<L0Element> {
    let first = &family[0];
    let cells = first.sigma().cells_of(set)?;
    let mut extremum: Option<L0Element> = None;
    for part in set_partitions(cells.len()) {
        let groups: Vec<Vec<usize>> = part
            .iter()
            .map(|block| block.iter().map(|&i| cells[i]).collect())
            .collect();
        let mut assignment = vec![0usize; groups.len()];
        loop {
            let mut total = L0Element::zero(first.base());
            for (g, &member) in groups.iter().zip(&assignment) {
                for &c in g {
                    total = total.add(family[member].cell_value(c))?;
                }
            }
            extremum = Some(match extremum {
                None => total,
                Some(e) => match mode {
                    LatticeMode::Sup => e.sup(&total)?,
                    LatticeMode::Inf => e.inf(&total)?,
                },
            });
            // next assignment in mixed radix
            let mut i = 0;
            loop {
                if i == assignment.len() {
                    break;
                }
                assignment[i] += 1;
                if assignment[i] < family.len() {
                    break;
                }
                assignment[i] = 0;
                i += 1;
            }
            if i == assignment.len() {
                break;
            }
        }
        if groups.is_empty() {
            break;
        }
    }
    Ok(extremum.expect("the empty or one-block partition always contributes"))
}

/// Outer measure of one set by enumerating every subfamily of the gauge,
/// keeping those whose union covers the set, and taking the atomwise minimum
/// of the summed costs.
pub fn outer_cover_enumeration(gauge: &GaugeFunction, set: &PointSet) -> RnmResult<L0Element> {
    let members = gauge.members();
    let target = crate::l0_measure::set_to_mask(set);
    let mut best: Option<L0Element> = None;
    for choice in 0u64..1 << members.len() {
        let mut union = 0u32;
        let mut cost = L0Element::zero(gauge.base());
        for (i, &(mask, ref c)) in members.iter().enumerate() {
            if choice >> i & 1 == 1 {
                union |= mask;
                cost = cost.add(c)?;
            }
        }
        if union & target == target {
            best = Some(match best {
                None => cost,
                Some(b) => b.inf(&cost)?,
            });
        }
    }
    Ok(best.expect("the full space is in the family, so a cover exists"))
}

/// Largest integral of a sign-weighted scalar map against a nonnegative
/// measure, by trying all sign vectors per atom. The supremum defining the
/// dual norm runs over test maps bounded by one; it is attained at a vertex
/// of the cube, so only signs need enumerating.
pub fn dual_norm_sign_enumeration(g: &SimpleMap, mu: &L0Measure) -> RnmResult<L0Element> {
    let scalars = g.scalar_values()?;
    if !g.sigma().same_partition(mu.sigma()) {
        return Err(RnmError::IncompatibleSigma(
            "oracle expects map and measure on one partition".into(),
        ));
    }
    let cells = scalars.len();
    if cells > 16 {
        return Err(RnmError::SpaceTooLarge(format!(
            "{cells} cells; sign enumeration is limited to 16"
        )));
    }
    let atoms = mu.base().atom_count();
    let mut best = vec![f64::NEG_INFINITY; atoms];
    for signs in 0u32..1 << cells {
        for x in 0..atoms {
            let mut total = 0.0;
            for c in 0..cells {
                let s = if signs >> c & 1 == 1 { -1.0 } else { 1.0 };
                total += s * scalars[c].values()[x] * mu.cell_value(c).values()[x];
            }
            if total > best[x] {
                best[x] = total;
            }
        }
    }
    L0Element::new(mu.base(), best)
}

/// Discrete perimeter of one binary image, walking the set pixels and
/// counting their in-domain zero neighbors. Deliberately organized around
/// pixels rather than edge pairs so it shares no structure with the
/// production scan.
pub fn single_image_perimeter(width: usize, height: usize, spacing: f64, image: &[u8]) -> f64 {
    assert_eq!(image.len(), width * height, "image shape mismatch");
    let mut edges = 0usize;
    for row in 0..height {
        for col in 0..width {
            if image[row * width + col] == 0 {
                continue;
            }
            let neighbors = [
                (row.wrapping_sub(1), col),
                (row + 1, col),
                (row, col.wrapping_sub(1)),
                (row, col + 1),
            ];
            for (r, c) in neighbors {
                if r < height && c < width && image[r * width + c] == 0 {
                    edges += 1;
                }
            }
        }
    }
    edges as f64 * spacing
}
