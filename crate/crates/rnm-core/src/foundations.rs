//! Finite atomic probability bases and the scalar quantities over them.
//!
//! A [`BaseSpace`] is a finite list of atoms with strictly positive masses
//! summing to one. Because every atom carries mass, "almost everywhere" means
//! "at every atom", so an [`L0Element`] is simply one finite real per atom and
//! all lattice and metric structure is computed atomwise with no quotient
//! bookkeeping.
//!
//! Sample spaces are finite point sets; their sigma-algebras are stored as
//! generating partitions, and a set is measurable exactly when it is a union
//! of cells.

use std::collections::HashMap;
use std::sync::Arc;

use crate::{RnmError, RnmResult};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Slack allowed on the total mass of a base space.
pub const WEIGHT_SUM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BaseSpace {
    atoms: Vec<String>,
    weights: Vec<f64>,
    tolerance: f64,
}

impl BaseSpace {
    pub fn new(atoms: Vec<String>, weights: Vec<f64>) -> RnmResult<Arc<Self>> {
        Self::with_tolerance(atoms, weights, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(
        atoms: Vec<String>,
        weights: Vec<f64>,
        tolerance: f64,
    ) -> RnmResult<Arc<Self>> {
        if atoms.is_empty() {
            return Err(RnmError::InvalidBase("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(RnmError::InvalidBase(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(RnmError::InvalidBase(format!(
                "tolerance must be positive and finite, got {tolerance}"
            )));
        }
        let mut seen = HashMap::new();
        for (i, id) in atoms.iter().enumerate() {
            if let Some(prev) = seen.insert(id.clone(), i) {
                return Err(RnmError::InvalidBase(format!(
                    "duplicate atom id {id:?} at positions {prev} and {i}"
                )));
            }
        }
        for (id, &w) in atoms.iter().zip(&weights) {
            if !(w.is_finite() && w > 0.0) {
                return Err(RnmError::InvalidBase(format!(
                    "atom {id:?} has non-positive weight {w}"
                )));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_SLACK {
            return Err(RnmError::InvalidBase(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Arc::new(BaseSpace {
            atoms,
            weights,
            tolerance,
        }))
    }

    /// Same atoms and weights, different comparison tolerance.
    pub fn retolerate(self: &Arc<Self>, tolerance: f64) -> RnmResult<Arc<Self>> {
        Self::with_tolerance(self.atoms.clone(), self.weights.clone(), tolerance)
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn atom_index(&self, id: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a == id)
    }

    /// 1 on the listed atoms, 0 elsewhere.
    pub fn indicator<S: AsRef<str>>(self: &Arc<Self>, subset: &[S]) -> RnmResult<L0Element> {
        let mut values = vec![0.0; self.atom_count()];
        for id in subset {
            let idx = self.atom_index(id.as_ref()).ok_or_else(|| {
                RnmError::InvalidBase(format!("unknown atom id {:?}", id.as_ref()))
            })?;
            values[idx] = 1.0;
        }
        L0Element::new(self, values)
    }
}

pub fn same_base(a: &Arc<BaseSpace>, b: &Arc<BaseSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// One finite real per atom of a fixed base.
#[derive(Debug, Clone)]
pub struct L0Element {
    base: Arc<BaseSpace>,
    values: Vec<f64>,
}

impl L0Element {
    pub fn new(base: &Arc<BaseSpace>, values: Vec<f64>) -> RnmResult<Self> {
        if values.len() != base.atom_count() {
            return Err(RnmError::InvalidBase(format!(
                "{} values for {} atoms",
                values.len(),
                base.atom_count()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(RnmError::NonFinite(format!("value {v}")));
        }
        Ok(L0Element {
            base: base.clone(),
            values,
        })
    }

    pub fn zero(base: &Arc<BaseSpace>) -> Self {
        L0Element {
            base: base.clone(),
            values: vec![0.0; base.atom_count()],
        }
    }

    pub fn constant(base: &Arc<BaseSpace>, c: f64) -> RnmResult<Self> {
        Self::new(base, vec![c; base.atom_count()])
    }

    pub fn base(&self) -> &Arc<BaseSpace> {
        &self.base
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RnmResult<Self> {
        Self::new(&self.base, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> RnmResult<Self> {
        if !same_base(&self.base, &other.base) {
            return Err(RnmError::MixedBases);
        }
        Self::new(
            &self.base,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> RnmResult<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> RnmResult<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> RnmResult<Self> {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> RnmResult<Self> {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs).expect("abs preserves finiteness")
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v).expect("negation preserves finiteness")
    }

    pub fn sup(&self, other: &Self) -> RnmResult<Self> {
        self.zip(other, f64::max)
    }

    pub fn inf(&self, other: &Self) -> RnmResult<Self> {
        self.zip(other, f64::min)
    }

    /// Largest absolute value over the atoms.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max atomwise deviation from `other`.
    pub fn deviation(&self, other: &Self) -> RnmResult<f64> {
        if !same_base(&self.base, &other.base) {
            return Err(RnmError::MixedBases);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Equality up to the base tolerance.
    pub fn approx_eq(&self, other: &Self) -> RnmResult<bool> {
        Ok(self.deviation(other)? <= self.base.tolerance())
    }

    pub fn approx_zero(&self) -> bool {
        self.max_abs() <= self.base.tolerance()
    }

    /// Atomwise `self <= other` with the given slack.
    pub fn le(&self, other: &Self, slack: f64) -> RnmResult<bool> {
        if !same_base(&self.base, &other.base) {
            return Err(RnmError::MixedBases);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .all(|(&a, &b)| a <= b + slack))
    }

    pub fn is_nonnegative(&self, slack: f64) -> bool {
        self.values.iter().all(|&v| v >= -slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeMode {
    Sup,
    Inf,
}

/// Atomwise max or min of a nonempty family over one base.
pub fn l0_lattice(family: &[L0Element], mode: LatticeMode) -> RnmResult<L0Element> {
    let first = family
        .first()
        .ok_or(RnmError::EmptyFamily("l0_lattice"))?;
    let mut acc = first.clone();
    for f in &family[1..] {
        acc = match mode {
            LatticeMode::Sup => acc.sup(f)?,
            LatticeMode::Inf => acc.inf(f)?,
        };
    }
    Ok(acc)
}

/// Mass-weighted truncated distance: sum of weight * min(|f - g|, 1).
///
/// Zero exactly when the arguments agree at every atom; convergence in this
/// metric is convergence in probability.
pub fn l0_distance(f: &L0Element, g: &L0Element) -> RnmResult<f64> {
    if !same_base(f.base(), g.base()) {
        return Err(RnmError::MixedBases);
    }
    Ok(f.base()
        .weights()
        .iter()
        .zip(f.values().iter().zip(g.values()))
        .map(|(&w, (&a, &b))| w * (a - b).abs().min(1.0))
        .sum())
}

/// A finite set of named points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpace {
    points: Vec<String>,
}

impl SampleSpace {
    pub fn new(points: Vec<String>) -> RnmResult<Arc<Self>> {
        if points.is_empty() {
            return Err(RnmError::InvalidSpace("no points".into()));
        }
        let mut seen = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            if let Some(prev) = seen.insert(p.clone(), i) {
                return Err(RnmError::InvalidSpace(format!(
                    "duplicate point id {p:?} at positions {prev} and {i}"
                )));
            }
        }
        Ok(Arc::new(SampleSpace { points }))
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn point_index(&self, id: &str) -> Option<usize> {
        self.points.iter().position(|p| p == id)
    }
}

pub fn same_space(a: &Arc<SampleSpace>, b: &Arc<SampleSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Sorted, deduplicated set of point indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet(Vec<usize>);

impl PointSet {
    pub fn empty() -> Self {
        PointSet(Vec::new())
    }

    pub fn full(space: &SampleSpace) -> Self {
        PointSet((0..space.point_count()).collect())
    }

    pub fn from_indices(point_count: usize, mut indices: Vec<usize>) -> RnmResult<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= point_count) {
            return Err(RnmError::InvalidSpace(format!(
                "point index {bad} out of range (space has {point_count} points)"
            )));
        }
        Ok(PointSet(indices))
    }

    pub fn from_names<S: AsRef<str>>(space: &SampleSpace, names: &[S]) -> RnmResult<Self> {
        let mut indices = Vec::with_capacity(names.len());
        for n in names {
            let idx = space.point_index(n.as_ref()).ok_or_else(|| {
                RnmError::InvalidSpace(format!("unknown point id {:?}", n.as_ref()))
            })?;
            indices.push(idx);
        }
        Self::from_indices(space.point_count(), indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.0.binary_search(&idx).is_ok()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        v.sort_unstable();
        v.dedup();
        PointSet(v)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        PointSet(self.0.iter().copied().filter(|i| other.contains(*i)).collect())
    }

    pub fn minus(&self, other: &Self) -> Self {
        PointSet(
            self.0
                .iter()
                .copied()
                .filter(|i| !other.contains(*i))
                .collect(),
        )
    }

    pub fn complement(&self, point_count: usize) -> Self {
        PointSet((0..point_count).filter(|i| !self.contains(*i)).collect())
    }
}

/// A finite sigma-algebra, stored by its generating partition.
#[derive(Debug, Clone)]
pub struct SigmaAlgebra {
    space: Arc<SampleSpace>,
    cells: Vec<Vec<usize>>,
    cell_of_point: Vec<usize>,
}

impl SigmaAlgebra {
    pub fn new<S: AsRef<str>>(
        space: &Arc<SampleSpace>,
        blocks: &[Vec<S>],
    ) -> RnmResult<Arc<Self>> {
        let n = space.point_count();
        let mut cell_of_point = vec![usize::MAX; n];
        let mut cells = Vec::with_capacity(blocks.len());
        for (ci, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(RnmError::InvalidPartition(format!("cell {ci} is empty")));
            }
            let mut cell = Vec::with_capacity(block.len());
            for name in block {
                let idx = space.point_index(name.as_ref()).ok_or_else(|| {
                    RnmError::InvalidPartition(format!("unknown point id {:?}", name.as_ref()))
                })?;
                if cell_of_point[idx] != usize::MAX || cell.contains(&idx) {
                    return Err(RnmError::InvalidPartition(format!(
                        "point {:?} appears in more than one cell",
                        name.as_ref()
                    )));
                }
                cell.push(idx);
            }
            cell.sort_unstable();
            for &idx in &cell {
                cell_of_point[idx] = ci;
            }
            cells.push(cell);
        }
        if let Some(orphan) = cell_of_point.iter().position(|&c| c == usize::MAX) {
            return Err(RnmError::InvalidPartition(format!(
                "point {:?} is not covered by any cell",
                space.points()[orphan]
            )));
        }
        Ok(Arc::new(SigmaAlgebra {
            space: space.clone(),
            cells,
            cell_of_point,
        }))
    }

    pub fn from_index_blocks(
        space: &Arc<SampleSpace>,
        blocks: Vec<Vec<usize>>,
    ) -> RnmResult<Arc<Self>> {
        let named: Vec<Vec<&String>> = blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|&i| {
                        space.points().get(i).ok_or_else(|| {
                            RnmError::InvalidPartition(format!("point index {i} out of range"))
                        })
                    })
                    .collect::<RnmResult<Vec<_>>>()
            })
            .collect::<RnmResult<Vec<_>>>()?;
        Self::new(space, &named)
    }

    /// All singletons: the power set.
    pub fn discrete(space: &Arc<SampleSpace>) -> Arc<Self> {
        let cells: Vec<Vec<usize>> = (0..space.point_count()).map(|i| vec![i]).collect();
        let cell_of_point = (0..space.point_count()).collect();
        Arc::new(SigmaAlgebra {
            space: space.clone(),
            cells,
            cell_of_point,
        })
    }

    /// Single cell: only the empty set and the whole space are measurable.
    pub fn trivial(space: &Arc<SampleSpace>) -> Arc<Self> {
        Arc::new(SigmaAlgebra {
            space: space.clone(),
            cells: vec![(0..space.point_count()).collect()],
            cell_of_point: vec![0; space.point_count()],
        })
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_of_point(&self, point: usize) -> usize {
        self.cell_of_point[point]
    }

    pub fn cell_point_set(&self, cell: usize) -> PointSet {
        PointSet(self.cells[cell].clone())
    }

    pub fn point_set_of_cells(&self, cells: &[usize]) -> PointSet {
        let mut v: Vec<usize> = cells
            .iter()
            .flat_map(|&c| self.cells[c].iter().copied())
            .collect();
        v.sort_unstable();
        PointSet(v)
    }

    /// A set is measurable exactly when it is a union of cells.
    pub fn is_measurable(&self, set: &PointSet) -> bool {
        self.cells_of(set).is_ok()
    }

    /// The sorted cell indices whose union is `set`, when such exist.
    pub fn cells_of(&self, set: &PointSet) -> RnmResult<Vec<usize>> {
        let mut cells: Vec<usize> = set.indices().iter().map(|&p| self.cell_of_point[p]).collect();
        cells.sort_unstable();
        cells.dedup();
        let covered: usize = cells.iter().map(|&c| self.cells[c].len()).sum();
        if covered != set.len() {
            return Err(RnmError::NotMeasurable(format!(
                "set of {} points splits a cell",
                set.len()
            )));
        }
        Ok(cells)
    }

    /// True when every cell of `finer` lies inside one cell of `coarser`.
    pub fn refines(finer: &Self, coarser: &Self) -> RnmResult<bool> {
        if !same_space(&finer.space, &coarser.space) {
            return Err(RnmError::MixedSpaces);
        }
        Ok(finer.cells.iter().all(|cell| {
            let target = coarser.cell_of_point[cell[0]];
            cell.iter().all(|&p| coarser.cell_of_point[p] == target)
        }))
    }

    /// Same generating partition up to cell order.
    pub fn same_partition(&self, other: &Self) -> bool {
        if !same_space(&self.space, &other.space) || self.cell_count() != other.cell_count() {
            return false;
        }
        self.cell_of_point
            .iter()
            .zip(&other.cell_of_point)
            .all(|(&a, &b)| {
                // cells match when the two labelings induce the same blocks
                self.cells[a] == other.cells[b]
            })
    }

    /// Coarsest partition refining both; cells ordered by (self cell, other cell).
    pub fn common_refinement(a: &Arc<Self>, b: &Arc<Self>) -> RnmResult<Arc<Self>> {
        if !same_space(&a.space, &b.space) {
            return Err(RnmError::MixedSpaces);
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for ca in &a.cells {
            for cb in &b.cells {
                let inter: Vec<usize> = ca.iter().copied().filter(|p| cb.contains(p)).collect();
                if !inter.is_empty() {
                    blocks.push(inter);
                }
            }
        }
        Self::from_index_blocks(&a.space, blocks)
    }
}

/// A total map between finite sample spaces.
#[derive(Debug, Clone)]
pub struct MeasurableMap {
    domain: Arc<SampleSpace>,
    codomain: Arc<SampleSpace>,
    table: Vec<usize>,
}

impl MeasurableMap {
    pub fn new(
        domain: &Arc<SampleSpace>,
        codomain: &Arc<SampleSpace>,
        table: &HashMap<String, String>,
    ) -> RnmResult<Self> {
        let mut index_table = Vec::with_capacity(domain.point_count());
        for p in domain.points() {
            let image = table
                .get(p)
                .ok_or_else(|| RnmError::InvalidMap(format!("no image for point {p:?}")))?;
            let idx = codomain.point_index(image).ok_or_else(|| {
                RnmError::InvalidMap(format!("image {image:?} is not in the codomain"))
            })?;
            index_table.push(idx);
        }
        Ok(MeasurableMap {
            domain: domain.clone(),
            codomain: codomain.clone(),
            table: index_table,
        })
    }

    pub fn identity(space: &Arc<SampleSpace>) -> Self {
        MeasurableMap {
            domain: space.clone(),
            codomain: space.clone(),
            table: (0..space.point_count()).collect(),
        }
    }

    pub fn from_index_table(
        domain: &Arc<SampleSpace>,
        codomain: &Arc<SampleSpace>,
        table: Vec<usize>,
    ) -> RnmResult<Self> {
        if table.len() != domain.point_count() {
            return Err(RnmError::InvalidMap(format!(
                "table covers {} of {} domain points",
                table.len(),
                domain.point_count()
            )));
        }
        if let Some(&bad) = table.iter().find(|&&i| i >= codomain.point_count()) {
            return Err(RnmError::InvalidMap(format!(
                "image index {bad} outside the codomain"
            )));
        }
        Ok(MeasurableMap {
            domain: domain.clone(),
            codomain: codomain.clone(),
            table,
        })
    }

    pub fn domain(&self) -> &Arc<SampleSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<SampleSpace> {
        &self.codomain
    }

    pub fn apply(&self, point: usize) -> usize {
        self.table[point]
    }

    pub fn preimage(&self, target: &PointSet) -> PointSet {
        PointSet(
            (0..self.domain.point_count())
                .filter(|&p| target.contains(self.table[p]))
                .collect(),
        )
    }
}
