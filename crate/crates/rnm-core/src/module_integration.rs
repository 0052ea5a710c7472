//! Free modules over L0 with fiberwise norms, simple maps into them, and
//! integration against L0-valued measures.
//!
//! A fiber is a copy of R^d per atom, normed by a fixed choice of l1, l2, or
//! sup norm; module elements are d-tuples of L0 scalars and all norms are
//! computed atomwise. A [`SimpleMap`] assigns a module element to every cell
//! of a partition; on a finite space every map is simple, so the various
//! integrability classes all share this one representation and the p-norms
//! are attributes rather than types.

use std::str::FromStr;
use std::sync::Arc;

use crate::foundations::{
    same_base, same_space, BaseSpace, L0Element, MeasurableMap, PointSet, SigmaAlgebra,
};
use crate::l0_measure::L0Measure;
use crate::{RnmError, RnmResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberNorm {
    L1,
    L2,
    Linf,
}

impl FiberNorm {
    pub fn apply(&self, coords: &[f64]) -> f64 {
        match self {
            FiberNorm::L1 => coords.iter().map(|c| c.abs()).sum(),
            FiberNorm::L2 => coords.iter().map(|c| c * c).sum::<f64>().sqrt(),
            FiberNorm::Linf => coords.iter().fold(0.0, |m, c| m.max(c.abs())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FiberNorm::L1 => "l1",
            FiberNorm::L2 => "l2",
            FiberNorm::Linf => "linf",
        }
    }
}

impl FromStr for FiberNorm {
    type Err = RnmError;

    fn from_str(s: &str) -> RnmResult<Self> {
        match s {
            "l1" => Ok(FiberNorm::L1),
            "l2" => Ok(FiberNorm::L2),
            "linf" => Ok(FiberNorm::Linf),
            other => Err(RnmError::BadParameter(format!(
                "unknown fiber norm {other:?}, expected l1, l2, or linf"
            ))),
        }
    }
}

/// L0^d with a fixed fiber norm.
#[derive(Debug, Clone)]
pub struct FreeModule {
    base: Arc<BaseSpace>,
    dim: usize,
    fiber_norm: FiberNorm,
}

impl FreeModule {
    pub fn new(base: &Arc<BaseSpace>, dim: usize, fiber_norm: FiberNorm) -> RnmResult<Arc<Self>> {
        if dim == 0 {
            return Err(RnmError::BadParameter("module dimension must be positive".into()));
        }
        Ok(Arc::new(FreeModule {
            base: base.clone(),
            dim,
            fiber_norm,
        }))
    }

    /// Dimension one; the norm choice is immaterial there.
    pub fn scalar(base: &Arc<BaseSpace>) -> Arc<Self> {
        Self::new(base, 1, FiberNorm::L1).expect("dimension 1 is valid")
    }

    pub fn base(&self) -> &Arc<BaseSpace> {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fiber_norm(&self) -> FiberNorm {
        self.fiber_norm
    }
}

pub fn same_module(a: &Arc<FreeModule>, b: &Arc<FreeModule>) -> bool {
    Arc::ptr_eq(a, b)
        || (same_base(&a.base, &b.base) && a.dim == b.dim && a.fiber_norm == b.fiber_norm)
}

/// A d-tuple of L0 scalars.
#[derive(Debug, Clone)]
pub struct ModuleElement {
    module: Arc<FreeModule>,
    coords: Vec<L0Element>,
}

impl ModuleElement {
    pub fn new(module: &Arc<FreeModule>, coords: Vec<L0Element>) -> RnmResult<Self> {
        if coords.len() != module.dim {
            return Err(RnmError::BadParameter(format!(
                "{} coordinates for a dimension {} module",
                coords.len(),
                module.dim
            )));
        }
        for c in &coords {
            if !same_base(c.base(), &module.base) {
                return Err(RnmError::MixedBases);
            }
        }
        Ok(ModuleElement {
            module: module.clone(),
            coords,
        })
    }

    pub fn zero(module: &Arc<FreeModule>) -> Self {
        ModuleElement {
            module: module.clone(),
            coords: (0..module.dim).map(|_| L0Element::zero(&module.base)).collect(),
        }
    }

    pub fn module(&self) -> &Arc<FreeModule> {
        &self.module
    }

    pub fn coords(&self) -> &[L0Element] {
        &self.coords
    }

    /// Atomwise fiber norm of the coordinate vector.
    pub fn norm(&self) -> L0Element {
        let atoms = self.module.base.atom_count();
        let values = (0..atoms)
            .map(|x| {
                let fiber: Vec<f64> = self.coords.iter().map(|c| c.values()[x]).collect();
                self.module.fiber_norm.apply(&fiber)
            })
            .collect();
        L0Element::new(&self.module.base, values).expect("norms of finite values are finite")
    }

    pub fn add(&self, other: &Self) -> RnmResult<Self> {
        self.zip(other, L0Element::add)
    }

    pub fn sub(&self, other: &Self) -> RnmResult<Self> {
        self.zip(other, L0Element::sub)
    }

    fn zip(
        &self,
        other: &Self,
        f: impl Fn(&L0Element, &L0Element) -> RnmResult<L0Element>,
    ) -> RnmResult<Self> {
        if !same_module(&self.module, &other.module) {
            return Err(RnmError::MixedBases);
        }
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| f(a, b))
            .collect::<RnmResult<Vec<_>>>()?;
        ModuleElement::new(&self.module, coords)
    }

    /// Multiply every coordinate by an L0 scalar.
    pub fn scale_l0(&self, f: &L0Element) -> RnmResult<Self> {
        let coords = self
            .coords
            .iter()
            .map(|c| c.mul(f))
            .collect::<RnmResult<Vec<_>>>()?;
        ModuleElement::new(&self.module, coords)
    }

    pub fn scale(&self, c: f64) -> RnmResult<Self> {
        let coords = self
            .coords
            .iter()
            .map(|v| v.scale(c))
            .collect::<RnmResult<Vec<_>>>()?;
        ModuleElement::new(&self.module, coords)
    }

    pub fn deviation(&self, other: &Self) -> RnmResult<f64> {
        if !same_module(&self.module, &other.module) {
            return Err(RnmError::MixedBases);
        }
        let mut d = 0.0f64;
        for (a, b) in self.coords.iter().zip(&other.coords) {
            d = d.max(a.deviation(b)?);
        }
        Ok(d)
    }

    pub fn approx_eq(&self, other: &Self) -> RnmResult<bool> {
        Ok(self.deviation(other)? <= self.module.base.tolerance())
    }
}

/// A map constant on the cells of a partition, with module values.
#[derive(Debug, Clone)]
pub struct SimpleMap {
    sigma: Arc<SigmaAlgebra>,
    module: Arc<FreeModule>,
    cell_values: Vec<ModuleElement>,
}

impl SimpleMap {
    pub fn new(
        sigma: &Arc<SigmaAlgebra>,
        module: &Arc<FreeModule>,
        cell_values: Vec<ModuleElement>,
    ) -> RnmResult<Self> {
        if cell_values.len() != sigma.cell_count() {
            return Err(RnmError::IncompatibleSigma(format!(
                "{} values for {} cells",
                cell_values.len(),
                sigma.cell_count()
            )));
        }
        for v in &cell_values {
            if !same_module(v.module(), module) {
                return Err(RnmError::MixedBases);
            }
        }
        Ok(SimpleMap {
            sigma: sigma.clone(),
            module: module.clone(),
            cell_values,
        })
    }

    pub fn constant(sigma: &Arc<SigmaAlgebra>, value: &ModuleElement) -> Self {
        SimpleMap {
            sigma: sigma.clone(),
            module: value.module().clone(),
            cell_values: vec![value.clone(); sigma.cell_count()],
        }
    }

    /// Dimension-one map from one L0 scalar per cell.
    pub fn scalar(sigma: &Arc<SigmaAlgebra>, values: Vec<L0Element>) -> RnmResult<Self> {
        let base = values
            .first()
            .map(|v| v.base().clone())
            .ok_or(RnmError::EmptyFamily("SimpleMap::scalar"))?;
        let module = FreeModule::scalar(&base);
        let cell_values = values
            .into_iter()
            .map(|v| ModuleElement::new(&module, vec![v]))
            .collect::<RnmResult<Vec<_>>>()?;
        Self::new(sigma, &module, cell_values)
    }

    pub fn sigma(&self) -> &Arc<SigmaAlgebra> {
        &self.sigma
    }

    pub fn module(&self) -> &Arc<FreeModule> {
        &self.module
    }

    pub fn cell_values(&self) -> &[ModuleElement] {
        &self.cell_values
    }

    pub fn cell_value(&self, cell: usize) -> &ModuleElement {
        &self.cell_values[cell]
    }

    pub fn value_at_point(&self, point: usize) -> &ModuleElement {
        &self.cell_values[self.sigma.cell_of_point(point)]
    }

    /// The single L0 scalar per cell of a dimension-one map.
    pub fn scalar_values(&self) -> RnmResult<Vec<&L0Element>> {
        if self.module.dim != 1 {
            return Err(RnmError::BadParameter(format!(
                "expected a scalar map, got dimension {}",
                self.module.dim
            )));
        }
        Ok(self.cell_values.iter().map(|v| &v.coords[0]).collect())
    }

    /// Restate the map on a finer partition of the same space.
    pub fn on_refinement(&self, finer: &Arc<SigmaAlgebra>) -> RnmResult<Self> {
        if !SigmaAlgebra::refines(finer, &self.sigma)? {
            return Err(RnmError::IncompatibleSigma(
                "target partition does not refine the map's partition".into(),
            ));
        }
        let cell_values = finer
            .cells()
            .iter()
            .map(|cell| self.value_at_point(cell[0]).clone())
            .collect();
        Self::new(finer, &self.module, cell_values)
    }

    pub fn add(&self, other: &Self) -> RnmResult<Self> {
        if !self.sigma.same_partition(&other.sigma) {
            let refined = SigmaAlgebra::common_refinement(&self.sigma, &other.sigma)?;
            return self.on_refinement(&refined)?.add(&other.on_refinement(&refined)?);
        }
        let cell_values = self
            .cell_values
            .iter()
            .zip(&other.cell_values)
            .map(|(a, b)| a.add(b))
            .collect::<RnmResult<Vec<_>>>()?;
        Self::new(&self.sigma, &self.module, cell_values)
    }

    pub fn sub(&self, other: &Self) -> RnmResult<Self> {
        if !self.sigma.same_partition(&other.sigma) {
            let refined = SigmaAlgebra::common_refinement(&self.sigma, &other.sigma)?;
            return self.on_refinement(&refined)?.sub(&other.on_refinement(&refined)?);
        }
        let cell_values = self
            .cell_values
            .iter()
            .zip(&other.cell_values)
            .map(|(a, b)| a.sub(b))
            .collect::<RnmResult<Vec<_>>>()?;
        Self::new(&self.sigma, &self.module, cell_values)
    }

    pub fn scale(&self, c: f64) -> RnmResult<Self> {
        let cell_values = self
            .cell_values
            .iter()
            .map(|v| v.scale(c))
            .collect::<RnmResult<Vec<_>>>()?;
        Self::new(&self.sigma, &self.module, cell_values)
    }

    pub fn approx_eq(&self, other: &Self) -> RnmResult<bool> {
        if !self.sigma.same_partition(&other.sigma) {
            return Ok(false);
        }
        for (a, b) in self.cell_values.iter().zip(&other.cell_values) {
            if !a.approx_eq(b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Pairs each cell of the measure with the map value on it. The measure must
/// live on the same partition or a finer one.
fn aligned<'a>(
    map: &'a SimpleMap,
    mu: &L0Measure,
) -> RnmResult<Vec<(&'a ModuleElement, L0Element)>> {
    if !same_space(map.sigma.space(), mu.space()) {
        return Err(RnmError::MixedSpaces);
    }
    if !same_base(&map.module.base, mu.base()) {
        return Err(RnmError::MixedBases);
    }
    if map.sigma.same_partition(mu.sigma()) {
        return Ok(map
            .cell_values
            .iter()
            .zip(mu.cell_values().iter().cloned())
            .collect());
    }
    if SigmaAlgebra::refines(mu.sigma(), &map.sigma)? {
        return Ok(mu
            .sigma()
            .cells()
            .iter()
            .enumerate()
            .map(|(c, cell)| (map.value_at_point(cell[0]), mu.cell_value(c).clone()))
            .collect());
    }
    Err(RnmError::IncompatibleSigma(
        "the measure's partition must refine the map's".into(),
    ))
}

/// Integral of a simple map: the measure-weighted sum of cell values,
/// optionally over a measurable region only.
pub fn integrate(
    map: &SimpleMap,
    mu: &L0Measure,
    region: Option<&PointSet>,
) -> RnmResult<ModuleElement> {
    let included: Vec<bool> = match region {
        None => vec![true; mu.sigma().cell_count()],
        Some(a) => {
            let cells = mu.sigma().cells_of(a)?;
            let mut inc = vec![false; mu.sigma().cell_count()];
            for c in cells {
                inc[c] = true;
            }
            inc
        }
    };
    let pairs = aligned(map, mu)?;
    let mut acc = ModuleElement::zero(&map.module);
    for (c, (value, mass)) in pairs.iter().enumerate() {
        if included[c] {
            acc = acc.add(&value.scale_l0(mass)?)?;
        }
    }
    Ok(acc)
}

/// The p-norm of a simple map against the variation of the measure, atomwise;
/// `f64::INFINITY` selects the essential supremum, which ignores any cell
/// whose variation mass vanishes at the atom in question.
pub fn lp_norm(map: &SimpleMap, mu: &L0Measure, p: f64) -> RnmResult<L0Element> {
    if !(p >= 1.0) {
        return Err(RnmError::BadParameter(format!(
            "exponent must be at least 1, got {p}"
        )));
    }
    let abs = mu.abs_measure();
    let pairs = aligned(map, &abs)?;
    let base = mu.base();
    let tol = base.tolerance();
    let atoms = base.atom_count();
    let mut out = vec![0.0f64; atoms];
    if p.is_infinite() {
        for (value, mass) in &pairs {
            let norm = value.norm();
            for x in 0..atoms {
                if mass.values()[x] > tol {
                    out[x] = out[x].max(norm.values()[x]);
                }
            }
        }
    } else {
        for (value, mass) in &pairs {
            let norm = value.norm();
            for x in 0..atoms {
                out[x] += mass.values()[x] * norm.values()[x].powf(p);
            }
        }
        for v in &mut out {
            *v = v.powf(1.0 / p);
        }
    }
    L0Element::new(base, out)
}

/// Cellwise product of a scalar map with a module-valued map, on the common
/// refinement of their partitions.
pub fn multiply(g: &SimpleMap, v: &SimpleMap) -> RnmResult<SimpleMap> {
    g.scalar_values()?;
    if !same_space(g.sigma.space(), v.sigma.space()) {
        return Err(RnmError::MixedSpaces);
    }
    let refined = SigmaAlgebra::common_refinement(&g.sigma, &v.sigma)?;
    let g_fine = g.on_refinement(&refined)?;
    let v_fine = v.on_refinement(&refined)?;
    let cell_values = g_fine
        .cell_values
        .iter()
        .zip(&v_fine.cell_values)
        .map(|(gc, vc)| vc.scale_l0(&gc.coords[0]))
        .collect::<RnmResult<Vec<_>>>()?;
    SimpleMap::new(&refined, &v.module, cell_values)
}

/// Composition with a measurable map: the returned map takes at each domain
/// point the value of `v` at its image. The change-of-variables identity
/// (integrating the composition against `mu` equals integrating `v` against
/// the image measure) is re-verified on every call.
pub fn pullback(phi: &MeasurableMap, v: &SimpleMap, mu: &L0Measure) -> RnmResult<SimpleMap> {
    if !same_space(phi.codomain(), v.sigma.space()) || !same_space(phi.domain(), mu.space()) {
        return Err(RnmError::MixedSpaces);
    }
    let domain_points = phi.domain().point_count();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_value: Vec<&ModuleElement> = Vec::new();
    for (c, _) in v.sigma.cells().iter().enumerate() {
        let pre = phi.preimage(&v.sigma.cell_point_set(c));
        if !pre.is_empty() {
            blocks.push(pre.indices().to_vec());
            block_value.push(&v.cell_values[c]);
        }
    }
    if blocks.iter().map(|b| b.len()).sum::<usize>() != domain_points {
        return Err(RnmError::InvalidMap(
            "preimages do not partition the domain".into(),
        ));
    }
    let pre_sigma = SigmaAlgebra::from_index_blocks(phi.domain(), blocks)?;
    let pulled = SimpleMap::new(
        &pre_sigma,
        &v.module,
        block_value.into_iter().cloned().collect(),
    )?;
    let lhs = integrate(&pulled, mu, None)?;
    let image = mu.pushforward(phi, &v.sigma)?;
    let rhs = integrate(v, &image, None)?;
    if !lhs.approx_eq(&rhs)? {
        return Err(RnmError::InvariantViolated(
            "change of variables failed for the pullback".into(),
        ));
    }
    Ok(pulled)
}

/// The norm of a scalar map as a supremum of integrals against unit-bounded
/// test maps: the optimal test map is the cellwise atomwise sign, so the
/// supremum is computed by integrating against it.
pub fn dual_l1_norm(g: &SimpleMap, mu: &L0Measure) -> RnmResult<L0Element> {
    if !mu.is_nonnegative() {
        return Err(RnmError::SignedMeasure("dual_l1_norm"));
    }
    let g_scalars = g.scalar_values()?;
    let sign_cells = g_scalars
        .iter()
        .map(|v| v.map(|t| if t < 0.0 { -1.0 } else { 1.0 }))
        .collect::<RnmResult<Vec<_>>>()?;
    let sign_map = SimpleMap::scalar(&g.sigma, sign_cells)?;
    let product = multiply(&sign_map, g)?;
    let integral = integrate(&product, mu, None)?;
    Ok(integral.coords()[0].clone())
}

/// Integral of the product of two scalar maps against a nonnegative measure.
pub fn l2_inner(f: &SimpleMap, g: &SimpleMap, mu: &L0Measure) -> RnmResult<L0Element> {
    if !mu.is_nonnegative() {
        return Err(RnmError::SignedMeasure("l2_inner"));
    }
    f.scalar_values()?;
    g.scalar_values()?;
    let product = multiply(f, g)?;
    let integral = integrate(&product, mu, None)?;
    Ok(integral.coords()[0].clone())
}

/// Two independent evaluations of the projective tensor norm of a simple
/// map: `upper` prices the canonical one-indicator-per-cell representation
/// (indicator 1-norms times fiber norms of the coefficients), `lower` is the
/// direct 1-norm. They must agree atomwise.
pub fn pi_isometry_check(v: &SimpleMap, mu: &L0Measure) -> RnmResult<(L0Element, L0Element)> {
    let lower = lp_norm(v, mu, 1.0)?;
    let base = mu.base();
    let mut upper = L0Element::zero(base);
    let one = L0Element::constant(base, 1.0)?;
    for c in 0..v.sigma.cell_count() {
        let indicator_cells: Vec<L0Element> = (0..v.sigma.cell_count())
            .map(|d| if d == c { one.clone() } else { L0Element::zero(base) })
            .collect();
        let indicator = SimpleMap::scalar(&v.sigma, indicator_cells)?;
        let indicator_norm = lp_norm(&indicator, mu, 1.0)?;
        let coeff_norm = v.cell_values[c].norm();
        upper = upper.add(&indicator_norm.mul(&coeff_norm)?)?;
    }
    Ok((upper, lower))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foundations::LatticeMode;
    use crate::oracles;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn base2() -> Arc<BaseSpace> {
        BaseSpace::new(vec!["x1".into(), "x2".into()], vec![0.5, 0.5]).unwrap()
    }

    fn space(n: usize) -> Arc<crate::foundations::SampleSpace> {
        crate::foundations::SampleSpace::new((1..=n).map(|i| format!("p{i}")).collect()).unwrap()
    }

    fn el(b: &Arc<BaseSpace>, v: &[f64]) -> L0Element {
        L0Element::new(b, v.to_vec()).unwrap()
    }

    fn scalar_map(b: &Arc<BaseSpace>, cells: &[&[f64]]) -> SimpleMap {
        let sp = space(cells.len());
        let sigma = SigmaAlgebra::discrete(&sp);
        SimpleMap::scalar(&sigma, cells.iter().map(|v| el(b, v)).collect()).unwrap()
    }

    fn measure_on(map: &SimpleMap, cells: &[&[f64]]) -> L0Measure {
        let b = map.module().base();
        let values = cells.iter().map(|v| el(b, v)).collect();
        L0Measure::new(map.sigma(), b, values).unwrap()
    }

    #[test]
    fn module_norm_frozen() {
        let b = base2();
        let m = FreeModule::new(&b, 2, FiberNorm::L1).unwrap();
        let v = ModuleElement::new(&m, vec![el(&b, &[1.0, 0.0]), el(&b, &[-2.0, 3.0])]).unwrap();
        assert_eq!(v.norm().values(), &[3.0, 3.0]);
        assert!(ModuleElement::zero(&m).norm().approx_zero());
        let m2 = FreeModule::new(&b, 2, FiberNorm::L2).unwrap();
        let w = ModuleElement::new(&m2, vec![el(&b, &[3.0, 0.0]), el(&b, &[4.0, 1.0])]).unwrap();
        assert_eq!(w.norm().values(), &[5.0, 1.0]);
        let mi = FreeModule::new(&b, 2, FiberNorm::Linf).unwrap();
        let u = ModuleElement::new(&mi, vec![el(&b, &[1.0, -7.0]), el(&b, &[-2.0, 3.0])]).unwrap();
        assert_eq!(u.norm().values(), &[2.0, 7.0]);
    }

    #[test]
    fn norm_absolute_homogeneity() {
        let b = base2();
        let m = FreeModule::new(&b, 2, FiberNorm::L2).unwrap();
        let v = ModuleElement::new(&m, vec![el(&b, &[1.0, -2.0]), el(&b, &[0.5, 3.0])]).unwrap();
        let f = el(&b, &[-2.0, 0.25]);
        let lhs = v.scale_l0(&f).unwrap().norm();
        let rhs = v.norm().mul(&f.abs()).unwrap();
        assert!(lhs.deviation(&rhs).unwrap() <= 1e-12);
    }

    #[test]
    fn integrate_frozen() {
        let b = base2();
        let v = scalar_map(&b, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let mu = measure_on(&v, &[&[0.5, 0.5], &[0.5, 0.5]]);
        let integral = integrate(&v, &mu, None).unwrap();
        assert_eq!(integral.coords()[0].values(), &[2.0, 3.0]);
        // single indicator term
        let a = PointSet::from_indices(2, vec![0]).unwrap();
        let only_a = integrate(&v, &mu, Some(&a)).unwrap();
        assert_eq!(only_a.coords()[0].values(), &[0.5, 1.0]);
        // zero measure
        let zero = L0Measure::zero(v.sigma(), &b);
        assert!(integrate(&v, &zero, None).unwrap().norm().approx_zero());
        // the integral never exceeds the 1-norm
        let bound = lp_norm(&v, &mu, 1.0).unwrap();
        assert!(integral.norm().le(&bound, 1e-12).unwrap());
    }

    #[test]
    fn integrate_region_additive() {
        let b = base2();
        let v = scalar_map(&b, &[&[1.0, -1.0], &[2.0, 0.5], &[-0.5, 3.0]]);
        let mu = measure_on(&v, &[&[0.2, 0.4], &[0.3, -0.1], &[0.5, 0.7]]);
        let a = PointSet::from_indices(3, vec![0, 2]).unwrap();
        let rest = a.complement(3);
        let left = integrate(&v, &mu, Some(&a)).unwrap();
        let right = integrate(&v, &mu, Some(&rest)).unwrap();
        let whole = integrate(&v, &mu, None).unwrap();
        assert!(left.add(&right).unwrap().approx_eq(&whole).unwrap());
    }

    #[test]
    fn integrate_accepts_finer_measure() {
        let b = base2();
        let sp = space(3);
        let coarse = SigmaAlgebra::new(&sp, &[vec!["p1", "p2"], vec!["p3"]]).unwrap();
        let fine = SigmaAlgebra::discrete(&sp);
        let module = FreeModule::scalar(&b);
        let v = SimpleMap::new(
            &coarse,
            &module,
            vec![
                ModuleElement::new(&module, vec![el(&b, &[1.0, 2.0])]).unwrap(),
                ModuleElement::new(&module, vec![el(&b, &[5.0, -1.0])]).unwrap(),
            ],
        )
        .unwrap();
        let mu = L0Measure::constant_lift(&fine, &b, &[0.25, 0.25, 0.5]).unwrap();
        let integral = integrate(&v, &mu, None).unwrap();
        // first two fine cells carry the first coarse value
        assert_eq!(integral.coords()[0].values(), &[0.5 * 1.0 + 0.5 * 5.0, 0.5 * 2.0 - 0.5]);
        // the reverse direction is refused
        let v_fine = v.on_refinement(&fine).unwrap();
        let mu_coarse = L0Measure::constant_lift(&coarse, &b, &[0.5, 0.5]).unwrap();
        assert!(integrate(&v_fine, &mu_coarse, None).is_err());
    }

    #[test]
    fn lp_norm_frozen() {
        let b = base2();
        let v = scalar_map(&b, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let mu = measure_on(&v, &[&[0.5, 0.5], &[0.5, 0.5]]);
        assert_eq!(lp_norm(&v, &mu, 1.0).unwrap().values(), &[2.0, 3.0]);
        // square norm on values 0 and 2
        let w = scalar_map(&b, &[&[0.0, 0.0], &[2.0, 2.0]]);
        let uniform = measure_on(&w, &[&[0.5, 0.5], &[0.5, 0.5]]);
        let n2 = lp_norm(&w, &uniform, 2.0).unwrap();
        for x in n2.values() {
            assert!((x - 2.0f64.sqrt()).abs() < 1e-12);
        }
        assert!(lp_norm(&v, &mu, 0.5).is_err());
    }

    #[test]
    fn sup_norm_excludes_null_cells_per_atom() {
        let b = base2();
        let v = scalar_map(&b, &[&[5.0, 5.0], &[1.0, 1.0]]);
        let mu = measure_on(&v, &[&[1.0, 0.0], &[1.0, 1.0]]);
        let n = lp_norm(&v, &mu, f64::INFINITY).unwrap();
        assert_eq!(n.values(), &[5.0, 1.0]);
        // norm chain at probability measures: 1-norm below 2-norm below sup
        let prob = measure_on(&v, &[&[0.5, 0.5], &[0.5, 0.5]]);
        let n1 = lp_norm(&v, &prob, 1.0).unwrap();
        let n2 = lp_norm(&v, &prob, 2.0).unwrap();
        let ni = lp_norm(&v, &prob, f64::INFINITY).unwrap();
        assert!(n1.le(&n2, 1e-12).unwrap());
        assert!(n2.le(&ni, 1e-12).unwrap());
    }

    #[test]
    fn multiply_identity_and_bound() {
        let b = base2();
        let v = scalar_map(&b, &[&[1.0, -2.0], &[3.0, 0.5]]);
        let ones = SimpleMap::scalar(
            v.sigma(),
            vec![el(&b, &[1.0, 1.0]), el(&b, &[1.0, 1.0])],
        )
        .unwrap();
        let same = multiply(&ones, &v).unwrap();
        assert!(same.approx_eq(&v).unwrap());
        // indicator multiplication equals region integration
        let mu = measure_on(&v, &[&[0.3, 0.6], &[0.7, 0.4]]);
        let a = PointSet::from_indices(2, vec![1]).unwrap();
        let ind = SimpleMap::scalar(
            v.sigma(),
            vec![el(&b, &[0.0, 0.0]), el(&b, &[1.0, 1.0])],
        )
        .unwrap();
        let via_mult = integrate(&multiply(&ind, &v).unwrap(), &mu, None).unwrap();
        let via_region = integrate(&v, &mu, Some(&a)).unwrap();
        assert!(via_mult.approx_eq(&via_region).unwrap());
        // Hoelder-type bound against the sup norm
        let g = scalar_map(&b, &[&[2.0, -1.0], &[-0.5, 3.0]]);
        let prod = multiply(&g, &v).unwrap();
        let lhs = lp_norm(&prod, &mu, 1.0).unwrap();
        let rhs = lp_norm(&g, &mu, f64::INFINITY)
            .unwrap()
            .mul(&lp_norm(&v, &mu, 1.0).unwrap())
            .unwrap();
        assert!(lhs.le(&rhs, 1e-12).unwrap());
    }

    #[test]
    fn multiply_crosses_partitions() {
        let b = base2();
        let sp = space(4);
        let sig_g = SigmaAlgebra::new(&sp, &[vec!["p1", "p2"], vec!["p3", "p4"]]).unwrap();
        let sig_v = SigmaAlgebra::new(&sp, &[vec!["p1", "p3"], vec!["p2", "p4"]]).unwrap();
        let g = SimpleMap::scalar(&sig_g, vec![el(&b, &[2.0, 2.0]), el(&b, &[3.0, 3.0])]).unwrap();
        let v = SimpleMap::scalar(&sig_v, vec![el(&b, &[1.0, 1.0]), el(&b, &[10.0, 10.0])]).unwrap();
        let prod = multiply(&g, &v).unwrap();
        assert_eq!(prod.sigma().cell_count(), 4);
        // p1 sits in g-cell 0 and v-cell 0
        let p1_cell = prod.sigma().cell_of_point(0);
        assert_eq!(prod.cell_value(p1_cell).coords()[0].values(), &[2.0, 2.0]);
        let p4_cell = prod.sigma().cell_of_point(3);
        assert_eq!(prod.cell_value(p4_cell).coords()[0].values(), &[30.0, 30.0]);
    }

    #[test]
    fn pullback_identity_and_collapse() {
        let b = base2();
        let v = scalar_map(&b, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let mu = measure_on(&v, &[&[0.25, 0.5], &[0.75, 0.5]]);
        let id = MeasurableMap::identity(v.sigma().space());
        let same = pullback(&id, &v, &mu).unwrap();
        assert!(same.approx_eq(&v).unwrap());

        // collapse a four-point space onto the two-point one, signed weights
        let dom = space(4);
        let dom_sigma = SigmaAlgebra::discrete(&dom);
        let mut table = HashMap::new();
        table.insert("p1".to_string(), "p1".to_string());
        table.insert("p2".to_string(), "p1".to_string());
        table.insert("p3".to_string(), "p2".to_string());
        table.insert("p4".to_string(), "p2".to_string());
        let phi = MeasurableMap::new(&dom, v.sigma().space(), &table).unwrap();
        let nu = L0Measure::new(
            &dom_sigma,
            &b,
            vec![
                el(&b, &[1.0, -1.0]),
                el(&b, &[-2.0, 1.0]),
                el(&b, &[0.5, 0.5]),
                el(&b, &[1.5, -0.5]),
            ],
        )
        .unwrap();
        let pulled = pullback(&phi, &v, &nu).unwrap();
        assert_eq!(pulled.sigma().cell_count(), 2);
        let lhs = integrate(&pulled, &nu, None).unwrap();
        let rhs = integrate(&v, &nu.pushforward(&phi, v.sigma()).unwrap(), None).unwrap();
        assert!(lhs.approx_eq(&rhs).unwrap());
    }

    #[test]
    fn dual_norm_equals_one_norm_and_oracle() {
        let b = base2();
        // signs that differ across atoms within a cell
        let g = scalar_map(&b, &[&[1.0, -2.0], &[-3.0, 0.5], &[2.0, 2.0]]);
        let mu = measure_on(&g, &[&[0.2, 0.5], &[0.3, 0.25], &[0.5, 0.25]]);
        let dual = dual_l1_norm(&g, &mu).unwrap();
        let direct = lp_norm(&g, &mu, 1.0).unwrap();
        assert!(dual.deviation(&direct).unwrap() <= 1e-12);
        let slow = oracles::dual_norm_sign_enumeration(&g, &mu).unwrap();
        assert!(dual.deviation(&slow).unwrap() <= 1e-12);
        // nonnegative map: the optimal test map is constant one
        let pos = scalar_map(&b, &[&[1.0, 2.0], &[3.0, 0.5], &[0.0, 1.0]]);
        let ones = SimpleMap::scalar(
            pos.sigma(),
            (0..3).map(|_| el(&b, &[1.0, 1.0])).collect(),
        )
        .unwrap();
        let via_ones = integrate(&multiply(&ones, &pos).unwrap(), &mu, None).unwrap();
        let dual_pos = dual_l1_norm(&pos, &mu).unwrap();
        assert!(via_ones.coords()[0].deviation(&dual_pos).unwrap() <= 1e-12);
    }

    #[test]
    fn inner_product_frozen() {
        let b = base2();
        let f = scalar_map(&b, &[&[1.0, 1.0], &[1.0, 1.0]]);
        let g = scalar_map(&b, &[&[1.0, 1.0], &[-1.0, -1.0]]);
        let mu = measure_on(&f, &[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(l2_inner(&f, &g, &mu).unwrap().approx_zero());
        // zero partner
        let zero = scalar_map(&b, &[&[0.0, 0.0], &[0.0, 0.0]]);
        assert!(l2_inner(&f, &zero, &mu).unwrap().approx_zero());
        // disjoint indicators
        let ia = scalar_map(&b, &[&[1.0, 1.0], &[0.0, 0.0]]);
        let ib = scalar_map(&b, &[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!(l2_inner(&ia, &ib, &mu).unwrap().approx_zero());
        // symmetry and compatibility with the 2-norm
        let h = scalar_map(&b, &[&[2.0, -1.0], &[0.5, 3.0]]);
        let fg = l2_inner(&h, &g, &mu).unwrap();
        let gf = l2_inner(&g, &h, &mu).unwrap();
        assert!(fg.deviation(&gf).unwrap() <= 1e-12);
        let hh = l2_inner(&h, &h, &mu).unwrap();
        let n2 = lp_norm(&h, &mu, 2.0).unwrap();
        let n2sq = n2.mul(&n2).unwrap();
        assert!(hh.deviation(&n2sq).unwrap() <= 1e-12);
    }

    #[test]
    fn isometry_check_frozen() {
        let b = base2();
        let m = FreeModule::new(&b, 2, FiberNorm::L2).unwrap();
        let sp = space(2);
        let sigma = SigmaAlgebra::discrete(&sp);
        let vbar = ModuleElement::new(&m, vec![el(&b, &[3.0, 0.0]), el(&b, &[4.0, 2.0])]).unwrap();
        let v = SimpleMap::constant(&sigma, &vbar);
        let mu = L0Measure::new(
            &sigma,
            &b,
            vec![el(&b, &[1.0, -1.0]), el(&b, &[-2.0, 1.0])],
        )
        .unwrap();
        let (upper, lower) = pi_isometry_check(&v, &mu).unwrap();
        // constant map: both sides are the total variation times the norm
        let want = mu.total_variation().1.mul(&vbar.norm()).unwrap();
        assert!(upper.deviation(&want).unwrap() <= 1e-12);
        assert!(lower.deviation(&want).unwrap() <= 1e-12);
        // zero map
        let z = SimpleMap::constant(&sigma, &ModuleElement::zero(&m));
        let (u0, l0) = pi_isometry_check(&z, &mu).unwrap();
        assert!(u0.approx_zero() && l0.approx_zero());
    }

    #[test]
    fn fiberwise_integral_identity() {
        let b = base2();
        let v = scalar_map(&b, &[&[1.0, -2.0], &[3.0, 0.5], &[-1.0, 2.0]]);
        let mu = measure_on(&v, &[&[0.2, -0.4], &[0.3, 0.1], &[0.5, 0.7]]);
        let integral = integrate(&v, &mu, None).unwrap();
        let slices = mu.foliate();
        for (x, slice) in slices.iter().enumerate() {
            let classical: f64 = v
                .cell_values()
                .iter()
                .enumerate()
                .map(|(c, val)| slice.cell_masses()[c] * val.coords()[0].values()[x])
                .sum();
            assert!((integral.coords()[0].values()[x] - classical).abs() <= 1e-12);
        }
    }

    #[test]
    fn measure_lattice_members_integrate_monotone() {
        // integrating a nonnegative map against sup of measures dominates both
        let b = base2();
        let v = scalar_map(&b, &[&[1.0, 2.0], &[3.0, 1.0]]);
        let mu = measure_on(&v, &[&[1.0, 0.0], &[0.0, 2.0]]);
        let nu = measure_on(&v, &[&[0.0, 1.0], &[1.0, 1.0]]);
        let sup = crate::l0_measure::measure_lattice(&[mu.clone(), nu.clone()], LatticeMode::Sup)
            .unwrap();
        let iv_sup = integrate(&v, &sup, None).unwrap().coords()[0].clone();
        for m in [&mu, &nu] {
            let iv = integrate(&v, m, None).unwrap().coords()[0].clone();
            assert!(iv.le(&iv_sup, 1e-12).unwrap());
        }
    }

    proptest! {
        #[test]
        fn lp_triangle_and_homogeneity(
            u in proptest::collection::vec(-4.0f64..4.0, 4),
            w in proptest::collection::vec(-4.0f64..4.0, 4),
            c in -3.0f64..3.0,
            p_choice in 0usize..4,
        ) {
            let b = base2();
            let v1 = scalar_map(&b, &[&u[0..2], &u[2..4]]);
            let v2 = scalar_map(&b, &[&w[0..2], &w[2..4]]);
            let mu = measure_on(&v1, &[&[0.25, 0.5], &[0.75, 0.5]]);
            let p = [1.0, 2.0, 3.0, f64::INFINITY][p_choice];
            let sum_norm = lp_norm(&v1.add(&v2).unwrap(), &mu, p).unwrap();
            let bound = lp_norm(&v1, &mu, p).unwrap().add(&lp_norm(&v2, &mu, p).unwrap()).unwrap();
            prop_assert!(sum_norm.le(&bound, 1e-9).unwrap());
            let scaled = lp_norm(&v1.scale(c).unwrap(), &mu, p).unwrap();
            let expect = lp_norm(&v1, &mu, p).unwrap().scale(c.abs()).unwrap();
            prop_assert!(scaled.deviation(&expect).unwrap() <= 1e-9);
        }

        #[test]
        fn parallelogram_law(
            u in proptest::collection::vec(-4.0f64..4.0, 4),
            w in proptest::collection::vec(-4.0f64..4.0, 4),
        ) {
            let b = base2();
            let v1 = scalar_map(&b, &[&u[0..2], &u[2..4]]);
            let v2 = scalar_map(&b, &[&w[0..2], &w[2..4]]);
            let mu = measure_on(&v1, &[&[0.25, 0.5], &[0.75, 0.5]]);
            let sq = |m: &SimpleMap| {
                let n = lp_norm(m, &mu, 2.0).unwrap();
                n.mul(&n).unwrap()
            };
            let lhs = sq(&v1.add(&v2).unwrap()).add(&sq(&v1.sub(&v2).unwrap())).unwrap();
            let rhs = sq(&v1).scale(2.0).unwrap().add(&sq(&v2).scale(2.0).unwrap()).unwrap();
            prop_assert!(lhs.deviation(&rhs).unwrap() <= 1e-9);
        }

        #[test]
        fn integrate_is_linear(
            u in proptest::collection::vec(-4.0f64..4.0, 4),
            w in proptest::collection::vec(-4.0f64..4.0, 4),
            f in proptest::collection::vec(-2.0f64..2.0, 2),
        ) {
            let b = base2();
            let v1 = scalar_map(&b, &[&u[0..2], &u[2..4]]);
            let v2 = scalar_map(&b, &[&w[0..2], &w[2..4]]);
            let mu = measure_on(&v1, &[&[0.25, -0.5], &[0.75, 0.5]]);
            let scalar = L0Element::new(&b, f).unwrap();
            // additivity in the integrand
            let both = integrate(&v1.add(&v2).unwrap(), &mu, None).unwrap();
            let split = integrate(&v1, &mu, None).unwrap().add(&integrate(&v2, &mu, None).unwrap()).unwrap();
            prop_assert!(both.deviation(&split).unwrap() <= 1e-12);
            // L0-homogeneity: scaling cell values scales the integral
            let scaled_cells: Vec<L0Element> = v1.cell_values().iter()
                .map(|me| me.coords()[0].mul(&scalar).unwrap())
                .collect();
            let v1_scaled = SimpleMap::scalar(v1.sigma(), scaled_cells).unwrap();
            let lhs = integrate(&v1_scaled, &mu, None).unwrap().coords()[0].clone();
            let rhs = integrate(&v1, &mu, None).unwrap().coords()[0].mul(&scalar).unwrap();
            prop_assert!(lhs.deviation(&rhs).unwrap() <= 1e-12);
        }

        #[test]
        fn isometry_check_agrees(u in proptest::collection::vec(-4.0f64..4.0, 8)) {
            let b = base2();
            let m = FreeModule::new(&b, 2, FiberNorm::L2).unwrap();
            let sp = space(2);
            let sigma = SigmaAlgebra::discrete(&sp);
            let mk = |s: &[f64]| ModuleElement::new(
                &m,
                vec![el(&b, &s[0..2]), el(&b, &s[2..4])],
            ).unwrap();
            let v = SimpleMap::new(&sigma, &m, vec![mk(&u[0..4]), mk(&u[4..8])]).unwrap();
            let mu = L0Measure::new(
                &sigma,
                &b,
                vec![el(&b, &[0.5, -1.0]), el(&b, &[-0.25, 0.75])],
            ).unwrap();
            let (upper, lower) = pi_isometry_check(&v, &mu).unwrap();
            prop_assert!(upper.deviation(&lower).unwrap() <= 1e-12);
        }
    }
}
