//! Conditional expectation and martingales for module-valued simple maps.
//!
//! Conditioning a map on a coarser partition replaces it, block by block,
//! with the reference-weighted average of its values; per atom of the base
//! this is the orthogonal projection onto maps constant on the coarser
//! blocks. Module values are projected coordinatewise. A martingale is a
//! sequence of maps along a nested chain of partitions where each term is
//! the projection of the next.

use std::sync::Arc;

use crate::foundations::{same_space, L0Element, SampleSpace, SigmaAlgebra};
use crate::l0_measure::L0Measure;
use crate::module_integration::{ModuleElement, SimpleMap};
use crate::{RnmError, RnmResult};

/// A chain of partitions ordered coarse to fine: every cell of a stage is a
/// union of cells of the next stage.
#[derive(Debug, Clone)]
pub struct Filtration {
    space: Arc<SampleSpace>,
    stages: Vec<Arc<SigmaAlgebra>>,
}

impl Filtration {
    pub fn new(stages: Vec<Arc<SigmaAlgebra>>) -> RnmResult<Arc<Self>> {
        if stages.is_empty() {
            return Err(RnmError::EmptyFamily("filtration stages"));
        }
        let space = stages[0].space().clone();
        for stage in &stages[1..] {
            if !same_space(stage.space(), &space) {
                return Err(RnmError::MixedSpaces);
            }
        }
        for n in 0..stages.len() - 1 {
            if !SigmaAlgebra::refines(&stages[n + 1], &stages[n])? {
                return Err(RnmError::IncompatibleSigma(format!(
                    "stage {} is not refined by stage {}",
                    n,
                    n + 1
                )));
            }
        }
        Ok(Arc::new(Filtration { space, stages }))
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn stages(&self) -> &[Arc<SigmaAlgebra>] {
        &self.stages
    }

    pub fn stage(&self, n: usize) -> &Arc<SigmaAlgebra> {
        &self.stages[n]
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }
}

/// One map per stage, each constant on the cells of its stage.
#[derive(Debug, Clone)]
pub struct MartingaleSequence {
    filtration: Arc<Filtration>,
    maps: Vec<SimpleMap>,
}

impl MartingaleSequence {
    pub fn new(filtration: &Arc<Filtration>, maps: Vec<SimpleMap>) -> RnmResult<Self> {
        if maps.len() != filtration.stage_count() {
            return Err(RnmError::BadParameter(format!(
                "expected {} maps, got {}",
                filtration.stage_count(),
                maps.len()
            )));
        }
        for (n, map) in maps.iter().enumerate() {
            if !SigmaAlgebra::refines(filtration.stage(n), map.sigma())? {
                return Err(RnmError::IncompatibleSigma(format!(
                    "map {n} is not measurable for its stage"
                )));
            }
        }
        Ok(MartingaleSequence {
            filtration: filtration.clone(),
            maps,
        })
    }

    pub fn filtration(&self) -> &Arc<Filtration> {
        &self.filtration
    }

    pub fn maps(&self) -> &[SimpleMap] {
        &self.maps
    }
}

/// Block average of `v` over the cells of the coarser partition `b`,
/// weighted by `mu`. On a block whose mass vanishes at an atom the value at
/// that atom is zero. The measure's partition must refine the map's.
pub fn cond_expect(
    v: &SimpleMap,
    mu: &L0Measure,
    b: &Arc<SigmaAlgebra>,
) -> RnmResult<SimpleMap> {
    if !mu.is_nonnegative() {
        return Err(RnmError::SignedMeasure("cond_expect"));
    }
    let f = v.sigma();
    if !SigmaAlgebra::refines(f, b)? {
        return Err(RnmError::IncompatibleSigma(
            "the conditioning partition must coarsen the map's".into(),
        ));
    }
    if !SigmaAlgebra::refines(mu.sigma(), f)? {
        return Err(RnmError::IncompatibleSigma(
            "the measure's partition must refine the map's".into(),
        ));
    }
    let base = mu.base();
    let module = v.module();
    let atoms = base.atom_count();
    let dim = module.dim();
    let tol = base.tolerance();

    // fine-cell masses and the coarse cell containing each fine cell
    let fine_masses: Vec<L0Element> = (0..f.cell_count())
        .map(|c| mu.evaluate(&f.cell_point_set(c)))
        .collect::<RnmResult<_>>()?;
    let parent: Vec<usize> = (0..f.cell_count())
        .map(|c| b.cell_of_point(f.cells()[c][0]))
        .collect();
    let block_masses: Vec<L0Element> = (0..b.cell_count())
        .map(|d| mu.evaluate(&b.cell_point_set(d)))
        .collect::<RnmResult<_>>()?;

    let mut out = Vec::with_capacity(b.cell_count());
    for d in 0..b.cell_count() {
        let den = block_masses[d].values();
        let mut coords = Vec::with_capacity(dim);
        for k in 0..dim {
            let mut values = vec![0.0f64; atoms];
            for c in 0..f.cell_count() {
                if parent[c] != d {
                    continue;
                }
                let w = fine_masses[c].values();
                let vv = v.cell_values()[c].coords()[k].values();
                for x in 0..atoms {
                    values[x] += w[x] * vv[x];
                }
            }
            for x in 0..atoms {
                values[x] = if den[x] > tol { values[x] / den[x] } else { 0.0 };
            }
            coords.push(L0Element::new(base, values)?);
        }
        out.push(ModuleElement::new(module, coords)?);
    }
    SimpleMap::new(b, module, out)
}

/// True when every term is the projection of the next onto its stage.
pub fn is_martingale(seq: &MartingaleSequence, mu: &L0Measure) -> RnmResult<bool> {
    let stages = seq.filtration().stages();
    for n in 0..seq.maps().len() - 1 {
        let projected = cond_expect(&seq.maps()[n + 1], mu, &stages[n])?;
        let lifted = seq.maps()[n].on_refinement(&stages[n])?;
        if !projected.approx_eq(&lifted)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The martingale whose last term is `terminal`: each stage holds the
/// projection of the terminal map onto that stage.
pub fn build_martingale(
    terminal: &SimpleMap,
    filtration: &Arc<Filtration>,
    mu: &L0Measure,
) -> RnmResult<MartingaleSequence> {
    let last = filtration.stage(filtration.stage_count() - 1);
    if !SigmaAlgebra::refines(last, terminal.sigma())? {
        return Err(RnmError::IncompatibleSigma(
            "terminal map is not measurable for the final stage".into(),
        ));
    }
    let maps = filtration
        .stages()
        .iter()
        .map(|stage| cond_expect(terminal, mu, stage))
        .collect::<RnmResult<Vec<_>>>()?;
    MartingaleSequence::new(filtration, maps)
}
