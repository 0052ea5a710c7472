//! Seeded deterministic generators for randomized property runs, plus the
//! handful of named fixtures the batteries rely on.
//!
//! Every generator draws from a caller-supplied [`ChaCha8Rng`] so a run is
//! reproducible from its seed alone; [`rng`] is the single way a seed becomes
//! a stream. Composite generators return small structs whose parts are
//! mutually consistent (shared base, nested partitions) so property tests
//! can start from a valid configuration.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::foundations::{BaseSpace, L0Element, MeasurableMap, SampleSpace, SigmaAlgebra};
use crate::l0_measure::{mask_to_set, GaugeFunction, L0Measure};
use crate::module_integration::{FiberNorm, FreeModule, ModuleElement, SimpleMap};
use crate::perimeter::RandomBinaryField;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 1 to `max_atoms` atoms with strictly positive weights of total mass
/// exactly 1 (the last weight absorbs the rounding of the normalization).
pub fn random_base(rng: &mut ChaCha8Rng, max_atoms: usize) -> Arc<BaseSpace> {
    let n = rng.gen_range(1..=max_atoms);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..n - 1].iter().sum();
    weights[n - 1] = 1.0 - head;
    BaseSpace::new((1..=n).map(|i| format!("x{i}")).collect(), weights)
        .expect("generated weights are positive and sum to 1")
}

pub fn random_space(
    rng: &mut ChaCha8Rng,
    min_points: usize,
    max_points: usize,
) -> Arc<SampleSpace> {
    let n = rng.gen_range(min_points..=max_points);
    SampleSpace::new((1..=n).map(|i| format!("p{i}")).collect())
        .expect("generated point ids are distinct")
}

/// A partition of `space` into at most `max_cells` nonempty cells; the
/// point-to-cell assignment is uniform after pinning one point per cell.
pub fn random_partition(
    rng: &mut ChaCha8Rng,
    space: &Arc<SampleSpace>,
    max_cells: usize,
) -> Arc<SigmaAlgebra> {
    let n = space.point_count();
    let k = rng.gen_range(1..=max_cells.min(n));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); k];
    for (slot, &p) in order.iter().enumerate() {
        let bucket = if slot < k { slot } else { rng.gen_range(0..k) };
        cells[bucket].push(space.points()[p].clone());
    }
    SigmaAlgebra::new(space, &cells).expect("generated cells partition the space")
}

/// A partition refining `sigma`: every cell is split into a random number of
/// nonempty pieces (possibly one, so the refinement can be trivial).
pub fn random_refinement(rng: &mut ChaCha8Rng, sigma: &Arc<SigmaAlgebra>) -> Arc<SigmaAlgebra> {
    let points = sigma.space().points();
    let mut cells: Vec<Vec<String>> = Vec::new();
    for cell in sigma.cells() {
        let k = rng.gen_range(1..=cell.len());
        let mut sub: Vec<Vec<String>> = vec![Vec::new(); k];
        for (slot, &p) in cell.iter().enumerate() {
            let bucket = if slot < k { slot } else { rng.gen_range(0..k) };
            sub[bucket].push(points[p].clone());
        }
        cells.append(&mut sub);
    }
    SigmaAlgebra::new(sigma.space(), &cells).expect("splitting cells keeps a partition")
}

pub fn random_element(rng: &mut ChaCha8Rng, base: &Arc<BaseSpace>, lo: f64, hi: f64) -> L0Element {
    L0Element::new(
        base,
        (0..base.atom_count()).map(|_| rng.gen_range(lo..hi)).collect(),
    )
    .expect("generated values are finite")
}

fn measure_with(
    rng: &mut ChaCha8Rng,
    sigma: &Arc<SigmaAlgebra>,
    base: &Arc<BaseSpace>,
    lo: f64,
    hi: f64,
) -> L0Measure {
    let values = (0..sigma.cell_count())
        .map(|_| random_element(rng, base, lo, hi))
        .collect();
    L0Measure::new(sigma, base, values).expect("one value per cell")
}

pub fn random_signed_measure(
    rng: &mut ChaCha8Rng,
    sigma: &Arc<SigmaAlgebra>,
    base: &Arc<BaseSpace>,
    scale: f64,
) -> L0Measure {
    measure_with(rng, sigma, base, -scale, scale)
}

/// Nonnegative cell masses with roughly a fifth of the (cell, atom) pairs
/// pinned to exactly zero so degenerate fibers stay exercised.
pub fn random_nonneg_measure(
    rng: &mut ChaCha8Rng,
    sigma: &Arc<SigmaAlgebra>,
    base: &Arc<BaseSpace>,
    scale: f64,
) -> L0Measure {
    let values = (0..sigma.cell_count())
        .map(|_| {
            L0Element::new(
                base,
                (0..base.atom_count())
                    .map(|_| {
                        if rng.gen_bool(0.2) {
                            0.0
                        } else {
                            rng.gen_range(0.0..scale)
                        }
                    })
                    .collect(),
            )
            .expect("generated values are finite")
        })
        .collect();
    L0Measure::new(sigma, base, values).expect("one value per cell")
}

/// Strictly positive cell masses in `[lo, hi)`; `lo` must be positive.
pub fn random_positive_measure(
    rng: &mut ChaCha8Rng,
    sigma: &Arc<SigmaAlgebra>,
    base: &Arc<BaseSpace>,
    lo: f64,
    hi: f64,
) -> L0Measure {
    assert!(lo > 0.0, "a strictly positive measure needs lo > 0");
    measure_with(rng, sigma, base, lo, hi)
}

/// Nonnegative with total mass exactly 1 on every atom (the last cell
/// absorbs the rounding of the normalization).
pub fn random_probability_measure(
    rng: &mut ChaCha8Rng,
    sigma: &Arc<SigmaAlgebra>,
    base: &Arc<BaseSpace>,
) -> L0Measure {
    let k = sigma.cell_count();
    let atoms = base.atom_count();
    let per_atom: Vec<Vec<f64>> = (0..atoms)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut v: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let head: f64 = v[..k - 1].iter().sum();
            v[k - 1] = 1.0 - head;
            v
        })
        .collect();
    let values = (0..k)
        .map(|c| {
            L0Element::new(base, (0..atoms).map(|a| per_atom[a][c]).collect())
                .expect("normalized values are finite")
        })
        .collect();
    L0Measure::new(sigma, base, values).expect("one value per cell")
}

pub fn random_module(rng: &mut ChaCha8Rng, base: &Arc<BaseSpace>, max_dim: usize) -> Arc<FreeModule> {
    let dim = rng.gen_range(1..=max_dim);
    let norm = match rng.gen_range(0..3) {
        0 => FiberNorm::L1,
        1 => FiberNorm::L2,
        _ => FiberNorm::Linf,
    };
    FreeModule::new(base, dim, norm).expect("dimension is positive")
}

pub fn random_simple_map(
    rng: &mut ChaCha8Rng,
    sigma: &Arc<SigmaAlgebra>,
    module: &Arc<FreeModule>,
    scale: f64,
) -> SimpleMap {
    let cells = (0..sigma.cell_count())
        .map(|_| {
            let coords = (0..module.dim())
                .map(|_| random_element(rng, module.base(), -scale, scale))
                .collect();
            ModuleElement::new(module, coords).expect("one coordinate per dimension")
        })
        .collect();
    SimpleMap::new(sigma, module, cells).expect("one value per cell")
}

pub fn random_point_map(
    rng: &mut ChaCha8Rng,
    domain: &Arc<SampleSpace>,
    codomain: &Arc<SampleSpace>,
) -> MeasurableMap {
    let table: HashMap<String, String> = domain
        .points()
        .iter()
        .map(|p| {
            let image = codomain.points()[rng.gen_range(0..codomain.point_count())].clone();
            (p.clone(), image)
        })
        .collect();
    MeasurableMap::new(domain, codomain, &table).expect("every point has an image")
}

/// A costed cover family holding the empty set (cost zero), the full space,
/// and `extra` further distinct proper subsets with costs in `[0, 1)`.
pub fn random_gauge(
    rng: &mut ChaCha8Rng,
    space: &Arc<SampleSpace>,
    base: &Arc<BaseSpace>,
    extra: usize,
) -> GaugeFunction {
    let n = space.point_count();
    let full = (1u32 << n) - 1;
    let mut masks = vec![0u32, full];
    let available = full.saturating_sub(1) as usize;
    while masks.len() < 2 + extra.min(available) {
        let m = rng.gen_range(1..full);
        if !masks.contains(&m) {
            masks.push(m);
        }
    }
    let members = masks
        .into_iter()
        .map(|m| {
            let cost = if m == 0 {
                L0Element::zero(base)
            } else {
                random_element(rng, base, 0.0, 1.0)
            };
            (mask_to_set(n, m), cost)
        })
        .collect();
    GaugeFunction::new(space, base, members).expect("family holds the empty set and the space")
}

/// One independent Bernoulli image per atom with set-pixel probability
/// `fill`.
pub fn random_field(
    rng: &mut ChaCha8Rng,
    base: &Arc<BaseSpace>,
    width: usize,
    height: usize,
    spacing: f64,
    fill: f64,
) -> RandomBinaryField {
    let images = (0..base.atom_count())
        .map(|_| {
            (0..width * height)
                .map(|_| u8::from(rng.gen_bool(fill)))
                .collect()
        })
        .collect();
    RandomBinaryField::new(base, width, height, spacing, images)
        .expect("generated images match the grid")
}

/// A derivative-problem configuration: a nonnegative numerator and a
/// strictly positive reference on a shared partition of at most 8 cells
/// over at most 4 atoms.
pub struct RnInstance {
    pub base: Arc<BaseSpace>,
    pub sigma: Arc<SigmaAlgebra>,
    pub mu: L0Measure,
    pub nu: L0Measure,
}

pub fn random_rn_instance(rng: &mut ChaCha8Rng) -> RnInstance {
    let base = random_base(rng, 4);
    let space = random_space(rng, 1, 8);
    let sigma = random_partition(rng, &space, 8);
    let mu = random_nonneg_measure(rng, &sigma, &base, 2.0);
    let nu = random_positive_measure(rng, &sigma, &base, 0.1, 2.0);
    RnInstance {
        base,
        sigma,
        mu,
        nu,
    }
}

/// A projection-problem configuration: a nested chain of partitions
/// `coarse` ⊆ `mid` ⊆ `fine`, a nonnegative mass assignment on single
/// points, and a map carried by the finest stage.
pub struct CondExpInstance {
    pub base: Arc<BaseSpace>,
    pub space: Arc<SampleSpace>,
    pub coarse: Arc<SigmaAlgebra>,
    pub mid: Arc<SigmaAlgebra>,
    pub fine: Arc<SigmaAlgebra>,
    pub mu: L0Measure,
    pub v: SimpleMap,
}

pub fn random_condexp_instance(rng: &mut ChaCha8Rng) -> CondExpInstance {
    let base = random_base(rng, 3);
    let space = random_space(rng, 2, 8);
    let coarse = random_partition(rng, &space, 3);
    let mid = random_refinement(rng, &coarse);
    let fine = random_refinement(rng, &mid);
    let discrete = SigmaAlgebra::discrete(&space);
    let mu = random_nonneg_measure(rng, &discrete, &base, 1.0);
    let module = random_module(rng, &base, 2);
    let v = random_simple_map(rng, &fine, &module, 2.0);
    CondExpInstance {
        base,
        space,
        coarse,
        mid,
        fine,
        mu,
        v,
    }
}

/// A transport configuration: a signed mass assignment on single points of
/// the domain, a point map into a smaller codomain, and a partition there.
pub struct PushInstance {
    pub base: Arc<BaseSpace>,
    pub mu: L0Measure,
    pub phi: MeasurableMap,
    pub target: Arc<SigmaAlgebra>,
}

pub fn random_push_instance(rng: &mut ChaCha8Rng) -> PushInstance {
    let base = random_base(rng, 3);
    let domain = random_space(rng, 2, 6);
    let codomain_names: Vec<String> = (1..=rng.gen_range(1..=4)).map(|i| format!("q{i}")).collect();
    let codomain = SampleSpace::new(codomain_names).expect("generated point ids are distinct");
    let phi = random_point_map(rng, &domain, &codomain);
    let target = random_partition(rng, &codomain, codomain.point_count());
    let sigma = SigmaAlgebra::discrete(&domain);
    let mu = random_signed_measure(rng, &sigma, &base, 1.5);
    PushInstance {
        base,
        mu,
        phi,
        target,
    }
}

/// Two points of opposite mass collapsed onto one: the image measure
/// vanishes while the image of the variation keeps mass 2, so the variation
/// of the image sits strictly below the image of the variation and no
/// constant multiple of the former can dominate the latter.
pub fn pushforward_cancellation() -> (L0Measure, MeasurableMap, Arc<SigmaAlgebra>) {
    let base = BaseSpace::new(vec!["x1".into(), "x2".into()], vec![0.5, 0.5])
        .expect("two equal weights");
    let domain = SampleSpace::new(vec!["a".into(), "b".into()]).expect("distinct ids");
    let codomain = SampleSpace::new(vec!["u".into()]).expect("distinct ids");
    let table: HashMap<String, String> = [("a", "u"), ("b", "u")]
        .into_iter()
        .map(|(p, q)| (p.to_string(), q.to_string()))
        .collect();
    let phi = MeasurableMap::new(&domain, &codomain, &table).expect("total assignment");
    let target = SigmaAlgebra::discrete(&codomain);
    let sigma = SigmaAlgebra::discrete(&domain);
    let plus = L0Element::constant(&base, 1.0).expect("finite");
    let minus = L0Element::constant(&base, -1.0).expect("finite");
    let mu = L0Measure::new(&sigma, &base, vec![plus, minus]).expect("one value per cell");
    (mu, phi, target)
}

/// A square of side `s - 2·margin` (clamped to 1) centered in the grid;
/// keeping the parity of `s` keeps all margins concentric and nested.
fn margin_square(size: usize, s: i64, margin: i64) -> Vec<u8> {
    let side = (s - 2 * margin).max(1);
    let lo = (size as i64 - side) / 2;
    let mut img = vec![0u8; size * size];
    for r in lo..lo + side {
        for c in lo..lo + side {
            img[(r * size as i64 + c) as usize] = 1;
        }
    }
    img
}

/// Concentric squares converging to per-atom target squares: margins shrink
/// to zero, so the volume distance to the limit decreases to zero and the
/// perimeters settle at the targets' exactly.
pub fn eroded_square_sequence() -> (Vec<RandomBinaryField>, RandomBinaryField) {
    let base = BaseSpace::new(vec!["x1".into(), "x2".into()], vec![0.5, 0.5])
        .expect("two equal weights");
    let size = 32;
    let spacing = 1.0 / size as f64;
    let sides: [i64; 2] = [10, 13];
    let margins: [i64; 6] = [-4, -2, 3, 1, 0, 0];
    let at_margin = |m: i64| {
        RandomBinaryField::new(
            &base,
            size,
            size,
            spacing,
            sides.iter().map(|&s| margin_square(size, s, m)).collect(),
        )
        .expect("images match the grid")
    };
    let limit = at_margin(0);
    let sequence = margins.iter().map(|&m| at_margin(m)).collect();
    (sequence, limit)
}

fn dithered_square(size: usize, lo: usize, side: usize, band: usize) -> Vec<u8> {
    let mut img = vec![0u8; size * size];
    for r in lo..lo + side {
        for c in lo..lo + side {
            let in_band = c >= lo + side - band;
            if !in_band || (r + c) % 2 == 0 {
                img[r * size + c] = 1;
            }
        }
    }
    img
}

/// Solid squares whose right band is checkerboard-dithered with shrinking
/// band width: the volume distance to the solid square decreases, but the
/// dither keeps every approximant's perimeter strictly above the limit's.
pub fn dithered_band_sequence() -> (Vec<RandomBinaryField>, RandomBinaryField) {
    let base = BaseSpace::new(vec!["x1".into(), "x2".into()], vec![0.5, 0.5])
        .expect("two equal weights");
    let size = 16;
    let spacing = 1.0 / size as f64;
    let (lo, side) = (4, 8);
    let bands: [usize; 4] = [8, 6, 4, 3];
    let limit = RandomBinaryField::new(
        &base,
        size,
        size,
        spacing,
        vec![dithered_square(size, lo, side, 0); 2],
    )
    .expect("images match the grid");
    let sequence = bands
        .iter()
        .map(|&b| {
            RandomBinaryField::new(
                &base,
                size,
                size,
                spacing,
                vec![dithered_square(size, lo, side, b); 2],
            )
            .expect("images match the grid")
        })
        .collect();
    (sequence, limit)
}
