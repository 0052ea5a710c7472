//! Functionals dual to vector-valued maps, and continuity diagnostics for
//! two piecewise-linear test surfaces on the unit square.
//!
//! Over a finite sample space every linear functional with L0 coefficients
//! is integration against the measure carrying those coefficients on
//! singletons; the operator norm is the atomwise l1 norm of the
//! coefficients and matches the total variation of that measure. The grid
//! fixtures realize two classical continuity regimes: a self-similar tent
//! arrangement whose oscillation never decays (order continuity fails), and
//! a corner-chasing variant whose oscillation decays outside a shrinking
//! band (order continuity holds while plain metric continuity degrades).

use std::collections::VecDeque;
use std::str::FromStr;
use std::sync::Arc;

use crate::foundations::{same_base, same_space, BaseSpace, L0Element, SampleSpace, SigmaAlgebra};
use crate::l0_measure::L0Measure;
use crate::module_integration::SimpleMap;
use crate::{RnmError, RnmResult};

/// A linear functional on scalar simple maps, one L0 coefficient per point.
#[derive(Debug, Clone)]
pub struct Functional {
    space: Arc<SampleSpace>,
    base: Arc<BaseSpace>,
    coefficients: Vec<L0Element>,
}

impl Functional {
    pub fn new(
        space: &Arc<SampleSpace>,
        base: &Arc<BaseSpace>,
        coefficients: Vec<L0Element>,
    ) -> RnmResult<Self> {
        if coefficients.len() != space.point_count() {
            return Err(RnmError::BadParameter(format!(
                "expected {} coefficients, got {}",
                space.point_count(),
                coefficients.len()
            )));
        }
        for c in &coefficients {
            if !same_base(c.base(), base) {
                return Err(RnmError::MixedBases);
            }
        }
        Ok(Functional {
            space: space.clone(),
            base: base.clone(),
            coefficients,
        })
    }

    pub fn zero(space: &Arc<SampleSpace>, base: &Arc<BaseSpace>) -> Self {
        let coefficients = vec![L0Element::zero(base); space.point_count()];
        Functional {
            space: space.clone(),
            base: base.clone(),
            coefficients,
        }
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn base(&self) -> &Arc<BaseSpace> {
        &self.base
    }

    pub fn coefficients(&self) -> &[L0Element] {
        &self.coefficients
    }

    /// Evaluate on a scalar map: the coefficient-weighted sum of its point
    /// values, atomwise.
    pub fn apply(&self, f: &SimpleMap) -> RnmResult<L0Element> {
        if !same_space(f.sigma().space(), &self.space) {
            return Err(RnmError::MixedSpaces);
        }
        f.scalar_values()?;
        let mut acc = L0Element::zero(&self.base);
        for point in 0..self.space.point_count() {
            let value = &f.value_at_point(point).coords()[0];
            acc = acc.add(&value.mul(&self.coefficients[point])?)?;
        }
        Ok(acc)
    }

    /// Atomwise rescaling of every coefficient.
    pub fn scale_l0(&self, f: &L0Element) -> RnmResult<Self> {
        let coefficients = self
            .coefficients
            .iter()
            .map(|c| c.mul(f))
            .collect::<RnmResult<Vec<_>>>()?;
        Functional::new(&self.space, &self.base, coefficients)
    }
}

/// The functional integrating against a measure on the discrete partition.
pub fn to_functional(mu: &L0Measure) -> RnmResult<Functional> {
    let sigma = mu.sigma();
    let space = sigma.space();
    if sigma.cell_count() != space.point_count() {
        return Err(RnmError::IncompatibleSigma(
            "functional extraction needs the discrete partition".into(),
        ));
    }
    let mut coefficients = vec![L0Element::zero(mu.base()); space.point_count()];
    for (c, cell) in sigma.cells().iter().enumerate() {
        coefficients[cell[0]] = mu.cell_value(c).clone();
    }
    Functional::new(space, mu.base(), coefficients)
}

/// The measure whose singleton masses are the functional's coefficients.
pub fn from_functional(l: &Functional) -> RnmResult<L0Measure> {
    let sigma = SigmaAlgebra::discrete(&l.space);
    L0Measure::new(&sigma, &l.base, l.coefficients.clone())
}

/// Atomwise l1 norm of the coefficients; the largest value of the
/// functional over maps bounded by one, attained by the sign pattern.
pub fn op_norm(l: &Functional) -> RnmResult<L0Element> {
    let mut acc = L0Element::zero(&l.base);
    for c in &l.coefficients {
        acc = acc.add(&c.abs())?;
    }
    Ok(acc)
}

/// The map holding, per point and atom, the sign of the coefficient; zero
/// coefficients get one, which changes nothing.
pub fn sign_map(l: &Functional) -> RnmResult<SimpleMap> {
    let sigma = SigmaAlgebra::discrete(&l.space);
    let values = l
        .coefficients
        .iter()
        .map(|c| c.map(|t| if t < 0.0 { -1.0 } else { 1.0 }))
        .collect::<RnmResult<Vec<_>>>()?;
    SimpleMap::scalar(&sigma, values)
}

/// Split into two functionals with atomwise-nonnegative coefficients whose
/// difference is the original and whose norms add up to its norm.
pub fn positive_decomposition(l: &Functional) -> RnmResult<(Functional, Functional)> {
    let pos = l
        .coefficients
        .iter()
        .map(|c| c.map(|t| t.max(0.0)))
        .collect::<RnmResult<Vec<_>>>()?;
    let neg = l
        .coefficients
        .iter()
        .map(|c| c.map(|t| (-t).max(0.0)))
        .collect::<RnmResult<Vec<_>>>()?;
    Ok((
        Functional::new(&l.space, &l.base, pos)?,
        Functional::new(&l.space, &l.base, neg)?,
    ))
}

const MAX_GRID_LEVELS: u32 = 20;

/// A real-valued surface sampled on a dyadic grid over the unit square.
/// First axis: 2^levels_p points at j*2^-levels_p. Second axis: 2^levels_x
/// fibers at the midpoints (i+1/2)*2^-levels_x; midpoints never sit on the
/// dyadic boundaries the fixtures are built from.
#[derive(Debug, Clone)]
pub struct GridMap {
    levels_p: u32,
    levels_x: u32,
    values: Vec<f64>,
}

impl GridMap {
    pub fn zero(levels_p: u32, levels_x: u32) -> RnmResult<Self> {
        if levels_p == 0 || levels_x == 0 {
            return Err(RnmError::BadParameter("grid levels must be positive".into()));
        }
        if levels_p > MAX_GRID_LEVELS || levels_x > MAX_GRID_LEVELS {
            return Err(RnmError::SpaceTooLarge(format!(
                "grid levels above {MAX_GRID_LEVELS} are not supported"
            )));
        }
        let np = 1usize << levels_p;
        let nx = 1usize << levels_x;
        Ok(GridMap {
            levels_p,
            levels_x,
            values: vec![0.0; np * nx],
        })
    }

    pub fn from_values(levels_p: u32, levels_x: u32, values: Vec<f64>) -> RnmResult<Self> {
        let mut map = Self::zero(levels_p, levels_x)?;
        if values.len() != map.values.len() {
            return Err(RnmError::BadParameter(format!(
                "expected {} grid values, got {}",
                map.values.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(RnmError::NonFinite(format!("grid value {v}")));
        }
        map.values = values;
        Ok(map)
    }

    pub fn point_count(&self) -> usize {
        1usize << self.levels_p
    }

    pub fn fiber_count(&self) -> usize {
        1usize << self.levels_x
    }

    pub fn p_spacing(&self) -> f64 {
        0.5f64.powi(self.levels_p as i32)
    }

    pub fn point_position(&self, j: usize) -> f64 {
        j as f64 * self.p_spacing()
    }

    pub fn fiber_position(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * 0.5f64.powi(self.levels_x as i32)
    }

    /// Index of the fiber whose midpoint is nearest to x.
    pub fn fiber_near(&self, x: f64) -> usize {
        let nx = self.fiber_count();
        let raw = (x * nx as f64 - 0.5).round();
        (raw.max(0.0) as usize).min(nx - 1)
    }

    pub fn value(&self, j: usize, i: usize) -> f64 {
        self.values[i * self.point_count() + j]
    }

    fn fiber_slice(&self, i: usize) -> &[f64] {
        let np = self.point_count();
        &self.values[i * np..(i + 1) * np]
    }

    pub fn add(&self, other: &Self) -> RnmResult<Self> {
        if self.levels_p != other.levels_p || self.levels_x != other.levels_x {
            return Err(RnmError::BadParameter("grid shapes differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        GridMap::from_values(self.levels_p, self.levels_x, values)
    }

    /// Adds the tent over the square with corner (ca, cb) and side t: a
    /// ridge rising linearly to one halfway across the first axis and back,
    /// on the open strip of fibers (cb, cb+t).
    fn add_tent(&mut self, ca: f64, cb: f64, t: f64) {
        let np = self.point_count();
        let nx = self.fiber_count();
        let h = self.p_spacing();
        let half = t / 2.0;
        let j_lo = ((ca / h) as usize).saturating_add(1);
        let j_hi = (((ca + t) / h) as usize).min(np.saturating_sub(1));
        let i_lo = ((cb * nx as f64 - 0.5).floor().max(-1.0) as i64 + 1) as usize;
        for i in i_lo..nx {
            if self.fiber_position(i) >= cb + t {
                break;
            }
            let row = i * np;
            for j in j_lo..j_hi {
                let p = j as f64 * h;
                if p >= ca + t {
                    break;
                }
                let v = if p <= ca + half {
                    (p - ca) / half
                } else {
                    (ca + t - p) / half
                };
                self.values[row + j] += v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Lambda,
    Theta,
}

impl FixtureKind {
    pub fn name(&self) -> &'static str {
        match self {
            FixtureKind::Lambda => "lambda",
            FixtureKind::Theta => "theta",
        }
    }
}

impl FromStr for FixtureKind {
    type Err = RnmError;

    fn from_str(s: &str) -> RnmResult<Self> {
        match s {
            "lambda" => Ok(FixtureKind::Lambda),
            "theta" => Ok(FixtureKind::Theta),
            other => Err(RnmError::BadParameter(format!(
                "unknown fixture {other:?}, expected lambda or theta"
            ))),
        }
    }
}

/// Builds the truncated fixture surface on the given grid.
///
/// Both surfaces are sums of tents over pairwise disjoint dyadic squares.
/// The first places, at each depth, tents on the lower-left and upper-right
/// quarters of every active square and recurses into the other two
/// quarters, so each fiber meets exactly one full tent per depth. The
/// second follows only the upper-right chain and tents its lower-left
/// quarter, one tent per depth, marching into the corner.
pub fn fixture_map(
    which: FixtureKind,
    depth: u32,
    levels_p: u32,
    levels_x: u32,
) -> RnmResult<GridMap> {
    if depth == 0 || depth > levels_p {
        return Err(RnmError::BadParameter(format!(
            "depth {depth} does not match a grid with {levels_p} levels"
        )));
    }
    let mut map = GridMap::zero(levels_p, levels_x)?;
    match which {
        FixtureKind::Lambda => {
            // stack of active squares (corner, side, depth)
            let mut stack = vec![(0.0f64, 0.0f64, 1.0f64, 1u32)];
            while let Some((a, b, s, n)) = stack.pop() {
                let half = s / 2.0;
                map.add_tent(a, b, half);
                map.add_tent(a + half, b + half, half);
                if n < depth {
                    stack.push((a + half, b, half, n + 1));
                    stack.push((a, b + half, half, n + 1));
                }
            }
        }
        FixtureKind::Theta => {
            for k in 1..=depth {
                let corner = 1.0 - 0.5f64.powi(k as i32 - 1);
                map.add_tent(corner, corner, 0.5f64.powi(k as i32));
            }
        }
    }
    Ok(map)
}

/// Largest oscillation per fiber over point pairs closer than r.
///
/// Pairs are kept when their distance is at most r minus half a spacing,
/// the grid stand-in for the open condition; the result is nondecreasing
/// in r and subadditive under pointwise sums.
pub fn variation(map: &GridMap, r: f64) -> RnmResult<Vec<f64>> {
    if !r.is_finite() {
        return Err(RnmError::NonFinite(format!("radius {r}")));
    }
    let h = map.p_spacing();
    if r <= h {
        return Err(RnmError::RadiusBelowResolution(format!(
            "radius {r} is not above the grid spacing {h}"
        )));
    }
    let k_max = ((r / h) - 0.5).floor() as usize;
    let np = map.point_count();
    let window = k_max.min(np - 1) + 1;
    let mut out = Vec::with_capacity(map.fiber_count());
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    for i in 0..map.fiber_count() {
        let row = map.fiber_slice(i);
        maxq.clear();
        minq.clear();
        let mut best = 0.0f64;
        for j in 0..np {
            while maxq.front().is_some_and(|&f| f + window <= j) {
                maxq.pop_front();
            }
            while minq.front().is_some_and(|&f| f + window <= j) {
                minq.pop_front();
            }
            while maxq.back().is_some_and(|&bk| row[bk] <= row[j]) {
                maxq.pop_back();
            }
            maxq.push_back(j);
            while minq.back().is_some_and(|&bk| row[bk] >= row[j]) {
                minq.pop_back();
            }
            minq.push_back(j);
            if j + 1 >= window {
                let spread = row[*maxq.front().expect("window nonempty")]
                    - row[*minq.front().expect("window nonempty")];
                best = best.max(spread);
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Fixture surface at full depth for the grid, then its variation at
/// radius 2^-n.
pub fn fixture_var(
    which: FixtureKind,
    n: u32,
    levels_p: u32,
    levels_x: u32,
) -> RnmResult<Vec<f64>> {
    if n == 0 {
        return Err(RnmError::BadParameter("radius exponent must be positive".into()));
    }
    let map = fixture_map(which, levels_p, levels_p, levels_x)?;
    variation(&map, 0.5f64.powi(n as i32))
}

/// A radius certifying metric uniform continuity in measure: every point
/// pair at distance at most the radius differs by eps or more only on a
/// fiber set of measure below lambda.
#[derive(Debug, Clone, Copy)]
pub struct UcWitness {
    pub radius: f64,
    pub level: u32,
    pub measure_bound: f64,
}

/// Scans dyadic radii 2^-k downward from the coarsest level and returns
/// the first that passes the per-pair fiber-measure test.
pub fn uc_witness(
    map: &GridMap,
    eps: f64,
    lambda: f64,
    coarsest_level: u32,
) -> RnmResult<Option<UcWitness>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(RnmError::BadParameter(format!("bad threshold {eps}")));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(RnmError::BadParameter(format!("bad measure bound {lambda}")));
    }
    if coarsest_level == 0 || coarsest_level >= map.levels_p {
        return Err(RnmError::BadParameter(format!(
            "coarsest level {coarsest_level} outside the grid's range"
        )));
    }
    let np = map.point_count();
    let fiber_mass = 1.0 / map.fiber_count() as f64;
    let d_limit = 1usize << (map.levels_p - coarsest_level);
    // worst fiber measure for each pair distance, shared by all radii
    let mut per_distance = vec![0.0f64; d_limit + 1];
    let mut counts = vec![0u32; np];
    for d in 1..=d_limit {
        counts[..np - d].fill(0);
        for i in 0..map.fiber_count() {
            let row = map.fiber_slice(i);
            for j in 0..np - d {
                if (row[j] - row[j + d]).abs() >= eps {
                    counts[j] += 1;
                }
            }
        }
        let worst = counts[..np - d].iter().max().copied().unwrap_or(0);
        per_distance[d] = worst as f64 * fiber_mass;
    }
    for level in coarsest_level..map.levels_p {
        let d_max = 1usize << (map.levels_p - level);
        let bound = per_distance[1..=d_max]
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        if bound < lambda {
            return Ok(Some(UcWitness {
                radius: 0.5f64.powi(level as i32),
                level,
                measure_bound: bound,
            }));
        }
    }
    Ok(None)
}
