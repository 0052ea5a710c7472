//! JSON readers and writers for the on-disk formats consumed and produced by
//! the command line tool: base spaces, partitioned sample spaces, measures,
//! vector-valued step maps, filtrations, point maps, gauges, and binary
//! pixel fields.
//!
//! A file that names another file (a measure naming its base) resolves that
//! reference relative to its own directory. Structural problems inside one
//! file surface as [`RnmError::Schema`]; mismatches between two otherwise
//! valid files surface as [`RnmError::CrossRef`].

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::conditional::Filtration;
use crate::error::{RnmError, RnmResult};
use crate::foundations::{
    BaseSpace, L0Element, MeasurableMap, PointSet, SampleSpace, SigmaAlgebra, DEFAULT_TOLERANCE,
};
use crate::l0_measure::{GaugeFunction, L0Measure};
use crate::module_integration::{FiberNorm, FreeModule, ModuleElement, SimpleMap};
use crate::perimeter::RandomBinaryField;

#[derive(Debug, Serialize, Deserialize)]
struct AtomEntry {
    id: String,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BaseFile {
    atoms: Vec<AtomEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpaceFile {
    points: Vec<String>,
    cells: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureFile {
    base: String,
    points: Vec<String>,
    cells: Vec<Vec<String>>,
    /// Keyed by the decimal cell index; each row is one value per atom.
    values: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModuleSection {
    dim: usize,
    fiber_norm: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapFile {
    module: ModuleSection,
    cells: Vec<Vec<String>>,
    /// Keyed by the decimal cell index; each entry holds `dim` coordinate
    /// rows, each row one value per atom.
    values: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FiltrationFile {
    stages: Vec<Vec<Vec<String>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CodomainSection {
    points: Vec<String>,
    cells: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointMapFile {
    codomain: CodomainSection,
    assign: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GaugeMemberEntry {
    set: Vec<String>,
    cost: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GaugeFile {
    base: String,
    points: Vec<String>,
    members: Vec<GaugeMemberEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridSection {
    w: usize,
    h: usize,
    spacing: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldFile {
    base: String,
    grid: GridSection,
    /// Keyed by atom id; see [`decode_image`] for the two pixel encodings.
    images: BTreeMap<String, String>,
}

fn read_file(path: &Path) -> RnmResult<String> {
    std::fs::read_to_string(path).map_err(|source| RnmError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> RnmResult<T> {
    serde_json::from_str(text).map_err(|source| RnmError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn schema(path: &Path, detail: impl Into<String>) -> RnmError {
    RnmError::Schema {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Resolve `reference` against the directory containing `path`.
fn sibling(path: &Path, reference: &str) -> PathBuf {
    let refpath = Path::new(reference);
    if refpath.is_absolute() {
        refpath.to_path_buf()
    } else {
        path.parent().unwrap_or_else(|| Path::new(".")).join(refpath)
    }
}

/// Serialize `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> RnmResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| RnmError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| RnmError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_base(path: &Path) -> RnmResult<Arc<BaseSpace>> {
    let f: BaseFile = parse(path, &read_file(path)?)?;
    let mut atoms = Vec::with_capacity(f.atoms.len());
    let mut weights = Vec::with_capacity(f.atoms.len());
    for entry in f.atoms {
        atoms.push(entry.id);
        weights.push(entry.weight);
    }
    let tolerance = f.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    BaseSpace::with_tolerance(atoms, weights, tolerance).map_err(|e| schema(path, e.to_string()))
}

pub fn save_base(path: &Path, base: &BaseSpace) -> RnmResult<()> {
    let f = BaseFile {
        atoms: base
            .atoms()
            .iter()
            .zip(base.weights())
            .map(|(id, &weight)| AtomEntry {
                id: id.clone(),
                weight,
            })
            .collect(),
        tolerance: Some(base.tolerance()),
    };
    write_json(path, &f)
}

pub fn load_space(path: &Path) -> RnmResult<(Arc<SampleSpace>, Arc<SigmaAlgebra>)> {
    let f: SpaceFile = parse(path, &read_file(path)?)?;
    let space = SampleSpace::new(f.points).map_err(|e| schema(path, e.to_string()))?;
    let sigma = SigmaAlgebra::new(&space, &f.cells).map_err(|e| schema(path, e.to_string()))?;
    Ok((space, sigma))
}

pub fn save_space(path: &Path, sigma: &SigmaAlgebra) -> RnmResult<()> {
    write_json(
        path,
        &SpaceFile {
            points: sigma.space().points().to_vec(),
            cells: cell_names(sigma),
        },
    )
}

fn cell_names(sigma: &SigmaAlgebra) -> Vec<Vec<String>> {
    let points = sigma.space().points();
    sigma
        .cells()
        .iter()
        .map(|cell| cell.iter().map(|&p| points[p].clone()).collect())
        .collect()
}

/// Pull the row for cell `ci` out of a value table and complain about any
/// leftover keys once every cell has been served.
fn take_row<'a, V>(
    path: &Path,
    values: &'a BTreeMap<String, V>,
    ci: usize,
) -> RnmResult<&'a V> {
    values
        .get(&ci.to_string())
        .ok_or_else(|| schema(path, format!("no values for cell {ci}")))
}

fn reject_stray_rows<V>(
    path: &Path,
    values: &BTreeMap<String, V>,
    cell_count: usize,
) -> RnmResult<()> {
    if values.len() != cell_count {
        let stray: Vec<&String> = values
            .keys()
            .filter(|k| {
                !k.parse::<usize>()
                    .map(|i| i < cell_count && i.to_string() == **k)
                    .unwrap_or(false)
            })
            .collect();
        return Err(schema(
            path,
            format!("value keys {stray:?} name no cell (the partition has {cell_count} cells)"),
        ));
    }
    Ok(())
}

/// Load a measure together with the base space its values live over.
pub fn load_measure(path: &Path) -> RnmResult<(Arc<BaseSpace>, L0Measure)> {
    let f: MeasureFile = parse(path, &read_file(path)?)?;
    let base = load_base(&sibling(path, &f.base))?;
    let space = SampleSpace::new(f.points).map_err(|e| schema(path, e.to_string()))?;
    let sigma = SigmaAlgebra::new(&space, &f.cells).map_err(|e| schema(path, e.to_string()))?;
    let mut cell_values = Vec::with_capacity(sigma.cell_count());
    for ci in 0..sigma.cell_count() {
        let row = take_row(path, &f.values, ci)?;
        if row.len() != base.atom_count() {
            return Err(RnmError::CrossRef(format!(
                "cell {ci} of {} carries {} values but the base {:?} has {} atoms",
                path.display(),
                row.len(),
                f.base,
                base.atom_count(),
            )));
        }
        cell_values.push(L0Element::new(&base, row.clone()).map_err(|e| schema(path, e.to_string()))?);
    }
    reject_stray_rows(path, &f.values, sigma.cell_count())?;
    let mu = L0Measure::new(&sigma, &base, cell_values).map_err(|e| schema(path, e.to_string()))?;
    Ok((base, mu))
}

/// Write a measure file that names `base_ref` as its base; the referenced
/// file is the caller's responsibility (see [`save_base`]).
pub fn save_measure(path: &Path, base_ref: &str, mu: &L0Measure) -> RnmResult<()> {
    let sigma = mu.sigma();
    let values = mu
        .cell_values()
        .iter()
        .enumerate()
        .map(|(ci, v)| (ci.to_string(), v.values().to_vec()))
        .collect();
    write_json(
        path,
        &MeasureFile {
            base: base_ref.to_string(),
            points: sigma.space().points().to_vec(),
            cells: cell_names(sigma),
            values,
        },
    )
}

/// Load a step map over a partition of `space` with values in a free module
/// over `base`. The file does not name its base; the caller supplies the
/// companion objects it was saved alongside.
pub fn load_simple_map(
    path: &Path,
    space: &Arc<SampleSpace>,
    base: &Arc<BaseSpace>,
) -> RnmResult<SimpleMap> {
    let f: MapFile = parse(path, &read_file(path)?)?;
    let norm: FiberNorm = f
        .module
        .fiber_norm
        .parse()
        .map_err(|e: RnmError| schema(path, e.to_string()))?;
    let module = FreeModule::new(base, f.module.dim, norm).map_err(|e| schema(path, e.to_string()))?;
    let sigma = SigmaAlgebra::new(space, &f.cells).map_err(|e| schema(path, e.to_string()))?;
    let mut cell_values = Vec::with_capacity(sigma.cell_count());
    for ci in 0..sigma.cell_count() {
        let rows = take_row(path, &f.values, ci)?;
        if rows.len() != module.dim() {
            return Err(schema(
                path,
                format!(
                    "cell {ci} holds {} coordinate rows for a dimension {} module",
                    rows.len(),
                    module.dim(),
                ),
            ));
        }
        let mut coords = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != base.atom_count() {
                return Err(RnmError::CrossRef(format!(
                    "cell {ci} of {} carries {} values but the base has {} atoms",
                    path.display(),
                    row.len(),
                    base.atom_count(),
                )));
            }
            coords.push(L0Element::new(base, row.clone()).map_err(|e| schema(path, e.to_string()))?);
        }
        cell_values.push(
            ModuleElement::new(&module, coords).map_err(|e| schema(path, e.to_string()))?,
        );
    }
    reject_stray_rows(path, &f.values, sigma.cell_count())?;
    SimpleMap::new(&sigma, &module, cell_values).map_err(|e| schema(path, e.to_string()))
}

pub fn save_simple_map(path: &Path, map: &SimpleMap) -> RnmResult<()> {
    let module = map.module();
    let values = map
        .cell_values()
        .iter()
        .enumerate()
        .map(|(ci, v)| {
            (
                ci.to_string(),
                v.coords().iter().map(|c| c.values().to_vec()).collect(),
            )
        })
        .collect();
    write_json(
        path,
        &MapFile {
            module: ModuleSection {
                dim: module.dim(),
                fiber_norm: module.fiber_norm().name().to_string(),
            },
            cells: cell_names(map.sigma()),
            values,
        },
    )
}

/// Load a filtration whose stages partition the supplied space.
pub fn load_filtration(path: &Path, space: &Arc<SampleSpace>) -> RnmResult<Arc<Filtration>> {
    let f: FiltrationFile = parse(path, &read_file(path)?)?;
    let stages = f
        .stages
        .iter()
        .map(|cells| SigmaAlgebra::new(space, cells))
        .collect::<RnmResult<Vec<_>>>()
        .map_err(|e| schema(path, e.to_string()))?;
    Filtration::new(stages).map_err(|e| schema(path, e.to_string()))
}

pub fn save_filtration(path: &Path, filtration: &Filtration) -> RnmResult<()> {
    write_json(
        path,
        &FiltrationFile {
            stages: filtration.stages().iter().map(|s| cell_names(s)).collect(),
        },
    )
}

/// Load a point map out of `domain` along with the partition its file puts
/// on the codomain.
pub fn load_point_map(
    path: &Path,
    domain: &Arc<SampleSpace>,
) -> RnmResult<(MeasurableMap, Arc<SigmaAlgebra>)> {
    let f: PointMapFile = parse(path, &read_file(path)?)?;
    let codomain = SampleSpace::new(f.codomain.points).map_err(|e| schema(path, e.to_string()))?;
    let target =
        SigmaAlgebra::new(&codomain, &f.codomain.cells).map_err(|e| schema(path, e.to_string()))?;
    let table: HashMap<String, String> = f.assign.into_iter().collect();
    let map =
        MeasurableMap::new(domain, &codomain, &table).map_err(|e| schema(path, e.to_string()))?;
    Ok((map, target))
}

pub fn save_point_map(path: &Path, map: &MeasurableMap, target: &SigmaAlgebra) -> RnmResult<()> {
    let domain = map.domain();
    let codomain = map.codomain();
    let assign = domain
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), codomain.points()[map.apply(i)].clone()))
        .collect();
    write_json(
        path,
        &PointMapFile {
            codomain: CodomainSection {
                points: codomain.points().to_vec(),
                cells: cell_names(target),
            },
            assign,
        },
    )
}

/// Load a gauge (a costed family of subsets) and the space it lives on.
pub fn load_gauge(path: &Path) -> RnmResult<(Arc<SampleSpace>, GaugeFunction)> {
    let f: GaugeFile = parse(path, &read_file(path)?)?;
    let base = load_base(&sibling(path, &f.base))?;
    let space = SampleSpace::new(f.points).map_err(|e| schema(path, e.to_string()))?;
    let mut members = Vec::with_capacity(f.members.len());
    for (mi, entry) in f.members.iter().enumerate() {
        let set =
            PointSet::from_names(&space, &entry.set).map_err(|e| schema(path, e.to_string()))?;
        if entry.cost.len() != base.atom_count() {
            return Err(RnmError::CrossRef(format!(
                "member {mi} of {} carries {} cost values but the base has {} atoms",
                path.display(),
                entry.cost.len(),
                base.atom_count(),
            )));
        }
        let cost =
            L0Element::new(&base, entry.cost.clone()).map_err(|e| schema(path, e.to_string()))?;
        members.push((set, cost));
    }
    let gauge =
        GaugeFunction::new(&space, &base, members).map_err(|e| schema(path, e.to_string()))?;
    Ok((space, gauge))
}

pub fn save_gauge(path: &Path, base_ref: &str, gauge: &GaugeFunction) -> RnmResult<()> {
    let space = gauge.space();
    let points = space.points();
    let members = gauge
        .members()
        .iter()
        .map(|&(mask, ref cost)| GaugeMemberEntry {
            set: (0..points.len())
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| points[i].clone())
                .collect(),
            cost: cost.values().to_vec(),
        })
        .collect();
    write_json(
        path,
        &GaugeFile {
            base: base_ref.to_string(),
            points: points.to_vec(),
            members,
        },
    )
}

/// Decode one image string into row-major 0/1 pixels.
///
/// Two encodings are accepted: a plain string of `0` and `1` characters, one
/// per pixel, or a run-length string starting with `R ` followed by
/// whitespace-separated `<count>x<bit>` tokens expanded in order.
fn decode_image(path: &Path, text: &str, expect: usize) -> RnmResult<Vec<u8>> {
    let bits: Vec<u8> = if let Some(rest) = text.strip_prefix("R ") {
        let mut out = Vec::with_capacity(expect);
        for token in rest.split_whitespace() {
            let (count, bit) = token
                .split_once('x')
                .ok_or_else(|| schema(path, format!("bad run token {token:?}")))?;
            let count: usize = count
                .parse()
                .map_err(|_| schema(path, format!("bad run length in token {token:?}")))?;
            let bit: u8 = match bit {
                "0" => 0,
                "1" => 1,
                _ => return Err(schema(path, format!("bad bit in token {token:?}"))),
            };
            out.extend(std::iter::repeat(bit).take(count));
        }
        out
    } else {
        text.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(schema(
                    path,
                    format!("image strings may only contain 0 and 1, found {c:?}"),
                )),
            })
            .collect::<RnmResult<_>>()?
    };
    if bits.len() != expect {
        return Err(schema(
            path,
            format!("image holds {} pixels, the grid needs {expect}", bits.len()),
        ));
    }
    Ok(bits)
}

/// Encode pixels as whichever of the two accepted forms is shorter.
fn encode_image(pixels: &[u8]) -> String {
    let plain: String = pixels.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect();
    let mut runs = String::from("R");
    let mut i = 0;
    while i < pixels.len() {
        let bit = pixels[i];
        let start = i;
        while i < pixels.len() && pixels[i] == bit {
            i += 1;
        }
        runs.push_str(&format!(" {}x{}", i - start, bit));
    }
    if runs.len() < plain.len() {
        runs
    } else {
        plain
    }
}

pub fn load_field(path: &Path) -> RnmResult<RandomBinaryField> {
    let f: FieldFile = parse(path, &read_file(path)?)?;
    let base = load_base(&sibling(path, &f.base))?;
    let expect = f.grid.w * f.grid.h;
    let mut images = Vec::with_capacity(base.atom_count());
    for id in base.atoms() {
        let text = f.images.get(id).ok_or_else(|| {
            RnmError::CrossRef(format!(
                "{} holds no image for atom {id:?} of base {:?}",
                path.display(),
                f.base,
            ))
        })?;
        images.push(decode_image(path, text, expect)?);
    }
    if f.images.len() != base.atom_count() {
        let stray: Vec<&String> = f
            .images
            .keys()
            .filter(|k| base.atom_index(k).is_none())
            .collect();
        return Err(schema(
            path,
            format!("image keys {stray:?} name no atom of the base"),
        ));
    }
    RandomBinaryField::new(&base, f.grid.w, f.grid.h, f.grid.spacing, images)
        .map_err(|e| schema(path, e.to_string()))
}

pub fn save_field(path: &Path, base_ref: &str, field: &RandomBinaryField) -> RnmResult<()> {
    let images = field
        .base()
        .atoms()
        .iter()
        .zip(field.images())
        .map(|(id, pixels)| (id.clone(), encode_image(pixels)))
        .collect();
    write_json(
        path,
        &FieldFile {
            base: base_ref.to_string(),
            grid: GridSection {
                w: field.width(),
                h: field.height(),
                spacing: field.spacing(),
            },
            images,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l0_measure::outer_from_gauge;

    fn dir() -> tempfile::TempDir {
        tempfile::tempdir().expect("temp dir")
    }

    fn two_atom_base(dir: &Path) -> Arc<BaseSpace> {
        let base = BaseSpace::new(
            vec!["x1".into(), "x2".into()],
            vec![0.25, 0.75],
        )
        .unwrap();
        save_base(&dir.join("base.json"), &base).unwrap();
        base
    }

    #[test]
    fn base_round_trip_and_default_tolerance() {
        let d = dir();
        let base = two_atom_base(d.path());
        let back = load_base(&d.path().join("base.json")).unwrap();
        assert_eq!(back.atoms(), base.atoms());
        assert_eq!(back.weights(), base.weights());
        assert_eq!(back.tolerance(), base.tolerance());

        let bare = d.path().join("bare.json");
        std::fs::write(
            &bare,
            r#"{"atoms":[{"id":"a","weight":0.5},{"id":"b","weight":0.5}]}"#,
        )
        .unwrap();
        assert_eq!(load_base(&bare).unwrap().tolerance(), DEFAULT_TOLERANCE);
    }

    #[test]
    fn measure_round_trip_resolves_base_beside_the_file() {
        let d = dir();
        let base = two_atom_base(d.path());
        let space = SampleSpace::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let sigma = SigmaAlgebra::new(&space, &[vec!["a", "b"], vec!["c"]]).unwrap();
        let mu = L0Measure::new(
            &sigma,
            &base,
            vec![
                L0Element::new(&base, vec![1.0, -0.5]).unwrap(),
                L0Element::new(&base, vec![0.0, 2.0]).unwrap(),
            ],
        )
        .unwrap();
        let mpath = d.path().join("mu.json");
        save_measure(&mpath, "base.json", &mu).unwrap();

        let (base2, mu2) = load_measure(&mpath).unwrap();
        assert_eq!(base2.atoms(), base.atoms());
        assert_eq!(mu2.sigma().cells(), sigma.cells());
        for (a, b) in mu.cell_values().iter().zip(mu2.cell_values()) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn measure_value_width_mismatch_is_a_cross_reference_error() {
        let d = dir();
        let bpath = d.path().join("base.json");
        std::fs::write(
            &bpath,
            r#"{"atoms":[{"id":"x1","weight":0.2},{"id":"x2","weight":0.3},{"id":"x3","weight":0.5}]}"#,
        )
        .unwrap();
        let mpath = d.path().join("mu.json");
        std::fs::write(
            &mpath,
            r#"{"base":"base.json","points":["a","b"],"cells":[["a"],["b"]],
               "values":{"0":[1.0,2.0],"1":[0.0,0.0]}}"#,
        )
        .unwrap();
        let err = load_measure(&mpath).unwrap_err();
        assert!(matches!(err, RnmError::CrossRef(_)), "got {err:?}");
        assert!(err.is_input_error());
    }

    #[test]
    fn missing_and_malformed_files_report_io_and_json_errors() {
        let d = dir();
        let missing = d.path().join("absent.json");
        assert!(matches!(load_base(&missing), Err(RnmError::Io { .. })));

        let mangled = d.path().join("mangled.json");
        std::fs::write(&mangled, "{\"atoms\": [").unwrap();
        assert!(matches!(load_base(&mangled), Err(RnmError::Json { .. })));

        let wrong_shape = d.path().join("shape.json");
        std::fs::write(&wrong_shape, r#"{"atoms": 7}"#).unwrap();
        assert!(matches!(
            load_base(&wrong_shape),
            Err(RnmError::Json { .. })
        ));
    }

    #[test]
    fn measure_with_missing_or_stray_rows_is_rejected() {
        let d = dir();
        two_atom_base(d.path());
        let mpath = d.path().join("mu.json");
        std::fs::write(
            &mpath,
            r#"{"base":"base.json","points":["a","b"],"cells":[["a"],["b"]],
               "values":{"0":[1.0,2.0]}}"#,
        )
        .unwrap();
        assert!(matches!(load_measure(&mpath), Err(RnmError::Schema { .. })));

        std::fs::write(
            &mpath,
            r#"{"base":"base.json","points":["a","b"],"cells":[["a"],["b"]],
               "values":{"0":[1.0,2.0],"1":[0.0,0.0],"7":[1.0,1.0]}}"#,
        )
        .unwrap();
        assert!(matches!(load_measure(&mpath), Err(RnmError::Schema { .. })));

        std::fs::write(
            &mpath,
            r#"{"base":"base.json","points":["a","b"],"cells":[["a"],["a","b"]],
               "values":{"0":[1.0,2.0],"1":[0.0,0.0]}}"#,
        )
        .unwrap();
        assert!(matches!(load_measure(&mpath), Err(RnmError::Schema { .. })));
    }

    #[test]
    fn simple_map_round_trip_keeps_module_and_values() {
        let d = dir();
        let base = two_atom_base(d.path());
        let space = SampleSpace::new(vec!["a".into(), "b".into()]).unwrap();
        let sigma = SigmaAlgebra::new(&space, &[vec!["a"], vec!["b"]]).unwrap();
        let module = FreeModule::new(&base, 2, FiberNorm::L2).unwrap();
        let cell = |p: f64, q: f64, r: f64, s: f64| {
            ModuleElement::new(
                &module,
                vec![
                    L0Element::new(&base, vec![p, q]).unwrap(),
                    L0Element::new(&base, vec![r, s]).unwrap(),
                ],
            )
            .unwrap()
        };
        let map = SimpleMap::new(
            &sigma,
            &module,
            vec![cell(1.0, 2.0, 3.0, 4.0), cell(-1.0, 0.5, 0.0, 2.5)],
        )
        .unwrap();
        let path = d.path().join("map.json");
        save_simple_map(&path, &map).unwrap();

        let back = load_simple_map(&path, &space, &base).unwrap();
        assert_eq!(back.module().dim(), 2);
        assert_eq!(back.module().fiber_norm(), FiberNorm::L2);
        assert!(back.approx_eq(&map).unwrap());

        let err = load_simple_map(&path, &space, &BaseSpace::new(
            vec!["y1".into(), "y2".into(), "y3".into()],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap())
        .unwrap_err();
        assert!(matches!(err, RnmError::CrossRef(_)), "got {err:?}");
    }

    #[test]
    fn filtration_round_trip_preserves_the_stages() {
        let d = dir();
        let space = SampleSpace::new(vec!["1".into(), "2".into(), "3".into(), "4".into()]).unwrap();
        let coarse = SigmaAlgebra::new(&space, &[vec!["1", "2"], vec!["3", "4"]]).unwrap();
        let fine = SigmaAlgebra::discrete(&space);
        let filtration = Filtration::new(vec![coarse, fine]).unwrap();
        let path = d.path().join("filt.json");
        save_filtration(&path, &filtration).unwrap();

        let back = load_filtration(&path, &space).unwrap();
        assert_eq!(back.stage_count(), 2);
        assert_eq!(back.stage(0).cells(), filtration.stage(0).cells());
        assert_eq!(back.stage(1).cells(), filtration.stage(1).cells());

        let bad = d.path().join("bad.json");
        std::fs::write(
            &bad,
            r#"{"stages":[[["1"],["2"],["3"],["4"]],[["1","2"],["3","4"]]]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_filtration(&bad, &space),
            Err(RnmError::Schema { .. })
        ));
    }

    #[test]
    fn point_map_file_reconstructs_map_and_target_partition() {
        let d = dir();
        let domain = SampleSpace::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let path = d.path().join("phi.json");
        std::fs::write(
            &path,
            r#"{"codomain":{"points":["u","v"],"cells":[["u"],["v"]]},
               "assign":{"a":"u","b":"u","c":"v"}}"#,
        )
        .unwrap();
        let (map, target) = load_point_map(&path, &domain).unwrap();
        let image = |m: &MeasurableMap, p: &str| {
            m.codomain().points()[m.apply(domain.point_index(p).unwrap())].clone()
        };
        assert_eq!(image(&map, "a"), "u");
        assert_eq!(image(&map, "c"), "v");
        assert_eq!(target.cell_count(), 2);

        let out = d.path().join("phi2.json");
        save_point_map(&out, &map, &target).unwrap();
        let (map2, target2) = load_point_map(&out, &domain).unwrap();
        assert_eq!(image(&map2, "b"), "u");
        assert_eq!(target2.cells(), target.cells());

        let incomplete = d.path().join("phi3.json");
        std::fs::write(
            &incomplete,
            r#"{"codomain":{"points":["u"],"cells":[["u"]]},"assign":{"a":"u"}}"#,
        )
        .unwrap();
        assert!(matches!(
            load_point_map(&incomplete, &domain),
            Err(RnmError::Schema { .. })
        ));
    }

    #[test]
    fn gauge_round_trip_reproduces_cover_costs() {
        let d = dir();
        let base = two_atom_base(d.path());
        let space = SampleSpace::new(vec!["a".into(), "b".into()]).unwrap();
        let e = |v: Vec<f64>| L0Element::new(&base, v).unwrap();
        let set = |names: &[&str]| PointSet::from_names(&space, names).unwrap();
        let gauge = GaugeFunction::new(
            &space,
            &base,
            vec![
                (set(&[]), L0Element::zero(&base)),
                (set(&["a"]), e(vec![0.5, 1.0])),
                (set(&["b"]), e(vec![0.5, 0.0])),
                (set(&["a", "b"]), e(vec![0.75, 0.5])),
            ],
        )
        .unwrap();
        let path = d.path().join("gauge.json");
        save_gauge(&path, "base.json", &gauge).unwrap();

        let (_space2, gauge2) = load_gauge(&path).unwrap();
        let outer = outer_from_gauge(&gauge).unwrap();
        let outer2 = outer_from_gauge(&gauge2).unwrap();
        for mask in 0..4u32 {
            assert_eq!(
                outer.value_mask(mask).values(),
                outer2.value_mask(mask).values()
            );
        }

        let noempty = d.path().join("noempty.json");
        std::fs::write(
            &noempty,
            r#"{"base":"base.json","points":["a","b"],
               "members":[{"set":["a","b"],"cost":[1.0,1.0]}]}"#,
        )
        .unwrap();
        assert!(matches!(load_gauge(&noempty), Err(RnmError::Schema { .. })));
    }

    #[test]
    fn field_round_trip_uses_both_pixel_encodings() {
        let d = dir();
        let base = two_atom_base(d.path());
        // Atom 1: one full-width band (long runs, so the run encoding wins).
        // Atom 2: checkerboard (runs of one, so the plain encoding wins).
        let mut solid = vec![0u8; 64];
        for r in 2..6 {
            for c in 0..8 {
                solid[r * 8 + c] = 1;
            }
        }
        let checker: Vec<u8> = (0..64).map(|i| ((i / 8 + i % 8) % 2) as u8).collect();
        let field =
            RandomBinaryField::new(&base, 8, 8, 0.5, vec![solid.clone(), checker.clone()]).unwrap();
        let path = d.path().join("field.json");
        save_field(&path, "base.json", &field).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("R "), "solid image should use runs");
        assert!(text.contains("01010"), "checker image should stay plain");

        let back = load_field(&path).unwrap();
        assert_eq!(back.images()[0], solid);
        assert_eq!(back.images()[1], checker);
        assert_eq!(back.width(), 8);
        assert_eq!(back.spacing(), 0.5);

        let missing = d.path().join("short.json");
        std::fs::write(
            &missing,
            r#"{"base":"base.json","grid":{"w":2,"h":2,"spacing":1.0},
               "images":{"x1":"0101"}}"#,
        )
        .unwrap();
        assert!(matches!(load_field(&missing), Err(RnmError::CrossRef(_))));

        let shortimg = d.path().join("badlen.json");
        std::fs::write(
            &shortimg,
            r#"{"base":"base.json","grid":{"w":2,"h":2,"spacing":1.0},
               "images":{"x1":"010","x2":"R 4x1"}}"#,
        )
        .unwrap();
        assert!(matches!(load_field(&shortimg), Err(RnmError::Schema { .. })));
    }

    #[test]
    fn space_file_round_trip() {
        let d = dir();
        let space = SampleSpace::new(vec!["p".into(), "q".into(), "r".into()]).unwrap();
        let sigma = SigmaAlgebra::new(&space, &[vec!["p", "r"], vec!["q"]]).unwrap();
        let path = d.path().join("space.json");
        save_space(&path, &sigma).unwrap();
        let (space2, sigma2) = load_space(&path).unwrap();
        assert_eq!(space2.points(), space.points());
        assert_eq!(sigma2.cells(), sigma.cells());
    }
}
