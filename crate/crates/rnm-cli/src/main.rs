//! Command line driver: loads instance files, dispatches to the library,
//! and emits a deterministic JSON report.
//!
//! Exit codes: 0 when every check passes, 1 when a mathematical guarantee
//! fails (a report check or a violated invariant), 2 on malformed or
//! inconsistent input. Reports are byte-identical for identical inputs and
//! seed, except for the trailing duration field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use rnm_core::conditional::{build_martingale, is_martingale, cond_expect, MartingaleSequence};
use rnm_core::duality::{
    fixture_map, fixture_var, op_norm, positive_decomposition, sign_map, to_functional,
    uc_witness, FixtureKind,
};
use rnm_core::foundations::{L0Element, PointSet, SigmaAlgebra};
use rnm_core::instances;
use rnm_core::io;
use rnm_core::l0_measure::{caratheodory_sets, outer_from_gauge, L0Measure};
use rnm_core::module_integration::{
    dual_l1_norm, integrate, lp_norm, pi_isometry_check, pullback, FreeModule, SimpleMap,
};
use rnm_core::oracles;
use rnm_core::perimeter::{lsc_probe, random_perimeter};
use rnm_core::radon_nikodym::{measure_from_density, rn_derivative, RnMode};
use rnm_core::{RnmError, RnmResult};

/// Tolerance for identities that hold exactly up to roundoff.
const EXACT_TOL: f64 = 1e-12;
/// Default tolerance for reconstruction and projection checks.
const ANALYTIC_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "rnm", version, about = "Fiberwise measure toolkit over finite atomic bases")]
struct Cli {
    /// Seed for every randomized run; echoed in the report.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Override the command's default check tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Total variation of a measure, cellwise and overall.
    Tv {
        #[arg(short, long)]
        measure: PathBuf,
    },
    /// Image of a measure under a point map, with transport bounds.
    Push {
        #[arg(short, long)]
        measure: PathBuf,
        /// Point map file carrying the codomain partition.
        #[arg(long)]
        map: PathBuf,
    },
    /// Split a measure into per-atom scalar slices and reassemble.
    Foliate {
        #[arg(short, long)]
        measure: PathBuf,
    },
    /// Extract the family of sets measured additively by a gauge's cover cost.
    Caratheodory {
        #[arg(short, long)]
        gauge: PathBuf,
    },
    /// Integrate a step map against a measure.
    Integrate {
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        measure: PathBuf,
    },
    /// Integral norms of a step map and the two-sided tensor price.
    Norms {
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        measure: PathBuf,
    },
    /// Density of one measure against a strictly compatible reference.
    Rn {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Either "direct" or "projection".
        #[arg(long, default_value = "direct")]
        mode: String,
        /// Write the density map here.
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Project a step map onto one stage of a filtration.
    Condexp {
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        measure: PathBuf,
        #[arg(long)]
        filtration: PathBuf,
        /// Stage index to project onto.
        #[arg(long, default_value_t = 0)]
        stage: usize,
        /// Write the projected map here.
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Verify or build stagewise-projected map sequences.
    Martingale {
        #[command(subcommand)]
        action: MartingaleCmd,
    },
    /// Functional-side checks for a measure.
    Duality {
        #[command(subcommand)]
        action: DualityCmd,
    },
    /// Reference surfaces and their variation tables.
    Fixtures {
        #[command(subcommand)]
        action: FixturesCmd,
    },
    /// Perimeter of a binary field, or a semicontinuity probe via `lsc`.
    Perimeter(PerimeterArgs),
    /// Run the full invariant battery on seeded random instances.
    Selftest {
        #[arg(long, default_value_t = 40)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum MartingaleCmd {
    /// Check the stagewise projection property of a map sequence.
    Verify {
        /// One map file per filtration stage, in order.
        #[arg(long, num_args = 1.., required = true)]
        seq: Vec<PathBuf>,
        #[arg(short, long)]
        measure: PathBuf,
        #[arg(long)]
        filtration: PathBuf,
    },
    /// Project a terminal map down every stage of a filtration.
    Build {
        #[arg(long)]
        terminal: PathBuf,
        #[arg(short, long)]
        measure: PathBuf,
        #[arg(long)]
        filtration: PathBuf,
        /// Write stage k to `<prefix>k.json`.
        #[arg(short)]
        o: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DualityCmd {
    /// Norm identity, attaining sign map, and positive split for a measure.
    Check {
        #[arg(short, long)]
        measure: PathBuf,
        /// Additional seeded random measures to run the same checks on.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum FixturesCmd {
    /// Variation table of a reference surface at radius 2^-n.
    Var {
        /// Either "lambda" or "theta".
        #[arg(long)]
        which: String,
        /// Radius exponent.
        #[arg(long)]
        n: u32,
        /// Points along the value axis; must be a power of two.
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        /// Fibers along the base axis; must be a power of two.
        #[arg(long, default_value_t = 1024)]
        xgrid: usize,
        /// Write the table here as `x,value` CSV rows.
        #[arg(short)]
        o: Option<PathBuf>,
        /// With --lam, also search for a continuity radius witness.
        #[arg(long)]
        eps: Option<f64>,
        /// Fiber-measure bound for the witness search.
        #[arg(long)]
        lam: Option<f64>,
    },
}

#[derive(Args)]
struct PerimeterArgs {
    /// Field file; required unless a subcommand is given.
    #[arg(short, long)]
    field: Option<PathBuf>,
    #[command(subcommand)]
    action: Option<PerimeterCmd>,
}

#[derive(Subcommand)]
enum PerimeterCmd {
    /// Probe lower semicontinuity along a volume-convergent field sequence.
    Lsc {
        #[arg(long, num_args = 1.., required = true)]
        seq: Vec<PathBuf>,
        #[arg(long)]
        limit: PathBuf,
    },
}

#[derive(Serialize)]
struct Check {
    name: String,
    status: &'static str,
    values: Vec<f64>,
    tolerance: f64,
}

/// Field order is the on-disk order; duration stays last so reports can be
/// compared with the final field stripped.
#[derive(Serialize)]
struct Report {
    command: String,
    parameters: BTreeMap<String, Value>,
    checks: Vec<Check>,
    results: BTreeMap<String, Value>,
    status: &'static str,
    duration_seconds: f64,
}

struct Outcome {
    command: String,
    parameters: BTreeMap<String, Value>,
    checks: Vec<Check>,
    results: BTreeMap<String, Value>,
}

impl Outcome {
    fn new(command: &str) -> Self {
        Outcome {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            results: BTreeMap::new(),
        }
    }

    fn param(&mut self, key: &str, value: Value) {
        self.parameters.insert(key.to_string(), value);
    }

    fn path_param(&mut self, key: &str, path: &Path) {
        self.param(key, json!(path.display().to_string()));
    }

    fn result(&mut self, key: &str, value: Value) {
        self.results.insert(key.to_string(), value);
    }

    /// Passes when every listed value is within the tolerance of zero.
    fn gap_check(&mut self, name: &str, tolerance: f64, values: Vec<f64>) {
        let worst = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.checks.push(Check {
            name: name.to_string(),
            status: if worst <= tolerance { "pass" } else { "fail" },
            values,
            tolerance,
        });
    }

    fn flag_check(&mut self, name: &str, ok: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            status: if ok { "pass" } else { "fail" },
            values: Vec::new(),
            tolerance: 0.0,
        });
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match run(&cli) {
        Ok(outcome) => {
            let status = if outcome.checks.iter().all(|c| c.status == "pass") {
                "pass"
            } else {
                "fail"
            };
            let report = Report {
                command: outcome.command,
                parameters: outcome.parameters,
                checks: outcome.checks,
                results: outcome.results,
                status,
                duration_seconds: started.elapsed().as_secs_f64(),
            };
            let text = match serde_json::to_string_pretty(&report) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: failed to serialize the report: {e}");
                    return std::process::ExitCode::from(2);
                }
            };
            if let Some(out) = &cli.out {
                if let Err(e) = std::fs::write(out, text + "\n") {
                    eprintln!("error: cannot write report to {}: {e}", out.display());
                    return std::process::ExitCode::from(2);
                }
            } else {
                println!("{text}");
            }
            if status == "pass" {
                std::process::ExitCode::SUCCESS
            } else {
                std::process::ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> RnmResult<Outcome> {
    match &cli.command {
        Command::Tv { measure } => cmd_tv(measure),
        Command::Push { measure, map } => cmd_push(cli, measure, map),
        Command::Foliate { measure } => cmd_foliate(measure),
        Command::Caratheodory { gauge } => cmd_caratheodory(gauge),
        Command::Integrate { map, measure } => cmd_integrate(map, measure),
        Command::Norms { map, measure } => cmd_norms(map, measure),
        Command::Rn { mu, nu, mode, o } => cmd_rn(cli, mu, nu, mode, o.as_deref()),
        Command::Condexp { map, measure, filtration, stage, o } => {
            cmd_condexp(cli, map, measure, filtration, *stage, o.as_deref())
        }
        Command::Martingale { action } => match action {
            MartingaleCmd::Verify { seq, measure, filtration } => {
                cmd_martingale_verify(seq, measure, filtration)
            }
            MartingaleCmd::Build { terminal, measure, filtration, o } => {
                cmd_martingale_build(terminal, measure, filtration, o.as_deref())
            }
        },
        Command::Duality { action } => match action {
            DualityCmd::Check { measure, samples } => cmd_duality_check(cli, measure, *samples),
        },
        Command::Fixtures { action } => match action {
            FixturesCmd::Var { which, n, grid, xgrid, o, eps, lam } => {
                cmd_fixtures_var(which, *n, *grid, *xgrid, o.as_deref(), *eps, *lam)
            }
        },
        Command::Perimeter(args) => match &args.action {
            Some(PerimeterCmd::Lsc { seq, limit }) => cmd_perimeter_lsc(cli, seq, limit),
            None => {
                let field = args.field.as_ref().ok_or_else(|| {
                    RnmError::BadParameter("perimeter needs --field or a subcommand".into())
                })?;
                cmd_perimeter(field)
            }
        },
        Command::Selftest { samples } => cmd_selftest(cli, *samples),
    }
}

fn atomwise(values: &L0Element) -> Value {
    json!(values.values())
}

/// Atomwise positive part of lhs - rhs, folded over a sequence of pairs:
/// how far the claimed inequality lhs <= rhs is violated, per atom.
fn excess<'a>(
    pairs: impl Iterator<Item = (&'a L0Element, &'a L0Element)>,
    atoms: usize,
) -> Vec<f64> {
    let mut worst = vec![0.0f64; atoms];
    for (lo, hi) in pairs {
        for (a, w) in worst.iter_mut().enumerate() {
            *w = w.max(lo.values()[a] - hi.values()[a]);
        }
    }
    worst
}

fn atom_gaps(a: &L0Element, b: &L0Element) -> Vec<f64> {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .collect()
}

fn fold_gaps(worst: &mut Vec<f64>, gaps: &[f64]) {
    if worst.is_empty() {
        *worst = vec![0.0; gaps.len()];
    }
    for (w, g) in worst.iter_mut().zip(gaps) {
        *w = w.max(*g);
    }
}

fn cmd_tv(measure: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("tv");
    out.path_param("measure", measure);
    let (_base, mu) = io::load_measure(measure)?;
    let (abs, tv) = mu.total_variation();

    let bound = excess(
        mu.cell_values()
            .iter()
            .map(|v| v.abs())
            .collect::<Vec<_>>()
            .iter()
            .zip(abs.cell_values()),
        mu.base().atom_count(),
    );
    out.gap_check("cell-value-below-cell-variation", EXACT_TOL, bound);
    if mu.sigma().cell_count() <= 8 {
        let oracle = oracles::tv_partition_sup(&mu);
        out.gap_check("partition-supremum", EXACT_TOL, atom_gaps(&tv, &oracle));
    }

    out.result("total", atomwise(&mu.total()));
    out.result("total_variation", atomwise(&tv));
    let cells: Vec<Value> = abs.cell_values().iter().map(atomwise).collect();
    out.result("cell_variation", json!(cells));
    Ok(out)
}

fn cmd_push(cli: &Cli, measure: &Path, map: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("push");
    out.path_param("measure", measure);
    out.path_param("map", map);
    out.param("seed", json!(cli.seed));
    let (base, mu) = io::load_measure(measure)?;
    let (phi, target) = io::load_point_map(map, mu.space())?;
    let image = mu.pushforward(&phi, &target)?;

    let (abs_mu, tv_mu) = mu.total_variation();
    let (abs_image, tv_image) = image.total_variation();
    let pushed_abs = abs_mu.pushforward(&phi, &target)?;
    let atoms = base.atom_count();
    out.gap_check(
        "image-variation-below-pushed-variation",
        EXACT_TOL,
        excess(abs_image.cell_values().iter().zip(pushed_abs.cell_values()), atoms),
    );
    out.gap_check(
        "variation-contraction",
        EXACT_TOL,
        excess(std::iter::once((&tv_image, &tv_mu)), atoms),
    );
    // Change of variables on a seeded test map; the composition routine
    // verifies the integral identity itself.
    let r = &mut instances::rng(cli.seed);
    let g = instances::random_simple_map(r, &target, &FreeModule::scalar(&base), 1.0);
    pullback(&phi, &g, &mu)?;
    out.flag_check("change-of-variables", true);

    let cells: Vec<Value> = image.cell_values().iter().map(atomwise).collect();
    out.result("image", json!(cells));
    out.result("image_total", atomwise(&image.total()));
    Ok(out)
}

fn cmd_foliate(measure: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("foliate");
    out.path_param("measure", measure);
    let (base, mu) = io::load_measure(measure)?;
    let slices = mu.foliate();
    let rebuilt = L0Measure::assemble(mu.sigma(), &base, &slices)?;
    let mut roundtrip = Vec::new();
    for (a, b) in mu.cell_values().iter().zip(rebuilt.cell_values()) {
        fold_gaps(&mut roundtrip, &atom_gaps(a, b));
    }
    out.gap_check("slice-round-trip", 0.0, roundtrip);

    let (abs_mu, _) = mu.total_variation();
    let mut slice_var = vec![0.0f64; base.atom_count()];
    for (x, (slice, abs_slice)) in slices.iter().zip(abs_mu.foliate()).enumerate() {
        for (c, &m) in slice.cell_masses().iter().enumerate() {
            slice_var[x] = slice_var[x].max((m.abs() - abs_slice.cell_masses()[c]).abs());
        }
    }
    out.gap_check("variation-commutes-with-slicing", 0.0, slice_var);

    let table: Vec<Value> = slices.iter().map(|s| json!(s.cell_masses())).collect();
    out.result("slices", json!(table));
    Ok(out)
}

fn cmd_caratheodory(gauge: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("caratheodory");
    out.path_param("gauge", gauge);
    let (space, gauge) = io::load_gauge(gauge)?;
    let outer = outer_from_gauge(&gauge)?;
    // Extraction re-verifies closure and additivity of the family; a
    // violation surfaces as an error before this point.
    let family = caratheodory_sets(&outer)?;
    out.flag_check("extracted-family-is-additive-algebra", true);
    out.flag_check(
        "family-contains-trivial-sets",
        family.iter().any(|s| s.is_empty())
            && family.iter().any(|s| s.len() == space.point_count()),
    );

    let names = |set: &PointSet| -> Vec<String> {
        set.indices().iter().map(|&i| space.points()[i].clone()).collect()
    };
    let members: Vec<Value> = family
        .iter()
        .map(|s| json!({"set": names(s), "outer": outer.value(s).values()}))
        .collect();
    out.result("family", json!(members));
    out.result("family_size", json!(family.len()));
    Ok(out)
}

fn cmd_integrate(map: &Path, measure: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("integrate");
    out.path_param("map", map);
    out.path_param("measure", measure);
    let (base, mu) = io::load_measure(measure)?;
    let v = io::load_simple_map(map, mu.space(), &base)?;
    let total = integrate(&v, &mu, None)?;

    let mut summed: Vec<L0Element> =
        total.coords().iter().map(|_| L0Element::zero(&base)).collect();
    for c in 0..mu.sigma().cell_count() {
        let part = integrate(&v, &mu, Some(&mu.sigma().cell_point_set(c)))?;
        for (acc, coord) in summed.iter_mut().zip(part.coords()) {
            *acc = acc.add(coord)?;
        }
    }
    let mut additivity = Vec::new();
    for (acc, coord) in summed.iter().zip(total.coords()) {
        fold_gaps(&mut additivity, &atom_gaps(acc, coord));
    }
    out.gap_check("additivity-over-cells", EXACT_TOL, additivity);

    let coords: Vec<Value> = total.coords().iter().map(atomwise).collect();
    out.result("integral", json!(coords));
    Ok(out)
}

fn cmd_norms(map: &Path, measure: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("norms");
    out.path_param("map", map);
    out.path_param("measure", measure);
    let (base, mu) = io::load_measure(measure)?;
    let v = io::load_simple_map(map, mu.space(), &base)?;
    let l1 = lp_norm(&v, &mu, 1.0)?;
    let l2 = lp_norm(&v, &mu, 2.0)?;
    let (upper, lower) = pi_isometry_check(&v, &mu)?;
    out.gap_check("tensor-price-two-sided", EXACT_TOL, atom_gaps(&upper, &lower));
    if v.module().dim() == 1 {
        let dual = dual_l1_norm(&v, &mu)?;
        out.gap_check("dual-representation-of-l1", EXACT_TOL, atom_gaps(&dual, &l1));
    }
    out.result("l1", atomwise(&l1));
    out.result("l2", atomwise(&l2));
    out.result("tensor_price", atomwise(&upper));
    Ok(out)
}

fn cmd_rn(cli: &Cli, mu_path: &Path, nu_path: &Path, mode: &str, o: Option<&Path>) -> RnmResult<Outcome> {
    let mut out = Outcome::new("rn");
    out.path_param("mu", mu_path);
    out.path_param("nu", nu_path);
    out.param("mode", json!(mode));
    let tolerance = cli.tolerance.unwrap_or(ANALYTIC_TOL);
    out.param("tolerance", json!(tolerance));

    let (_b, mu) = io::load_measure(mu_path)?;
    let (_b2, nu) = io::load_measure(nu_path)?;
    let mode: RnMode = mode.parse()?;
    let derivative = rn_derivative(&mu, &nu, mode)?;
    let rebuilt = measure_from_density(derivative.delta(), &nu)?;
    let mut recon = Vec::new();
    for (a, b) in mu.cell_values().iter().zip(rebuilt.cell_values()) {
        fold_gaps(&mut recon, &atom_gaps(a, b));
    }
    let reconstruction_error = recon.iter().fold(0.0f64, |m, &v| m.max(v));
    out.gap_check("reconstruction", tolerance, recon);
    out.result("reconstruction_error", json!(reconstruction_error));
    let density: Vec<Value> = derivative
        .delta()
        .scalar_values()?
        .iter()
        .map(|v| atomwise(v))
        .collect();
    out.result("density", json!(density));
    if let Some(path) = o {
        io::save_simple_map(path, derivative.delta())?;
        out.result("density_file", json!(path.display().to_string()));
    }
    Ok(out)
}

fn cmd_condexp(
    cli: &Cli,
    map: &Path,
    measure: &Path,
    filtration: &Path,
    stage: usize,
    o: Option<&Path>,
) -> RnmResult<Outcome> {
    let mut out = Outcome::new("condexp");
    out.path_param("map", map);
    out.path_param("measure", measure);
    out.path_param("filtration", filtration);
    out.param("stage", json!(stage));
    let tolerance = cli.tolerance.unwrap_or(ANALYTIC_TOL);
    out.param("tolerance", json!(tolerance));

    let (base, mu) = io::load_measure(measure)?;
    let v = io::load_simple_map(map, mu.space(), &base)?;
    let filt = io::load_filtration(filtration, mu.space())?;
    if stage >= filt.stage_count() {
        return Err(RnmError::BadParameter(format!(
            "stage {stage} outside the filtration's {} stages",
            filt.stage_count()
        )));
    }
    let target = filt.stage(stage);
    let projected = cond_expect(&v, &mu, target)?;

    let discrete = SigmaAlgebra::discrete(mu.space());
    let v_fine = v.on_refinement(&discrete)?;
    let p_fine = projected.on_refinement(&discrete)?;
    let mean_v = integrate(&v_fine, &mu, None)?;
    let mean_p = integrate(&p_fine, &mu, None)?;
    let mut mean = Vec::new();
    for (a, b) in mean_v.coords().iter().zip(mean_p.coords()) {
        fold_gaps(&mut mean, &atom_gaps(a, b));
    }
    out.gap_check("mean-preservation", tolerance, mean);
    for (p, name) in [(1.0, "l1-contraction"), (2.0, "l2-contraction")] {
        let before = lp_norm(&v_fine, &mu, p)?;
        let after = lp_norm(&p_fine, &mu, p)?;
        out.gap_check(
            name,
            tolerance,
            excess(std::iter::once((&after, &before)), base.atom_count()),
        );
    }

    let cells: Vec<Value> = projected
        .cell_values()
        .iter()
        .map(|m| json!(m.coords().iter().map(|c| c.values().to_vec()).collect::<Vec<_>>()))
        .collect();
    out.result("projected", json!(cells));
    if let Some(path) = o {
        io::save_simple_map(path, &projected)?;
        out.result("projected_file", json!(path.display().to_string()));
    }
    Ok(out)
}

fn cmd_martingale_verify(seq: &[PathBuf], measure: &Path, filtration: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("martingale verify");
    out.path_param("measure", measure);
    out.path_param("filtration", filtration);
    out.param(
        "seq",
        json!(seq.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
    );
    let (base, mu) = io::load_measure(measure)?;
    let filt = io::load_filtration(filtration, mu.space())?;
    let maps = seq
        .iter()
        .map(|p| io::load_simple_map(p, mu.space(), &base))
        .collect::<RnmResult<Vec<_>>>()?;
    let sequence = MartingaleSequence::new(&filt, maps)?;
    let ok = is_martingale(&sequence, &mu)?;
    out.flag_check("stagewise-projection-property", ok);
    out.result("stages", json!(filt.stage_count()));
    Ok(out)
}

fn cmd_martingale_build(
    terminal: &Path,
    measure: &Path,
    filtration: &Path,
    o: Option<&Path>,
) -> RnmResult<Outcome> {
    let mut out = Outcome::new("martingale build");
    out.path_param("terminal", terminal);
    out.path_param("measure", measure);
    out.path_param("filtration", filtration);
    let (base, mu) = io::load_measure(measure)?;
    let filt = io::load_filtration(filtration, mu.space())?;
    let v = io::load_simple_map(terminal, mu.space(), &base)?;
    let sequence = build_martingale(&v, &filt, &mu)?;
    out.flag_check("built-sequence-verifies", is_martingale(&sequence, &mu)?);

    let stages: Vec<Value> = sequence
        .maps()
        .iter()
        .map(|m| {
            let cells: Vec<Value> = m
                .cell_values()
                .iter()
                .map(|e| json!(e.coords().iter().map(|c| c.values().to_vec()).collect::<Vec<_>>()))
                .collect();
            json!(cells)
        })
        .collect();
    out.result("stages", json!(stages));
    if let Some(prefix) = o {
        let mut files = Vec::new();
        for (k, m) in sequence.maps().iter().enumerate() {
            let path = PathBuf::from(format!("{}{k}.json", prefix.display()));
            io::save_simple_map(&path, m)?;
            files.push(path.display().to_string());
        }
        out.result("stage_files", json!(files));
    }
    Ok(out)
}

/// The four functional-side identities for one measure, folded atomwise
/// into `worst`.
fn duality_gaps(mu: &L0Measure, worst: &mut Vec<f64>) -> RnmResult<()> {
    let functional = to_functional(mu)?;
    let norm = op_norm(&functional)?;
    let (_, tv) = mu.total_variation();
    fold_gaps(worst, &atom_gaps(&norm, &tv));
    let attained = functional.apply(&sign_map(&functional)?)?;
    fold_gaps(worst, &atom_gaps(&attained, &norm));
    let (pos, neg) = positive_decomposition(&functional)?;
    let split = op_norm(&pos)?.add(&op_norm(&neg)?)?;
    fold_gaps(worst, &atom_gaps(&split, &norm));
    if mu.sigma().cell_count() <= 16 {
        let base = mu.base();
        let ones = (0..mu.sigma().cell_count())
            .map(|_| L0Element::constant(base, 1.0))
            .collect::<RnmResult<Vec<_>>>()?;
        let one = SimpleMap::scalar(mu.sigma(), ones)?;
        let enumerated = oracles::dual_norm_sign_enumeration(&one, mu)?;
        fold_gaps(worst, &atom_gaps(&enumerated, &norm));
    }
    Ok(())
}

fn cmd_duality_check(cli: &Cli, measure: &Path, samples: usize) -> RnmResult<Outcome> {
    let mut out = Outcome::new("duality check");
    out.path_param("measure", measure);
    out.param("samples", json!(samples));
    out.param("seed", json!(cli.seed));
    let (_base, mu) = io::load_measure(measure)?;
    let mut worst = Vec::new();
    duality_gaps(&mu, &mut worst)?;
    out.gap_check("norm-identities-on-input", EXACT_TOL, worst);

    if samples > 0 {
        let r = &mut instances::rng(cli.seed);
        let mut sampled = 0.0f64;
        for _ in 0..samples {
            let base = instances::random_base(r, 3);
            let space = instances::random_space(r, 1, 8);
            let sigma = SigmaAlgebra::discrete(&space);
            let sample = instances::random_signed_measure(r, &sigma, &base, 2.0);
            let mut w = Vec::new();
            duality_gaps(&sample, &mut w)?;
            sampled = sampled.max(w.iter().fold(0.0f64, |m, &v| m.max(v)));
        }
        out.gap_check("norm-identities-on-samples", EXACT_TOL, vec![sampled]);
    }
    Ok(out)
}

fn parse_kind(which: &str) -> RnmResult<FixtureKind> {
    match which {
        "lambda" => Ok(FixtureKind::Lambda),
        "theta" => Ok(FixtureKind::Theta),
        other => Err(RnmError::BadParameter(format!(
            "unknown fixture {other:?}, expected lambda or theta"
        ))),
    }
}

fn log2_exact(value: usize, what: &str) -> RnmResult<u32> {
    if value.is_power_of_two() {
        Ok(value.trailing_zeros())
    } else {
        Err(RnmError::BadParameter(format!("{what} must be a power of two, got {value}")))
    }
}

fn cmd_fixtures_var(
    which: &str,
    n: u32,
    grid: usize,
    xgrid: usize,
    o: Option<&Path>,
    eps: Option<f64>,
    lam: Option<f64>,
) -> RnmResult<Outcome> {
    let mut out = Outcome::new("fixtures var");
    out.param("which", json!(which));
    out.param("n", json!(n));
    out.param("grid", json!(grid));
    out.param("xgrid", json!(xgrid));
    let kind = parse_kind(which)?;
    let levels_p = log2_exact(grid, "grid")?;
    let levels_x = log2_exact(xgrid, "xgrid")?;
    let table = fixture_var(kind, n, levels_p, levels_x)?;

    let position = |i: usize| (i as f64 + 0.5) * 0.5f64.powi(levels_x as i32);
    if let Some(path) = o {
        let mut csv = String::from("x,value\n");
        for (i, v) in table.iter().enumerate() {
            csv.push_str(&format!("{},{v}\n", position(i)));
        }
        std::fs::write(path, csv).map_err(|e| RnmError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        out.result("table_file", json!(path.display().to_string()));
    } else {
        let rows: Vec<Value> = table
            .iter()
            .enumerate()
            .map(|(i, v)| json!([position(i), v]))
            .collect();
        out.result("rows", json!(rows));
    }
    let min = table.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.result("min", json!(min));
    out.result("max", json!(max));

    if let (Some(eps), Some(lam)) = (eps, lam) {
        out.param("eps", json!(eps));
        out.param("lam", json!(lam));
        let map = fixture_map(kind, levels_p, levels_p, levels_x)?;
        let coarsest = (levels_p - 1).min(5).max(1);
        let witness = uc_witness(&map, eps, lam, coarsest)?;
        out.flag_check("continuity-witness-found", witness.is_some());
        out.result(
            "witness",
            match witness {
                Some(w) => json!({
                    "radius": w.radius,
                    "level": w.level,
                    "measure_bound": w.measure_bound,
                }),
                None => Value::Null,
            },
        );
    }
    Ok(out)
}

fn cmd_perimeter(field: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("perimeter");
    out.path_param("field", field);
    let chi = io::load_field(field)?;
    let per = random_perimeter(&chi);
    let flipped = random_perimeter(&chi.complement());
    out.gap_check("complement-invariance", 0.0, atom_gaps(&per, &flipped));
    let oracle_gaps: Vec<f64> = chi
        .images()
        .iter()
        .enumerate()
        .map(|(a, image)| {
            let oracle = oracles::single_image_perimeter(
                chi.width(),
                chi.height(),
                chi.spacing(),
                image,
            );
            (per.values()[a] - oracle).abs()
        })
        .collect();
    out.gap_check("pixel-walk-agreement", 0.0, oracle_gaps);
    out.result("perimeter", atomwise(&per));
    out.result("volume", atomwise(&chi.volume()));
    Ok(out)
}

fn cmd_perimeter_lsc(cli: &Cli, seq: &[PathBuf], limit: &Path) -> RnmResult<Outcome> {
    let mut out = Outcome::new("perimeter lsc");
    out.param(
        "seq",
        json!(seq.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
    );
    out.path_param("limit", limit);
    let tolerance = cli.tolerance.unwrap_or(ANALYTIC_TOL);
    out.param("tolerance", json!(tolerance));
    let fields = seq.iter().map(|p| io::load_field(p)).collect::<RnmResult<Vec<_>>>()?;
    let limit_field = io::load_field(limit)?;
    let report = lsc_probe(&fields, &limit_field, tolerance)?;
    out.flag_check("limit-perimeter-below-tail", report.passes());
    out.result("limit_perimeter", atomwise(&report.limit_perimeter));
    out.result("tail_min_perimeter", atomwise(&report.tail_min_perimeter));
    out.result("strict_gap_atoms", json!(report.atom_strict));
    Ok(out)
}

fn cmd_selftest(cli: &Cli, samples: usize) -> RnmResult<Outcome> {
    let mut out = Outcome::new("selftest");
    out.param("seed", json!(cli.seed));
    out.param("samples", json!(samples));
    let report = rnm_core::selftest::run(cli.seed, samples)?;
    for check in &report.checks {
        out.checks.push(Check {
            name: check.name.to_string(),
            status: if check.passed { "pass" } else { "fail" },
            values: vec![check.worst],
            tolerance: check.tolerance,
        });
    }
    Ok(out)
}
