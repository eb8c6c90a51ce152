//! Check registry, suite runner, and the `evolve` / `multiplier` commands.

mod checks;
pub mod config;
pub mod report;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use config::{
    CheckEntry, EvolveConfig, GridConfig, MultiplierConfig, PacketConfig, SampleConfig, SuiteConfig,
};
pub use report::{CheckResult, Condition, GridSummary, Report};

use crate::dynamics::observables;
use crate::error::{GqkError, Result};
use crate::galilei::{multiplier_extract, GalileiRep, GroupElement};
use crate::grid::{gaussian_packet, standard_states, SpinSpec, ONE};
use crate::propagate::trajectory;
use crate::snapshot::write_state;
use checks::{Ctx, Outcome};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default tolerance tiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Exact linear algebra, 1e-12.
    Exact,
    /// Spectral identities on band-limited states, 1e-8.
    Spectral,
    /// Checks mediated by time evolution, 1e-5.
    Dynamic,
}

impl Tier {
    pub fn tolerance(self) -> f64 {
        match self {
            Tier::Exact => 1e-12,
            Tier::Spectral => 1e-8,
            Tier::Dynamic => 1e-5,
        }
    }
}

type CheckFn = fn(&Ctx) -> Result<Outcome>;

/// One registry row.
pub struct Registered {
    pub id: &'static str,
    pub anchor: &'static str,
    pub tier: Tier,
    /// Replaces the tier value where the relation is only resolved to a
    /// coarser level on the default grid.
    pub calibrated: Option<f64>,
    run: CheckFn,
}

impl Registered {
    pub fn default_tolerance(&self) -> f64 {
        self.calibrated.unwrap_or(self.tier.tolerance())
    }
}

const fn reg(id: &'static str, anchor: &'static str, tier: Tier, calibrated: Option<f64>, run: CheckFn) -> Registered {
    Registered {
        id,
        anchor,
        tier,
        calibrated,
        run,
    }
}

use Tier::*;

/// Every known check, in default-suite order.
pub static REGISTRY: &[Registered] = &[
    reg("CR9.i", "Eq. (9.i)", Spectral, Some(1e-7), checks::cr9_i),
    reg("CR9.ii", "Eq. (9.ii)", Spectral, Some(1e-7), checks::cr9_ii),
    reg("CR9.iii", "Eq. (9.iii)", Spectral, Some(1e-7), checks::cr9_iii),
    reg("CR9.iv", "Eq. (9.iv)", Spectral, Some(1e-7), checks::cr9_iv),
    reg("CR9.v", "Eq. (9.v)", Spectral, Some(1e-7), checks::cr9_v),
    reg("CR9.vi", "Eq. (9.vi)", Spectral, Some(1e-7), checks::cr9_vi),
    reg("SPIN", "spin algebra", Exact, None, checks::spin),
    reg("CANON", "Prop. 2.1 [Q,P] = iδ", Spectral, None, checks::canon),
    reg("COV10", "Eq. (10)", Spectral, None, checks::cov10),
    reg("M3", "(M.3) action", Spectral, None, checks::m3),
    reg("SIGMA-MULT", "Def. 2.1", Spectral, None, checks::sigma_mult),
    reg("SIGMA-COCYCLE", "Def. 2.1", Spectral, None, checks::sigma_cocycle),
    reg("IMPR1", "Eq. (1)", Exact, None, checks::impr1),
    reg("RAYCONT", "Defs. 3.1/3.2", Spectral, None, checks::raycont),
    reg("FUNC-S3", "Prop. 3.1", Spectral, Some(1e-7), checks::func_s3),
    reg("QCOV22", "Eq. (22)", Spectral, None, checks::qcov22),
    reg("ETA", "§3.5 extraction", Dynamic, Some(1e-6), checks::eta),
    reg("LAW27", "Eq. (27)", Spectral, Some(1e-7), checks::law27),
    reg("PROP38", "Prop. 3.8", Spectral, Some(1e-7), checks::prop38),
    reg("STAT16", "§2.4 (13)-(16)", Spectral, Some(1e-7), checks::stat16),
    reg("VEL33", "Eq. (33.ii)", Spectral, Some(1e-7), checks::vel33),
    reg("BOOST30", "Eq. (30)", Dynamic, Some(1e-6), checks::boost30),
    reg("G32-SMALLT", "Eq. (32.i)", Dynamic, Some(1e-6), checks::g32_smallt),
    reg("TRANS38", "Eqs. (38)-(39)", Dynamic, Some(1e-6), checks::trans38),
    reg("GRADF41", "Eq. (41)", Spectral, Some(1e-7), checks::gradf41),
    reg("IRROT", "§4.2 symmetry", Spectral, None, checks::irrot),
    reg("H42", "Eq. (42)", Dynamic, None, checks::h42),
    reg("H43", "Eq. (43)", Spectral, None, checks::h43),
    reg("FREECOV2", "Eq. (2.ii)", Dynamic, Some(1e-6), checks::freecov2),
    reg("EHRENFEST", "Eq. (33.ii) expectation", Dynamic, None, checks::ehrenfest),
    reg("FIELDS36", "Eq. (36)", Spectral, None, checks::fields36),
    reg("COMM31", "Eq. (31)", Dynamic, None, checks::comm31),
    reg("GRID", "state space", Exact, Some(1e-10), checks::grid_check),
    reg("EVOLVE", "propagator", Dynamic, Some(1e-6), checks::evolve_check),
];

/// Looks up an id; `TRANS38/39` is accepted as an alias of `TRANS38`.
pub fn lookup(id: &str) -> Result<&'static Registered> {
    let id = if id == "TRANS38/39" { "TRANS38" } else { id };
    REGISTRY
        .iter()
        .find(|r| r.id == id)
        .ok_or_else(|| GqkError::UnknownCheck(id.to_string()))
}

pub fn default_checks() -> Vec<CheckEntry> {
    REGISTRY.iter().map(|r| CheckEntry::new(r.id)).collect()
}

fn conventions() -> Vec<String> {
    vec![
        "U_g = T(a) B(u) Λ(R), Λ applied first".into(),
        "σ(g1, g2) = exp(-iμ u1·R1 a2)".into(),
        "Q^(t) = e^{iHt} Q e^{-iHt}, ħ = 1".into(),
    ]
}

fn run_one(cfg: &SuiteConfig, entry: &CheckEntry) -> CheckResult {
    let start = Instant::now();
    let reg = lookup(&entry.id).expect("ids validated before running");
    let tolerance = entry.tolerance.unwrap_or(reg.default_tolerance());
    let grid_cfg = entry.grid.unwrap_or(cfg.grid);
    let mu = entry.mu.unwrap_or(cfg.mu);
    let two_s = entry.two_s.unwrap_or(cfg.two_s);
    let params = json!({
        "grid": grid_cfg,
        "grid_configured": entry.grid.is_some(),
        "mu": mu,
        "two_s": two_s,
        "seed": cfg.seed,
        "states": entry.states.unwrap_or(cfg.states),
        "samples": entry.samples,
        "t": entry.t,
        "omega": entry.omega,
        "hamiltonian": entry.hamiltonian,
        "propagator": cfg.propagator,
    });
    let outcome = grid_cfg.build("grid").and_then(|grid| {
        let ctx = Ctx {
            grid,
            spin: SpinSpec::new(two_s),
            mu,
            seed: cfg.seed,
            states: entry.states.unwrap_or(cfg.states),
            prop: cfg.propagator,
            entry,
        };
        (reg.run)(&ctx)
    });
    let mut result = CheckResult {
        id: reg.id.to_string(),
        anchor: reg.anchor.to_string(),
        params,
        residual: None,
        tolerance,
        tolerance_overridden: entry.tolerance.is_some(),
        slope: None,
        r2: None,
        conditions: vec![],
        pass: false,
        conventions: conventions(),
        notes: vec![],
        details: json!({}),
        error: None,
        wall_time_s: 0.0,
    };
    match outcome {
        Ok(o) => {
            result.pass = o.residual.is_finite()
                && o.residual <= tolerance
                && o.conditions.iter().all(|c| c.pass);
            result.residual = Some(o.residual);
            result.slope = o.slope;
            result.r2 = o.r2;
            result.conditions = o.conditions;
            result.notes = o.notes;
            result.details = serde_json::Value::Object(o.details);
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result.wall_time_s = start.elapsed().as_secs_f64();
    result
}

/// Runs every configured check on a pool of `threads` workers (0 = rayon
/// default). Unknown ids fail before anything runs; other per-check errors
/// are recorded in the report and the suite continues.
pub fn run_config(cfg: &SuiteConfig, threads: usize) -> Result<Report> {
    cfg.validate()?;
    let entries = cfg.checks.clone().unwrap_or_else(default_checks);
    for e in &entries {
        lookup(&e.id)?;
    }
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| GqkError::Config(format!("thread pool: {e}")))?;
    let checks: Vec<CheckResult> = pool.install(|| entries.par_iter().map(|e| run_one(cfg, e)).collect());
    let grid = cfg.grid.build("grid")?;
    Ok(Report {
        suite: cfg.suite.clone(),
        engine_version: ENGINE_VERSION.to_string(),
        seed: cfg.seed,
        grid: GridSummary {
            n: grid.n(),
            box_length: grid.box_length(),
            spacing: grid.spacing(),
            k_max: grid.k_max(),
            mu: cfg.mu,
            two_s: cfg.two_s,
        },
        overall_pass: checks.iter().all(|c| c.pass),
        checks,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn run_suite(path: &Path) -> Result<Report> {
    run_config(&SuiteConfig::load(path)?, 0)
}

pub const SERIES_HEADER: &str = "t,reQ1,reQ2,reQ3,reP1,reP2,reP3,norm,energy";

/// Writes the observable series of `cfg` as CSV to `out`; with `snapshots =
/// Some((every, dir))` also writes `state_{k:06}.gqk` for every `every`-th row.
pub fn evolve_command(
    cfg: &EvolveConfig,
    out: &mut dyn Write,
    snapshots: Option<(usize, &Path)>,
) -> Result<usize> {
    let grid = cfg.grid.build("grid")?;
    let spin = cfg.spin();
    let h = cfg.hamiltonian.build(grid, spin, cfg.mu)?;
    let chi: Vec<C64> = match &cfg.packet.spinor {
        Some(v) => {
            if v.len() != spin.dim() {
                return Err(GqkError::Config(format!(
                    "packet.spinor has {} entries, spin dimension is {}",
                    v.len(),
                    spin.dim()
                )));
            }
            v.iter().map(|c| C64::new(c[0], c[1])).collect()
        }
        None => {
            let mut v = vec![C64::new(0.0, 0.0); spin.dim()];
            v[0] = ONE;
            v
        }
    };
    let psi = gaussian_packet(grid, spin, cfg.packet.x0, cfg.packet.p0, cfg.packet.width, &chi)?;
    if let Some((every, dir)) = snapshots {
        if every == 0 {
            return Err(GqkError::Config("snapshot-every must be at least 1".into()));
        }
        std::fs::create_dir_all(dir)?;
    }
    let (steps, dt) = if cfg.t_total == 0.0 {
        (0, 0.0)
    } else {
        (cfg.steps, cfg.t_total / cfg.steps as f64)
    };
    writeln!(out, "{SERIES_HEADER}")?;
    let mut rows = 0;
    trajectory(&h, &psi, dt, steps, &cfg.propagator, |k, t, state| {
        let o = observables(&h, state)?;
        writeln!(
            out,
            "{t},{},{},{},{},{},{},{},{}",
            o.q[0], o.q[1], o.q[2], o.p[0], o.p[1], o.p[2], o.norm, o.energy
        )?;
        rows += 1;
        if let Some((every, dir)) = snapshots {
            if k % every == 0 {
                write_state(&dir.join(format!("state_{k:06}.gqk")), state)?;
            }
        }
        Ok(())
    })?;
    Ok(rows)
}

/// One sampled pair of the `multiplier` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRow {
    pub kind: String,
    pub g1: GroupElement,
    pub g2: GroupElement,
    pub re: f64,
    pub im: f64,
    pub phase: f64,
    pub modulus_defect: f64,
    /// `μ u·a` for boost-translation pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_u_a: Option<f64>,
    /// `|wrap(arg σ + μ u·a)|`, the `-μ u·a` convention.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_residual_minus: Option<f64>,
    /// `|wrap(arg σ - μ u·a)|`, the `+μ u·a` convention.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_residual_plus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierTable {
    pub engine_version: String,
    pub seed: u64,
    pub grid: GridSummary,
    pub convention: String,
    pub rows: Vec<MultiplierRow>,
}

fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (x + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

pub fn multiplier_command(cfg: &MultiplierConfig) -> Result<MultiplierTable> {
    let grid = cfg.grid.build("grid")?;
    let spin = SpinSpec::new(cfg.two_s);
    let rep = GalileiRep::new(grid, spin, cfg.mu)?;
    let refs = standard_states(grid, spin, cfg.seed ^ 0x5eed, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = grid.n() as i64;
    let h = grid.spacing();
    let shift = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        std::array::from_fn(|_| rng.random_range(-n / 2..=n / 2) as f64 * h)
    };
    let rots = crate::galilei::lattice_rotations();
    let mut pairs: Vec<(&str, GroupElement, GroupElement)> = Vec::new();
    for _ in 0..cfg.sample.translations {
        let (a, b) = (shift(&mut rng), shift(&mut rng));
        pairs.push(("translations", GroupElement::translation(a), GroupElement::translation(b)));
    }
    for _ in 0..cfg.sample.boost_translation {
        let u = rep.quantized_boost(std::array::from_fn(|_| rng.random_range(-3..=3)));
        pairs.push(("boost_translation", GroupElement::boost(u), GroupElement::translation(shift(&mut rng))));
    }
    for _ in 0..cfg.sample.general {
        let mut g = || {
            let u = rep.quantized_boost(std::array::from_fn(|_| rng.random_range(-2..=2)));
            let a = std::array::from_fn(|_| rng.random_range(-n / 2..=n / 2) as f64 * h);
            GroupElement::new(a, rots[rng.random_range(0..rots.len())].1, u)
        };
        let (g1, g2) = (g(), g());
        pairs.push(("general", g1, g2));
    }
    for _ in 0..cfg.sample.identity {
        pairs.push(("identity", GroupElement::identity(), GroupElement::identity()));
    }
    let rows = pairs
        .into_iter()
        .map(|(kind, g1, g2)| {
            let m = multiplier_extract(&rep, &g1, &g2, &refs[0], &refs[1])?;
            let mua = (kind == "boost_translation")
                .then(|| cfg.mu * (0..3).map(|k| g1.u[k] * g2.a[k]).sum::<f64>());
            Ok(MultiplierRow {
                kind: kind.to_string(),
                g1,
                g2,
                re: m.re,
                im: m.im,
                phase: m.phase(),
                modulus_defect: m.modulus_defect,
                mu_u_a: mua,
                phase_residual_minus: mua.map(|x| wrap_phase(m.phase() + x).abs()),
                phase_residual_plus: mua.map(|x| wrap_phase(m.phase() - x).abs()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiplierTable {
        engine_version: ENGINE_VERSION.to_string(),
        seed: cfg.seed,
        grid: GridSummary {
            n: grid.n(),
            box_length: grid.box_length(),
            spacing: grid.spacing(),
            k_max: grid.k_max(),
            mu: cfg.mu,
            two_s: cfg.two_s,
        },
        convention: "σ(g1, g2) = exp(-iμ u1·R1 a2); boost-translation: arg σ = -μ u·a".into(),
        rows,
    })
}
