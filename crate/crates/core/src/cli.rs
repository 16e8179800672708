//! Batch driver: run configs, dispatch, result cache and artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::cellsolver::{solve_exact, solve_heuristic, CellProblem, CellSolution};
use crate::chains::{Chain, MassNorm};
use crate::energy::{DensityConfig, EnergyDensity};
use crate::error::{Error, Result};
use crate::flat::{flat_distance, flat_norm_chain, flat_norm_zero};
use crate::geometry::{clean_direction, direction_grid, norm, Cube, LatticeGraph, Spacing};
use crate::homogenize::{
    build_table, f_hom, local_density_probe, psi_hom_at, recovery_sequence, HomogTable, TableSpec,
    Target,
};
use crate::verify::{
    coarea_suite, energy_sandwich_suite, growth_suite, oracle_suite, structure_suite, table_suites,
    SuiteResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Solve cell problems for every (b, t, T).
    Cell,
    /// Build a ψ_hom table with extrapolation.
    Table,
    /// Recovery sequence for a polyhedral target.
    Recover,
    /// Run the invariant suites.
    Verify,
    /// Flat norm and distance of stored chains.
    Flatnorm,
    /// Local energy density of recovery chains.
    Probe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Cell => "cell",
            Command::Table => "table",
            Command::Recover => "recover",
            Command::Verify => "verify",
            Command::Flatnorm => "flatnorm",
            Command::Probe => "probe",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DensitySource {
    Path(String),
    Inline(DensityConfig),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum HValue {
    Text(String),
    Number(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    density: DensitySource,
    h: HValue,
    r: Option<u32>,
    theta_max: Option<i64>,
    #[serde(default)]
    b: Vec<Vec<i64>>,
    t: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    sides: Vec<f64>,
    #[serde(default)]
    eps: Vec<f64>,
    target: Option<String>,
    center: Option<Vec<f64>>,
    #[serde(default)]
    exact: bool,
    #[serde(default)]
    seed: u64,
    workers: Option<usize>,
    out: Option<String>,
    chain: Option<String>,
    other: Option<String>,
    x0: Option<Vec<f64>>,
    #[serde(default)]
    rhos: Vec<f64>,
    tol: Option<f64>,
    samples: Option<usize>,
    trials: Option<usize>,
}

/// Validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub density: EnergyDensity,
    pub spacing: Spacing,
    pub r: u32,
    pub theta_max: Option<i64>,
    pub bs: Vec<Vec<i64>>,
    pub ts: Vec<Vec<f64>>,
    pub sides: Vec<f64>,
    pub eps: Vec<f64>,
    pub target: Option<Target>,
    pub center: Vec<f64>,
    pub exact: bool,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub chain: Option<String>,
    pub other: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub rhos: Vec<f64>,
    pub tol: f64,
    pub samples: usize,
    pub trials: usize,
    canonical: BTreeMap<String, String>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn read_ref(base: &Path, p: &str) -> Result<String> {
    let path = base.join(p);
    fs::read_to_string(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunConfig {
    /// Reads and validates a TOML run config. Paths inside it are relative
    /// to the config file. `workers` and `out` override the file.
    pub fn load(
        command: Command,
        path: &Path,
        workers: Option<usize>,
        out: Option<PathBuf>,
    ) -> Result<RunConfig> {
        let text =
            fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(command, &text, base, workers, out)
    }

    pub fn parse(
        command: Command,
        text: &str,
        base: &Path,
        workers: Option<usize>,
        out: Option<PathBuf>,
    ) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let density = match &raw.density {
            DensitySource::Path(p) => EnergyDensity::from_toml(&read_ref(base, p)?),
            DensitySource::Inline(c) => EnergyDensity::from_config(c),
        }
        .map_err(|e| config_err(format!("density: {e}")))?;
        let spacing = match &raw.h {
            HValue::Text(s) => Spacing::parse(s),
            HValue::Number(x) => Spacing::from_h(*x),
        }
        .map_err(|e| config_err(format!("h: {e}")))?;
        let n = density.dim();
        let m = density.rank();
        let r = raw.r.unwrap_or(if n == 2 { 2 } else { 1 });
        if r == 0 {
            return Err(config_err("r must be at least 1"));
        }
        for b in &raw.b {
            if b.len() != m {
                return Err(config_err(format!("b {b:?} needs {m} components")));
            }
        }
        let ts = match &raw.t {
            Some(ts) => ts
                .iter()
                .map(|t| {
                    if t.len() != n || norm(t) < 1e-12 {
                        Err(config_err(format!("t {t:?} must be a nonzero {n}-vector")))
                    } else {
                        Ok(clean_direction(t))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            None => direction_grid(n),
        };
        let target = match &raw.target {
            Some(p) => {
                let t: Target = toml::from_str(&read_ref(base, p)?)
                    .map_err(|e| config_err(format!("target: {e}")))?;
                t.validate()
                    .map_err(|e| config_err(format!("target: {e}")))?;
                if t.segments[0].start.len() != n || t.segments[0].b.len() != m {
                    return Err(config_err("target dimensions do not match the density"));
                }
                Some(t)
            }
            None => None,
        };
        let center = raw.center.clone().unwrap_or_else(|| vec![0.0; n]);
        if center.len() != n {
            return Err(config_err(format!("center needs {n} components")));
        }
        let workers = workers.or(raw.workers).unwrap_or(1).max(1);
        let out = out
            .or_else(|| raw.out.as_ref().map(|o| base.join(o)))
            .unwrap_or_else(|| PathBuf::from("out"));
        let cfg = RunConfig {
            command,
            density,
            spacing,
            r,
            theta_max: raw.theta_max,
            bs: raw.b.clone(),
            ts,
            sides: raw.sides.clone(),
            eps: raw.eps.clone(),
            target,
            center,
            exact: raw.exact,
            seed: raw.seed,
            workers,
            out,
            chain: raw.chain.as_ref().map(|p| read_ref(base, p)).transpose()?,
            other: raw.other.as_ref().map(|p| read_ref(base, p)).transpose()?,
            x0: raw.x0.clone(),
            rhos: raw.rhos.clone(),
            tol: raw.tol.unwrap_or(0.1),
            samples: raw.samples.unwrap_or(1000),
            trials: raw.trials.unwrap_or(20),
            canonical: BTreeMap::new(),
        };
        cfg.check()?;
        Ok(cfg.with_canonical())
    }

    fn check(&self) -> Result<()> {
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(config_err(msg)) };
        match self.command {
            Command::Cell => {
                need(!self.bs.is_empty(), "`cell` needs b")?;
                need(!self.sides.is_empty(), "`cell` needs sides")?;
            }
            Command::Table => {
                need(!self.bs.is_empty(), "`table` needs b")?;
                need(self.sides.len() >= 3, "`table` needs at least three sides")?;
            }
            Command::Recover | Command::Probe => {
                need(self.target.is_some(), "this command needs a target")?;
                need(!self.eps.is_empty(), "this command needs eps")?;
                need(
                    self.sides.len() >= 3,
                    "this command needs at least three sides",
                )?;
                if self.command == Command::Probe {
                    need(
                        self.rhos.is_empty() || self.rhos.len() == self.eps.len(),
                        "rhos needs one radius per eps",
                    )?;
                }
            }
            Command::Flatnorm => need(self.chain.is_some(), "`flatnorm` needs chain")?,
            Command::Verify => {}
        }
        for &e in &self.eps {
            let inv = 1.0 / e;
            need(
                e > 0.0 && (inv - inv.round()).abs() < 1e-9,
                "every eps must be 1/integer",
            )?;
        }
        for &s in &self.sides {
            // parameters of the cell problem are checked up front
            CellProblem::new(
                &vec![1; self.density.rank()],
                &self
                    .ts
                    .first()
                    .cloned()
                    .unwrap_or_else(|| direction_grid(self.density.dim())[0].clone()),
                s,
                &self.center,
                self.spacing,
                self.r,
                None,
                self.density.clone(),
            )
            .map_err(|e| config_err(format!("sides: {e}")))?;
        }
        Ok(())
    }

    fn with_canonical(mut self) -> RunConfig {
        let mut c = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            c.insert(k.to_string(), v);
        };
        put("command", self.command.name().to_string());
        put("density", self.density.describe());
        put("h", format!("1/{}", self.spacing.k()));
        put("r", self.r.to_string());
        put("theta_max", format!("{:?}", self.theta_max));
        put("b", format!("{:?}", self.bs));
        put("t", format!("{:?}", self.ts));
        put("sides", format!("{:?}", self.sides));
        put("eps", format!("{:?}", self.eps));
        put("target", format!("{:?}", self.target));
        put("center", format!("{:?}", self.center));
        put("exact", self.exact.to_string());
        put("seed", self.seed.to_string());
        put(
            "chain",
            self.chain
                .as_deref()
                .map(|s| sha_hex(s.as_bytes()))
                .unwrap_or_default(),
        );
        put(
            "other",
            self.other
                .as_deref()
                .map(|s| sha_hex(s.as_bytes()))
                .unwrap_or_default(),
        );
        put("x0", format!("{:?}", self.x0));
        put("rhos", format!("{:?}", self.rhos));
        put("tol", format!("{:?}", self.tol));
        put("samples", self.samples.to_string());
        put("trials", self.trials.to_string());
        self.canonical = c;
        self
    }

    /// Canonical solver-relevant parameters; excludes workers and output
    /// directory.
    pub fn canonical(&self) -> &BTreeMap<String, String> {
        &self.canonical
    }

    pub fn key(&self) -> String {
        cache_key(&self.canonical)
    }
}

/// SHA-256 of the sorted `key=value` lines.
pub fn cache_key(fragment: &BTreeMap<String, String>) -> String {
    let mut s = String::new();
    for (k, v) in fragment {
        let _ = writeln!(s, "{k}={v}");
    }
    sha_hex(s.as_bytes())
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub hash: String,
    pub b: Vec<i64>,
    pub t: Vec<f64>,
    pub side: f64,
    pub value: f64,
    pub solver: String,
}

pub const RESULTS_HEADER: &str = "hash,b,t,T,value,value_per_T,solver";

impl ResultRow {
    /// Values in `{:.16e}`, i.e. 17 significant digits.
    pub fn to_csv(&self) -> String {
        let b: Vec<String> = self.b.iter().map(|x| x.to_string()).collect();
        let t: Vec<String> = self.t.iter().map(|x| format!("{x:?}")).collect();
        format!(
            "{},{},{},{:?},{:.16e},{:.16e},{}",
            self.hash,
            b.join(";"),
            t.join(";"),
            self.side,
            self.value,
            self.value / self.side,
            self.solver
        )
    }

    pub fn from_csv(line: &str) -> Result<ResultRow> {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse {
            line: 0,
            msg: format!("bad results row '{line}'"),
        };
        if f.len() != 7 {
            return Err(bad());
        }
        let b = f[1]
            .split(';')
            .map(|x| x.parse().map_err(|_| bad()))
            .collect::<Result<Vec<i64>>>()?;
        let t = f[2]
            .split(';')
            .map(|x| x.parse().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ResultRow {
            hash: f[0].to_string(),
            b,
            t,
            side: f[3].parse().map_err(|_| bad())?,
            value: f[4].parse().map_err(|_| bad())?,
            solver: f[6].to_string(),
        })
    }
}

/// Graph text followed by chain text.
pub fn chain_file_text(c: &Chain) -> String {
    let mut s = c.graph().to_text(c.rank());
    s.push_str(&c.to_text());
    s
}

pub fn parse_chain_file(text: &str) -> Result<Chain> {
    let split = text.find("\nchain ").ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing `chain` section".into(),
    })?;
    let (graph, _) = LatticeGraph::from_text(&text[..split + 1])?;
    Chain::from_text(Arc::new(graph), &text[split + 1..])
}

/// Files written under `out`, first with a `.partial` suffix and renamed
/// once the run succeeds.
struct Artifacts {
    out: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn new(out: &Path) -> Artifacts {
        Artifacts {
            out: out.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn put(&mut self, rel: &str, content: &str) -> Result<()> {
        let path = self.out.join(format!("{rel}.partial"));
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, content)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn commit(self) -> Result<Vec<String>> {
        for rel in &self.files {
            fs::rename(self.out.join(format!("{rel}.partial")), self.out.join(rel))?;
        }
        Ok(self.files)
    }
}

fn copy_tree(files: &[String], from: &Path, to: &Path) -> Result<()> {
    for rel in files {
        let dst = to.join(rel);
        if let Some(dir) = dst.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::copy(from.join(rel), dst)?;
    }
    Ok(())
}

const MANIFEST: &str = "MANIFEST";

/// Runs the command, serving it from `out/cache/<key>` when an identical
/// config ran before. Returns the artifact paths relative to `out`.
pub fn run(cfg: &RunConfig) -> Result<Vec<String>> {
    let key = cfg.key();
    let cache = cfg.out.join("cache").join(&key);
    if let Ok(manifest) = fs::read_to_string(cache.join(MANIFEST)) {
        let files: Vec<String> = manifest.lines().map(String::from).collect();
        copy_tree(&files, &cache, &cfg.out)?;
        log::info!("cache hit {key}: {} artifacts", files.len());
        return Ok(files);
    }
    fs::create_dir_all(&cfg.out)?;
    let mut art = Artifacts::new(&cfg.out);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| match cfg.command {
        Command::Cell => run_cell(cfg, &mut art),
        Command::Table => run_table(cfg, &mut art).map(|_| ()),
        Command::Recover => run_recover(cfg, &mut art),
        Command::Verify => run_verify(cfg, &mut art),
        Command::Flatnorm => run_flatnorm(cfg, &mut art),
        Command::Probe => run_probe(cfg, &mut art),
    });
    outcome?;
    let files = art.commit()?;
    copy_tree(&files, &cfg.out, &cache)?;
    fs::write(cache.join(MANIFEST), files.join("\n") + "\n")?;
    log::info!("stored {} artifacts under cache key {key}", files.len());
    Ok(files)
}

struct Solved {
    row: ResultRow,
    seconds: f64,
    chain: Option<Chain>,
}

fn put_results(art: &mut Artifacts, mut solved: Vec<Solved>) -> Result<()> {
    solved.sort_by(|a, b| a.row.hash.cmp(&b.row.hash));
    let mut results = format!("{RESULTS_HEADER}\n");
    let mut timing = String::from("hash,seconds\n");
    for s in &solved {
        results.push_str(&s.row.to_csv());
        results.push('\n');
        let _ = writeln!(timing, "{},{:.6}", s.row.hash, s.seconds);
    }
    art.put("results.csv", &results)?;
    art.put("timing.csv", &timing)?;
    for s in &solved {
        if let Some(c) = &s.chain {
            art.put(&format!("chains/{}.chain", s.row.hash), &chain_file_text(c))?;
        }
    }
    Ok(())
}

fn run_cell(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let mut problems = Vec::new();
    for b in &cfg.bs {
        for t in &cfg.ts {
            for &s in &cfg.sides {
                problems.push(CellProblem::new(
                    b,
                    t,
                    s,
                    &cfg.center,
                    cfg.spacing,
                    cfg.r,
                    cfg.theta_max,
                    cfg.density.clone(),
                )?);
            }
        }
    }
    let outcomes: Vec<(CellProblem, Result<CellSolution>, f64)> = problems
        .into_par_iter()
        .map(|p| {
            let start = Instant::now();
            let sol = if cfg.exact {
                solve_exact(&p)
            } else {
                solve_heuristic(&p)
            };
            (p, sol, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut solved = Vec::new();
    let mut first_err = None;
    for (p, sol, seconds) in outcomes {
        match sol {
            Ok(sol) => solved.push(Solved {
                row: ResultRow {
                    hash: p.hash(),
                    b: p.b.clone(),
                    t: p.t.clone(),
                    side: p.side,
                    value: sol.value,
                    solver: sol.solver.to_string(),
                },
                seconds,
                chain: Some(sol.chain),
            }),
            Err(e) => {
                log::error!("cell {} failed: {e}", p.hash());
                first_err.get_or_insert(e);
            }
        }
    }
    put_results(art, solved)?;
    first_err.map_or(Ok(()), Err)
}

fn table_for(cfg: &RunConfig, bs: Vec<Vec<i64>>, ts: Vec<Vec<f64>>) -> Result<HomogTable> {
    let spec = TableSpec {
        density: cfg.density.clone(),
        spacing: cfg.spacing,
        r: cfg.r,
        theta_max: cfg.theta_max,
        bs,
        ts,
        sides: cfg.sides.clone(),
        exact: cfg.exact,
    };
    build_table(&spec, cfg.workers)
}

fn put_table(art: &mut Artifacts, table: &HomogTable, with_chains: bool) -> Result<()> {
    let mut solved = Vec::new();
    let mut tsv = String::new();
    for e in &table.entries {
        let b: Vec<String> = e.b.iter().map(|x| x.to_string()).collect();
        let t: Vec<String> = e.t.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(
            tsv,
            "# b={} t={} psi_hom={:.16e}",
            b.join(","),
            t.join(","),
            e.fit.psi_hom
        );
        for p in &e.points {
            let _ = writeln!(tsv, "{:?}\t{:.16e}", p.side, p.per_length());
            solved.push(Solved {
                row: ResultRow {
                    hash: p.hash.clone(),
                    b: e.b.clone(),
                    t: e.t.clone(),
                    side: p.side,
                    value: p.value,
                    solver: p.solver.to_string(),
                },
                seconds: p.seconds,
                chain: if with_chains {
                    p.chain.as_ref().map(|c| c.0.clone())
                } else {
                    None
                },
            });
        }
        tsv.push('\n');
    }
    put_results(art, solved)?;
    art.put("table.txt", &table.to_text())?;
    art.put("psi_vs_T.tsv", &tsv)
}

fn run_table(cfg: &RunConfig, art: &mut Artifacts) -> Result<HomogTable> {
    let table = table_for(cfg, cfg.bs.clone(), cfg.ts.clone())?;
    put_table(art, &table, true)?;
    Ok(table)
}

/// Table over the (b, t) pairs of the target's segments.
fn target_table(cfg: &RunConfig, target: &Target) -> Result<HomogTable> {
    let mut entries: Vec<(Vec<i64>, Vec<f64>)> = Vec::new();
    for s in &target.segments {
        let t = s.direction();
        let known = entries.iter().any(|(b, u)| {
            let same = |sb: i64, st: f64| {
                b.iter().zip(&s.b).all(|(x, y)| *x == sb * y)
                    && u.iter().zip(&t).all(|(x, y)| (x - st * y).abs() < 1e-9)
            };
            same(1, 1.0) || same(-1, -1.0) || same(1, -1.0) || same(-1, 1.0)
        });
        if !known {
            entries.push((s.b.clone(), t));
        }
    }
    let mut tables = Vec::new();
    for (b, t) in entries {
        tables.push(table_for(cfg, vec![b], vec![t])?);
    }
    let mut table = tables.remove(0);
    for t in tables {
        table.entries.extend(t.entries);
    }
    Ok(table)
}

fn run_recover(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let target = cfg.target.as_ref().expect("checked at load");
    let table = target_table(cfg, target)?;
    put_table(art, &table, false)?;
    let fh = f_hom(target, &table, &cfg.density)?;
    let steps = recovery_sequence(target, &cfg.density, &cfg.eps, &table)?;
    let mut tsv = format!(
        "# f_hom={:.16e} error_bound={:.16e}\neps\tcells\tenergy\trel_error\tflat_distance\n",
        fh.value, fh.error_bound
    );
    for s in &steps {
        let _ = writeln!(
            tsv,
            "{:?}\t{}\t{:.16e}\t{:.16e}\t{:.16e}",
            s.eps,
            s.cells,
            s.energy,
            (s.energy - fh.value).abs() / fh.value,
            s.flat_distance
        );
        let n = (1.0 / s.eps).round() as u64;
        art.put(
            &format!("chains/recovery_1_{n}.chain"),
            &chain_file_text(&s.chain),
        )?;
    }
    art.put("recovery.tsv", &tsv)
}

fn run_probe(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let target = cfg.target.as_ref().expect("checked at load");
    let table = target_table(cfg, target)?;
    let steps = recovery_sequence(target, &cfg.density, &cfg.eps, &table)?;
    let seg = &target.segments[0];
    let t = seg.direction();
    let x0 = cfg.x0.clone().unwrap_or_else(|| {
        seg.start
            .iter()
            .zip(&seg.end)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    });
    let rhos = if cfg.rhos.is_empty() {
        vec![seg.length() / 2.0; steps.len()]
    } else {
        cfg.rhos.clone()
    };
    let (reference, _) = psi_hom_at(&table, &cfg.density, &seg.b, &t)?;
    let chains: Vec<(f64, Chain)> = steps.into_iter().map(|s| (s.eps, s.chain)).collect();
    let rep = local_density_probe(&chains, &x0, &t, &rhos, &cfg.density, reference, cfg.tol)?;
    let mut tsv = format!(
        "# x0={:?} t={:?} psi_hom={:.16e} tol={:?} passed={}\neps\trho\tvalue\n",
        rep.x0, t, rep.reference, cfg.tol, rep.passed
    );
    for ((eps, _), (rho, v)) in chains.iter().zip(rep.rhos.iter().zip(&rep.values)) {
        let _ = writeln!(tsv, "{eps:?}\t{rho:?}\t{v:.16e}");
    }
    art.put("probe.tsv", &tsv)
}

fn run_flatnorm(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let c = parse_chain_file(cfg.chain.as_deref().expect("checked at load"))?;
    let g = c.graph().clone();
    let (mut lo, mut hi) = (
        vec![f64::INFINITY; g.dim()],
        vec![f64::NEG_INFINITY; g.dim()],
    );
    for v in 0..g.node_count() {
        for (i, x) in g.position(v).into_iter().enumerate() {
            lo[i] = lo[i].min(x);
            hi[i] = hi[i].max(x);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let side = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max) + g.h();
    let w = Cube::axis(side, &center)?;
    let mut s = String::new();
    let _ = writeln!(s, "mass_euclid {:.16e}", c.mass(MassNorm::Euclid, None));
    let _ = writeln!(s, "mass_one {:.16e}", c.mass(MassNorm::One, None));
    let _ = writeln!(
        s,
        "boundary_flat_norm {:.16e}",
        flat_norm_zero(&c.boundary(), &w)?.value
    );
    match flat_norm_chain(&c, &w) {
        Ok(fw) => {
            let _ = writeln!(s, "flat_norm {:.16e}", fw.value);
        }
        Err(Error::Unsupported(msg)) => {
            log::warn!("flat norm of the chain unavailable: {msg}");
        }
        Err(e) => return Err(e),
    }
    if let Some(other) = &cfg.other {
        let o = parse_chain_file(other)?;
        let o = if o.graph().same_as(&g) {
            o
        } else {
            o.translate(&g, &vec![0; g.dim()])?
        };
        let _ = writeln!(s, "flat_distance {:.16e}", flat_distance(&c, &o, &w)?);
    }
    art.put("flatnorm.txt", &s)
}

fn run_verify(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let d = &cfg.density;
    let mut lines: Vec<SuiteResult> = vec![
        growth_suite(d, cfg.samples, cfg.seed)?,
        energy_sandwich_suite(d, cfg.trials, cfg.seed)?,
        structure_suite(d.rank(), cfg.trials, cfg.seed)?,
        coarea_suite(cfg.trials, cfg.seed)?,
    ];
    if d.dim() == 2 {
        lines.push(oracle_suite(d, cfg.trials, cfg.seed)?.0);
    }
    if !cfg.bs.is_empty() && cfg.sides.len() >= 3 {
        let table = table_for(cfg, cfg.bs.clone(), cfg.ts.clone())?;
        lines.extend(table_suites(&table, d));
        put_table(art, &table, false)?;
    }
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    art.put("verify.txt", &text)?;
    let failed = lines.iter().filter(|l| !l.passed).count();
    if failed > 0 {
        return Err(Error::VerificationFailed(failed));
    }
    Ok(())
}
