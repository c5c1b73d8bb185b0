//! Configuration parsing, CSV ingestion/emission, and run metadata.
//!
//! The run configuration is a flat `key = value` file with section
//! prefixes (`sim.`, `fit.`, `data.`, `study.`, `bootstrap.`); a few bare
//! aliases (`n`, `kernel`, `rho`, ...) map onto the `sim.` section. Data
//! files are UTF-8 CSV with header rows and `.` decimal separators.
//! Floats are serialized with 17 significant digits so emitted numbers
//! re-parse bitwise.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::analysis::{BootstrapBand, FactorSweep, MetricsEntry, StudyConfig};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernel::Kernel;
use crate::recovery::{Method, PMethod};
use crate::sim::{theta0_offset_for_zero_prop, Dataset, Family, SimConfig, SimulatedTruth, SubjectRecord};
use crate::sofr::{BasisFamily, BasisSpec};

/// Format a float with 17 significant digits (bitwise round-trippable).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Fit,
    Bootstrap,
    Study,
}

impl Command {
    fn parse(s: &str) -> Option<Command> {
        match s {
            "simulate" => Some(Command::Simulate),
            "fit" => Some(Command::Fit),
            "bootstrap" => Some(Command::Bootstrap),
            "study" => Some(Command::Study),
            _ => None,
        }
    }
}

/// Fully resolved run configuration with defaults applied.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub sim: SimConfig,
    /// Anticipated zero proportion behind `sim.theta[0].offset`.
    pub zero_proportion: f64,
    pub method: Method,
    pub basis: BasisSpec,
    pub p_method: PMethod,
    pub data_w: Option<PathBuf>,
    pub data_subjects: Option<PathBuf>,
    pub data_m: usize,
    pub study_replicates: usize,
    pub study_methods: Vec<Method>,
    pub study_bases: Vec<BasisSpec>,
    pub study_sweep: FactorSweep,
    pub bootstrap_b: usize,
    pub alpha: f64,
}

impl RunConfig {
    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            base: self.sim.clone(),
            replicates: self.study_replicates,
            methods: self.study_methods.clone(),
            bases: self.study_bases.clone(),
            p_method: self.p_method,
            sweep: self.study_sweep.clone(),
            master_seed: self.seed,
        }
    }
}

fn bad_key(key: &str, detail: impl std::fmt::Display) -> Error {
    Error::Config(format!("key '{key}': {detail}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| bad_key(key, format!("cannot parse '{v}'")))
}

/// Parse and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Parse a configuration from its text (defaults applied, every key
/// validated).
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = k.trim().to_string();
        let val = v.trim().to_string();
        if kv.insert(key.clone(), val).is_some() {
            return Err(Error::Config(format!("duplicate key '{key}'")));
        }
    }

    // bare aliases onto the sim section
    let aliases = [
        ("n", "sim.n"),
        ("j", "sim.j"),
        ("m", "sim.m"),
        ("family", "sim.family"),
        ("kernel", "sim.u_kernel"),
        ("rho", "sim.u_rho"),
        ("sigma_u", "sim.sigma_u"),
        ("q_g", "sim.q_g"),
        ("zero_proportion", "sim.zero_proportion"),
    ];
    for (from, to) in aliases {
        if let Some(v) = kv.remove(from) {
            if kv.contains_key(to) {
                return Err(Error::Config(format!(
                    "both '{from}' and '{to}' present; use one"
                )));
            }
            kv.insert(to.to_string(), v);
        }
    }

    let known = [
        "command",
        "seed",
        "out",
        "threads",
        "sim.n",
        "sim.j",
        "sim.m",
        "sim.family",
        "sim.sigma_u",
        "sim.u_kernel",
        "sim.u_rho",
        "sim.q_g",
        "sim.zero_proportion",
        "sim.sigma0_sq",
        "fit.method",
        "fit.basis",
        "fit.k",
        "fit.p_method",
        "data.w",
        "data.subjects",
        "data.m",
        "study.r",
        "study.methods",
        "study.bases",
        "study.factor",
        "study.levels",
        "bootstrap.b",
        "bootstrap.alpha",
    ];
    for key in kv.keys() {
        if !known.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
    }

    let command = match kv.get("command") {
        Some(v) => Command::parse(v)
            .ok_or_else(|| bad_key("command", format!("unknown command '{v}'")))?,
        None => return Err(Error::Config("missing required key 'command'".into())),
    };
    let seed: u64 = match kv.get("seed") {
        Some(v) => parse_num("seed", v)?,
        None => 0,
    };
    let out_dir = PathBuf::from(kv.get("out").map(String::as_str).unwrap_or("out"));
    let threads = match kv.get("threads") {
        Some(v) => {
            let t: usize = parse_num("threads", v)?;
            if t == 0 {
                return Err(bad_key("threads", "must be positive"));
            }
            Some(t)
        }
        None => None,
    };

    // simulation section over study defaults
    let n: usize = match kv.get("sim.n") {
        Some(v) => parse_num("sim.n", v)?,
        None => 100,
    };
    let mut sim = SimConfig::study_default(n, seed);
    if let Some(v) = kv.get("sim.j") {
        sim.j = parse_num("sim.j", v)?;
    }
    if let Some(v) = kv.get("sim.m") {
        let m: usize = parse_num("sim.m", v)?;
        sim.grid = TimeGrid::uniform(m)?;
    }
    if let Some(v) = kv.get("sim.family") {
        sim.family = match v.as_str() {
            "gaussian" => Family::Gaussian,
            "bernoulli" => Family::Bernoulli,
            other => return Err(bad_key("sim.family", format!("unknown family '{other}'"))),
        };
    }
    if let Some(v) = kv.get("sim.sigma_u") {
        sim.sigma_u = parse_num("sim.sigma_u", v)?;
    }
    let rho: f64 = match kv.get("sim.u_rho") {
        Some(v) => parse_num("sim.u_rho", v)?,
        None => 0.2,
    };
    if let Some(v) = kv.get("sim.u_kernel") {
        sim.u_kernel = match v.as_str() {
            "squared_exponential" => Kernel::SquaredExponential { rho },
            "spatial_power" => Kernel::SpatialPower { rho },
            "two_value" => Kernel::TwoValue { rho },
            other => {
                return Err(bad_key(
                    "sim.u_kernel",
                    format!("unknown kernel family '{other}'"),
                ))
            }
        };
        sim.u_kernel
            .validated()
            .map_err(|e| bad_key("sim.u_rho", e))?;
    } else if kv.contains_key("sim.u_rho") {
        sim.u_kernel = Kernel::SquaredExponential { rho };
        sim.u_kernel
            .validated()
            .map_err(|e| bad_key("sim.u_rho", e))?;
    }
    if let Some(v) = kv.get("sim.q_g") {
        sim.q_g = parse_num("sim.q_g", v)?;
        if !(0.0..1.0).contains(&sim.q_g) {
            return Err(bad_key("sim.q_g", "must lie in [0, 1)"));
        }
    }
    let zero_proportion: f64 = match kv.get("sim.zero_proportion") {
        Some(v) => {
            let zp: f64 = parse_num("sim.zero_proportion", v)?;
            sim.theta[0].offset =
                theta0_offset_for_zero_prop(zp).map_err(|e| bad_key("sim.zero_proportion", e))?;
            zp
        }
        None => 0.335,
    };
    if let Some(v) = kv.get("sim.sigma0_sq") {
        sim.sigma0_sq = parse_num("sim.sigma0_sq", v)?;
    }
    sim.validate().map_err(|e| Error::Config(format!("sim: {e}")))?;

    // fit section
    let method = match kv.get("fit.method") {
        Some(v) => Method::parse(v)
            .ok_or_else(|| bad_key("fit.method", format!("unknown method '{v}'")))?,
        None => Method::MixedModel,
    };
    let basis_family = match kv.get("fit.basis") {
        Some(v) => BasisFamily::parse(v)
            .ok_or_else(|| bad_key("fit.basis", format!("unknown basis '{v}'")))?,
        None => BasisFamily::BsplineCubic,
    };
    let mut basis = BasisSpec::default_for(basis_family);
    if let Some(v) = kv.get("fit.k") {
        basis.k = parse_num("fit.k", v)?;
        if basis.k < 1 {
            return Err(bad_key("fit.k", "must be >= 1"));
        }
    }
    basis.validate().map_err(|e| bad_key("fit.k", e))?;
    let p_method = match kv.get("fit.p_method") {
        Some(v) => PMethod::parse(v)
            .ok_or_else(|| bad_key("fit.p_method", format!("unknown p method '{v}'")))?,
        None => PMethod::LogisticPointwise,
    };

    // data section
    let data_w = kv.get("data.w").map(PathBuf::from);
    let data_subjects = kv.get("data.subjects").map(PathBuf::from);
    if data_w.is_some() != data_subjects.is_some() {
        return Err(Error::Config(
            "data.w and data.subjects must be given together".into(),
        ));
    }
    let data_m: usize = match kv.get("data.m") {
        Some(v) => parse_num("data.m", v)?,
        None => sim.grid.len(),
    };

    // study section
    let study_replicates: usize = match kv.get("study.r") {
        Some(v) => parse_num("study.r", v)?,
        None => 500,
    };
    if study_replicates < 2 {
        return Err(bad_key("study.r", "must be >= 2"));
    }
    let study_methods: Vec<Method> = match kv.get("study.methods") {
        Some(v) => {
            let ms: Result<Vec<Method>> = v
                .split(',')
                .map(|s| {
                    Method::parse(s.trim()).ok_or_else(|| {
                        bad_key("study.methods", format!("unknown method '{}'", s.trim()))
                    })
                })
                .collect();
            ms?
        }
        None => Method::all().to_vec(),
    };
    let study_bases: Vec<BasisSpec> = match kv.get("study.bases") {
        Some(v) => {
            let bs: Result<Vec<BasisSpec>> = v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    let (fam, k) = match s.split_once(':') {
                        Some((f, k)) => (f, Some(k)),
                        None => (s, None),
                    };
                    let family = BasisFamily::parse(fam).ok_or_else(|| {
                        bad_key("study.bases", format!("unknown basis '{fam}'"))
                    })?;
                    let mut spec = BasisSpec::default_for(family);
                    if let Some(k) = k {
                        spec.k = parse_num("study.bases", k)?;
                    }
                    spec.validate().map_err(|e| bad_key("study.bases", e))?;
                    Ok(spec)
                })
                .collect();
            bs?
        }
        None => vec![basis],
    };
    let study_sweep = match kv.get("study.factor").map(String::as_str) {
        None | Some("none") => FactorSweep::None,
        Some(factor) => {
            let levels = kv.get("study.levels").ok_or_else(|| {
                Error::Config("study.factor set but study.levels missing".into())
            })?;
            let parts: Vec<&str> = levels.split(',').map(str::trim).collect();
            match factor {
                "n" => FactorSweep::SampleSize(
                    parts
                        .iter()
                        .map(|s| parse_num("study.levels", s))
                        .collect::<Result<_>>()?,
                ),
                "sigma_u" => FactorSweep::SigmaU(
                    parts
                        .iter()
                        .map(|s| parse_num("study.levels", s))
                        .collect::<Result<_>>()?,
                ),
                "zero_proportion" => FactorSweep::ZeroProportion(
                    parts
                        .iter()
                        .map(|s| parse_num("study.levels", s))
                        .collect::<Result<_>>()?,
                ),
                "q_g" => FactorSweep::QG(
                    parts
                        .iter()
                        .map(|s| parse_num("study.levels", s))
                        .collect::<Result<_>>()?,
                ),
                "family" => FactorSweep::Family(
                    parts
                        .iter()
                        .map(|s| match *s {
                            "gaussian" => Ok(Family::Gaussian),
                            "bernoulli" => Ok(Family::Bernoulli),
                            other => {
                                Err(bad_key("study.levels", format!("unknown family '{other}'")))
                            }
                        })
                        .collect::<Result<_>>()?,
                ),
                "u_kernel" => FactorSweep::UKernel(
                    parts
                        .iter()
                        .map(|s| {
                            let (fam, rho) = s.split_once(':').ok_or_else(|| {
                                bad_key("study.levels", format!("expected family:rho, got '{s}'"))
                            })?;
                            let rho: f64 = parse_num("study.levels", rho)?;
                            let k = match fam {
                                "squared_exponential" => Kernel::SquaredExponential { rho },
                                "spatial_power" => Kernel::SpatialPower { rho },
                                "two_value" => Kernel::TwoValue { rho },
                                other => {
                                    return Err(bad_key(
                                        "study.levels",
                                        format!("unknown kernel family '{other}'"),
                                    ))
                                }
                            };
                            k.validated().map_err(|e| bad_key("study.levels", e))
                        })
                        .collect::<Result<_>>()?,
                ),
                other => {
                    return Err(bad_key("study.factor", format!("unknown factor '{other}'")))
                }
            }
        }
    };

    let bootstrap_b: usize = match kv.get("bootstrap.b") {
        Some(v) => parse_num("bootstrap.b", v)?,
        None => 500,
    };
    let alpha: f64 = match kv.get("bootstrap.alpha") {
        Some(v) => parse_num("bootstrap.alpha", v)?,
        None => 0.05,
    };
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(bad_key("bootstrap.alpha", "must lie in (0, 1)"));
    }

    Ok(RunConfig {
        command,
        seed,
        out_dir,
        threads,
        sim,
        zero_proportion,
        method,
        basis,
        p_method,
        data_w,
        data_subjects,
        data_m,
        study_replicates,
        study_methods,
        study_bases,
        study_sweep,
        bootstrap_b,
        alpha,
    })
}

/// Load a dataset from the long-format proxy file and the subject table.
///
/// The grid is inferred as `grid_len` equally spaced points on the unit
/// interval (`t = t_index / (m - 1)`); unequal replicate counts across
/// subjects are allowed.
pub fn load_dataset(w_path: &Path, subj_path: &Path, grid_len: usize) -> Result<Dataset> {
    let grid = TimeGrid::uniform(grid_len)?;

    #[derive(Default)]
    struct Acc {
        // replicate index -> per-t values, tracked for coverage
        reps: BTreeMap<u64, Vec<Option<f64>>>,
    }

    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, Acc> = BTreeMap::new();

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(w_path)?;
    {
        let headers = rdr.headers()?.clone();
        let expected = ["subject_id", "replicate", "t_index", "value"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::Data(format!(
                "{}: expected header {expected:?}, got {got:?}",
                w_path.display()
            )));
        }
    }
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2; // 1-based with header
        let record = record?;
        let sid = record.get(0).unwrap_or("").to_string();
        if sid.is_empty() {
            return Err(Error::Data(format!(
                "{} row {row}: empty subject_id",
                w_path.display()
            )));
        }
        let rep: u64 = record
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Data(format!("{} row {row}: bad replicate", w_path.display())))?;
        if rep < 1 {
            return Err(Error::Data(format!(
                "{} row {row}: replicate must be >= 1",
                w_path.display()
            )));
        }
        let t_index: usize = record
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Data(format!("{} row {row}: bad t_index", w_path.display())))?;
        if t_index >= grid_len {
            return Err(Error::Data(format!(
                "{} row {row}: t_index {t_index} outside [0, {grid_len})",
                w_path.display()
            )));
        }
        let value: f64 = record
            .get(3)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Data(format!("{} row {row}: bad value", w_path.display())))?;
        if !value.is_finite() {
            return Err(Error::Data(format!(
                "{} row {row}: non-finite value",
                w_path.display()
            )));
        }
        if !acc.contains_key(&sid) {
            order.push(sid.clone());
        }
        let slot = acc
            .entry(sid.clone())
            .or_default()
            .reps
            .entry(rep)
            .or_insert_with(|| vec![None; grid_len]);
        if slot[t_index].is_some() {
            return Err(Error::Data(format!(
                "{} row {row}: duplicate (subject {sid}, replicate {rep}, t_index {t_index})",
                w_path.display()
            )));
        }
        slot[t_index] = Some(value);
    }

    // subject table
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(subj_path)?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 2 || cols[0] != "subject_id" || cols[1] != "y" {
        return Err(Error::Data(format!(
            "{}: expected header starting with subject_id,y",
            subj_path.display()
        )));
    }
    let covariate_names: Vec<String> = cols[2..].iter().map(|s| s.to_string()).collect();
    let mut table: BTreeMap<String, (f64, Vec<f64>)> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let sid = record.get(0).unwrap_or("").to_string();
        if table.contains_key(&sid) {
            return Err(Error::Data(format!(
                "{} row {row}: duplicate subject_id {sid}",
                subj_path.display()
            )));
        }
        let y: f64 = record
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Data(format!("{} row {row}: bad y", subj_path.display())))?;
        let mut z = Vec::with_capacity(covariate_names.len());
        for (c, _) in covariate_names.iter().enumerate() {
            let v: f64 = record.get(2 + c).and_then(|v| v.parse().ok()).ok_or_else(|| {
                Error::Data(format!(
                    "{} row {row}: bad covariate column {}",
                    subj_path.display(),
                    c + 3
                ))
            })?;
            z.push(v);
        }
        table.insert(sid, (y, z));
    }

    // cross-checks and assembly in first-appearance order
    for sid in table.keys() {
        if !acc.contains_key(sid) {
            return Err(Error::Data(format!(
                "subject {sid} appears in {} but has no proxy rows in {}",
                subj_path.display(),
                w_path.display()
            )));
        }
    }
    let mut subjects = Vec::with_capacity(order.len());
    for (id, sid) in order.iter().enumerate() {
        let (y, z) = table.get(sid).ok_or_else(|| {
            Error::Data(format!(
                "subject {sid} has proxy rows but is missing from {}",
                subj_path.display()
            ))
        })?;
        let a = &acc[sid];
        let j = a.reps.len();
        if j == 0 {
            return Err(Error::Data(format!("subject {sid}: no replicates")));
        }
        let mut w = DMatrix::zeros(j, grid_len);
        for (jj, (rep, vals)) in a.reps.iter().enumerate() {
            for (t, v) in vals.iter().enumerate() {
                w[(jj, t)] = v.ok_or_else(|| {
                    Error::Data(format!(
                        "subject {sid}, replicate {rep}: missing t_index {t} (grid coverage incomplete)"
                    ))
                })?;
            }
        }
        subjects.push(SubjectRecord {
            id,
            z: z.clone(),
            y: *y,
            w,
        });
    }
    if subjects.is_empty() {
        return Err(Error::Data("no subjects in input".into()));
    }
    Ok(Dataset {
        subjects,
        grid,
        covariate_names,
    })
}

/// Write a dataset in the two-file CSV schema.
pub fn write_dataset(dataset: &Dataset, w_path: &Path, subj_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(w_path)?;
    w.write_record(["subject_id", "replicate", "t_index", "value"])?;
    for s in &dataset.subjects {
        for j in 0..s.w.nrows() {
            for t in 0..s.w.ncols() {
                w.write_record([
                    s.id.to_string(),
                    (j + 1).to_string(),
                    t.to_string(),
                    fmt_f64(s.w[(j, t)]),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(subj_path)?;
    let mut header = vec!["subject_id".to_string(), "y".to_string()];
    header.extend(dataset.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for s in &dataset.subjects {
        let mut rec = vec![s.id.to_string(), fmt_f64(s.y)];
        rec.extend(s.z.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the latent truth next to a simulated dataset.
pub fn write_truth(truth: &SimulatedTruth, dir: &Path) -> Result<()> {
    let write_matrix = |m: &DMatrix<f64>, path: PathBuf, row_label: &str| -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([row_label, "t_index", "value"])?;
        for i in 0..m.nrows() {
            for t in 0..m.ncols() {
                w.write_record([i.to_string(), t.to_string(), fmt_f64(m[(i, t)])])?;
            }
        }
        w.flush()?;
        Ok(())
    };
    write_matrix(&truth.x, dir.join("truth_x.csv"), "subject_id")?;
    write_matrix(&truth.p, dir.join("truth_p.csv"), "subject_id")?;
    write_matrix(&truth.theta, dir.join("truth_theta.csv"), "component")?;
    Ok(())
}

/// One row of the coefficient-function output.
pub struct BetaRow {
    pub method: Method,
    pub t: f64,
    pub estimate: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Write `beta_hat.csv`: t, estimate, and (when a bootstrap ran) the
/// pointwise band, per method.
pub fn write_beta_hat(rows: &[BetaRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "t", "estimate", "lower", "upper"])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            fmt_f64(r.t),
            fmt_f64(r.estimate),
            r.lower.map(fmt_f64).unwrap_or_default(),
            r.upper.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write `metrics.csv` with one row per (method, basis, factor level).
pub fn write_metrics(entries: &[MetricsEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "basis",
        "factor",
        "level",
        "squared_bias",
        "variance",
        "replicates_used",
        "failures",
    ])?;
    for e in entries {
        w.write_record([
            e.method.name().to_string(),
            e.basis.label(),
            e.factor.clone(),
            e.level.clone(),
            fmt_f64(e.squared_bias),
            fmt_f64(e.variance),
            e.replicates_used.to_string(),
            e.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Re-parse `metrics.csv` (used by tests and downstream tooling).
pub fn read_metrics(path: &Path) -> Result<Vec<(String, String, String, String, f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let r = record?;
        out.push((
            r.get(0).unwrap_or("").to_string(),
            r.get(1).unwrap_or("").to_string(),
            r.get(2).unwrap_or("").to_string(),
            r.get(3).unwrap_or("").to_string(),
            r.get(4)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Data("bad squared_bias".into()))?,
            r.get(5)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Data("bad variance".into()))?,
        ));
    }
    Ok(out)
}

/// Write the bootstrap band as `beta_hat.csv` rows for one method.
pub fn band_rows(band: &BootstrapBand, method: Method) -> Vec<BetaRow> {
    (0..band.t.len())
        .map(|t| BetaRow {
            method,
            t: band.t[t],
            estimate: band.estimate[t],
            lower: Some(band.lower[t]),
            upper: Some(band.upper[t]),
        })
        .collect()
}

#[derive(Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    master_seed: u64,
    config: &'a RunConfig,
}

/// Write `run_meta.json`: enough to replay the run exactly.
pub fn write_run_meta(config: &RunConfig, dir: &Path) -> Result<()> {
    let meta = RunMeta {
        tool: "zifr",
        version: env!("CARGO_PKG_VERSION"),
        command: config.command,
        master_seed: config.seed,
        config,
    };
    let mut f = std::fs::File::create(dir.join("run_meta.json"))?;
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Data(format!("cannot serialize run metadata: {e}")))?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
