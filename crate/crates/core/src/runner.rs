//! Presets and on-disk execution: `series.csv`, `snapshots/t<stamp>.json`
//! and `summary.json` under the configured output directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::barrier::BarrierSolution;
use crate::config::{InitialSpec, RunConfig, DEFAULT_OUT_DIR};
use crate::curvature::CurvatureKind;
use crate::diagnostics::{
    barrier_envelope_check, DecayFit, DecaySeries, DiagnosticsRow, DiagnosticsSeries, EnvelopeReport, CSV_HEADER,
};
use crate::error::{Error, Result};
use crate::flow::{legendre, run_observed, FlowEvent, FlowParams, InitialCondition, Snapshot};
use crate::sphere::{field_stats, ScalarField};

/// Version stamped into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
/// Tolerance for the barrier envelope and gradient verdicts.
pub const VERDICT_TOL: f64 = 1e-3;

pub const PRESETS: [&str; 3] = ["sphere", "perturbed", "pinching-study"];

/// Oscillation of `P_ℓ` on `[−1, 1]`, so that `a·osc(P_ℓ)` is the
/// oscillation of `r₀ + a·P_ℓ(cos θ)`.
pub fn legendre_oscillation(l: u32) -> f64 {
    let samples = 20_000;
    let (lo, hi) = (0..=samples)
        .map(|k| legendre(l, -1.0 + 2.0 * k as f64 / samples as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    hi - lo
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let base = |p: f64, initial: InitialSpec| RunConfig {
        flow: FlowParams::new(2, p, CurvatureKind::Mean),
        initial,
        osc_sweep: Vec::new(),
        out_dir: PathBuf::from(DEFAULT_OUT_DIR).join(name),
        seed: 0,
    };
    match name {
        "sphere" => {
            let mut c = base(1.0, InitialSpec::Constant { r0: 1.0 });
            c.flow.snapshot_times = vec![0.0, 5.0, 10.0];
            Ok(c)
        }
        "perturbed" => {
            let mut c = base(1.0, InitialSpec::Legendre { r0: 1.0, l: 2, amplitude: 0.1 });
            c.flow.t_end = 12.0;
            c.flow.snapshot_times = vec![0.0, 4.0, 8.0, 12.0];
            Ok(c)
        }
        "pinching-study" => {
            let amplitude = 0.02 / legendre_oscillation(2);
            let mut c = base(2.0, InitialSpec::Legendre { r0: 1.0, l: 2, amplitude });
            c.flow.t_end = 40.0;
            c.flow.cadence = 0.1;
            c.flow.snapshot_times = vec![0.0, 20.0, 40.0];
            c.osc_sweep = vec![0.005, 0.02, 0.08, 0.3, 0.75];
            Ok(c)
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Reads a table of node values: numbers separated by whitespace or
/// commas, `#` starts a comment.
pub fn read_table(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let x: f64 = tok.parse().map_err(|_| {
                Error::InvalidParams(format!("{}:{}: not a number: {tok:?}", path.display(), i + 1))
            })?;
            values.push(x);
        }
    }
    Ok(values)
}

fn initial_condition(spec: &InitialSpec) -> Result<InitialCondition> {
    Ok(match spec {
        InitialSpec::Constant { r0 } => InitialCondition::Constant { r0: *r0 },
        InitialSpec::Legendre { r0, l, amplitude } => {
            InitialCondition::Legendre { r0: *r0, l: *l, amplitude: *amplitude }
        }
        InitialSpec::Table { path } => InitialCondition::Table { values: read_table(path)? },
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_line(cols: &[Option<f64>]) -> String {
    let cells: Vec<String> = cols.iter().map(|c| c.map(|x| format!("{x:.16e}")).unwrap_or_default()).collect();
    cells.join(",")
}

#[derive(Serialize)]
struct SnapshotFile<'a> {
    schema: u32,
    t: f64,
    n: usize,
    p: f64,
    #[serde(rename = "F")]
    function: CurvatureKind,
    mode: String,
    resolution: usize,
    u: &'a [f64],
    kappa_min: f64,
    kappa_max: f64,
}

/// A decay fit, or the reason none could be made.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FitEntry {
    Fit(DecayFit),
    Unavailable { error: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok { Verdict::Pass } else { Verdict::Fail }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    pub osc: f64,
    pub amplitude: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub kappa_dev: Option<FitEntry>,
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub schema: u32,
    pub status: RunStatus,
    pub error: Option<String>,
    pub config: RunConfig,
    pub target_rate: f64,
    pub fit_window: Option<(f64, f64)>,
    pub fits: BTreeMap<&'static str, FitEntry>,
    pub envelope: Option<EnvelopeReport>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub files: Vec<PathBuf>,
    pub sweep: Vec<SweepEntry>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub series_csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub summary_json: PathBuf,
    pub summary: Summary,
}

struct Analysis {
    window: Option<(f64, f64)>,
    fits: BTreeMap<&'static str, FitEntry>,
    envelope: Option<EnvelopeReport>,
    verdicts: BTreeMap<String, Verdict>,
}

fn analyse(params: &FlowParams, u0: &ScalarField, series: &DiagnosticsSeries) -> Analysis {
    let target = 2.0 / params.n_pow_p();
    let window = series.default_fit_window();
    let mut fits = BTreeMap::new();
    let mut verdicts = BTreeMap::new();
    for which in DecaySeries::ALL {
        let entry = match window {
            None => FitEntry::Unavailable { error: "no late window with sup|κ − 1| < 0.1".into() },
            Some(w) => match series.fit(which, w) {
                Ok(fit) => {
                    let ok = fit.r2 > 0.98 && (0.8 * target..=1.2 * target).contains(&fit.lambda);
                    verdicts.insert(format!("decay_{}", which.key()), ok.into());
                    FitEntry::Fit(fit)
                }
                Err(e) => FitEntry::Unavailable { error: e.to_string() },
            },
        };
        fits.insert(which.key(), entry);
    }

    let stats = field_stats(u0);
    let times = series.times();
    let lower = BarrierSolution::solve(stats.inf, params.n, params.p, &times);
    let upper = BarrierSolution::solve(stats.sup, params.n, params.p, &times);
    let envelope = barrier_envelope_check(series, &lower, &upper, VERDICT_TOL);
    verdicts.insert("barrier_envelope".into(), envelope.pass.into());

    let rows = &series.rows;
    let expanding = rows.windows(2).all(|w| w[1].inf_u >= w[0].inf_u && w[1].sup_u >= w[0].sup_u);
    verdicts.insert("expanding_extrema".into(), expanding.into());
    verdicts.insert("speed_positive".into(), rows.iter().all(|r| r.f_min > 0.0).into());
    if params.p <= 1.0 {
        let v0 = rows[0].sup_v_minus_1;
        let ok = rows.iter().all(|r| r.sup_v_minus_1 <= v0 + VERDICT_TOL);
        verdicts.insert("gradient_max_principle".into(), ok.into());
    }
    Analysis { window, fits, envelope: Some(envelope), verdicts }
}

struct Writer {
    dir: PathBuf,
    csv: BufWriter<File>,
    series_csv: PathBuf,
    snapshots: Vec<PathBuf>,
}

impl Writer {
    fn open(dir: &Path) -> Result<Self> {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
        let series_csv = dir.join("series.csv");
        let file = File::create(&series_csv).map_err(|e| Error::io(&series_csv, e))?;
        let mut csv = BufWriter::new(file);
        writeln!(csv, "{}", CSV_HEADER.join(",")).map_err(|e| Error::io(&series_csv, e))?;
        Ok(Writer { dir: dir.to_path_buf(), csv, series_csv, snapshots: Vec::new() })
    }

    fn row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        writeln!(self.csv, "{}", csv_line(&row.columns())).map_err(|e| Error::io(&self.series_csv, e))
    }

    fn snapshot(&mut self, params: &FlowParams, snap: &Snapshot) -> Result<()> {
        let file = SnapshotFile {
            schema: SCHEMA_VERSION,
            t: snap.t,
            n: params.n,
            p: params.p,
            function: params.function,
            mode: params.mode.to_string(),
            resolution: params.resolution,
            u: &snap.u,
            kappa_min: snap.kappa_min,
            kappa_max: snap.kappa_max,
        };
        let path = self.dir.join("snapshots").join(format!("t{:013.6}.json", snap.t));
        write_atomic(&path, &serde_json::to_vec_pretty(&file)?)?;
        self.snapshots.push(path);
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.csv.flush().map_err(|e| Error::io(&self.series_csv, e))
    }
}

fn sweep(config: &RunConfig, dir: &Path) -> Vec<SweepEntry> {
    let InitialSpec::Legendre { r0, l, .. } = config.initial else {
        return Vec::new();
    };
    let osc_p = legendre_oscillation(l);
    config.flow.exec.map_items(&config.osc_sweep, |&osc| {
        let amplitude = osc / osc_p;
        let mut child = config.clone();
        child.initial = InitialSpec::Legendre { r0, l, amplitude };
        child.osc_sweep.clear();
        child.out_dir = dir.join("sweep").join(format!("osc_{osc}"));
        let (status, error, kappa_dev) = match execute(&child) {
            Ok(a) => (RunStatus::Completed, None, a.summary.fits.get("kappa_dev").cloned()),
            Err(e) => (RunStatus::Aborted, Some(e.to_string()), None),
        };
        SweepEntry { osc, amplitude, status, error, kappa_dev, dir: child.out_dir }
    })
}

/// Runs `config`, streaming diagnostics rows to `series.csv` and writing
/// snapshots and a summary. On failure the summary is still written, with
/// status `aborted`, before the error is returned.
pub fn execute(config: &RunConfig) -> Result<RunArtifacts> {
    let started = Instant::now();
    let dir = config.out_dir.clone();
    let params = &config.flow;
    let mut writer = Writer::open(&dir)?;
    let summary_json = dir.join("summary.json");

    let outcome = (|| -> Result<(DiagnosticsSeries, ScalarField)> {
        params.validate()?;
        let u0 = initial_condition(&config.initial)?.sample(params.build_grid()?)?;
        let mut series = DiagnosticsSeries::default();
        run_observed(params, u0.clone(), |ev| match ev {
            FlowEvent::Sample { row, .. } => {
                series.push(*row);
                writer.row(row)
            }
            FlowEvent::Snapshot { state } => writer.snapshot(params, &Snapshot::of(state)),
        })?;
        Ok((series, u0))
    })();
    writer.flush()?;

    let sweep = if config.osc_sweep.is_empty() { Vec::new() } else { sweep(config, &dir) };
    let mut files = vec![writer.series_csv.clone()];
    files.extend(writer.snapshots.iter().cloned());
    let mut summary = Summary {
        schema: SCHEMA_VERSION,
        status: RunStatus::Completed,
        error: None,
        config: config.clone(),
        target_rate: 2.0 / params.n_pow_p(),
        fit_window: None,
        fits: BTreeMap::new(),
        envelope: None,
        verdicts: BTreeMap::new(),
        files,
        sweep,
        wall_time_s: 0.0,
    };
    let result = match outcome {
        Ok((series, u0)) => {
            let a = analyse(params, &u0, &series);
            summary.fit_window = a.window;
            summary.fits = a.fits;
            summary.envelope = a.envelope;
            summary.verdicts = a.verdicts;
            Ok(())
        }
        Err(e) => {
            summary.status = RunStatus::Aborted;
            summary.error = Some(e.to_string());
            Err(e)
        }
    };
    summary.wall_time_s = started.elapsed().as_secs_f64();
    write_atomic(&summary_json, &serde_json::to_vec_pretty(&summary)?)?;
    result?;
    Ok(RunArtifacts {
        dir,
        series_csv: writer.series_csv.clone(),
        snapshots: writer.snapshots.clone(),
        summary_json,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn presets_round_trip_and_unknown_name_fails() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            assert_eq!(parse_config(&c.to_toml()).unwrap(), c, "{name}");
        }
        assert!(matches!(preset("torus"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn legendre_oscillations() {
        assert!((legendre_oscillation(2) - 1.5).abs() < 1e-12);
        assert!((legendre_oscillation(3) - 2.0).abs() < 1e-12);
        assert!((legendre_oscillation(4) - (1.0 + 3.0 / 7.0)).abs() < 1e-7);
    }

    #[test]
    fn csv_cells_carry_seventeen_digits() {
        let line = csv_line(&[Some(0.1), None, Some(-2.0)]);
        assert_eq!(line, "1.0000000000000001e-1,,-2.0000000000000000e0");
        let back: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.1);
    }
}
