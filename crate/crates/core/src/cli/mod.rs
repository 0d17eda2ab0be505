//! Configuration-driven runner: experiment execution, parameter sweeps,
//! re-analysis of external decay data, and report emission.

pub mod config;
pub mod presets;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::engine::{run_experiment, run_xrb, write_points_csv, DecayPoint, ExperimentData, RunOptions};
use crate::error::{Error, Result};
use crate::estimators::{
    analyze_pair, point_kind, unitarity_from_xrb, xrb_infidelity_bounds, AnalysisSettings, Asymptote, EstimatorMethod,
    InfidelityEstimate, PointKind, UnitarityEstimate,
};
use crate::gauge::{scg_interleaved_infidelity, GaugeReport};
use crate::groups::TwirlGroupKind;
use crate::noise::interleaved_error_infidelity;
use crate::protocols::ProtocolSpec;

pub use config::ExperimentConfig;
use config::cfg_err;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "IRBENCH_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "irbench-out";

/// Loads a config file, or an embedded preset when no such file exists.
pub fn load_config(arg: &str) -> Result<ExperimentConfig> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path)?;
        return ExperimentConfig::from_json(&text);
    }
    match presets::get(arg) {
        Some(text) => ExperimentConfig::from_json(text),
        None => Err(cfg_err(".", format!("`{arg}` is neither a readable file nor a preset name ({})", presets::names().join(", ")))),
    }
}

/// `--out`, then the config's `output_dir`, then the environment, then the default.
pub fn output_dir(flag: Option<&Path>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool_version: &'static str,
    pub seed: u64,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub timestamp: u64,
}

impl Provenance {
    fn new(cfg: &ExperimentConfig) -> Self {
        let digest = Sha256::digest(cfg.canonical_json().as_bytes());
        Provenance {
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReport {
    #[serde(flatten)]
    pub estimate: InfidelityEstimate,
    pub scg: Option<GaugeReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub name: Option<String>,
    pub exact: bool,
    /// Process infidelity of the error attached to the interleaved gate.
    pub theoretical_infidelity: f64,
    pub unitarity: Option<UnitarityEstimate>,
    pub estimates: Vec<ProtocolReport>,
    pub provenance: Provenance,
}

impl Report {
    pub fn estimate(&self, group: TwirlGroupKind) -> Option<&ProtocolReport> {
        self.estimates.iter().find(|e| e.estimate.protocol == group.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Everything produced by one run, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: Report,
    pub experiments: Vec<(TwirlGroupKind, ExperimentData, ExperimentData)>,
    pub xrb_points: Option<Vec<DecayPoint>>,
}

fn kinds(group: TwirlGroupKind, exact: bool) -> (PointKind, PointKind) {
    let k = point_kind(group, exact);
    (k, k)
}

/// Runs every protocol pair of the config.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let noise = cfg.noise_model()?;
    let gate = cfg.interleaved_gate.unitary();
    let opts = RunOptions { exact: cfg.exact };
    let theory = interleaved_error_infidelity(&noise.model, &gate)?;

    let (unitarity, xrb_points) = if cfg.xrb.enabled {
        let x = &cfg.xrb;
        let spec = ProtocolSpec::new(TwirlGroupKind::Clifford2, None, x.depths.clone(), x.circuits * x.depths.len(), cfg.seed)?;
        let data = run_xrb(&spec, &noise, x.shots_per_observable, opts)?;
        (Some(unitarity_from_xrb(&data.points)?), Some(data.points))
    } else {
        (None, None)
    };

    let settings = cfg.analysis_settings();
    let mut estimates = Vec::new();
    let mut experiments = Vec::new();
    for p in &cfg.protocols {
        let (rs, is) = cfg.protocol_specs(p)?;
        let rd = run_experiment(&rs, &noise, opts)?;
        let id = run_experiment(&is, &noise, opts)?;
        let mut estimate = analyze_pair(p.group, &rd.points, &id.points, kinds(p.group, cfg.exact), &settings)?;
        if let Some(u) = &unitarity {
            attach_xrb(&mut estimate, u.u);
        }
        let scg = if cfg.gauge.enabled {
            Some(scg_interleaved_infidelity(p.group, &noise, &gate, &cfg.gauge.settings(), cfg.seed)?)
        } else {
            None
        };
        estimates.push(ProtocolReport { estimate, scg });
        experiments.push((p.group, rd, id));
    }
    let report = Report {
        name: cfg.name.clone(),
        exact: cfg.exact,
        theoretical_infidelity: theory,
        unitarity,
        estimates,
        provenance: Provenance::new(cfg),
    };
    Ok(RunArtifacts { report, experiments, xrb_points })
}

/// Adds XRB bounds, or an `xrb_inconsistent` flag when the unitarity cannot support them.
pub fn attach_xrb(est: &mut InfidelityEstimate, u: f64) {
    match xrb_infidelity_bounds(est.eps_interleaved, est.eps_reference, u) {
        Ok(b) => est.xrb_bounds = Some(b),
        Err(e) => {
            log::warn!("no XRB bounds for {}: {e}", est.protocol);
            est.flags.push("xrb_inconsistent".into());
        }
    }
}

fn curve_rows(points: &[DecayPoint], fits: &Value) -> Vec<(usize, String, f64, f64, f64)> {
    points
        .iter()
        .map(|pt| {
            let f = &fits[&pt.label];
            let (a, p, b) = (f["A"].as_f64(), f["p"].as_f64(), f["B"].as_f64());
            let fit = match (a, p, b) {
                (Some(a), Some(p), Some(b)) => a * p.powi(pt.depth as i32) + b,
                _ => f64::NAN,
            };
            (pt.depth, pt.label.clone(), pt.mean, pt.stderr, fit)
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the report, decay tables, raw shots and plot data; returns the files written.
pub fn write_artifacts(art: &RunArtifacts, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let report_path = dir.join("report.json");
    fs::write(&report_path, art.report.to_json() + "\n")?;
    files.push(report_path);

    for (group, rd, id) in &art.experiments {
        let est = art.report.estimate(*group).map(|r| &r.estimate);
        for (kind, data) in [("reference", rd), ("interleaved", id)] {
            let stem = format!("{}_{kind}", group.name());
            let points_path = dir.join(format!("decay_{stem}.csv"));
            write_points_csv(&data.points, &points_path)?;
            let shots_path = dir.join(format!("shots_{stem}.csv"));
            data.write_shots_csv(&shots_path)?;
            let curve_path = dir.join(format!("curve_{stem}.csv"));
            let mut w = csv::Writer::from_path(&curve_path)?;
            w.write_record(["depth", "label", "mean", "stderr", "fit"])?;
            let fits = est.map(|e| e.fit[kind].clone()).unwrap_or(Value::Null);
            for (m, label, mean, se, fit) in curve_rows(&data.points, &fits) {
                w.write_record([m.to_string(), label, mean.to_string(), se.to_string(), fit.to_string()])?;
            }
            w.flush()?;
            files.extend([points_path, shots_path, curve_path]);
        }
    }

    let est_path = dir.join("estimates.csv");
    let mut w = csv::Writer::from_path(&est_path)?;
    w.write_record([
        "protocol", "epsilon", "stat_low", "stat_high", "sys_low", "sys_high", "xrb_low", "xrb_high", "scg", "theory",
    ])?;
    for r in &art.report.estimates {
        let e = &r.estimate;
        w.write_record([
            e.protocol.clone(),
            e.epsilon.to_string(),
            opt(e.stat_ci.map(|c| c.0)),
            opt(e.stat_ci.map(|c| c.1)),
            e.sys_bounds.0.to_string(),
            e.sys_bounds.1.to_string(),
            opt(e.xrb_bounds.map(|c| c.0)),
            opt(e.xrb_bounds.map(|c| c.1)),
            opt(r.scg.as_ref().map(|s| s.scg_infidelity)),
            art.report.theoretical_infidelity.to_string(),
        ])?;
    }
    w.flush()?;
    files.push(est_path);

    if let Some(points) = &art.xrb_points {
        let p = dir.join("decay_xrb.csv");
        write_points_csv(points, &p)?;
        files.push(p);
    }
    Ok(files)
}

/// Inclusive `start:stop:step` grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || cfg_err("--grid", format!("expected start:stop:step, got `{s}`"));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub protocol: String,
    pub epsilon: f64,
    pub eps_reference: f64,
    pub eps_interleaved: f64,
    pub sys_low: f64,
    pub sys_high: f64,
    pub sys_width: f64,
    pub stat_low: Option<f64>,
    pub stat_high: Option<f64>,
    pub theory: f64,
}

/// Re-runs the config over a grid of one error-model parameter.
pub fn sweep(cfg: &ExperimentConfig, param: &str, grid: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &v in grid {
        let mut c = cfg.clone();
        c.error_model.set_param(param, v)?;
        c.gauge.enabled = false;
        c.xrb.enabled = false;
        let art = execute(&c)?;
        for r in art.report.estimates {
            let e = r.estimate;
            rows.push(SweepRow {
                value: v,
                protocol: e.protocol.clone(),
                epsilon: e.epsilon,
                eps_reference: e.eps_reference,
                eps_interleaved: e.eps_interleaved,
                sys_low: e.sys_bounds.0,
                sys_high: e.sys_bounds.1,
                sys_width: e.sys_width(),
                stat_low: e.stat_ci.map(|c| c.0),
                stat_high: e.stat_ci.map(|c| c.1),
                theory: art.report.theoretical_infidelity,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], param: &str, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        param, "protocol", "epsilon", "eps_reference", "eps_interleaved", "sys_low", "sys_high", "sys_width", "stat_low",
        "stat_high", "theory",
    ])?;
    for r in rows {
        w.write_record([
            r.value.to_string(),
            r.protocol.clone(),
            r.epsilon.to_string(),
            r.eps_reference.to_string(),
            r.eps_interleaved.to_string(),
            r.sys_low.to_string(),
            r.sys_high.to_string(),
            r.sys_width.to_string(),
            opt(r.stat_low),
            opt(r.stat_high),
            r.theory.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `depth,label,mean,stderr,n` table, reporting the line of the first bad row.
pub fn read_points(text: &str) -> Result<Vec<DecayPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::InputLine { line: 1, message: e.to_string() })?.clone();
    let expected = ["depth", "label", "mean", "stderr", "n"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::InputLine { line: 1, message: format!("header must be {}", expected.join(",")) });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::InputLine {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |message: String| Error::InputLine { line, message };
        let p: DecayPoint = rec.deserialize(Some(&headers)).map_err(|e| bad(e.to_string()))?;
        if p.depth == 0 {
            return Err(bad("depth must be at least 1".into()));
        }
        if !p.mean.is_finite() || !p.stderr.is_finite() || p.stderr < 0.0 {
            return Err(bad("mean and stderr must be finite with stderr ≥ 0".into()));
        }
        if p.n == 0 {
            return Err(bad("n must be positive".into()));
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::InputLine { line: 2, message: "no data rows".into() });
    }
    Ok(out)
}

/// Metadata accompanying external decay tables.
#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Inferred from the labels when absent.
    pub group: Option<TwirlGroupKind>,
    /// Inferred from the means when absent.
    pub kind: Option<PointKind>,
    pub settings: AnalysisSettings,
}


fn infer_group(points: &[DecayPoint]) -> TwirlGroupKind {
    if points.iter().any(|p| p.label == "q0" || p.label == "q1") {
        TwirlGroupKind::LocalClifford
    } else if points.iter().any(|p| p.label.len() == 2 && p.label != "00") {
        TwirlGroupKind::Pauli
    } else {
        TwirlGroupKind::Clifford2
    }
}

/// Shot counts are integral for sampled data; anything else is treated as exact-mode data.
fn infer_kind(group: TwirlGroupKind, points: &[DecayPoint]) -> PointKind {
    let shot_kind = point_kind(group, false);
    let integral = |x: f64| (x - x.round()).abs() < 1e-6;
    let sampled = points.iter().all(|p| {
        let n = p.n as f64;
        match shot_kind {
            PointKind::Parity => integral(0.5 * (1.0 + p.mean) * n),
            _ => integral(p.mean * n),
        }
    });
    if sampled {
        shot_kind
    } else {
        PointKind::Continuous
    }
}

/// Fit → estimator → bounds → bootstrap on externally supplied decay tables.
pub fn ingest(ref_points: &[DecayPoint], int_points: &[DecayPoint], opts: &IngestOptions) -> Result<InfidelityEstimate> {
    let group = opts.group.unwrap_or_else(|| infer_group(ref_points));
    let kind = |pts: &[DecayPoint]| opts.kind.unwrap_or_else(|| infer_kind(group, pts));
    let mut settings = opts.settings;
    let unitarity = settings.unitarity.take();
    let mut est = analyze_pair(group, ref_points, int_points, (kind(ref_points), kind(int_points)), &settings)?;
    if let Some(u) = unitarity {
        attach_xrb(&mut est, u);
    }
    Ok(est)
}

pub fn parse_group(s: &str) -> Result<TwirlGroupKind> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| cfg_err("--group", format!("unknown group `{s}`")))
}

pub fn parse_method(s: &str) -> Result<EstimatorMethod> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| cfg_err("--method", format!("unknown method `{s}`")))
}

pub fn parse_asymptote(s: &str) -> Result<Asymptote> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| cfg_err("--asymptote", format!("unknown asymptote `{s}`")))
}

pub fn parse_kind(s: &str) -> Result<PointKind> {
    match s {
        "binary" => Ok(PointKind::Binary),
        "parity" => Ok(PointKind::Parity),
        "continuous" => Ok(PointKind::Continuous),
        _ => Err(cfg_err("--kind", format!("unknown point kind `{s}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        let g = parse_grid("0:2:0.25").unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[8] - 2.0).abs() < 1e-12);
        assert!(parse_grid("0:2").is_err());
        assert!(parse_grid("0:2:0").is_err());
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "depth,label,mean,stderr,n\n4,00,0.9,0.01,300\n8,00,abc,0.01,300\n";
        match read_points(text) {
            Err(Error::InputLine { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_points("d,l\n1,2\n"), Err(Error::InputLine { line: 1, .. })));
    }

    #[test]
    fn kind_inference() {
        let pt = |mean: f64| DecayPoint { depth: 4, label: "00".into(), mean, stderr: 0.01, n: 300 };
        assert_eq!(infer_kind(TwirlGroupKind::Clifford2, &[pt(270.0 / 300.0)]), PointKind::Binary);
        assert_eq!(infer_kind(TwirlGroupKind::Clifford2, &[pt(0.9012345)]), PointKind::Continuous);
        assert_eq!(infer_kind(TwirlGroupKind::Pauli, &[pt((2.0 * 290.0 - 300.0) / 300.0)]), PointKind::Parity);
    }

    #[test]
    fn group_inference() {
        let pt = |label: &str| DecayPoint { depth: 4, label: label.into(), mean: 0.9, stderr: 0.01, n: 300 };
        assert_eq!(infer_group(&[pt("q0"), pt("q1")]), TwirlGroupKind::LocalClifford);
        assert_eq!(infer_group(&[pt("XZ")]), TwirlGroupKind::Pauli);
        assert_eq!(infer_group(&[pt("00")]), TwirlGroupKind::Clifford2);
    }
}
