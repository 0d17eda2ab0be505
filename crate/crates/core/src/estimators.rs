//! Decay fitting, interleaved-gate estimators, bounds and bootstrap intervals.
//!
//! Everything downstream of the simulator works on [`DecayPoint`]s, so
//! externally measured decay tables go through exactly the same path.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{depolarizing_parameter_from_infidelity, infidelity_from_depolarizing_parameter};
use crate::engine::DecayPoint;
use crate::error::{Error, Result};
use crate::groups::TwirlGroupKind;
use crate::pauli::PauliString;
use crate::rng::{stream, Domain};

const D: usize = 4;
const WEIGHT_FLOOR: f64 = 1e-4;
const AB_WINDOW: (f64, f64) = (-0.1, 1.1);
const P_RANGE: (f64, f64) = (1e-3, 1.5);

/// Decay model fitted to one label's points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `A·p^m + B`; `b0` seeds the initial guess.
    ApB { b0: f64 },
    /// `A·p^m + b` with the asymptote held at `b`.
    FixedB { b: f64 },
    /// `A·p^m`.
    AOnly,
}

impl DecayModel {
    fn fixed_b(self) -> Option<f64> {
        match self {
            DecayModel::ApB { .. } => None,
            DecayModel::FixedB { b } => Some(b),
            DecayModel::AOnly => Some(0.0),
        }
    }

    fn num_params(self) -> usize {
        if self.fixed_b().is_some() {
            2
        } else {
            3
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub label: String,
    pub model: DecayModel,
    #[serde(rename = "A")]
    pub a: f64,
    pub p: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Parameter covariance in the order `(A, p[, B])`.
    #[serde(skip)]
    pub covariance: DMatrix<f64>,
    #[serde(rename = "chi2")]
    pub chi2_red: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl DecayFit {
    pub fn p_stderr(&self) -> f64 {
        self.covariance[(1, 1)].max(0.0).sqrt()
    }

    pub fn predict(&self, m: f64) -> f64 {
        self.a * self.p.powf(m) + self.b
    }
}

struct Series {
    m: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    n: Vec<f64>,
}

impl Series {
    fn new(points: &[DecayPoint]) -> Self {
        let mut pts: Vec<&DecayPoint> = points.iter().collect();
        pts.sort_by_key(|p| p.depth);
        Series {
            m: pts.iter().map(|p| p.depth as f64).collect(),
            y: pts.iter().map(|p| p.mean).collect(),
            w: pts.iter().map(|p| 1.0 / p.stderr.max(WEIGHT_FLOOR).powi(2)).collect(),
            n: pts.iter().map(|p| p.n.max(1) as f64).collect(),
        }
    }

    fn sse(&self, a: f64, p: f64, b: f64) -> f64 {
        self.m.iter().zip(&self.y).zip(&self.w).map(|((m, y), w)| w * (y - a * p.powf(*m) - b).powi(2)).sum()
    }
}

fn clip(x: f64) -> f64 {
    x.clamp(AB_WINDOW.0, AB_WINDOW.1)
}

/// Optimal linear parameters at fixed `p` within the sanity window.
fn linear_part(s: &Series, p: f64, model: DecayModel) -> (f64, f64) {
    let f: Vec<f64> = s.m.iter().map(|m| p.powf(*m)).collect();
    let (mut sw, mut swf, mut swff, mut swy, mut swfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..f.len() {
        let w = s.w[i];
        sw += w;
        swf += w * f[i];
        swff += w * f[i] * f[i];
        swy += w * s.y[i];
        swfy += w * f[i] * s.y[i];
    }
    let a_given_b = |b: f64| if swff > 0.0 { clip((swfy - b * swf) / swff) } else { 0.0 };
    match model.fixed_b() {
        Some(b) => (a_given_b(b), b),
        None => {
            let det = sw * swff - swf * swf;
            if det.abs() > 1e-300 {
                let a = (sw * swfy - swf * swy) / det;
                let b = (swff * swy - swf * swfy) / det;
                if (AB_WINDOW.0..=AB_WINDOW.1).contains(&a) && (AB_WINDOW.0..=AB_WINDOW.1).contains(&b) {
                    return (a, b);
                }
            }
            let b_given_a = |a: f64| clip((swy - a * swf) / sw);
            let mut cands = Vec::with_capacity(8);
            for bound in [AB_WINDOW.0, AB_WINDOW.1] {
                cands.push((bound, b_given_a(bound)));
                cands.push((a_given_b(bound), bound));
            }
            cands
                .into_iter()
                .min_by(|x, y| s.sse(x.0, p, x.1).total_cmp(&s.sse(y.0, p, y.1)))
                .expect("non-empty")
        }
    }
}

fn profile(s: &Series, p: f64, model: DecayModel) -> f64 {
    let (a, b) = linear_part(s, p, model);
    s.sse(a, p, b)
}

fn initial_guess(s: &Series, model: DecayModel) -> Option<f64> {
    let b0 = match model {
        DecayModel::ApB { b0 } => b0,
        DecayModel::FixedB { b } => b,
        DecayModel::AOnly => 0.0,
    };
    let pts: Vec<(f64, f64)> = s.m.iter().zip(&s.y).filter(|(_, y)| **y - b0 > 1e-6).map(|(m, y)| (*m, (y - b0).ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| (sxy / sxx).exp()).filter(|p| p.is_finite())
}

fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

fn jacobian(s: &Series, a: f64, p: f64, model: DecayModel) -> DMatrix<f64> {
    let k = model.num_params();
    DMatrix::from_fn(s.m.len(), k, |i, j| {
        let m = s.m[i];
        match j {
            0 => p.powf(m),
            1 => a * m * p.powf(m - 1.0),
            _ => 1.0,
        }
    })
}

/// Gauss-Newton polish of all parameters from the profiled optimum.
fn polish(s: &Series, mut theta: [f64; 3], model: DecayModel) -> [f64; 3] {
    let k = model.num_params();
    let mut best = s.sse(theta[0], theta[1], theta[2]);
    for _ in 0..20 {
        let j = jacobian(s, theta[0], theta[1], model);
        let r = DVector::from_iterator(s.m.len(), (0..s.m.len()).map(|i| s.y[i] - theta[0] * theta[1].powf(s.m[i]) - theta[2]));
        let w = DMatrix::from_diagonal(&DVector::from_vec(s.w.clone()));
        let jtw = j.transpose() * &w;
        let Some(step) = (&jtw * &j).lu().solve(&(&jtw * r)) else { break };
        let mut cand = theta;
        for i in 0..k {
            cand[i] += step[i];
        }
        let inside = (AB_WINDOW.0..=AB_WINDOW.1).contains(&cand[0])
            && (AB_WINDOW.0..=AB_WINDOW.1).contains(&cand[2])
            && cand[1] > P_RANGE.0
            && cand[1] < P_RANGE.1;
        let val = s.sse(cand[0], cand[1], cand[2]);
        if !inside || !(val <= best) {
            break;
        }
        let done = step.norm() < 1e-15;
        theta = cand;
        best = val;
        if done {
            break;
        }
    }
    theta
}

/// How fit weights are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// `1/stderr²` from the points as given.
    Empirical,
    /// `1/stderr²` from the binomial variance of the fitted curve, iterated
    /// to convergence. Avoids infinite weights where every shot agreed.
    Model(PointKind),
}

/// Weighted least-squares fit of one label's decay.
pub fn fit_decay(points: &[DecayPoint], model: DecayModel) -> Result<DecayFit> {
    fit_decay_weighted(points, model, Weighting::Empirical)
}

pub fn fit_decay_weighted(points: &[DecayPoint], model: DecayModel, weighting: Weighting) -> Result<DecayFit> {
    let label = points.first().map(|p| p.label.clone()).unwrap_or_default();
    let mut depths: Vec<usize> = points.iter().map(|p| p.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    let need = model.num_params();
    if depths.len() < need || depths.len() != points.len() {
        return Err(Error::IncompleteData(format!(
            "label `{label}` needs {need} distinct depths with one point each, got {} points over {} depths",
            points.len(),
            depths.len()
        )));
    }
    let mut s = Series::new(points);
    let mut fit = fit_series(&s, model, &label, None)?;
    let kind = match weighting {
        Weighting::Model(k) if k != PointKind::Continuous => k,
        _ => return Ok(fit),
    };
    for _ in 0..20 {
        for i in 0..s.m.len() {
            let mu = fit.predict(s.m[i]);
            let n = s.n[i];
            // Success probability, pulled off 0 and 1 by half a count.
            let q = match kind {
                PointKind::Binary => mu,
                _ => 0.5 * (1.0 + mu),
            }
            .clamp(0.0, 1.0);
            let q = (n * q + 0.5) / (n + 1.0);
            let scale = if kind == PointKind::Binary { 1.0 } else { 4.0 };
            s.w[i] = 1.0 / (scale * q * (1.0 - q) / n).sqrt().max(WEIGHT_FLOOR).powi(2);
        }
        let next = fit_series(&s, model, &label, Some(fit.p))?;
        let done = (next.p - fit.p).abs() < 1e-13;
        fit = next;
        if done {
            break;
        }
    }
    Ok(fit)
}

/// `warm` narrows the search to a bracket around a previous optimum.
fn fit_series(s: &Series, model: DecayModel, label: &str, warm: Option<f64>) -> Result<DecayFit> {
    let label = label.to_string();
    let f = |p: f64| profile(s, p, model);
    let (lo, hi, grid) = match warm {
        Some(p) => ((p - 0.02).max(P_RANGE.0), (p + 0.02).min(P_RANGE.1), 16),
        None => (P_RANGE.0, P_RANGE.1, 240),
    };
    let mut cands: Vec<f64> = (0..=grid).map(|i| lo + (hi - lo) * i as f64 / grid as f64).collect();
    if let Some(p0) = warm.or_else(|| initial_guess(s, model)).filter(|p| *p > P_RANGE.0 && *p < P_RANGE.1) {
        cands.push(p0);
    }
    cands.sort_by(f64::total_cmp);
    let vals: Vec<f64> = cands.iter().map(|p| f(*p)).collect();
    let (best_i, _) = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::FitFailure { reason: "objective is not finite".into(), residuals: vec![] })?;
    let lo = cands[best_i.saturating_sub(1)];
    let hi = cands[(best_i + 1).min(cands.len() - 1)];
    let p_star = golden(f, lo, hi);
    let (a_star, b_star) = linear_part(s, p_star, model);
    let [a, p, b] = polish(s, [a_star, p_star, b_star], model);
    let residuals: Vec<f64> = s.m.iter().zip(&s.y).map(|(m, y)| y - a * p.powf(*m) - b).collect();
    if p <= P_RANGE.0 + 1e-9 || p >= P_RANGE.1 - 1e-9 || !p.is_finite() {
        return Err(Error::FitFailure { reason: format!("decay parameter for `{label}` ran to the search boundary ({p})"), residuals });
    }
    let j = jacobian(s, a, p, model);
    let w = DMatrix::from_diagonal(&DVector::from_vec(s.w.clone()));
    let info = j.transpose() * w * &j;
    let covariance = info.try_inverse().ok_or_else(|| Error::FitFailure {
        reason: format!("singular information matrix for `{label}`"),
        residuals: residuals.clone(),
    })?;
    let dof = s.m.len().saturating_sub(j.ncols());
    let chi2_red = if dof > 0 { s.sse(a, p, b) / dof as f64 } else { 0.0 };
    Ok(DecayFit { label, model, a, p, b, covariance, chi2_red, residuals })
}

/// Fits for every label of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolFit {
    pub group: TwirlGroupKind,
    pub interleaved: bool,
    pub fits: BTreeMap<String, DecayFit>,
}

/// Whether survival decays keep their asymptote free or fixed at the
/// fully mixed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Asymptote {
    #[default]
    Fixed,
    Free,
}

/// Decay model used for each protocol's labels.
pub fn model_for(group: TwirlGroupKind, interleaved: bool, asymptote: Asymptote) -> DecayModel {
    let b = match (group, interleaved) {
        (TwirlGroupKind::Pauli, _) => return DecayModel::AOnly,
        (TwirlGroupKind::LocalClifford, false) => 0.5,
        _ => 1.0 / D as f64,
    };
    match asymptote {
        Asymptote::Fixed => DecayModel::FixedB { b },
        Asymptote::Free => DecayModel::ApB { b0: b },
    }
}

pub fn group_points(points: &[DecayPoint]) -> BTreeMap<String, Vec<DecayPoint>> {
    let mut out: BTreeMap<String, Vec<DecayPoint>> = BTreeMap::new();
    for p in points {
        out.entry(p.label.clone()).or_default().push(p.clone());
    }
    out
}

/// Fit settings shared by every label of a protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    pub asymptote: Asymptote,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { asymptote: Asymptote::Fixed, weighting: Weighting::Empirical }
    }
}

pub fn fit_protocol(points: &[DecayPoint], group: TwirlGroupKind, interleaved: bool, opts: FitOptions) -> Result<ProtocolFit> {
    let model = model_for(group, interleaved, opts.asymptote);
    let fits = group_points(points)
        .into_iter()
        .map(|(label, pts)| fit_decay_weighted(&pts, model, opts.weighting).map(|f| (label, f)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ProtocolFit { group, interleaved, fits })
}

/// Process infidelity implied by a protocol's fitted decays.
pub fn protocol_infidelity(fit: &ProtocolFit) -> Result<f64> {
    let get = |label: &str| {
        fit.fits
            .get(label)
            .map(|f| f.p)
            .ok_or_else(|| Error::IncompleteData(format!("missing decay for label `{label}`")))
    };
    match (fit.group, fit.interleaved) {
        (TwirlGroupKind::Pauli, _) => {
            let mut total = 1.0;
            for p in PauliString::non_identity(2) {
                total += get(&p.to_string())?;
            }
            Ok(1.0 - total / (D * D) as f64)
        }
        (TwirlGroupKind::LocalClifford, false) => {
            let (pa, pb) = (get("q0")?, get("q1")?);
            Ok(1.0 - local_clifford_fidelity(pa, pb))
        }
        _ => infidelity_from_depolarizing_parameter(get("00")?, D),
    }
}

/// Two-qubit process fidelity of two independent single-qubit depolarizing decays.
pub fn local_clifford_fidelity(pa: f64, pb: f64) -> f64 {
    (1.0 + 3.0 * pa) * (1.0 + 3.0 * pb) / 16.0
}

/// `ε̂ = 1 − (1 − ε_EF)/(1 − ε_E)`.
pub fn interleaved_estimate_ratio(eps_ef: f64, eps_e: f64) -> Result<f64> {
    if eps_e >= 1.0 {
        return Err(Error::DivisionDomain(format!("reference infidelity {eps_e} must be below 1")));
    }
    Ok(1.0 - (1.0 - eps_ef) / (1.0 - eps_e))
}

/// `ε̂ = (d²−1)/d²·(1 − p_EF/p_E)`.
pub fn interleaved_estimate_irb(p_ef: f64, p_e: f64, d: usize) -> Result<f64> {
    if p_e == 0.0 {
        return Err(Error::DivisionDomain("reference decay parameter is zero".into()));
    }
    let d2 = (d * d) as f64;
    Ok((d2 - 1.0) / d2 * (1.0 - p_ef / p_e))
}

/// Bounds on the interleaved infidelity from dressed and reference infidelities.
///
/// Returns `(low, high, clipped)`; inputs outside `[0, 1]` are clipped first.
pub fn systematic_bounds(eps_ef: f64, eps_e: f64) -> (f64, f64, bool) {
    let (x, y) = (eps_ef.clamp(0.0, 1.0), eps_e.clamp(0.0, 1.0));
    let clipped = x != eps_ef || y != eps_e;
    if clipped {
        log::warn!("systematic bounds: inputs ({eps_ef}, {eps_e}) clipped to [0, 1]");
    }
    let s = x + y - 2.0 * x * y;
    let w = 2.0 * ((1.0 - x) * (1.0 - y) * x * y).sqrt();
    (s - w, s + w, clipped)
}

/// Interval for `p(Y)` from `p(XY)`, `p(X)` and the unitarity `u(X)`.
pub fn xrb_bounds(p_xy: f64, p_x: f64, u_x: f64) -> Result<(f64, f64)> {
    const TOL: f64 = 1e-9;
    if u_x <= 0.0 {
        return Err(Error::InconsistentMeasurements(format!("unitarity {u_x} must be positive")));
    }
    let r1 = 1.0 - p_x * p_x / u_x;
    let r2 = 1.0 - p_xy * p_xy / u_x;
    if r1 < -TOL || r2 < -TOL {
        return Err(Error::InconsistentMeasurements(format!(
            "unitarity {u_x} is below the squared decay parameters ({:.6}, {:.6})",
            p_x * p_x,
            p_xy * p_xy
        )));
    }
    let center = p_xy * p_x / u_x;
    let half = r1.max(0.0).sqrt() * r2.max(0.0).sqrt();
    Ok((center - half, center + half))
}

/// XRB interval converted to infidelities of the interleaved gate.
pub fn xrb_infidelity_bounds(eps_ef: f64, eps_e: f64, u_x: f64) -> Result<(f64, f64)> {
    let p_x = depolarizing_parameter_from_infidelity(eps_e, D)?;
    let p_xy = depolarizing_parameter_from_infidelity(eps_ef, D)?;
    let (lo, hi) = xrb_bounds(p_xy, p_x, u_x)?;
    Ok((infidelity_from_depolarizing_parameter(hi, D)?, infidelity_from_depolarizing_parameter(lo, D)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    #[default]
    Ratio,
    Irb,
}

/// Point estimate of the interleaved infidelity from two decay tables.
#[derive(Debug, Clone)]
pub struct PairEstimate {
    pub reference: ProtocolFit,
    pub interleaved: ProtocolFit,
    pub eps_ref: f64,
    pub eps_int: f64,
    pub epsilon: f64,
}

pub fn estimate_pair(
    group: TwirlGroupKind,
    ref_points: &[DecayPoint],
    int_points: &[DecayPoint],
    method: EstimatorMethod,
    opts: (FitOptions, FitOptions),
) -> Result<PairEstimate> {
    let reference = fit_protocol(ref_points, group, false, opts.0)?;
    let interleaved = fit_protocol(int_points, group, true, opts.1)?;
    let eps_ref = protocol_infidelity(&reference)?;
    let eps_int = protocol_infidelity(&interleaved)?;
    let epsilon = match method {
        EstimatorMethod::Ratio => interleaved_estimate_ratio(eps_int, eps_ref)?,
        EstimatorMethod::Irb => interleaved_estimate_irb(
            depolarizing_parameter_from_infidelity(eps_int, D)?,
            depolarizing_parameter_from_infidelity(eps_ref, D)?,
            D,
        )?,
    };
    Ok(PairEstimate { reference, interleaved, eps_ref, eps_int, epsilon })
}

/// How a point's mean was formed, which fixes its resampling law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    /// Mean of `0/1` outcomes.
    Binary,
    /// Mean of `±1` outcomes.
    Parity,
    /// Mean of real-valued samples; resampled from a normal law.
    Continuous,
}

/// Resampling law for decay data of a given protocol.
pub fn point_kind(group: TwirlGroupKind, exact: bool) -> PointKind {
    match (exact, group) {
        (true, _) => PointKind::Continuous,
        (false, TwirlGroupKind::Pauli) => PointKind::Parity,
        (false, _) => PointKind::Binary,
    }
}

/// One bootstrap replicate of a decay table.
pub fn resample_points<R: Rng + ?Sized>(points: &[DecayPoint], kind: PointKind, rng: &mut R) -> Vec<DecayPoint> {
    points
        .iter()
        .map(|p| {
            let n = p.n.max(1);
            let nf = n as f64;
            let (mean, stderr) = match kind {
                PointKind::Binary | PointKind::Parity => {
                    let q = match kind {
                        PointKind::Binary => p.mean,
                        _ => 0.5 * (1.0 + p.mean),
                    }
                    .clamp(0.0, 1.0);
                    let k = Binomial::new(n as u64, q).expect("valid probability").sample(rng) as f64;
                    let frac = k / nf;
                    let (mean, var_unit) = match kind {
                        PointKind::Binary => (frac, frac * (1.0 - frac)),
                        _ => (2.0 * frac - 1.0, 1.0 - (2.0 * frac - 1.0).powi(2)),
                    };
                    let se = if n > 1 { (var_unit / (nf - 1.0)).max(0.0).sqrt() } else { 0.0 };
                    (mean, se)
                }
                PointKind::Continuous => {
                    let z: f64 = rng.sample(StandardNormal);
                    (p.mean + p.stderr * z, p.stderr)
                }
            };
            DecayPoint { depth: p.depth, label: p.label.clone(), mean, stderr, n: p.n }
        })
        .collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub low: f64,
    pub high: f64,
    pub replicates: usize,
    pub failed: usize,
}

/// Percentile bootstrap of `pipeline` over jointly resampled decay tables.
pub fn bootstrap_ci<F>(
    tables: &[(&[DecayPoint], PointKind)],
    pipeline: F,
    resamples: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapSummary>
where
    F: Fn(&[Vec<DecayPoint>]) -> Result<f64> + Sync,
{
    if resamples == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one resample".into()));
    }
    for (pts, _) in tables {
        if let Some(p) = pts.iter().find(|p| p.n < 2) {
            return Err(Error::IncompleteData(format!(
                "bootstrap needs at least two shots per point (depth {}, label `{}`)",
                p.depth, p.label
            )));
        }
    }
    let vals: Vec<Option<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, Domain::Bootstrap, &[b as u64]);
            let rep: Vec<Vec<DecayPoint>> = tables.iter().map(|(pts, kind)| resample_points(pts, *kind, &mut rng)).collect();
            pipeline(&rep).ok().filter(|v| v.is_finite())
        })
        .collect();
    let mut ok: Vec<f64> = vals.iter().flatten().copied().collect();
    let failed = resamples - ok.len();
    if ok.len() * 10 < resamples * 9 {
        return Err(Error::FitFailure {
            reason: format!("{failed} of {resamples} bootstrap replicates failed to fit"),
            residuals: vec![],
        });
    }
    ok.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    Ok(BootstrapSummary { low: quantile(&ok, alpha), high: quantile(&ok, 1.0 - alpha), replicates: ok.len(), failed })
}

/// Unitarity from XRB purity decay points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitarityEstimate {
    pub u: f64,
    pub stderr: f64,
    pub ci: (f64, f64),
    pub source: String,
}

/// Fits `Σ⟨P⟩²/3 = A·u^{m−1}`.
pub fn unitarity_from_xrb(points: &[DecayPoint]) -> Result<UnitarityEstimate> {
    let fit = fit_decay(points, DecayModel::AOnly)?;
    let stderr = fit.p_stderr();
    Ok(UnitarityEstimate { u: fit.p, stderr, ci: (fit.p - 1.96 * stderr, fit.p + 1.96 * stderr), source: "xrb".into() })
}

/// Complete estimate with all three uncertainty layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfidelityEstimate {
    pub protocol: String,
    pub method: EstimatorMethod,
    pub epsilon: f64,
    pub eps_reference: f64,
    pub eps_interleaved: f64,
    pub stat_ci: Option<(f64, f64)>,
    pub sys_bounds: (f64, f64),
    pub xrb_bounds: Option<(f64, f64)>,
    pub fit: serde_json::Value,
    pub flags: Vec<String>,
}

impl InfidelityEstimate {
    pub fn stat_width(&self) -> Option<f64> {
        self.stat_ci.map(|(l, h)| h - l)
    }

    pub fn sys_width(&self) -> f64 {
        self.sys_bounds.1 - self.sys_bounds.0
    }
}

fn fit_json(fit: &ProtocolFit) -> serde_json::Value {
    let m: serde_json::Map<String, serde_json::Value> = fit
        .fits
        .iter()
        .map(|(k, f)| (k.clone(), serde_json::json!({"A": f.a, "p": f.p, "B": f.b, "chi2": f.chi2_red})))
        .collect();
    serde_json::Value::Object(m)
}

/// Settings for [`analyze_pair`].
#[derive(Debug, Clone, Copy)]
pub struct AnalysisSettings {
    pub method: EstimatorMethod,
    pub asymptote: Asymptote,
    /// Weight shot data by the fitted curve's binomial variance.
    pub model_weights: bool,
    /// Zero disables the bootstrap.
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
    pub unitarity: Option<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings { method: EstimatorMethod::Ratio, asymptote: Asymptote::Fixed, model_weights: true, resamples: 1000, seed: 0, level: 0.95, unitarity: None }
    }
}

impl AnalysisSettings {
    pub fn weighting(&self, kind: PointKind) -> Weighting {
        if self.model_weights {
            Weighting::Model(kind)
        } else {
            Weighting::Empirical
        }
    }
}

/// Fit → estimator → bounds → bootstrap for one protocol pair.
pub fn analyze_pair(
    group: TwirlGroupKind,
    ref_points: &[DecayPoint],
    int_points: &[DecayPoint],
    kinds: (PointKind, PointKind),
    settings: &AnalysisSettings,
) -> Result<InfidelityEstimate> {
    let fit_opts = |kind: PointKind| FitOptions { asymptote: settings.asymptote, weighting: settings.weighting(kind) };
    let opts = (fit_opts(kinds.0), fit_opts(kinds.1));
    let est = estimate_pair(group, ref_points, int_points, settings.method, opts)?;
    let (lo, hi, clipped) = systematic_bounds(est.eps_int, est.eps_ref);
    let xrb_bounds = settings.unitarity.map(|u| xrb_infidelity_bounds(est.eps_int, est.eps_ref, u)).transpose()?;
    let stat_ci = if settings.resamples > 0 {
        let method = settings.method;
        let b = bootstrap_ci(
            &[(ref_points, kinds.0), (int_points, kinds.1)],
            |rep| estimate_pair(group, &rep[0], &rep[1], method, opts).map(|e| e.epsilon),
            settings.resamples,
            settings.seed,
            settings.level,
        )?;
        Some((b.low, b.high))
    } else {
        None
    };
    let mut flags = Vec::new();
    if est.epsilon < 0.0 {
        flags.push("unphysical_negative".to_string());
    }
    if est.epsilon < lo - 1e-12 || est.epsilon > hi + 1e-12 {
        flags.push("outside_systematic_bounds".to_string());
    }
    if clipped {
        flags.push("systematic_inputs_clipped".to_string());
    }
    if est.reference.fits.values().chain(est.interleaved.fits.values()).any(|f| f.chi2_red > 10.0) {
        flags.push("poor_fit".to_string());
    }
    Ok(InfidelityEstimate {
        protocol: group.name().to_string(),
        method: settings.method,
        epsilon: est.epsilon,
        eps_reference: est.eps_ref,
        eps_interleaved: est.eps_int,
        stat_ci,
        sys_bounds: (lo, hi),
        xrb_bounds,
        fit: serde_json::json!({"reference": fit_json(&est.reference), "interleaved": fit_json(&est.interleaved)}),
        flags,
    })
}
