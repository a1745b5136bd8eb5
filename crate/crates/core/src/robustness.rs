//! Distances between the parabolic and hyperbolic objects: the lift
//! `u ↦ (u, E u)`, weighted Hausdorff semidistances between point clouds, the
//! singular-limit experiment, the ε-sweep of the compact manifolds with a
//! power-law fit, and the tail-sum check.

use std::io::Write;

use rayon::prelude::*;

use crate::audit::Audit;
use crate::csv;
use crate::error::{domain, CimError, Result};
use crate::flow::linspace;
use crate::gap::{self, GapCertificate};
use crate::hyperbolic::{sample_hyperbolic, HyperbolicConfig};
use crate::manifold::{
    apply_compatibility, build_compact_manifold, build_omega_k, build_w_eps_grid, build_w_grid,
    entry_tau3, fit_graph_hyperbolic, fit_graph_parabolic, FlowConfig, FlowKind, GraphSample,
    GraphSettings, GridSpec, ManifoldCloud, WindowTimes,
};
use crate::parabolic::{self, extension_e, ParabolicConfig};
use crate::spectral::{eigenvalue, norm_xeps, EpsWeight, ProductState, SpectralField};

/// `(u, E u)`.
pub fn lift(u: &SpectralField, f: &SpectralField) -> Result<ProductState> {
    Ok(ProductState {
        u: u.clone(),
        v: extension_e(u, f)?,
    })
}

/// Lifts the first component of every point of a cloud.
pub fn lift_cloud(cloud: &ManifoldCloud, f: &SpectralField) -> Result<ManifoldCloud> {
    let points = cloud
        .points
        .par_iter()
        .map(|p| lift(&p.u, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(ManifoldCloud {
        kind: FlowKind::Hyperbolic,
        points,
        provenance: cloud.provenance.clone(),
        skipped: cloud.skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffReport {
    pub d_uv: f64,
    pub d_vu: f64,
    pub dist: f64,
    pub k: u32,
    pub eps: f64,
}

/// Per-coordinate weights of `‖·‖²_{X^ε_k}` for states flattened as
/// `[u₁..u_N, v₁..v_N]`.
fn weights(n: usize, k: u32, eps: f64) -> Vec<f64> {
    let ku = k as i32;
    let mut w: Vec<f64> = (1..=n).map(|j| eigenvalue(j).powi(ku)).collect();
    w.extend((1..=n).map(|j| eps * eigenvalue(j).powi(ku - 1)));
    w
}

fn flatten(points: &[ProductState]) -> Vec<f64> {
    points
        .iter()
        .flat_map(|p| p.u.coeffs().iter().chain(p.v.coeffs()).copied())
        .collect()
}

/// `sup_{x∈U} inf_{y∈V} ‖x − y‖_{X^ε_k}` over finite point sets.
pub fn semidist_points(u: &[ProductState], v: &[ProductState], k: u32, eps: f64) -> Result<f64> {
    EpsWeight::new(eps)?;
    if u.is_empty() || v.is_empty() {
        return Err(CimError::EmptyCloud);
    }
    let n = u[0].n_modes();
    if let Some(bad) = u.iter().chain(v).find(|p| p.n_modes() != n || p.v.n_modes() != n) {
        return Err(CimError::Dimension {
            expected: n,
            got: bad.n_modes(),
        });
    }
    let w = weights(n, k, eps);
    let dim = 2 * n;
    let xs = flatten(u);
    let ys = flatten(v);
    let worst = xs
        .par_chunks_exact(dim)
        .map(|x| {
            let mut best = f64::INFINITY;
            for y in ys.chunks_exact(dim) {
                let mut acc = 0.0;
                for ((a, b), wi) in x.iter().zip(y).zip(&w) {
                    let d = a - b;
                    acc += wi * (d * d);
                    // partial sums only grow, so this pair cannot win
                    if acc >= best {
                        break;
                    }
                }
                if acc < best {
                    best = acc;
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst.sqrt())
}

pub fn semidist(u: &ManifoldCloud, v: &ManifoldCloud, k: u32, eps: f64) -> Result<f64> {
    semidist_points(&u.points, &v.points, k, eps)
}

pub fn symdist(u: &ManifoldCloud, v: &ManifoldCloud, k: u32, eps: f64) -> Result<HausdorffReport> {
    let d_uv = semidist(u, v, k, eps)?;
    let d_vu = semidist(v, u, k, eps)?;
    Ok(HausdorffReport {
        d_uv,
        d_vu,
        dist: d_uv.max(d_vu),
        k,
        eps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularLimitReport {
    pub eps: f64,
    pub sup_t_norm: f64,
    pub window: (f64, f64),
    /// `(t, ‖S_ε(t)x₀ − L S_p(t)u₀‖_{X^ε₁})` on the window grid.
    pub series: Vec<(f64, f64)>,
}

/// Runs `S_ε` from `x0` and `S_p` from its first component and returns the
/// largest `X^ε₁` gap between `S_ε(t)x₀` and the lift of `S_p(t)u₀` over
/// `samples` equispaced times of `window`.
pub fn run_singular_limit(
    x0: &ProductState,
    window: (f64, f64),
    samples: usize,
    par: &ParabolicConfig,
    hyp: &HyperbolicConfig,
) -> Result<SingularLimitReport> {
    let (a, b) = window;
    if !(a >= 0.0 && b >= a) || samples == 0 {
        return domain(format!("bad comparison window [{a}, {b}] with {samples} samples"));
    }
    if par.f != hyp.f || par.n_modes != hyp.n_modes {
        return Err(CimError::Config("both flows must share forcing and mode count".into()));
    }
    let w = EpsWeight::new(hyp.eps)?;
    let times = linspace(a, b, samples);
    let hs = sample_hyperbolic(x0, &times, hyp)?;
    let ps = parabolic::sample(&x0.u, &times, par)?;
    let series = times
        .iter()
        .zip(hs.iter().zip(&ps))
        .map(|(t, (h, p))| Ok((*t, norm_xeps(&(h - &lift(p, &par.f)?), 1, w))))
        .collect::<Result<Vec<_>>>()?;
    let sup_t_norm = series.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(SingularLimitReport {
        eps: hyp.eps,
        sup_t_norm,
        window,
        series,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessFit {
    pub eps_values: Vec<f64>,
    pub distances: Vec<f64>,
    pub lambda: f64,
    pub phi: f64,
    pub r_squared: f64,
}

impl RobustnessFit {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        csv::write_header(w, "fit v1", &["Lambda".into(), "phi".into(), "r_squared".into()])?;
        csv::write_row(w, [self.lambda, self.phi, self.r_squared])
    }
}

/// Ordinary least squares of `log d = φ log ε + log Λ`.
pub fn fit_power_law(eps: &[f64], d: &[f64]) -> Result<RobustnessFit> {
    if eps.len() != d.len() {
        return Err(CimError::Dimension {
            expected: eps.len(),
            got: d.len(),
        });
    }
    if eps.len() < 3 {
        return domain("a power-law fit needs at least three points");
    }
    if eps.iter().chain(d).any(|x| !(*x > 0.0) || !x.is_finite()) {
        return domain("fit data must be positive and finite");
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = d.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return domain("fit needs at least two distinct eps values");
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let phi = sxy / sxx;
    let intercept = my - phi * mx;
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - phi * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RobustnessFit {
        eps_values: eps.to_vec(),
        distances: d.to_vec(),
        lambda: intercept.exp(),
        phi,
        r_squared,
    })
}

/// `Σ_{n>N} n⁻²`: a thousand terms summed exactly, then the Euler–Maclaurin
/// remainder, whose truncation error is far below 1e−15.
pub fn tail_sum(n: u64) -> Result<f64> {
    if n == 0 {
        return domain("tail_sum needs N ≥ 1");
    }
    let m = n.saturating_add(1000);
    let mf = m as f64;
    let rest = 1.0 / mf - 0.5 / (mf * mf) + 1.0 / (6.0 * mf.powi(3)) - 1.0 / (30.0 * mf.powi(5));
    let head: f64 = (n + 1..=m).rev().map(|k| 1.0 / (k as f64 * k as f64)).sum();
    Ok(head + rest)
}

/// `‖Q_N m(χ)‖₁ ≤ ‖m(χ)‖₃ · Σ_{n>N} n⁻²` for every converged graph point.
pub fn check_tail_bound(sample: &GraphSample, n: usize) -> Result<Audit> {
    let tail = tail_sum(n as u64)?;
    let mut audit = Audit::new(format!("tail_bound_N{n}"), 0.0);
    for (i, m) in sample.values.iter().enumerate() {
        if !sample.converged[i] {
            continue;
        }
        let rhs = m.u.norm_hs(3.0) * tail;
        let lhs = if n >= m.u.n_modes() {
            0.0
        } else {
            m.u.project_q(n)?.norm_hs(1.0)
        };
        audit.record(i as f64, lhs, rhs);
    }
    Ok(audit)
}

/// Everything the manifold pipeline needs besides the list of `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub delta: f64,
    pub n_modes: usize,
    pub dt: f64,
    /// Replaces the certified dimension; also lifts the `ε ≤ ε_s` check,
    /// since the certificate no longer describes the run.
    pub n_star_override: Option<usize>,
    pub grid: GridSpec,
    pub graph: GraphSettings,
    pub windows: WindowTimes,
    pub rho3: f64,
    pub i3_count: usize,
    pub seed: u64,
    pub modified: bool,
    pub forcing: Option<SpectralField>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            delta: 1.5,
            n_modes: 32,
            dt: 1e-3,
            n_star_override: None,
            grid: GridSpec::default(),
            graph: GraphSettings::default(),
            windows: WindowTimes::default(),
            rho3: 10.0,
            i3_count: 4,
            seed: 0,
            modified: true,
            forcing: None,
        }
    }
}

impl PipelineSettings {
    pub fn forcing(&self) -> SpectralField {
        self.forcing
            .clone()
            .unwrap_or_else(|| SpectralField::zeros(self.n_modes))
    }

    pub fn parabolic_config(&self) -> ParabolicConfig {
        let mut c = ParabolicConfig::forced(self.forcing()).with_dt(self.dt);
        c.use_modified_nonlinearity = self.modified;
        c.delta = self.delta;
        c
    }

    pub fn hyperbolic_config(&self, eps: f64) -> HyperbolicConfig {
        let mut c = HyperbolicConfig::forced(eps, self.forcing()).with_dt(self.dt);
        c.use_modified_nonlinearity = self.modified;
        c.delta = self.delta;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicStage {
    pub certificate: GapCertificate,
    pub n_star: usize,
    pub w_grid: Vec<SpectralField>,
    pub graph: GraphSample,
    pub omega: ManifoldCloud,
    pub tau3: f64,
}

/// Certificate, `W`, the parabolic graph and its ω-cloud.
pub fn run_parabolic_stage(settings: &PipelineSettings) -> Result<ParabolicStage> {
    let certificate = gap::certify(settings.delta, 1.0, gap::DEFAULT_N_MAX)?;
    let n_star = settings
        .n_star_override
        .unwrap_or(certificate.n_star_parabolic);
    if n_star >= settings.n_modes {
        return Err(CimError::Config(format!(
            "N* = {n_star} needs more than {} modes",
            settings.n_modes
        )));
    }
    let cfg = settings.parabolic_config();
    let w_grid = build_w_grid(n_star, settings.n_modes, &settings.grid, settings.seed)?;
    let graph = fit_graph_parabolic(&w_grid, n_star, &settings.graph, &cfg)?;
    let fc = FlowConfig::Parabolic(cfg);
    let omega = build_omega_k(&graph, &settings.windows, &fc)?;
    let tau3 = entry_tau3(&omega, &settings.windows, &fc, settings.rho3)?;
    Ok(ParabolicStage {
        certificate,
        n_star,
        w_grid,
        graph,
        omega,
        tau3,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicStage {
    pub eps: f64,
    pub graph: GraphSample,
    pub omega: ManifoldCloud,
    pub tau3: f64,
}

pub fn run_hyperbolic_stage(
    par: &ParabolicStage,
    eps: f64,
    settings: &PipelineSettings,
) -> Result<HyperbolicStage> {
    let cfg = settings.hyperbolic_config(eps);
    let w_eps = build_w_eps_grid(&par.w_grid, settings.grid.cap, settings.seed.wrapping_add(1));
    let graph = fit_graph_hyperbolic(&w_eps, par.n_star, &settings.graph, &cfg)?;
    let fc = FlowConfig::Hyperbolic(cfg);
    let omega = build_omega_k(&graph, &settings.windows, &fc)?;
    let tau3 = entry_tau3(&omega, &settings.windows, &fc, settings.rho3)?;
    Ok(HyperbolicStage {
        eps,
        graph,
        omega,
        tau3,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub report: HausdorffReport,
    pub cloud_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub n_star: usize,
    pub windows: WindowTimes,
    pub rows: Vec<SweepRow>,
    pub fit: RobustnessFit,
}

impl SweepReport {
    pub fn write_sweep_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let cols = ["eps", "d_uv", "d_vu", "dist"].map(String::from);
        csv::write_header(w, "sweep v1", &cols)?;
        for r in &self.rows {
            csv::write_row(w, [r.eps, r.report.d_uv, r.report.d_vu, r.report.dist])?;
        }
        Ok(())
    }

    /// Distances never grow by more than `slack` (relative) as `ε` shrinks.
    pub fn monotone_within(&self, slack: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].report.dist <= w[0].report.dist * (1.0 + slack))
    }
}

/// Builds `M̂^ε` for each `ε` and `M̂⁰` under one set of shared windows,
/// measures `dist_{X^ε₁}(M̂^ε, L M̂⁰)` in both directions and fits a power law.
pub fn sweep_eps(par: &ParabolicStage, eps_list: &[f64], settings: &PipelineSettings) -> Result<SweepReport> {
    if eps_list.len() < 3 {
        return domain("the sweep needs at least three eps values");
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return domain("eps values must lie in (0, 1] and decrease strictly");
    }
    if settings.n_star_override.is_none() {
        let ceiling = par.certificate.eps_s_estimate;
        if let Some(e) = eps_list.iter().find(|e| **e > ceiling) {
            return domain(format!("eps = {e} exceeds the certified threshold eps_s = {ceiling}"));
        }
    }
    let wrap = |eps: f64| move |e: CimError| CimError::Pipeline { eps, source: Box::new(e) };
    let mut stages = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        log::info!("hyperbolic stage at eps = {eps}");
        stages.push(run_hyperbolic_stage(par, eps, settings).map_err(wrap(eps))?);
    }
    let mut par_w = settings.windows.with_tau3(par.tau3, settings.i3_count);
    par_w.tau3 = par.tau3;
    let tau_hyp = stages.iter().map(|s| s.tau3).fold(0.0, f64::max);
    let hyp_w = settings.windows.with_tau3(tau_hyp, settings.i3_count);
    let cert = GapCertificate {
        n_star_parabolic: par.n_star,
        n_star_hyperbolic: Some(par.n_star),
        ..par.certificate.clone()
    };
    let shared = apply_compatibility(&cert, &par_w, &hyp_w)?.windows;
    let f = settings.forcing();
    let m0 = build_compact_manifold(&par.omega, &shared, &FlowConfig::Parabolic(settings.parabolic_config()))?;
    let lifted = lift_cloud(&m0, &f)?;
    let mut rows = Vec::with_capacity(stages.len());
    for st in &stages {
        let fc = FlowConfig::Hyperbolic(settings.hyperbolic_config(st.eps));
        let me = build_compact_manifold(&st.omega, &shared, &fc).map_err(wrap(st.eps))?;
        let report = symdist(&me, &lifted, 1, st.eps).map_err(wrap(st.eps))?;
        log::info!("eps = {}: dist = {}", st.eps, report.dist);
        rows.push(SweepRow {
            eps: st.eps,
            report,
            cloud_size: me.len(),
        });
    }
    let d: Vec<f64> = rows.iter().map(|r| r.report.dist).collect();
    let fit = fit_power_law(eps_list, &d)?;
    Ok(SweepReport {
        n_star: par.n_star,
        windows: shared,
        rows,
        fit,
    })
}
