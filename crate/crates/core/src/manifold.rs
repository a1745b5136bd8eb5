//! Finite samples of inertial-manifold graphs, of the ω-sets of the smoothing
//! maps, and of the compact manifolds built from them.
//!
//! Graph functions are found by re-anchored forward relaxation: starting from
//! `q = 0`, iterate `q ← Q·S(T)(ξ + q)` with the low modes pinned to `ξ`. When
//! the spectral gap holds, the high modes of `S(T)` contract much faster than
//! the low ones move, and the fixed point is the high-mode response slaved to
//! `ξ` over one relaxation time. The same scheme runs for both flows, so the
//! hyperbolic graph reduces to the parabolic one as `ε → 0`.

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::csv;
use crate::error::{domain, CimError, Result};
use crate::flow::linspace;
use crate::gap::GapCertificate;
use crate::hyperbolic::{
    entry_time_hyperbolic, norm_n3, sample_decomposed, sample_hyperbolic, HyperbolicConfig,
};
use crate::parabolic::{self, entry_time_parabolic, window_constant, ParabolicConfig};
use crate::spectral::{norm_xeps, EpsWeight, ProductState, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Parabolic,
    Hyperbolic,
}

/// Configuration of whichever flow a stage runs under.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowConfig {
    Parabolic(ParabolicConfig),
    Hyperbolic(HyperbolicConfig),
}

impl FlowConfig {
    pub fn kind(&self) -> FlowKind {
        match self {
            FlowConfig::Parabolic(_) => FlowKind::Parabolic,
            FlowConfig::Hyperbolic(_) => FlowKind::Hyperbolic,
        }
    }

    pub fn n_modes(&self) -> usize {
        match self {
            FlowConfig::Parabolic(c) => c.n_modes,
            FlowConfig::Hyperbolic(c) => c.n_modes,
        }
    }

    /// Velocity weight of the phase-space norm; zero for the parabolic flow.
    pub fn eps_weight(&self) -> f64 {
        match self {
            FlowConfig::Parabolic(_) => 0.0,
            FlowConfig::Hyperbolic(c) => c.eps,
        }
    }

    /// Full semiflow `S(t)` applied at each of `times`.
    fn semiflow(&self, x: &ProductState, times: &[f64]) -> Result<Vec<ProductState>> {
        match self {
            FlowConfig::Parabolic(c) => Ok(parabolic::sample(&x.u, times, c)?
                .into_iter()
                .map(parabolic_point)
                .collect()),
            FlowConfig::Hyperbolic(c) => sample_hyperbolic(x, times, c),
        }
    }

    /// Smoothing map `K(t)`: the semiflow itself in the parabolic case, the
    /// `w`-component of the splitting in the hyperbolic case.
    fn smoothing(&self, x: &ProductState, times: &[f64]) -> Result<Vec<ProductState>> {
        match self {
            FlowConfig::Parabolic(_) => self.semiflow(x, times),
            FlowConfig::Hyperbolic(c) => Ok(sample_decomposed(x, times, c)?
                .into_iter()
                .map(|(_, w)| w)
                .collect()),
        }
    }
}

/// Parabolic points live in the product space with a zero second slot.
pub fn parabolic_point(u: SpectralField) -> ProductState {
    let n = u.n_modes();
    ProductState {
        u,
        v: SpectralField::zeros(n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSettings {
    pub t_relax: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GraphSettings {
    fn default() -> Self {
        Self {
            t_relax: 1.0,
            tol: 1e-7,
            max_iter: 200,
        }
    }
}

/// Values `m(ξ)` of a graph function on a finite grid `W` of low-mode points.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub kind: FlowKind,
    pub n_low: usize,
    pub xi_grid: Vec<ProductState>,
    pub values: Vec<ProductState>,
    pub converged: Vec<bool>,
    pub residual: Vec<f64>,
    pub residual_history: Vec<Vec<f64>>,
}

impl GraphSample {
    pub fn len(&self) -> usize {
        self.xi_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi_grid.is_empty()
    }

    /// `ξ + m(ξ)` for grid point `i`.
    pub fn point(&self, i: usize) -> ProductState {
        &self.xi_grid[i] + &self.values[i]
    }

    pub fn n_unconverged(&self) -> usize {
        self.converged.iter().filter(|c| !**c).count()
    }
}

fn zero_low(field: &mut SpectralField, n_low: usize) {
    field.coeffs_mut()[..n_low].iter_mut().for_each(|c| *c = 0.0);
}

fn supported_low(x: &ProductState, n_low: usize) -> bool {
    x.u.coeffs()[n_low..].iter().all(|c| *c == 0.0) && x.v.coeffs()[n_low..].iter().all(|c| *c == 0.0)
}

/// Outcome of relaxing one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxed {
    pub value: ProductState,
    pub converged: bool,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Re-anchored iteration `q ← Q·map(ξ + q)` with residuals measured in `X^w₁`.
/// A failing map ends the iteration and leaves the point unconverged.
pub fn relax_point(
    xi: &ProductState,
    n_low: usize,
    settings: &GraphSettings,
    eps_weight: f64,
    mut map: impl FnMut(&ProductState) -> Result<ProductState>,
) -> Result<Relaxed> {
    let weight = EpsWeight::new(eps_weight)?;
    let mut q = ProductState::zeros(xi.n_modes());
    let mut history = Vec::new();
    for _ in 0..settings.max_iter {
        let image = match map(&(xi + &q)) {
            Ok(y) => y,
            Err(CimError::BlowUp { .. }) => {
                return Ok(Relaxed {
                    value: q,
                    converged: false,
                    residual: f64::INFINITY,
                    history,
                })
            }
            Err(e) => return Err(e),
        };
        let mut next = image;
        zero_low(&mut next.u, n_low);
        zero_low(&mut next.v, n_low);
        let res = norm_xeps(&(&next - &q), 1, weight);
        history.push(res);
        q = next;
        if res < settings.tol {
            return Ok(Relaxed {
                value: q,
                converged: true,
                residual: res,
                history,
            });
        }
    }
    Ok(Relaxed {
        value: q,
        converged: false,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
        history,
    })
}

fn fit_graph(
    xi_grid: Vec<ProductState>,
    n_low: usize,
    settings: &GraphSettings,
    cfg: &FlowConfig,
) -> Result<GraphSample> {
    let n = cfg.n_modes();
    if n_low == 0 || n_low >= n {
        return domain(format!("graph dimension {n_low} must lie in 1..{n}"));
    }
    if !(settings.t_relax > 0.0) {
        return domain(format!("relaxation time {} must be positive", settings.t_relax));
    }
    for x in &xi_grid {
        if x.n_modes() != n {
            return Err(CimError::Dimension {
                expected: n,
                got: x.n_modes(),
            });
        }
        if !supported_low(x, n_low) {
            return domain(format!("grid point not supported on modes 1..={n_low}"));
        }
    }
    let times = [settings.t_relax];
    let out: Vec<Relaxed> = xi_grid
        .par_iter()
        .map(|xi| {
            relax_point(xi, n_low, settings, cfg.eps_weight(), |x| {
                Ok(cfg.semiflow(x, &times)?.pop().expect("one sample"))
            })
        })
        .collect::<Result<_>>()?;
    let mut sample = GraphSample {
        kind: cfg.kind(),
        n_low,
        xi_grid,
        values: Vec::with_capacity(out.len()),
        converged: Vec::with_capacity(out.len()),
        residual: Vec::with_capacity(out.len()),
        residual_history: Vec::with_capacity(out.len()),
    };
    for r in out {
        sample.values.push(r.value);
        sample.converged.push(r.converged);
        sample.residual.push(r.residual);
        sample.residual_history.push(r.history);
    }
    Ok(sample)
}

pub fn fit_graph_parabolic(
    xi_grid: &[SpectralField],
    n_low: usize,
    settings: &GraphSettings,
    cfg: &ParabolicConfig,
) -> Result<GraphSample> {
    let grid = xi_grid.iter().cloned().map(parabolic_point).collect();
    fit_graph(grid, n_low, settings, &FlowConfig::Parabolic(cfg.clone()))
}

pub fn fit_graph_hyperbolic(
    xi_grid: &[ProductState],
    n_low: usize,
    settings: &GraphSettings,
    cfg: &HyperbolicConfig,
) -> Result<GraphSample> {
    fit_graph(xi_grid.to_vec(), n_low, settings, &FlowConfig::Hyperbolic(cfg.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzAudit {
    pub max_ratio: f64,
    pub bound: f64,
    pub pairs: usize,
}

impl LipschitzAudit {
    pub fn passed(&self, slack: f64) -> bool {
        self.max_ratio <= self.bound + slack
    }
}

/// Largest `‖m(ξ) − m(ξ')‖/‖ξ − ξ'‖` in `X^w₁` over pairs of converged points.
pub fn lipschitz_audit(sample: &GraphSample, eps_weight: f64, bound: f64) -> Result<LipschitzAudit> {
    let w = EpsWeight::new(eps_weight)?;
    let idx: Vec<usize> = (0..sample.len()).filter(|&i| sample.converged[i]).collect();
    let mut max_ratio: f64 = 0.0;
    let mut pairs = 0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let dx = norm_xeps(&(&sample.xi_grid[i] - &sample.xi_grid[j]), 1, w);
            if dx == 0.0 {
                continue;
            }
            let dm = norm_xeps(&(&sample.values[i] - &sample.values[j]), 1, w);
            max_ratio = max_ratio.max(dm / dx);
            pairs += 1;
        }
    }
    Ok(LipschitzAudit {
        max_ratio,
        bound,
        pairs,
    })
}

/// Uniform box grid of low-mode coefficient vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub points_per_axis: usize,
    pub cap: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 1.5,
            points_per_axis: 3,
            cap: 729,
        }
    }
}

/// The grid `W ⊂ [−a, a]^{n_low}` embedded in `n_modes` modes. Grids with more
/// than `cap` points are subsampled without replacement, seeded.
pub fn build_w_grid(n_low: usize, n_modes: usize, spec: &GridSpec, seed: u64) -> Result<Vec<SpectralField>> {
    if n_low == 0 || n_low > n_modes {
        return domain(format!("grid dimension {n_low} must lie in 1..={n_modes}"));
    }
    if spec.points_per_axis == 0 || spec.cap == 0 || !(spec.half_width >= 0.0) {
        return domain("grid needs a nonnegative width, at least one point per axis and a positive cap");
    }
    let axis = linspace(-spec.half_width, spec.half_width, spec.points_per_axis);
    let p = spec.points_per_axis as u128;
    let total = p.checked_pow(n_low as u32);
    let chosen: Vec<u128> = match total {
        Some(t) if t <= spec.cap as u128 => (0..t).collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = total.map_or(usize::MAX, |t| t.min(usize::MAX as u128) as usize);
            let mut picked = index::sample(&mut rng, t, spec.cap).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| i as u128).collect()
        }
    };
    Ok(chosen
        .into_iter()
        .map(|mut code| {
            let mut c = vec![0.0; n_modes];
            for slot in c.iter_mut().take(n_low) {
                *slot = axis[(code % p) as usize];
                code /= p;
            }
            SpectralField::from_vec_unchecked(c)
        })
        .collect())
}

/// `W × W` as `(χ, ψ)` pairs. Above `cap`, every `χ` keeps the same number of
/// partners `ψ`, drawn without replacement, so each parabolic grid point has
/// hyperbolic counterparts.
pub fn build_w_eps_grid(wp: &[SpectralField], cap: usize, seed: u64) -> Vec<ProductState> {
    let p = wp.len();
    let pair = |i: usize, j: usize| ProductState {
        u: wp[i].clone(),
        v: wp[j].clone(),
    };
    if p * p <= cap {
        return (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| pair(i, j)).collect();
    }
    let per = (cap / p.max(1)).max(1).min(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(p * per);
    for i in 0..p {
        let mut js = index::sample(&mut rng, p, per).into_vec();
        js.sort_unstable();
        out.extend(js.into_iter().map(|j| pair(i, j)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    /// Index of the graph point the sample descends from.
    pub source: usize,
    pub tau: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldCloud {
    pub kind: FlowKind,
    pub points: Vec<ProductState>,
    pub provenance: Vec<Provenance>,
    pub skipped: usize,
}

impl ManifoldCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.points.first().map_or(0, |p| p.n_modes())
    }

    /// Cloud of bare points with zero provenance.
    pub fn from_points(kind: FlowKind, points: Vec<ProductState>) -> Self {
        let provenance = (0..points.len())
            .map(|i| Provenance {
                source: i,
                tau: 0.0,
                t: 0.0,
            })
            .collect();
        Self {
            kind,
            points,
            provenance,
            skipped: 0,
        }
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let n = self.n_modes();
        let mut cols = vec!["tau".to_string(), "t".to_string()];
        cols.extend(csv::indexed("u", n));
        if self.kind == FlowKind::Hyperbolic {
            cols.extend(csv::indexed("ut", n));
        }
        csv::write_header(w, "cloud v1", &cols)?;
        for (p, prov) in self.points.iter().zip(&self.provenance) {
            let vel: &[f64] = match self.kind {
                FlowKind::Hyperbolic => p.v.coeffs(),
                FlowKind::Parabolic => &[],
            };
            let row = [prov.tau, prov.t]
                .into_iter()
                .chain(p.u.coeffs().iter().copied())
                .chain(vel.iter().copied());
            csv::write_row(w, row)?;
        }
        Ok(())
    }
}

/// Window starts, the entry time `τ₃` with its grid on `[τ₃, 2τ₃]`, and the
/// sampling of the last window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTimes {
    pub c: [f64; 3],
    pub tau3: f64,
    pub i3_grid: Vec<f64>,
    pub t_horizon: f64,
    pub t_grid_size: usize,
}

impl Default for WindowTimes {
    fn default() -> Self {
        Self {
            c: [window_constant(0), window_constant(1), window_constant(2)],
            tau3: 0.0,
            i3_grid: vec![0.0],
            t_horizon: 10.0,
            t_grid_size: 16,
        }
    }
}

impl WindowTimes {
    pub fn validate(&self) -> Result<()> {
        if self.c.iter().any(|c| !(*c >= 0.0)) || self.c.windows(2).any(|w| w[1] < w[0]) {
            return Err(CimError::Config(format!("window starts {:?} must be nondecreasing and ≥ 0", self.c)));
        }
        if !(self.t_horizon >= 0.0) || self.t_grid_size == 0 {
            return Err(CimError::Config("window needs a horizon ≥ 0 and at least one sample".into()));
        }
        if !(self.tau3 >= 0.0) {
            return Err(CimError::Config(format!("tau3 = {} must be ≥ 0", self.tau3)));
        }
        if self.i3_grid.is_empty()
            || self
                .i3_grid
                .iter()
                .any(|t| *t < self.tau3 || *t > 2.0 * self.tau3)
        {
            return Err(CimError::Config("I3 grid must be a nonempty subset of [tau3, 2 tau3]".into()));
        }
        Ok(())
    }

    /// Same windows with entry time `tau3` and `count` points on `[τ₃, 2τ₃]`
    /// (a single point when `τ₃ = 0`).
    pub fn with_tau3(&self, tau3: f64, count: usize) -> Self {
        let i3_grid = if tau3 == 0.0 {
            vec![0.0]
        } else {
            linspace(tau3, 2.0 * tau3, count.max(1))
        };
        Self {
            tau3,
            i3_grid,
            ..self.clone()
        }
    }

    /// Absolute sample times of the last window along one continuous
    /// trajectory: the first two windows are traversed whole, then
    /// `t_grid_size` points cover `[c₂, c₂ + t_horizon]`.
    pub fn last_window_times(&self) -> Vec<f64> {
        let pre = (self.c[0] + self.t_horizon) + (self.c[1] + self.t_horizon);
        linspace(self.c[2], self.c[2] + self.t_horizon, self.t_grid_size)
            .into_iter()
            .map(|t| pre + t)
            .collect()
    }

    /// Window used to compare flows: `I₃` when `τ₃ > 0`, else `[0, 1]`.
    pub fn comparison_window(&self) -> (f64, f64) {
        if self.tau3 > 0.0 {
            (self.tau3, 2.0 * self.tau3)
        } else {
            (0.0, 1.0)
        }
    }
}

/// Finite stand-in for `ω^K_{c₂}(C₂)`: the smoothing map is run from each
/// converged graph point and sampled across the last window.
pub fn build_omega_k(graph: &GraphSample, windows: &WindowTimes, cfg: &FlowConfig) -> Result<ManifoldCloud> {
    windows.validate()?;
    if graph.is_empty() {
        return Err(CimError::EmptyCloud);
    }
    if graph.kind != cfg.kind() {
        return domain("graph sample and flow configuration belong to different flows");
    }
    let sources: Vec<usize> = (0..graph.len()).filter(|&i| graph.converged[i]).collect();
    let skipped = graph.len() - sources.len();
    if skipped > 0 {
        log::warn!("skipping {skipped} unconverged graph points");
    }
    if sources.is_empty() {
        return Err(CimError::EmptyCloud);
    }
    let times = windows.last_window_times();
    let runs: Vec<Vec<ProductState>> = sources
        .par_iter()
        .map(|&i| cfg.smoothing(&graph.point(i), &times))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(sources.len() * times.len());
    let mut provenance = Vec::with_capacity(points.capacity());
    for (src, run) in sources.iter().zip(runs) {
        for (t, p) in times.iter().zip(run) {
            points.push(p);
            provenance.push(Provenance {
                source: *src,
                tau: 0.0,
                t: *t,
            });
        }
    }
    Ok(ManifoldCloud {
        kind: cfg.kind(),
        points,
        provenance,
        skipped,
    })
}

/// `⋃_{τ ∈ I₃} S(τ)·ω`.
pub fn build_compact_manifold(omega: &ManifoldCloud, windows: &WindowTimes, cfg: &FlowConfig) -> Result<ManifoldCloud> {
    windows.validate()?;
    if omega.is_empty() {
        return Err(CimError::EmptyCloud);
    }
    if omega.kind != cfg.kind() {
        return domain("cloud and flow configuration belong to different flows");
    }
    let runs: Vec<Vec<ProductState>> = omega
        .points
        .par_iter()
        .map(|p| cfg.semiflow(p, &windows.i3_grid))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(omega.len() * windows.i3_grid.len());
    let mut provenance = Vec::with_capacity(points.capacity());
    for (k, tau) in windows.i3_grid.iter().enumerate() {
        for (run, prov) in runs.iter().zip(&omega.provenance) {
            points.push(run[k].clone());
            provenance.push(Provenance { tau: *tau, ..*prov });
        }
    }
    Ok(ManifoldCloud {
        kind: omega.kind,
        points,
        provenance,
        skipped: omega.skipped,
    })
}

/// Entry time of the ω-cloud into the radius-`rho` ball of the third space.
/// Zero when the cloud is already inside; otherwise the entry-time formula
/// with its constant measured as the largest norm the cloud still carries
/// after one further horizon.
pub fn entry_tau3(omega: &ManifoldCloud, windows: &WindowTimes, cfg: &FlowConfig, rho: f64) -> Result<f64> {
    if omega.is_empty() {
        return Err(CimError::EmptyCloud);
    }
    match cfg {
        FlowConfig::Parabolic(_) => {
            let worst = omega.points.iter().map(|p| p.u.norm_hs(3.0)).fold(0.0, f64::max);
            if worst <= rho {
                return Ok(0.0);
            }
            let tail = calibrate(omega, windows, cfg, |p| Ok(p.u.norm_hs(3.0).powi(2)))?;
            let c = window_constant(2);
            entry_time_parabolic(worst, rho, c * tail, c, false)
        }
        FlowConfig::Hyperbolic(h) => {
            let w = EpsWeight::new(h.eps)?;
            let inside = omega.points.iter().all(|p| norm_xeps(p, 3, w) <= rho);
            if inside {
                return Ok(0.0);
            }
            let n3 = omega
                .points
                .iter()
                .map(|p| norm_n3(p, h.eps))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let c3 = calibrate(omega, windows, cfg, |p| norm_n3(p, h.eps))? / 5.0;
            entry_time_hyperbolic(n3, rho, c3)
        }
    }
}

fn calibrate(
    omega: &ManifoldCloud,
    windows: &WindowTimes,
    cfg: &FlowConfig,
    measure: impl Fn(&ProductState) -> Result<f64> + Sync,
) -> Result<f64> {
    let t = [windows.t_horizon];
    let vals: Vec<f64> = omega
        .points
        .par_iter()
        .map(|p| measure(&cfg.semiflow(p, &t)?[0]))
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `sup_{x} inf_{y} ‖S(σ)x − y‖` in `X^w₁` over points of `cloud`: how far one
/// step of the flow carries the sample off itself.
pub fn invariance_defect(cloud: &ManifoldCloud, sigma: f64, cfg: &FlowConfig) -> Result<f64> {
    if cloud.is_empty() {
        return Err(CimError::EmptyCloud);
    }
    if !(sigma >= 0.0) {
        return domain(format!("shift {sigma} must be ≥ 0"));
    }
    let t = [sigma];
    let moved: Vec<ProductState> = cloud
        .points
        .par_iter()
        .map(|p| Ok(cfg.semiflow(p, &t)?.remove(0)))
        .collect::<Result<_>>()?;
    crate::robustness::semidist_points(&moved, &cloud.points, 1, cfg.eps_weight())
}

/// Distance series of trajectories to a cloud and its fitted exponential rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionReport {
    pub times: Vec<f64>,
    /// `max_x dist(S(t)x, cloud)` over the data.
    pub distances: Vec<f64>,
    /// `−d ln(dist)/dt` by least squares; positive when the cloud attracts.
    pub rate: f64,
}

/// Runs every state of `data` to each of `times` and measures its distance
/// to `cloud` in `X^w₁`. The distance stalls at the sampling resolution of
/// the cloud, so the rate is a report and not a bound.
pub fn attraction_audit(
    cloud: &ManifoldCloud,
    data: &[ProductState],
    times: &[f64],
    cfg: &FlowConfig,
) -> Result<AttractionReport> {
    if cloud.is_empty() || data.is_empty() {
        return Err(CimError::EmptyCloud);
    }
    if times.len() < 2 {
        return domain("the attraction audit needs at least two times");
    }
    let runs: Vec<Vec<ProductState>> = data
        .par_iter()
        .map(|x| cfg.semiflow(x, times))
        .collect::<Result<_>>()?;
    let w = cfg.eps_weight();
    let distances = (0..times.len())
        .map(|k| {
            let at: Vec<ProductState> = runs.iter().map(|r| r[k].clone()).collect();
            crate::robustness::semidist_points(&at, &cloud.points, 1, w)
        })
        .collect::<Result<Vec<f64>>>()?;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&distances)
        .filter(|(_, d)| **d > 0.0)
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    let rate = if pts.len() < 2 {
        f64::INFINITY
    } else {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let stt: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        -sty / stt
    };
    Ok(AttractionReport {
        times: times.to_vec(),
        distances,
        rate,
    })
}

/// Windows and dimension shared by both flows.
#[derive(Debug, Clone, PartialEq)]
pub struct Compatible {
    pub n_star: usize,
    pub windows: WindowTimes,
}

/// Takes the larger dimension, the later window starts and the later entry
/// time of the two flows.
pub fn apply_compatibility(cert: &GapCertificate, par: &WindowTimes, hyp: &WindowTimes) -> Result<Compatible> {
    par.validate()?;
    hyp.validate()?;
    let n_star = cert
        .n_star_hyperbolic
        .map_or(cert.n_star_parabolic, |n| n.max(cert.n_star_parabolic));
    let c = [0, 1, 2].map(|j| par.c[j].max(hyp.c[j]));
    let base = WindowTimes {
        c,
        tau3: 0.0,
        i3_grid: vec![0.0],
        t_horizon: par.t_horizon.max(hyp.t_horizon),
        t_grid_size: par.t_grid_size.max(hyp.t_grid_size),
    };
    let tau3 = par.tau3.max(hyp.tau3);
    let count = par.i3_grid.len().max(hyp.i3_grid.len());
    Ok(Compatible {
        n_star,
        windows: base.with_tau3(tau3, count),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::certify;
    use crate::robustness::semidist;

    fn small_par(n: usize) -> ParabolicConfig {
        ParabolicConfig::unforced(n).with_dt(1e-2).with_cutoff(1.5)
    }

    #[test]
    fn w_grid_shape_and_cap() {
        let g = build_w_grid(2, 5, &GridSpec::default(), 0).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.iter().all(|x| x.coeffs()[2..].iter().all(|c| *c == 0.0)));
        assert!(g.iter().any(|x| x.coeffs()[..2] == [-1.5, 1.5]));
        let big = build_w_grid(26, 32, &GridSpec::default(), 7).unwrap();
        assert_eq!(big.len(), 729);
        let again = build_w_grid(26, 32, &GridSpec::default(), 7).unwrap();
        assert_eq!(big, again);
        let mut keys: Vec<Vec<u64>> = big.iter().map(|x| x.coeffs().iter().map(|c| c.to_bits()).collect()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 729);
    }

    #[test]
    fn w_eps_grid_covers_every_chi() {
        let wp = build_w_grid(4, 6, &GridSpec::default(), 0).unwrap();
        let we = build_w_eps_grid(&wp, 729, 3);
        assert_eq!(we.len(), 81 * 9);
        for chi in &wp {
            assert_eq!(we.iter().filter(|p| &p.u == chi).count(), 9);
        }
        let small = build_w_eps_grid(&wp[..3], 729, 3);
        assert_eq!(small.len(), 9);
    }

    #[test]
    fn origin_maps_to_zero() {
        let zero = SpectralField::zeros(8);
        let g = fit_graph_parabolic(&[zero], 3, &GraphSettings::default(), &small_par(8)).unwrap();
        assert!(g.converged[0]);
        assert_eq!(g.values[0], ProductState::zeros(8));
        let h = HyperbolicConfig::unforced(0.01, 8).with_dt(1e-2).with_cutoff(1.5);
        let g = fit_graph_hyperbolic(&[ProductState::zeros(8)], 3, &GraphSettings::default(), &h).unwrap();
        assert_eq!(g.values[0], ProductState::zeros(8));
    }

    #[test]
    fn diagonal_linear_map_converges_in_one_pass() {
        let xi = parabolic_point(SpectralField::new(vec![0.5, -0.2, 0.0, 0.0]).unwrap());
        let r = relax_point(&xi, 2, &GraphSettings::default(), 0.0, |x| {
            let c: Vec<f64> = x.u.coeffs().iter().enumerate().map(|(k, c)| c * (-(((k + 1) * (k + 1)) as f64)).exp()).collect();
            Ok(parabolic_point(SpectralField::new(c).unwrap()))
        })
        .unwrap();
        assert!(r.converged);
        assert_eq!(r.history, vec![0.0]);
        assert_eq!(r.value, ProductState::zeros(4));
    }

    #[test]
    fn graph_values_live_in_the_complement() {
        let w = build_w_grid(2, 8, &GridSpec::default(), 0).unwrap();
        let g = fit_graph_parabolic(&w, 2, &GraphSettings::default(), &small_par(8)).unwrap();
        assert_eq!(g.n_unconverged(), 0);
        for (v, hist) in g.values.iter().zip(&g.residual_history) {
            assert!(v.u.coeffs()[..2].iter().all(|c| *c == 0.0));
            assert!(hist.windows(2).all(|h| h[1] <= h[0]), "{hist:?}");
        }
        let audit = lipschitz_audit(&g, 0.0, 13.0).unwrap();
        assert!(audit.pairs > 0);
        assert!(audit.passed(0.0), "{audit:?}");
    }

    #[test]
    fn hyperbolic_graph_approaches_parabolic() {
        let w = build_w_grid(2, 8, &GridSpec { half_width: 0.5, ..GridSpec::default() }, 0).unwrap();
        let par = fit_graph_parabolic(&w, 2, &GraphSettings::default(), &small_par(8)).unwrap();
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let h = HyperbolicConfig::unforced(eps, 8).with_dt(1e-2).with_cutoff(1.5);
            let xi: Vec<ProductState> = w.iter().map(|c| ProductState { u: c.clone(), v: SpectralField::zeros(8) }).collect();
            let hyp = fit_graph_hyperbolic(&xi, 2, &GraphSettings::default(), &h).unwrap();
            let gap = par
                .values
                .iter()
                .zip(&hyp.values)
                .map(|(a, b)| (&a.u - &b.u).norm_hs(1.0))
                .fold(0.0, f64::max);
            assert!(gap < last, "eps {eps}: {gap} vs {last}");
            last = gap;
        }
        assert!(last < 1e-3, "{last}");
    }

    #[test]
    fn omega_of_origin_is_origin() {
        let cfg = small_par(6);
        let g = fit_graph_parabolic(&[SpectralField::zeros(6)], 2, &GraphSettings::default(), &cfg).unwrap();
        let windows = WindowTimes {
            t_horizon: 1.0,
            t_grid_size: 3,
            ..WindowTimes::default()
        };
        let fc = FlowConfig::Parabolic(cfg);
        let omega = build_omega_k(&g, &windows, &fc).unwrap();
        assert_eq!(omega.len(), 3);
        assert!(omega.points.iter().all(|p| *p == ProductState::zeros(6)));
        let m = build_compact_manifold(&omega, &windows, &fc).unwrap();
        assert_eq!(m, omega);
    }

    #[test]
    fn empty_graph_is_rejected() {
        let cfg = small_par(6);
        let g = fit_graph_parabolic(&[], 2, &GraphSettings::default(), &cfg).unwrap();
        let err = build_omega_k(&g, &WindowTimes::default(), &FlowConfig::Parabolic(cfg)).unwrap_err();
        assert_eq!(err, CimError::EmptyCloud);
    }

    #[test]
    fn manifold_cardinality_and_invariance() {
        let cfg = small_par(6);
        let w = build_w_grid(2, 6, &GridSpec::default(), 0).unwrap();
        let g = fit_graph_parabolic(&w, 2, &GraphSettings::default(), &cfg).unwrap();
        let windows = WindowTimes {
            t_horizon: 2.0,
            t_grid_size: 21,
            ..WindowTimes::default()
        }
        .with_tau3(0.5, 3);
        let fc = FlowConfig::Parabolic(cfg);
        let omega = build_omega_k(&g, &windows, &fc).unwrap();
        assert_eq!(omega.len(), 9 * 21);
        let m = build_compact_manifold(&omega, &windows, &fc).unwrap();
        assert_eq!(m.len(), 3 * omega.len());
        assert!(m.provenance.iter().all(|p| p.tau >= 0.5 && p.tau <= 1.0));
        // shifting along the flow by 0.1 stays close to the sampled cloud
        let shifted = build_compact_manifold(&omega, &windows.with_tau3(0.1, 1), &fc).unwrap();
        let shifted = ManifoldCloud { provenance: shifted.provenance, ..shifted };
        let d = semidist(&shifted, &omega, 1, 0.0).unwrap();
        assert!(d < 0.05, "{d}");
        assert_eq!(invariance_defect(&omega, 0.1, &fc).unwrap(), d);
    }

    #[test]
    fn attraction_toward_origin_cloud() {
        let cfg = FlowConfig::Parabolic(small_par(6));
        let origin = ManifoldCloud::from_points(FlowKind::Parabolic, vec![ProductState::zeros(6)]);
        let mut c = vec![0.0; 6];
        c[1] = 0.3;
        c[4] = -0.1;
        let x = parabolic_point(SpectralField::new(c).unwrap());
        let r = attraction_audit(&origin, &[x], &linspace(0.0, 2.0, 5), &cfg).unwrap();
        assert!(r.distances.windows(2).all(|d| d[1] < d[0]));
        // the slowest mode present is n = 2, with linear rate λ₂ − 1 = 3
        assert!((r.rate - 3.0).abs() < 0.3, "{}", r.rate);
        assert!(attraction_audit(&origin, &[], &[0.0, 1.0], &cfg).is_err());
    }

    #[test]
    fn compatibility_takes_maxima() {
        let cert = certify(1.5, 1e-3, 200).unwrap();
        let a = WindowTimes::default().with_tau3(1.0, 3);
        let same = apply_compatibility(&cert, &a, &a).unwrap();
        assert_eq!(same.windows, a);
        let b = WindowTimes {
            c: [1.0, 1.0, 2.0],
            t_horizon: 5.0,
            ..WindowTimes::default()
        }
        .with_tau3(2.0, 2);
        let out = apply_compatibility(&cert, &a, &b).unwrap();
        assert_eq!(out.windows.tau3, 2.0);
        assert_eq!(out.windows.c, [1.0, 3f64.ln().max(1.0), 2.0]);
        assert_eq!(out.windows.t_horizon, 10.0);
        assert_eq!(out.windows.i3_grid.len(), 3);
        assert!(out.n_star >= cert.n_star_parabolic);
    }

    #[test]
    fn tau3_zero_branch_and_formula_branch() {
        let cfg = small_par(4);
        let x = parabolic_point(SpectralField::new(vec![0.2, 0.1, 0.0, 0.0]).unwrap());
        let omega = ManifoldCloud::from_points(FlowKind::Parabolic, vec![x]);
        let fc = FlowConfig::Parabolic(cfg);
        let w = WindowTimes { t_horizon: 1.0, ..WindowTimes::default() };
        assert_eq!(entry_tau3(&omega, &w, &fc, 10.0).unwrap(), 0.0);
        let tau = entry_tau3(&omega, &w, &fc, 0.6).unwrap();
        assert!(tau >= 0.0);
    }

    #[test]
    fn cloud_csv_header() {
        let c = ManifoldCloud::from_points(FlowKind::Hyperbolic, vec![ProductState::zeros(2)]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# cim-schema: cloud v1\ntau,t,u_1,u_2,ut_1,ut_2\n"));
    }
}
