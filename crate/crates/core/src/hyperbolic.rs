//! Galerkin integration of `εu_tt + u_t − Δu + u³ − u = f` in the product
//! space of `(u, u_t)`, the splitting `u = v + w` into a decaying part and a
//! smoothing part, and the equivalent norm `N₃`.
//!
//! Each mode carries the linear block `(u, v)' = (v, −(λu + v)/ε)`, which is
//! propagated by its exact 2×2 exponential. The reaction enters the velocity
//! equation as `N/ε` and is frozen over a step, so the full update is
//! `e^{Lh}x + L⁻¹(e^{Lh} − I)(0, N/ε)`.

use std::io::Write;
use std::sync::Arc;

use crate::audit::Audit;
use crate::csv;
use crate::error::{domain, CimError, Result};
use crate::flow::{self, Stepper};
use crate::spectral::{
    eigenvalue, l4_norm4, norm_xeps, EpsWeight, ProductState, Reaction, SineGrid, SpectralField,
};

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicConfig {
    pub eps: f64,
    pub f: SpectralField,
    pub n_modes: usize,
    pub dt: f64,
    pub use_modified_nonlinearity: bool,
    pub delta: f64,
}

impl HyperbolicConfig {
    pub fn unforced(eps: f64, n_modes: usize) -> Self {
        Self {
            eps,
            f: SpectralField::zeros(n_modes.max(1)),
            n_modes: n_modes.max(1),
            dt: DEFAULT_DT,
            use_modified_nonlinearity: false,
            delta: 1.5,
        }
    }

    pub fn forced(eps: f64, f: SpectralField) -> Self {
        Self {
            eps,
            n_modes: f.n_modes(),
            f,
            dt: DEFAULT_DT,
            use_modified_nonlinearity: false,
            delta: 1.5,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_cutoff(mut self, delta: f64) -> Self {
        self.use_modified_nonlinearity = true;
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(CimError::Config(format!("eps = {} outside (0, 1]", self.eps)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(CimError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if self.n_modes == 0 {
            return Err(CimError::Config("n_modes must be at least 1".into()));
        }
        if self.f.n_modes() != self.n_modes {
            return Err(CimError::Dimension {
                expected: self.n_modes,
                got: self.f.n_modes(),
            });
        }
        self.reaction().map(|_| ())
    }

    pub fn reaction(&self) -> Result<Reaction> {
        Reaction::from_flag(self.use_modified_nonlinearity, self.delta)
    }
}

/// Exact propagator of one mode over time `h` together with the response to
/// a constant reaction `N`:
/// `u' = e11·u + e12·v + gu·N`, `v' = e21·u + e22·v + gv·N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoeffs {
    pub e11: f64,
    pub e12: f64,
    pub e21: f64,
    pub e22: f64,
    pub gu: f64,
    pub gv: f64,
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

impl ModeCoeffs {
    pub fn new(lambda: f64, eps: f64, h: f64) -> Self {
        let s = -0.5 / eps;
        let t = 1.0 - 4.0 * eps * lambda;
        // c = e^{sh}·cosh(dh) and q = e^{sh}·sinh(dh)/d, continued to complex d
        let (c, q) = if t >= 0.0 {
            let sq = t.sqrt();
            let d = sq / (2.0 * eps);
            if d * h <= 1.0 {
                let e = (s * h).exp();
                (e * (d * h).cosh(), e * h * sinhc(d * h))
            } else {
                let r1 = -2.0 * lambda / (1.0 + sq);
                let r2 = -(1.0 + sq) / (2.0 * eps);
                let (a, b) = ((r1 * h).exp(), (r2 * h).exp());
                (0.5 * (a + b), (a - b) / (2.0 * d))
            }
        } else {
            let w = (-t).sqrt() / (2.0 * eps);
            let e = (s * h).exp();
            (e * (w * h).cos(), e * (w * h).sin() / w)
        };
        let e11 = c + q / (2.0 * eps);
        let e12 = q;
        let e21 = -lambda / eps * q;
        let e22 = c - q / (2.0 * eps);
        Self {
            e11,
            e12,
            e21,
            e22,
            gu: -(e12 / eps + e22 - 1.0) / lambda,
            gv: e12 / eps,
        }
    }

    #[inline]
    fn apply(&self, u: &mut f64, v: &mut f64, n: f64) {
        let (a, b) = (*u, *v);
        *u = self.e11 * a + self.e12 * b + self.gu * n;
        *v = self.e21 * a + self.e22 * b + self.gv * n;
    }
}

fn mode_table(n: usize, eps: f64, h: f64) -> Vec<ModeCoeffs> {
    (1..=n).map(|k| ModeCoeffs::new(eigenvalue(k), eps, h)).collect()
}

/// How the frozen reaction is formed from the state.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    /// `f + r(u)` with the configured reaction.
    Full(Reaction),
    /// No reaction, no forcing.
    Linear,
}

/// Stepper for the full hyperbolic problem; state is `[u, u_t]`.
#[derive(Debug)]
pub struct HyperbolicStepper {
    grid: Arc<SineGrid>,
    source: Source,
    forcing: Vec<f64>,
    eps: f64,
    dt: f64,
    table: Vec<ModeCoeffs>,
    scratch: Vec<f64>,
    nl: Vec<f64>,
}

impl HyperbolicStepper {
    pub fn new(cfg: &HyperbolicConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::build(cfg, Source::Full(cfg.reaction()?)))
    }

    fn build(cfg: &HyperbolicConfig, source: Source) -> Self {
        let n = cfg.n_modes;
        Self {
            grid: SineGrid::shared(n),
            source,
            forcing: cfg.f.coeffs().to_vec(),
            eps: cfg.eps,
            dt: cfg.dt,
            table: mode_table(n, cfg.eps, cfg.dt),
            scratch: Vec::new(),
            nl: vec![0.0; n],
        }
    }

    fn fill_source(&mut self, u: &[f64]) {
        match self.source {
            Source::Full(r) => {
                self.grid
                    .reaction_rhs(u, &self.forcing, r, &mut self.scratch, &mut self.nl)
            }
            Source::Linear => self.nl.iter_mut().for_each(|x| *x = 0.0),
        }
    }

    fn advance_with(&mut self, state: &mut [Vec<f64>; 2], table: Option<&[ModeCoeffs]>) {
        self.fill_source(&state[0]);
        let table = table.unwrap_or(&self.table);
        let [u, v] = state;
        for k in 0..u.len() {
            table[k].apply(&mut u[k], &mut v[k], self.nl[k]);
        }
    }
}

impl Stepper for HyperbolicStepper {
    type State = [Vec<f64>; 2];

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, state: &mut Self::State) {
        self.advance_with(state, None);
    }

    fn partial(&mut self, state: &Self::State, h: f64) -> Self::State {
        let table = mode_table(state[0].len(), self.eps, h);
        let mut out = state.clone();
        self.advance_with(&mut out, Some(&table));
        out
    }

    fn is_finite(state: &Self::State) -> bool {
        state.iter().flatten().all(|c| c.is_finite())
    }
}

fn check_state(state: &ProductState, n: usize) -> Result<()> {
    if state.u.n_modes() != n || state.v.n_modes() != n {
        return Err(CimError::Dimension {
            expected: n,
            got: state.u.n_modes().max(state.v.n_modes()),
        });
    }
    Ok(())
}

fn to_pair(s: &ProductState) -> [Vec<f64>; 2] {
    [s.u.coeffs().to_vec(), s.v.coeffs().to_vec()]
}

fn from_pair(p: &[Vec<f64>; 2]) -> ProductState {
    ProductState {
        u: SpectralField::from_vec_unchecked(p[0].clone()),
        v: SpectralField::from_vec_unchecked(p[1].clone()),
    }
}

/// One step of size `cfg.dt`.
pub fn step_hyperbolic(state: &ProductState, cfg: &HyperbolicConfig) -> Result<ProductState> {
    check_state(state, cfg.n_modes)?;
    let mut st = HyperbolicStepper::new(cfg)?;
    let mut p = to_pair(state);
    st.step(&mut p);
    if !HyperbolicStepper::is_finite(&p) {
        return Err(CimError::BlowUp { time: cfg.dt });
    }
    Ok(from_pair(&p))
}

/// States at the requested nondecreasing times.
pub fn sample_hyperbolic(
    state0: &ProductState,
    times: &[f64],
    cfg: &HyperbolicConfig,
) -> Result<Vec<ProductState>> {
    check_state(state0, cfg.n_modes)?;
    let mut st = HyperbolicStepper::new(cfg)?;
    let mut out = Vec::with_capacity(times.len());
    flow::walk(&mut st, to_pair(state0), times, |_, _, s| {
        out.push(from_pair(s));
        Ok(())
    })?;
    Ok(out)
}

pub fn evolve_hyperbolic_to(
    state0: &ProductState,
    t_end: f64,
    cfg: &HyperbolicConfig,
) -> Result<ProductState> {
    if !(t_end >= 0.0) {
        return domain(format!("final time {t_end} must be nonnegative"));
    }
    Ok(sample_hyperbolic(state0, &[t_end], cfg)?.pop().expect("one sample"))
}

/// Linear part of the flow alone (no reaction, no forcing) at time `t`.
pub fn linear_flow(state0: &ProductState, t: f64, eps: f64, dt: f64) -> Result<ProductState> {
    let cfg = HyperbolicConfig::unforced(eps, state0.n_modes()).with_dt(dt);
    cfg.validate()?;
    check_state(state0, cfg.n_modes)?;
    let mut st = HyperbolicStepper::build(&cfg, Source::Linear);
    let mut out = None;
    flow::walk(&mut st, to_pair(state0), &[t], |_, _, s| {
        out = Some(from_pair(s));
        Ok(())
    })?;
    Ok(out.expect("one sample"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicTrajectory {
    pub eps: f64,
    pub times: Vec<f64>,
    pub states: Vec<ProductState>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub n3: Vec<f64>,
    pub energy: Vec<f64>,
}

impl HyperbolicTrajectory {
    fn from_states(
        eps: f64,
        times: Vec<f64>,
        states: Vec<ProductState>,
        f: &SpectralField,
    ) -> Result<Self> {
        let w = EpsWeight::new(eps)?;
        let x1 = states.iter().map(|s| norm_xeps(s, 1, w)).collect();
        let x2 = states.iter().map(|s| norm_xeps(s, 2, w)).collect();
        let n3 = states
            .iter()
            .map(|s| norm_n3(s, eps))
            .collect::<Result<_>>()?;
        let energy = states
            .iter()
            .map(|s| hyperbolic_energy(s, f, eps))
            .collect::<Result<_>>()?;
        Ok(Self {
            eps,
            times,
            states,
            x1,
            x2,
            n3,
            energy,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &ProductState {
        self.states.last().expect("a trajectory holds at least the initial state")
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let n = self.states.first().map_or(0, |s| s.n_modes());
        let mut cols = vec!["time".to_string()];
        cols.extend(csv::indexed("u", n));
        cols.extend(csv::indexed("ut", n));
        cols.extend(["x1", "x2", "n3"].map(String::from));
        csv::write_header(w, "hyperbolic-trajectory v1", &cols)?;
        for i in 0..self.len() {
            let s = &self.states[i];
            let row = std::iter::once(self.times[i])
                .chain(s.u.coeffs().iter().copied())
                .chain(s.v.coeffs().iter().copied())
                .chain([self.x1[i], self.x2[i], self.n3[i]]);
            csv::write_row(w, row)?;
        }
        Ok(())
    }
}

/// Integrates to `t_end`, recording every grid time and `t_end`.
pub fn evolve_hyperbolic(
    state0: &ProductState,
    t_end: f64,
    cfg: &HyperbolicConfig,
) -> Result<HyperbolicTrajectory> {
    let times = flow::grid_times(t_end, cfg.dt)?;
    let states = sample_hyperbolic(state0, &times, cfg)?;
    HyperbolicTrajectory::from_states(cfg.eps, times, states, &cfg.f)
}

/// `ε‖u_t‖² + ‖∇u‖² + ½|u|₄⁴ − ‖u‖² − 2⟨f,u⟩`, nonincreasing along the cubic
/// flow.
pub fn hyperbolic_energy(state: &ProductState, f: &SpectralField, eps: f64) -> Result<f64> {
    check_state(state, f.n_modes())?;
    let vt = state.v.norm_hs(0.0);
    let grad = state.u.norm_hs(1.0);
    let l2 = state.u.norm_hs(0.0);
    Ok(eps * vt * vt + grad * grad + 0.5 * l4_norm4(&state.u) - l2 * l2 - 2.0 * f.dot(&state.u))
}

/// Consecutive energies may rise by at most `slack_per_step`.
pub fn check_energy_monotone(traj: &HyperbolicTrajectory, slack_per_step: f64) -> Audit {
    let mut audit = Audit::new("hyperbolic_energy_monotone", 0.0);
    for i in 1..traj.len() {
        audit.record_with_slack(traj.times[i], traj.energy[i], traj.energy[i - 1], slack_per_step);
    }
    audit
}

/// `ε‖Δu_t‖² + ε⟨Δu_t, Δu⟩ + ½‖Δu‖² + ‖∇Δu‖²` for the state `(u, u_t)`.
pub fn norm_n3(state: &ProductState, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return domain(format!("eps = {eps} outside (0, 1]"));
    }
    check_state(state, state.u.n_modes())?;
    Ok(state
        .u
        .coeffs()
        .iter()
        .zip(state.v.coeffs())
        .enumerate()
        .map(|(k, (u, v))| {
            let l = eigenvalue(k + 1);
            let l2 = l * l;
            eps * l2 * v * v + eps * l2 * u * v + 0.5 * l2 * u * u + l2 * l * u * u
        })
        .sum())
}

/// `5·ln(2(N₃(0) − 5C₃)/(ρ² − 10C₃))`, or zero when `N₃(0) ≤ 5C₃` or the
/// argument does not exceed one.
pub fn entry_time_hyperbolic(n3_at_0: f64, rho: f64, c3: f64) -> Result<f64> {
    let denom = rho * rho - 10.0 * c3;
    if !(denom > 0.0) {
        return domain(format!("rho² = {} does not exceed 10·C₃ = {}", rho * rho, 10.0 * c3));
    }
    if n3_at_0 <= 5.0 * c3 {
        return Ok(0.0);
    }
    let arg = 2.0 * (n3_at_0 - 5.0 * c3) / denom;
    if arg <= 1.0 {
        return Ok(0.0);
    }
    Ok(5.0 * arg.ln())
}

/// Runs of `v` (data `state0`, reaction `−v³`, no forcing) and `w` (zero
/// data, source `f + v³ + r(v + w)`) on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedTrajectory {
    pub eps: f64,
    pub times: Vec<f64>,
    pub v_states: Vec<ProductState>,
    pub w_states: Vec<ProductState>,
    pub u_states: Vec<ProductState>,
}

impl DecomposedTrajectory {
    /// Largest componentwise gap between `u` and `v + w`.
    pub fn max_split_defect(&self) -> f64 {
        self.u_states
            .iter()
            .zip(self.v_states.iter().zip(&self.w_states))
            .map(|(u, (v, w))| {
                let s = v + w;
                u.u.coeffs()
                    .iter()
                    .zip(s.u.coeffs())
                    .chain(u.v.coeffs().iter().zip(s.v.coeffs()))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Stepper for the pair `(v, w)`; state is `[v, v_t, w, w_t]`.
#[derive(Debug)]
pub struct DecomposedStepper {
    grid: Arc<SineGrid>,
    reaction: Reaction,
    forcing: Vec<f64>,
    eps: f64,
    dt: f64,
    table: Vec<ModeCoeffs>,
    vx: Vec<f64>,
    wx: Vec<f64>,
    nv: Vec<f64>,
    nw: Vec<f64>,
}

impl DecomposedStepper {
    pub fn new(cfg: &HyperbolicConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_modes;
        let grid = SineGrid::shared(n);
        let m = grid.n_points();
        Ok(Self {
            grid,
            reaction: cfg.reaction()?,
            forcing: cfg.f.coeffs().to_vec(),
            eps: cfg.eps,
            dt: cfg.dt,
            table: mode_table(n, cfg.eps, cfg.dt),
            vx: vec![0.0; m],
            wx: vec![0.0; m],
            nv: vec![0.0; n],
            nw: vec![0.0; n],
        })
    }

    fn sources(&mut self, v: &[f64], w: &[f64]) {
        self.grid.synthesize(v, &mut self.vx);
        self.grid.synthesize(w, &mut self.wx);
        let r = self.reaction;
        for (a, b) in self.vx.iter_mut().zip(self.wx.iter_mut()) {
            let cube = *a * *a * *a;
            *b = cube + r.eval(*a + *b);
            *a = -cube;
        }
        self.grid.analyze(&self.vx, &mut self.nv);
        self.grid.analyze(&self.wx, &mut self.nw);
        self.nw.iter_mut().zip(&self.forcing).for_each(|(x, f)| *x += f);
    }

    fn advance_with(&mut self, state: &mut [Vec<f64>; 4], table: Option<&[ModeCoeffs]>) {
        let [vu, vv, wu, wv] = state;
        self.sources(vu, wu);
        let table = table.unwrap_or(&self.table);
        for k in 0..vu.len() {
            table[k].apply(&mut vu[k], &mut vv[k], self.nv[k]);
            table[k].apply(&mut wu[k], &mut wv[k], self.nw[k]);
        }
    }
}

impl Stepper for DecomposedStepper {
    type State = [Vec<f64>; 4];

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, state: &mut Self::State) {
        self.advance_with(state, None);
    }

    fn partial(&mut self, state: &Self::State, h: f64) -> Self::State {
        let table = mode_table(state[0].len(), self.eps, h);
        let mut out = state.clone();
        self.advance_with(&mut out, Some(&table));
        out
    }

    fn is_finite(state: &Self::State) -> bool {
        state.iter().flatten().all(|c| c.is_finite())
    }
}

/// `(v, w)` pairs at the requested times, with `v(0) = state0`, `w(0) = 0`.
pub fn sample_decomposed(
    state0: &ProductState,
    times: &[f64],
    cfg: &HyperbolicConfig,
) -> Result<Vec<(ProductState, ProductState)>> {
    check_state(state0, cfg.n_modes)?;
    let mut st = DecomposedStepper::new(cfg)?;
    let n = cfg.n_modes;
    let s0 = [
        state0.u.coeffs().to_vec(),
        state0.v.coeffs().to_vec(),
        vec![0.0; n],
        vec![0.0; n],
    ];
    let mut out = Vec::with_capacity(times.len());
    flow::walk(&mut st, s0, times, |_, _, s| {
        let [a, b, c, d] = s.clone();
        out.push((from_pair(&[a, b]), from_pair(&[c, d])));
        Ok(())
    })?;
    Ok(out)
}

/// Co-integrates `v`, `w` and the full problem on the grid `k·dt`.
pub fn evolve_decomposed(
    state0: &ProductState,
    t_end: f64,
    cfg: &HyperbolicConfig,
) -> Result<DecomposedTrajectory> {
    let times = flow::grid_times(t_end, cfg.dt)?;
    let pairs = sample_decomposed(state0, &times, cfg)?;
    let u_states = sample_hyperbolic(state0, &times, cfg)?;
    let (v_states, w_states) = pairs.into_iter().unzip();
    Ok(DecomposedTrajectory {
        eps: cfg.eps,
        times,
        v_states,
        w_states,
        u_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn field(c: &[f64]) -> SpectralField {
        SpectralField::new(c.to_vec()).unwrap()
    }

    fn state(u: &[f64], v: &[f64]) -> ProductState {
        ProductState::new(field(u), field(v)).unwrap()
    }

    // Closed-form solution of εu'' + u' + λu = 0 by cases on the discriminant.
    fn linear_oracle(lambda: f64, eps: f64, u0: f64, v0: f64, t: f64) -> (f64, f64) {
        let disc = 1.0 - 4.0 * eps * lambda;
        if disc == 0.0 {
            let r = -1.0 / (2.0 * eps);
            let b = v0 - r * u0;
            let e = (r * t).exp();
            (e * (u0 + b * t), e * (r * (u0 + b * t) + b))
        } else if disc > 0.0 {
            let r1 = (-1.0 + disc.sqrt()) / (2.0 * eps);
            let r2 = (-1.0 - disc.sqrt()) / (2.0 * eps);
            let b = (v0 - r1 * u0) / (r2 - r1);
            let a = u0 - b;
            let (e1, e2) = ((r1 * t).exp(), (r2 * t).exp());
            (a * e1 + b * e2, a * r1 * e1 + b * r2 * e2)
        } else {
            let s = -1.0 / (2.0 * eps);
            let w = (-disc).sqrt() / (2.0 * eps);
            let b = (v0 - s * u0) / w;
            let e = (s * t).exp();
            let (c, sn) = ((w * t).cos(), (w * t).sin());
            (e * (u0 * c + b * sn), e * (s * (u0 * c + b * sn) + w * (-u0 * sn + b * c)))
        }
    }

    #[test]
    fn zero_state_is_fixed() {
        let cfg = HyperbolicConfig::unforced(0.1, 6);
        let z = ProductState::zeros(6);
        assert_eq!(step_hyperbolic(&z, &cfg).unwrap(), z);
    }

    #[test]
    fn double_root_mode_matches_closed_form() {
        // ε = 1/4, λ = 1: both roots sit at −2 and u = (u₀ + (v₀ + 2u₀)t)e^{−2t}
        let s0 = state(&[1.0], &[0.0]);
        for t in [0.0, 0.5, 1.0, 3.0] {
            let s = linear_flow(&s0, t, 0.25, 1e-3).unwrap();
            let exact = (1.0 + 2.0 * t) * (-2.0 * t).exp();
            assert_abs_diff_eq!(s.u.coeff(1), exact, epsilon = 1e-9);
            assert_abs_diff_eq!(s.v.coeff(1), -4.0 * t * (-2.0 * t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn steady_state_is_preserved() {
        // u = c·w₁ with u_t = 0 solves the linear problem with source c·λ₁
        for eps in [1.0, 0.01, 1e-5] {
            let m = ModeCoeffs::new(1.0, eps, 1e-3);
            let (mut u, mut v) = (2.0, 0.0);
            for _ in 0..100 {
                m.apply(&mut u, &mut v, 2.0);
            }
            assert_abs_diff_eq!(u, 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn semigroup_and_zero_horizon() {
        let cfg = HyperbolicConfig::forced(0.1, field(&[0.2, 0.0, 0.1, 0.0]));
        let s0 = state(&[0.5, 0.1, -0.1, 0.05], &[0.0, 0.3, 0.0, -0.2]);
        let t0 = evolve_hyperbolic(&s0, 0.0, &cfg).unwrap();
        assert_eq!(t0.len(), 1);
        assert_eq!(t0.states[0], s0);
        let half = evolve_hyperbolic_to(&s0, 0.5, &cfg).unwrap();
        let twice = evolve_hyperbolic_to(&half, 0.5, &cfg).unwrap();
        let once = evolve_hyperbolic_to(&s0, 1.0, &cfg).unwrap();
        let d = (&twice - &once).norm_xeps(1, EpsWeight::new(0.1).unwrap());
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn n3_examples() {
        assert_eq!(norm_n3(&ProductState::zeros(3), 0.5).unwrap(), 0.0);
        let s = state(&[1.0, 0.0], &[0.0, 0.0]);
        for eps in [1.0, 0.3, 1e-4] {
            assert_abs_diff_eq!(norm_n3(&s, eps).unwrap(), 1.5, epsilon = 1e-15);
        }
        assert!(norm_n3(&s, 0.0).is_err());
    }

    #[test]
    fn entry_time_examples() {
        assert_eq!(entry_time_hyperbolic(5.0, 10.0, 1.0).unwrap(), 0.0);
        // 2(N − 5C)/(ρ² − 10C) = e with C = 1, ρ² = 20
        let n3 = 5.0 + std::f64::consts::E * 10.0 / 2.0;
        assert_abs_diff_eq!(entry_time_hyperbolic(n3, 20f64.sqrt(), 1.0).unwrap(), 5.0, epsilon = 1e-12);
        assert_eq!(entry_time_hyperbolic(5.5, 20f64.sqrt(), 1.0).unwrap(), 0.0);
        assert!(entry_time_hyperbolic(1.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn decomposition_trivial_cases() {
        let z = ProductState::zeros(4);
        let cfg = HyperbolicConfig::unforced(0.1, 4).with_dt(0.01);
        let d = evolve_decomposed(&z, 1.0, &cfg).unwrap();
        for i in 0..d.times.len() {
            assert_eq!(d.v_states[i], z);
            assert_eq!(d.w_states[i], z);
            assert_eq!(d.u_states[i], z);
        }
        let f = field(&[0.3, 0.0, 0.1, 0.0]);
        let cfg = HyperbolicConfig::forced(0.1, f).with_dt(0.01);
        let d = evolve_decomposed(&z, 1.0, &cfg).unwrap();
        for i in 0..d.times.len() {
            assert_eq!(d.v_states[i], z);
            assert!(d.max_split_defect() < 1e-14);
        }
    }

    #[test]
    fn csv_dump_has_schema() {
        let cfg = HyperbolicConfig::unforced(0.5, 2).with_dt(0.1);
        let t = evolve_hyperbolic(&state(&[0.1, 0.0], &[0.0, 0.1]), 0.2, &cfg).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# cim-schema: hyperbolic-trajectory v1");
        assert_eq!(lines.next().unwrap(), "time,u_1,u_2,ut_1,ut_2,x1,x2,n3");
        assert_eq!(lines.count(), 3);
    }

    proptest! {
        #[test]
        fn linear_block_is_exact(
            log_eps in -4.0f64..0.0,
            k in 1usize..12,
            u0 in -1.0f64..1.0,
            v0 in -1.0f64..1.0,
            dt in 1e-4f64..0.2,
        ) {
            let eps = 10f64.powf(log_eps);
            let lambda = eigenvalue(k);
            let mut u = vec![0.0; 12];
            let mut v = vec![0.0; 12];
            u[k - 1] = u0;
            v[k - 1] = v0;
            let t = 0.7;
            let s = linear_flow(&state(&u, &v), t, eps, dt).unwrap();
            let (eu, ev) = linear_oracle(lambda, eps, u0, v0, t);
            prop_assert!((s.u.coeff(k) - eu).abs() <= 1e-9 * (1.0 + eu.abs()));
            prop_assert!((s.v.coeff(k) - ev).abs() <= 1e-9 * (1.0 + ev.abs()));
        }

        #[test]
        fn n3_sandwich(
            raw in prop::collection::vec(-1.0f64..1.0, 16),
            log_eps in -3.0f64..0.0,
        ) {
            let eps = 10f64.powf(log_eps);
            let s = state(&raw[..8], &raw[8..]);
            let x3 = s.norm_xeps(3, EpsWeight::new(eps).unwrap());
            let n3 = norm_n3(&s, eps).unwrap();
            prop_assert!(0.5 * x3 * x3 <= n3 * (1.0 + 1e-12));
            prop_assert!(n3 <= 2.5 * x3 * x3 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_nonincreasing_small_data() {
        for eps in [1.0, 0.1, 0.01] {
            let cfg = HyperbolicConfig::unforced(eps, 8);
            let s0 = state(
                &[0.3, -0.2, 0.1, 0.0, 0.05, 0.0, 0.0, 0.0],
                &[0.1, 0.2, 0.0, -0.1, 0.0, 0.0, 0.0, 0.0],
            );
            let t = evolve_hyperbolic(&s0, 2.0, &cfg).unwrap();
            let a = check_energy_monotone(&t, 1e-6);
            assert!(a.passed(), "eps {eps}: {a:?}");
        }
    }
}
