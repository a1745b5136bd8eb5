//! Galerkin integration of `p_t − Δp + p³ − p = f` on (0, π) with Dirichlet
//! conditions, and the audits that go with it.
//!
//! Time stepping is exponential Euler: the diagonal linear part `−λ_n` is
//! propagated exactly and the reaction `f − u³ + u` is frozen over a step.

use std::io::Write;
use std::sync::Arc;

use crate::audit::Audit;
use crate::csv;
use crate::error::{domain, CimError, Result};
use crate::flow::{self, Stepper};
use crate::spectral::{eigenvalue, l4_norm4, Reaction, SineGrid, SpectralField};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicConfig {
    pub f: SpectralField,
    pub n_modes: usize,
    pub dt: f64,
    pub use_modified_nonlinearity: bool,
    pub delta: f64,
}

impl ParabolicConfig {
    /// Unforced cubic problem with `n_modes` modes and the default step.
    pub fn unforced(n_modes: usize) -> Self {
        Self {
            f: SpectralField::zeros(n_modes.max(1)),
            n_modes: n_modes.max(1),
            dt: DEFAULT_DT,
            use_modified_nonlinearity: false,
            delta: 1.5,
        }
    }

    pub fn forced(f: SpectralField) -> Self {
        Self {
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

/// Precomputed exponential-Euler coefficients for one configuration.
#[derive(Debug)]
pub struct ParabolicStepper {
    grid: Arc<SineGrid>,
    reaction: Reaction,
    forcing: Vec<f64>,
    dt: f64,
    decay: Vec<f64>,
    phi: Vec<f64>,
    scratch: Vec<f64>,
    nl: Vec<f64>,
}

// (1 − e^{−λh})/λ written to stay accurate for small λh
fn phi1(lambda: f64, h: f64) -> f64 {
    -(-lambda * h).exp_m1() / lambda
}

impl ParabolicStepper {
    pub fn new(cfg: &ParabolicConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_modes;
        let decay = (1..=n).map(|k| (-eigenvalue(k) * cfg.dt).exp()).collect();
        let phi = (1..=n).map(|k| phi1(eigenvalue(k), cfg.dt)).collect();
        Ok(Self {
            grid: SineGrid::shared(n),
            reaction: cfg.reaction()?,
            forcing: cfg.f.coeffs().to_vec(),
            dt: cfg.dt,
            decay,
            phi,
            scratch: Vec::new(),
            nl: vec![0.0; n],
        })
    }

    /// `f + P_N r(u)` where `r` is the configured reaction.
    pub fn reaction_rhs(&mut self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.grid
            .reaction_rhs(u, &self.forcing, self.reaction, &mut self.scratch, &mut out);
        out
    }

    fn advance(&mut self, u: &mut [f64]) {
        self.grid
            .reaction_rhs(u, &self.forcing, self.reaction, &mut self.scratch, &mut self.nl);
        for (k, c) in u.iter_mut().enumerate() {
            *c = self.decay[k] * *c + self.phi[k] * self.nl[k];
        }
    }

    fn advance_by(&mut self, u: &[f64], h: f64) -> Vec<f64> {
        self.grid
            .reaction_rhs(u, &self.forcing, self.reaction, &mut self.scratch, &mut self.nl);
        u.iter()
            .enumerate()
            .map(|(k, c)| {
                let lam = eigenvalue(k + 1);
                (-lam * h).exp() * c + phi1(lam, h) * self.nl[k]
            })
            .collect()
    }
}

impl Stepper for ParabolicStepper {
    type State = Vec<f64>;

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, state: &mut Vec<f64>) {
        self.advance(state);
    }

    fn partial(&mut self, state: &Vec<f64>, h: f64) -> Vec<f64> {
        self.advance_by(state, h)
    }

    fn is_finite(state: &Vec<f64>) -> bool {
        state.iter().all(|c| c.is_finite())
    }
}

fn check_dims(u: &SpectralField, n: usize) -> Result<()> {
    if u.n_modes() != n {
        return Err(CimError::Dimension {
            expected: n,
            got: u.n_modes(),
        });
    }
    Ok(())
}

/// One exponential-Euler step of size `cfg.dt`.
pub fn step(u: &SpectralField, cfg: &ParabolicConfig) -> Result<SpectralField> {
    check_dims(u, cfg.n_modes)?;
    let mut stepper = ParabolicStepper::new(cfg)?;
    let mut c = u.coeffs().to_vec();
    stepper.advance(&mut c);
    SpectralField::new(c).map_err(|_| CimError::BlowUp { time: cfg.dt })
}

/// States at the requested nondecreasing times.
pub fn sample(u0: &SpectralField, times: &[f64], cfg: &ParabolicConfig) -> Result<Vec<SpectralField>> {
    check_dims(u0, cfg.n_modes)?;
    let mut stepper = ParabolicStepper::new(cfg)?;
    let mut out = Vec::with_capacity(times.len());
    flow::walk(&mut stepper, u0.coeffs().to_vec(), times, |_, _, s| {
        out.push(SpectralField::from_vec_unchecked(s.clone()));
        Ok(())
    })?;
    Ok(out)
}

/// State at time `t_end`.
pub fn evolve_to(u0: &SpectralField, t_end: f64, cfg: &ParabolicConfig) -> Result<SpectralField> {
    if !(t_end >= 0.0) {
        return domain(format!("final time {t_end} must be nonnegative"));
    }
    Ok(sample(u0, &[t_end], cfg)?.pop().expect("one sample"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub forcing: SpectralField,
    pub modified: bool,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("a record holds at least the initial state")
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let n = self.states.first().map_or(0, |s| s.n_modes());
        let mut cols = vec!["time".to_string()];
        cols.extend(csv::indexed("coeff", n));
        cols.extend(["l2", "h1", "lyapunov"].map(String::from));
        csv::write_header(w, "trajectory v1", &cols)?;
        for i in 0..self.len() {
            let row = std::iter::once(self.times[i])
                .chain(self.states[i].coeffs().iter().copied())
                .chain([self.l2[i], self.h1[i], self.lyapunov[i]]);
            csv::write_row(w, row)?;
        }
        Ok(())
    }
}

/// Integrates to `t_end`, recording every grid time `k·dt` (and `t_end`).
pub fn evolve(u0: &SpectralField, t_end: f64, cfg: &ParabolicConfig) -> Result<TrajectoryRecord> {
    check_dims(u0, cfg.n_modes)?;
    let times = flow::grid_times(t_end, cfg.dt)?;
    let states = sample(u0, &times, cfg)?;
    let f = &cfg.f;
    let l2 = states.iter().map(|s| s.norm_hs(0.0)).collect();
    let h1 = states.iter().map(|s| s.norm_hs(1.0)).collect();
    let lyapunov = states
        .iter()
        .map(|s| lyapunov(s, f))
        .collect::<Result<_>>()?;
    Ok(TrajectoryRecord {
        times,
        states,
        l2,
        h1,
        lyapunov,
        forcing: f.clone(),
        modified: cfg.use_modified_nonlinearity,
    })
}

/// `‖∇u‖² + ½|u|₄⁴ − ‖u‖² − 2⟨f,u⟩`, nonincreasing along the cubic flow.
pub fn lyapunov(u: &SpectralField, f: &SpectralField) -> Result<f64> {
    check_dims(f, u.n_modes())?;
    let grad = u.norm_hs(1.0);
    let l2 = u.norm_hs(0.0);
    Ok(grad * grad + 0.5 * l4_norm4(u) - l2 * l2 - 2.0 * f.dot(u))
}

/// Bound on `‖p(t)‖²` for the cubic problem:
/// `e^{−2t}‖p₀‖² + ½(‖f‖² + 9π/8)(1 − e^{−2t})`.
pub fn l2_bound(t: f64, u0_l2: f64, f_l2: f64) -> f64 {
    let e = (-2.0 * t).exp();
    e * u0_l2 * u0_l2 + 0.5 * (f_l2 * f_l2 + 9.0 * std::f64::consts::PI / 8.0) * (1.0 - e)
}

fn require_cubic(record: &TrajectoryRecord) -> Result<()> {
    if record.modified {
        return Err(CimError::Config(
            "the a-priori bounds apply to the unmodified cubic flow".into(),
        ));
    }
    Ok(())
}

pub fn check_l2_decay(
    record: &TrajectoryRecord,
    u0: &SpectralField,
    f: &SpectralField,
    slack: f64,
) -> Result<Audit> {
    require_cubic(record)?;
    let mut audit = Audit::new("l2_decay", slack);
    let (a, b) = (u0.norm_hs(0.0), f.norm_hs(0.0));
    for (t, l2) in record.times.iter().zip(&record.l2) {
        audit.record(*t, l2 * l2, l2_bound(*t, a, b));
    }
    Ok(audit)
}

/// Consecutive Lyapunov values may rise by at most `slack_rate · Δt`.
pub fn check_lyapunov_monotone(record: &TrajectoryRecord, slack_rate: f64) -> Audit {
    let mut audit = Audit::new("lyapunov_monotone", 0.0);
    for i in 1..record.len() {
        let dt = record.times[i] - record.times[i - 1];
        audit.record_with_slack(
            record.times[i],
            record.lyapunov[i],
            record.lyapunov[i - 1],
            slack_rate * dt,
        );
    }
    audit
}

/// `C = 2(2‖f‖² + ‖u₀‖² + 3√π)` of the H¹ absorbing estimate.
pub fn h1_absorbing_constant(u0: &SpectralField, f: &SpectralField) -> f64 {
    let (a, b) = (u0.norm_hs(0.0), f.norm_hs(0.0));
    2.0 * (2.0 * b * b + a * a + 3.0 * std::f64::consts::PI.sqrt())
}

/// `‖u(t)‖₁² ≤ 2C` for `t ≥ ln 2`.
pub fn check_h1_absorbing(
    record: &TrajectoryRecord,
    u0: &SpectralField,
    f: &SpectralField,
    slack: f64,
) -> Result<Audit> {
    require_cubic(record)?;
    let c = h1_absorbing_constant(u0, f);
    let mut audit = Audit::new("h1_absorbing", slack);
    for (t, h1) in record.times.iter().zip(&record.h1) {
        if *t >= std::f64::consts::LN_2 {
            audit.record(*t, h1 * h1, 2.0 * c);
        }
    }
    Ok(audit)
}

/// `u ↦ f + Δu − u³ + u`, evaluated with the same pseudospectral cube as the
/// integrator.
pub fn extension_e(u: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    check_dims(f, u.n_modes())?;
    let grid = SineGrid::shared(u.n_modes());
    let mut out = vec![0.0; u.n_modes()];
    let mut scratch = Vec::new();
    grid.reaction_rhs(u.coeffs(), f.coeffs(), Reaction::Cubic, &mut scratch, &mut out);
    for (k, o) in out.iter_mut().enumerate() {
        *o -= eigenvalue(k + 1) * u.coeffs()[k];
    }
    SpectralField::new(out)
}

/// Entry time of a set into the H³ ball of radius `rho`:
/// `(1/c)·ln((‖u₀‖₃² − 1)/(ρ² − C/c))`, clipped below at zero, or zero when
/// the caller already knows the set lies inside.
pub fn entry_time_parabolic(
    u0_h3_norm: f64,
    rho: f64,
    c_big: f64,
    c: f64,
    already_inside: bool,
) -> Result<f64> {
    if !(c > 0.0) {
        return domain(format!("rate c = {c} must be positive"));
    }
    let denom = rho * rho - c_big / c;
    if !(denom > 0.0) {
        return domain(format!("rho² = {} does not exceed C/c = {}", rho * rho, c_big / c));
    }
    if already_inside {
        return Ok(0.0);
    }
    let num = u0_h3_norm * u0_h3_norm - 1.0;
    if num <= denom {
        return Ok(0.0);
    }
    Ok((num / denom).ln() / c)
}

/// Window constant `c_j = ln(j + 2)`.
pub fn window_constant(j: usize) -> f64 {
    ((j + 2) as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    // Galerkin right-hand side with the cube taken by fine Simpson quadrature,
    // independent of the sine tables.
    fn rhs_oracle(u: &[f64], f: &[f64]) -> Vec<f64> {
        let n = u.len();
        let m = 4000;
        let h = PI / m as f64;
        let w = |k: usize, x: f64| (2.0 / PI).sqrt() * (k as f64 * x).sin();
        let mut cube = vec![0.0; n];
        for i in 0..=m {
            let x = i as f64 * h;
            let wt = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let ux: f64 = (0..n).map(|k| u[k] * w(k + 1, x)).sum();
            for k in 0..n {
                cube[k] += wt * ux.powi(3) * w(k + 1, x) * h / 3.0;
            }
        }
        (0..n)
            .map(|k| f[k] - ((k + 1) * (k + 1)) as f64 * u[k] - cube[k] + u[k])
            .collect()
    }

    fn rk4(u: &[f64], f: &[f64], h: f64, sub: usize) -> Vec<f64> {
        let k = h / sub as f64;
        let mut y = u.to_vec();
        let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
        for _ in 0..sub {
            let k1 = rhs_oracle(&y, f);
            let k2 = rhs_oracle(&add(&y, &k1, k / 2.0), f);
            let k3 = rhs_oracle(&add(&y, &k2, k / 2.0), f);
            let k4 = rhs_oracle(&add(&y, &k3, k), f);
            for i in 0..y.len() {
                y[i] += k / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    fn field(c: &[f64]) -> SpectralField {
        SpectralField::new(c.to_vec()).unwrap()
    }

    #[test]
    fn zero_is_fixed() {
        let cfg = ParabolicConfig::unforced(8);
        let z = SpectralField::zeros(8);
        assert_eq!(step(&z, &cfg).unwrap(), z);
    }

    #[test]
    fn tiny_first_mode_moves_cubically() {
        let cfg = ParabolicConfig::unforced(4);
        let c = 1e-3;
        let u = SpectralField::basis(4, 1).unwrap().scale(c);
        let next = step(&u, &cfg).unwrap();
        let change = (&next - &u).norm_hs(0.0);
        assert!(change < 10.0 * cfg.dt * c * c * c, "{change}");
        assert!(change > 0.0);
    }

    #[test]
    fn one_step_defect_is_first_order() {
        let u = [0.4, -0.3, 0.2, 0.1];
        let f = [0.1, 0.0, 0.05, 0.0];
        let defect = |h: f64| {
            let cfg = ParabolicConfig::forced(field(&f)).with_dt(h);
            let ours = step(&field(&u), &cfg).unwrap();
            let reference = rk4(&u, &f, h, 32);
            ours.coeffs()
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        for h in [0.02, 0.01] {
            let ratio = defect(h) / defect(h / 2.0);
            assert!(ratio >= 1.9, "h = {h}: ratio {ratio}");
        }
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let u0 = field(&[0.3, 0.1]);
        let r = evolve(&u0, 0.0, &ParabolicConfig::unforced(2)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.states[0], u0);
        assert_eq!(r.times, vec![0.0]);
    }

    #[test]
    fn semigroup_property() {
        let cfg = ParabolicConfig::forced(field(&[0.1, 0.0, 0.02, 0.0, 0.0, 0.0]));
        let u0 = field(&[0.5, -0.2, 0.1, 0.05, 0.0, -0.01]);
        let half = evolve_to(&u0, 0.5, &cfg).unwrap();
        let twice = evolve_to(&half, 0.5, &cfg).unwrap();
        let once = evolve_to(&u0, 1.0, &cfg).unwrap();
        assert!((&twice - &once).norm_hs(0.0) < 1e-8);
    }

    #[test]
    fn record_times_and_last_state() {
        let cfg = ParabolicConfig::unforced(3).with_dt(0.1);
        let u0 = field(&[0.2, 0.1, 0.0]);
        let r = evolve(&u0, 0.25, &cfg).unwrap();
        assert_eq!(r.times.len(), 4);
        assert_eq!(*r.times.last().unwrap(), 0.25);
        assert!(r.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(r.states.len(), r.times.len());
        let direct = evolve_to(&u0, 0.25, &cfg).unwrap();
        assert_eq!(r.last(), &direct);
    }

    #[test]
    fn one_mode_matches_scalar_ode() {
        // With one mode the projected cube is (3/(2π))c³ and the linear
        // terms cancel, so ċ = −(3/(2π))c³ and c(t) = c₀/√(1 + 3c₀²t/π).
        let c0 = 0.1;
        let exact = c0 / (1.0 + 3.0 * c0 * c0 * 10.0 / PI).sqrt();
        let err = |dt: f64| {
            let cfg = ParabolicConfig::unforced(1).with_dt(dt);
            (evolve_to(&field(&[c0]), 10.0, &cfg).unwrap().coeff(1) - exact).abs()
        };
        let (coarse, fine) = (err(1e-3), err(1e-4));
        assert!(coarse < 1e-5, "{coarse}");
        assert!(fine < 1e-6, "{fine}");
        assert!(coarse / fine > 8.0);
    }

    #[test]
    fn l2_audit_examples() {
        let z = SpectralField::zeros(4);
        let r = evolve(&z, 1.0, &ParabolicConfig::unforced(4)).unwrap();
        assert!(check_l2_decay(&r, &z, &z, DEFAULT_SLACK).unwrap().passed());

        let u0 = SpectralField::basis(8, 1).unwrap();
        let f0 = SpectralField::zeros(8);
        let r = evolve(&u0, 2.0, &ParabolicConfig::unforced(8)).unwrap();
        for (t, l2) in r.times.iter().zip(&r.l2) {
            let e = (-2.0 * t).exp();
            assert!(l2 * l2 <= e + 9.0 * PI / 16.0 * (1.0 - e) + 1e-6);
        }
        assert!(check_l2_decay(&r, &u0, &f0, DEFAULT_SLACK).unwrap().passed());

        let cfg = ParabolicConfig::unforced(8).with_cutoff(1.5);
        let rm = evolve(&u0, 0.01, &cfg).unwrap();
        assert!(check_l2_decay(&rm, &u0, &f0, DEFAULT_SLACK).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let z = SpectralField::zeros(4);
        assert_eq!(lyapunov(&z, &z).unwrap(), 0.0);
        let w1 = SpectralField::basis(4, 1).unwrap();
        // |w₁|₄⁴ = (4/π²)·(3π/8)
        assert_abs_diff_eq!(lyapunov(&w1, &z).unwrap(), 0.5 * 3.0 / (2.0 * PI), epsilon = 1e-13);
    }

    #[test]
    fn extension_map_examples() {
        let f = field(&[0.2, 0.0, -0.1]);
        let z = SpectralField::zeros(3);
        assert_eq!(extension_e(&z, &f).unwrap(), f);

        let u = field(&[0.3, -0.2, 0.1]);
        let e = extension_e(&u, &f).unwrap();
        let oracle = rhs_oracle(u.coeffs(), f.coeffs());
        for k in 0..3 {
            assert_abs_diff_eq!(e.coeffs()[k], oracle[k], epsilon = 1e-12);
        }
        let mut st = ParabolicStepper::new(&ParabolicConfig::forced(f.clone())).unwrap();
        let nl = st.reaction_rhs(u.coeffs());
        for k in 0..3 {
            let lin = -eigenvalue(k + 1) * u.coeffs()[k];
            assert_abs_diff_eq!(e.coeffs()[k], nl[k] + lin, epsilon = 1e-12);
        }
    }

    #[test]
    fn steady_state_is_a_zero_of_e() {
        let f = field(&[0.5, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let cfg = ParabolicConfig::forced(f.clone()).with_dt(0.01);
        let u = evolve_to(&SpectralField::zeros(8), 40.0, &cfg).unwrap();
        let res = extension_e(&u, &f).unwrap().norm_hs(0.0);
        assert!(res <= 1e-6, "{res}");
    }

    #[test]
    fn entry_time_examples() {
        let (rho, cc, c) = (3.0, 2.0, 1.0);
        assert_eq!(entry_time_parabolic(100.0, rho, cc, c, true).unwrap(), 0.0);
        assert_eq!(entry_time_parabolic(1.0, rho, cc, c, false).unwrap(), 0.0);
        let norm = (1.0 + std::f64::consts::E * (rho * rho - cc / c)).sqrt();
        assert_abs_diff_eq!(entry_time_parabolic(norm, rho, cc, c, false).unwrap(), 1.0, epsilon = 1e-12);
        assert!(entry_time_parabolic(1.0, 1.0, 2.0, 1.0, false).is_err());
        assert!(entry_time_parabolic(1.0, 1.0, 2.0, 0.0, false).is_err());
    }

    #[test]
    fn window_constants() {
        assert_abs_diff_eq!(window_constant(0), 2f64.ln());
        assert_abs_diff_eq!(window_constant(1), 3f64.ln());
    }

    #[test]
    fn spectral_self_convergence() {
        let low = [0.6, -0.4, 0.3, 0.2];
        let make = |n: usize| {
            let mut c = vec![0.0; n];
            c[..4].copy_from_slice(&low);
            field(&c)
        };
        let a = evolve_to(&make(16), 1.0, &ParabolicConfig::unforced(16)).unwrap();
        let b = evolve_to(&make(64), 1.0, &ParabolicConfig::unforced(64)).unwrap();
        let mut diff = b.coeffs().to_vec();
        for (d, x) in diff.iter_mut().zip(a.coeffs()) {
            *d -= x;
        }
        let err = crate::spectral::norm_hs_slice(&diff, 1.0);
        assert!(err < 1e-6, "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn lyapunov_nonincreasing(raw in prop::collection::vec(-1.0f64..1.0, 8), fa in -0.5f64..0.5) {
            let mut u0 = field(&raw);
            let h1 = u0.norm_hs(1.0);
            if h1 > 2.0 {
                u0 = u0.scale(2.0 / h1);
            }
            let mut fc = vec![0.0; 8];
            fc[0] = fa;
            let cfg = ParabolicConfig::forced(field(&fc)).with_dt(1e-3);
            let r = evolve(&u0, 1.0, &cfg).unwrap();
            let a = check_lyapunov_monotone(&r, 1e-6);
            prop_assert!(a.passed(), "{:?}", a);
            let l2 = check_l2_decay(&r, &u0, &cfg.f, DEFAULT_SLACK).unwrap();
            prop_assert!(l2.passed(), "{:?}", l2);
        }
    }
}
