//! Sine-spectral representation on the interval (0, π) with homogeneous
//! Dirichlet conditions.
//!
//! A field is stored by its coefficients against the L²-normalised
//! eigenfunctions `w_n(x) = sqrt(2/π) sin(n x)` of `-d²/dx²`, whose eigenvalues
//! are `λ_n = n²`. Nonlinear terms are evaluated pseudospectrally on a uniform
//! grid with `2N + 1` subintervals, which makes the projected cube and the
//! quartic integral exact for fields with `N` modes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

use crate::error::{domain, CimError, Result};

/// Eigenvalue `λ_n = n²` of the Dirichlet Laplacian on (0, π).
#[inline]
pub fn eigenvalue(n: usize) -> f64 {
    debug_assert!(n >= 1);
    (n * n) as f64
}

/// Coefficient vector against the normalised sine basis; `coeffs[n-1]` is the
/// coefficient of `w_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return domain("a spectral field needs at least one mode");
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return domain(format!("coefficient {} is not finite", i + 1));
        }
        Ok(Self { coeffs })
    }

    /// Wraps coefficients produced by this crate's own arithmetic; finiteness
    /// is the caller's responsibility.
    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn zeros(n_modes: usize) -> Self {
        assert!(n_modes >= 1, "n_modes must be at least 1");
        Self {
            coeffs: vec![0.0; n_modes],
        }
    }

    /// The basis vector `e_k` (1-based) scaled by one.
    pub fn basis(n_modes: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n_modes {
            return Err(CimError::Range {
                index: k,
                max: n_modes,
            });
        }
        let mut f = Self::zeros(n_modes);
        f.coeffs[k - 1] = 1.0;
        Ok(f)
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `w_n`, 1-based.
    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs[n - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_vec_unchecked(self.coeffs.iter().map(|c| a * c).collect())
    }

    /// `sqrt(Σ λ_n^s c_n²)`, the norm of `D(A^{s/2})`.
    pub fn norm_hs(&self, s: f64) -> f64 {
        norm_hs_slice(&self.coeffs, s)
    }

    /// L² inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Keeps modes `1..=n`, zeroing the rest.
    pub fn project_p(&self, n: usize) -> Result<Self> {
        self.check_split(n)?;
        let mut out = self.clone();
        out.coeffs[n..].iter_mut().for_each(|c| *c = 0.0);
        Ok(out)
    }

    /// Zeroes modes `1..=n`, keeping the rest.
    pub fn project_q(&self, n: usize) -> Result<Self> {
        self.check_split(n)?;
        let mut out = self.clone();
        out.coeffs[..n].iter_mut().for_each(|c| *c = 0.0);
        Ok(out)
    }

    fn check_split(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.n_modes() {
            return Err(CimError::Range {
                index: n,
                max: self.n_modes(),
            });
        }
        Ok(())
    }

    /// Point values at `x` by direct summation of the sine series.
    pub fn eval(&self, x: f64) -> f64 {
        let norm = (2.0 / PI).sqrt();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * norm * ((i + 1) as f64 * x).sin())
            .sum()
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(
            self.n_modes(),
            other.n_modes(),
            "mode counts differ in field arithmetic"
        );
        Self::from_vec_unchecked(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| op(*a, *b))
                .collect(),
        )
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl Mul<&SpectralField> for f64 {
    type Output = SpectralField;
    fn mul(self, rhs: &SpectralField) -> SpectralField {
        rhs.scale(self)
    }
}

pub(crate) fn norm_hs_slice(coeffs: &[f64], s: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| eigenvalue(i + 1).powf(s) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Element `(u, v)` of `X_k = H_k × H_{k-1}`, usually `(u, u_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    pub u: SpectralField,
    pub v: SpectralField,
}

impl ProductState {
    pub fn new(u: SpectralField, v: SpectralField) -> Result<Self> {
        if u.n_modes() != v.n_modes() {
            return Err(CimError::Dimension {
                expected: u.n_modes(),
                got: v.n_modes(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self {
            u: SpectralField::zeros(n_modes),
            v: SpectralField::zeros(n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.u.n_modes()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn norm_xeps(&self, k: u32, eps: EpsWeight) -> f64 {
        norm_xeps(self, k, eps)
    }
}

impl Add for &ProductState {
    type Output = ProductState;
    fn add(self, rhs: Self) -> ProductState {
        ProductState {
            u: &self.u + &rhs.u,
            v: &self.v + &rhs.v,
        }
    }
}

impl Sub for &ProductState {
    type Output = ProductState;
    fn sub(self, rhs: Self) -> ProductState {
        ProductState {
            u: &self.u - &rhs.u,
            v: &self.v - &rhs.v,
        }
    }
}

/// Weight `ε ∈ [0, 1]` of the velocity component in `X^ε_k`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EpsWeight(f64);

impl EpsWeight {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return domain(format!("eps = {eps} outside [0, 1]"));
        }
        Ok(Self(eps))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `H^s` norm (free-function form of [`SpectralField::norm_hs`]).
pub fn norm_hs(field: &SpectralField, s: f64) -> f64 {
    field.norm_hs(s)
}

/// `sqrt(‖u‖²_k + ε‖v‖²_{k-1})`.
pub fn norm_xeps(state: &ProductState, k: u32, eps: EpsWeight) -> f64 {
    let k = k as f64;
    let nu = state.u.norm_hs(k);
    let nv = state.v.norm_hs(k - 1.0);
    (nu * nu + eps.value() * nv * nv).sqrt()
}

/// Cutoff level of the saturated nonlinearity; `δ > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffParams {
    delta: f64,
}

impl CutoffParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 1.0) || !delta.is_finite() {
            return domain(format!("cutoff delta = {delta} must exceed 1"));
        }
        Ok(Self { delta })
    }

    pub fn delta(self) -> f64 {
        self.delta
    }
}

/// Smooth saturation: identity on `|r| ≤ δ`, then a tanh ramp towards `2δ − 1`.
/// It is C¹, odd, 1-Lipschitz and bounded by `2δ − 1`.
#[inline]
pub fn gamma_cutoff(r: f64, params: CutoffParams) -> f64 {
    let d = params.delta;
    let a = r.abs();
    if a <= d {
        r
    } else {
        r.signum() * (d + (d - 1.0) * ((a - d) / (d - 1.0)).tanh())
    }
}

/// Pointwise reaction term appearing on the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reaction {
    /// `r − r³`
    Cubic,
    /// `γ(r) − γ(r)³`
    Modified(CutoffParams),
}

impl Reaction {
    pub fn from_flag(modified: bool, delta: f64) -> Result<Self> {
        if modified {
            Ok(Reaction::Modified(CutoffParams::new(delta)?))
        } else {
            Ok(Reaction::Cubic)
        }
    }

    #[inline]
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Reaction::Cubic => r - r * r * r,
            Reaction::Modified(p) => {
                let g = gamma_cutoff(r, p);
                g - g * g * g
            }
        }
    }
}

/// Discrete sine transform pair on the dealiasing grid.
///
/// Grid points are `x_j = jπ/M`, `j = 1..M-1`, with `M = 2N + 1`. Analysis
/// uses the trapezoidal weight `π/M`, which integrates every product of
/// degree ≤ 4 in the band-limited field exactly.
#[derive(Debug)]
pub struct SineGrid {
    n_modes: usize,
    n_points: usize,
    weight: f64,
    // table[j * n_modes + (n-1)] = w_n(x_j)
    table: Vec<f64>,
}

static GRID_CACHE: Lazy<Mutex<HashMap<usize, Arc<SineGrid>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

impl SineGrid {
    pub fn new(n_modes: usize) -> Self {
        assert!(n_modes >= 1);
        let m = 2 * n_modes + 1;
        let n_points = m - 1;
        let h = PI / m as f64;
        let norm = (2.0 / PI).sqrt();
        let mut table = Vec::with_capacity(n_points * n_modes);
        for j in 1..=n_points {
            for n in 1..=n_modes {
                // reduce the argument exactly before taking the sine
                let k = (j * n) % (2 * m);
                table.push(norm * (k as f64 * h).sin());
            }
        }
        Self {
            n_modes,
            n_points,
            weight: h,
            table,
        }
    }

    /// Process-wide cached grid for `n_modes`.
    pub fn shared(n_modes: usize) -> Arc<SineGrid> {
        let mut cache = GRID_CACHE.lock().expect("grid cache poisoned");
        cache
            .entry(n_modes)
            .or_insert_with(|| Arc::new(SineGrid::new(n_modes)))
            .clone()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn points(&self) -> Vec<f64> {
        (1..=self.n_points)
            .map(|j| j as f64 * self.weight)
            .collect()
    }

    /// Coefficients to point values.
    pub fn synthesize(&self, coeffs: &[f64], values: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.n_modes);
        debug_assert_eq!(values.len(), self.n_points);
        for (row, out) in self.table.chunks_exact(self.n_modes).zip(values.iter_mut()) {
            *out = row.iter().zip(coeffs).map(|(w, c)| w * c).sum();
        }
    }

    /// Point values to coefficients (first `n_modes` only).
    pub fn analyze(&self, values: &[f64], coeffs: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.n_modes);
        debug_assert_eq!(values.len(), self.n_points);
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        for (row, &g) in self.table.chunks_exact(self.n_modes).zip(values) {
            for (c, w) in coeffs.iter_mut().zip(row) {
                *c += g * w;
            }
        }
        coeffs.iter_mut().for_each(|c| *c *= self.weight);
    }

    /// Trapezoidal integral of point values over (0, π).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weight * values.iter().sum::<f64>()
    }

    /// `f + P_N r(u)` for the pointwise reaction `r`, written into `out`.
    pub fn reaction_rhs(
        &self,
        u: &[f64],
        forcing: &[f64],
        reaction: Reaction,
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        scratch.resize(self.n_points, 0.0);
        self.synthesize(u, scratch);
        scratch.iter_mut().for_each(|x| *x = reaction.eval(*x));
        self.analyze(scratch, out);
        out.iter_mut().zip(forcing).for_each(|(o, f)| *o += f);
    }
}

fn pointwise(field: &SpectralField, op: impl Fn(f64) -> f64) -> SpectralField {
    let grid = SineGrid::shared(field.n_modes());
    let mut values = vec![0.0; grid.n_points()];
    grid.synthesize(field.coeffs(), &mut values);
    values.iter_mut().for_each(|x| *x = op(*x));
    let mut out = vec![0.0; field.n_modes()];
    grid.analyze(&values, &mut out);
    SpectralField::from_vec_unchecked(out)
}

/// Sine coefficients of `u³`, truncated to the field's mode count.
pub fn cubic(field: &SpectralField) -> SpectralField {
    pointwise(field, |x| x * x * x)
}

/// Coefficients of `γ(u)` evaluated on the dealiasing grid.
pub fn gamma_apply(field: &SpectralField, params: CutoffParams) -> SpectralField {
    pointwise(field, |x| gamma_cutoff(x, params))
}

/// `∫₀^π u(x)⁴ dx`.
pub fn l4_norm4(field: &SpectralField) -> f64 {
    let grid = SineGrid::shared(field.n_modes());
    let mut values = vec![0.0; grid.n_points()];
    grid.synthesize(field.coeffs(), &mut values);
    values.iter_mut().for_each(|x| *x = x.powi(4));
    grid.integrate(&values)
}
