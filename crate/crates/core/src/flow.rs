//! Fixed-step time marching shared by both semiflows.
//!
//! The main trajectory always advances on the grid `k·dt`. A requested time
//! that falls between grid points is served by a side step of the remaining
//! length from the preceding grid state, so the trajectory itself never
//! leaves the grid and restarted runs stay bitwise comparable.

use crate::error::{domain, CimError, Result};

pub(crate) trait Stepper {
    type State: Clone;

    fn dt(&self) -> f64;
    fn step(&mut self, state: &mut Self::State);
    fn partial(&mut self, state: &Self::State, h: f64) -> Self::State;
    fn is_finite(state: &Self::State) -> bool;
}

// Relative tolerance for deciding that a requested time sits on the grid.
const GRID_SNAP: f64 = 1e-9;

/// Marches `s0` and calls `visit(i, t_i, state)` for each requested time.
/// `times` must be nondecreasing and nonnegative.
pub(crate) fn walk<S: Stepper>(
    stepper: &mut S,
    s0: S::State,
    times: &[f64],
    mut visit: impl FnMut(usize, f64, &S::State) -> Result<()>,
) -> Result<()> {
    let dt = stepper.dt();
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev) || !t.is_finite() {
            return domain(format!("sample times must be finite and nondecreasing, got {t}"));
        }
        prev = t;
    }
    let mut state = s0;
    let mut k: u64 = 0;
    for (i, &t) in times.iter().enumerate() {
        let ratio = t / dt;
        let nearest = ratio.round();
        let (target, rem) = if (ratio - nearest).abs() <= GRID_SNAP * nearest.max(1.0) {
            (nearest as u64, 0.0)
        } else {
            let fl = ratio.floor();
            (fl as u64, t - fl * dt)
        };
        while k < target {
            stepper.step(&mut state);
            k += 1;
            if !S::is_finite(&state) {
                return Err(CimError::BlowUp { time: k as f64 * dt });
            }
        }
        if rem > 0.0 {
            let side = stepper.partial(&state, rem);
            if !S::is_finite(&side) {
                return Err(CimError::BlowUp { time: t });
            }
            visit(i, t, &side)?;
        } else {
            visit(i, t, &state)?;
        }
    }
    Ok(())
}

/// `{0, dt, 2dt, …}` up to `t_end`, with `t_end` itself appended when it is
/// off the grid.
pub(crate) fn grid_times(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return domain(format!("final time {t_end} must be finite and nonnegative"));
    }
    let ratio = t_end / dt;
    let nearest = ratio.round();
    let on_grid = (ratio - nearest).abs() <= GRID_SNAP * nearest.max(1.0);
    let n = if on_grid { nearest as u64 } else { ratio.floor() as u64 };
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    if on_grid {
        *times.last_mut().expect("nonempty") = t_end;
    } else {
        times.push(t_end);
    }
    Ok(times)
}

/// `count` equispaced points on `[a, b]`; a single point sits at `a`.
pub(crate) fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
