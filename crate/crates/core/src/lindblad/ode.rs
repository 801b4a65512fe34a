//! Dormand–Prince 5(4) with a PI step-size controller, specialised to flat
//! complex state vectors.

use crate::error::{Error, Result};
use crate::fock::{C64, ZERO};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub last_h: f64,
}

pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]);
}

pub struct Integrator {
    n: usize,
    k: Vec<Vec<C64>>,
    y_stage: Vec<C64>,
    y_new: Vec<C64>,
    fsal_valid: bool,
    h: f64,
    err_prev: f64,
    pub opts: OdeOptions,
    pub stats: OdeStats,
}

impl Integrator {
    pub fn new(n: usize, opts: OdeOptions) -> Self {
        Self {
            n,
            k: (0..7).map(|_| vec![ZERO; n]).collect(),
            y_stage: vec![ZERO; n],
            y_new: vec![ZERO; n],
            fsal_valid: false,
            h: 0.0,
            err_prev: 1e-4,
            opts,
            stats: OdeStats::default(),
        }
    }

    /// Forget the cached derivative, e.g. after a discontinuity in the RHS.
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    fn scaled_max(&self, v: &[C64], y: &[C64]) -> f64 {
        v.iter()
            .zip(y)
            .map(|(a, b)| a.norm() / (self.opts.atol + self.opts.rtol * b.norm()))
            .fold(0.0, f64::max)
    }

    fn initial_step(&mut self, f: &mut impl Rhs, t: f64, y: &[C64], span: f64) -> f64 {
        let d0 = self.scaled_max(y, y);
        let d1 = self.scaled_max(&self.k[0], y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span).min(self.opts.h_max);
        // Second-derivative probe.
        for i in 0..self.n {
            self.y_stage[i] = y[i] + self.k[0][i] * h0;
        }
        let mut probe = vec![ZERO; self.n];
        f.eval(t + h0, &self.y_stage, &mut probe);
        self.stats.rhs_evals += 1;
        let diff: Vec<C64> = probe.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.scaled_max(&diff, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span).min(self.opts.h_max)
    }

    /// Advance `y` from `t` to exactly `t_end`.
    pub fn advance(&mut self, f: &mut impl Rhs, t: &mut f64, y: &mut [C64], t_end: f64) -> Result<()> {
        if t_end <= *t {
            return Ok(());
        }
        let scale = t_end.abs().max(t.abs()).max(t_end - *t);
        if t_end - *t <= 1e-13 * scale {
            // Rounding leftovers between nearly coincident stops.
            *t = t_end;
            return Ok(());
        }
        if !self.fsal_valid {
            f.eval(*t, y, &mut self.k[0]);
            self.stats.rhs_evals += 1;
            self.fsal_valid = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(f, *t, y, t_end - *t);
        }
        while *t < t_end {
            let remaining = t_end - *t;
            if remaining <= 1e-13 * scale {
                // Rounding leftovers between nearly coincident stops.
                *t = t_end;
                break;
            }
            let clipped = self.h >= remaining * (1.0 - 1e-12);
            let h = if clipped { remaining } else { self.h };
            if h < 1e-14 * scale {
                return Err(Error::StepUnderflow { t: *t, h });
            }
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::StepBudget(self.opts.max_steps));
            }
            for s in 1..7 {
                for i in 0..self.n {
                    let mut acc = y[i];
                    for j in 0..s {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += self.k[j][i] * (a * h);
                        }
                    }
                    self.y_stage[i] = acc;
                }
                if s == 6 {
                    self.y_new.copy_from_slice(&self.y_stage);
                }
                let (_, tail) = self.k.split_at_mut(s);
                f.eval(*t + C[s] * h, &self.y_stage, &mut tail[0]);
                self.stats.rhs_evals += 1;
            }
            let mut err: f64 = 0.0;
            for i in 0..self.n {
                let mut e = ZERO;
                for j in 0..7 {
                    if E[j] != 0.0 {
                        e += self.k[j][i] * E[j];
                    }
                }
                let sc = self.opts.atol + self.opts.rtol * y[i].norm().max(self.y_new[i].norm());
                err = err.max((e * h).norm() / sc);
            }
            if !err.is_finite() {
                self.h = h * 0.1;
                self.stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                *t = if clipped { t_end } else { *t + h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                self.stats.last_h = h;
                let fac = (0.9 * err.max(1e-10).powf(-0.17) * self.err_prev.powf(0.04)).clamp(0.2, 5.0);
                self.err_prev = err.max(1e-4);
                let h_next = (h * fac).min(self.opts.h_max);
                // A step shortened to hit a stop says nothing about the
                // natural step; keep the larger one.
                self.h = if clipped { h_next.max(self.h) } else { h_next };
            } else {
                self.stats.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
            }
        }
        Ok(())
    }
}
