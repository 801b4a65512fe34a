//! Lindblad master equations: construction, adaptive integration, steady
//! states and input–output records.

mod io;
pub mod ode;
mod sparse;
mod steady;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{hermiticity_error, min_eigenvalue, trace_product, Op, ProductSpace, State, C64, I, ZERO};
use crate::timeop::{Coeff, TimeOp};
use ode::{Integrator, OdeOptions, OdeStats, Rhs};
use sparse::{adjoint_into, Csr, PatternSum};

pub use io::{write_trajectory_csv, TrajectoryMeta};
pub use steady::steady_state;

/// `ρ̇ = −i[H(t), ρ] + Σ c 𝓛[L]ρ + Σ c (𝓛₂[A,B] + 𝓛₂[B,A])ρ`, rates in 1/s
/// and H in rad/s.
#[derive(Clone, Debug)]
pub struct MasterEq {
    space: ProductSpace,
    hamiltonian: TimeOp,
    collapse: Vec<(f64, Op)>,
    thermal: Vec<(f64, Op)>,
    cross: Vec<(f64, Op, Op)>,
    breakpoints: Vec<f64>,
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dissipator rate must be non-negative, got {rate}")))
    }
}

impl MasterEq {
    pub fn new(hamiltonian: impl Into<TimeOp>) -> Self {
        let hamiltonian = hamiltonian.into();
        Self {
            space: hamiltonian.space().clone(),
            hamiltonian,
            collapse: Vec::new(),
            thermal: Vec::new(),
            cross: Vec::new(),
            breakpoints: Vec::new(),
        }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn hamiltonian(&self) -> &TimeOp {
        &self.hamiltonian
    }

    pub fn collapse(&self) -> &[(f64, Op)] {
        &self.collapse
    }

    pub fn thermal(&self) -> &[(f64, Op)] {
        &self.thermal
    }

    pub fn cross(&self) -> &[(f64, Op, Op)] {
        &self.cross
    }

    /// Add `rate·𝓛[op]`. Zero rates are dropped.
    pub fn add_collapse(&mut self, rate: f64, op: Op) -> Result<()> {
        check_rate(rate)?;
        self.space.check_same(op.space())?;
        if rate > 0.0 {
            self.collapse.push((rate, op));
        }
        Ok(())
    }

    /// Add a thermal excitation term `rate·𝓛[op]`, where `rate` already
    /// includes n_th and `op` is a raising operator.
    pub fn add_thermal(&mut self, rate: f64, op: Op) -> Result<()> {
        check_rate(rate)?;
        self.space.check_same(op.space())?;
        if rate > 0.0 {
            self.thermal.push((rate, op));
        }
        Ok(())
    }

    /// Add `rate·(𝓛₂[A,B] + 𝓛₂[B,A])`.
    pub fn add_cross(&mut self, rate: f64, a: Op, b: Op) -> Result<()> {
        check_rate(rate)?;
        self.space.check_same(a.space())?;
        self.space.check_same(b.space())?;
        if rate > 0.0 {
            self.cross.push((rate, a, b));
        }
        Ok(())
    }

    pub fn with_collapse(mut self, rate: f64, op: Op) -> Result<Self> {
        self.add_collapse(rate, op)?;
        Ok(self)
    }

    pub fn with_thermal(mut self, rate: f64, op: Op) -> Result<Self> {
        self.add_thermal(rate, op)?;
        Ok(self)
    }

    pub fn with_cross(mut self, rate: f64, a: Op, b: Op) -> Result<Self> {
        self.add_cross(rate, a, b)?;
        Ok(self)
    }

    /// Times at which H(t) has kinks or jumps.
    pub fn add_breakpoints(&mut self, times: impl IntoIterator<Item = f64>) {
        self.breakpoints.extend(times);
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn has_dissipators(&self) -> bool {
        !(self.collapse.is_empty() && self.thermal.is_empty() && self.cross.is_empty())
    }

    fn local(&self) -> impl Iterator<Item = &(f64, Op)> {
        self.collapse.iter().chain(self.thermal.iter())
    }

    /// `Σ c L†L + Σ c (A†B + B†A)`.
    fn decay_operator(&self) -> Op {
        let mut m = Op::zero(&self.space);
        for (c, l) in self.local() {
            m += &(&l.dag() * l).scale(*c);
        }
        for (c, a, b) in &self.cross {
            let ab = &a.dag() * b;
            m += &(&ab + &ab.dag()).scale(*c);
        }
        m
    }

    /// Dense evaluation of the generator on a density matrix.
    pub fn apply(&self, t: f64, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let h = self.hamiltonian.at(t);
        let h = h.matrix();
        let mut out = (h * rho - rho * h) * (-I);
        let half = C64::from(0.5);
        for (c, l) in self.local() {
            let l = l.matrix();
            let ldl = l.adjoint() * l;
            out += (l * rho * l.adjoint() - (&ldl * rho + rho * &ldl) * half) * C64::from(*c);
        }
        for (c, a, b) in &self.cross {
            let (a, b) = (a.matrix(), b.matrix());
            let ab = a.adjoint() * b;
            let ba = b.adjoint() * a;
            let l2 = |x: &DMatrix<C64>, y: &DMatrix<C64>, xy: &DMatrix<C64>| {
                x * rho * y.adjoint() - (xy * rho + rho * xy) * half
            };
            out += (l2(a, b, &ab) + l2(b, a, &ba)) * C64::from(*c);
        }
        out
    }

    /// Rough magnitude of the generator: largest |H| entry at t = 0 plus the
    /// summed dissipator rates.
    pub fn liouvillian_scale(&self) -> f64 {
        let h = self.hamiltonian.at(0.0).max_abs();
        let rates: f64 = self.local().map(|(c, l)| c * l.max_abs().powi(2)).sum::<f64>()
            + self.cross.iter().map(|(c, a, b)| c * a.max_abs() * b.max_abs()).sum::<f64>();
        h + rates
    }

    /// Row-major superoperator (vec(ρ)[i·D + j] = ρ_ij) at time `t`.
    pub fn liouvillian(&self, t: f64) -> DMatrix<C64> {
        let d = self.space.dim();
        let id = DMatrix::<C64>::identity(d, d);
        let h = self.hamiltonian.at(t).into_matrix();
        let m = self.decay_operator().into_matrix();
        let k = h * (-I) - m * C64::from(0.5);
        let mut sup = k.kronecker(&id) + id.kronecker(&k.adjoint().transpose());
        for (c, l) in self.local() {
            let l = l.matrix();
            sup += l.kronecker(&l.map(|z| z.conj())) * C64::from(*c);
        }
        for (c, a, b) in &self.cross {
            let (a, b) = (a.matrix(), b.matrix());
            sup += (a.kronecker(&b.map(|z| z.conj())) + b.kronecker(&a.map(|z| z.conj()))) * C64::from(*c);
        }
        sup
    }
}

/// Compiled form of a master equation acting on row-major density matrices,
/// with optional auxiliary integrals `∫Tr(O ρ)dt` appended to the state.
struct Kernel {
    d: usize,
    coeffs: Vec<Coeff>,
    coeff_buf: Vec<C64>,
    k: PatternSum,
    /// `(L, (c/2)·L)` per local dissipator.
    local: Vec<(Csr, Csr)>,
    /// `(c·A, B)` per cross term; the `B↔A` ordering comes from `F†`.
    cross: Vec<(Csr, Csr)>,
    aux: Vec<Csr>,
    f: Vec<C64>,
    y1: Vec<C64>,
    y2: Vec<C64>,
}

impl Kernel {
    fn new(meq: &MasterEq, aux: &[Op]) -> Kernel {
        let d = meq.space.dim();
        let h = meq.hamiltonian.simplified();
        let m = meq.decay_operator();
        let mut coeffs = Vec::new();
        let mut mats = Vec::new();
        // Constant part: −iH₀ − M/2.
        let mut k0 = m.scale(-0.5);
        for (c, op) in h.terms() {
            match c {
                Coeff::Const(v) => k0 += &op.scale(-I * v),
                Coeff::Fn(_) => {
                    coeffs.push(c.clone());
                    mats.push(Csr::from_op(op, -I));
                }
            }
        }
        mats.insert(0, Csr::from_op(&k0, C64::from(1.0)));
        coeffs.insert(0, Coeff::Const(C64::from(1.0)));
        let k = PatternSum::new(d, &mats);
        let local = meq
            .local()
            .map(|(c, l)| (Csr::from_op(l, C64::from(1.0)), Csr::from_op(l, C64::from(c / 2.0))))
            .collect();
        let mut cross = Vec::new();
        for (c, a, b) in &meq.cross {
            cross.push((Csr::from_op(a, C64::from(*c)), Csr::from_op(b, C64::from(1.0))));
        }
        let n = coeffs.len();
        Kernel {
            d,
            coeffs,
            coeff_buf: vec![ZERO; n],
            k,
            local,
            cross,
            aux: aux.iter().map(|o| Csr::from_op(o, C64::from(1.0))).collect(),
            f: vec![ZERO; d * d],
            y1: vec![ZERO; d * d],
            y2: vec![ZERO; d * d],
        }
    }
}

impl Rhs for Kernel {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let d = self.d;
        let n = d * d;
        let rho = &y[..n];
        for (b, c) in self.coeff_buf.iter_mut().zip(&self.coeffs) {
            *b = c.at(t);
        }
        self.k.combine(&self.coeff_buf);
        // F = Kρ + Σ (c/2) L (Lρ)† + Σ c A (Bρ)†, then ρ̇ = F + F†.
        self.k.pattern.mul_into(rho, &mut self.f);
        for (l, l_half) in &self.local {
            l.mul_into(rho, &mut self.y1);
            adjoint_into(&self.y1, d, &mut self.y2);
            l_half.mul_acc(&self.y2, &mut self.f);
        }
        for (a, b) in &self.cross {
            b.mul_into(rho, &mut self.y1);
            adjoint_into(&self.y1, d, &mut self.y2);
            a.mul_acc(&self.y2, &mut self.f);
        }
        for i in 0..d {
            for j in 0..d {
                dy[i * d + j] = self.f[i * d + j] + self.f[j * d + i].conj();
            }
        }
        for (k, o) in self.aux.iter().enumerate() {
            dy[n + k] = o.trace_mul(rho);
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    /// Relative and absolute tolerance of the step controller.
    pub tol: f64,
    /// Times at which records (and optionally states) are taken. Empty means
    /// the two end points.
    pub samples: Vec<f64>,
    /// Expectation values recorded at each sample.
    pub observables: Vec<(String, Op)>,
    /// Running integrals `∫ Tr(O ρ) dt`, recorded at each sample.
    pub integrals: Vec<(String, Op)>,
    pub store_states: bool,
    /// Measure trace, Hermiticity and positivity at every sample.
    pub check_invariants: bool,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            samples: Vec::new(),
            observables: Vec::new(),
            integrals: Vec::new(),
            store_states: false,
            check_invariants: true,
            max_steps: 20_000_000,
            h_max: f64::INFINITY,
        }
    }
}

impl EvolveOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// `n` equally spaced samples over `span`, inclusive.
    pub fn with_uniform_samples(mut self, span: (f64, f64), n: usize) -> Self {
        let n = n.max(2);
        self.samples = (0..n).map(|k| span.0 + (span.1 - span.0) * k as f64 / (n - 1) as f64).collect();
        self
    }

    pub fn observe(mut self, name: impl Into<String>, op: Op) -> Self {
        self.observables.push((name.into(), op));
        self
    }

    pub fn integrate(mut self, name: impl Into<String>, op: Op) -> Self {
        self.integrals.push((name.into(), op));
        self
    }

    pub fn storing_states(mut self) -> Self {
        self.store_states = true;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub name: String,
    pub values: Vec<C64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Diagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            steps: 0,
            rejected: 0,
            rhs_evals: 0,
        }
    }
}

impl Diagnostics {
    pub(crate) fn merge(&mut self, other: &Diagnostics) {
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
    }

    fn absorb(&mut self, stats: &OdeStats) {
        self.steps += stats.accepted;
        self.rejected += stats.rejected;
        self.rhs_evals += stats.rhs_evals;
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub space: ProductSpace,
    pub times: Vec<f64>,
    /// Density matrices at the sample times, when requested.
    pub states: Vec<DMatrix<C64>>,
    /// Observables followed by running integrals, in option order.
    pub records: Vec<Record>,
    pub final_state: State,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn record(&self, name: &str) -> Option<&[C64]> {
        self.records.iter().find(|r| r.name == name).map(|r| r.values.as_slice())
    }

    /// Last value of a record.
    pub fn last(&self, name: &str) -> Option<C64> {
        self.record(name).and_then(|v| v.last().copied())
    }

    /// Concatenate a continuation. Running integrals of `next` are offset by
    /// this trajectory's final values so they stay cumulative.
    pub fn append(&mut self, next: Trajectory, integral_names: &[String]) -> Result<()> {
        self.space.check_same(&next.space)?;
        let skip = usize::from(matches!((self.times.last(), next.times.first()), (Some(a), Some(b)) if a == b));
        for rec in &mut self.records {
            let Some(other) = next.records.iter().find(|r| r.name == rec.name) else {
                return Err(Error::InvalidParameter(format!("record `{}` missing in continuation", rec.name)));
            };
            let offset = if integral_names.contains(&rec.name) {
                rec.values.last().copied().unwrap_or(ZERO)
            } else {
                ZERO
            };
            rec.values.extend(other.values.iter().skip(skip).map(|v| v + offset));
        }
        self.times.extend(next.times.iter().skip(skip));
        if !next.states.is_empty() {
            self.states.extend(next.states.into_iter().skip(skip));
        }
        self.final_state = next.final_state;
        self.diagnostics.merge(&next.diagnostics);
        Ok(())
    }
}

fn density_vec(state: &State) -> Vec<C64> {
    let rho = state.to_density();
    let d = rho.nrows();
    let mut v = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = rho[(i, j)];
        }
    }
    v
}

fn vec_density(v: &[C64], d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// Integrate the master equation from `rho0` over `span`.
pub fn evolve(meq: &MasterEq, rho0: &State, span: (f64, f64), opts: &EvolveOptions) -> Result<Trajectory> {
    let (t0, t1) = span;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("time span must be increasing, got ({t0}, {t1})")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    meq.space.check_same(rho0.space())?;
    rho0.validate()?;
    for (_, op) in opts.observables.iter().chain(opts.integrals.iter()) {
        meq.space.check_same(op.space())?;
    }
    let d = meq.space.dim();
    let n = d * d;
    let aux_ops: Vec<Op> = opts.integrals.iter().map(|(_, o)| o.clone()).collect();
    let mut kernel = Kernel::new(meq, &aux_ops);
    let mut y = density_vec(rho0);
    y.extend(std::iter::repeat(ZERO).take(aux_ops.len()));

    let mut samples: Vec<f64> = if opts.samples.is_empty() { vec![t0, t1] } else { opts.samples.clone() };
    samples.retain(|&t| t >= t0 && t <= t1);
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let mut stops: Vec<(f64, bool)> = samples.iter().map(|&t| (t, false)).collect();
    stops.extend(meq.breakpoints.iter().filter(|&&t| t > t0 && t < t1).map(|&t| (t, true)));
    stops.push((t1, false));
    stops.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    stops.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 |= b.1;
            true
        } else {
            false
        }
    });

    let ode_opts = OdeOptions { atol: opts.tol, rtol: opts.tol, max_steps: opts.max_steps, h_max: opts.h_max };
    let mut ode = Integrator::new(y.len(), ode_opts);
    let mut t = t0;
    let mut times = Vec::with_capacity(samples.len());
    let mut states = Vec::new();
    let n_obs = opts.observables.len();
    let mut values: Vec<Vec<C64>> = vec![Vec::with_capacity(samples.len()); n_obs + aux_ops.len()];
    let obs_mats: Vec<DMatrix<C64>> = opts.observables.iter().map(|(_, o)| o.matrix().clone()).collect();
    let mut diag = Diagnostics::default();
    let mut sample_idx = 0;

    let mut take_sample = |t: f64, y: &[C64], diag: &mut Diagnostics| {
        let rho = vec_density(&y[..n], d);
        times.push(t);
        for (k, o) in obs_mats.iter().enumerate() {
            values[k].push(trace_product(&rho, o));
        }
        for k in 0..aux_ops.len() {
            values[n_obs + k].push(y[n + k]);
        }
        if opts.check_invariants {
            let tr = rho.trace();
            diag.max_trace_error = diag.max_trace_error.max((tr - C64::from(1.0)).norm());
            diag.max_hermiticity_error = diag.max_hermiticity_error.max(hermiticity_error(&rho));
            diag.min_eigenvalue = diag.min_eigenvalue.min(min_eigenvalue(&rho));
        }
        if opts.store_states {
            states.push(rho);
        }
    };

    if samples.first() == Some(&t0) {
        take_sample(t0, &y, &mut diag);
        sample_idx = 1;
    }
    for &(stop, is_break) in &stops {
        if stop <= t {
            continue;
        }
        ode.advance(&mut kernel, &mut t, &mut y, stop)?;
        if sample_idx < samples.len() && samples[sample_idx] == stop {
            take_sample(stop, &y, &mut diag);
            sample_idx += 1;
        }
        if is_break {
            ode.invalidate();
        }
    }
    diag.absorb(&ode.stats);

    let mut rho = vec_density(&y[..n], d);
    // Remove rounding-level anti-Hermitian drift before handing the state on.
    rho = (&rho + rho.adjoint()) * C64::from(0.5);
    let final_state = State::density_unchecked(&meq.space, rho)?;
    if opts.check_invariants {
        let lo = final_state.min_eigenvalue();
        diag.min_eigenvalue = diag.min_eigenvalue.min(lo);
        if lo < -1e-7 {
            log::warn!("final state has eigenvalue {lo:e} below the positivity floor");
        }
    }
    let mut records: Vec<Record> = opts
        .observables
        .iter()
        .map(|(name, _)| Record { name: name.clone(), values: Vec::new() })
        .collect();
    records.extend(opts.integrals.iter().map(|(name, _)| Record { name: name.clone(), values: Vec::new() }));
    for (rec, v) in records.iter_mut().zip(values) {
        rec.values = v;
    }
    Ok(Trajectory { space: meq.space.clone(), times, states, records, final_state, diagnostics: diag })
}

/// Rabi rate Ω = 2√(2 P γ ω_α/ω_w) for drive power P = γ n̄.
pub fn rabi_from_power(n_bar: f64, gamma: f64, omega_alpha: f64, omega_w: f64) -> Result<f64> {
    if !(n_bar >= 0.0) || !(gamma >= 0.0) || !(omega_alpha >= 0.0) || !(omega_w > 0.0) {
        return Err(Error::InvalidParameter("drive power, rate and frequencies must be non-negative".into()));
    }
    let power = gamma * n_bar;
    Ok(2.0 * (2.0 * power * gamma * omega_alpha / omega_w).sqrt())
}

/// Output field `a_out = a_in + Σ e^{iφ}√(rate/2)·op`.
#[derive(Clone, Debug)]
pub struct OutputField {
    pub a_in: C64,
    pub terms: Vec<(f64, f64, Op)>,
}

impl OutputField {
    pub fn new(terms: Vec<(f64, f64, Op)>) -> Self {
        Self { a_in: ZERO, terms }
    }

    /// The system part `Σ e^{iφ}√(rate/2)·op`.
    pub fn operator(&self, space: &ProductSpace) -> Result<Op> {
        let mut out = Op::zero(space);
        for (phase, rate, op) in &self.terms {
            space.check_same(op.space())?;
            out += &op.scale(C64::from_polar((rate / 2.0).sqrt(), *phase));
        }
        Ok(out)
    }

    /// `a_out† a_out` without the input contribution.
    pub fn power_operator(&self, space: &ProductSpace) -> Result<Op> {
        let x = self.operator(space)?;
        Ok(&x.dag() * &x)
    }
}

/// ⟨a_out⟩(t) from stored trajectory states.
pub fn output_amplitude(traj: &Trajectory, field: &OutputField) -> Result<Vec<C64>> {
    if traj.states.len() != traj.times.len() {
        return Err(Error::InvalidParameter("trajectory was run without stored states".into()));
    }
    let x = field.operator(&traj.space)?;
    Ok(traj.states.iter().map(|rho| field.a_in + trace_product(rho, x.matrix())).collect())
}
