//! SLH network algebra with scalar scattering matrices, and the two-device
//! emission–detection network.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{lowering, Op, ProductSpace, C64, I, ONE, ZERO};
use crate::lindblad::{MasterEq, OutputField};
use crate::ted::{EffectiveTed, Truncation};
use crate::timeop::TimeOp;

const UNITARY_TOL: f64 = 1e-12;
const FEEDBACK_TOL: f64 = 1e-10;

/// Component with `P` ports: scattering matrix S (P×P, outputs by rows),
/// coupling operators L and Hamiltonian H.
#[derive(Clone, Debug)]
pub struct SlhTriple {
    s: DMatrix<C64>,
    l: Vec<Op>,
    h: TimeOp,
}

fn unitarity_error(s: &DMatrix<C64>) -> f64 {
    let p = s.nrows();
    let prod = s * s.adjoint();
    let id = DMatrix::<C64>::identity(p, p);
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl SlhTriple {
    pub fn new(s: DMatrix<C64>, l: Vec<Op>, h: impl Into<TimeOp>) -> Result<Self> {
        let h = h.into();
        if s.nrows() != s.ncols() || s.nrows() != l.len() || l.is_empty() {
            return Err(Error::PortMismatch(format!(
                "scattering matrix is {}×{} with {} coupling operators",
                s.nrows(),
                s.ncols(),
                l.len()
            )));
        }
        let err = unitarity_error(&s);
        if err > UNITARY_TOL {
            return Err(Error::NonUnitary(err));
        }
        for op in &l {
            h.space().check_same(op.space())?;
        }
        let h0 = h.at(0.0);
        if h0.hermiticity_error() > 1e-12 * h0.max_abs().max(1.0) {
            return Err(Error::InvalidParameter("SLH Hamiltonian must be Hermitian".into()));
        }
        Ok(Self { s, l, h })
    }

    /// Pure scattering component on the trivial space.
    pub fn scattering(s: DMatrix<C64>) -> Result<Self> {
        let space = ProductSpace::trivial();
        let p = s.nrows();
        Self::new(s, vec![Op::zero(&space); p], Op::zero(&space))
    }

    /// `n`-port identity component.
    pub fn identity(n: usize) -> Self {
        Self::scattering(DMatrix::identity(n, n)).expect("identity is unitary")
    }

    /// Phase delay `D(φ) = (e^{iφ}, 0, 0)`.
    pub fn phase_delay(phi: f64) -> Self {
        Self::scattering(DMatrix::from_element(1, 1, C64::from_polar(1.0, phi))).expect("unit phase")
    }

    /// Lossy three-port circulator routing port p to p+1, with three loss
    /// ports appended. `eta` is the amplitude diverted to loss.
    pub fn circulator(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("circulator loss must lie in [0, 1], got {eta}")));
        }
        let eb = (1.0 - eta * eta).sqrt();
        #[rustfmt::skip]
        let rows = [
            [0.0, 0.0, eb, -eta, 0.0, 0.0],
            [eb, 0.0, 0.0, 0.0, -eta, 0.0],
            [0.0, eb, 0.0, 0.0, 0.0, -eta],
            [0.0, 0.0, eta, eb, 0.0, 0.0],
            [eta, 0.0, 0.0, 0.0, eb, 0.0],
            [0.0, eta, 0.0, 0.0, 0.0, eb],
        ];
        Self::scattering(DMatrix::from_fn(6, 6, |i, j| C64::from(rows[i][j])))
    }

    /// Two-port device radiating `√(γ/2)·w` into both directions.
    pub fn ted_two_port(h: impl Into<TimeOp>, w: &Op, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let l = w.scale((gamma / 2.0).sqrt());
        Self::new(DMatrix::identity(2, 2), vec![l.clone(), l], h)
    }

    /// Waveguide-terminating device with `L = √γ·w`, γ the measured rate.
    pub fn ted_one_port(h: impl Into<TimeOp>, w: &Op, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Self::new(DMatrix::identity(1, 1), vec![w.scale(gamma.sqrt())], h)
    }

    pub fn ports(&self) -> usize {
        self.l.len()
    }

    pub fn space(&self) -> &ProductSpace {
        self.h.space()
    }

    pub fn s(&self) -> &DMatrix<C64> {
        &self.s
    }

    pub fn l(&self) -> &[Op] {
        &self.l
    }

    pub fn h(&self) -> &TimeOp {
        &self.h
    }

    fn embedded(&self, target: &ProductSpace) -> Result<SlhTriple> {
        if self.space() == target {
            return Ok(self.clone());
        }
        Ok(SlhTriple {
            s: self.s.clone(),
            l: self.l.iter().map(|op| op.embed(target)).collect::<Result<_>>()?,
            h: self.h.embed(target)?,
        })
    }

    fn joint(a: &SlhTriple, b: &SlhTriple) -> Result<(SlhTriple, SlhTriple)> {
        let space = a.space().union(b.space())?;
        Ok((a.embedded(&space)?, b.embedded(&space)?))
    }

    /// `self ⊞ other`: ports of `self` first.
    pub fn concatenate(&self, other: &SlhTriple) -> Result<SlhTriple> {
        let (a, b) = Self::joint(self, other)?;
        let (p1, p2) = (a.ports(), b.ports());
        let mut s = DMatrix::zeros(p1 + p2, p1 + p2);
        s.view_mut((0, 0), (p1, p1)).copy_from(&a.s);
        s.view_mut((p1, p1), (p2, p2)).copy_from(&b.s);
        let mut l = a.l;
        l.extend(b.l);
        let h = a.h.plus(&b.h)?.simplified();
        Ok(SlhTriple { s, l, h })
    }

    /// `self ◁ first`: outputs of `first` feed the inputs of `self`.
    pub fn cascade(&self, first: &SlhTriple) -> Result<SlhTriple> {
        if self.ports() != first.ports() {
            return Err(Error::PortMismatch(format!(
                "cascade of a {}-port into a {}-port component",
                first.ports(),
                self.ports()
            )));
        }
        let (c2, c1) = Self::joint(self, first)?;
        let space = c2.space().clone();
        let p = c2.ports();
        let s = &c2.s * &c1.s;
        let mut l = Vec::with_capacity(p);
        let mut s2l1 = Vec::with_capacity(p);
        for i in 0..p {
            let mut acc = Op::zero(&space);
            for j in 0..p {
                let k = c2.s[(i, j)];
                if k != ZERO {
                    acc += &c1.l[j].scale(k);
                }
            }
            l.push(&c2.l[i] + &acc);
            s2l1.push(acc);
        }
        // (1/2i)(L₂†S₂L₁ − h.c.)
        let mut x = Op::zero(&space);
        for i in 0..p {
            x += &(&c2.l[i].dag() * &s2l1[i]);
        }
        let corr = (&x - &x.dag()).scale(-0.5 * I);
        let mut h = c1.h.plus(&c2.h)?;
        if corr.max_abs() > 0.0 {
            h.push_const(corr)?;
        }
        Ok(SlhTriple { s, l, h: h.simplified() })
    }

    /// `[self]_{x→y}`: output port `out_port` is fed back into input port
    /// `in_port` (0-based). The remaining ports keep their order.
    pub fn feedback(&self, out_port: usize, in_port: usize) -> Result<SlhTriple> {
        let p = self.ports();
        if p < 2 || out_port >= p || in_port >= p {
            return Err(Error::PortMismatch(format!(
                "feedback {out_port}→{in_port} on a {p}-port component"
            )));
        }
        let (x, y) = (out_port, in_port);
        let denom = ONE - self.s[(x, y)];
        if denom.norm() <= FEEDBACK_TOL {
            return Err(Error::SingularFeedback(denom.norm()));
        }
        let inv = ONE / denom;
        let rows: Vec<usize> = (0..p).filter(|&i| i != x).collect();
        let cols: Vec<usize> = (0..p).filter(|&j| j != y).collect();
        let s = DMatrix::from_fn(p - 1, p - 1, |a, b| {
            let (i, j) = (rows[a], cols[b]);
            self.s[(i, j)] + self.s[(i, y)] * inv * self.s[(x, j)]
        });
        let lx = &self.l[x];
        let l: Vec<Op> = rows.iter().map(|&i| &self.l[i] + &lx.scale(self.s[(i, y)] * inv)).collect();
        // (1/2i)(Σ_j L_j† S_jy (1−S_xy)⁻¹ L_x − h.c.)
        let mut acc = Op::zero(self.space());
        for j in 0..p {
            let k = self.s[(j, y)] * inv;
            if k != ZERO {
                acc += &(&self.l[j].dag() * lx).scale(k);
            }
        }
        let corr = (&acc - &acc.dag()).scale(-0.5 * I);
        let mut h = self.h.clone();
        if corr.max_abs() > 0.0 {
            h.push_const(corr)?;
        }
        Ok(SlhTriple { s, l, h: h.simplified() })
    }

    /// Master equation with one `𝓛[L_p]` per port, without reduction.
    pub fn master_equation_raw(&self) -> Result<MasterEq> {
        let mut meq = MasterEq::new(self.h.clone());
        for l in &self.l {
            if l.max_abs() > 0.0 {
                meq.add_collapse(1.0, l.clone())?;
            }
        }
        Ok(meq)
    }

    /// Master equation in normal form over the given channel operators:
    /// every `L_p` is expanded as `Σ c_pk X_k`, and `Σ_p 𝓛[L_p]` is
    /// rewritten as local terms `K_kk 𝓛[X_k]` plus symmetric cross terms.
    pub fn master_equation(&self, channels: &[Op]) -> Result<MasterEq> {
        let coeffs = self.expand(channels)?;
        let n = channels.len();
        let p = self.ports();
        let k = DMatrix::from_fn(n, n, |a, b| (0..p).map(|q| coeffs[(q, a)] * coeffs[(q, b)].conj()).sum::<C64>());
        let mut meq = MasterEq::new(self.h.clone());
        let scale = k.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for a in 0..n {
            let rate = k[(a, a)].re;
            if rate > 1e-14 * scale {
                meq.add_collapse(rate, channels[a].clone())?;
            }
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let kab = k[(a, b)];
                if kab.norm() > 1e-14 * scale {
                    let b_op = channels[b].scale(C64::from_polar(1.0, -kab.arg()));
                    meq.add_cross(kab.norm(), channels[a].clone(), b_op)?;
                }
            }
        }
        Ok(meq)
    }

    /// Least-squares coefficients of every `L_p` over `channels`
    /// (Hilbert–Schmidt inner product). Errors if any `L_p` leaves the span.
    fn expand(&self, channels: &[Op]) -> Result<DMatrix<C64>> {
        let n = channels.len();
        for c in channels {
            self.space().check_same(c.space())?;
        }
        let gram = DMatrix::from_fn(n, n, |a, b| channels[a].hs_inner(&channels[b]));
        let lu = gram.clone().lu();
        let mut coeffs = DMatrix::zeros(self.ports(), n);
        for (q, l) in self.l.iter().enumerate() {
            let rhs = DVector::from_fn(n, |a, _| channels[a].hs_inner(l));
            let c = if n == 0 { DVector::zeros(0) } else { lu.solve(&rhs).ok_or(Error::NotInBasis(f64::INFINITY))? };
            let mut recon = Op::zero(self.space());
            for a in 0..n {
                recon += &channels[a].scale(c[a]);
            }
            let resid = recon.max_diff(l);
            if resid > 1e-12 * l.max_abs().max(1.0) {
                return Err(Error::NotInBasis(resid));
            }
            for a in 0..n {
                coeffs[(q, a)] = c[a];
            }
        }
        Ok(coeffs)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("decay rate must be non-negative, got {gamma}")))
    }
}

/// Source and measurement devices joined by lossy cabling and a circulator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub sted: EffectiveTed,
    pub mted: EffectiveTed,
    /// Amplitude lost per circulator pass, in [0, 1].
    pub eta: f64,
    pub phi_s: f64,
    pub phi_m: f64,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("loss parameter must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.phi_s.is_finite() && self.phi_m.is_finite()) {
            return Err(Error::InvalidParameter("propagation phases must be finite".into()));
        }
        Ok(())
    }
}

/// Mode labels of the network space, in order.
pub const NETWORK_MODES: [&str; 4] = ["ds", "ws", "dm", "wm"];

/// Space `ds ⊗ ws ⊗ dm ⊗ wm` for per-device truncations.
pub fn network_space(source: &Truncation, detector: &Truncation) -> Result<ProductSpace> {
    ProductSpace::from_dims(&[("ds", source.d), ("ws", source.w), ("dm", detector.d), ("wm", detector.w)])
}

#[derive(Clone, Debug)]
pub struct PitchDetectNetwork {
    pub space: ProductSpace,
    pub meq: MasterEq,
    /// `e^{i(φ_s+φ_m)}√(γ_s/2) w_s + √(γ_m/2) w_m`.
    pub a_out: OutputField,
    /// `√(γ_m/2)` times the 2→1 part of `w_m`; empty if `w_m` has two levels.
    pub b_out: OutputField,
    /// The composed triple before reduction.
    pub triple: SlhTriple,
}

/// Compose the network
/// `[(I₁⊞mTED⊞I₄) ◁ (D_s⊞D_m⊞I₄) ◁ CIRC ◁ (D_s⊞D_m⊞I₄) ◁ (sTED⊞I₅)]_{1→1,2→2}`
/// and reduce it to a master equation over `w_s` and `w_m`.
pub fn build_pitch_detect(spec: &NetworkSpec, source: &Truncation, detector: &Truncation) -> Result<PitchDetectNetwork> {
    spec.validate()?;
    let space = network_space(source, detector)?;
    let ws = lowering(&space, "ws")?;
    let wm = lowering(&space, "wm")?;
    let hs = spec.sted.hamiltonian_on(&space, "ds", "ws")?;
    let hm = spec.mted.hamiltonian_on(&space, "dm", "wm")?;
    let sted = SlhTriple::ted_one_port(hs, &ws, spec.sted.gamma)?;
    let mted = SlhTriple::ted_one_port(hm, &wm, spec.mted.gamma)?;
    let delays = SlhTriple::phase_delay(spec.phi_s)
        .concatenate(&SlhTriple::phase_delay(spec.phi_m))?
        .concatenate(&SlhTriple::identity(4))?;
    let first = sted.concatenate(&SlhTriple::identity(5))?;
    let last = SlhTriple::identity(1).concatenate(&mted)?.concatenate(&SlhTriple::identity(4))?;
    let chain = last
        .cascade(&delays)?
        .cascade(&SlhTriple::circulator(spec.eta)?)?
        .cascade(&delays)?
        .cascade(&first)?;
    // Port 1 is closed first; the old port 2 is then port 1.
    let triple = chain.feedback(0, 0)?.feedback(0, 0)?;
    let mut meq = triple.master_equation(&[ws.clone(), wm.clone()])?;
    let mut bps = spec.sted.breakpoints();
    bps.extend(spec.mted.breakpoints());
    meq.add_breakpoints(bps);
    let phase = spec.phi_s + spec.phi_m;
    let a_out = OutputField::new(vec![(phase, spec.sted.gamma, ws), (0.0, spec.mted.gamma, wm.clone())]);
    let b_out = if detector.w > 2 {
        OutputField::new(vec![(0.0, spec.mted.gamma, wm.transition_part("wm", 2, 1)?)])
    } else {
        OutputField::new(vec![])
    };
    Ok(PitchDetectNetwork { space, meq, a_out, b_out, triple })
}
