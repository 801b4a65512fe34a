//! Time-dependent operators as sums of scalar envelopes times fixed operators.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::fock::{Op, ProductSpace, C64};

pub type CoeffFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

#[derive(Clone)]
pub enum Coeff {
    Const(C64),
    Fn(CoeffFn),
}

impl Coeff {
    pub fn at(&self, t: f64) -> C64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Fn(f) => f(t),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Coeff::Const(_))
    }

    pub fn scaled(&self, k: C64) -> Coeff {
        match self {
            Coeff::Const(c) => Coeff::Const(c * k),
            Coeff::Fn(f) => {
                let f = f.clone();
                Coeff::Fn(Arc::new(move |t| f(t) * k))
            }
        }
    }

    pub fn conj(&self) -> Coeff {
        match self {
            Coeff::Const(c) => Coeff::Const(c.conj()),
            Coeff::Fn(f) => {
                let f = f.clone();
                Coeff::Fn(Arc::new(move |t| f(t).conj()))
            }
        }
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Const(c) => write!(f, "Const({c})"),
            Coeff::Fn(_) => write!(f, "Fn(..)"),
        }
    }
}

/// `Σ_k c_k(t) O_k` on a fixed space.
#[derive(Clone, Debug)]
pub struct TimeOp {
    space: ProductSpace,
    terms: Vec<(Coeff, Op)>,
}

impl TimeOp {
    pub fn zero(space: &ProductSpace) -> Self {
        Self { space: space.clone(), terms: Vec::new() }
    }

    pub fn constant(op: Op) -> Self {
        Self { space: op.space().clone(), terms: vec![(Coeff::Const(C64::from(1.0)), op)] }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn terms(&self) -> &[(Coeff, Op)] {
        &self.terms
    }

    pub fn push(&mut self, coeff: Coeff, op: Op) -> Result<()> {
        self.space.check_same(op.space())?;
        self.terms.push((coeff, op));
        Ok(())
    }

    pub fn push_const(&mut self, op: Op) -> Result<()> {
        self.push(Coeff::Const(C64::from(1.0)), op)
    }

    pub fn push_fn(&mut self, f: impl Fn(f64) -> C64 + Send + Sync + 'static, op: Op) -> Result<()> {
        self.push(Coeff::Fn(Arc::new(f)), op)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(c, _)| c.is_const())
    }

    pub fn at(&self, t: f64) -> Op {
        let mut out = Op::zero(&self.space);
        for (c, op) in &self.terms {
            let k = c.at(t);
            if k != C64::from(0.0) {
                out += &op.scale(k);
            }
        }
        out
    }

    pub fn plus(&self, other: &TimeOp) -> Result<TimeOp> {
        self.space.check_same(&other.space)?;
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    pub fn scaled(&self, k: C64) -> TimeOp {
        TimeOp {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(c, op)| (c.scaled(k), op.clone())).collect(),
        }
    }

    pub fn embed(&self, target: &ProductSpace) -> Result<TimeOp> {
        let terms = self
            .terms
            .iter()
            .map(|(c, op)| Ok((c.clone(), op.embed(target)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TimeOp { space: target.clone(), terms })
    }

    /// Merge all constant terms into one operator.
    pub fn simplified(&self) -> TimeOp {
        let mut constant = Op::zero(&self.space);
        let mut any_const = false;
        let mut terms = Vec::new();
        for (c, op) in &self.terms {
            match c {
                Coeff::Const(k) => {
                    constant += &op.scale(*k);
                    any_const = true;
                }
                Coeff::Fn(_) => terms.push((c.clone(), op.clone())),
            }
        }
        if any_const {
            terms.insert(0, (Coeff::Const(C64::from(1.0)), constant));
        }
        TimeOp { space: self.space.clone(), terms }
    }
}

impl From<Op> for TimeOp {
    fn from(op: Op) -> Self {
        TimeOp::constant(op)
    }
}
