//! Compressed-row complex matrices used by the master-equation kernel.

use crate::fock::{Op, C64, ZERO};

#[derive(Clone, Debug)]
pub(crate) struct Csr {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<C64>,
}

impl Csr {
    pub fn from_op(op: &Op, scale: C64) -> Csr {
        let m = op.matrix();
        let d = m.nrows();
        let mut row_ptr = Vec::with_capacity(d + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..d {
            for j in 0..d {
                let v = m[(i, j)];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v * scale);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { dim: d, row_ptr, cols, vals }
    }

    /// `out += self · x` for row-major square `x`.
    pub fn mul_acc(&self, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for i in 0..d {
            let orow = &mut out[i * d..(i + 1) * d];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[k];
                let xrow = &x[self.cols[k] * d..(self.cols[k] + 1) * d];
                for (o, xv) in orow.iter_mut().zip(xrow) {
                    *o += a * xv;
                }
            }
        }
    }

    /// `out = self · x`.
    pub fn mul_into(&self, x: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = ZERO);
        self.mul_acc(x, out);
    }

    /// `Tr(self · x)`.
    pub fn trace_mul(&self, x: &[C64]) -> C64 {
        let d = self.dim;
        let mut acc = ZERO;
        for i in 0..d {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] * d + i];
            }
        }
        acc
    }
}

/// Several matrices sharing one sparsity pattern, combined as `Σ c_k M_k`
/// without reallocating.
#[derive(Clone, Debug)]
pub(crate) struct PatternSum {
    pub pattern: Csr,
    /// Per term, its values laid out on the shared pattern.
    pub terms: Vec<Vec<C64>>,
}

impl PatternSum {
    pub fn new(dim: usize, mats: &[Csr]) -> PatternSum {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut mark = vec![usize::MAX; dim];
        for i in 0..dim {
            let start = cols.len();
            for m in mats {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    let j = m.cols[k];
                    if mark[j] != i {
                        mark[j] = i;
                        cols.push(j);
                    }
                }
            }
            cols[start..].sort_unstable();
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        let terms = mats
            .iter()
            .map(|m| {
                let mut v = vec![ZERO; nnz];
                for i in 0..dim {
                    let slots = &cols[row_ptr[i]..row_ptr[i + 1]];
                    for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                        let pos = slots.binary_search(&m.cols[k]).expect("column in pattern");
                        v[row_ptr[i] + pos] += m.vals[k];
                    }
                }
                v
            })
            .collect();
        PatternSum { pattern: Csr { dim, row_ptr, cols, vals: vec![ZERO; nnz] }, terms }
    }

    /// Set the pattern values to `Σ coeffs[k]·term_k`.
    pub fn combine(&mut self, coeffs: &[C64]) {
        let vals = &mut self.pattern.vals;
        vals.iter_mut().for_each(|v| *v = ZERO);
        for (c, t) in coeffs.iter().zip(&self.terms) {
            if *c == ZERO {
                continue;
            }
            for (v, x) in vals.iter_mut().zip(t) {
                *v += c * x;
            }
        }
    }
}

pub(crate) fn adjoint_into(x: &[C64], d: usize, out: &mut [C64]) {
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = x[i * d + j].conj();
        }
    }
}
