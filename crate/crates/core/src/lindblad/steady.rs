//! Stationary states from the null space of the vectorized Liouvillian.

use nalgebra::DMatrix;

use super::MasterEq;
use crate::error::{Error, Result};
use crate::fock::{State, C64};

/// Largest superoperator size handled by the dense SVD path.
const SVD_LIMIT: usize = 1600;
/// Largest superoperator size handled at all.
const DENSE_LIMIT: usize = 4096;

/// Unique stationary state of a time-independent master equation.
pub fn steady_state(meq: &MasterEq) -> Result<State> {
    if !meq.hamiltonian().is_constant() {
        return Err(Error::SteadyStatePrecondition("Hamiltonian must be time independent"));
    }
    if !meq.has_dissipators() {
        return Err(Error::SteadyStatePrecondition("at least one dissipator is required"));
    }
    let d = meq.space().dim();
    let n = d * d;
    if n > DENSE_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "steady state needs a dense {n}×{n} superoperator; reduce the truncation"
        )));
    }
    let sup = meq.liouvillian(0.0);
    let v = if n <= SVD_LIMIT { null_vector_svd(sup)? } else { null_vector_lu(&sup, d)? };
    let mut rho = DMatrix::from_fn(d, d, |i, j| v[i * d + j]);
    let tr = rho.trace();
    if tr.norm() < 1e-14 {
        return Err(Error::NonUniqueSteadyState(2));
    }
    rho /= tr;
    rho = (&rho + rho.adjoint()) * C64::from(0.5);
    let residual = meq.apply(0.0, &rho);
    let scale = meq.liouvillian_scale();
    let res = residual.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if res > 1e-8 * scale.max(1.0) {
        log::warn!("steady-state residual {res:e} relative to generator scale {scale:e}");
    }
    State::density_unchecked(meq.space(), rho)
}

fn null_vector_svd(sup: DMatrix<C64>) -> Result<Vec<C64>> {
    let n = sup.nrows();
    let svd = sup.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let s_max = s[order[n - 1]].max(f64::MIN_POSITIVE);
    let null_dim = order.iter().take_while(|&&k| s[k] < 1e-9 * s_max).count();
    if null_dim > 1 {
        return Err(Error::NonUniqueSteadyState(null_dim));
    }
    let k = order[0];
    Ok((0..n).map(|j| v_t[(k, j)].conj()).collect())
}

/// Replace one balance equation by the trace condition and solve directly.
fn null_vector_lu(sup: &DMatrix<C64>, d: usize) -> Result<Vec<C64>> {
    let n = d * d;
    let mut a = sup.clone();
    let mut rhs = nalgebra::DVector::<C64>::zeros(n);
    for j in 0..n {
        a[(0, j)] = C64::from(0.0);
    }
    for i in 0..d {
        a[(0, i * d + i)] = C64::from(1.0);
    }
    rhs[0] = C64::from(1.0);
    let x = a.lu().solve(&rhs).ok_or(Error::NonUniqueSteadyState(2))?;
    Ok(x.iter().copied().collect())
}
