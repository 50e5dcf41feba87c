use super::kernel::conditional_mean_exact;
use crate::dupire_lv::{effective_strike, local_vol_futures, LocalVolSurface};
use crate::error::{Error, Result};

/// Leverage `L(t, T, K) = eta_F / sqrt(E[v | F_t(T) = K])` for a list of
/// strikes, from one particle snapshot. Strikes outside the particle support
/// (or below the reachable floor) come back as `None`.
#[allow(clippy::too_many_arguments)]
pub fn compute_leverage_diagnostic(
    eta: &LocalVolSurface,
    t: f64,
    maturity: f64,
    f0: f64,
    strikes: &[f64],
    s: &[f64],
    v: &[f64],
    eps: f64,
) -> Result<Vec<Option<f64>>> {
    if s.is_empty() || s.len() != v.len() {
        return Err(Error::data("leverage diagnostic needs a non-empty snapshot"));
    }
    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    let reach = if eps.is_finite() { 4.0 * eps } else { f64::INFINITY };
    let tau = maturity - t;
    Ok(strikes
        .iter()
        .map(|&k| {
            let kf = effective_strike(tau, k, f0, eta.a);
            if kf < lo - reach || kf > hi + reach {
                return None;
            }
            let eta_f = local_vol_futures(eta, t, maturity, k, f0, eta.a).ok()?;
            let m = conditional_mean_exact(s, v, kf, eps)?;
            (m > 0.0).then(|| eta_f / m.sqrt())
        })
        .collect())
}
