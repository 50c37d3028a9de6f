use crate::error::{Error, Result};
use crate::sir::CompartmentSeries;

/// Reconstructs S and R from an infectious series using `dR/dt = alpha I`
/// (trapezoidal rule, `R(0) = 0`) and `S = N - I - R`.
///
/// `infected` holds days 1..=T; `i0` is day 0. The result has T + 1 samples.
pub fn derive_susceptible_removed(
    infected: &[f64],
    alpha: f64,
    n: f64,
    i0: f64,
) -> Result<CompartmentSeries> {
    if !(alpha >= 0.0) || !(n > 0.0) {
        return Err(Error::Input(format!("need alpha >= 0 and N > 0 (alpha={alpha}, N={n})")));
    }
    if std::iter::once(&i0).chain(infected).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Input("infectious counts must be finite and non-negative".into()));
    }
    let i: Vec<f64> = std::iter::once(i0).chain(infected.iter().copied()).collect();
    let mut r = Vec::with_capacity(i.len());
    r.push(0.0);
    for k in 1..i.len() {
        r.push(r[k - 1] + alpha * 0.5 * (i[k - 1] + i[k]));
    }
    let s: Vec<f64> = i.iter().zip(&r).map(|(i, r)| n - i - r).collect();
    if let Some(day) = s.iter().position(|&v| v < 0.0) {
        return Err(Error::Validation(format!(
            "reconstructed susceptible count is negative on day {day}"
        )));
    }
    Ok(CompartmentSeries {
        t: (0..i.len()).map(|d| d as f64).collect(),
        s,
        i,
        r,
        n,
    })
}
