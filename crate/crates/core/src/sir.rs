//! SIR model mathematics: the ODE system, an RK4 forward solver, the effective
//! reproduction number, and the reduced single-compartment model with a
//! time-varying reproduction number.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates per day and population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub alpha: f64,
    pub beta: f64,
    pub n: f64,
}

impl SirParams {
    pub fn new(alpha: f64, beta: f64, n: f64) -> Result<Self> {
        let p = Self { alpha, beta, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::Input(format!("population must be positive, got {}", self.n)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Input(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Input(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// (dS/dt, dI/dt, dR/dt)
    #[inline]
    pub fn derivative(&self, s: f64, i: f64) -> [f64; 3] {
        let infection = self.beta * s * i / self.n;
        let removal = self.alpha * i;
        [-infection, infection - removal, removal]
    }
}

/// Daily S/I/R counts for one region. Counts are real-valued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompartmentSeries {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub n: f64,
}

impl CompartmentSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.t.len();
        if self.s.len() != len || self.i.len() != len || self.r.len() != len {
            return Err(Error::Validation(format!(
                "compartment lengths differ: t={} S={} I={} R={}",
                len,
                self.s.len(),
                self.i.len(),
                self.r.len()
            )));
        }
        if !(self.n > 0.0) {
            return Err(Error::Validation(format!("population must be positive, got {}", self.n)));
        }
        for (k, ((s, i), r)) in self.s.iter().zip(&self.i).zip(&self.r).enumerate() {
            if !(s.is_finite() && i.is_finite() && r.is_finite()) || *s < 0.0 || *i < 0.0 || *r < 0.0
            {
                return Err(Error::Validation(format!(
                    "day {k}: compartments must be finite and non-negative (S={s}, I={i}, R={r})"
                )));
            }
        }
        Ok(())
    }

    /// Largest |S+I+R-N|/N over all samples.
    pub fn max_conservation_error(&self) -> f64 {
        self.s
            .iter()
            .zip(&self.i)
            .zip(&self.r)
            .map(|((s, i), r)| ((s + i + r) - self.n).abs() / self.n)
            .fold(0.0, f64::max)
    }
}

/// Classical RK4 on the three SIR equations, sampled once per day for
/// `days + 1` samples (day 0 through day `days`).
pub fn sir_rk4_simulate(
    params: &SirParams,
    s0: f64,
    i0: f64,
    r0: f64,
    days: usize,
    steps_per_day: usize,
) -> Result<CompartmentSeries> {
    params.validate()?;
    if s0 < 0.0 || i0 < 0.0 || r0 < 0.0 {
        return Err(Error::Input(format!(
            "initial compartments must be non-negative (S0={s0}, I0={i0}, R0={r0})"
        )));
    }
    if ((s0 + i0 + r0) - params.n).abs() > 1e-9 * params.n {
        return Err(Error::Input(format!(
            "initial compartments sum to {} but N = {}",
            s0 + i0 + r0,
            params.n
        )));
    }
    if days == 0 || steps_per_day == 0 {
        return Err(Error::Input("days and steps_per_day must be at least 1".into()));
    }

    let h = 1.0 / steps_per_day as f64;
    let mut y = [s0, i0, r0];
    let mut out = CompartmentSeries {
        t: Vec::with_capacity(days + 1),
        s: Vec::with_capacity(days + 1),
        i: Vec::with_capacity(days + 1),
        r: Vec::with_capacity(days + 1),
        n: params.n,
    };
    let push = |out: &mut CompartmentSeries, day: usize, y: &[f64; 3]| {
        out.t.push(day as f64);
        out.s.push(y[0]);
        out.i.push(y[1]);
        out.r.push(y[2]);
    };
    push(&mut out, 0, &y);
    for day in 1..=days {
        for _ in 0..steps_per_day {
            y = rk4_step(params, y, h);
        }
        push(&mut out, day, &y);
    }
    Ok(out)
}

fn rk4_step(p: &SirParams, y: [f64; 3], h: f64) -> [f64; 3] {
    let add = |a: [f64; 3], k: [f64; 3], f: f64| [a[0] + f * k[0], a[1] + f * k[1], a[2] + f * k[2]];
    let k1 = p.derivative(y[0], y[1]);
    let y2 = add(y, k1, h / 2.0);
    let k2 = p.derivative(y2[0], y2[1]);
    let y3 = add(y, k2, h / 2.0);
    let k3 = p.derivative(y3[0], y3[1]);
    let y4 = add(y, k3, h);
    let k4 = p.derivative(y4[0], y4[1]);
    std::array::from_fn(|c| y[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
}

/// `(beta / alpha) * (S / N)`
pub fn effective_reproduction(beta: f64, alpha: f64, s: f64, n: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Err(Error::Input("recovery rate is zero; R_t undefined".into()));
    }
    if !(alpha > 0.0) || !(n > 0.0) || !(0.0..=n).contains(&s) {
        return Err(Error::Input(format!(
            "need alpha > 0 and 0 <= S <= N (alpha={alpha}, S={s}, N={n})"
        )));
    }
    Ok(beta / alpha * (s / n))
}

/// Per-day reproduction number estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSeries {
    pub t: Vec<f64>,
    pub rt: Vec<f64>,
    pub alpha_used: f64,
}

impl RtSeries {
    pub fn validate(&self) -> Result<()> {
        if self.t.len() != self.rt.len() {
            return Err(Error::Validation("R_t series lengths differ".into()));
        }
        if self.rt.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("R_t series has non-finite values".into()));
        }
        Ok(())
    }
}

/// Rescaling for the reduced model: `I(t) = c * I_s(t_s)` with
/// `t_s = (t - t0) / (tf - t0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedScaling {
    pub t0: f64,
    pub tf: f64,
    pub c: f64,
    pub alpha: f64,
}

impl ReducedScaling {
    pub fn new(t0: f64, tf: f64, c: f64, alpha: f64) -> Result<Self> {
        if !(tf > t0) {
            return Err(Error::Input(format!("empty window: t0={t0}, tf={tf}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Input(format!("scaling constant must be positive, got {c}")));
        }
        if !(alpha > 0.0) {
            return Err(Error::Input(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { t0, tf, c, alpha })
    }

    /// Uses the window maximum of `infected` as `c`.
    pub fn from_window(t0: f64, tf: f64, infected: &[f64], alpha: f64) -> Result<Self> {
        let c = infected.iter().copied().fold(0.0, f64::max);
        Self::new(t0, tf, c, alpha)
    }

    pub fn span(&self) -> f64 {
        self.tf - self.t0
    }

    pub fn scaled_time(&self, t: f64) -> f64 {
        (t - self.t0) / self.span()
    }

    pub fn scale(&self, infected: f64) -> f64 {
        infected / self.c
    }
}

/// `dIs/dts - alpha (tf - t0) (rt - 1) Is`
pub fn reduced_residual(d_is_d_ts: f64, alpha: f64, t0: f64, tf: f64, rt: f64, is: f64) -> f64 {
    d_is_d_ts - alpha * (tf - t0) * (rt - 1.0) * is
}

/// Closed-form solution of the reduced model for a constant reproduction number.
pub fn reduced_closed_form(rt_const: f64, alpha: f64, t0: f64, tf: f64, is0: f64, ts: f64) -> f64 {
    is0 * (alpha * (tf - t0) * (rt_const - 1.0) * ts).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_params() -> SirParams {
        SirParams::new(0.07, 0.22658, 7e7).unwrap()
    }

    #[test]
    fn pure_decay_matches_exponential() {
        let p = SirParams::new(0.07, 0.0, 1000.0).unwrap();
        let out = sir_rk4_simulate(&p, 985.0, 15.0, 0.0, 20, 10).unwrap();
        let exact = 15.0 * (-0.07f64 * 10.0).exp();
        assert!((out.i[10] - exact).abs() / exact < 1e-6);
        assert!(out.s.iter().all(|&s| s == 985.0));
        assert!(out.i.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn no_recovery_means_no_removed() {
        let p = SirParams::new(0.0, 0.3, 1e4).unwrap();
        let out = sir_rk4_simulate(&p, 1e4 - 5.0, 5.0, 0.0, 60, 10).unwrap();
        assert!(out.r.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn sample_layout() {
        let out = sir_rk4_simulate(&appendix_params(), 7e7 - 15.0, 15.0, 0.0, 35, 10).unwrap();
        assert_eq!(out.len(), 36);
        assert_eq!(out.t[35], 35.0);
        out.validate().unwrap();
    }

    #[test]
    fn conservation() {
        for (alpha, beta) in [(0.07, 0.22658), (1.0 / 14.0, 0.3), (0.2, 0.1)] {
            let p = SirParams::new(alpha, beta, 7e7).unwrap();
            let out = sir_rk4_simulate(&p, 7e7 - 15.0, 15.0, 0.0, 400, 10).unwrap();
            assert!(out.max_conservation_error() <= 1e-6);
        }
    }

    #[test]
    fn rejects_bad_initials() {
        let p = appendix_params();
        assert!(matches!(
            sir_rk4_simulate(&p, 7e7 + 15.0, -15.0, 0.0, 5, 1),
            Err(Error::Input(_))
        ));
        assert!(sir_rk4_simulate(&p, 7e7, 15.0, 0.0, 5, 1).is_err());
        assert!(sir_rk4_simulate(&p, 7e7 - 15.0, 15.0, 0.0, 0, 1).is_err());
    }

    #[test]
    fn growth_sign_follows_reproduction_number() {
        let p = SirParams::new(1.0 / 14.0, 0.25, 1e6).unwrap();
        let out = sir_rk4_simulate(&p, 1e6 - 100.0, 100.0, 0.0, 300, 10).unwrap();
        for k in 1..out.len() - 1 {
            let di = p.derivative(out.s[k], out.i[k])[1];
            let rt = effective_reproduction(p.beta, p.alpha, out.s[k], p.n).unwrap();
            assert_eq!(di > 0.0, rt > 1.0, "day {k}: dI={di}, Rt={rt}");
        }
    }

    #[test]
    fn reproduction_number_cases() {
        assert_eq!(effective_reproduction(0.3, 0.1, 50.0, 50.0).unwrap(), 0.3 / 0.1);
        assert_eq!(effective_reproduction(0.3, 0.1, 0.0, 50.0).unwrap(), 0.0);
        let germany = effective_reproduction(0.104, 0.080, 1.0, 1.0).unwrap();
        assert!((germany - 1.3).abs() < 1e-12);
        assert!(effective_reproduction(0.3, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn reduced_residual_cases() {
        assert_eq!(reduced_residual(0.0, 0.1, 0.0, 10.0, 1.0, 0.7), 0.0);
        assert_eq!(reduced_residual(0.0, 0.1, 0.0, 10.0, 2.0, 0.0), 0.0);
        let alpha = 1.0 / 14.0;
        let d = alpha * 1200.0 * 0.5 * 0.2;
        assert!(reduced_residual(d, alpha, 0.0, 1200.0, 1.5, 0.2).abs() < 1e-12);
    }

    #[test]
    fn reduced_closed_form_cases() {
        assert_eq!(reduced_closed_form(1.7, 0.1, 0.0, 50.0, 0.3, 0.0), 0.3);
        for ts in [0.0, 0.25, 1.0] {
            assert_eq!(reduced_closed_form(1.0, 0.1, 0.0, 50.0, 0.3, ts), 0.3);
        }
        let v = reduced_closed_form(2.0, 1.0 / 14.0, 0.0, 14.0, 0.5, 1.0);
        assert!((v - 0.5 * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn closed_form_satisfies_residual() {
        let (alpha, t0, tf, rt) = (1.0 / 14.0, 10.0, 110.0, 1.4);
        let h = 1e-6;
        for ts in [0.1, 0.5, 0.9] {
            let f = |x| reduced_closed_form(rt, alpha, t0, tf, 0.2, x);
            let d = (f(ts + h) - f(ts - h)) / (2.0 * h);
            assert!(reduced_residual(d, alpha, t0, tf, rt, f(ts)).abs() < 1e-7);
        }
    }

    #[test]
    fn scaling_window() {
        let sc = ReducedScaling::from_window(100.0, 300.0, &[1.0, 4.0, 2.0], 0.1).unwrap();
        assert_eq!(sc.c, 4.0);
        assert_eq!(sc.scaled_time(200.0), 0.5);
        assert_eq!(sc.scale(2.0), 0.5);
        assert!(ReducedScaling::new(5.0, 5.0, 1.0, 0.1).is_err());
        assert!(ReducedScaling::from_window(0.0, 5.0, &[0.0, 0.0], 0.1).is_err());
    }
}
