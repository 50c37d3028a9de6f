use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sir::CompartmentSeries;

/// When a death leaves the infectious queue.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathPolicy {
    /// Deaths remove the oldest queued cases to R on the death date.
    #[default]
    Immediate,
    /// Deaths are not tracked separately; every case leaves at window expiry.
    AtExpiry,
}

/// Builds S/I/R from daily new cases by holding each day's cases in the
/// infectious compartment for `recovery_days` days. `i0` enters on day 0 as
/// an extra cohort.
pub fn recovery_queue(
    new_cases: &[f64],
    new_deaths: &[f64],
    recovery_days: usize,
    n: f64,
    i0: f64,
    policy: DeathPolicy,
) -> Result<CompartmentSeries> {
    if recovery_days == 0 {
        return Err(Error::Input("recovery_days must be at least 1".into()));
    }
    if new_cases.len() != new_deaths.len() {
        return Err(Error::Input(format!(
            "{} case days but {} death days",
            new_cases.len(),
            new_deaths.len()
        )));
    }
    if new_cases.iter().chain(new_deaths).chain([&i0]).any(|v| !(*v >= 0.0)) {
        return Err(Error::Input("counts must be non-negative".into()));
    }
    let total: f64 = i0 + new_cases.iter().sum::<f64>();
    if total > n {
        return Err(Error::Validation(format!(
            "cumulative cases {total} exceed population {n}"
        )));
    }

    let len = new_cases.len();
    let mut out = CompartmentSeries {
        t: (0..len).map(|d| d as f64).collect(),
        s: Vec::with_capacity(len),
        i: Vec::with_capacity(len),
        r: Vec::with_capacity(len),
        n,
    };
    // (expiry day, members still queued)
    let mut queue: VecDeque<(usize, f64)> = VecDeque::new();
    let mut infectious = 0.0;
    let mut removed = 0.0;
    let mut unmatched_deaths = 0.0;
    for day in 0..len {
        while let Some(&(expiry, count)) = queue.front() {
            if expiry > day {
                break;
            }
            queue.pop_front();
            infectious -= count;
            removed += count;
        }
        let entering = new_cases[day] + if day == 0 { i0 } else { 0.0 };
        if entering > 0.0 {
            queue.push_back((day + recovery_days, entering));
            infectious += entering;
        }
        if policy == DeathPolicy::Immediate {
            let mut deaths = new_deaths[day];
            while deaths > 0.0 {
                let Some(front) = queue.front_mut() else {
                    unmatched_deaths += deaths;
                    break;
                };
                let taken = deaths.min(front.1);
                front.1 -= taken;
                deaths -= taken;
                infectious -= taken;
                removed += taken;
                if front.1 == 0.0 {
                    queue.pop_front();
                }
            }
        }
        out.i.push(infectious);
        out.r.push(removed);
        out.s.push(n - infectious - removed);
    }
    if unmatched_deaths > 0.0 {
        log::warn!("{unmatched_deaths} deaths had no queued case to remove");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Day-by-day membership count: a case reported on day d is infectious
    /// on days d..d+w unless a death claimed it first.
    fn brute_force_infectious(cases: &[f64], w: usize) -> Vec<f64> {
        (0..cases.len())
            .map(|t| {
                let lo = (t + 1).saturating_sub(w);
                cases[lo..=t].iter().sum()
            })
            .collect()
    }

    #[test]
    fn single_burst() {
        let mut cases = vec![0.0; 30];
        cases[0] = 100.0;
        let out = recovery_queue(&cases, &[0.0; 30], 14, 1000.0, 0.0, DeathPolicy::Immediate).unwrap();
        for d in 0..14 {
            assert_eq!(out.i[d], 100.0);
            assert_eq!(out.r[d], 0.0);
        }
        for d in 14..30 {
            assert_eq!(out.i[d], 0.0);
            assert_eq!(out.r[d], 100.0);
        }
    }

    #[test]
    fn nothing_happens_without_cases() {
        let out = recovery_queue(&[0.0; 10], &[0.0; 10], 14, 500.0, 0.0, DeathPolicy::Immediate).unwrap();
        assert!(out.s.iter().all(|&s| s == 500.0));
        assert!(out.i.iter().chain(&out.r).all(|&v| v == 0.0));
    }

    #[test]
    fn constant_inflow_steady_state() {
        let cases = vec![10.0; 200];
        let out = recovery_queue(&cases, &[0.0; 200], 14, 1e6, 0.0, DeathPolicy::Immediate).unwrap();
        let brute = brute_force_infectious(&cases, 14);
        assert_eq!(out.i, brute);
        assert_eq!(brute[199], 140.0);
        assert_eq!(out.i[199], 140.0);
    }

    #[test]
    fn initial_cohort_leaves_after_window() {
        let out = recovery_queue(&[0.0; 20], &[0.0; 20], 7, 100.0, 5.0, DeathPolicy::Immediate).unwrap();
        assert_eq!(out.i[6], 5.0);
        assert_eq!(out.i[7], 0.0);
        assert_eq!(out.r[7], 5.0);
    }

    #[test]
    fn deaths_move_oldest_cases() {
        let cases = [10.0, 10.0, 0.0, 0.0, 0.0];
        let deaths = [0.0, 0.0, 4.0, 0.0, 0.0];
        let out = recovery_queue(&cases, &deaths, 3, 100.0, 0.0, DeathPolicy::Immediate).unwrap();
        assert_eq!(out.i, vec![10.0, 20.0, 16.0, 10.0, 0.0]);
        assert_eq!(out.r, vec![0.0, 0.0, 4.0, 10.0, 20.0]);

        let at_expiry = recovery_queue(&cases, &deaths, 3, 100.0, 0.0, DeathPolicy::AtExpiry).unwrap();
        assert_eq!(at_expiry.i, vec![10.0, 20.0, 20.0, 10.0, 0.0]);
    }

    #[test]
    fn unbounded_window_accumulates() {
        let cases = [3.0, 1.0, 4.0, 1.0, 5.0];
        let deaths = [0.0, 1.0, 0.0, 2.0, 0.0];
        let out = recovery_queue(&cases, &deaths, 10_000, 100.0, 2.0, DeathPolicy::Immediate).unwrap();
        let mut cum_c = 2.0;
        let mut cum_d = 0.0;
        for t in 0..5 {
            cum_c += cases[t];
            cum_d += deaths[t];
            assert_eq!(out.i[t], cum_c - cum_d);
            assert_eq!(out.r[t], cum_d);
        }
    }

    #[test]
    fn rejects_overflowing_population() {
        assert!(matches!(
            recovery_queue(&[60.0, 60.0], &[0.0, 0.0], 14, 100.0, 0.0, DeathPolicy::Immediate),
            Err(Error::Validation(_))
        ));
        assert!(recovery_queue(&[1.0], &[0.0], 0, 100.0, 0.0, DeathPolicy::Immediate).is_err());
    }

    proptest! {
        #[test]
        fn conservation(
            cases in prop::collection::vec(0u32..500, 1..120),
            death_frac in prop::collection::vec(0.0f64..0.2, 120),
            window in 1usize..30,
            i0 in 0u32..50,
        ) {
            let cases: Vec<f64> = cases.into_iter().map(f64::from).collect();
            let deaths: Vec<f64> = cases.iter().zip(&death_frac).map(|(c, f)| (c * f).floor()).collect();
            let n = 1e7;
            let out = recovery_queue(&cases, &deaths, window, n, f64::from(i0), DeathPolicy::Immediate).unwrap();
            let mut cum = f64::from(i0);
            for (t, &c) in cases.iter().enumerate() {
                cum += c;
                prop_assert_eq!(out.i[t] + out.r[t], cum);
                prop_assert_eq!(out.s[t] + out.i[t] + out.r[t], n);
                prop_assert!(out.i[t] >= 0.0);
            }
        }
    }
}
