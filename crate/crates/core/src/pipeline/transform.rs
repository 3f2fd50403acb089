use crate::error::{Error, Result};

/// Working days in one "month".
pub const MONTH: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeKind {
    /// `ln s[t] - ln s[t - lag]`
    LogDiff,
    /// `s[t] - s[t - lag]`
    Diff,
}

/// Trailing moving average; the first `window - 1` entries are unavailable.
pub fn rolling_mean(series: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 {
        return Err(Error::InvalidInput(
            "rolling window must be positive".into(),
        ));
    }
    if window > series.len() {
        return Err(Error::InsufficientData {
            what: format!("{window}-day rolling mean"),
            needed: window,
            got: series.len(),
        });
    }
    let mut out = vec![None; series.len()];
    let mut sum = 0.0;
    let mut comp = 0.0;
    let w = window as f64;
    for (t, &v) in series.iter().enumerate() {
        neumaier_add(&mut sum, &mut comp, v);
        if t >= window {
            neumaier_add(&mut sum, &mut comp, -series[t - window]);
        }
        if t + 1 >= window {
            out[t] = Some((sum + comp) / w);
        }
    }
    Ok(out)
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

/// Change over `lag` steps of a series with possibly unavailable entries.
///
/// Returns [`Error::NonPositive`] with the offending index when a log
/// difference meets a nonpositive value.
pub fn change(series: &[Option<f64>], lag: usize, kind: ChangeKind) -> Result<Vec<Option<f64>>> {
    if kind == ChangeKind::LogDiff {
        if let Some((index, value)) = series
            .iter()
            .enumerate()
            .find_map(|(i, v)| v.filter(|x| !(*x > 0.0)).map(|x| (i, x)))
        {
            return Err(Error::NonPositive { index, value });
        }
    }
    Ok((0..series.len())
        .map(|t| {
            if t < lag {
                return None;
            }
            let (now, then) = (series[t]?, series[t - lag]?);
            Some(match kind {
                ChangeKind::LogDiff => now.ln() - then.ln(),
                ChangeKind::Diff => now - then,
            })
        })
        .collect())
}

/// 22-working-day change of a dense series.
pub fn change_22(series: &[f64], kind: ChangeKind) -> Result<Vec<Option<f64>>> {
    let wrapped: Vec<Option<f64>> = series.iter().copied().map(Some).collect();
    change(&wrapped, MONTH, kind)
}

/// Shifts a series forward by `lag` steps.
pub fn lag(series: &[Option<f64>], lag: usize) -> Vec<Option<f64>> {
    (0..series.len())
        .map(|t| if t < lag { None } else { series[t - lag] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct_mean(s: &[f64], t: usize, w: usize) -> f64 {
        let mut acc = 0.0;
        for v in &s[t + 1 - w..=t] {
            acc += v;
        }
        acc / w as f64
    }

    #[test]
    fn constant_series_has_constant_mean() {
        let s = vec![7.25; 40];
        for w in [1, 5, 22, 40] {
            let m = rolling_mean(&s, w).unwrap();
            assert!(m[..w - 1].iter().all(Option::is_none));
            assert!(m[w - 1..].iter().all(|v| (v.unwrap() - 7.25).abs() < 1e-12));
        }
    }

    #[test]
    fn mean_of_one_to_twenty_two() {
        let s: Vec<f64> = (1..=22).map(f64::from).collect();
        let m = rolling_mean(&s, 22).unwrap();
        assert_eq!(m[21], Some(11.5));
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s: Vec<f64> = (0..100).map(|_| rng.random_range(-50.0..150.0)).collect();
        let m = rolling_mean(&s, 22).unwrap();
        for t in 21..100 {
            let want = direct_mean(&s, t, 22);
            assert!((m[t].unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn window_longer_than_series() {
        assert!(matches!(
            rolling_mean(&[1.0; 5], 22),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn constant_series_has_no_change() {
        let s = vec![3.0; 30];
        for kind in [ChangeKind::LogDiff, ChangeKind::Diff] {
            let c = change_22(&s, kind).unwrap();
            assert!(c[..22].iter().all(Option::is_none));
            assert!(c[22..].iter().all(|v| *v == Some(0.0)));
        }
    }

    #[test]
    fn log_change_of_e_is_one() {
        let mut s = vec![2.0; 23];
        s[22] = 2.0 * std::f64::consts::E;
        let c = change_22(&s, ChangeKind::LogDiff).unwrap();
        assert!((c[22].unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_explicit_indexing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..80).map(|_| rng.random_range(0.5..90.0)).collect();
        let log = change_22(&s, ChangeKind::LogDiff).unwrap();
        let diff = change_22(&s, ChangeKind::Diff).unwrap();
        for t in 22..80 {
            assert_eq!(log[t], Some(s[t].ln() - s[t - 22].ln()));
            assert_eq!(diff[t], Some(s[t] - s[t - 22]));
        }
    }

    #[test]
    fn log_change_rejects_nonpositive() {
        let mut s = vec![1.0; 30];
        s[17] = 0.0;
        assert!(matches!(
            change_22(&s, ChangeKind::LogDiff),
            Err(Error::NonPositive { index: 17, .. })
        ));
        assert!(change_22(&s, ChangeKind::Diff).is_ok());
    }

    #[test]
    fn lag_shifts() {
        let s = [Some(1.0), Some(2.0), None, Some(4.0)];
        assert_eq!(lag(&s, 1), vec![None, Some(1.0), Some(2.0), None]);
    }

    proptest! {
        #[test]
        fn rolling_mean_commutes_with_affine_maps(
            s in proptest::collection::vec(-100.0f64..100.0, 22..80),
            a in -5.0f64..5.0,
            b in -50.0f64..50.0,
            w in 1usize..22,
        ) {
            let mapped: Vec<f64> = s.iter().map(|v| a * v + b).collect();
            let lhs = rolling_mean(&mapped, w).unwrap();
            let rhs = rolling_mean(&s, w).unwrap();
            for (l, r) in lhs.iter().zip(&rhs) {
                match (l, r) {
                    (Some(l), Some(r)) => prop_assert!((l - (a * r + b)).abs() < 1e-9),
                    (None, None) => {}
                    _ => prop_assert!(false, "availability differs"),
                }
            }
        }

        #[test]
        fn diff_change_is_linear(
            pair in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 23..60),
            a in -3.0f64..3.0,
        ) {
            let (s, u): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let combo: Vec<f64> = s.iter().zip(&u).map(|(x, y)| a * x + y).collect();
            let cs = change_22(&s, ChangeKind::Diff).unwrap();
            let cu = change_22(&u, ChangeKind::Diff).unwrap();
            let cc = change_22(&combo, ChangeKind::Diff).unwrap();
            for t in 22..s.len() {
                let want = a * cs[t].unwrap() + cu[t].unwrap();
                prop_assert!((cc[t].unwrap() - want).abs() < 1e-9);
            }
        }
    }
}
