use statrs::distribution::{Binomial, DiscreteCDF};

use super::runner::{ResultRow, SweepPoint};
use crate::error::{Error, Result};

/// Paired one-sided sign test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    /// Pairs where the first value is strictly smaller.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(X ≥ wins)` for `X ~ Bin(wins + losses, 1/2)`; ties are dropped.
    pub p_value: f64,
}

/// Tests whether `a` tends to be smaller than `b`.
pub fn sign_test_less(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidParam("sign test needs equal nonempty samples".into()));
    }
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        if x < y {
            wins += 1;
        } else if x > y {
            losses += 1;
        } else {
            ties += 1;
        }
    }
    let n = (wins + losses) as u64;
    let p_value = if wins == 0 {
        1.0
    } else {
        let dist = Binomial::new(0.5, n).expect("valid binomial");
        dist.sf(wins as u64 - 1)
    };
    Ok(SignTest {
        wins,
        losses,
        ties,
        p_value,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Aggregates over the seeds of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: SweepPoint,
    pub runs: usize,
    pub mean_psnr: f64,
    pub mean_nmse: f64,
    pub mean_posterior_moment_error: f64,
    pub failure_rate: f64,
}

/// Groups rows by sweep point, preserving first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<PointSummary> {
    let mut groups: Vec<(SweepPoint, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(p, _)| *p == r.point) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.point, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(point, g)| {
            let col = |f: fn(&ResultRow) -> f64| mean(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            PointSummary {
                point,
                runs: g.len(),
                mean_psnr: col(|r| r.psnr),
                mean_nmse: col(|r| r.nmse),
                mean_posterior_moment_error: col(|r| r.posterior_moment_error),
                failure_rate: g.iter().filter(|r| r.failed).count() as f64 / g.len() as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_tail() {
        let a = vec![0.0; 10];
        let b = vec![1.0; 10];
        let t = sign_test_less(&a, &b).unwrap();
        assert_eq!((t.wins, t.losses, t.ties), (10, 0, 0));
        assert!((t.p_value - 0.5f64.powi(10)).abs() < 1e-15);
        // 8 of 10: (45 + 10 + 1) / 1024
        let mut b2 = b.clone();
        b2[0] = -1.0;
        b2[1] = -1.0;
        let t = sign_test_less(&a, &b2).unwrap();
        assert!((t.p_value - 56.0 / 1024.0).abs() < 1e-12);
        let t = sign_test_less(&b, &a).unwrap();
        assert_eq!(t.p_value, 1.0);
        assert!(sign_test_less(&a, &b[..3]).is_err());
    }
}
