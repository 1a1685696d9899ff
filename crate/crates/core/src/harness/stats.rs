use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Sample standard deviation (n − 1 denominator).
pub fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// `mean ± 1.96·sd/√n`.
pub fn mean_ci(v: &[f64]) -> (f64, f64, f64) {
    let m = mean(v);
    let h = 1.96 * sd(v) / (v.len() as f64).sqrt();
    (m, m - h, m + h)
}

fn chi2_1_sf(x: f64) -> f64 {
    erfc((x / 2.0).sqrt())
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `JB = n/6·(S² + (K − 3)²/4)` with population moments; p from χ²₂.
pub fn jarque_bera(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 20 {
        return Err(Error::TooFewSamples { need: 20, got: n });
    }
    let m = mean(samples);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let nf = n as f64;
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    if m2 <= (f64::EPSILON * m.abs()).powi(2) {
        return Err(Error::Degenerate("constant sample".into()));
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let jb = nf / 6.0 * (skew * skew + 0.25 * (kurt - 3.0).powi(2));
    Ok((jb, (-0.5 * jb).exp()))
}

/// Mood's median test: 2×2 χ² (no continuity correction) on counts above
/// and not above the pooled median.
pub fn mood_median_test(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyData);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let med = median(&pooled);
    let above = |v: &[f64]| v.iter().filter(|x| **x > med).count() as f64;
    let table = [
        [above(a), a.len() as f64 - above(a)],
        [above(b), b.len() as f64 - above(b)],
    ];
    let col = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if col[0] == 0.0 || col[1] == 0.0 {
        return Err(Error::Degenerate("all values on one side of the pooled median".into()));
    }
    let total = pooled.len() as f64;
    let mut stat = 0.0;
    for row in &table {
        let rs = row[0] + row[1];
        for (j, obs) in row.iter().enumerate() {
            let exp = rs * col[j] / total;
            stat += (obs - exp).powi(2) / exp;
        }
    }
    Ok((stat, chi2_1_sf(stat)))
}

/// Mann–Kendall trend test. Returns `(S, z, p)` where `p` is the one-sided
/// p-value for a decreasing trend (normal approximation with continuity
/// correction and tie adjustment).
pub fn mann_kendall_decreasing(series: &[f64]) -> Result<(f64, f64, f64)> {
    let n = series.len();
    if n < 3 {
        return Err(Error::TooFewSamples { need: 3, got: n });
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += (series[j] - series[i]).partial_cmp(&0.0).map_or(0.0, |o| o as i32 as f64);
        }
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut k = 0;
    while k < n {
        let mut e = k;
        while e + 1 < n && sorted[e + 1] == sorted[k] {
            e += 1;
        }
        let t = (e - k + 1) as f64;
        ties += t * (t - 1.0) * (2.0 * t + 5.0);
        k = e + 1;
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;
    if var <= 0.0 {
        return Ok((s, 0.0, 1.0));
    }
    let z = if s > 0.0 {
        (s - 1.0) / var.sqrt()
    } else if s < 0.0 {
        (s + 1.0) / var.sqrt()
    } else {
        0.0
    };
    Ok((s, z, normal_cdf(z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedLineage;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, lo, hi) = mean_ci(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((hi - m - 1.96 * (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert!((m - lo - (hi - m)).abs() < 1e-12);
    }

    #[test]
    fn jarque_bera_hand_value() {
        // skew and kurtosis by direct definitions
        let x: Vec<f64> = (1..=20).map(|i| (i as f64).powi(2)).collect();
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let c = |k: i32| x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / n;
        let s = c(3) / c(2).powf(1.5);
        let k = c(4) / c(2).powi(2);
        let jb = n / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0);
        let (stat, p) = jarque_bera(&x).unwrap();
        assert!((stat - jb).abs() < 1e-10);
        assert!((p - (-jb / 2.0).exp()).abs() < 1e-10);
        assert!(jarque_bera(&[1.0; 30]).is_err());
        assert!(jarque_bera(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn jarque_bera_calibration() {
        let mut pass = 0;
        for seed in 0..40 {
            let mut rng = SeedLineage::new(seed).stream("jb", 0);
            let x: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            if jarque_bera(&x).unwrap().1 > 0.01 {
                pass += 1;
            }
        }
        assert!(pass >= 38);
        let mut rng = SeedLineage::new(1).stream("jb", 1);
        let e: Vec<f64> = (0..10_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        assert!(jarque_bera(&e).unwrap().1 < 0.01);
    }

    #[test]
    fn mood_hand_table() {
        let a = [1.0, 2.0, 3.0, 7.0, 8.0];
        let b = [4.0, 5.0, 6.0, 9.0, 10.0, 11.0];
        // pooled median 6; above: a 2/5, b 3/6
        let obs = [[2.0, 3.0], [3.0, 3.0]];
        let (r, c, t) = ([5.0, 6.0], [5.0, 6.0], 11.0);
        let mut chi = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = r[i] * c[j] / t;
                chi += (obs[i][j] - e) * (obs[i][j] - e) / e;
            }
        }
        let (stat, p) = mood_median_test(&a, &b).unwrap();
        assert!((stat - chi).abs() < 1e-10);
        let direct = statrs::distribution::ContinuousCDF::sf(&statrs::distribution::ChiSquared::new(1.0).unwrap(), chi);
        assert!((p - direct).abs() < 1e-10);
    }

    #[test]
    fn mood_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let (s, p) = mood_median_test(&a, &a).unwrap();
        assert!(s.abs() < 1e-12 && (p - 1.0).abs() < 1e-12);
        let mut rng = SeedLineage::new(2).stream("m", 0);
        let x: Vec<f64> = (0..100).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = (0..100).map(|_| 5.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        assert!(mood_median_test(&x, &y).unwrap().1 < 1e-6);
        assert!(mood_median_test(&[1.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn mann_kendall_trends() {
        let (s, _, p) = mann_kendall_decreasing(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(s, -6.0);
        assert!(p < 0.05);
        let (s, _, p) = mann_kendall_decreasing(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s, 6.0);
        assert!(p > 0.9);
        assert_eq!(mann_kendall_decreasing(&[1.0; 5]).unwrap().2, 1.0);
    }
}
