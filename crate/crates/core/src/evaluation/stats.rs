use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

pub const MIN_COMPARISON_RESPONDENTS: usize = 10;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation; NaN when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson inputs differ in length");
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostHoc {
    pub pair: [String; 2],
    /// Mean of `pair[0] − pair[1]`.
    pub mean_difference: f64,
    pub t: f64,
    pub p_raw: f64,
    pub p_adj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: String,
    /// How each respondent's per-step values were reduced to one number.
    pub aggregation: String,
    #[serde(rename = "F")]
    pub f: f64,
    pub df_tests: f64,
    pub df_error: f64,
    pub p: f64,
    pub posthoc: Vec<PostHoc>,
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// One-way repeated-measures ANOVA with tests as the within-subject factor,
/// followed by Bonferroni-adjusted paired t-tests for every pair of tests.
/// `values[j][i]` is respondent `i`'s summary under test `j`.
pub fn compare_tests(
    metric: &str,
    aggregation: &str,
    names: &[String],
    values: &[Vec<f64>],
) -> Result<ComparisonReport> {
    let k = values.len();
    if k < 2 || names.len() != k {
        return Err(Error::InvalidArgument("need at least two named tests".into()));
    }
    let n = values[0].len();
    if values.iter().any(|v| v.len() != n) {
        return Err(Error::MismatchedRespondents(
            "tests have different respondent counts".into(),
        ));
    }
    if n < MIN_COMPARISON_RESPONDENTS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_COMPARISON_RESPONDENTS} respondents, got {n}"
        )));
    }
    let (kf, nf) = (k as f64, n as f64);
    let test_means: Vec<f64> = values.iter().map(|v| mean(v)).collect();
    let subject_means: Vec<f64> = (0..n).map(|i| values.iter().map(|v| v[i]).sum::<f64>() / kf).collect();
    let grand = mean(&test_means);
    let ss_total: f64 = values.iter().flatten().map(|x| (x - grand).powi(2)).sum();
    let ss_tests = nf * test_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_subjects = kf * subject_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_error = (ss_total - ss_tests - ss_subjects).max(0.0);
    let df_tests = kf - 1.0;
    let df_error = (kf - 1.0) * (nf - 1.0);
    let scale = ss_total.max(f64::MIN_POSITIVE);

    let (f, p) = if ss_error <= 1e-12 * scale {
        if ss_tests <= 1e-12 * scale {
            (0.0, 1.0)
        } else {
            return Err(Error::DegenerateVariance(format!(
                "{metric}: zero residual variance between tests"
            )));
        }
    } else {
        let f = (ss_tests / df_tests) / (ss_error / df_error);
        let dist = FisherSnedecor::new(df_tests, df_error).map_err(|e| Error::DegenerateVariance(e.to_string()))?;
        (f, clamp_p(dist.sf(f)))
    };

    let m = (k * (k - 1) / 2) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::DegenerateVariance(e.to_string()))?;
    let mut posthoc = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let d: Vec<f64> = values[a].iter().zip(&values[b]).map(|(x, y)| x - y).collect();
            let md = mean(&d);
            let sd = (d.iter().map(|x| (x - md).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
            let (t, p_raw) = if sd == 0.0 || sd <= 1e-12 * md.abs() {
                if md == 0.0 {
                    (0.0, 1.0)
                } else {
                    return Err(Error::DegenerateVariance(format!(
                        "{metric}: constant difference between `{}` and `{}`",
                        names[a], names[b]
                    )));
                }
            } else {
                let t = md / (sd / nf.sqrt());
                (t, clamp_p(2.0 * t_dist.sf(t.abs())))
            };
            posthoc.push(PostHoc {
                pair: [names[a].clone(), names[b].clone()],
                mean_difference: md,
                t,
                p_raw,
                p_adj: (p_raw * m).min(1.0),
            });
        }
    }
    Ok(ComparisonReport {
        metric: metric.to_string(),
        aggregation: aggregation.to_string(),
        f,
        df_tests,
        df_error,
        p,
        posthoc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("t{i}")).collect()
    }

    fn noisy(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn identical_tests() {
        let v = noisy(30, 1);
        let r = compare_tests("se", "mean", &names(3), &[v.clone(), v.clone(), v]).unwrap();
        assert_eq!(r.f, 0.0);
        assert!(r.posthoc.iter().all(|p| p.p_adj == 1.0));
    }

    #[test]
    fn two_tests_f_is_t_squared() {
        let a = noisy(40, 2);
        let b: Vec<f64> = noisy(40, 3).iter().zip(&a).map(|(e, x)| x + 0.2 + 0.5 * e).collect();
        let r = compare_tests("se", "mean", &names(2), &[a, b]).unwrap();
        let t = r.posthoc[0].t;
        assert!((r.f - t * t).abs() < 1e-9 * r.f.max(1.0));
        assert!((r.p - r.posthoc[0].p_raw).abs() < 1e-9);
    }

    #[test]
    fn shifted_test_is_significant() {
        let base = noisy(200, 4);
        let same: Vec<f64> = base.iter().zip(noisy(200, 5)).map(|(x, e)| x + 0.05 * e).collect();
        let shifted: Vec<f64> = base
            .iter()
            .zip(noisy(200, 6))
            .map(|(x, e)| x + 0.5 + 0.05 * e)
            .collect();
        let r = compare_tests("se", "mean", &names(3), &[base, same, shifted]).unwrap();
        assert!(r.posthoc[1].p_adj < 1e-3);
        assert!(r.posthoc[2].p_adj < 1e-3);
        for p in &r.posthoc {
            assert!(p.p_adj >= p.p_raw && p.p_adj > 0.0 && p.p_adj <= 1.0);
        }
    }

    #[test]
    fn constant_difference_is_degenerate() {
        let a = noisy(20, 7);
        let b: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        assert!(matches!(
            compare_tests("se", "mean", &names(2), &[a, b]),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &[8.0, 6.0, 4.0, 2.0]) + 1.0).abs() < 1e-15);
        assert!(pearson(&x, &[1.0; 4]).is_nan());
    }
}
