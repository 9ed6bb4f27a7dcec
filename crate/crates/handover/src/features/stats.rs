//! Dataset-level statistics: correlations, group summaries, one-way ANOVA,
//! and pairwise t-tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, WeightCategory};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Alignment {
            detail: format!("pearson inputs have lengths {} and {}", xs.len(), ys.len()),
        });
    }
    if xs.len() < 3 {
        return Err(Error::Length {
            needed: 3,
            got: xs.len(),
        });
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numeric(
            "correlation undefined: an input has zero variance".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// One-way ANOVA across `groups`; returns the F statistic and the p value
/// from the F distribution's upper tail.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<(f64, f64)> {
    if groups.len() < 2 {
        return Err(Error::Parameter(format!(
            "ANOVA needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(small) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::Parameter(format!(
            "every ANOVA group needs at least 2 samples, got one with {}",
            small.len()
        )));
    }
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ss_between: f64 = groups
        .iter()
        .map(|g| g.len() as f64 * (mean(g) - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum();
    let df_between = (k - 1) as f64;
    let df_within = (n - k) as f64;
    if ss_within == 0.0 {
        return if ss_between == 0.0 {
            Err(Error::Parameter("all ANOVA samples are identical".into()))
        } else {
            Ok((f64::INFINITY, 0.0))
        };
    }
    let f = (ss_between / df_between) / (ss_within / df_within);
    let dist = FisherSnedecor::new(df_between, df_within)
        .map_err(|e| Error::Numeric(format!("F distribution: {e}")))?;
    Ok((f, 1.0 - dist.cdf(f)))
}

/// Two-sided t-test. Paired uses the differences; unpaired uses the Welch
/// unequal-variance variant.
pub fn t_test(xs: &[f64], ys: &[f64], paired: bool) -> Result<(f64, f64)> {
    if paired {
        if xs.len() != ys.len() {
            return Err(Error::Alignment {
                detail: format!(
                    "paired t-test inputs have lengths {} and {}",
                    xs.len(),
                    ys.len()
                ),
            });
        }
        if xs.len() < 2 {
            return Err(Error::Length {
                needed: 2,
                got: xs.len(),
            });
        }
        let diffs: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
        let md = mean(&diffs);
        let sd = sample_var(&diffs).sqrt();
        let n = diffs.len() as f64;
        if sd == 0.0 {
            return Ok(if md == 0.0 {
                (0.0, 1.0)
            } else {
                (md.signum() * f64::INFINITY, 0.0)
            });
        }
        let t = md / (sd / n.sqrt());
        return two_sided_p(t, n - 1.0).map(|p| (t, p));
    }
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::Length {
            needed: 2,
            got: xs.len().min(ys.len()),
        });
    }
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (vx, vy) = (sample_var(xs), sample_var(ys));
    let se2 = vx / nx + vy / ny;
    let delta = mean(xs) - mean(ys);
    if se2 == 0.0 {
        return Ok(if delta == 0.0 {
            (0.0, 1.0)
        } else {
            (delta.signum() * f64::INFINITY, 0.0)
        });
    }
    let t = delta / se2.sqrt();
    // Welch-Satterthwaite degrees of freedom.
    let df = se2 * se2
        / ((vx / nx).powi(2) / (nx - 1.0) + (vy / ny).powi(2) / (ny - 1.0));
    two_sided_p(t, df).map(|p| (t, p))
}

fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Numeric(format!("t distribution: {e}")))?;
    Ok(2.0 * (1.0 - dist.cdf(t.abs())))
}

/// Per-weight-category means of every defined metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSummary {
    pub category: WeightCategory,
    pub count: usize,
    pub means: Vec<MetricMean>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricMean {
    pub metric: String,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricCorrelation {
    pub metric: String,
    pub r: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
}

/// Everything the `analyze` command writes to `stats.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    pub record_count: usize,
    pub groups: Vec<GroupSummary>,
    pub weight_correlations: Vec<MetricCorrelation>,
    pub anova: Vec<TestResult>,
    pub t_tests: Vec<TestResult>,
}

const METRICS: [&str; 12] = [
    "t_tak_con_ms",
    "t_giv_rel_ms",
    "t_tf_ms",
    "t_gr_ms",
    "max_pull_n",
    "max_pull_over_weight",
    "t_ld_shift_ms",
    "transfer_height_norm",
    "avg_velocity",
    "max_velocity",
    "avg_acceleration",
    "max_acceleration",
];

fn metric_value(fs: &FeatureSet, metric: &str) -> Option<f64> {
    match metric {
        "t_tak_con_ms" => fs.t_tak_con_ms,
        "t_giv_rel_ms" => fs.t_giv_rel_ms,
        "t_tf_ms" => fs.t_tf_ms,
        "t_gr_ms" => fs.t_gr_ms,
        "max_pull_n" => fs.max_pull_n,
        "max_pull_over_weight" => fs.max_pull_over_weight,
        "t_ld_shift_ms" => fs.t_ld_shift_ms,
        "transfer_height_norm" => fs.transfer_height_norm,
        "avg_velocity" => fs.avg_velocity,
        "max_velocity" => fs.max_velocity,
        "avg_acceleration" => fs.avg_acceleration,
        "max_acceleration" => fs.max_acceleration,
        _ => None,
    }
}

/// Metrics the group-difference tests run on.
const TESTED_METRICS: [&str; 5] = [
    "t_tf_ms",
    "t_gr_ms",
    "max_pull_over_weight",
    "avg_velocity",
    "avg_acceleration",
];

/// Aggregates per-record features into dataset statistics. Tests that lack
/// enough defined data are silently omitted.
pub fn summarize(sets: &[FeatureSet]) -> DatasetStats {
    let mut groups = Vec::new();
    for category in WeightCategory::ALL {
        let members: Vec<&FeatureSet> =
            sets.iter().filter(|fs| fs.category == category).collect();
        if members.is_empty() {
            continue;
        }
        let means = METRICS
            .iter()
            .filter_map(|&metric| {
                let vals: Vec<f64> =
                    members.iter().filter_map(|fs| metric_value(fs, metric)).collect();
                (!vals.is_empty()).then(|| MetricMean {
                    metric: metric.to_string(),
                    mean: mean(&vals),
                    count: vals.len(),
                })
            })
            .collect();
        groups.push(GroupSummary {
            category,
            count: members.len(),
            means,
        });
    }

    let mut weight_correlations = Vec::new();
    for &metric in &METRICS {
        let pairs: Vec<(f64, f64)> = sets
            .iter()
            .filter_map(|fs| metric_value(fs, metric).map(|v| (fs.weight_kg, v)))
            .collect();
        if pairs.len() < 3 {
            continue;
        }
        let ws: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let vs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(r) = pearson(&ws, &vs) {
            weight_correlations.push(MetricCorrelation {
                metric: metric.to_string(),
                r,
                count: pairs.len(),
            });
        }
    }

    let mut anova = Vec::new();
    let mut t_tests = Vec::new();
    for &metric in &TESTED_METRICS {
        let by_category: Vec<(WeightCategory, Vec<f64>)> = WeightCategory::ALL
            .iter()
            .map(|&c| {
                let vals = sets
                    .iter()
                    .filter(|fs| fs.category == c)
                    .filter_map(|fs| metric_value(fs, metric))
                    .collect::<Vec<f64>>();
                (c, vals)
            })
            .filter(|(_, vals)| vals.len() >= 2)
            .collect();
        if by_category.len() >= 2 {
            let groups: Vec<Vec<f64>> =
                by_category.iter().map(|(_, v)| v.clone()).collect();
            if let Ok((f, p)) = one_way_anova(&groups) {
                anova.push(TestResult {
                    name: format!("anova {metric}"),
                    statistic: f,
                    p_value: p,
                });
            }
        }
        for i in 0..by_category.len() {
            for j in i + 1..by_category.len() {
                if let Ok((t, p)) =
                    t_test(&by_category[i].1, &by_category[j].1, false)
                {
                    t_tests.push(TestResult {
                        name: format!(
                            "t {metric} {} vs {}",
                            by_category[i].0, by_category[j].0
                        ),
                        statistic: t,
                        p_value: p,
                    });
                }
            }
        }
    }

    DatasetStats {
        record_count: sets.len(),
        groups,
        weight_correlations,
        anova,
        t_tests,
    }
}
