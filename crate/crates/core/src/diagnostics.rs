//! Posterior predictive replicates, KS divergences, credible intervals and
//! predictive bands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::PosteriorSamples;
use crate::measures::Family;
use crate::rng::stream;
use crate::sampling::{
    partition_stats, sample_partition_with_dust, sample_weights, PartitionCounts, Truncation,
};
use rand::Rng;

/// Partitions of size `n` drawn from the posterior predictive. Replicate `r`
/// uses stream `r` of `seed`: a uniformly chosen retained draw, fresh
/// weights, then `n` allocations (any truncated mass becomes singletons).
pub fn posterior_predictive(
    samples: &PosteriorSamples,
    n: u64,
    replicates: usize,
    truncation: &Truncation,
    seed: u64,
) -> Result<Vec<PartitionCounts>> {
    if replicates == 0 {
        return Ok(Vec::new());
    }
    if samples.draws.is_empty() {
        return Err(Error::validation("posterior has no retained draws"));
    }
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r);
            let i = rng.random_range(0..samples.draws.len());
            let model = samples.model_at(i);
            let ws = sample_weights(&model, &mut rng, truncation)?;
            sample_partition_with_dust(&ws, n, &mut rng)
        })
        .collect()
}

/// Survival `S(x) = #{clusters with size >= x} / K` at each `x`.
fn size_survival(counts: &PartitionCounts, xs: &[u64]) -> Vec<f64> {
    // Counts are descending; the number of sizes >= x is a partition point.
    let c = counts.counts();
    let k = c.len() as f64;
    xs.iter()
        .map(|&x| c.partition_point(|&m| m >= x) as f64 / k)
        .collect()
}

fn union_sizes(a: &PartitionCounts, b: &PartitionCounts) -> Vec<u64> {
    let mut xs: Vec<u64> = a.counts().iter().chain(b.counts()).copied().collect();
    xs.sort_unstable();
    xs.dedup();
    xs
}

/// Plain KS distance between the cluster-size distributions.
pub fn ks_plain(data: &PartitionCounts, predictive: &PartitionCounts) -> f64 {
    let xs = union_sizes(data, predictive);
    let sd = size_survival(data, &xs);
    let sp = size_survival(predictive, &xs);
    // Survival at sizes and just above them covers both sides of every jump.
    let above: Vec<u64> = xs.iter().map(|x| x + 1).collect();
    let sd2 = size_survival(data, &above);
    let sp2 = size_survival(predictive, &above);
    sd.iter()
        .zip(&sp)
        .chain(sd2.iter().zip(&sp2))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Reweighted KS divergence
/// `max_x |S_data(x) - S_pred(x)| / sqrt(S_pred(x)(1 - S_pred(x)))` over the
/// observed sizes `x` with `0 < S_pred(x) < 1`, where `S(x)` is the fraction
/// of clusters of size at least `x`. Falls back to [`ks_plain`] when no such
/// `x` exists.
pub fn ks_reweighted(data: &PartitionCounts, predictive: &PartitionCounts) -> f64 {
    let mut xs: Vec<u64> = data.counts().to_vec();
    xs.sort_unstable();
    xs.dedup();
    let sd = size_survival(data, &xs);
    let sp = size_survival(predictive, &xs);
    let mut best: Option<f64> = None;
    for (a, b) in sd.iter().zip(&sp) {
        if *b > 0.0 && *b < 1.0 {
            let d = (a - b).abs() / (b * (1.0 - b)).sqrt();
            best = Some(best.map_or(d, |v: f64| v.max(d)));
        }
    }
    match best {
        Some(d) => d,
        None => {
            log::warn!("reweighted KS has degenerate support; reporting the plain KS distance");
            ks_plain(data, predictive)
        }
    }
}

/// Mean reweighted and plain KS of the data against each replicate.
pub fn mean_ks(data: &PartitionCounts, replicates: &[PartitionCounts]) -> Result<(f64, f64)> {
    if replicates.is_empty() {
        return Err(Error::validation("no predictive replicates"));
    }
    let r = replicates.len() as f64;
    let rw = replicates
        .iter()
        .map(|p| ks_reweighted(data, p))
        .sum::<f64>()
        / r;
    let pl = replicates.iter().map(|p| ks_plain(data, p)).sum::<f64>() / r;
    Ok((rw, pl))
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (`h = (n-1)p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed interval at `level`.
pub fn credible_interval(trace: &[f64], level: f64) -> Result<(f64, f64)> {
    if trace.is_empty() {
        return Err(Error::validation("empty trace"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(format!(
            "level must lie in (0,1), got {level}"
        )));
    }
    let mut s = trace.to_vec();
    s.sort_by(f64::total_cmp);
    let a = 0.5 * (1.0 - level);
    Ok((quantile_sorted(&s, a), quantile_sorted(&s, 1.0 - a)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandMode {
    /// Proportion of clusters of each size.
    Spectrum,
    /// Ranked counts.
    Rank,
}

/// Pointwise 2.5/50/97.5% quantiles across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveBands {
    pub mode: BandMode,
    pub axis: Vec<u64>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PredictiveBands {
    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }
}

pub fn predictive_bands(replicates: &[PartitionCounts], mode: BandMode) -> Result<PredictiveBands> {
    if replicates.len() < 2 {
        return Err(Error::validation(
            "predictive bands need at least 2 replicates",
        ));
    }
    let (axis, rows): (Vec<u64>, Vec<Vec<f64>>) = match mode {
        BandMode::Spectrum => {
            let spectra: Vec<_> = replicates.iter().map(partition_stats).collect();
            let mut axis: Vec<u64> = spectra
                .iter()
                .flat_map(|s| s.entries.iter().map(|e| e.0))
                .collect();
            axis.sort_unstable();
            axis.dedup();
            let rows = axis
                .iter()
                .map(|&j| spectra.iter().map(|s| s.proportion(j)).collect())
                .collect();
            (axis, rows)
        }
        BandMode::Rank => {
            let kmax = replicates.iter().map(|r| r.k()).max().unwrap_or(0);
            let axis: Vec<u64> = (1..=kmax as u64).collect();
            let rows = (0..kmax)
                .map(|k| {
                    replicates
                        .iter()
                        .map(|r| r.counts().get(k).copied().unwrap_or(0) as f64)
                        .collect()
                })
                .collect();
            (axis, rows)
        }
    };
    let mut lower = Vec::with_capacity(axis.len());
    let mut median = Vec::with_capacity(axis.len());
    let mut upper = Vec::with_capacity(axis.len());
    for mut row in rows {
        row.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&row, 0.025));
        median.push(quantile_sorted(&row, 0.5));
        upper.push(quantile_sorted(&row, 0.975));
    }
    Ok(PredictiveBands {
        mode,
        axis,
        lower,
        median,
        upper,
    })
}

/// Fraction of points `(axis, value)` inside the band, over the band's axis
/// restricted to `axis <= limit` (missing values count as 0).
pub fn band_coverage(bands: &PredictiveBands, values: &[(u64, f64)], limit: u64) -> f64 {
    let mut inside = 0usize;
    let mut total = 0usize;
    for (i, &a) in bands.axis.iter().enumerate() {
        if a > limit {
            break;
        }
        let v = values.iter().find(|p| p.0 == a).map_or(0.0, |p| p.1);
        total += 1;
        if v >= bands.lower[i] && v <= bands.upper[i] {
            inside += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        inside as f64 / total as f64
    }
}

/// `(rank, count)` pairs of a partition.
pub fn rank_points(counts: &PartitionCounts) -> Vec<(u64, f64)> {
    counts
        .counts()
        .iter()
        .enumerate()
        .map(|(k, &m)| (k as u64 + 1, m as f64))
        .collect()
}

/// Fitted families shown side by side in reports.
pub fn family_label(f: Family) -> &'static str {
    match f {
        Family::PyBaseline => "PY",
        Family::Ggp => "GGP",
        Family::Gbfry => "GBFRY",
        Family::BetaPrime => "BP",
        Family::Stable => "Stable",
        Family::Mixture => "Mixture",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{AcceptanceRates, Draw};
    use crate::measures::ModelSpec;
    use crate::sampling::sample_partition;
    use approx::assert_relative_eq;

    fn counts(v: &[u64]) -> PartitionCounts {
        PartitionCounts::new(v.to_vec()).unwrap()
    }

    fn point_posterior(family: Family, sigma: f64, tau: f64, eta: f64) -> PosteriorSamples {
        PosteriorSamples {
            family,
            draws: vec![Draw {
                iter: 0,
                eta,
                sigma,
                tau,
                u: 1.0,
                log_joint: 0.0,
            }],
            burnin: 0,
            thin: 1,
            seed: 0,
            acceptance: AcceptanceRates::default(),
        }
    }

    #[test]
    fn zero_replicates_is_empty() {
        let p = point_posterior(Family::Gbfry, 0.2, 2.0, 10.0);
        assert!(posterior_predictive(&p, 100, 0, &Truncation::default(), 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn degenerate_posterior_matches_direct_simulation() {
        let p = point_posterior(Family::Gbfry, 0.3, 2.0, 20.0);
        let t = Truncation::with_tol(1e-5);
        let reps = posterior_predictive(&p, 500, 400, &t, 2).unwrap();
        assert!(reps.iter().all(|r| r.n() == 500));
        let model = ModelSpec::gbfry(0.3, 2.0, 1.0, 20.0);
        let direct: Vec<f64> = (0..400)
            .map(|r| {
                let mut rng = stream(3, r);
                let ws = sample_weights(&model, &mut rng, &t).unwrap();
                sample_partition(&ws, 500, &mut rng).unwrap().k() as f64
            })
            .collect();
        let kp: Vec<f64> = reps.iter().map(|r| r.k() as f64).collect();
        let (va, vb) = (crate::stats::variance(&kp), crate::stats::variance(&direct));
        // Standard error of a sample variance ≈ v·sqrt(2/(n-1)) for near-normal K_n.
        let se = (va * va + vb * vb).sqrt() * (2.0 / 399.0f64).sqrt();
        assert!((va - vb).abs() < 3.0 * se, "{va} vs {vb}");
    }

    #[test]
    fn reweighted_ks_examples() {
        let a = counts(&[5, 3, 3, 1, 1]);
        assert_eq!(ks_reweighted(&a, &a), 0.0);
        assert_eq!(ks_plain(&a, &a), 0.0);
        // Data all singletons vs predictive all pairs: no size leaves the
        // predictive survival strictly inside (0,1), so the plain distance is used.
        let d = counts(&[1, 1, 1]);
        let p = counts(&[2, 2]);
        assert_eq!(ks_reweighted(&d, &p), 1.0);
        // Hand enumeration: data sizes {1,1,3}, predictive sizes {1,2,2,4}.
        // Observed x ∈ {1, 3}: S_pred(1) = 1 (skipped), S_pred(3) = 1/4,
        // S_data(3) = 1/3, D = (1/12)/sqrt(3/16).
        let d = counts(&[3, 1, 1]);
        let p = counts(&[4, 2, 2, 1]);
        assert_relative_eq!(
            ks_reweighted(&d, &p),
            (1.0 / 12.0) / (3.0f64 / 16.0).sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn credible_interval_examples() {
        assert_eq!(credible_interval(&[2.5; 10], 0.95).unwrap(), (2.5, 2.5));
        let t: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let (lo, hi) = credible_interval(&t, 0.9).unwrap();
        assert_relative_eq!(lo, 5.95, max_relative = 1e-14);
        assert_relative_eq!(hi, 95.05, max_relative = 1e-14);
        let (a, b) = credible_interval(&t, 0.5).unwrap();
        let (c, d) = credible_interval(&t, 0.95).unwrap();
        assert!(c <= a && b <= d);
        let mut rev = t.clone();
        rev.reverse();
        assert_eq!(credible_interval(&rev, 0.9).unwrap(), (lo, hi));
        assert!(credible_interval(&[], 0.9).is_err());
    }

    #[test]
    fn bands_identical_replicates_have_zero_width() {
        let r = vec![counts(&[4, 2, 1]); 5];
        for mode in [BandMode::Spectrum, BandMode::Rank] {
            let b = predictive_bands(&r, mode).unwrap();
            assert_eq!(b.lower, b.upper);
        }
        assert!(predictive_bands(&r[..1], BandMode::Rank).is_err());
    }

    #[test]
    fn rank_band_medians_are_monotone_and_padded() {
        let r = vec![
            counts(&[9, 5, 2]),
            counts(&[7, 1]),
            counts(&[8, 3, 3, 1]),
            counts(&[6, 6, 1]),
        ];
        let b = predictive_bands(&r, BandMode::Rank).unwrap();
        assert_eq!(b.axis, vec![1, 2, 3, 4]);
        assert!(b.median.windows(2).all(|w| w[0] >= w[1]));
        assert!(b
            .lower
            .iter()
            .zip(&b.median)
            .zip(&b.upper)
            .all(|((l, m), u)| l <= m && m <= u));
        let mut shuffled = r.clone();
        shuffled.rotate_left(2);
        assert_eq!(predictive_bands(&shuffled, BandMode::Rank).unwrap(), b);
        let s = predictive_bands(&r, BandMode::Spectrum).unwrap();
        assert_eq!(s.axis, vec![1, 2, 3, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn own_band_covers_simulated_data() {
        let p = point_posterior(Family::Gbfry, 0.3, 2.0, 100.0);
        let t = Truncation::with_tol(1e-5);
        let reps = posterior_predictive(&p, 5000, 500, &t, 4).unwrap();
        let b = predictive_bands(&reps, BandMode::Rank).unwrap();
        let model = ModelSpec::gbfry(0.3, 2.0, 1.0, 100.0);
        let mut rng = stream(5, 0);
        let ws = sample_weights(&model, &mut rng, &t).unwrap();
        let data = sample_partition(&ws, 5000, &mut rng).unwrap();
        assert!(band_coverage(&b, &rank_points(&data), 100) >= 0.9);
    }
}
