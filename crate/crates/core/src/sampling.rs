//! CRM weights, partitions and partition statistics.
//!
//! Weights come from the inverse Lévy representation
//! `w_(k) = ρ̄^{-1}(Γ_k)` with `Γ_k` unit-rate Poisson arrivals, or from the
//! scaled-GGP constructions of the GBFRY and beta prime families. Atom
//! locations are never drawn: partitions depend on the weights only.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Family, ModelSpec};
use crate::special::{gamma, ln_gamma, lower_incomplete_gamma};

pub const DEFAULT_REL_MASS_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_JUMPS: usize = 20_000_000;

/// When to stop emitting jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Stop once the expected mass below the current jump is at most this
    /// fraction of the mass emitted so far.
    pub rel_mass_tol: f64,
    pub max_jumps: usize,
    /// With `false`, hitting `max_jumps` returns the jumps so far and reports
    /// the remainder as expected truncated mass instead of failing.
    pub fail_on_budget: bool,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            rel_mass_tol: DEFAULT_REL_MASS_TOL,
            max_jumps: DEFAULT_MAX_JUMPS,
            fail_on_budget: true,
        }
    }
}

impl Truncation {
    pub fn with_tol(rel_mass_tol: f64) -> Self {
        Self {
            rel_mass_tol,
            ..Self::default()
        }
    }

    /// Fixed jump budget; the unrepresented small jumps become dust.
    pub fn budget(max_jumps: usize) -> Self {
        Self {
            rel_mass_tol: DEFAULT_REL_MASS_TOL,
            max_jumps,
            fail_on_budget: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_mass_tol > 0.0 && self.rel_mass_tol < 1.0) {
            return Err(Error::validation(format!(
                "rel_mass_tol must lie in (0,1), got {}",
                self.rel_mass_tol
            )));
        }
        if self.max_jumps == 0 {
            return Err(Error::validation("max_jumps must be positive"));
        }
        Ok(())
    }
}

/// Decreasing CRM jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSeq {
    pub weights: Vec<f64>,
    /// Smallest jump the sampler represents (0 when activity was exhausted).
    pub truncation_level: f64,
    pub expected_truncated_mass: f64,
    /// `Σ weights`.
    pub total_mass: f64,
}

impl WeightSeq {
    pub fn new(mut weights: Vec<f64>, truncation_level: f64, expected_truncated_mass: f64) -> Self {
        weights.sort_by(|a, b| b.total_cmp(a));
        let total_mass = weights.iter().sum();
        Self {
            weights,
            truncation_level,
            expected_truncated_mass,
            total_mass,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `w_(k) / W(Θ)`.
    pub fn normalized(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.total_mass).collect()
    }
}

/// Ranked multiplicities `m_(1) >= m_(2) >= ... >= m_(K_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCounts {
    counts: Vec<u64>,
    n: u64,
}

impl PartitionCounts {
    /// Sorts descending; rejects empty input and zero counts.
    pub fn new(mut counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::validation("partition has no clusters"));
        }
        if counts.contains(&0) {
            return Err(Error::validation("cluster counts must be positive"));
        }
        counts.sort_by(|a, b| b.cmp(a));
        let n = counts.iter().sum();
        Ok(Self { counts, n })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of clusters `K_n`.
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Ranked frequencies `m_(k) / n`.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.counts.iter().map(|&m| m as f64 / n).collect()
    }
}

/// Cluster-size spectrum `j -> K_{n,j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySpectrum {
    pub n: u64,
    pub k_n: usize,
    /// `(j, K_{n,j})` for every size present, increasing in `j`.
    pub entries: Vec<(u64, u64)>,
    /// Ranked frequencies `f_(k) = m_(k)/n`.
    pub frequencies: Vec<f64>,
}

impl OccupancySpectrum {
    pub fn count(&self, j: u64) -> u64 {
        self.entries
            .binary_search_by_key(&j, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// `p_{n,j} = K_{n,j} / K_n`.
    pub fn proportion(&self, j: u64) -> f64 {
        self.count(j) as f64 / self.k_n as f64
    }

    pub fn proportions(&self) -> Vec<(u64, f64)> {
        let k = self.k_n as f64;
        self.entries
            .iter()
            .map(|&(j, c)| (j, c as f64 / k))
            .collect()
    }
}

pub fn partition_stats(counts: &PartitionCounts) -> OccupancySpectrum {
    let mut entries: Vec<(u64, u64)> = Vec::new();
    // Counts are sorted descending, so equal sizes are adjacent.
    for &m in counts.counts().iter().rev() {
        match entries.last_mut() {
            Some(e) if e.0 == m => e.1 += 1,
            _ => entries.push((m, 1)),
        }
    }
    OccupancySpectrum {
        n: counts.n(),
        k_n: counts.k(),
        entries,
        frequencies: counts.frequencies(),
    }
}

/// Limiting proportions `p_j = αΓ(j-α)/(j! Γ(1-α))`, `j = 1..=j_max`.
pub fn esf_proportions(alpha: f64, j_max: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let mut out = Vec::with_capacity(j_max);
    let mut p = alpha;
    for j in 1..=j_max {
        out.push(p);
        p *= (j as f64 - alpha) / (j as f64 + 1.0);
    }
    Ok(out)
}

/// Jumps `ρ̄^{-1}(Γ_k)` for given arrival times.
pub fn weights_from_arrivals(model: &ModelSpec, arrivals: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    let mut hint = 1.0;
    let mut out = Vec::with_capacity(arrivals.len());
    for &g in arrivals {
        if !(g > 0.0) {
            return Err(Error::Domain(format!(
                "arrival times must be positive, got {g}"
            )));
        }
        let x = model.inverse_tail_warm(g, hint)?;
        if x > 0.0 {
            hint = x;
        }
        out.push(x);
    }
    Ok(out)
}

/// The `k` largest jumps, fewer if the measure has finite activity.
pub fn top_weights<R: Rng + ?Sized>(model: &ModelSpec, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    model.tail_intensity(1.0)?;
    let mut arrivals = 0.0;
    let mut hint = 1.0;
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        arrivals += <Exp1 as Distribution<f64>>::sample(&Exp1, rng);
        let x = model.inverse_tail_warm(arrivals, hint)?;
        if x == 0.0 {
            break;
        }
        hint = x;
        out.push(x);
    }
    Ok(out)
}

/// Inverse-Lévy sampler with the default jump budget.
pub fn sample_weights_inverse_levy<R: Rng + ?Sized>(
    model: &ModelSpec,
    rng: &mut R,
    rel_mass_tol: f64,
) -> Result<WeightSeq> {
    sample_weights_inverse_levy_with(model, rng, &Truncation::with_tol(rel_mass_tol))
}

pub fn sample_weights_inverse_levy_with<R: Rng + ?Sized>(
    model: &ModelSpec,
    rng: &mut R,
    trunc: &Truncation,
) -> Result<WeightSeq> {
    trunc.validate()?;
    model.tail_intensity(1.0)?;
    let mut weights = Vec::new();
    let mut arrivals = 0.0;
    let mut mass = 0.0;
    let mut hint = 1.0;
    loop {
        arrivals += <Exp1 as Distribution<f64>>::sample(&Exp1, rng);
        let x = model.inverse_tail_warm(arrivals, hint)?;
        if x == 0.0 {
            // Finite activity exhausted (or jumps below the f64 range).
            let rest = model.truncated_mass_raw(hint.min(f64::MIN_POSITIVE))?;
            return Ok(WeightSeq::new(weights, 0.0, rest));
        }
        weights.push(x);
        mass += x;
        hint = x;
        let len = weights.len();
        if len < 64 || len % 64 == 0 {
            let rest = model.truncated_mass_raw(x)?;
            if rest <= trunc.rel_mass_tol * mass {
                return Ok(WeightSeq::new(weights, x, rest));
            }
            if len >= trunc.max_jumps {
                if trunc.fail_on_budget {
                    let required = required_jumps(model, trunc.rel_mass_tol * mass, x)?;
                    return Err(Error::Resource {
                        message: format!(
                            "relative mass tolerance {:e} needs about {required:.3e} jumps; \
                             budget is {}",
                            trunc.rel_mass_tol, trunc.max_jumps
                        ),
                        required,
                    });
                }
                return Ok(WeightSeq::new(weights, x, rest));
            }
        }
    }
}

/// `ρ̄(ε*)` where `ε*` solves `η∫_0^{ε*} wρ = target`.
fn required_jumps(model: &ModelSpec, target: f64, upper: f64) -> Result<f64> {
    let (mut lo, mut hi) = ((1e-300f64).ln(), upper.ln());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if model.truncated_mass_raw(mid.exp())? > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(model.tail_raw(lo.exp()))
}

/// Variates dividing the base GGP jumps in the scaled constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaler {
    /// `Beta(τ, 1)`, drawn as `U^{1/τ}`.
    Beta { tau: f64 },
    /// `Gamma(shape, rate)`.
    Gamma { shape: f64, rate: f64 },
}

/// Base GGP and scaler such that `w_0 / z` has the Lévy measure of `model`.
///
/// GBFRY: base `GGP(σ, ζ = c)` with mass `η c^{τ-σ}/τ`, `z ~ Beta(τ, 1)`.
/// Beta prime: base `GGP(σ, ζ = 1)` with mass `η c^{-τ} Γ(τ)`, `z ~ Gamma(τ, c)`.
pub fn scaled_base(model: &ModelSpec) -> Result<(ModelSpec, Scaler)> {
    model.validate()?;
    let (s, t, c) = (model.sigma, model.tau, model.c);
    match model.family {
        Family::Gbfry => Ok((
            ModelSpec::ggp(s, c, model.eta * ((t - s) * c.ln()).exp() / t),
            Scaler::Beta { tau: t },
        )),
        Family::BetaPrime => Ok((
            ModelSpec::ggp(s, 1.0, model.eta * (ln_gamma(t) - t * c.ln()).exp()),
            Scaler::Gamma { shape: t, rate: c },
        )),
        other => Err(Error::Domain(format!(
            "scaled construction applies to GBFRY and beta prime, not {other}"
        ))),
    }
}

/// Scaled-construction draw with the per-jump latent tilt `y`
/// (`y = cβ` for GBFRY, `y = γ` for beta prime), aligned with the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledDraw {
    pub weights: WeightSeq,
    pub latent: Vec<f64>,
}

pub fn sample_weights_scaled<R: Rng + ?Sized>(
    model: &ModelSpec,
    rng: &mut R,
    rel_mass_tol: f64,
) -> Result<WeightSeq> {
    Ok(sample_weights_scaled_with(model, rng, &Truncation::with_tol(rel_mass_tol))?.weights)
}

/// The truncation rule applies to the base GGP jumps. The reported expected
/// truncated mass is the base one times `E[1/z]`, infinite when `τ <= 1`.
pub fn sample_weights_scaled_with<R: Rng + ?Sized>(
    model: &ModelSpec,
    rng: &mut R,
    trunc: &Truncation,
) -> Result<ScaledDraw> {
    let (base, scaler) = scaled_base(model)?;
    let w0 = sample_weights_inverse_levy_with(&base, rng, trunc)?;
    let (t, c) = (model.tau, model.c);
    let inv_mean = if t > 1.0 {
        match scaler {
            Scaler::Beta { .. } => t / (t - 1.0),
            Scaler::Gamma { .. } => c / (t - 1.0),
        }
    } else {
        f64::INFINITY
    };
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(w0.len());
    match scaler {
        Scaler::Beta { tau } => {
            let inv = 1.0 / tau;
            for &w in &w0.weights {
                let u: f64 = 1.0 - rng.random::<f64>();
                let z = u.powf(inv);
                pairs.push((w / z, c * z));
            }
        }
        Scaler::Gamma { shape, rate } => {
            let g = Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::validation(format!("gamma scaler: {e}")))?;
            for &w in &w0.weights {
                let z: f64 = g.sample(rng);
                pairs.push((w / z, z));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let latent = pairs.iter().map(|p| p.1).collect();
    let weights = pairs.into_iter().map(|p| p.0).collect();
    let trunc_mass = if w0.expected_truncated_mass == 0.0 {
        0.0
    } else {
        w0.expected_truncated_mass * inv_mean
    };
    Ok(ScaledDraw {
        weights: WeightSeq::new(weights, w0.truncation_level, trunc_mass),
        latent,
    })
}

/// Pitman–Yor weights through `η ~ Gamma(θ/α, rate 1/α)`, then `GGP(α, ζ=1, η)`;
/// `α = 0` is the gamma process with `η = θ` and `θ = 0` the stable process.
pub fn sample_weights_py<R: Rng + ?Sized>(
    alpha: f64,
    theta: f64,
    rng: &mut R,
    trunc: &Truncation,
) -> Result<WeightSeq> {
    ModelSpec::pitman_yor(alpha, theta).validate()?;
    if theta < 0.0 {
        return Err(Error::Domain(format!(
            "the CRM representation of PY needs theta >= 0, got {theta}"
        )));
    }
    let model = if alpha == 0.0 {
        ModelSpec::ggp(0.0, 1.0, theta)
    } else if theta == 0.0 {
        ModelSpec::stable(alpha, 1.0)
    } else {
        let g = Gamma::new(theta / alpha, alpha)
            .map_err(|e| Error::validation(format!("PY mixing gamma: {e}")))?;
        ModelSpec::ggp(alpha, 1.0, g.sample(rng))
    };
    sample_weights_inverse_levy_with(&model, rng, trunc)
}

/// Weights for any supported family by inverse-Lévy sampling.
pub fn sample_weights<R: Rng + ?Sized>(
    model: &ModelSpec,
    rng: &mut R,
    trunc: &Truncation,
) -> Result<WeightSeq> {
    match model.family {
        Family::PyBaseline => sample_weights_py(model.sigma, model.theta, rng, trunc),
        _ => sample_weights_inverse_levy_with(model, rng, trunc),
    }
}

/// `n` iid draws from `P = Σ w_k δ_k / W(Θ)`; returns ranked multiplicities.
pub fn sample_partition<R: Rng + ?Sized>(
    weights: &WeightSeq,
    n: u64,
    rng: &mut R,
) -> Result<PartitionCounts> {
    draw_partition(&weights.weights, 0.0, n, rng)
}

/// As `sample_partition`, with the expected truncated mass treated as dust:
/// every draw that lands in it opens a new singleton cluster.
pub fn sample_partition_with_dust<R: Rng + ?Sized>(
    weights: &WeightSeq,
    n: u64,
    rng: &mut R,
) -> Result<PartitionCounts> {
    let dust = weights.expected_truncated_mass;
    if !dust.is_finite() {
        return Err(Error::Domain("dust mass is infinite".into()));
    }
    draw_partition(&weights.weights, dust, n, rng)
}

fn draw_partition<R: Rng + ?Sized>(
    weights: &[f64],
    dust: f64,
    n: u64,
    rng: &mut R,
) -> Result<PartitionCounts> {
    if n == 0 {
        return Err(Error::validation("sample size must be at least 1"));
    }
    if weights.is_empty() && dust <= 0.0 {
        return Err(Error::validation(
            "cannot sample a partition from no weights",
        ));
    }
    let k = weights.len();
    let mut table = weights.to_vec();
    if dust > 0.0 {
        table.push(dust);
    }
    let alias = WeightedAliasIndex::new(table)
        .map_err(|e| Error::validation(format!("alias table: {e}")))?;
    let mut counts = vec![0u64; k];
    let mut singletons = 0u64;
    for _ in 0..n {
        let i = alias.sample(rng);
        if i < k {
            counts[i] += 1;
        } else {
            singletons += 1;
        }
    }
    let mut out: Vec<u64> = counts.into_iter().filter(|&m| m > 0).collect();
    out.extend(std::iter::repeat_n(1, singletons as usize));
    PartitionCounts::new(out)
}

/// One draw of the generalized BFRY variable `X / Y`, `X ~ Gamma(κ, 1)`, `Y ~ Beta(α, 1)`.
pub fn sample_gbfry_variable<R: Rng + ?Sized>(kappa: f64, alpha: f64, rng: &mut R) -> Result<f64> {
    if !(kappa > 0.0 && alpha > 0.0 && kappa.is_finite() && alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "generalized BFRY needs kappa > 0 and alpha > 0, got ({kappa}, {alpha})"
        )));
    }
    let x: f64 = Gamma::new(kappa, 1.0)
        .map_err(|e| Error::validation(format!("gamma: {e}")))?
        .sample(rng);
    let u: f64 = 1.0 - rng.random::<f64>();
    Ok(x / u.powf(1.0 / alpha))
}

/// Density `(α/Γ(κ)) w^{-α-1} γ(κ+α, w)` of the generalized BFRY variable.
pub fn gbfry_variable_density(kappa: f64, alpha: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    alpha / gamma(kappa)
        * (-(alpha + 1.0) * w.ln()).exp()
        * lower_incomplete_gamma(kappa + alpha, w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

/// `E[W^m] = α Γ(m+κ) / ((α-m) Γ(κ))` for `m < α`, infinite otherwise.
pub fn gbfry_variable_moment(kappa: f64, alpha: f64, m: f64) -> Moment {
    if m >= alpha {
        return Moment::Infinite;
    }
    Moment::Finite(alpha / (alpha - m) * (ln_gamma(m + kappa) - ln_gamma(kappa)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Quadrature;
    use crate::rng::stream;
    use crate::stats::{ks_one_sample, ks_two_sample};
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    #[test]
    fn stable_weights_from_fixed_arrivals() {
        let m = ModelSpec::stable(0.5, 1.0);
        let w = weights_from_arrivals(&m, &[1.0, 2.0, 3.0]).unwrap();
        let c = 0.5 * std::f64::consts::PI.sqrt();
        for (k, &wk) in w.iter().enumerate() {
            assert_relative_eq!(wk, (c * (k + 1) as f64).powi(-2), max_relative = 1e-11);
        }
    }

    #[test]
    fn inverse_levy_is_decreasing_and_truncates() {
        let m = ModelSpec::gbfry(0.2, 3.0, 1.0, 50.0);
        let ws = sample_weights_inverse_levy(&m, &mut stream(1, 0), 1e-6).unwrap();
        assert!(ws.weights.windows(2).all(|p| p[0] > p[1]));
        assert!(ws.expected_truncated_mass <= 1e-6 * ws.total_mass);
        assert_relative_eq!(ws.total_mass, ws.weights.iter().sum::<f64>());
        assert_eq!(ws.truncation_level, *ws.weights.last().unwrap());
    }

    #[test]
    fn finite_activity_exhausts() {
        let m = ModelSpec::gbfry(-0.5, 1.0, 1.0, 20.0);
        let total = m.total_activity().unwrap();
        let mut counts = Vec::new();
        for r in 0..200 {
            let ws = sample_weights_inverse_levy(&m, &mut stream(2, r), 1e-9).unwrap();
            counts.push(ws.len() as f64);
        }
        // Number of jumps is Poisson(ρ̄(0+)).
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        assert!(
            (mean - total).abs() < 4.0 * (total / 200.0).sqrt(),
            "{mean} vs {total}"
        );
    }

    #[test]
    fn budget_exhaustion_reports_requirement() {
        let m = ModelSpec::stable(0.9, 1.0);
        let t = Truncation {
            rel_mass_tol: 1e-6,
            max_jumps: 2000,
            fail_on_budget: true,
        };
        match sample_weights_inverse_levy_with(&m, &mut stream(3, 0), &t) {
            Err(Error::Resource { required, .. }) => assert!(required > 2000.0),
            other => panic!("expected resource error, got {other:?}"),
        }
        let ws = sample_weights_inverse_levy_with(&m, &mut stream(3, 0), &Truncation::budget(2000))
            .unwrap();
        assert!(ws.len() >= 2000 && ws.expected_truncated_mass > 0.0);
    }

    #[test]
    fn coupled_rescaling_gives_identical_normalized_weights() {
        let m = ModelSpec::gbfry(0.3, 2.0, 1.0, 30.0);
        let arrivals: Vec<f64> = (1..500).map(|k| k as f64 * 0.7).collect();
        let base = weights_from_arrivals(&m, &arrivals).unwrap();
        let xi = 10.0;
        let scaled = weights_from_arrivals(&m.rescaled(xi).unwrap(), &arrivals).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert_relative_eq!(a / xi, *b, max_relative = 1e-10);
        }
    }

    #[test]
    fn beta_scaler_cdf() {
        let mut rng = stream(4, 0);
        let n = 100_000;
        let below = (0..n)
            .filter(|_| (1.0 - rng.random::<f64>()).powf(1.0 / 3.0) <= 0.5)
            .count() as f64
            / n as f64;
        let sd = (0.125 * 0.875 / n as f64).sqrt();
        assert!((below - 0.125).abs() < 3.0 * sd);
    }

    #[test]
    fn scaled_and_inverse_levy_agree_on_largest_share() {
        for m in [
            ModelSpec::gbfry(0.2, 3.0, 1.0, 100.0),
            ModelSpec::beta_prime(0.2, 2.0, 1.0, 100.0),
        ] {
            let reps = 800;
            let first = |scaled: bool, r: u64| {
                let mut rng = stream(5, r + if scaled { 100_000 } else { 0 });
                let ws = if scaled {
                    sample_weights_scaled(&m, &mut rng, 1e-4).unwrap()
                } else {
                    sample_weights_inverse_levy(&m, &mut rng, 1e-4).unwrap()
                };
                ws.weights[0] / ws.total_mass
            };
            let a: Vec<f64> = (0..reps).map(|r| first(false, r)).collect();
            let b: Vec<f64> = (0..reps).map(|r| first(true, r)).collect();
            let t = ks_two_sample(&a, &b);
            assert!(t.p_value > 1e-3, "{m:?}: {t:?}");
        }
    }

    #[test]
    fn scaled_latent_alignment() {
        let m = ModelSpec::gbfry(0.2, 3.0, 2.0, 20.0);
        let d = sample_weights_scaled_with(&m, &mut stream(6, 0), &Truncation::default()).unwrap();
        assert_eq!(d.latent.len(), d.weights.len());
        assert!(d.latent.iter().all(|&y| y > 0.0 && y <= 2.0));
    }

    #[test]
    fn partition_examples() {
        let one = WeightSeq::new(vec![1.0], 1.0, 0.0);
        let p = sample_partition(&one, 8, &mut stream(7, 0)).unwrap();
        assert_eq!(p.counts(), &[8]);
        let two = WeightSeq::new(vec![0.5, 0.5], 0.5, 0.0);
        let n = 1_000_000;
        let p = sample_partition(&two, n, &mut stream(7, 1)).unwrap();
        let sd = (n as f64 * 0.25).sqrt();
        for &m in p.counts() {
            assert!((m as f64 - 5e5).abs() < 3.0 * sd);
        }
        assert_eq!(p.n(), n);
    }

    #[test]
    fn dust_becomes_singletons() {
        let ws = WeightSeq::new(vec![1.0], 1.0, 1e9);
        let p = sample_partition_with_dust(&ws, 50, &mut stream(8, 0)).unwrap();
        assert!(p.k() >= 49);
        assert_eq!(p.n(), 50);
    }

    #[test]
    fn spectrum_example() {
        let c = PartitionCounts::new(vec![2, 1, 3, 2]).unwrap();
        let s = partition_stats(&c);
        assert_eq!(s.k_n, 4);
        assert_eq!(s.n, 8);
        assert_eq!(s.count(1), 1);
        assert_eq!(s.count(2), 2);
        assert_eq!(s.count(3), 1);
        assert_eq!(s.proportion(2), 0.5);
        assert_eq!(s.frequencies, vec![3.0 / 8.0, 0.25, 0.25, 0.125]);
    }

    #[test]
    fn partition_counts_validation() {
        assert!(PartitionCounts::new(vec![]).is_err());
        assert!(PartitionCounts::new(vec![2, 0]).is_err());
    }

    #[test]
    fn esf_examples() {
        let p = esf_proportions(0.5, 20_000).unwrap();
        assert_relative_eq!(p[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(p[1], 0.125, max_relative = 1e-15);
        let j = 10_000usize;
        let asym = 0.5 / gamma(0.5) / (j as f64).powf(1.5);
        assert!((p[j - 1] / asym - 1.0).abs() < 0.01);
        // Tail beyond j_max from the asymptote α/Γ(1-α) Σ j^{-1-α} ≈ (1/Γ(1-α)) J^{-α}.
        let tail = 1.0 / gamma(0.5) * (p.len() as f64 + 0.5).powf(-0.5);
        assert_relative_eq!(p.iter().sum::<f64>() + tail, 1.0, max_relative = 1e-6);
        assert!(esf_proportions(1.0, 3).is_err());
    }

    #[test]
    fn gbfry_variable_mean() {
        let mut rng = stream(9, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_gbfry_variable(2.0, 3.0, &mut rng).unwrap())
            .collect();
        let m = crate::stats::mean(&xs);
        let se = (crate::stats::variance(&xs) / n as f64).sqrt();
        match gbfry_variable_moment(2.0, 3.0, 1.0) {
            Moment::Finite(v) => assert_relative_eq!(v, 3.0, max_relative = 1e-12),
            Moment::Infinite => panic!("mean is finite"),
        }
        assert!((m - 3.0).abs() < 3.0 * se, "{m} ± {se}");
        assert_eq!(gbfry_variable_moment(2.0, 3.0, 3.0), Moment::Infinite);
        assert_eq!(gbfry_variable_moment(2.0, 3.0, 4.5), Moment::Infinite);
    }

    #[test]
    fn gbfry_variable_density_normalized_and_bfry_case() {
        let q = Quadrature::new(1e-11);
        for &(k, a) in &[(0.5, 0.5), (2.0, 3.0), (1.0, 2.5)] {
            let total = q
                .integrate_power_weighted(k, 1.0, |w: f64| {
                    w.powf(1.0 - k) * gbfry_variable_density(k, a, w)
                })
                .unwrap()
                .value
                + q.integrate_to_infinity(|w| gbfry_variable_density(k, a, w), 1.0)
                    .unwrap()
                    .value;
            assert_relative_eq!(total, 1.0, max_relative = 1e-8);
        }
        // κ = 1 - α: density proportional to w^{-1-α}(1 - e^{-w}).
        let a = 0.5;
        let r1 =
            gbfry_variable_density(1.0 - a, a, 0.7) / (0.7f64.powf(-1.5) * -(-0.7f64).exp_m1());
        let r2 =
            gbfry_variable_density(1.0 - a, a, 3.1) / (3.1f64.powf(-1.5) * -(-3.1f64).exp_m1());
        assert_relative_eq!(r1, r2, max_relative = 1e-12);
    }

    #[test]
    fn bfry_special_case_goodness_of_fit() {
        // Samples with κ = 1 - α against the cdf from quadrature of the density.
        let (k, a) = (0.5, 0.5);
        let q = Quadrature::new(1e-10);
        let cdf = |x: f64| {
            1.0 - q
                .integrate_to_infinity(|w| gbfry_variable_density(k, a, w), x)
                .unwrap()
                .value
        };
        let mut rng = stream(10, 0);
        let xs: Vec<f64> = (0..4000)
            .map(|_| sample_gbfry_variable(k, a, &mut rng).unwrap())
            .collect();
        assert!(ks_one_sample(&xs, cdf).p_value > 1e-3);
    }

    #[test]
    fn stable_ratio_law_small() {
        let m = ModelSpec::stable(0.5, 1.0);
        let mut ratios = Vec::new();
        for r in 0..2000 {
            let w = top_weights(&m, 3, &mut stream(11, r)).unwrap();
            ratios.push(w[2] / w[1]);
        }
        // w_(3)/w_(2) ~ Beta(2σ, 1): cdf x^{2σ}.
        assert!(ks_one_sample(&ratios, |x| x.clamp(0.0, 1.0).powf(1.0)).p_value > 1e-3);
    }

    #[test]
    fn py_weights_cases() {
        let t = Truncation::with_tol(1e-5);
        let dp = sample_weights_py(0.0, 5.0, &mut stream(12, 0), &t).unwrap();
        assert!(dp.len() > 10);
        let st = sample_weights_py(0.3, 0.0, &mut stream(12, 1), &t).unwrap();
        assert!(st.len() > 10);
        let py = sample_weights_py(0.3, 2.0, &mut stream(12, 2), &t).unwrap();
        assert!(py.len() > 10);
        assert!(sample_weights_py(0.3, -0.1, &mut stream(12, 3), &t).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn spectrum_accounts_for_every_draw(counts in proptest::collection::vec(1u64..50, 1..60)) {
            let c = PartitionCounts::new(counts).unwrap();
            let s = partition_stats(&c);
            prop_assert_eq!(s.entries.iter().map(|&(j, k)| j * k).sum::<u64>(), c.n());
            prop_assert!((s.proportions().iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(c.counts().windows(2).all(|p| p[0] >= p[1]));
        }

        #[test]
        fn partitions_sum_to_n(seed in 0u64..1000, n in 1u64..5000) {
            let ws = WeightSeq::new(vec![3.0, 1.0, 0.5, 0.25, 0.01], 0.01, 0.0);
            let p = sample_partition(&ws, n, &mut stream(seed, 0)).unwrap();
            prop_assert_eq!(p.n(), n);
            prop_assert!(p.k() <= 5);
        }
    }
}
