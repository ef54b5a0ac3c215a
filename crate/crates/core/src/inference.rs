//! Augmented MCMC for `φ = (η, σ, τ)` given ranked counts.
//!
//! Given `U = u`, the GBFRY and beta prime partitions factorize over clusters
//! once every cluster carries a latent tilt `y_j` of the GGP mixing
//! representation. The chain works in transformed coordinates
//! `ũ = ln u`, `η̃ = ln η`, `σ̃ = logit σ`, `δ̃ = ln(τ - σ)` and
//! `ỹ_j = logit y_j` (GBFRY, `y_j ∈ (0,1)`) or `ỹ_j = ln y_j` (beta prime).
//! Scalars are updated by random-walk Metropolis, `ỹ` by HMC; `c = 1`.
//!
//! The transformed-space target is
//!
//! ```text
//! n ũ - ψ(u) + K η̃ - K lnΓ(1-σ) + Σ_j lnΓ(m_j-σ) - ln Γ(n)
//!   + Σ_j [δ ln y_j + ln(1-y_j) - (m_j-σ) ln(y_j+u)]     (GBFRY)
//!   + Σ_j [δ ln y_j - y_j - (m_j-σ) ln(y_j+u)]          (beta prime)
//!   + N(η̃) + N(σ̃) + N(δ̃)
//! ```
//!
//! where `n ũ` is `u^{n-1}` times the Jacobian of `u = e^ũ`, the `y`
//! Jacobians are folded into the bracketed terms, and the normal log
//! densities are the priors expressed in the transformed coordinates.
//! The normalized GGP baseline (`ζ = 1`) uses the same expression with
//! every `y_j` fixed to 1 and no `y` terms; the Pitman–Yor baseline uses the
//! two-parameter EPPF with `θ` and `α` stored in the `η` and `σ` slots.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Family, ModelSpec};
use crate::quadrature::Quadrature;
use crate::rng::stream;
use crate::sampling::{
    sample_partition_with_dust, sample_weights_inverse_levy_with, PartitionCounts, Truncation,
};
use crate::special::{ln_gamma, sigmoid, softplus};

pub const DEFAULT_STEP: f64 = 0.05;
pub const DEFAULT_LEAPFROG_STEPS: usize = 30;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Normal density on a transformed coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub loc: f64,
    pub scale: f64,
}

impl Default for NormalPrior {
    fn default() -> Self {
        Self {
            loc: 0.0,
            scale: 1.0,
        }
    }
}

impl NormalPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.scale;
        -0.5 * z * z - self.scale.ln() - LN_SQRT_2PI
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.loc + self.scale * z
    }
}

/// Priors on `ln η`, `logit σ`, `ln δ`; for the Pitman–Yor baseline the
/// first two act on `ln θ` and `logit α`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PriorSpec {
    pub log_eta: NormalPrior,
    pub logit_sigma: NormalPrior,
    pub log_delta: NormalPrior,
}

/// Random-walk scales in transformed coordinates and HMC settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub u: f64,
    pub eta: f64,
    pub sigma: f64,
    pub delta: f64,
    pub hmc_step: f64,
    pub leapfrog_steps: usize,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self {
            u: DEFAULT_STEP,
            eta: DEFAULT_STEP,
            sigma: DEFAULT_STEP,
            delta: DEFAULT_STEP,
            hmc_step: DEFAULT_STEP,
            leapfrog_steps: DEFAULT_LEAPFROG_STEPS,
        }
    }
}

/// Sampler state in transformed coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub log_u: f64,
    pub y_tilde: Vec<f64>,
    pub log_eta: f64,
    pub logit_sigma: f64,
    pub log_delta: f64,
}

impl ChainState {
    pub fn u(&self) -> f64 {
        self.log_u.exp()
    }

    pub fn eta(&self) -> f64 {
        self.log_eta.exp()
    }

    pub fn sigma(&self) -> f64 {
        sigmoid(self.logit_sigma)
    }

    pub fn delta(&self) -> f64 {
        self.log_delta.exp()
    }

    pub fn tau(&self) -> f64 {
        self.sigma() + self.delta()
    }
}

/// Scalar blocks updated by random-walk Metropolis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    U,
    Eta,
    Sigma,
    Delta,
}

/// Per-block acceptance rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub u: f64,
    pub eta: f64,
    pub sigma: f64,
    pub delta: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    accepted: [u64; 5],
    proposed: [u64; 5],
}

impl Tally {
    fn record(&mut self, slot: usize, accepted: bool) {
        self.proposed[slot] += 1;
        if accepted {
            self.accepted[slot] += 1;
        }
    }

    fn rates(&self) -> AcceptanceRates {
        let r = |i: usize| {
            if self.proposed[i] == 0 {
                0.0
            } else {
                self.accepted[i] as f64 / self.proposed[i] as f64
            }
        };
        AcceptanceRates {
            u: r(0),
            eta: r(1),
            sigma: r(2),
            delta: r(3),
            y: r(4),
        }
    }
}

fn block_slot(b: Block) -> usize {
    match b {
        Block::U => 0,
        Block::Eta => 1,
        Block::Sigma => 2,
        Block::Delta => 3,
    }
}

/// One retained posterior draw in natural coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iter: usize,
    pub eta: f64,
    pub sigma: f64,
    pub tau: f64,
    pub u: f64,
    pub log_joint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub family: Family,
    pub draws: Vec<Draw>,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub acceptance: AcceptanceRates,
}

impl PosteriorSamples {
    pub fn column(&self, f: impl Fn(&Draw) -> f64) -> Vec<f64> {
        self.draws.iter().map(f).collect()
    }

    /// Model at a retained draw (`c = 1`, `ζ = 1` for the GGP baseline).
    pub fn model_at(&self, i: usize) -> ModelSpec {
        model_from(self.family, &self.draws[i])
    }
}

fn model_from(family: Family, d: &Draw) -> ModelSpec {
    match family {
        Family::Gbfry => ModelSpec::gbfry(d.sigma, d.tau, 1.0, d.eta),
        Family::BetaPrime => ModelSpec::beta_prime(d.sigma, d.tau, 1.0, d.eta),
        Family::Ggp => ModelSpec::ggp(d.sigma, 1.0, d.eta),
        _ => ModelSpec::pitman_yor(d.sigma, d.eta),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub prior: PriorSpec,
    pub steps: StepSizes,
}

impl ChainConfig {
    pub fn new(iters: usize, burnin: usize, thin: usize, seed: u64) -> Self {
        Self {
            iters,
            burnin,
            thin,
            seed,
            prior: PriorSpec::default(),
            steps: StepSizes::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::validation(format!(
                "iters ({}) must exceed burnin ({})",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::validation("thin must be at least 1"));
        }
        Ok(())
    }
}

/// Sums of the target that change only with `y`, `u` or `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Terms {
    psi: f64,
    /// `Σ ln y_j`.
    sum_ln_y: f64,
    /// `Σ ln(1 - y_j)` (GBFRY) or `-Σ y_j` (beta prime).
    sum_extra: f64,
    /// `Σ m_j ln(y_j + u)`.
    sum_m_ln: f64,
    /// `Σ ln(y_j + u)`.
    sum_ln: f64,
    /// `Σ_j lnΓ(m_j - σ)`.
    sum_lgamma: f64,
}

/// Posterior target for one dataset and family.
#[derive(Debug, Clone)]
pub struct Target {
    family: Family,
    m: Vec<f64>,
    /// Distinct sizes with multiplicities `(m, K_m)`.
    groups: Vec<(f64, f64)>,
    n: f64,
    k: f64,
    ln_gamma_n: f64,
    prior: PriorSpec,
    quad: Quadrature,
}

impl Target {
    pub fn new(counts: &PartitionCounts, family: Family, prior: PriorSpec) -> Result<Self> {
        match family {
            Family::Gbfry | Family::BetaPrime | Family::Ggp | Family::PyBaseline => {}
            other => {
                return Err(Error::validation(format!(
                    "inference supports gbfry, bp, ggp and py, not {other}"
                )))
            }
        }
        let spectrum = crate::sampling::partition_stats(counts);
        Ok(Self {
            family,
            m: counts.counts().iter().map(|&m| m as f64).collect(),
            groups: spectrum
                .entries
                .iter()
                .map(|&(j, c)| (j as f64, c as f64))
                .collect(),
            n: counts.n() as f64,
            k: counts.k() as f64,
            ln_gamma_n: ln_gamma(counts.n() as f64),
            prior,
            quad: Quadrature::new(1e-10),
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    fn has_latent_y(&self) -> bool {
        matches!(self.family, Family::Gbfry | Family::BetaPrime)
    }

    fn uses_u(&self) -> bool {
        self.family != Family::PyBaseline
    }

    /// Blocks in sweep order.
    pub fn blocks(&self) -> &'static [Block] {
        match self.family {
            Family::Gbfry | Family::BetaPrime => {
                &[Block::U, Block::Eta, Block::Sigma, Block::Delta]
            }
            Family::Ggp => &[Block::U, Block::Eta, Block::Sigma],
            _ => &[Block::Eta, Block::Sigma],
        }
    }

    /// CRM with Lévy measure `η ρ(·; σ, τ)` at `c = 1`.
    pub fn model(&self, s: &ChainState) -> ModelSpec {
        let (eta, sigma) = (s.eta(), s.sigma());
        match self.family {
            Family::Gbfry => ModelSpec::gbfry(sigma, sigma + s.delta(), 1.0, eta),
            Family::BetaPrime => ModelSpec::beta_prime(sigma, sigma + s.delta(), 1.0, eta),
            Family::Ggp => ModelSpec::ggp(sigma, 1.0, eta),
            _ => ModelSpec::pitman_yor(sigma, eta),
        }
    }

    /// Deterministic starting point. `u` starts at the mode of its
    /// conditional given the other coordinates.
    pub fn initial_state(&self) -> Result<ChainState> {
        let mut s = ChainState {
            log_u: 0.0,
            y_tilde: vec![0.0; if self.has_latent_y() { self.m.len() } else { 0 }],
            log_eta: self.k.ln(),
            logit_sigma: 0.0,
            log_delta: 0.0,
        };
        if self.family == Family::PyBaseline {
            s.log_eta = 0.0;
            return Ok(s);
        }
        let (lo, hi) = golden_max(
            |v| {
                let mut t = s.clone();
                t.log_u = v;
                self.log_joint(&t).unwrap_or(f64::NEG_INFINITY)
            },
            -30.0,
            40.0,
            1e-6,
        );
        s.log_u = 0.5 * (lo + hi);
        Ok(s)
    }

    fn psi(&self, s: &ChainState) -> Result<f64> {
        self.model(s).psi_with(s.u(), &self.quad)
    }

    fn sum_lgamma(&self, sigma: f64) -> f64 {
        self.groups
            .iter()
            .map(|&(m, c)| c * ln_gamma(m - sigma))
            .sum()
    }

    /// `(Σ ln y, extra, Σ m ln(y+u), Σ ln(y+u))`.
    fn y_sums(&self, s: &ChainState) -> (f64, f64, f64, f64) {
        let u = s.u();
        match self.family {
            Family::Gbfry => {
                let mut acc = (0.0, 0.0, 0.0, 0.0);
                for (yt, m) in s.y_tilde.iter().zip(&self.m) {
                    let y = sigmoid(*yt);
                    let l = (y + u).ln();
                    acc.0 -= softplus(-yt);
                    acc.1 -= softplus(*yt);
                    acc.2 += m * l;
                    acc.3 += l;
                }
                acc
            }
            Family::BetaPrime => {
                let mut acc = (0.0, 0.0, 0.0, 0.0);
                for (yt, m) in s.y_tilde.iter().zip(&self.m) {
                    let y = yt.exp();
                    let l = (y + u).ln();
                    acc.0 += yt;
                    acc.1 -= y;
                    acc.2 += m * l;
                    acc.3 += l;
                }
                acc
            }
            _ => {
                let l = u.ln_1p();
                (0.0, 0.0, self.n * l, self.k * l)
            }
        }
    }

    fn terms(&self, s: &ChainState) -> Result<Terms> {
        if !self.uses_u() {
            return Ok(Terms {
                psi: 0.0,
                sum_ln_y: 0.0,
                sum_extra: 0.0,
                sum_m_ln: 0.0,
                sum_ln: 0.0,
                sum_lgamma: 0.0,
            });
        }
        let (sum_ln_y, sum_extra, sum_m_ln, sum_ln) = self.y_sums(s);
        Ok(Terms {
            psi: self.psi(s)?,
            sum_ln_y,
            sum_extra,
            sum_m_ln,
            sum_ln,
            sum_lgamma: self.sum_lgamma(s.sigma()),
        })
    }

    fn total(&self, s: &ChainState, t: &Terms) -> f64 {
        let prior =
            self.prior.log_eta.ln_pdf(s.log_eta) + self.prior.logit_sigma.ln_pdf(s.logit_sigma);
        if self.family == Family::PyBaseline {
            return self.py_eppf(s.sigma(), s.eta()) + prior;
        }
        let sigma = s.sigma();
        let mut v = self.n * s.log_u - t.psi + self.k * s.log_eta - self.k * ln_gamma(1.0 - sigma)
            + t.sum_lgamma
            - self.ln_gamma_n
            - t.sum_m_ln
            + sigma * t.sum_ln
            + prior;
        if self.has_latent_y() {
            v += s.delta() * t.sum_ln_y + t.sum_extra + self.prior.log_delta.ln_pdf(s.log_delta);
        }
        v
    }

    /// Log of the augmented target in transformed coordinates.
    pub fn log_joint(&self, s: &ChainState) -> Result<f64> {
        self.check_state(s)?;
        let t = self.terms(s)?;
        let v = self.total(s, &t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::numeric(
                "log_joint",
                format!("non-finite value at {s:?}"),
            ))
        }
    }

    fn check_state(&self, s: &ChainState) -> Result<()> {
        let want = if self.has_latent_y() { self.m.len() } else { 0 };
        if s.y_tilde.len() != want {
            return Err(Error::validation(format!(
                "state has {} latent tilts, data has {want} clusters",
                s.y_tilde.len()
            )));
        }
        Ok(())
    }

    /// Gradient of `log_joint` with respect to `ỹ`.
    pub fn grad_y(&self, s: &ChainState) -> Vec<f64> {
        let mut g = vec![0.0; s.y_tilde.len()];
        self.grad_into(s, &s.y_tilde, &mut g);
        g
    }

    fn grad_into(&self, s: &ChainState, yt: &[f64], out: &mut [f64]) {
        let (u, sigma, delta) = (s.u(), s.sigma(), s.delta());
        match self.family {
            Family::Gbfry => {
                for ((g, &x), &m) in out.iter_mut().zip(yt).zip(&self.m) {
                    let (y, one_minus) = logistic_pair(x);
                    *g = delta * one_minus - y - (m - sigma) * y * one_minus / (y + u);
                }
            }
            Family::BetaPrime => {
                for ((g, &x), &m) in out.iter_mut().zip(yt).zip(&self.m) {
                    let y = x.exp();
                    *g = delta - y - (m - sigma) * y / (y + u);
                }
            }
            _ => {}
        }
    }

    /// Negative log target restricted to the terms that depend on `ỹ`.
    fn potential(&self, s: &ChainState, yt: &[f64]) -> f64 {
        let (u, sigma, delta) = (s.u(), s.sigma(), s.delta());
        let mut v = 0.0;
        match self.family {
            Family::Gbfry => {
                for (&x, &m) in yt.iter().zip(&self.m) {
                    // δ ln y + ln(1-y) = -(δ+1) softplus(-x) - x.
                    let y = sigmoid(x);
                    v += -(delta + 1.0) * softplus(-x) - x - (m - sigma) * (y + u).ln();
                }
            }
            Family::BetaPrime => {
                for (&x, &m) in yt.iter().zip(&self.m) {
                    let y = x.exp();
                    v += delta * x - y - (m - sigma) * (y + u).ln();
                }
            }
            _ => {}
        }
        -v
    }

    /// Two-parameter EPPF of the ranked counts.
    fn py_eppf(&self, alpha: f64, theta: f64) -> f64 {
        py_eppf(&self.groups, self.n, self.k, alpha, theta)
    }

    fn propose(&self, s: &ChainState, block: Block, step: f64) -> ChainState {
        let mut p = s.clone();
        match block {
            Block::U => p.log_u += step,
            Block::Eta => p.log_eta += step,
            Block::Sigma => p.logit_sigma += step,
            Block::Delta => p.log_delta += step,
        }
        p
    }

    /// Terms at a proposal differing from `s` in one block.
    fn terms_after(
        &self,
        s: &ChainState,
        t: &Terms,
        block: Block,
        p: &ChainState,
    ) -> Result<Terms> {
        if !self.uses_u() {
            return Ok(*t);
        }
        let mut out = *t;
        match block {
            Block::Eta => out.psi = t.psi * (p.log_eta - s.log_eta).exp(),
            Block::U => {
                let (_, _, a, b) = self.y_sums(p);
                out.sum_m_ln = a;
                out.sum_ln = b;
                out.psi = self.psi(p)?;
            }
            Block::Sigma => {
                out.sum_lgamma = self.sum_lgamma(p.sigma());
                out.psi = self.psi(p)?;
            }
            Block::Delta => out.psi = self.psi(p)?,
        }
        Ok(out)
    }

    /// `log_joint(proposal) - log_joint(state)` for a move of `step` in
    /// one block, from the cached terms.
    pub fn mh_log_ratio(&self, s: &ChainState, block: Block, step: f64) -> Result<f64> {
        let t = self.terms(s)?;
        let p = self.propose(s, block, step);
        let tp = self.terms_after(s, &t, block, &p)?;
        Ok(self.total(&p, &tp) - self.total(s, &t))
    }
}

/// `(1/(1+e^{-x}), 1/(1+e^{x}))` with one exponential.
fn logistic_pair(x: f64) -> (f64, f64) {
    if x >= 0.0 {
        let e = (-x).exp();
        let y = 1.0 / (1.0 + e);
        (y, e * y)
    } else {
        let e = x.exp();
        let z = 1.0 / (1.0 + e);
        (e * z, z)
    }
}

/// `ln` EPPF of the two-parameter Poisson–Dirichlet partition with sizes
/// `(m, K_m)` grouped, `n` items and `k` blocks.
fn py_eppf(groups: &[(f64, f64)], n: f64, k: f64, alpha: f64, theta: f64) -> f64 {
    let head = if alpha == 0.0 {
        (k - 1.0) * theta.ln()
    } else if theta / alpha > 1e7 {
        (1..k as usize)
            .map(|i| (theta + i as f64 * alpha).ln())
            .sum()
    } else {
        let x = theta / alpha;
        (k - 1.0) * alpha.ln() + ln_gamma(x + k) - ln_gamma(x + 1.0)
    };
    let rising = ln_gamma(theta + n) - ln_gamma(theta + 1.0);
    let blocks: f64 = groups
        .iter()
        .map(|&(m, c)| c * (ln_gamma(m - alpha) - ln_gamma(1.0 - alpha)))
        .sum();
    head - rising + blocks
}

/// Free-function form of [`Target::log_joint`].
pub fn log_joint(
    counts: &PartitionCounts,
    state: &ChainState,
    family: Family,
    prior: &PriorSpec,
) -> Result<f64> {
    Target::new(counts, family, *prior)?.log_joint(state)
}

/// Free-function form of [`Target::grad_y`].
pub fn grad_y(counts: &PartitionCounts, state: &ChainState, family: Family) -> Result<Vec<f64>> {
    let t = Target::new(counts, family, PriorSpec::default())?;
    t.check_state(state)?;
    Ok(t.grad_y(state))
}

/// Metropolis acceptance for a log ratio; non-finite ratios reject.
pub fn metropolis_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    if log_ratio >= 0.0 {
        return log_ratio.is_finite();
    }
    let v: f64 = rng.random();
    v.ln() < log_ratio
}

/// One random-walk Metropolis step for a scalar target.
pub fn rw_metropolis<R: Rng + ?Sized, F: Fn(f64) -> f64>(
    x: f64,
    log_p: F,
    scale: f64,
    rng: &mut R,
) -> (f64, bool) {
    let z: f64 = StandardNormal.sample(rng);
    let prop = x + scale * z;
    if metropolis_accept(log_p(prop) - log_p(x), rng) {
        (prop, true)
    } else {
        (x, false)
    }
}

/// `steps` leapfrog steps with unit mass; `grad` is the gradient of the
/// log target.
pub fn leapfrog<G: FnMut(&[f64], &mut [f64])>(
    x: &mut [f64],
    p: &mut [f64],
    eps: f64,
    steps: usize,
    mut grad: G,
) {
    let mut g = vec![0.0; x.len()];
    grad(x, &mut g);
    for _ in 0..steps {
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * eps * gi;
        }
        for (xi, pi) in x.iter_mut().zip(p.iter()) {
            *xi += eps * pi;
        }
        grad(x, &mut g);
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * eps * gi;
        }
    }
}

/// Chain state plus cached target terms.
#[derive(Debug, Clone)]
pub struct Sweeper<'a> {
    target: &'a Target,
    pub state: ChainState,
    terms: Terms,
    steps: StepSizes,
}

impl<'a> Sweeper<'a> {
    pub fn new(target: &'a Target, state: ChainState, steps: StepSizes) -> Result<Self> {
        target.check_state(&state)?;
        let terms = target.terms(&state)?;
        Ok(Self {
            target,
            state,
            terms,
            steps,
        })
    }

    pub fn log_joint(&self) -> f64 {
        self.target.total(&self.state, &self.terms)
    }

    fn step_for(&self, block: Block) -> f64 {
        match block {
            Block::U => self.steps.u,
            Block::Eta => self.steps.eta,
            Block::Sigma => self.steps.sigma,
            Block::Delta => self.steps.delta,
        }
    }

    /// Random-walk Metropolis on one scalar block.
    pub fn mh_update<R: Rng + ?Sized>(&mut self, block: Block, rng: &mut R) -> bool {
        let z: f64 = StandardNormal.sample(rng);
        let step = self.step_for(block) * z;
        let p = self.target.propose(&self.state, block, step);
        let tp = match self.target.terms_after(&self.state, &self.terms, block, &p) {
            Ok(t) => t,
            Err(e) => {
                log::debug!("rejecting {block:?} proposal: {e}");
                return false;
            }
        };
        let ratio = self.target.total(&p, &tp) - self.target.total(&self.state, &self.terms);
        if metropolis_accept(ratio, rng) {
            self.state = p;
            self.terms = tp;
            true
        } else {
            false
        }
    }

    /// One HMC proposal on the `ỹ` block.
    pub fn hmc_update_y<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        if self.state.y_tilde.is_empty() {
            return true;
        }
        let k = self.state.y_tilde.len();
        let mut p: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let kinetic0 = 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        let u0 = self.target.potential(&self.state, &self.state.y_tilde);
        let mut x = self.state.y_tilde.clone();
        let (target, state) = (self.target, &self.state);
        leapfrog(
            &mut x,
            &mut p,
            self.steps.hmc_step,
            self.steps.leapfrog_steps,
            |y, g| target.grad_into(state, y, g),
        );
        let kinetic1 = 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        let u1 = self.target.potential(&self.state, &x);
        let ratio = (u0 + kinetic0) - (u1 + kinetic1);
        if !x.iter().all(|v| v.is_finite()) || !metropolis_accept(ratio, rng) {
            return false;
        }
        self.state.y_tilde = x;
        let (a, b, c, d) = self.target.y_sums(&self.state);
        self.terms.sum_ln_y = a;
        self.terms.sum_extra = b;
        self.terms.sum_m_ln = c;
        self.terms.sum_ln = d;
        true
    }

    /// One sweep `[u, η, σ, δ, y]`; returns per-slot acceptance flags.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [Option<bool>; 5] {
        let mut out = [None; 5];
        for &b in self.target.blocks() {
            out[block_slot(b)] = Some(self.mh_update(b, rng));
        }
        if self.target.has_latent_y() {
            out[4] = Some(self.hmc_update_y(rng));
        }
        out
    }

    pub fn draw(&self, iter: usize) -> Draw {
        let s = &self.state;
        let (tau, u) = match self.target.family {
            Family::Gbfry | Family::BetaPrime => (s.tau(), s.u()),
            Family::Ggp => (f64::NAN, s.u()),
            _ => (f64::NAN, f64::NAN),
        };
        Draw {
            iter,
            eta: s.eta(),
            sigma: s.sigma(),
            tau,
            u,
            log_joint: self.log_joint(),
        }
    }
}

/// Single chain. Retains iterations `burnin, burnin + thin, ...`.
pub fn run_chain(
    counts: &PartitionCounts,
    family: Family,
    config: &ChainConfig,
    init: Option<ChainState>,
) -> Result<PosteriorSamples> {
    run_chain_on_stream(counts, family, config, init, 0)
}

fn run_chain_on_stream(
    counts: &PartitionCounts,
    family: Family,
    config: &ChainConfig,
    init: Option<ChainState>,
    stream_id: u64,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let target = Target::new(counts, family, config.prior)?;
    let state = match init {
        Some(s) => s,
        None => target.initial_state()?,
    };
    let mut sw = Sweeper::new(&target, state, config.steps)?;
    let mut rng = stream(config.seed, stream_id);
    let mut tally = Tally::default();
    let mut draws = Vec::with_capacity((config.iters - config.burnin) / config.thin + 1);
    for it in 0..config.iters {
        for (slot, flag) in sw.sweep(&mut rng).iter().enumerate() {
            if let Some(a) = flag {
                tally.record(slot, *a);
            }
        }
        if it >= config.burnin && (it - config.burnin).is_multiple_of(config.thin) {
            draws.push(sw.draw(it));
        }
    }
    Ok(PosteriorSamples {
        family,
        draws,
        burnin: config.burnin,
        thin: config.thin,
        seed: config.seed,
        acceptance: tally.rates(),
    })
}

/// Independent chains on disjoint streams of `config.seed`, run in parallel.
pub fn run_chains(
    counts: &PartitionCounts,
    family: Family,
    config: &ChainConfig,
    chains: usize,
) -> Result<Vec<PosteriorSamples>> {
    (0..chains as u64)
        .into_par_iter()
        .map(|c| run_chain_on_stream(counts, family, config, None, c))
        .collect()
}

/// Exact log partition probability under the Pitman–Yor (`model.sigma = α`,
/// `model.theta = θ`) or normalized GGP (`ζ` from the model) baselines.
/// The GGP value integrates the `u`-augmented density over `ln u`.
pub fn baseline_loglik(counts: &PartitionCounts, model: &ModelSpec) -> Result<f64> {
    let spectrum = crate::sampling::partition_stats(counts);
    let groups: Vec<(f64, f64)> = spectrum
        .entries
        .iter()
        .map(|&(j, c)| (j as f64, c as f64))
        .collect();
    let (n, k) = (counts.n() as f64, counts.k() as f64);
    match model.family {
        Family::PyBaseline => {
            model.validate()?;
            Ok(py_eppf(&groups, n, k, model.sigma, model.theta))
        }
        Family::Ggp => {
            model.validate()?;
            let (s, z, eta) = (model.sigma, model.zeta, model.eta);
            let fixed = -ln_gamma(n)
                + k * eta.ln()
                + groups
                    .iter()
                    .map(|&(m, c)| c * (ln_gamma(m - s) - ln_gamma(1.0 - s)))
                    .sum::<f64>();
            let f = |v: f64| -> f64 {
                let u = v.exp();
                let psi = match model.psi(u) {
                    Ok(p) => p,
                    Err(_) => return f64::NEG_INFINITY,
                };
                n * v - psi + (k * s - n) * (z + u).ln() + fixed
            };
            log_integrate_exp(f, -60.0, 60.0)
        }
        other => Err(Error::validation(format!(
            "baseline likelihood is defined for ggp and py, not {other}"
        ))),
    }
}

/// Golden-section search for the maximum of a unimodal function.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a, b)
}

/// `ln ∫ e^{f(v)} dv` for a unimodal `f` whose mass lies in `[lo, hi]`.
fn log_integrate_exp<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let (a, b) = golden_max(&f, lo, hi, 1e-8);
    let mode = 0.5 * (a + b);
    let fmax = f(mode);
    if !fmax.is_finite() {
        return Err(Error::numeric("log_integrate_exp", "no finite mode"));
    }
    let edge = |dir: f64| {
        let mut w = 0.5;
        while f(mode + dir * w) > fmax - 60.0 && w < 1e3 {
            w *= 2.0;
        }
        mode + dir * w
    };
    let (l, r) = (edge(-1.0), edge(1.0));
    let q = Quadrature::new(1e-12);
    let v = q.integrate(|x| (f(x) - fmax).exp(), l, mode)?.value
        + q.integrate(|x| (f(x) - fmax).exp(), mode, r)?.value;
    Ok(fmax + v.ln())
}

/// Draw from a 1-D density given by its log on an adaptive grid: a coarse
/// scan over `[lo, hi]` locates the bulk (within 40 nats of the maximum),
/// which is then refined to `fine` cells with density linear in each cell.
pub fn sample_log_density_grid<F: Fn(f64) -> f64, R: Rng + ?Sized>(
    log_p: F,
    lo: f64,
    hi: f64,
    coarse: usize,
    fine: usize,
    rng: &mut R,
) -> Result<f64> {
    let h = (hi - lo) / coarse as f64;
    let vals: Vec<f64> = (0..=coarse).map(|i| log_p(lo + i as f64 * h)).collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::numeric(
            "grid sampler",
            "log density is nowhere finite",
        ));
    }
    let first = vals.iter().position(|&v| v > max - 40.0).unwrap_or(0);
    let last = vals.iter().rposition(|&v| v > max - 40.0).unwrap_or(coarse);
    let a = lo + (first.saturating_sub(1)) as f64 * h;
    let b = lo + ((last + 1).min(coarse)) as f64 * h;
    let hf = (b - a) / fine as f64;
    let lv: Vec<f64> = (0..=fine).map(|i| log_p(a + i as f64 * hf)).collect();
    let fmax = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p: Vec<f64> = lv
        .iter()
        .map(|&v| if v.is_finite() { (v - fmax).exp() } else { 0.0 })
        .collect();
    let mass: Vec<f64> = p.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let total: f64 = mass.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut cell = mass.len() - 1;
    for (i, &m) in mass.iter().enumerate() {
        if target < m {
            cell = i;
            break;
        }
        target -= m;
    }
    // Inverse cdf of the linear density p0 + (p1 - p0) t on [0, 1].
    let (p0, p1) = (p[cell], p[cell + 1]);
    let r: f64 = rng.random();
    let t = if (p1 - p0).abs() < 1e-12 * (p0 + p1) {
        r
    } else {
        let area = 0.5 * (p0 + p1);
        (-p0 + (p0 * p0 + 2.0 * (p1 - p0) * r * area).sqrt()) / (p1 - p0)
    };
    Ok(a + (cell as f64 + t.clamp(0.0, 1.0)) * hf)
}

/// Draw `(u, y)` from their joint conditional given `φ` and the data:
/// `u` from its marginal (the `y` integrated out through κ), then each
/// `y_j` from its conditional given `u`.
pub fn sample_latents<R: Rng + ?Sized>(
    target: &Target,
    state: &mut ChainState,
    rng: &mut R,
) -> Result<()> {
    if !target.has_latent_y() && target.family != Family::Ggp {
        return Ok(());
    }
    let model = target.model(state);
    let groups = target.groups.clone();
    let n = target.n;
    let q = target.quad;
    let log_pu = |v: f64| -> f64 {
        let u = v.exp();
        let psi = match model.psi_with(u, &q) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let mut acc = n * v - psi;
        for &(m, c) in &groups {
            match model.ln_kappa_with(m as u64, u, &q) {
                Ok(lk) => acc += c * lk,
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        acc
    };
    state.log_u = sample_log_density_grid(log_pu, -30.0, 50.0, 100, 256, rng)?;
    if !target.has_latent_y() {
        return Ok(());
    }
    let (u, sigma, delta) = (state.u(), state.sigma(), state.delta());
    let gbfry = target.family == Family::Gbfry;
    for (j, &m) in target.m.iter().enumerate() {
        let f = |x: f64| -> f64 {
            if gbfry {
                -delta * softplus(-x) - softplus(x) - (m - sigma) * (sigmoid(x) + u).ln()
            } else {
                delta * x - x.exp() - (m - sigma) * (x.exp() + u).ln()
            }
        };
        let (lo, hi) = if gbfry {
            (-1000.0, 60.0)
        } else {
            (-1000.0, 8.0)
        };
        state.y_tilde[j] = sample_log_density_grid(f, lo, hi, 2000, 512, rng)?;
    }
    Ok(())
}

/// One Geweke cycle: `φ` from the prior, a partition of size `n` from the
/// model (jump budget `max_jumps`, remainder as dust), exact latents, then
/// `sweeps` transitions. Returns the final `(ln η, logit σ, ln δ)`.
pub fn geweke_cycle(
    family: Family,
    prior: &PriorSpec,
    n: u64,
    sweeps: usize,
    max_jumps: usize,
    seed: u64,
    cycle: u64,
) -> Result<[f64; 3]> {
    let mut rng = stream(seed, cycle);
    let phi = ChainState {
        log_u: 0.0,
        y_tilde: Vec::new(),
        log_eta: prior.log_eta.sample(&mut rng),
        logit_sigma: prior.logit_sigma.sample(&mut rng),
        log_delta: prior.log_delta.sample(&mut rng),
    };
    let probe = Target::new(&PartitionCounts::new(vec![1])?, family, *prior)?;
    let model = probe.model(&phi);
    let ws = sample_weights_inverse_levy_with(&model, &mut rng, &Truncation::budget(max_jumps))?;
    let counts = sample_partition_with_dust(&ws, n, &mut rng)?;
    let target = Target::new(&counts, family, *prior)?;
    let mut state = phi;
    state.y_tilde = vec![0.0; if target.has_latent_y() { counts.k() } else { 0 }];
    sample_latents(&target, &mut state, &mut rng)?;
    let mut sw = Sweeper::new(&target, state, StepSizes::default())?;
    for _ in 0..sweeps {
        sw.sweep(&mut rng);
    }
    let s = &sw.state;
    Ok([s.log_eta, s.logit_sigma, s.log_delta])
}

/// z-scores of the first two moments of `xs` against a normal prior.
pub fn moment_z_scores(xs: &[f64], prior: &NormalPrior) -> (f64, f64) {
    let n = xs.len() as f64;
    let z: Vec<f64> = xs.iter().map(|x| (x - prior.loc) / prior.scale).collect();
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    let m1 = crate::stats::mean(&z);
    let m2 = crate::stats::mean(&z2);
    let se1 = (crate::stats::variance(&z) / n).sqrt();
    let se2 = (crate::stats::variance(&z2) / n).sqrt();
    (m1 / se1, (m2 - 1.0) / se2)
}
