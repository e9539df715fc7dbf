//! Double slit with a slit label `s ∈ {L, R}`.
//!
//! `Λ_s(q)` sums unit-modulus phases `e^{ik(r₁ + r₂)}` over two-segment paths
//! source → aperture point → screen point, with the aperture points sampled
//! by the midpoint rule. Statistical decoherence applies one random relative
//! phase to the R component per run.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative change between `M` and `2M` aperture points accepted as converged.
pub const APERTURE_TOLERANCE: f64 = 1e-8;
const START_APERTURE_POINTS: usize = 64;
const MAX_APERTURE_POINTS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slit {
    L,
    R,
}

impl Slit {
    pub fn other(self) -> Self {
        match self {
            Slit::L => Slit::R,
            Slit::R => Slit::L,
        }
    }
}

/// Uniform screen sampling `q_min..=q_max` with `points` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Screen {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
}

impl Screen {
    pub fn axis(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points).map(|i| self.q_min + i as f64 * step).collect()
    }

    pub fn step(&self) -> f64 {
        (self.q_max - self.q_min) / (self.points - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitGeometry {
    pub x_left: f64,
    pub x_right: f64,
    pub width_left: f64,
    pub width_right: f64,
    /// Source position along the slit plane.
    #[serde(default)]
    pub source_x: f64,
    /// Source-to-slit-plane distance.
    pub source_distance: f64,
    /// Slit-plane-to-screen distance.
    pub screen_distance: f64,
    pub wavenumber: f64,
    pub screen: Screen,
    /// Midpoint samples per slit; chosen by convergence when absent.
    #[serde(default)]
    pub aperture_points: Option<usize>,
}

impl SlitGeometry {
    /// Slits of equal width centered at `±separation/2`, source on axis.
    pub fn symmetric(
        separation: f64,
        width: f64,
        source_distance: f64,
        screen_distance: f64,
        wavenumber: f64,
        screen: Screen,
    ) -> Result<Self> {
        let g = Self {
            x_left: -separation / 2.0,
            x_right: separation / 2.0,
            width_left: width,
            width_right: width,
            source_x: 0.0,
            source_distance,
            screen_distance,
            wavenumber,
            screen,
            aperture_points: None,
        };
        g.validate()?;
        Ok(g)
    }

    /// λ = 1, separation 10λ, width 2λ, source 100λ before the slits, screen
    /// 1000λ behind them spanning three fringes (±150λ, step λ/4).
    pub fn standard() -> Self {
        Self::symmetric(10.0, 2.0, 100.0, 1000.0, TAU, Screen { q_min: -150.0, q_max: 150.0, points: 1201 })
            .expect("valid standard geometry")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("width_left", self.width_left),
            ("width_right", self.width_right),
            ("source_distance", self.source_distance),
            ("screen_distance", self.screen_distance),
            ("wavenumber", self.wavenumber),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.x_left.is_finite() && self.x_right.is_finite() && self.source_x.is_finite()) {
            return Err(Error::Geometry("slit positions must be finite".into()));
        }
        if self.x_left == self.x_right {
            return Err(Error::Geometry("slit centers coincide".into()));
        }
        if self.screen.points < 2 || !(self.screen.q_max > self.screen.q_min) {
            return Err(Error::Geometry("screen needs at least two points and a positive extent".into()));
        }
        if self.aperture_points == Some(0) {
            return Err(Error::Geometry("aperture_points must be positive".into()));
        }
        Ok(())
    }

    fn slit(&self, s: Slit) -> (f64, f64) {
        match s {
            Slit::L => (self.x_left, self.width_left),
            Slit::R => (self.x_right, self.width_right),
        }
    }

    /// Far-field fringe period `2π d₂ / (k |x_R − x_L|)`.
    pub fn fringe_spacing(&self) -> f64 {
        TAU * self.screen_distance / (self.wavenumber * (self.x_right - self.x_left).abs())
    }

    /// Central third of the screen.
    pub fn central_window(&self) -> (f64, f64) {
        let third = (self.screen.q_max - self.screen.q_min) / 3.0;
        (self.screen.q_min + third, self.screen.q_max - third)
    }
}

/// `Λ_L(q)` and `Λ_R(q)` on the screen grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitAmplitude {
    pub geometry: SlitGeometry,
    pub q: Vec<f64>,
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
    /// Midpoint samples per slit actually used.
    pub aperture_points: usize,
}

impl SlitAmplitude {
    /// Assembles an amplitude pair directly, e.g. for analysis of modified
    /// or conditioned amplitudes.
    pub fn from_parts(geometry: SlitGeometry, left: Vec<Complex64>, right: Vec<Complex64>) -> Result<Self> {
        let q = geometry.screen.axis();
        for v in [&left, &right] {
            if v.len() != q.len() {
                return Err(Error::LengthMismatch { expected: q.len(), actual: v.len() });
            }
        }
        Ok(Self { geometry, q, left, right, aperture_points: 0 })
    }

    pub fn component(&self, s: Slit) -> &[Complex64] {
        match s {
            Slit::L => &self.left,
            Slit::R => &self.right,
        }
    }
}

/// Midpoint-rule path sum over `m` aperture points of one slit.
fn slit_sum(g: &SlitGeometry, s: Slit, q: &[f64], m: usize) -> Vec<Complex64> {
    let (center, width) = g.slit(s);
    let dx = width / m as f64;
    let xs: Vec<f64> = (0..m).map(|t| center - width / 2.0 + (t as f64 + 0.5) * dx).collect();
    let r1: Vec<f64> = xs.iter().map(|x| g.source_distance.hypot(x - g.source_x)).collect();
    q.par_iter()
        .map(|&qv| {
            xs.iter()
                .zip(&r1)
                .map(|(&x, &r1)| {
                    let r2 = g.screen_distance.hypot(qv - x);
                    Complex64::from_polar(dx, g.wavenumber * (r1 + r2))
                })
                .sum()
        })
        .collect()
}

fn relative_change(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Path amplitude of one slit at a fixed aperture resolution.
pub fn slit_amplitude(geom: &SlitGeometry, s: Slit, aperture_points: usize) -> Result<Vec<Complex64>> {
    geom.validate()?;
    if aperture_points == 0 {
        return Err(Error::Geometry("aperture_points must be positive".into()));
    }
    Ok(slit_sum(geom, s, &geom.screen.axis(), aperture_points))
}

/// Computes `Λ_L` and `Λ_R`. With `aperture_points` unset, doubles the
/// resolution from 64 until both components change by less than
/// [`APERTURE_TOLERANCE`] relative, and keeps the finer result.
pub fn path_amplitude(geom: &SlitGeometry) -> Result<SlitAmplitude> {
    geom.validate()?;
    let q = geom.screen.axis();
    if let Some(m) = geom.aperture_points {
        let left = slit_sum(geom, Slit::L, &q, m);
        let right = slit_sum(geom, Slit::R, &q, m);
        return Ok(SlitAmplitude { geometry: *geom, q, left, right, aperture_points: m });
    }
    let mut m = START_APERTURE_POINTS;
    let mut left = slit_sum(geom, Slit::L, &q, m);
    let mut right = slit_sum(geom, Slit::R, &q, m);
    loop {
        let m2 = 2 * m;
        let left2 = slit_sum(geom, Slit::L, &q, m2);
        let right2 = slit_sum(geom, Slit::R, &q, m2);
        let change = relative_change(&left, &left2).max(relative_change(&right, &right2));
        left = left2;
        right = right2;
        m = m2;
        if change < APERTURE_TOLERANCE {
            break;
        }
        if m >= MAX_APERTURE_POINTS {
            return Err(Error::Geometry(format!("aperture sum not converged at {m} points (change {change:e})")));
        }
    }
    Ok(SlitAmplitude { geometry: *geom, q, left, right, aperture_points: m })
}

fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = v.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateDistribution);
    }
    for x in &mut v {
        *x /= total;
    }
    Ok(v)
}

/// `|Λ_L + e^{iφ} Λ_R|²`, normalized to unit sum over the grid.
pub fn phased_intensity(amp: &SlitAmplitude, phi: f64) -> Result<Vec<f64>> {
    let rot = Complex64::from_polar(1.0, phi);
    normalize(amp.left.iter().zip(&amp.right).map(|(l, r)| (l + rot * r).norm_sqr()).collect())
}

/// `|Λ_L + Λ_R|²`, normalized to unit sum over the grid.
pub fn coherent_intensity(amp: &SlitAmplitude) -> Result<Vec<f64>> {
    phased_intensity(amp, 0.0)
}

/// `(|Λ_L|² + |Λ_R|²)`, normalized: the phase average of [`phased_intensity`].
pub fn incoherent_intensity(amp: &SlitAmplitude) -> Result<Vec<f64>> {
    normalize(amp.left.iter().zip(&amp.right).map(|(l, r)| l.norm_sqr() + r.norm_sqr()).collect())
}

fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `P(s) = ‖Λ_s‖² / (‖Λ_L‖² + ‖Λ_R‖²)`.
pub fn slit_probabilities(amp: &SlitAmplitude) -> Result<(f64, f64)> {
    let (l, r) = (norm_sq(&amp.left), norm_sq(&amp.right));
    let total = l + r;
    if !(total > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    Ok((l / total, r / total))
}

/// Result of conditioning on the particle not being found at a blocked slit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativeDetection {
    /// `|Λ_other(q)|² / ‖Λ_other‖²`.
    pub intensity: Vec<f64>,
    /// `P(other slit)`.
    pub survival: f64,
    /// Amplitudes with the blocked component removed.
    pub conditioned: SlitAmplitude,
}

/// Projects out the `blocked` slit component.
pub fn negative_detection_condition(amp: &SlitAmplitude, blocked: Slit) -> Result<NegativeDetection> {
    let open = blocked.other();
    let remaining = amp.component(open);
    let open_norm = norm_sq(remaining);
    if !(open_norm > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    let (pl, pr) = slit_probabilities(amp)?;
    let survival = if open == Slit::L { pl } else { pr };
    let intensity = remaining.iter().map(|z| z.norm_sqr() / open_norm).collect();
    let mut conditioned = amp.clone();
    let zeros = vec![Complex64::new(0.0, 0.0); amp.q.len()];
    match blocked {
        Slit::L => conditioned.left = zeros,
        Slit::R => conditioned.right = zeros,
    }
    Ok(NegativeDetection { intensity, survival, conditioned })
}

/// Distribution of the relative phase applied to `Λ_R` in each run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseDistribution {
    /// `φ ≡ 0`.
    None,
    /// `φ ≡ phi`.
    Fixed { phi: f64 },
    /// `φ ~ U(0, 2π)`.
    Uniform,
    /// `φ ~ VonMises(mu, kappa)`.
    VonMises { mu: f64, kappa: f64 },
}

impl PhaseDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PhaseDistribution::Fixed { phi } if !phi.is_finite() => {
                Err(Error::InvalidArgument("fixed phase must be finite".into()))
            }
            PhaseDistribution::VonMises { mu, kappa } if !(mu.is_finite() && kappa >= 0.0 && kappa.is_finite()) => {
                Err(Error::InvalidArgument(format!("von Mises needs finite mu and kappa >= 0, got {kappa}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PhaseDistribution::None => 0.0,
            PhaseDistribution::Fixed { phi } => phi,
            PhaseDistribution::Uniform => rng.random_range(0.0..TAU),
            PhaseDistribution::VonMises { mu, kappa } => sample_von_mises(rng, mu, kappa),
        }
    }
}

impl PhaseDistribution {
    /// `(E[cos φ], E[sin φ])`.
    pub fn mean_phasor(&self) -> (f64, f64) {
        match *self {
            PhaseDistribution::None => (1.0, 0.0),
            PhaseDistribution::Fixed { phi } => (phi.cos(), phi.sin()),
            PhaseDistribution::Uniform => (0.0, 0.0),
            PhaseDistribution::VonMises { mu, kappa } => {
                let a = von_mises_resultant(kappa);
                (a * mu.cos(), a * mu.sin())
            }
        }
    }
}

/// `I₁(κ)/I₀(κ)`: periodic trapezoid quadrature, asymptotic series for large κ.
fn von_mises_resultant(kappa: f64) -> f64 {
    if kappa > 1e4 {
        let k = kappa;
        return 1.0 - 1.0 / (2.0 * k) - 1.0 / (8.0 * k * k) - 1.0 / (8.0 * k * k * k);
    }
    const NODES: usize = 8192;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..NODES {
        let t = TAU * i as f64 / NODES as f64;
        let w = (kappa * (t.cos() - 1.0)).exp();
        num += w * t.cos();
        den += w;
    }
    num / den
}

/// Expected detection density under a phase distribution, normalized to unit sum.
pub fn phase_averaged_intensity(amp: &SlitAmplitude, phase: &PhaseDistribution) -> Result<Vec<f64>> {
    phase.validate()?;
    let (c, s) = phase.mean_phasor();
    normalize(
        amp.left
            .iter()
            .zip(&amp.right)
            .map(|(l, r)| {
                let x = l * r.conj();
                (l.norm_sqr() + r.norm_sqr() + 2.0 * (c * x.re + s * x.im)).max(0.0)
            })
            .collect(),
    )
}

/// Best–Fisher rejection sampler; wrapped normal above `kappa = 1e5`.
pub fn sample_von_mises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return rng.random_range(-PI..PI) + mu;
    }
    if kappa > 1e5 {
        let z: f64 = rng.sample(StandardNormal);
        return mu + z / kappa.sqrt();
    }
    let s = 0.5 / kappa;
    let r = s + (1.0 + s * s).sqrt();
    let w = loop {
        let u: f64 = rng.random();
        let z = (PI * u).cos();
        let w = (1.0 + r * z) / (r + z);
        let y = kappa * (r - w);
        let v: f64 = rng.random();
        if y * (2.0 - y) - v >= 0.0 || (y / v).ln() + 1.0 - y >= 0.0 {
            break w;
        }
    };
    let theta = w.clamp(-1.0, 1.0).acos();
    if rng.random::<f64>() < 0.5 {
        mu - theta
    } else {
        mu + theta
    }
}

/// Phase distribution plus the seed from which per-run generators derive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceModel {
    pub phase: PhaseDistribution,
    pub seed: u64,
}

/// Cumulative sums of the three terms of
/// `I_φ(q) = |Λ_L|² + |Λ_R|² + cos φ · 2 Re(Λ_L Λ̄_R) + sin φ · 2 Im(Λ_L Λ̄_R)`,
/// so any `I_φ` can be sampled by bisection without rebuilding it.
#[derive(Clone, Debug)]
pub struct PhasedSampler {
    base: Vec<f64>,
    cos_part: Vec<f64>,
    sin_part: Vec<f64>,
}

impl PhasedSampler {
    pub fn new(amp: &SlitAmplitude) -> Result<Self> {
        let n = amp.q.len();
        let mut base = Vec::with_capacity(n);
        let mut cos_part = Vec::with_capacity(n);
        let mut sin_part = Vec::with_capacity(n);
        let (mut a, mut c, mut s) = (0.0, 0.0, 0.0);
        for (l, r) in amp.left.iter().zip(&amp.right) {
            let cross = l * r.conj();
            a += l.norm_sqr() + r.norm_sqr();
            c += 2.0 * cross.re;
            s += 2.0 * cross.im;
            base.push(a);
            cos_part.push(c);
            sin_part.push(s);
        }
        if !(a > 0.0) {
            return Err(Error::DegenerateDistribution);
        }
        Ok(Self { base, cos_part, sin_part })
    }

    /// Grid index drawn from `I_φ` by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, phi: f64, rng: &mut R) -> usize {
        let (sin, cos) = phi.sin_cos();
        let cdf = |i: usize| self.base[i] + cos * self.cos_part[i] + sin * self.sin_part[i];
        let n = self.base.len();
        let target = rng.random::<f64>() * cdf(n - 1);
        // first index whose cumulative weight exceeds the target
        let (mut lo, mut hi) = (0usize, n - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if cdf(mid) > target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }
}

/// Generator for run `run` of an ensemble seeded with `seed`: the run index
/// is XORed into a scrambled base seed. Without the scramble, seeds that
/// differ only in low bits would share the same set of per-run seeds.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed) ^ run)
}

/// SplitMix64 finalizer.
fn mix_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One run: draw `φ`, then one screen index from `I_φ`.
pub fn decohered_run<R: Rng + ?Sized>(amp: &SlitAmplitude, model: &DecoherenceModel, rng: &mut R) -> Result<usize> {
    model.phase.validate()?;
    let sampler = PhasedSampler::new(amp)?;
    let phi = model.phase.sample(rng);
    Ok(sampler.sample(phi, rng))
}

/// Screen indices of runs `0..runs`, each drawn with [`run_rng`]. The
/// sequence does not depend on the number of worker threads.
pub fn decohered_samples(amp: &SlitAmplitude, model: &DecoherenceModel, runs: usize) -> Result<Vec<usize>> {
    model.phase.validate()?;
    let sampler = PhasedSampler::new(amp)?;
    Ok((0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(model.seed, run);
            let phi = model.phase.sample(&mut rng);
            sampler.sample(phi, &mut rng)
        })
        .collect())
}

/// Centered moving average with `half` samples on each side, truncated at the edges.
pub fn moving_average(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// `(I_max − I_min) / (I_max + I_min)` over grid points with `lo ≤ q ≤ hi`.
pub fn visibility(curve: &[f64], q: &[f64], window: (f64, f64)) -> f64 {
    let (mut max, mut min) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&v, &x) in curve.iter().zip(q) {
        if x >= window.0 && x <= window.1 {
            max = max.max(v);
            min = min.min(v);
        }
    }
    if max + min > 0.0 {
        (max - min) / (max + min)
    } else {
        0.0
    }
}

/// Moving-average half width spanning a quarter fringe.
pub fn quarter_fringe_half_width(geom: &SlitGeometry) -> usize {
    let window = geom.fringe_spacing() / 4.0;
    ((window / geom.screen.step()).round() as usize / 2).max(1)
}

/// Visibility of a curve after quarter-fringe smoothing, over the central third.
pub fn smoothed_visibility(curve: &[f64], geom: &SlitGeometry) -> f64 {
    let smooth = moving_average(curve, quarter_fringe_half_width(geom));
    visibility(&smooth, &geom.screen.axis(), geom.central_window())
}

/// Visibility of the raw curve over the central third.
pub fn central_visibility(curve: &[f64], geom: &SlitGeometry) -> f64 {
    visibility(curve, &geom.screen.axis(), geom.central_window())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHistogram {
    pub runs: usize,
    pub seed: u64,
    /// Counts per screen grid point.
    pub counts: Vec<u64>,
    /// Quarter-fringe-smoothed visibility over the central third.
    pub visibility: f64,
}

impl EnsembleHistogram {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.runs as f64).collect()
    }
}

/// Histogram of `runs` decohered samples.
pub fn ensemble_histogram(amp: &SlitAmplitude, model: &DecoherenceModel, runs: usize) -> Result<EnsembleHistogram> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let samples = decohered_samples(amp, model, runs)?;
    let mut counts = vec![0u64; amp.q.len()];
    for i in samples {
        counts[i] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / runs as f64).collect();
    let visibility = smoothed_visibility(&freq, &amp.geometry);
    Ok(EnsembleHistogram { runs, seed: model.seed, counts, visibility })
}
