//! Extended spin states over a finite frame of directions.
//!
//! A configuration assigns a sign `s_j = ±1` to every direction `n_j` of the
//! frame. Configurations are stored as bit masks: bit `j` set means
//! `s_j = -1`, so mask `0` is the all-up configuration. The elementary
//! amplitude of a configuration is the pure-imaginary quaternion
//! `Σ_j s_j N_j`, where `N_j` embeds `n_j`.
//!
//! Marginals are always formed by summing quaternion amplitudes over the
//! discarded labels first and applying the Born rule to the sums second.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quaternion::{unit_quat_from_direction, Direction, Quaternion};

/// Largest supported frame (2^20 amplitudes).
pub const MAX_DIRECTIONS: usize = 20;

/// Configurations per work unit in parallel reductions. Partial sums are
/// combined in chunk order, so results do not depend on the worker count.
const CHUNK: usize = 1 << 12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionFrame {
    directions: Vec<Direction>,
    #[serde(skip)]
    quats: Vec<Quaternion>,
}

impl DirectionFrame {
    pub fn new(directions: Vec<Direction>) -> Result<Self> {
        if directions.is_empty() || directions.len() > MAX_DIRECTIONS {
            return Err(Error::FrameSize(directions.len()));
        }
        let quats = directions.iter().copied().map(unit_quat_from_direction).collect();
        Ok(Self { directions, quats })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn direction(&self, j: usize) -> Result<Direction> {
        self.directions.get(j).copied().ok_or(Error::IndexOutOfRange { index: j, len: self.len() })
    }

    pub fn quaternions(&self) -> &[Quaternion] {
        &self.quats
    }

    pub fn num_configs(&self) -> usize {
        1 << self.len()
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: j, len: self.len() })
        }
    }
}

impl<'de> Deserialize<'de> for DirectionFrame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            directions: Vec<Direction>,
        }
        let raw = Raw::deserialize(d)?;
        DirectionFrame::new(raw.directions).map_err(serde::de::Error::custom)
    }
}

/// Sign assignment `(s_1, …, s_N)` with entries in `{+1, -1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("spin sign must be ±1, got {bad}")));
        }
        Ok(Self(signs))
    }

    pub fn from_mask(mask: usize, n: usize) -> Self {
        Self((0..n).map(|j| sign_of(mask, j)).collect())
    }

    pub fn mask(&self) -> usize {
        mask_of(&self.0)
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }
}

#[inline]
pub(crate) fn sign_of(mask: usize, bit: usize) -> i8 {
    if mask >> bit & 1 == 1 {
        -1
    } else {
        1
    }
}

pub(crate) fn mask_of(signs: &[i8]) -> usize {
    signs.iter().enumerate().filter(|(_, &s)| s < 0).fold(0, |m, (j, _)| m | 1 << j)
}

#[inline]
fn amplitude_of_mask(mask: usize, quats: &[Quaternion]) -> Quaternion {
    let mut z = Quaternion::ZERO;
    for (j, &q) in quats.iter().enumerate() {
        if mask >> j & 1 == 1 {
            z = z - q;
        } else {
            z += q;
        }
    }
    z
}

/// `Z(s_1, …, s_N) = Σ_j s_j N_j`.
pub fn elementary_amplitude(config: &SpinConfig, frame: &DirectionFrame) -> Result<Quaternion> {
    if config.len() != frame.len() {
        return Err(Error::LengthMismatch { expected: frame.len(), actual: config.len() });
    }
    Ok(amplitude_of_mask(config.mask(), frame.quaternions()))
}

/// Dense map from all `2^N` configurations to quaternion amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtendedSpinState {
    frame: DirectionFrame,
    amplitudes: Vec<Quaternion>,
}

impl ExtendedSpinState {
    pub fn from_amplitudes(frame: DirectionFrame, amplitudes: Vec<Quaternion>) -> Result<Self> {
        if amplitudes.len() != frame.num_configs() {
            return Err(Error::LengthMismatch { expected: frame.num_configs(), actual: amplitudes.len() });
        }
        Ok(Self { frame, amplitudes })
    }

    pub fn zero(frame: DirectionFrame) -> Self {
        let amplitudes = vec![Quaternion::ZERO; frame.num_configs()];
        Self { frame, amplitudes }
    }

    pub fn frame(&self) -> &DirectionFrame {
        &self.frame
    }

    pub fn amplitudes(&self) -> &[Quaternion] {
        &self.amplitudes
    }

    pub fn amplitude(&self, config: &SpinConfig) -> Result<Quaternion> {
        if config.len() != self.frame.len() {
            return Err(Error::LengthMismatch { expected: self.frame.len(), actual: config.len() });
        }
        Ok(self.amplitudes[config.mask()])
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|q| q.is_zero())
    }

    pub fn count_nonzero(&self) -> usize {
        self.amplitudes.iter().filter(|q| !q.is_zero()).count()
    }

    fn build(frame: DirectionFrame, keep: impl Fn(usize) -> bool + Sync) -> Self {
        let quats = frame.quaternions();
        let amplitudes = (0..frame.num_configs())
            .into_par_iter()
            .map(|m| if keep(m) { amplitude_of_mask(m, quats) } else { Quaternion::ZERO })
            .collect();
        Self { frame, amplitudes }
    }
}

impl<'de> Deserialize<'de> for ExtendedSpinState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            frame: DirectionFrame,
            amplitudes: Vec<Quaternion>,
        }
        let raw = Raw::deserialize(d)?;
        ExtendedSpinState::from_amplitudes(raw.frame, raw.amplitudes).map_err(serde::de::Error::custom)
    }
}

/// Eigenstate of spin along frame direction `axis` with the given sign:
/// every configuration agreeing with `sign` on `axis` carries its
/// elementary amplitude, all others vanish.
pub fn build_eigenstate(frame: DirectionFrame, axis: usize, sign: i8) -> Result<ExtendedSpinState> {
    frame.check_index(axis)?;
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidArgument(format!("sign must be ±1, got {sign}")));
    }
    Ok(ExtendedSpinState::build(frame, move |m| sign_of(m, axis) == sign))
}

/// The unrestricted state: every configuration carries its elementary amplitude.
pub fn build_isotropic(frame: DirectionFrame) -> ExtendedSpinState {
    ExtendedSpinState::build(frame, |_| true)
}

/// Quaternion amplitudes over the sign patterns of a subset of directions.
/// Entry index bit `t` refers to `subset[t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalAmplitudeTable {
    subset: Vec<usize>,
    amplitudes: Vec<Quaternion>,
}

impl MarginalAmplitudeTable {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn amplitudes(&self) -> &[Quaternion] {
        &self.amplitudes
    }

    /// Amplitude for signs listed in subset order.
    pub fn get(&self, signs: &[i8]) -> Result<Quaternion> {
        if signs.len() != self.subset.len() {
            return Err(Error::LengthMismatch { expected: self.subset.len(), actual: signs.len() });
        }
        Ok(self.amplitudes[mask_of(signs)])
    }

    /// Sums amplitudes over every subset index not in `keep`.
    pub fn sum_out(&self, keep: &[usize]) -> Result<MarginalAmplitudeTable> {
        let positions = keep
            .iter()
            .map(|k| {
                self.subset
                    .iter()
                    .position(|s| s == k)
                    .ok_or(Error::InvalidArgument(format!("index {k} not in table subset")))
            })
            .collect::<Result<Vec<_>>>()?;
        check_distinct(keep)?;
        let mut out = vec![Quaternion::ZERO; 1 << keep.len()];
        for (m, &q) in self.amplitudes.iter().enumerate() {
            out[extract_bits(m, &positions)] += q;
        }
        Ok(MarginalAmplitudeTable { subset: keep.to_vec(), amplitudes: out })
    }
}

#[inline]
fn extract_bits(mask: usize, positions: &[usize]) -> usize {
    positions.iter().enumerate().fold(0, |acc, (t, &p)| acc | (mask >> p & 1) << t)
}

fn check_distinct(subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    for (a, &i) in subset.iter().enumerate() {
        if subset[..a].contains(&i) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    Ok(())
}

/// Sums state amplitudes over all configurations that agree on `subset`.
pub fn project_marginal(state: &ExtendedSpinState, subset: &[usize]) -> Result<MarginalAmplitudeTable> {
    check_distinct(subset)?;
    for &i in subset {
        state.frame.check_index(i)?;
    }
    let width = 1usize << subset.len();
    let partials: Vec<Vec<Quaternion>> = state
        .amplitudes
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * CHUNK;
            let mut acc = vec![Quaternion::ZERO; width];
            for (off, &q) in chunk.iter().enumerate() {
                acc[extract_bits(base + off, subset)] += q;
            }
            acc
        })
        .collect();
    let mut amplitudes = vec![Quaternion::ZERO; width];
    for part in partials {
        for (a, p) in amplitudes.iter_mut().zip(part) {
            *a += p;
        }
    }
    Ok(MarginalAmplitudeTable { subset: subset.to_vec(), amplitudes })
}

/// Real values over the sign patterns of a subset of directions, indexed
/// like [`MarginalAmplitudeTable`]. Holds probabilities or residuals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    subset: Vec<usize>,
    values: Vec<f64>,
}

impl OutcomeTable {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, signs: &[i8]) -> Result<f64> {
        if signs.len() != self.subset.len() {
            return Err(Error::LengthMismatch { expected: self.subset.len(), actual: signs.len() });
        }
        Ok(self.values[mask_of(signs)])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `(signs, value)` pairs in index order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<i8>, f64)> + '_ {
        let k = self.subset.len();
        self.values.iter().enumerate().map(move |(m, &v)| ((0..k).map(|t| sign_of(m, t)).collect(), v))
    }
}

/// `P = |Z|² / Σ|Z|²` over the entries of a marginal table.
pub fn born_probabilities(table: &MarginalAmplitudeTable) -> Result<OutcomeTable> {
    let weights: Vec<f64> = table.amplitudes.iter().map(|q| q.norm_sq()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    Ok(OutcomeTable { subset: table.subset.clone(), values: weights.into_iter().map(|w| w / total).collect() })
}

/// Project onto `subset` and apply the Born rule.
pub fn marginal_probabilities(state: &ExtendedSpinState, subset: &[usize]) -> Result<OutcomeTable> {
    born_probabilities(&project_marginal(state, subset)?)
}

/// `max_{s_i} |P(s_i) − Σ_{s_j} P(s_i, s_j)|`.
pub fn marginal_consistency_residual(state: &ExtendedSpinState, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::DuplicateIndex(i));
    }
    let single = marginal_probabilities(state, &[i])?;
    let pair = marginal_probabilities(state, &[i, j])?;
    let mut worst: f64 = 0.0;
    for si in [1i8, -1] {
        let summed = pair.get(&[si, 1])? + pair.get(&[si, -1])?;
        worst = worst.max((single.get(&[si])? - summed).abs());
    }
    Ok(worst)
}

/// Entry `(s_i, s_j)` is `Σ_{s_k} P(s_i, s_j, s_k) − P(s_i, s_j)`.
pub fn interference_residual_3(state: &ExtendedSpinState, i: usize, j: usize, k: usize) -> Result<OutcomeTable> {
    check_distinct(&[i, j, k])?;
    let triple = marginal_probabilities(state, &[i, j, k])?;
    let pair = marginal_probabilities(state, &[i, j])?;
    let values = (0..4).map(|m| triple.values[m] + triple.values[m | 4] - pair.values[m]).collect();
    Ok(OutcomeTable { subset: vec![i, j], values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn frame(dirs: Vec<Direction>) -> DirectionFrame {
        DirectionFrame::new(dirs).unwrap()
    }

    fn spread_frame(n: usize) -> DirectionFrame {
        let mut dirs = vec![Direction::Z];
        for j in 1..n {
            dirs.push(Direction::spherical(0.3 + 0.7 * j as f64, 1.1 * j as f64));
        }
        frame(dirs)
    }

    #[test]
    fn elementary_amplitude_cases() {
        let f1 = frame(vec![Direction::Z]);
        let c = SpinConfig::new(vec![1]).unwrap();
        assert_eq!(elementary_amplitude(&c, &f1).unwrap(), Quaternion::K);

        let f2 = frame(vec![Direction::Z, Direction::X]);
        let c = SpinConfig::new(vec![1, -1]).unwrap();
        assert_eq!(elementary_amplitude(&c, &f2).unwrap(), Quaternion::K - Quaternion::I);

        let f5 = spread_frame(5);
        for m in 0..32 {
            let c = SpinConfig::from_mask(m, 5);
            let a = elementary_amplitude(&c, &f5).unwrap();
            let b = elementary_amplitude(&c.flipped(), &f5).unwrap();
            assert_eq!(a, -b);
            assert_eq!(a.w, 0.0);
        }
        assert!(matches!(
            elementary_amplitude(&SpinConfig::new(vec![1, 1]).unwrap(), &f1),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(SpinConfig::new(vec![1, 0]).is_err());
    }

    #[test]
    fn frame_size_limits() {
        assert!(matches!(DirectionFrame::new(vec![]), Err(Error::FrameSize(0))));
        assert!(DirectionFrame::new(vec![Direction::Z; 21]).is_err());
        assert!(DirectionFrame::new(vec![Direction::Z; 20]).is_ok());
    }

    #[test]
    fn eigenstate_support_and_projection() {
        let s = build_eigenstate(frame(vec![Direction::Z]), 0, 1).unwrap();
        assert_eq!(s.amplitudes(), &[Quaternion::K, Quaternion::ZERO]);

        let s = build_eigenstate(spread_frame(3), 0, 1).unwrap();
        assert_eq!(s.count_nonzero(), 4);

        for n in 1..=8 {
            let s = build_eigenstate(spread_frame(n), 0, 1).unwrap();
            let t = project_marginal(&s, &[0]).unwrap();
            let expect = (1u64 << (n - 1)) as f64;
            let up = t.get(&[1]).unwrap();
            assert!((up - Quaternion::K.scale(expect)).norm_sq().sqrt() < 1e-12);
            assert_eq!(t.get(&[-1]).unwrap(), Quaternion::ZERO);
            let p = born_probabilities(&t).unwrap();
            assert_eq!(p.values(), &[1.0, 0.0]);
        }
        assert!(matches!(build_eigenstate(spread_frame(2), 2, 1), Err(Error::IndexOutOfRange { .. })));
        assert!(build_eigenstate(spread_frame(2), 0, 0).is_err());
    }

    #[test]
    fn isotropic_cases() {
        let s = build_isotropic(frame(vec![Direction::Z]));
        assert_eq!(s.amplitudes(), &[Quaternion::K, -Quaternion::K]);

        let s = build_isotropic(frame(vec![Direction::Z, Direction::X]));
        for q in s.amplitudes() {
            assert_eq!(q.norm_sq(), 2.0);
        }

        let s = build_isotropic(spread_frame(7));
        for j in 0..7 {
            let p = marginal_probabilities(&s, &[j]).unwrap();
            assert!((p.get(&[1]).unwrap() - 0.5).abs() < 1e-12);
            assert!((p.get(&[-1]).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_projection() {
        let s = build_isotropic(spread_frame(4));
        let t = project_marginal(&s, &[0, 1, 2, 3]).unwrap();
        assert_eq!(t.amplitudes(), s.amplitudes());
    }

    #[test]
    fn projection_errors() {
        let s = build_isotropic(spread_frame(3));
        assert!(matches!(project_marginal(&s, &[]), Err(Error::EmptySubset)));
        assert!(matches!(project_marginal(&s, &[1, 1]), Err(Error::DuplicateIndex(1))));
        assert!(matches!(project_marginal(&s, &[3]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn zero_state_is_degenerate() {
        let s = ExtendedSpinState::zero(spread_frame(3));
        assert!(s.is_zero());
        assert_eq!(marginal_probabilities(&s, &[0]), Err(Error::DegenerateDistribution));
        assert!(marginal_consistency_residual(&s, 0, 1).is_err());
        assert!(interference_residual_3(&s, 0, 1, 2).is_err());
    }

    #[test]
    fn zero_entries_take_weight_zero() {
        let s = build_eigenstate(spread_frame(4), 2, -1).unwrap();
        let p = marginal_probabilities(&s, &[2]).unwrap();
        assert_eq!(p.get(&[1]).unwrap(), 0.0);
        assert_eq!(p.get(&[-1]).unwrap(), 1.0);
    }

    #[test]
    fn malus_sweep() {
        for step in 0..=6 {
            let theta = (30.0 * step as f64).to_radians();
            let f = frame(vec![Direction::Z, Direction::in_xz_plane(theta), Direction::Y]);
            let s = build_eigenstate(f, 0, 1).unwrap();
            let p = marginal_probabilities(&s, &[1]).unwrap();
            for s2 in [1i8, -1] {
                let expect = (1.0 + s2 as f64 * theta.cos()) / 2.0;
                assert!((p.get(&[s2]).unwrap() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sign_flip_leaves_probabilities_unchanged() {
        let s = build_eigenstate(spread_frame(5), 1, 1).unwrap();
        let flipped =
            ExtendedSpinState::from_amplitudes(s.frame().clone(), s.amplitudes().iter().map(|&q| -q).collect())
                .unwrap();
        for subset in [vec![0], vec![1, 3], vec![4, 2, 0]] {
            let a = marginal_probabilities(&s, &subset).unwrap();
            let b = marginal_probabilities(&flipped, &subset).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn consistency_residual_cases() {
        let s = build_isotropic(spread_frame(6));
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!(marginal_consistency_residual(&s, i, j).unwrap() < 1e-12);
                }
            }
        }
        let e = build_eigenstate(spread_frame(6), 0, 1).unwrap();
        for j in 1..6 {
            assert!(marginal_consistency_residual(&e, 0, j).unwrap() < 1e-12);
        }
        // second direction present but never populated asymmetrically
        let two = build_isotropic(frame(vec![Direction::Z, Direction::X]));
        assert!(marginal_consistency_residual(&two, 0, 1).unwrap() < 1e-12);
        assert!(matches!(marginal_consistency_residual(&s, 2, 2), Err(Error::DuplicateIndex(2))));
    }

    #[test]
    fn interference_residual_cases() {
        let theta: f64 = 1.0;
        let f = frame(vec![Direction::Z, Direction::in_xz_plane(theta), Direction::Y]);
        let r = interference_residual_3(&build_isotropic(f), 0, 1, 2).unwrap();
        for (signs, v) in r.entries() {
            let expect = -(signs[0] * signs[1]) as f64 * theta.cos() / 12.0;
            assert!((v - expect).abs() < 1e-12, "{signs:?}: {v} vs {expect}");
        }
        assert!(r.total().abs() < 1e-15);

        let f = frame(vec![Direction::Z, Direction::X, Direction::Y]);
        let r = interference_residual_3(&build_isotropic(f), 0, 1, 2).unwrap();
        assert!(r.values().iter().all(|v| v.abs() < 1e-15));

        let f = frame(vec![
            Direction::Z,
            Direction::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2).unwrap(),
            Direction::in_xz_plane(PI / 3.0),
            Direction::Y,
        ]);
        let r = interference_residual_3(&build_isotropic(f), 0, 3, 1).unwrap();
        assert!(r.total().abs() < 1e-14);
        assert!(interference_residual_3(&build_isotropic(spread_frame(3)), 0, 0, 1).is_err());
    }

    #[test]
    fn born_before_sum_differs_from_sum_before_born() {
        // The classical-mixture pipeline (Born per config, then sum) gives
        // uniform pair marginals for |S0>; the amplitude pipeline does not.
        let theta: f64 = 0.4;
        let f = frame(vec![Direction::Z, Direction::in_xz_plane(theta), Direction::Y]);
        let s = build_isotropic(f);
        let weights: Vec<f64> = s.amplitudes().iter().map(|q| q.norm_sq()).collect();
        let total: f64 = weights.iter().sum();
        let mut mixture = [0.0; 4];
        for (m, w) in weights.iter().enumerate() {
            mixture[m & 3] += w / total;
        }
        let quantum = marginal_probabilities(&s, &[0, 1]).unwrap();
        let gap = (mixture[0] - quantum.values()[0]).abs();
        assert!(gap > 1e-3, "pipelines coincide: {gap}");
    }

    #[test]
    fn sum_out_errors() {
        let s = build_isotropic(spread_frame(3));
        let t = project_marginal(&s, &[0, 2]).unwrap();
        assert!(t.sum_out(&[1]).is_err());
        assert!(t.sum_out(&[]).is_err());
        assert!(t.sum_out(&[2, 2]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = build_eigenstate(spread_frame(3), 0, 1).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: ExtendedSpinState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"frame":{"directions":[[0,0,1]]},"amplitudes":[[0,0,0,1]]}"#;
        assert!(serde_json::from_str::<ExtendedSpinState>(bad).is_err());
    }
}
