//! Singlet pairs over a shared direction frame, and the phase evolution of
//! a bilinear meter coupling.
//!
//! Two representations of the singlet are provided. [`SingletEntangled`]
//! couples each α configuration to the opposite β configuration with the
//! α elementary amplitude. [`SingletFactorized`] keeps one isotropic state per
//! particle plus the hidden-value constraint `s^α_j + s^β_j = 0`; a β outcome
//! is read as the negated hidden α value. Both must yield identical outcome
//! statistics.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quaternion::Quaternion;
use crate::spin_lattice::{
    build_isotropic, marginal_probabilities, sign_of, DirectionFrame, ExtendedSpinState, SpinConfig,
};

fn check_sign(s: i8) -> Result<()> {
    if s == 1 || s == -1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("outcome must be ±1, got {s}")))
    }
}

/// Outcome statistics shared by both singlet representations.
pub trait SingletModel {
    fn frame(&self) -> &DirectionFrame;

    /// Probability that α measured along `n_i` yields `s_alpha` and β
    /// measured along `n_j` yields `s_beta`.
    fn joint_outcome_probability(&self, i: usize, j: usize, s_alpha: i8, s_beta: i8) -> Result<f64>;

    /// `E(i, j) = Σ s_α s_β P(s_α, s_β)`.
    fn correlation(&self, i: usize, j: usize) -> Result<f64> {
        let mut e = 0.0;
        for sa in [1i8, -1] {
            for sb in [1i8, -1] {
                e += (sa * sb) as f64 * self.joint_outcome_probability(i, j, sa, sb)?;
            }
        }
        Ok(e)
    }

    /// `S = E(a,b) − E(a,b') + E(a',b) + E(a',b')`.
    fn chsh_value(&self, a: usize, a_prime: usize, b: usize, b_prime: usize) -> Result<f64> {
        Ok(self.correlation(a, b)? - self.correlation(a, b_prime)?
            + self.correlation(a_prime, b)?
            + self.correlation(a_prime, b_prime)?)
    }

    /// `E(i, j)` over all ordered frame pairs.
    fn correlation_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.frame().len();
        (0..n).map(|i| (0..n).map(|j| self.correlation(i, j)).collect()).collect()
    }
}

/// Anti-diagonal entangled vector. Only the `2^N` amplitudes with
/// `config_β = −config_α` are stored; all other pairs vanish.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingletEntangled {
    state: ExtendedSpinState,
}

pub fn build_singlet_entangled(frame: DirectionFrame) -> SingletEntangled {
    SingletEntangled { state: build_isotropic(frame) }
}

impl SingletEntangled {
    /// Amplitude of the pair `(config_α, config_β)`.
    pub fn amplitude(&self, alpha: &SpinConfig, beta: &SpinConfig) -> Result<Quaternion> {
        let n = self.state.frame().len();
        if beta.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: beta.len() });
        }
        let a = self.state.amplitude(alpha)?;
        let full = (1usize << n) - 1;
        Ok(if beta.mask() == alpha.mask() ^ full { a } else { Quaternion::ZERO })
    }

    pub fn support_size(&self) -> usize {
        self.state.count_nonzero()
    }

    /// Amplitudes indexed by the α configuration mask.
    pub fn anti_diagonal(&self) -> &[Quaternion] {
        self.state.amplitudes()
    }
}

impl SingletModel for SingletEntangled {
    fn frame(&self) -> &DirectionFrame {
        self.state.frame()
    }

    fn joint_outcome_probability(&self, i: usize, j: usize, s_alpha: i8, s_beta: i8) -> Result<f64> {
        check_sign(s_alpha)?;
        check_sign(s_beta)?;
        let n = self.frame().len();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, len: n });
            }
        }
        let full = (1usize << n) - 1;
        // Marginal amplitudes over (s^α_i, s^β_j), summed along the anti-diagonal.
        let mut buckets = [Quaternion::ZERO; 4];
        for (m, &q) in self.anti_diagonal().iter().enumerate() {
            let beta = m ^ full;
            let key = (m >> i & 1) | (beta >> j & 1) << 1;
            buckets[key] += q;
        }
        let total: f64 = buckets.iter().map(|q| q.norm_sq()).sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateDistribution);
        }
        let key = usize::from(s_alpha < 0) | usize::from(s_beta < 0) << 1;
        Ok(buckets[key].norm_sq() / total)
    }
}

/// Product of two isotropic states bound by the hidden-value constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingletFactorized {
    alpha: ExtendedSpinState,
    beta: ExtendedSpinState,
}

pub fn build_singlet_factorized(frame: DirectionFrame) -> SingletFactorized {
    let alpha = build_isotropic(frame);
    let beta = alpha.clone();
    SingletFactorized { alpha, beta }
}

impl SingletFactorized {
    pub fn alpha(&self) -> &ExtendedSpinState {
        &self.alpha
    }

    pub fn beta(&self) -> &ExtendedSpinState {
        &self.beta
    }
}

impl SingletModel for SingletFactorized {
    fn frame(&self) -> &DirectionFrame {
        self.alpha.frame()
    }

    fn joint_outcome_probability(&self, i: usize, j: usize, s_alpha: i8, s_beta: i8) -> Result<f64> {
        check_sign(s_alpha)?;
        check_sign(s_beta)?;
        // β's outcome along n_j is the negated hidden α value along n_j.
        let inferred = -s_beta;
        if i == j {
            let p = marginal_probabilities(&self.alpha, &[i])?;
            return Ok(if inferred == s_alpha { p.get(&[s_alpha])? } else { 0.0 });
        }
        marginal_probabilities(&self.alpha, &[i, j])?.get(&[s_alpha, inferred])
    }
}

/// How [`models_agree`] chooses the queries it compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trials {
    /// Every `(i, j, s, s')`.
    Exhaustive,
    Random {
        count: usize,
        seed: u64,
    },
}

/// Largest absolute difference between the two singlet models' joint
/// outcome probabilities.
pub fn models_agree(frame: &DirectionFrame, trials: Trials) -> Result<f64> {
    let ent = build_singlet_entangled(frame.clone());
    let fac = build_singlet_factorized(frame.clone());
    let n = frame.len();
    let deviation = |i: usize, j: usize, sa: i8, sb: i8| -> Result<f64> {
        Ok((ent.joint_outcome_probability(i, j, sa, sb)? - fac.joint_outcome_probability(i, j, sa, sb)?).abs())
    };
    let mut worst: f64 = 0.0;
    match trials {
        Trials::Exhaustive => {
            for i in 0..n {
                for j in 0..n {
                    for q in 0..4 {
                        worst = worst.max(deviation(i, j, sign_of(q, 0), sign_of(q, 1))?);
                    }
                }
            }
        }
        Trials::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                let q = rng.random_range(0..4);
                worst = worst.max(deviation(i, j, sign_of(q, 0), sign_of(q, 1))?);
            }
        }
    }
    Ok(worst)
}

/// Meter coupling `H = κ A D` acting on `|a⟩ ⊗ Σ_j z_j |d_j⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearInteraction {
    pub a: f64,
    pub coefficients: Vec<Complex64>,
    pub d: Vec<f64>,
    pub kappa: f64,
    pub hbar: f64,
}

impl BilinearInteraction {
    pub fn new(a: f64, coefficients: Vec<Complex64>, d: Vec<f64>, kappa: f64, hbar: f64) -> Result<Self> {
        let params = Self { a, coefficients, d, kappa, hbar };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.d.len() {
            return Err(Error::LengthMismatch { expected: self.d.len(), actual: self.coefficients.len() });
        }
        if !(self.hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {}", self.hbar)));
        }
        let norm: f64 = self.coefficients.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(())
    }
}

/// `z_j(t) = z_j · exp(−i κ a d_j t / ħ)`.
pub fn evolve_bilinear_interaction(params: &BilinearInteraction, t: f64) -> Result<Vec<Complex64>> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    Ok(params
        .coefficients
        .iter()
        .zip(&params.d)
        .map(|(&z, &d)| z * Complex64::from_polar(1.0, -params.kappa * params.a * d * t / params.hbar))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quaternion::Direction;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    fn coplanar(angles_deg: &[f64]) -> DirectionFrame {
        DirectionFrame::new(angles_deg.iter().map(|a| Direction::in_xz_plane(a.to_radians())).collect()).unwrap()
    }

    #[test]
    fn entangled_construction() {
        let e = build_singlet_entangled(coplanar(&[0.0]));
        let up = SpinConfig::new(vec![1]).unwrap();
        let down = SpinConfig::new(vec![-1]).unwrap();
        assert_eq!(e.amplitude(&up, &down).unwrap(), Quaternion::K);
        assert_eq!(e.amplitude(&down, &up).unwrap(), -Quaternion::K);
        assert_eq!(e.amplitude(&up, &up).unwrap(), Quaternion::ZERO);

        let n = 5;
        let e = build_singlet_entangled(coplanar(&[0.0, 20.0, 50.0, 90.0, 170.0]));
        assert_eq!(e.support_size(), 1 << n);
        for a in 0..1 << n {
            for b in 0..1 << n {
                let q = e.amplitude(&SpinConfig::from_mask(a, n), &SpinConfig::from_mask(b, n)).unwrap();
                if b != a ^ ((1 << n) - 1) {
                    assert_eq!(q, Quaternion::ZERO);
                }
            }
        }
    }

    #[test]
    fn perfect_anticorrelation_on_equal_directions() {
        let f = coplanar(&[0.0, 33.0, 71.0]);
        let ent = build_singlet_entangled(f.clone());
        let fac = build_singlet_factorized(f);
        for i in 0..3 {
            for m in [&ent as &dyn SingletModel, &fac] {
                assert!((m.joint_outcome_probability(i, i, 1, -1).unwrap() - 0.5).abs() < 1e-12);
                assert!((m.joint_outcome_probability(i, i, -1, 1).unwrap() - 0.5).abs() < 1e-12);
                assert!(m.joint_outcome_probability(i, i, 1, 1).unwrap().abs() < 1e-12);
                assert!((m.correlation(i, i).unwrap() + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn joint_probabilities_at_fixed_angles() {
        let f = coplanar(&[0.0, 90.0, 60.0, 120.0]);
        let ent = build_singlet_entangled(f.clone());
        let fac = build_singlet_factorized(f);
        for m in [&ent as &dyn SingletModel, &fac] {
            for q in 0..4 {
                let p = m.joint_outcome_probability(0, 1, sign_of(q, 0), sign_of(q, 1)).unwrap();
                assert!((p - 0.25).abs() < 1e-12);
            }
            assert!((m.joint_outcome_probability(0, 2, 1, 1).unwrap() - 0.125).abs() < 1e-12);
            assert!(m.correlation(0, 1).unwrap().abs() < 1e-12);
            assert!((m.correlation(0, 3).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn chsh_cases() {
        let f = coplanar(&[0.0, 90.0, 45.0, 135.0]);
        for m in [&build_singlet_entangled(f.clone()) as &dyn SingletModel, &build_singlet_factorized(f)] {
            let s = m.chsh_value(0, 1, 2, 3).unwrap();
            assert!((s.abs() - 2.0 * SQRT_2).abs() < 1e-9, "{s}");
            assert!((m.chsh_value(0, 0, 0, 0).unwrap().abs() - 2.0).abs() < 1e-12);
        }
        let f = DirectionFrame::new(vec![
            Direction::X,
            Direction::Y,
            Direction::Z,
            Direction::new(0.0, 0.0, -1.0).unwrap(),
        ])
        .unwrap();
        let m = build_singlet_factorized(f);
        assert!(m.chsh_value(0, 1, 2, 3).unwrap().abs() < 1e-12);
    }

    #[test]
    fn models_agree_exhaustively() {
        assert!(models_agree(&coplanar(&[0.0, 40.0]), Trials::Exhaustive).unwrap() < 1e-12);
        let f =
            DirectionFrame::new((0..6).map(|j| Direction::spherical(0.4 * j as f64 + 0.1, 1.3 * j as f64)).collect())
                .unwrap();
        assert!(models_agree(&f, Trials::Exhaustive).unwrap() < 1e-12);
        assert!(models_agree(&f, Trials::Random { count: 200, seed: 3 }).unwrap() < 1e-12);
    }

    #[test]
    fn rejects_bad_queries() {
        let m = build_singlet_entangled(coplanar(&[0.0, 10.0]));
        assert!(m.joint_outcome_probability(0, 2, 1, 1).is_err());
        assert!(m.joint_outcome_probability(0, 1, 0, 1).is_err());
        let f = build_singlet_factorized(coplanar(&[0.0, 10.0]));
        assert!(f.joint_outcome_probability(5, 1, 1, 1).is_err());
    }

    #[test]
    fn factorized_factors_are_isotropic() {
        let f = coplanar(&[0.0, 10.0, 20.0]);
        let m = build_singlet_factorized(f.clone());
        assert_eq!(m.alpha(), &build_isotropic(f.clone()));
        assert_eq!(m.beta(), &build_isotropic(f));
    }

    #[test]
    fn evolution_cases() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let params = BilinearInteraction::new(
            1.0,
            vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)],
            vec![PI, FRAC_PI_2],
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(evolve_bilinear_interaction(&params, 0.0).unwrap(), params.coefficients);
        let z = evolve_bilinear_interaction(&params, 1.0).unwrap();
        assert!((z[0] - Complex64::new(-h, 0.0)).norm() < 1e-15);
        // second coefficient: i·h·e^{−iπ/2} = h
        assert!((z[1] - Complex64::new(h, 0.0)).norm() < 1e-15);
        for t in [0.3, 1.7, 42.0] {
            let z = evolve_bilinear_interaction(&params, t).unwrap();
            for (a, b) in z.iter().zip(&params.coefficients) {
                assert!((a.norm() - b.norm()).abs() < 1e-15);
            }
        }
        assert!(evolve_bilinear_interaction(&params, -1.0).is_err());
        let mut bad = params.clone();
        bad.hbar = 0.0;
        assert!(evolve_bilinear_interaction(&bad, 1.0).is_err());
        assert!(BilinearInteraction::new(1.0, vec![Complex64::new(1.0, 0.0)], vec![FRAC_PI_4], 1.0, -1.0).is_err());
        assert!(BilinearInteraction::new(1.0, vec![Complex64::new(0.9, 0.0)], vec![1.0], 1.0, 1.0).is_err());
    }
}
