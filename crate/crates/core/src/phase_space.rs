//! Extended wavefunctions `Λ(q, p)` on a periodic phase-space grid.
//!
//! The operators `Q_α = α q + iħ ∂_p` and `P_β = β p − iħ ∂_q` use spectral
//! (FFT) differentiation along one axis at a time. Values are stored
//! row-major with `q` as the slow index: `values[m * n_p + n] = Λ(q_m, p_n)`.
//!
//! A finite grid cannot satisfy `[Q, P] = iħ` as a matrix identity, so the
//! commutator is checked pointwise on smooth states confined to the interior.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on `α + β = 1`.
pub const SPLIT_TOLERANCE: f64 = 1e-12;
/// Tolerance on the unit norm of lift windows.
pub const WINDOW_TOLERANCE: f64 = 1e-10;
/// Edge magnitude, relative to the peak, above which a commutator test state is rejected.
pub const EDGE_TOLERANCE: f64 = 1e-12;

const MAGIC: &[u8; 4] = b"EQMG";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    n_q: usize,
    n_p: usize,
    q_min: f64,
    q_max: f64,
    p_min: f64,
    p_max: f64,
    hbar: f64,
}

impl PhaseGrid {
    /// Uniform periodic grid; `q_max` and `p_max` are excluded (they wrap to the minimum).
    pub fn new(n_q: usize, n_p: usize, q_range: (f64, f64), p_range: (f64, f64), hbar: f64) -> Result<Self> {
        for (name, n) in [("n_q", n_q), ("n_p", n_p)] {
            if n < 16 || !n.is_power_of_two() {
                return Err(Error::InvalidArgument(format!("{name} = {n} must be a power of two >= 16")));
            }
        }
        for (name, (lo, hi)) in [("q", q_range), ("p", p_range)] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidArgument(format!("{name} extent [{lo}, {hi}) is empty")));
            }
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { n_q, n_p, q_min: q_range.0, q_max: q_range.1, p_min: p_range.0, p_max: p_range.1, hbar })
    }

    /// 256 x 256 over `[-12, 12)²` with `ħ = 1`.
    pub fn standard() -> Self {
        Self::new(256, 256, (-12.0, 12.0), (-12.0, 12.0), 1.0).expect("valid standard grid")
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }
    pub fn n_p(&self) -> usize {
        self.n_p
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn q_range(&self) -> (f64, f64) {
        (self.q_min, self.q_max)
    }
    pub fn p_range(&self) -> (f64, f64) {
        (self.p_min, self.p_max)
    }
    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_q as f64
    }
    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.n_p as f64
    }
    pub fn q(&self, m: usize) -> f64 {
        self.q_min + m as f64 * self.dq()
    }
    pub fn p(&self, n: usize) -> f64 {
        self.p_min + n as f64 * self.dp()
    }
    pub fn q_axis(&self) -> Vec<f64> {
        (0..self.n_q).map(|m| self.q(m)).collect()
    }
    pub fn p_axis(&self) -> Vec<f64> {
        (0..self.n_p).map(|n| self.p(n)).collect()
    }
    pub fn len(&self) -> usize {
        self.n_q * self.n_p
    }
    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `Λ(q_m, p_n)` on a [`PhaseGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedWavefunction {
    grid: PhaseGrid,
    values: Vec<Complex64>,
}

impl ExtendedWavefunction {
    pub fn new(grid: PhaseGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a {}x{} grid", values.len(), grid.n_q, grid.n_p)));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PhaseGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: PhaseGrid, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Self {
        let values =
            (0..grid.len()).into_par_iter().map(|idx| f(grid.q(idx / grid.n_p), grid.p(idx % grid.n_p))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.values[m * self.grid.n_p + n]
    }

    /// `Σ |Λ|² Δq Δp`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dq() * self.grid.dp()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude on the outermost rows and columns.
    pub fn edge_max_abs(&self) -> f64 {
        let (nq, np) = (self.grid.n_q, self.grid.n_p);
        let mut worst: f64 = 0.0;
        for n in 0..np {
            worst = worst.max(self.get(0, n).norm()).max(self.get(nq - 1, n).norm());
        }
        for m in 0..nq {
            worst = worst.max(self.get(m, 0).norm()).max(self.get(m, np - 1).norm());
        }
        worst
    }

    pub fn scale(&self, a: Complex64) -> Self {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }

    fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("operands live on different grids".into()));
        }
        Ok(())
    }

    fn check_consistent(&self) -> Result<()> {
        if self.values.len() != self.grid.len() {
            return Err(Error::GridMismatch("value count does not match grid".into()));
        }
        Ok(())
    }

    /// Binary layout, all little-endian: magic `EQMG`, `u32` version, `u64`
    /// n_q, `u64` n_p, `f64` q_min, q_max, p_min, p_max, ħ, then n_q·n_p
    /// interleaved `(re, im)` `f64` pairs, q-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &self.grid;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(g.n_q as u64).to_le_bytes())?;
        w.write_all(&(g.n_p as u64).to_le_bytes())?;
        for x in [g.q_min, g.q_max, g.p_min, g.p_max, g.hbar] {
            w.write_all(&x.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> std::io::Result<Self> {
        use std::io::{Error as IoError, ErrorKind};
        let invalid = |msg: String| IoError::new(ErrorKind::InvalidData, msg);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(invalid(format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> std::io::Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n_q = next_u64(&mut r)? as usize;
        let n_p = next_u64(&mut r)? as usize;
        let mut f = [0.0f64; 5];
        for x in f.iter_mut() {
            *x = f64::from_bits(next_u64(&mut r)?);
        }
        let grid = PhaseGrid::new(n_q, n_p, (f[0], f[1]), (f[2], f[3]), f[4]).map_err(|e| invalid(e.to_string()))?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = f64::from_bits(next_u64(&mut r)?);
            let im = f64::from_bits(next_u64(&mut r)?);
            values.push(Complex64::new(re, im));
        }
        Ok(Self { grid, values })
    }

    /// CSV with header `q,p,re,im`, one row per grid point, q-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "q,p,re,im")?;
        for m in 0..self.grid.n_q {
            for n in 0..self.grid.n_p {
                let v = self.get(m, n);
                writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", self.grid.q(m), self.grid.p(n), v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// `α + β = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSplit {
    alpha: f64,
    beta: f64,
}

impl AlphaSplit {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !((alpha + beta - 1.0).abs() <= SPLIT_TOLERANCE) {
            return Err(Error::InvalidArgument(format!("alpha + beta = {} != 1", alpha + beta)));
        }
        Ok(Self { alpha, beta })
    }

    pub fn from_alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0 - alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Complex samples along one grid axis with spacing `dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisWavefunction {
    pub values: Vec<Complex64>,
    pub dx: f64,
}

impl AxisWavefunction {
    pub fn new(values: Vec<Complex64>, dx: f64) -> Self {
        Self { values, dx }
    }

    pub fn from_fn(axis: &[f64], dx: f64, f: impl Fn(f64) -> Complex64) -> Self {
        Self { values: axis.iter().map(|&x| f(x)).collect(), dx }
    }

    /// `Σ |ψ|² Δx`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
        self
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `Ψ(q)` sampled on the q-axis.
pub type PositionWavefunction = AxisWavefunction;
/// `ξ(p)` sampled on the p-axis.
pub type MomentumWavefunction = AxisWavefunction;

/// Angular wavenumbers of the DFT bins in standard order, Nyquist bin zeroed.
fn wavenumbers(n: usize, spacing: f64) -> Vec<f64> {
    let period = n as f64 * spacing;
    (0..n)
        .map(|k| {
            if 2 * k == n {
                0.0
            } else if k < n / 2 {
                2.0 * PI * k as f64 / period
            } else {
                2.0 * PI * (k as f64 - n as f64) / period
            }
        })
        .collect()
}

/// Spectral first derivative applied in place to each contiguous row.
struct RowDerivative {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    multipliers: Vec<Complex64>,
}

impl RowDerivative {
    fn new(n: usize, spacing: f64) -> Self {
        let mut planner = FftPlanner::new();
        let scale = 1.0 / n as f64;
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            multipliers: wavenumbers(n, spacing).into_iter().map(|k| I * k * scale).collect(),
        }
    }

    fn apply_rows(&self, data: &mut [Complex64]) {
        let n = self.multipliers.len();
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()],
            |scratch, row| {
                if row.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                    return;
                }
                self.forward.process_with_scratch(row, scratch);
                for (v, m) in row.iter_mut().zip(&self.multipliers) {
                    *v *= m;
                }
                self.inverse.process_with_scratch(row, scratch);
            },
        );
    }
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    out.par_chunks_mut(rows).enumerate().for_each(|(c, col)| {
        for (r, v) in col.iter_mut().enumerate() {
            *v = data[r * cols + c];
        }
    });
    out
}

/// `∂_p Λ` by FFT along each q-row.
pub fn derivative_p(lambda: &ExtendedWavefunction) -> ExtendedWavefunction {
    let g = lambda.grid;
    let mut values = lambda.values.clone();
    RowDerivative::new(g.n_p, g.dp()).apply_rows(&mut values);
    ExtendedWavefunction { grid: g, values }
}

/// `∂_q Λ` by FFT along each p-column.
pub fn derivative_q(lambda: &ExtendedWavefunction) -> ExtendedWavefunction {
    let g = lambda.grid;
    let mut cols = transpose(&lambda.values, g.n_q, g.n_p);
    RowDerivative::new(g.n_q, g.dq()).apply_rows(&mut cols);
    ExtendedWavefunction { grid: g, values: transpose(&cols, g.n_p, g.n_q) }
}

/// Spectral derivative of a periodic 1-D sample vector.
pub fn spectral_derivative(samples: &[Complex64], spacing: f64) -> Vec<Complex64> {
    let mut out = samples.to_vec();
    RowDerivative::new(samples.len(), spacing).apply_rows(&mut out);
    out
}

/// `Q_α Λ = α q Λ + iħ ∂_p Λ`.
pub fn apply_q_alpha(lambda: &ExtendedWavefunction, split: AlphaSplit) -> Result<ExtendedWavefunction> {
    lambda.check_consistent()?;
    let g = lambda.grid;
    let mut out = derivative_p(lambda);
    let ih = I * g.hbar;
    out.values.par_chunks_mut(g.n_p).enumerate().for_each(|(m, row)| {
        let aq = split.alpha * g.q(m);
        let src = &lambda.values[m * g.n_p..(m + 1) * g.n_p];
        for (v, &l) in row.iter_mut().zip(src) {
            *v = l * aq + ih * *v;
        }
    });
    Ok(out)
}

/// `P_β Λ = β p Λ − iħ ∂_q Λ`.
pub fn apply_p_beta(lambda: &ExtendedWavefunction, split: AlphaSplit) -> Result<ExtendedWavefunction> {
    lambda.check_consistent()?;
    let g = lambda.grid;
    let mut out = derivative_q(lambda);
    let ih = I * g.hbar;
    out.values.par_chunks_mut(g.n_p).enumerate().for_each(|(m, row)| {
        let src = &lambda.values[m * g.n_p..(m + 1) * g.n_p];
        for (n, (v, &l)) in row.iter_mut().zip(src).enumerate() {
            *v = l * (split.beta * g.p(n)) - ih * *v;
        }
    });
    Ok(out)
}

/// Gaussian product `exp(−(q−q₀)²/(2σ_q²) − (p−p₀)²/(2σ_p²) + i(k_q q + k_p p))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub q0: f64,
    pub p0: f64,
    pub sigma_q: f64,
    pub sigma_p: f64,
    pub k_q: f64,
    pub k_p: f64,
}

impl GaussianSpec {
    /// Unit-width Gaussian at the origin with a mild phase ramp in both axes.
    pub const STANDARD: Self = Self { q0: 0.0, p0: 0.0, sigma_q: 1.0, sigma_p: 1.0, k_q: 1.0, k_p: 0.5 };

    pub fn sample(&self, grid: PhaseGrid) -> ExtendedWavefunction {
        let s = *self;
        ExtendedWavefunction::from_fn(grid, move |q, p| {
            let env = (-(q - s.q0).powi(2) / (2.0 * s.sigma_q.powi(2))
                - (p - s.p0).powi(2) / (2.0 * s.sigma_p.powi(2)))
            .exp();
            Complex64::from_polar(env, s.k_q * q + s.k_p * p)
        })
    }
}

/// Standard commutator test state on the standard grid.
pub fn standard_test_state() -> ExtendedWavefunction {
    GaussianSpec::STANDARD.sample(PhaseGrid::standard())
}

/// `max |(Q_α P_β − P_β Q_α) Λ − iħ Λ| / (ħ max |Λ|)` over the grid.
///
/// Rejects states whose edge magnitude exceeds [`EDGE_TOLERANCE`] times
/// their peak, since periodic wrap-around would then pollute the result.
pub fn commutator_residual(lambda: &ExtendedWavefunction, split: AlphaSplit) -> Result<f64> {
    lambda.check_consistent()?;
    let peak = lambda.max_abs();
    if !(peak > 0.0) {
        return Err(Error::InvalidArgument("commutator test state is zero".into()));
    }
    let edge = lambda.edge_max_abs();
    if edge > EDGE_TOLERANCE * peak {
        return Err(Error::BoundaryContact(edge / peak));
    }
    let qp = apply_q_alpha(&apply_p_beta(lambda, split)?, split)?;
    let pq = apply_p_beta(&apply_q_alpha(lambda, split)?, split)?;
    let ih = I * lambda.grid.hbar;
    let worst = qp
        .values
        .iter()
        .zip(&pq.values)
        .zip(&lambda.values)
        .map(|((a, b), l)| (a - b - ih * l).norm())
        .fold(0.0, f64::max);
    Ok(worst / (lambda.grid.hbar * peak))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QInvarianceReport {
    /// Output vanishes exactly outside the input column.
    pub support_preserved: bool,
    /// Output is not a scalar multiple of the input.
    pub nontrivial: bool,
}

impl QInvarianceReport {
    pub fn holds(&self) -> bool {
        self.support_preserved && self.nontrivial
    }
}

/// Applies `Q_α` to a state supported on column `q_index` and reports whether
/// the column is preserved and whether the action is more than a scalar.
pub fn q_invariant_subspace_check(
    lambda: &ExtendedWavefunction,
    q_index: usize,
    split: AlphaSplit,
) -> Result<QInvarianceReport> {
    lambda.check_consistent()?;
    let g = lambda.grid;
    if q_index >= g.n_q {
        return Err(Error::IndexOutOfRange { index: q_index, len: g.n_q });
    }
    let zero = |v: &Complex64| v.re == 0.0 && v.im == 0.0;
    for m in (0..g.n_q).filter(|&m| m != q_index) {
        if let Some(n) = lambda.values[m * g.n_p..(m + 1) * g.n_p].iter().position(|v| !zero(v)) {
            return Err(Error::SupportViolation { q: m, p: n });
        }
    }
    let out = apply_q_alpha(lambda, split)?;
    let support_preserved = out.values.chunks(g.n_p).enumerate().all(|(m, row)| m == q_index || row.iter().all(zero));

    let column = |w: &ExtendedWavefunction| w.values[q_index * g.n_p..(q_index + 1) * g.n_p].to_vec();
    let (a, b) = (column(lambda), column(&out));
    let aa: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let bb: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    let ab: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
    // Cauchy-Schwarz is tight exactly when b is parallel to a.
    let nontrivial = aa > 0.0 && bb > 0.0 && ab.norm_sqr() < (1.0 - 1e-10) * aa * bb;
    Ok(QInvarianceReport { support_preserved, nontrivial })
}

fn check_window(window: &AxisWavefunction, len: usize, spacing: f64) -> Result<()> {
    if window.values.len() != len {
        return Err(Error::GridMismatch(format!("window has {} samples, axis has {len}", window.values.len())));
    }
    if (window.dx - spacing).abs() > 1e-12 * spacing.abs().max(1.0) {
        return Err(Error::GridMismatch("window spacing differs from the grid axis".into()));
    }
    let norm = window.norm_sq();
    if (norm - 1.0).abs() > WINDOW_TOLERANCE {
        return Err(Error::NotNormalized(norm));
    }
    Ok(())
}

fn check_axis(psi: &AxisWavefunction, len: usize) -> Result<()> {
    if psi.values.len() != len {
        return Err(Error::GridMismatch(format!("{} samples for an axis of {len}", psi.values.len())));
    }
    Ok(())
}

/// `Λ(q, p) = Ψ(q) χ(p) e^{−iαqp/ħ} / √(2πħ)` for a unit-normalized momentum window `χ`.
pub fn lift(
    grid: PhaseGrid,
    psi: &PositionWavefunction,
    window: &MomentumWavefunction,
    split: AlphaSplit,
) -> Result<ExtendedWavefunction> {
    check_axis(psi, grid.n_q)?;
    check_window(window, grid.n_p, grid.dp())?;
    Ok(lift_unchecked(grid, &psi.values, &window.values, split))
}

/// `Λ(q, p) = φ(q) ξ(p) e^{−iαqp/ħ} / √(2πħ)` for a unit-normalized position window `φ`.
pub fn lift_momentum(
    grid: PhaseGrid,
    xi: &MomentumWavefunction,
    window: &PositionWavefunction,
    split: AlphaSplit,
) -> Result<ExtendedWavefunction> {
    check_axis(xi, grid.n_p)?;
    check_window(window, grid.n_q, grid.dq())?;
    Ok(lift_unchecked(grid, &window.values, &xi.values, split))
}

fn lift_unchecked(
    grid: PhaseGrid,
    q_part: &[Complex64],
    p_part: &[Complex64],
    split: AlphaSplit,
) -> ExtendedWavefunction {
    let norm = 1.0 / (2.0 * PI * grid.hbar).sqrt();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    values.par_chunks_mut(grid.n_p).enumerate().for_each(|(m, row)| {
        let q = grid.q(m);
        for (n, v) in row.iter_mut().enumerate() {
            let phase = Complex64::from_polar(norm, -split.alpha * q * grid.p(n) / grid.hbar);
            *v = q_part[m] * p_part[n] * phase;
        }
    });
    ExtendedWavefunction { grid, values }
}

/// `Ψ(q) = Δp Σ_p K_α(q, p) Λ(q, p)` with `K_α = √(2πħ) χ*(p) e^{+iαqp/ħ}`,
/// the adjoint of the [`lift`] factor for window `χ`.
pub fn project_to_position(
    lambda: &ExtendedWavefunction,
    window: &MomentumWavefunction,
    split: AlphaSplit,
) -> Result<PositionWavefunction> {
    lambda.check_consistent()?;
    let g = lambda.grid;
    check_window(window, g.n_p, g.dp())?;
    let factor = (2.0 * PI * g.hbar).sqrt() * g.dp();
    let values = lambda
        .values
        .par_chunks(g.n_p)
        .enumerate()
        .map(|(m, row)| {
            let q = g.q(m);
            row.iter()
                .zip(&window.values)
                .enumerate()
                .map(|(n, (l, chi))| Complex64::from_polar(factor, split.alpha * q * g.p(n) / g.hbar) * chi.conj() * l)
                .sum()
        })
        .collect();
    Ok(AxisWavefunction { values, dx: g.dq() })
}

/// `ξ(p) = Δq Σ_q √(2πħ) φ*(q) e^{+iαqp/ħ} Λ(q, p)`, the adjoint of [`lift_momentum`].
pub fn project_to_momentum(
    lambda: &ExtendedWavefunction,
    window: &PositionWavefunction,
    split: AlphaSplit,
) -> Result<MomentumWavefunction> {
    lambda.check_consistent()?;
    let g = lambda.grid;
    check_window(window, g.n_q, g.dq())?;
    let factor = (2.0 * PI * g.hbar).sqrt() * g.dq();
    let values = (0..g.n_p)
        .into_par_iter()
        .map(|n| {
            let p = g.p(n);
            (0..g.n_q)
                .map(|m| {
                    Complex64::from_polar(factor, split.alpha * g.q(m) * p / g.hbar)
                        * window.values[m].conj()
                        * lambda.get(m, n)
                })
                .sum()
        })
        .collect();
    Ok(AxisWavefunction { values, dx: g.dp() })
}

/// Unit-normalized Gaussian window on an axis.
pub fn gaussian_window(axis: &[f64], dx: f64, center: f64, sigma: f64) -> AxisWavefunction {
    AxisWavefunction::from_fn(axis, dx, |x| Complex64::new((-(x - center).powi(2) / (2.0 * sigma * sigma)).exp(), 0.0))
        .normalized()
}
