//! Quasi-probability tables for non-commuting magnitudes and feasibility of
//! nonnegative joint distributions given marginal constraints.
//!
//! For a unit state `|S⟩` and measurement bases `A, B, …, C` the symmetrized
//! table averages `⟨S|a⟩⟨a|b⟩⋯⟨c|S⟩` over every ordering of the projectors.
//! Its marginals reproduce the Born distributions but entries may be
//! negative. Whether a *nonnegative* joint exists for a given set of
//! marginals is decided by [`feasible_nonnegative_joint`].
//!
//! Two single-variable marginals alone are always met by the product
//! distribution, so the feasibility question only has teeth for systems with
//! overlapping multi-variable marginals; [`MarginalSystem`] takes that general
//! form.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-norm tolerance for states.
pub const STATE_TOLERANCE: f64 = 1e-12;
/// Column-orthonormality tolerance for bases.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;
/// Largest imaginary part tolerated before a table is declared non-real.
pub const IMAGINARY_TOLERANCE: f64 = 1e-12;
/// Normalization tolerance for marginal tables.
pub const MARGINAL_TOLERANCE: f64 = 1e-9;
/// Phase-1 objective above which a system is declared infeasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;
/// Largest joint table handled by the LP.
pub const MAX_JOINT_CELLS: usize = 1 << 16;
/// Largest `d^N · N!` term count for symmetrized tables.
const MAX_PERMUTATION_TERMS: usize = 100_000_000;

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
    (0..d).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

/// Unit vector of complex coefficients in the reference basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct FiniteState(Vec<Complex64>);

impl FiniteState {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
        if coeffs.is_empty() || (norm - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self(coeffs))
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(coeffs: Vec<Complex64>) -> Result<Self> {
        let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized(norm * norm));
        }
        Ok(Self(coeffs.into_iter().map(|z| z / norm).collect()))
    }

    /// Haar-random unit vector.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self::normalized(gaussian_vector(d, rng)).expect("gaussian draw is nonzero")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.0
    }
}

impl TryFrom<Vec<Complex64>> for FiniteState {
    type Error = Error;
    fn try_from(v: Vec<Complex64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FiniteState> for Vec<Complex64> {
    fn from(s: FiniteState) -> Self {
        s.0
    }
}

/// Orthonormal basis; `vectors[i]` is `|a_i⟩` in the reference basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Complex64>>", into = "Vec<Vec<Complex64>>")]
pub struct MeasBasis(Vec<Vec<Complex64>>);

impl MeasBasis {
    pub fn new(vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        let d = vectors.len();
        if d == 0 {
            return Err(Error::InvalidArgument("empty basis".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::LengthMismatch { expected: d, actual: v.len() });
        }
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner(&vectors[i], &vectors[j]) - expect).norm());
            }
        }
        if worst > UNITARITY_TOLERANCE {
            return Err(Error::NonUnitary(worst));
        }
        Ok(Self(vectors))
    }

    pub fn computational(d: usize) -> Self {
        Self((0..d).map(|i| (0..d).map(|k| Complex64::new(if i == k { 1.0 } else { 0.0 }, 0.0)).collect()).collect())
    }

    /// `|f_i⟩ = d^{-1/2} Σ_k e^{2πi ik/d} |k⟩`.
    pub fn fourier(d: usize) -> Self {
        let s = 1.0 / (d as f64).sqrt();
        Self(
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|k| Complex64::from_polar(s, std::f64::consts::TAU * (i * k) as f64 / d as f64))
                        .collect()
                })
                .collect(),
        )
    }

    /// Spin-1/2 eigenbasis along `z`, `x` or `y`, ordered `(+, −)`.
    pub fn qubit(axis: char) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let vectors = match axis {
            'z' => vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]],
            'x' => vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]],
            'y' => vec![vec![c(h, 0.0), c(0.0, h)], vec![c(h, 0.0), c(0.0, -h)]],
            other => return Err(Error::InvalidArgument(format!("unknown qubit axis {other:?}"))),
        };
        Ok(Self(vectors))
    }

    /// Haar-random basis by Gram-Schmidt on complex Gaussian vectors.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(d);
        while vectors.len() < d {
            let mut v = gaussian_vector(d, rng);
            // two passes keep the result orthonormal to working precision
            for _ in 0..2 {
                for u in &vectors {
                    let c = inner(u, &v);
                    for (x, y) in v.iter_mut().zip(u) {
                        *x -= c * y;
                    }
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-8 {
                vectors.push(v.into_iter().map(|z| z / norm).collect());
            }
        }
        Self(vectors)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.0
    }

    /// `|⟨a_i|S⟩|²` for every basis vector.
    pub fn born(&self, state: &FiniteState) -> Result<Vec<f64>> {
        if state.dim() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), actual: state.dim() });
        }
        Ok(self.0.iter().map(|a| inner(a, state.coeffs()).norm_sqr()).collect())
    }
}

impl TryFrom<Vec<Vec<Complex64>>> for MeasBasis {
    type Error = Error;
    fn try_from(v: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MeasBasis> for Vec<Vec<Complex64>> {
    fn from(b: MeasBasis) -> Self {
        b.0
    }
}

/// Real table over outcome tuples, row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiProbTable {
    shape: Vec<usize>,
    values: Vec<f64>,
    /// Largest imaginary part discarded when the table was formed.
    imag_residue: f64,
}

impl QuasiProbTable {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let cells: usize = shape.iter().product();
        if shape.is_empty() || values.len() != cells {
            return Err(Error::ShapeMismatch(format!("{} values for shape {shape:?}", values.len())));
        }
        Ok(Self { shape, values, imag_residue: 0.0 })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn imag_residue(&self) -> f64 {
        self.imag_residue
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[flat_index(&self.shape, index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let k = flat_index(&self.shape, index)?;
        self.values[k] = value;
        Ok(())
    }

    /// Sums out every axis not listed in `keep`; result axes follow `keep`.
    pub fn marginal(&self, keep: &[usize]) -> Result<Vec<f64>> {
        for (t, &a) in keep.iter().enumerate() {
            if a >= self.shape.len() || keep[..t].contains(&a) {
                return Err(Error::ShapeMismatch(format!("bad marginal axes {keep:?}")));
            }
        }
        let sub_shape: Vec<usize> = keep.iter().map(|&a| self.shape[a]).collect();
        let mut out = vec![0.0; sub_shape.iter().product()];
        let mut digits = vec![0usize; self.shape.len()];
        for &v in &self.values {
            let k = keep.iter().fold(0, |acc, &a| acc * self.shape[a] + digits[a]);
            out[k] += v;
            increment(&mut digits, &self.shape);
        }
        Ok(out)
    }
}

fn flat_index(shape: &[usize], index: &[usize]) -> Result<usize> {
    if index.len() != shape.len() {
        return Err(Error::LengthMismatch { expected: shape.len(), actual: index.len() });
    }
    index.iter().zip(shape).try_fold(0, |acc, (&i, &n)| {
        if i < n {
            Ok(acc * n + i)
        } else {
            Err(Error::IndexOutOfRange { index: i, len: n })
        }
    })
}

/// Row-major odometer step.
fn increment(digits: &mut [usize], shape: &[usize]) {
    for a in (0..digits.len()).rev() {
        digits[a] += 1;
        if digits[a] < shape[a] {
            return;
        }
        digits[a] = 0;
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// `W(a, b) = ½(⟨S|a⟩⟨a|b⟩⟨b|S⟩ + cc)`.
pub fn wigner_pair(state: &FiniteState, a: &MeasBasis, b: &MeasBasis) -> Result<QuasiProbTable> {
    symmetrized_quasiprob(state, &[a.clone(), b.clone()])
}

/// `W(a, b, …, c) = (1/N!) Σ_perm ⟨S|a⟩⟨a|b⟩⋯⟨c|S⟩` over every ordering of
/// the projectors. Fails if the permutation sum leaves an imaginary part
/// above [`IMAGINARY_TOLERANCE`].
pub fn symmetrized_quasiprob(state: &FiniteState, bases: &[MeasBasis]) -> Result<QuasiProbTable> {
    let n = bases.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least two bases, got {n}")));
    }
    let d = state.dim();
    if let Some(b) = bases.iter().find(|b| b.dim() != d) {
        return Err(Error::LengthMismatch { expected: d, actual: b.dim() });
    }
    let perms = permutations(n);
    let cells = d
        .checked_pow(n as u32)
        .filter(|c| c.saturating_mul(perms.len()) <= MAX_PERMUTATION_TERMS)
        .ok_or_else(|| Error::TooLarge(format!("{d}^{n} outcomes x {n}! orderings")))?;

    // ⟨a^k_i|S⟩ and ⟨a^k_i|a^l_j⟩
    let to_state: Vec<Vec<Complex64>> =
        bases.iter().map(|b| b.vectors().iter().map(|v| inner(v, state.coeffs())).collect()).collect();
    let overlap = |k: usize, i: usize, l: usize, j: usize| inner(&bases[k].vectors()[i], &bases[l].vectors()[j]);
    let cross: Vec<Vec<Vec<Complex64>>> = (0..n)
        .map(|k| (0..n).map(|l| (0..d * d).map(|ij| overlap(k, ij / d, l, ij % d)).collect()).collect())
        .collect();

    let shape = vec![d; n];
    let mut values = Vec::with_capacity(cells);
    let mut digits = vec![0usize; n];
    let mut worst_imag: f64 = 0.0;
    for _ in 0..cells {
        let mut acc = Complex64::new(0.0, 0.0);
        for p in &perms {
            let first = p[0];
            let last = p[n - 1];
            let mut term = to_state[first][digits[first]].conj();
            for w in p.windows(2) {
                term *= cross[w[0]][w[1]][digits[w[0]] * d + digits[w[1]]];
            }
            term *= to_state[last][digits[last]];
            acc += term;
        }
        acc /= perms.len() as f64;
        worst_imag = worst_imag.max(acc.im.abs());
        values.push(acc.re);
        increment(&mut digits, &shape);
    }
    if worst_imag > IMAGINARY_TOLERANCE {
        return Err(Error::ImaginaryResidue(worst_imag));
    }
    Ok(QuasiProbTable { shape, values, imag_residue: worst_imag })
}

/// Minimum entry and its multi-index; ties go to the lexicographically lowest index.
pub fn min_entry(table: &QuasiProbTable) -> (f64, Vec<usize>) {
    let mut best = 0;
    for (k, &v) in table.values.iter().enumerate() {
        if v < table.values[best] {
            best = k;
        }
    }
    let mut index = vec![0; table.shape.len()];
    let mut rest = best;
    for a in (0..table.shape.len()).rev() {
        index[a] = rest % table.shape[a];
        rest /= table.shape[a];
    }
    (table.values[best], index)
}

/// A probability table over a subset of variables, row-major in `vars` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marginal {
    pub vars: Vec<usize>,
    pub table: Vec<f64>,
}

/// Marginal constraints on a joint distribution over variables with the given arities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSystem {
    pub arities: Vec<usize>,
    pub marginals: Vec<Marginal>,
}

impl MarginalSystem {
    pub fn new(arities: Vec<usize>, marginals: Vec<Marginal>) -> Result<Self> {
        let s = Self { arities, marginals };
        s.validate()?;
        Ok(s)
    }

    /// Shape and normalization checks.
    pub fn validate(&self) -> Result<()> {
        if self.arities.is_empty() || self.arities.contains(&0) {
            return Err(Error::ShapeMismatch(format!("bad arities {:?}", self.arities)));
        }
        for (k, m) in self.marginals.iter().enumerate() {
            if m.vars.is_empty() {
                return Err(Error::EmptySubset);
            }
            for (t, &v) in m.vars.iter().enumerate() {
                if v >= self.arities.len() {
                    return Err(Error::IndexOutOfRange { index: v, len: self.arities.len() });
                }
                if m.vars[..t].contains(&v) {
                    return Err(Error::DuplicateIndex(v));
                }
            }
            let cells: usize = m.vars.iter().map(|&v| self.arities[v]).product();
            if m.table.len() != cells {
                return Err(Error::ShapeMismatch(format!(
                    "marginal {k} has {} entries, expected {cells}",
                    m.table.len()
                )));
            }
            if m.table.iter().any(|p| !(p.is_finite() && *p >= -MARGINAL_TOLERANCE)) {
                return Err(Error::InvalidArgument(format!("marginal {k} has a negative or non-finite entry")));
            }
            let total: f64 = m.table.iter().sum();
            if (total - 1.0).abs() > MARGINAL_TOLERANCE {
                return Err(Error::InconsistentMarginals(format!("marginal {k} sums to {total}")));
            }
        }
        Ok(())
    }

    pub fn joint_cells(&self) -> usize {
        self.arities.iter().product()
    }

    /// `n` binary variables (outcome index 0 ↔ +1, 1 ↔ −1) with uniform
    /// singles and every pair constrained to `P(s, s') = (1 + s s' c) / 4`.
    pub fn pairwise_uniform(n: usize, c: f64) -> Result<Self> {
        Self::pairwise_correlated(n, &|_, _| c)
    }

    /// As [`pairwise_uniform`](Self::pairwise_uniform) with per-pair correlation `c(i, j)`.
    pub fn pairwise_correlated(n: usize, c: &dyn Fn(usize, usize) -> f64) -> Result<Self> {
        let mut marginals = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let cij = c(i, j);
                let table = [1.0, -1.0].iter().flat_map(|s| [1.0, -1.0].map(|t| (1.0 + s * t * cij) / 4.0)).collect();
                marginals.push(Marginal { vars: vec![i, j], table });
            }
        }
        Self::new(vec![2; n], marginals)
    }
}

/// Max-entry deviation between the summed-out table and each target marginal.
pub fn verify_marginals(table: &QuasiProbTable, targets: &MarginalSystem) -> Result<f64> {
    if table.shape != targets.arities {
        return Err(Error::ShapeMismatch(format!("table shape {:?} vs arities {:?}", table.shape, targets.arities)));
    }
    let mut worst: f64 = 0.0;
    for m in &targets.marginals {
        let summed = table.marginal(&m.vars)?;
        if summed.len() != m.table.len() {
            return Err(Error::ShapeMismatch("marginal table size".into()));
        }
        for (a, b) in summed.iter().zip(&m.table) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Dual vector `y` over the constraint rows with `Aᵀy ≤ 0` and `bᵀy > 0`,
/// which rules out any `x ≥ 0` with `Ax = b`.
///
/// Rows are listed marginal by marginal in table order, followed by the
/// normalization row `Σ x = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub y: Vec<f64>,
    /// `bᵀy`; equals the optimal phase-1 infeasibility.
    pub b_dot_y: f64,
    /// `max_j (Aᵀy)_j`; nonpositive up to rounding.
    pub max_column_value: f64,
}

impl FarkasCertificate {
    /// Recomputes both sides on `system` and checks the separation.
    pub fn verify(&self, system: &MarginalSystem) -> bool {
        let lp = ConstraintMatrix::build(system);
        if self.y.len() != lp.rows() {
            return false;
        }
        let b_dot_y: f64 = lp.b.iter().zip(&self.y).map(|(b, y)| b * y).sum();
        let max_col =
            (0..lp.cols).map(|j| lp.column(j).map(|r| self.y[r]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
        b_dot_y > FEASIBILITY_TOLERANCE && max_col <= 1e-9
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Feasibility {
    Feasible { witness: QuasiProbTable },
    Infeasible { certificate: FarkasCertificate },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// 0/1 constraint matrix: one row per marginal cell plus the normalization
/// row. Column `j` (a joint cell) has a single 1 in each marginal block.
struct ConstraintMatrix {
    cols: usize,
    /// `row_of[j][k]`: row hit by column `j` in block `k` (last block is normalization).
    row_of: Vec<Vec<usize>>,
    b: Vec<f64>,
}

impl ConstraintMatrix {
    fn build(system: &MarginalSystem) -> Self {
        let cols = system.joint_cells();
        let mut offsets = Vec::with_capacity(system.marginals.len());
        let mut b = Vec::new();
        for m in &system.marginals {
            offsets.push(b.len());
            b.extend_from_slice(&m.table);
        }
        let norm_row = b.len();
        b.push(1.0);
        let mut row_of = Vec::with_capacity(cols);
        let mut digits = vec![0usize; system.arities.len()];
        for _ in 0..cols {
            let mut rows: Vec<usize> = system
                .marginals
                .iter()
                .zip(&offsets)
                .map(|(m, &off)| off + m.vars.iter().fold(0, |acc, &v| acc * system.arities[v] + digits[v]))
                .collect();
            rows.push(norm_row);
            row_of.push(rows);
            increment(&mut digits, &system.arities);
        }
        Self { cols, row_of, b }
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    fn column(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_of[j].iter().copied()
    }
}

/// Outcome of the phase-1 simplex.
struct PhaseOne {
    objective: f64,
    /// Basic variable per row (columns `>= cols` are artificials).
    basis: Vec<usize>,
    x_basis: Vec<f64>,
    /// Duals for the sign-normalized rows.
    y: Vec<f64>,
}

/// Revised simplex on `min Σ a  s.t.  A x + a = b, x, a ≥ 0` with an explicit
/// dense basis inverse. Prices by most negative reduced cost while the
/// objective falls; after a run of degenerate pivots it switches to Bland's
/// rule for both choices until the objective strictly decreases again.
fn phase_one(lp: &ConstraintMatrix) -> PhaseOne {
    const PIVOT_TOL: f64 = 1e-9;
    const COST_TOL: f64 = 1e-11;
    const ZERO_TOL: f64 = 1e-12;
    const REFACTOR_EVERY: usize = 64;
    const STALL_LIMIT: usize = 50;

    let m = lp.rows();
    let n = lp.cols;
    // Every b is a probability; clamp rounding-level negatives so the
    // artificial start basis is feasible.
    let b: Vec<f64> = lp.b.iter().map(|&v| v.max(0.0)).collect();
    let column = |j: usize| -> Vec<(usize, f64)> {
        if j < n {
            lp.column(j).map(|r| (r, 1.0)).collect()
        } else {
            vec![(j - n, 1.0)]
        }
    };
    let cost = |j: usize| if j < n { 0.0 } else { 1.0 };

    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut in_basis = vec![false; n + m];
    for &j in &basis {
        in_basis[j] = true;
    }
    let mut binv = vec![vec![0.0; m]; m];
    for (i, row) in binv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut x_b = b.clone();
    let mut iterations = 0usize;
    // B⁻¹ and x_B are exact for the start basis
    let mut fresh = true;
    let mut bland = false;
    let mut stalled = 0usize;
    let mut last_objective = f64::INFINITY;

    let refactor = |basis: &[usize], binv: &mut Vec<Vec<f64>>, x_b: &mut Vec<f64>| {
        // Gauss-Jordan on [B | I]
        let mut aug = vec![vec![0.0; 2 * m]; m];
        for (c, &j) in basis.iter().enumerate() {
            for (r, v) in column(j) {
                aug[r][c] = v;
            }
        }
        for (r, row) in aug.iter_mut().enumerate() {
            row[m + r] = 1.0;
        }
        for c in 0..m {
            let p = (c..m).max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs())).expect("nonempty");
            aug.swap(c, p);
            let piv = aug[c][c];
            for v in aug[c].iter_mut() {
                *v /= piv;
            }
            for r in 0..m {
                if r != c && aug[r][c] != 0.0 {
                    let f = aug[r][c];
                    let (src, dst) = if r < c {
                        let (lo, hi) = aug.split_at_mut(c);
                        (&hi[0], &mut lo[r])
                    } else {
                        let (lo, hi) = aug.split_at_mut(r);
                        (&lo[c], &mut hi[0])
                    };
                    for (d, s) in dst.iter_mut().zip(src.iter()) {
                        *d -= f * s;
                    }
                }
            }
        }
        for (r, row) in aug.iter().enumerate() {
            binv[r].copy_from_slice(&row[m..]);
        }
        for (r, x) in x_b.iter_mut().enumerate() {
            *x = binv[r].iter().zip(&b).map(|(a, v)| a * v).sum::<f64>().max(0.0);
        }
    };

    loop {
        // y = c_Bᵀ B⁻¹
        let mut y = vec![0.0; m];
        for (r, &j) in basis.iter().enumerate() {
            let c = cost(j);
            if c != 0.0 {
                for (yi, bi) in y.iter_mut().zip(&binv[r]) {
                    *yi += c * bi;
                }
            }
        }
        let reduced = |j: usize| cost(j) - column(j).iter().map(|&(r, v)| y[r] * v).sum::<f64>();
        let mut candidates =
            (0..n + m).filter(|&j| !in_basis[j]).map(|j| (j, reduced(j))).filter(|&(_, d)| d < -COST_TOL);
        let entering = if bland {
            candidates.next().map(|(j, _)| j)
        } else {
            candidates.min_by(|a, b| a.1.total_cmp(&b.1)).map(|(j, _)| j)
        };
        let Some(enter) = entering else {
            if !fresh {
                // re-price from a clean factorization before accepting optimality
                refactor(&basis, &mut binv, &mut x_b);
                fresh = true;
                continue;
            }
            let objective = basis.iter().zip(&x_b).map(|(&j, &x)| cost(j) * x).sum();
            return PhaseOne { objective, basis, x_basis: x_b, y };
        };
        let a_col = column(enter);
        let u: Vec<f64> = (0..m).map(|r| a_col.iter().map(|&(k, v)| binv[r][k] * v).sum()).collect();
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..m {
            if u[r] > PIVOT_TOL {
                let ratio = if x_b[r] < ZERO_TOL { 0.0 } else { x_b[r] / u[r] };
                let tie = 1e-12 * best_ratio.abs().max(1.0);
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best_ratio - tie || (ratio <= best_ratio + tie && basis[r] < basis[l]),
                };
                if better {
                    leave = Some(r);
                    best_ratio = ratio;
                }
            }
        }
        let Some(l) = leave else {
            unreachable!("phase-1 objective is bounded below");
        };
        // pivot
        let piv = u[l];
        for v in binv[l].iter_mut() {
            *v /= piv;
        }
        x_b[l] /= piv;
        let pivot_row = binv[l].clone();
        let x_l = x_b[l];
        for r in 0..m {
            if r != l && u[r] != 0.0 {
                let f = u[r];
                for (d, s) in binv[r].iter_mut().zip(&pivot_row) {
                    *d -= f * s;
                }
                x_b[r] = (x_b[r] - f * x_l).max(0.0);
            }
        }
        in_basis[basis[l]] = false;
        in_basis[enter] = true;
        basis[l] = enter;
        iterations += 1;
        fresh = false;
        let objective: f64 = basis.iter().zip(&x_b).map(|(&j, &x)| cost(j) * x).sum();
        if objective < last_objective - 1e-12 {
            last_objective = objective;
            stalled = 0;
            bland = false;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                bland = true;
            }
        }
        if iterations % REFACTOR_EVERY == 0 {
            refactor(&basis, &mut binv, &mut x_b);
            fresh = true;
        }
    }
}

/// Decides whether a nonnegative joint table reproduces every marginal in
/// `system`, returning a witness table or a Farkas certificate.
pub fn feasible_nonnegative_joint(system: &MarginalSystem) -> Result<Feasibility> {
    system.validate()?;
    let cells = system.joint_cells();
    if cells > MAX_JOINT_CELLS {
        return Err(Error::TooLarge(format!("joint table has {cells} cells (limit {MAX_JOINT_CELLS})")));
    }
    let lp = ConstraintMatrix::build(system);
    let result = phase_one(&lp);
    if result.objective > FEASIBILITY_TOLERANCE {
        let y = result.y;
        let b_dot_y = lp.b.iter().zip(&y).map(|(b, y)| b * y).sum();
        let max_column_value =
            (0..lp.cols).map(|j| lp.column(j).map(|r| y[r]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
        return Ok(Feasibility::Infeasible { certificate: FarkasCertificate { y, b_dot_y, max_column_value } });
    }
    let mut values = vec![0.0; cells];
    for (&j, &x) in result.basis.iter().zip(&result.x_basis) {
        if j < cells {
            values[j] = x.max(0.0);
        }
    }
    let witness = QuasiProbTable::new(system.arities.clone(), values)?;
    Ok(Feasibility::Feasible { witness })
}

/// Observability residuals of an amplitude matrix `z_ij`:
/// `r_A[i] = |Σ_j z_ij|² / 𝒩_A − Σ_j |z_ij|² / 𝒩` and the analogous `r_B[j]`.
pub fn eqm_observability_residual(z: &[Vec<Complex64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = z.len();
    let cols = z.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("empty amplitude matrix".into()));
    }
    if let Some(r) = z.iter().find(|r| r.len() != cols) {
        return Err(Error::LengthMismatch { expected: cols, actual: r.len() });
    }
    let total: f64 = z.iter().flatten().map(|v| v.norm_sqr()).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    let coherent_a: Vec<f64> = z.iter().map(|r| r.iter().sum::<Complex64>().norm_sqr()).collect();
    let coherent_b: Vec<f64> = (0..cols).map(|j| z.iter().map(|r| r[j]).sum::<Complex64>().norm_sqr()).collect();
    let (na, nb): (f64, f64) = (coherent_a.iter().sum(), coherent_b.iter().sum());
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    let res_a =
        z.iter().zip(&coherent_a).map(|(r, c)| c / na - r.iter().map(|v| v.norm_sqr()).sum::<f64>() / total).collect();
    let res_b =
        (0..cols).map(|j| coherent_b[j] / nb - z.iter().map(|r| r[j].norm_sqr()).sum::<f64>() / total).collect();
    Ok((res_a, res_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit(axis: char) -> MeasBasis {
        MeasBasis::qubit(axis).unwrap()
    }

    fn plus(axis: char) -> FiniteState {
        FiniteState::new(qubit(axis).vectors()[0].clone()).unwrap()
    }

    #[test]
    fn state_and_basis_validation() {
        assert!(FiniteState::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(FiniteState::new(vec![]).is_err());
        assert!(MeasBasis::new(vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).is_err());
        assert!(MeasBasis::new(vec![vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]]).is_err());
        for axis in ['x', 'y', 'z'] {
            assert!(MeasBasis::new(qubit(axis).vectors().to_vec()).is_ok());
        }
        assert!(MeasBasis::new(MeasBasis::fourier(5).vectors().to_vec()).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(MeasBasis::new(MeasBasis::random(8, &mut rng).vectors().to_vec()).is_ok());
        assert!(MeasBasis::qubit('w').is_err());
    }

    #[test]
    fn wigner_pair_same_basis_is_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = FiniteState::random(4, &mut rng);
        let a = MeasBasis::random(4, &mut rng);
        let w = wigner_pair(&s, &a, &a).unwrap();
        let born = a.born(&s).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { born[i] } else { 0.0 };
                assert!((w.get(&[i, j]).unwrap() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wigner_pair_plus_y_in_z_x() {
        // direct four-product oracle: Re(⟨S|a⟩⟨a|b⟩⟨b|S⟩) = 1/4 for every (a, b)
        let w = wigner_pair(&plus('y'), &qubit('z'), &qubit('x')).unwrap();
        for v in w.values() {
            assert!((v - 0.25).abs() < 1e-12, "{v}");
        }
        assert!(w.imag_residue() < 1e-15);
    }

    #[test]
    fn wigner_pair_plus_z_in_z_x() {
        let w = wigner_pair(&plus('z'), &qubit('z'), &qubit('x')).unwrap();
        let expect = [0.5, 0.5, 0.0, 0.0];
        for (v, e) in w.values().iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn wigner_pair_goes_negative_off_axis() {
        // state along (z + x)/√2: W(−, −) = (1 − √2)/4
        let theta = std::f64::consts::FRAC_PI_4;
        let s = FiniteState::new(vec![c((theta / 2.0).cos(), 0.0), c((theta / 2.0).sin(), 0.0)]).unwrap();
        let w = wigner_pair(&s, &qubit('z'), &qubit('x')).unwrap();
        let (v, idx) = min_entry(&w);
        assert!((v - (1.0 - 2f64.sqrt()) / 4.0).abs() < 1e-12);
        assert_eq!(idx, vec![1, 1]);
    }

    #[test]
    fn symmetrized_reduces_to_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 3, 5] {
            let s = FiniteState::random(d, &mut rng);
            let (a, b) = (MeasBasis::random(d, &mut rng), MeasBasis::random(d, &mut rng));
            let w = wigner_pair(&s, &a, &b).unwrap();
            let ws = symmetrized_quasiprob(&s, &[a, b]).unwrap();
            for (x, y) in w.values().iter().zip(ws.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetrized_identical_bases_are_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = FiniteState::random(3, &mut rng);
        let a = MeasBasis::random(3, &mut rng);
        let w = symmetrized_quasiprob(&s, &[a.clone(), a.clone(), a.clone()]).unwrap();
        let born = a.born(&s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let expect = if i == j && j == k { born[i] } else { 0.0 };
                    assert!((w.get(&[i, j, k]).unwrap() - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn symmetrized_errors() {
        let s = plus('z');
        assert!(symmetrized_quasiprob(&s, &[qubit('z')]).is_err());
        assert!(symmetrized_quasiprob(&s, &[qubit('z'), MeasBasis::computational(3)]).is_err());
    }

    #[test]
    fn permutation_enumeration() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn verify_marginals_cases() {
        let s = plus('y');
        let (a, b) = (qubit('z'), qubit('x'));
        let w = wigner_pair(&s, &a, &b).unwrap();
        let targets = MarginalSystem::new(
            vec![2, 2],
            vec![
                Marginal { vars: vec![0], table: a.born(&s).unwrap() },
                Marginal { vars: vec![1], table: b.born(&s).unwrap() },
            ],
        )
        .unwrap();
        assert!(verify_marginals(&w, &targets).unwrap() < 1e-10);

        let uniform = QuasiProbTable::new(vec![2, 3], vec![1.0 / 6.0; 6]).unwrap();
        let t = MarginalSystem::new(
            vec![2, 3],
            vec![
                Marginal { vars: vec![0], table: vec![0.5; 2] },
                Marginal { vars: vec![1], table: vec![1.0 / 3.0; 3] },
            ],
        )
        .unwrap();
        assert_eq!(verify_marginals(&uniform, &t).unwrap(), 0.0);

        let mut bent = uniform.clone();
        bent.set(&[1, 2], 1.0 / 6.0 + 1e-3).unwrap();
        assert!((verify_marginals(&bent, &t).unwrap() - 1e-3).abs() < 1e-12);

        let wrong = QuasiProbTable::new(vec![3, 2], vec![1.0 / 6.0; 6]).unwrap();
        assert!(matches!(verify_marginals(&wrong, &t), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn min_entry_cases() {
        let t = QuasiProbTable::new(vec![2, 2], vec![0.25; 4]).unwrap();
        assert_eq!(min_entry(&t), (0.25, vec![0, 0]));
        let t = QuasiProbTable::new(vec![2, 3], vec![0.2, 0.1, 0.3, 0.1, 0.2, 0.1]).unwrap();
        assert_eq!(min_entry(&t), (0.1, vec![0, 1]));
        let w = wigner_pair(&plus('x'), &qubit('z'), &qubit('z')).unwrap();
        assert!(min_entry(&w).0 >= 0.0);
    }

    #[test]
    fn marginal_system_validation() {
        assert!(MarginalSystem::new(vec![2], vec![Marginal { vars: vec![0], table: vec![0.5, 0.6] }]).is_err());
        assert!(matches!(
            MarginalSystem::new(vec![2], vec![Marginal { vars: vec![0], table: vec![0.5, 0.6] }]),
            Err(Error::InconsistentMarginals(_))
        ));
        assert!(MarginalSystem::new(vec![2], vec![Marginal { vars: vec![1], table: vec![0.5, 0.5] }]).is_err());
        assert!(MarginalSystem::new(vec![2, 2], vec![Marginal { vars: vec![0, 0], table: vec![0.25; 4] }]).is_err());
        assert!(MarginalSystem::new(vec![2], vec![Marginal { vars: vec![0], table: vec![1.5, -0.5] }]).is_err());
        assert!(MarginalSystem::new(vec![2, 2], vec![Marginal { vars: vec![0, 1], table: vec![0.5; 2] }]).is_err());
    }

    #[test]
    fn product_witness_for_disjoint_marginals() {
        let sys = MarginalSystem::new(
            vec![2, 3],
            vec![
                Marginal { vars: vec![0], table: vec![0.3, 0.7] },
                Marginal { vars: vec![1], table: vec![0.2, 0.5, 0.3] },
            ],
        )
        .unwrap();
        let Feasibility::Feasible { witness } = feasible_nonnegative_joint(&sys).unwrap() else {
            panic!("expected feasible");
        };
        assert!(verify_marginals(&witness, &sys).unwrap() < 1e-9);
        assert!(witness.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn three_way_correlation_feasibility() {
        let sys = MarginalSystem::pairwise_uniform(3, -0.5).unwrap();
        match feasible_nonnegative_joint(&sys).unwrap() {
            Feasibility::Infeasible { certificate } => {
                assert!(certificate.verify(&sys));
                assert!(certificate.b_dot_y > 1e-3);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        let sys = MarginalSystem::pairwise_uniform(3, 0.0).unwrap();
        let Feasibility::Feasible { witness } = feasible_nonnegative_joint(&sys).unwrap() else {
            panic!("expected feasible");
        };
        assert!(verify_marginals(&witness, &sys).unwrap() < 1e-9);
    }

    #[test]
    fn lp_rejects_oversized_systems() {
        let sys = MarginalSystem::new(vec![2; 17], vec![]).unwrap();
        assert!(matches!(feasible_nonnegative_joint(&sys), Err(Error::TooLarge(_))));
    }

    #[test]
    fn lp_handles_many_variables() {
        // 10 binary variables, chain of pairwise correlations: feasible
        let sys = MarginalSystem::pairwise_correlated(10, &|i, j| if j == i + 1 { 0.5 } else { 0.0 }).unwrap();
        let f = feasible_nonnegative_joint(&sys).unwrap();
        let Feasibility::Feasible { witness } = f else { panic!("expected feasible") };
        assert!(verify_marginals(&witness, &sys).unwrap() < 1e-9);
    }

    #[test]
    fn observability_residual_cases() {
        let u = [0.5, 1.0, 2.0];
        let v = [1.0, 3.0];
        let rank1: Vec<Vec<Complex64>> = u.iter().map(|a| v.iter().map(|b| c(a * b, 0.0)).collect()).collect();
        let (ra, rb) = eqm_observability_residual(&rank1).unwrap();
        assert!(ra.iter().chain(&rb).all(|r| r.abs() < 1e-12));

        let id = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
        let (ra, rb) = eqm_observability_residual(&id).unwrap();
        assert!(ra.iter().chain(&rb).all(|r| r.abs() < 1e-12));

        let z = vec![vec![c(1.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]];
        let (ra, _) = eqm_observability_residual(&z).unwrap();
        assert!((ra[0] - (0.0 - 0.5)).abs() < 1e-12);
        assert!(ra[0].abs() > 1e-3);

        assert!(eqm_observability_residual(&vec![vec![c(0.0, 0.0); 2]; 2]).is_err());
        assert!(eqm_observability_residual(&[]).is_err());
    }

    #[test]
    fn serde_shapes() {
        let s = plus('y');
        let text = serde_json::to_string(&s).unwrap();
        let back: FiniteState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<FiniteState>("[[1.0, 0.0], [1.0, 0.0]]").is_err());
        let sys = MarginalSystem::pairwise_uniform(3, 0.2).unwrap();
        let text = serde_json::to_string(&sys).unwrap();
        assert_eq!(serde_json::from_str::<MarginalSystem>(&text).unwrap(), sys);
        let f = feasible_nonnegative_joint(&MarginalSystem::pairwise_uniform(3, -0.9).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&f).unwrap();
        assert_eq!(v["status"], "infeasible");
    }
}
