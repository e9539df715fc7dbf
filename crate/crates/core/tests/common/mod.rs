//! Brute-force oracles shared by the integration tests. Each one works from
//! the raw definitions (plain vectors, full enumeration) rather than the
//! optimized library paths.
#![allow(dead_code)]

use eqm_core::{Direction, DirectionFrame, MarginalSystem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

pub fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    let v: [f64; 3] = UnitSphere.sample(rng);
    Direction::normalized(v).unwrap()
}

pub fn random_frame<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DirectionFrame {
    DirectionFrame::new((0..n).map(|_| random_direction(rng)).collect()).unwrap()
}

/// All sign vectors of length `n`; entry `t` of the `k`-th vector is `−1`
/// when bit `t` of `k` is set.
pub fn all_signs(n: usize) -> Vec<Vec<i8>> {
    (0..1usize << n).map(|k| (0..n).map(|t| if k >> t & 1 == 1 { -1 } else { 1 }).collect()).collect()
}

fn bucket_index(signs: &[i8], subset: &[usize]) -> usize {
    subset.iter().enumerate().map(|(t, &j)| if signs[j] < 0 { 1 << t } else { 0 }).sum()
}

/// `Σ_j s_j n_j` as a plain 3-vector (the pure part of the elementary amplitude).
pub fn amplitude_vector(dirs: &[[f64; 3]], signs: &[i8]) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (n, &s) in dirs.iter().zip(signs) {
        for a in 0..3 {
            v[a] += s as f64 * n[a];
        }
    }
    v
}

fn norm_sq(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Born probabilities over `subset` for the state whose support is the set
/// of sign vectors accepted by `keep`: sum amplitudes per outcome, then square.
pub fn brute_marginal(dirs: &[[f64; 3]], keep: impl Fn(&[i8]) -> bool, subset: &[usize]) -> Vec<f64> {
    let mut buckets = vec![[0.0; 3]; 1 << subset.len()];
    for signs in all_signs(dirs.len()) {
        if !keep(&signs) {
            continue;
        }
        let v = amplitude_vector(dirs, &signs);
        let b = &mut buckets[bucket_index(&signs, subset)];
        for a in 0..3 {
            b[a] += v[a];
        }
    }
    let w: Vec<f64> = buckets.into_iter().map(norm_sq).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Singlet joint probability from the full `(α, β)` pair space: amplitude
/// `Z(α)` when `β = −α`, zero otherwise.
pub fn singlet_joint_bruteforce(dirs: &[[f64; 3]], i: usize, j: usize) -> [[f64; 2]; 2] {
    let configs = all_signs(dirs.len());
    let mut buckets = [[[0.0; 3]; 2]; 2];
    for alpha in &configs {
        for beta in &configs {
            if alpha.iter().zip(beta).any(|(a, b)| *a != -*b) {
                continue;
            }
            let v = amplitude_vector(dirs, alpha);
            let (ra, rb) = ((alpha[i] < 0) as usize, (beta[j] < 0) as usize);
            for a in 0..3 {
                buckets[ra][rb][a] += v[a];
            }
        }
    }
    let mut p = [[0.0; 2]; 2];
    let mut total = 0.0;
    for ra in 0..2 {
        for rb in 0..2 {
            p[ra][rb] = norm_sq(buckets[ra][rb]);
            total += p[ra][rb];
        }
    }
    p.map(|row| row.map(|x| x / total))
}

/// Dense `A x = b` for a marginal system: one row per marginal cell, then
/// the normalization row; joint cells row-major.
pub fn constraint_system(system: &MarginalSystem) -> (DMatrix<f64>, DVector<f64>) {
    let cells: usize = system.arities.iter().product();
    let digits = |mut k: usize| {
        let mut d = vec![0; system.arities.len()];
        for a in (0..d.len()).rev() {
            d[a] = k % system.arities[a];
            k /= system.arities[a];
        }
        d
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    for m in &system.marginals {
        for (cell, &target) in m.table.iter().enumerate() {
            let mut row = vec![0.0; cells];
            for (j, r) in row.iter_mut().enumerate() {
                let d = digits(j);
                let flat = m.vars.iter().fold(0, |acc, &v| acc * system.arities[v] + d[v]);
                if flat == cell {
                    *r = 1.0;
                }
            }
            rows.push(row);
            b.push(target);
        }
    }
    rows.push(vec![1.0; cells]);
    b.push(1.0);
    let a = DMatrix::from_fn(rows.len(), cells, |r, c| rows[r][c]);
    (a, DVector::from_vec(b))
}

/// Feasibility by enumerating every basic solution: the polytope
/// `{x ≥ 0 : Ax = b}` is nonempty iff some linearly independent column
/// subset solves the system with nonnegative weights.
pub fn vertex_enumeration_feasible(system: &MarginalSystem) -> bool {
    let (a, b) = constraint_system(system);
    let cols = a.ncols();
    assert!(cols <= 16, "oracle limited to small joints");
    for subset in 1..1u32 << cols {
        let idx: Vec<usize> = (0..cols).filter(|&c| subset >> c & 1 == 1).collect();
        let sub = a.select_columns(&idx);
        let svd = sub.clone().svd(true, true);
        let rank = svd.rank(1e-10);
        if rank != idx.len() {
            continue;
        }
        let x = svd.solve(&b, 1e-10).unwrap();
        let residual = (&sub * &x - &b).amax();
        if residual < 1e-9 && x.iter().all(|&v| v >= -1e-12) {
            return true;
        }
    }
    false
}
