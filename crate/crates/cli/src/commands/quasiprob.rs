use eqm_core::{
    eqm_observability_residual, feasible_nonnegative_joint, min_entry, symmetrized_quasiprob, verify_marginals,
    Feasibility, FiniteState, Marginal, MarginalSystem, MeasBasis,
};
use serde::{Deserialize, Serialize};

use super::Experiment;
use crate::config::complex_vec;
use crate::error::{config, numeric, CliError};
use crate::output::{fmt_f64, RunContext};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiProbParams {
    /// State coefficients as `[re, im]`; rescaled to unit norm.
    #[serde(default)]
    pub state: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub bases: Vec<BasisSpec>,
    #[serde(default)]
    pub lp: Option<LpSpec>,
    /// Amplitude matrix `z_ij` as `[re, im]` entries.
    #[serde(default)]
    pub observability: Option<Vec<Vec<[f64; 2]>>>,
}

/// `"computational"`, `"fourier"`, a qubit axis `"x"`/`"y"`/`"z"`, or explicit basis vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Named(String),
    Vectors(Vec<Vec<[f64; 2]>>),
}

impl BasisSpec {
    fn resolve(&self, d: usize) -> Result<MeasBasis, CliError> {
        match self {
            BasisSpec::Named(name) => match name.as_str() {
                "computational" => Ok(MeasBasis::computational(d)),
                "fourier" => Ok(MeasBasis::fourier(d)),
                "x" | "y" | "z" if d == 2 => MeasBasis::qubit(name.chars().next().unwrap_or('z')).map_err(config),
                "x" | "y" | "z" => Err(CliError::Config(format!("qubit basis {name:?} needs dimension 2, got {d}"))),
                other => Err(CliError::Config(format!("unknown basis {other:?}"))),
            },
            BasisSpec::Vectors(vs) => MeasBasis::new(vs.iter().map(|v| complex_vec(v)).collect()).map_err(config),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LpSpec {
    PairwiseUniform { n: usize, c: f64 },
    Explicit { arities: Vec<usize>, marginals: Vec<Marginal> },
}

pub struct Prepared {
    quasi: Option<(FiniteState, Vec<MeasBasis>)>,
    lp: Option<MarginalSystem>,
    observability: Option<Vec<Vec<num_complex::Complex64>>>,
}

pub struct QuasiProb;

impl Experiment for QuasiProb {
    type Params = QuasiProbParams;
    type Prepared = Prepared;

    fn prepare(p: &QuasiProbParams) -> Result<Prepared, CliError> {
        if p.state.is_none() && p.lp.is_none() && p.observability.is_none() {
            return Err(CliError::Config("quasiprob needs a `state`, an `lp` or an `observability` block".into()));
        }
        let quasi = match &p.state {
            Some(coeffs) => {
                let state = FiniteState::normalized(complex_vec(coeffs)).map_err(config)?;
                if p.bases.len() < 2 {
                    return Err(CliError::Config("a quasi-probability table needs at least two bases".into()));
                }
                let bases = p.bases.iter().map(|b| b.resolve(state.dim())).collect::<Result<Vec<_>, _>>()?;
                Some((state, bases))
            }
            None if !p.bases.is_empty() => return Err(CliError::Config("`bases` given without a `state`".into())),
            None => None,
        };
        let lp = match &p.lp {
            Some(LpSpec::PairwiseUniform { n, c }) => {
                if *n < 2 || !(c.abs() <= 1.0) {
                    return Err(CliError::Config(format!(
                        "pairwise_uniform needs n >= 2 and |c| <= 1, got n = {n}, c = {c}"
                    )));
                }
                Some(MarginalSystem::pairwise_uniform(*n, *c).map_err(config)?)
            }
            Some(LpSpec::Explicit { arities, marginals }) => {
                Some(MarginalSystem::new(arities.clone(), marginals.clone()).map_err(config)?)
            }
            None => None,
        };
        let observability = p.observability.as_ref().map(|z| z.iter().map(|r| complex_vec(r)).collect());
        Ok(Prepared { quasi, lp, observability })
    }

    fn execute(p: &Prepared, ctx: &mut RunContext) -> Result<(), CliError> {
        if let Some((state, bases)) = &p.quasi {
            let table = symmetrized_quasiprob(state, bases).map_err(numeric)?;
            let shape = table.shape().to_vec();
            let mut header: Vec<String> = (0..shape.len()).map(|k| format!("a_{k}")).collect();
            header.push("value".into());
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = table.values().iter().enumerate().map(|(flat, v)| {
                let mut idx = vec![0; shape.len()];
                let mut rest = flat;
                for k in (0..shape.len()).rev() {
                    idx[k] = rest % shape[k];
                    rest /= shape[k];
                }
                let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                row.push(fmt_f64(*v));
                row
            });
            ctx.csv("table.csv", &header_refs, rows)?;

            // single-basis marginals must reproduce the Born rule
            let singles = bases
                .iter()
                .enumerate()
                .map(|(k, b)| Ok(Marginal { vars: vec![k], table: b.born(state).map_err(numeric)? }))
                .collect::<Result<Vec<_>, CliError>>()?;
            let born = MarginalSystem::new(shape, singles).map_err(numeric)?;
            let deviation = verify_marginals(&table, &born).map_err(numeric)?;
            let (min, at) = min_entry(&table);
            ctx.metric("min_entry", min);
            ctx.metric("min_entry_index", &at);
            ctx.metric("has_negative_entry", min < 0.0);
            ctx.metric("total", table.total());
            ctx.metric("imag_residue", table.imag_residue());
            ctx.metric("born_marginal_deviation", deviation);
            let tol = ctx.tolerances.marginal();
            ctx.require(deviation <= tol, format!("single-basis marginals deviate from Born by {deviation:e}"));
        }

        if let Some(system) = &p.lp {
            let result = feasible_nonnegative_joint(system).map_err(numeric)?;
            match &result {
                Feasibility::Feasible { witness } => {
                    let deviation = verify_marginals(witness, system).map_err(numeric)?;
                    let (min, _) = min_entry(witness);
                    ctx.metric("lp_feasible", true);
                    ctx.metric("lp_witness_deviation", deviation);
                    ctx.require(min >= 0.0, format!("LP witness has a negative entry {min:e}"));
                    ctx.require(deviation <= 1e-9, format!("LP witness misses a marginal by {deviation:e}"));
                }
                Feasibility::Infeasible { certificate } => {
                    ctx.metric("lp_feasible", false);
                    ctx.metric("lp_certificate_b_dot_y", certificate.b_dot_y);
                    ctx.require(certificate.verify(system), "Farkas certificate does not verify");
                }
            }
            ctx.json("lp.json", &result)?;
        }

        if let Some(z) = &p.observability {
            let (ra, rb) = eqm_observability_residual(z).map_err(numeric)?;
            let rows = ra
                .iter()
                .enumerate()
                .map(|(i, r)| vec!["a".to_string(), i.to_string(), fmt_f64(*r)])
                .chain(rb.iter().enumerate().map(|(j, r)| vec!["b".to_string(), j.to_string(), fmt_f64(*r)]));
            ctx.csv("observability.csv", &["side", "index", "residual"], rows)?;
            let worst = ra.iter().chain(&rb).map(|r| r.abs()).fold(0.0, f64::max);
            ctx.metric("max_observability_residual", worst);
        }
        Ok(())
    }
}
