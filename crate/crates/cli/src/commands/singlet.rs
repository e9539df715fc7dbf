use eqm_core::{
    build_singlet_entangled, build_singlet_factorized, evolve_bilinear_interaction, models_agree, BilinearInteraction,
    DirectionFrame, SingletEntangled, SingletFactorized, SingletModel, Trials,
};
use serde::{Deserialize, Serialize};

use super::Experiment;
use crate::config::{complex_vec, resolve_directions, DirectionSpec};
use crate::error::{config, numeric, CliError};
use crate::output::{fmt_f64, RunContext};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingletParams {
    pub directions: Vec<DirectionSpec>,
    /// Index quadruples `(a, a', b, b')` into `directions`.
    #[serde(default)]
    pub chsh: Vec<[usize; 4]>,
    /// Random agreement trials; exhaustive when absent.
    #[serde(default)]
    pub agreement_trials: Option<usize>,
    #[serde(default)]
    pub evolution: Option<EvolutionSpec>,
}

/// Meter coupling demo: coefficients `[re, im]`, eigenvalues `d`, sample times.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    pub a: f64,
    pub coefficients: Vec<[f64; 2]>,
    pub d: Vec<f64>,
    pub kappa: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    pub times: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

pub struct Prepared {
    frame: DirectionFrame,
    entangled: SingletEntangled,
    factorized: SingletFactorized,
    chsh: Vec<[usize; 4]>,
    agreement_trials: Option<usize>,
    evolution: Option<(BilinearInteraction, Vec<f64>)>,
}

pub struct Singlet;

impl Experiment for Singlet {
    type Params = SingletParams;
    type Prepared = Prepared;

    fn prepare(p: &SingletParams) -> Result<Prepared, CliError> {
        let frame = DirectionFrame::new(resolve_directions(&p.directions)?).map_err(config)?;
        let n = frame.len();
        for quad in &p.chsh {
            if let Some(&bad) = quad.iter().find(|&&j| j >= n) {
                return Err(CliError::Config(format!("CHSH index {bad} out of range for {n} directions")));
            }
        }
        if p.agreement_trials == Some(0) {
            return Err(CliError::Config("agreement_trials must be positive".into()));
        }
        let evolution = match &p.evolution {
            Some(e) => {
                if e.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    return Err(CliError::Config("evolution times must be finite and non-negative".into()));
                }
                let params = BilinearInteraction::new(e.a, complex_vec(&e.coefficients), e.d.clone(), e.kappa, e.hbar)
                    .map_err(config)?;
                Some((params, e.times.clone()))
            }
            None => None,
        };
        Ok(Prepared {
            entangled: build_singlet_entangled(frame.clone()),
            factorized: build_singlet_factorized(frame.clone()),
            frame,
            chsh: p.chsh.clone(),
            agreement_trials: p.agreement_trials,
            evolution,
        })
    }

    fn execute(p: &Prepared, ctx: &mut RunContext) -> Result<(), CliError> {
        let tol = ctx.tolerances.probability();
        let n = p.frame.len();
        let mut rows = Vec::with_capacity(n * n);
        let mut worst_law: f64 = 0.0;
        let mut matrix = vec![vec![0.0; n]; n];
        for (i, row) in matrix.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let e = p.entangled.correlation(i, j).map_err(numeric)?;
                let f = p.factorized.correlation(i, j).map_err(numeric)?;
                let law = -p.frame.direction(i).map_err(numeric)?.dot(p.frame.direction(j).map_err(numeric)?);
                worst_law = worst_law.max((e - law).abs()).max((f - law).abs());
                *cell = e;
                rows.push(vec![i.to_string(), j.to_string(), fmt_f64(e), fmt_f64(f), fmt_f64(law)]);
            }
        }
        ctx.csv("correlation.csv", &["i", "j", "entangled", "factorized", "minus_dot"], rows)?;
        ctx.metric("correlation_matrix", &matrix);
        ctx.metric("max_correlation_law_deviation", worst_law);
        ctx.require(worst_law <= tol, format!("E(i, j) deviates from -n_i·n_j by {worst_law:e}"));

        let trials = match p.agreement_trials {
            Some(count) => Trials::Random { count, seed: ctx.seed },
            None => Trials::Exhaustive,
        };
        let agreement = models_agree(&p.frame, trials).map_err(numeric)?;
        ctx.metric("model_agreement_max_deviation", agreement);
        ctx.require(agreement <= tol, format!("singlet models disagree by {agreement:e}"));

        if !p.chsh.is_empty() {
            let mut rows = Vec::new();
            let mut values = Vec::new();
            for &[a, ap, b, bp] in &p.chsh {
                let s = p.entangled.chsh_value(a, ap, b, bp).map_err(numeric)?;
                let sf = p.factorized.chsh_value(a, ap, b, bp).map_err(numeric)?;
                values.push(s);
                rows.push(vec![a.to_string(), ap.to_string(), b.to_string(), bp.to_string(), fmt_f64(s), fmt_f64(sf)]);
            }
            ctx.csv("chsh.csv", &["a", "a_prime", "b", "b_prime", "entangled", "factorized"], rows)?;
            ctx.metric("chsh", &values);
            ctx.metric("chsh_max_abs", values.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }

        if let Some((params, times)) = &p.evolution {
            let mut rows = Vec::new();
            for &t in times {
                let z = evolve_bilinear_interaction(params, t).map_err(numeric)?;
                for (j, v) in z.iter().enumerate() {
                    rows.push(vec![fmt_f64(t), j.to_string(), fmt_f64(v.re), fmt_f64(v.im), fmt_f64(v.norm_sqr())]);
                }
            }
            ctx.csv("evolution.csv", &["t", "j", "re", "im", "weight"], rows)?;
        }
        Ok(())
    }
}
