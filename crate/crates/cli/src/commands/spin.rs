use std::collections::BTreeMap;

use eqm_core::{
    born_probabilities, build_eigenstate, build_isotropic, interference_residual_3, marginal_consistency_residual,
    marginal_probabilities, project_marginal, Direction, DirectionFrame, ExtendedSpinState,
};
use serde::{Deserialize, Serialize};

use super::Experiment;
use crate::config::{resolve_directions, DirectionSpec};
use crate::error::{config, numeric, CliError};
use crate::output::{fmt_f64, RunContext};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinParams {
    #[serde(default)]
    pub directions: Vec<DirectionSpec>,
    #[serde(default)]
    pub state: Option<StateSpec>,
    /// Direction subsets to project onto; defaults to every single direction.
    #[serde(default)]
    pub projections: Vec<Vec<usize>>,
    #[serde(default)]
    pub consistency_pairs: Vec<[usize; 2]>,
    #[serde(default)]
    pub interference_triples: Vec<[usize; 3]>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Eigenstate { axis: usize, sign: i8 },
    Isotropic,
}

/// `+z` eigenstate with a second direction at each polar angle in the xz plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub angles_deg: Vec<f64>,
    /// Further frame directions, which must not affect the result.
    #[serde(default)]
    pub companions: Vec<DirectionSpec>,
}

pub struct Prepared {
    state: Option<(StateSpec, ExtendedSpinState)>,
    projections: Vec<Vec<usize>>,
    pairs: Vec<[usize; 2]>,
    triples: Vec<[usize; 3]>,
    sweep: Vec<(f64, ExtendedSpinState)>,
}

fn check_subset(subset: &[usize], n: usize) -> Result<(), CliError> {
    if subset.is_empty() {
        return Err(CliError::Config("empty projection subset".into()));
    }
    for (t, &j) in subset.iter().enumerate() {
        if j >= n {
            return Err(CliError::Config(format!("direction index {j} out of range for {n} directions")));
        }
        if subset[..t].contains(&j) {
            return Err(CliError::Config(format!("direction index {j} repeated in {subset:?}")));
        }
    }
    Ok(())
}

fn subset_name(subset: &[usize]) -> String {
    subset.iter().map(|j| j.to_string()).collect::<Vec<_>>().join("-")
}

pub struct Spin;

impl Experiment for Spin {
    type Params = SpinParams;
    type Prepared = Prepared;

    fn prepare(p: &SpinParams) -> Result<Prepared, CliError> {
        if p.state.is_none() && p.sweep.is_none() {
            return Err(CliError::Config("spin needs a `state`, a `sweep`, or both".into()));
        }
        let state = match p.state {
            Some(spec) => {
                let frame = DirectionFrame::new(resolve_directions(&p.directions)?).map_err(config)?;
                let state = match spec {
                    StateSpec::Eigenstate { axis, sign } => build_eigenstate(frame, axis, sign).map_err(config)?,
                    StateSpec::Isotropic => build_isotropic(frame),
                };
                Some((spec, state))
            }
            None => None,
        };
        let n = state.as_ref().map_or(0, |(_, s)| s.frame().len());
        let needs_state =
            !(p.projections.is_empty() && p.consistency_pairs.is_empty() && p.interference_triples.is_empty());
        if state.is_none() && needs_state {
            return Err(CliError::Config("projections and residuals need a `state`".into()));
        }
        let projections =
            if p.projections.is_empty() { (0..n).map(|j| vec![j]).collect() } else { p.projections.clone() };
        for s in &projections {
            check_subset(s, n)?;
        }
        for pair in &p.consistency_pairs {
            check_subset(pair, n)?;
        }
        for triple in &p.interference_triples {
            check_subset(triple, n)?;
        }

        let mut sweep = Vec::new();
        if let Some(spec) = &p.sweep {
            if spec.angles_deg.is_empty() || spec.angles_deg.iter().any(|a| !a.is_finite()) {
                return Err(CliError::Config("sweep needs finite angles".into()));
            }
            let companions = resolve_directions(&spec.companions)?;
            for &deg in &spec.angles_deg {
                let mut dirs = vec![Direction::Z, Direction::in_xz_plane(deg.to_radians())];
                dirs.extend(&companions);
                let frame = DirectionFrame::new(dirs).map_err(config)?;
                sweep.push((deg, build_eigenstate(frame, 0, 1).map_err(config)?));
            }
        }
        Ok(Prepared {
            state,
            projections,
            pairs: p.consistency_pairs.clone(),
            triples: p.interference_triples.clone(),
            sweep,
        })
    }

    fn execute(p: &Prepared, ctx: &mut RunContext) -> Result<(), CliError> {
        let tol = ctx.tolerances.probability();
        if let Some((spec, state)) = &p.state {
            let mut marginals = BTreeMap::new();
            for subset in &p.projections {
                let table = project_marginal(state, subset).map_err(numeric)?;
                let probs = born_probabilities(&table).map_err(numeric)?;
                let mut header: Vec<String> = subset.iter().map(|j| format!("s_{j}")).collect();
                header.extend(["w", "x", "y", "z", "probability"].map(String::from));
                let rows = probs.entries().zip(table.amplitudes()).map(|((signs, prob), q)| {
                    let mut row: Vec<String> = signs.iter().map(|s| s.to_string()).collect();
                    row.extend(q.to_array().iter().map(|&v| fmt_f64(v)));
                    row.push(fmt_f64(prob));
                    row
                });
                let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
                ctx.csv(&format!("marginal_{}.csv", subset_name(subset)), &header_refs, rows)?;
                marginals.insert(subset_name(subset), probs.values().to_vec());
            }
            ctx.metric("marginal_probabilities", &marginals);

            let n = state.frame().len();
            match *spec {
                StateSpec::Eigenstate { axis, sign } => {
                    let p_axis =
                        marginal_probabilities(state, &[axis]).map_err(numeric)?.get(&[sign]).map_err(numeric)?;
                    ctx.metric("eigen_axis_probability", p_axis);
                    ctx.require((p_axis - 1.0).abs() <= tol, format!("P(s_{axis} = {sign}) = {p_axis}, expected 1"));
                }
                StateSpec::Isotropic => {
                    let mut worst: f64 = 0.0;
                    for j in 0..n {
                        let probs = marginal_probabilities(state, &[j]).map_err(numeric)?;
                        worst = worst.max(probs.values().iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max));
                    }
                    ctx.metric("isotropic_max_deviation", worst);
                    ctx.require(worst <= tol, format!("single-direction probabilities deviate from 1/2 by {worst:e}"));
                }
            }

            let mut rows = Vec::new();
            let mut worst_consistency: f64 = 0.0;
            for &[i, j] in &p.pairs {
                let r = marginal_consistency_residual(state, i, j).map_err(numeric)?;
                worst_consistency = worst_consistency.max(r);
                rows.push(vec![
                    "consistency".into(),
                    i.to_string(),
                    j.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    fmt_f64(r),
                ]);
            }
            let mut worst_interference: f64 = 0.0;
            for &[i, j, k] in &p.triples {
                let table = interference_residual_3(state, i, j, k).map_err(numeric)?;
                for (signs, v) in table.entries() {
                    worst_interference = worst_interference.max(v.abs());
                    rows.push(vec![
                        "interference".into(),
                        i.to_string(),
                        j.to_string(),
                        k.to_string(),
                        signs[0].to_string(),
                        signs[1].to_string(),
                        fmt_f64(v),
                    ]);
                }
            }
            if !rows.is_empty() {
                ctx.csv("residuals.csv", &["kind", "i", "j", "k", "s_i", "s_j", "value"], rows)?;
            }
            if !p.pairs.is_empty() {
                ctx.metric("max_consistency_residual", worst_consistency);
            }
            if !p.triples.is_empty() {
                ctx.metric("max_interference_residual", worst_interference);
            }
        }

        if !p.sweep.is_empty() {
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for (deg, state) in &p.sweep {
                let probs = marginal_probabilities(state, &[1]).map_err(numeric)?;
                let (plus, minus) = (probs.get(&[1]).map_err(numeric)?, probs.get(&[-1]).map_err(numeric)?);
                let expect = (1.0 + deg.to_radians().cos()) / 2.0;
                worst = worst.max((plus - expect).abs()).max((minus - (1.0 - expect)).abs());
                rows.push(vec![fmt_f64(*deg), fmt_f64(plus), fmt_f64(minus), fmt_f64(expect)]);
            }
            ctx.csv("sweep.csv", &["theta_deg", "p_plus", "p_minus", "expected_plus"], rows)?;
            ctx.metric("sweep_max_deviation", worst);
            ctx.require(worst <= tol, format!("sweep deviates from (1 + cos θ)/2 by {worst:e}"));
        }
        Ok(())
    }
}
