use eqm_core::phase_space::{gaussian_window, GaussianSpec};
use eqm_core::{
    commutator_residual, lift, lift_momentum, project_to_momentum, project_to_position, q_invariant_subspace_check,
    AlphaSplit, AxisWavefunction, ExtendedWavefunction, PhaseGrid,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Experiment;
use crate::error::{config, numeric, CliError};
use crate::output::{fmt_f64, RunContext};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceParams {
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Gaussian test state; the standard one when absent.
    #[serde(default)]
    pub state: Option<GaussianSpec>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// Width of the unit-normalized Gaussian windows used for round trips.
    #[serde(default = "one")]
    pub window_sigma: f64,
    /// Column index for the Q-invariant subspace check; grid center when absent.
    #[serde(default)]
    pub q_index: Option<usize>,
    /// Also write the sampled state (`state.bin`, `state.csv`).
    #[serde(default)]
    pub write_state: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_q: usize,
    pub n_p: usize,
    pub q_range: [f64; 2],
    pub p_range: [f64; 2],
    #[serde(default = "one")]
    pub hbar: f64,
}

fn default_alphas() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn one() -> f64 {
    1.0
}

pub struct Prepared {
    grid: PhaseGrid,
    state: ExtendedWavefunction,
    spec: GaussianSpec,
    splits: Vec<AlphaSplit>,
    window_sigma: f64,
    q_index: usize,
    write_state: bool,
}

pub struct PhaseSpace;

impl Experiment for PhaseSpace {
    type Params = PhaseSpaceParams;
    type Prepared = Prepared;

    fn prepare(p: &PhaseSpaceParams) -> Result<Prepared, CliError> {
        let grid = match p.grid {
            Some(g) => PhaseGrid::new(g.n_q, g.n_p, (g.q_range[0], g.q_range[1]), (g.p_range[0], g.p_range[1]), g.hbar)
                .map_err(config)?,
            None => PhaseGrid::standard(),
        };
        let spec = p.state.unwrap_or(GaussianSpec::STANDARD);
        if !(spec.sigma_q > 0.0 && spec.sigma_p > 0.0) {
            return Err(CliError::Config("Gaussian widths must be positive".into()));
        }
        if p.alphas.is_empty() {
            return Err(CliError::Config("alphas must not be empty".into()));
        }
        let splits = p.alphas.iter().map(|&a| AlphaSplit::from_alpha(a).map_err(config)).collect::<Result<_, _>>()?;
        if !(p.window_sigma > 0.0 && p.window_sigma.is_finite()) {
            return Err(CliError::Config("window_sigma must be positive".into()));
        }
        let q_index = p.q_index.unwrap_or(grid.n_q() / 2);
        if q_index >= grid.n_q() {
            return Err(CliError::Config(format!("q_index {q_index} out of range for {} points", grid.n_q())));
        }
        Ok(Prepared {
            state: spec.sample(grid),
            grid,
            spec,
            splits,
            window_sigma: p.window_sigma,
            q_index,
            write_state: p.write_state,
        })
    }

    fn execute(p: &Prepared, ctx: &mut RunContext) -> Result<(), CliError> {
        let g = p.grid;
        let s = p.spec;
        let chi = gaussian_window(&g.p_axis(), g.dp(), 0.0, p.window_sigma);
        let phi = gaussian_window(&g.q_axis(), g.dq(), 0.0, p.window_sigma);
        let psi = AxisWavefunction::from_fn(&g.q_axis(), g.dq(), |q| {
            Complex64::from_polar((-(q - s.q0).powi(2) / (2.0 * s.sigma_q.powi(2))).exp(), s.k_q * q)
        })
        .normalized();
        let xi = AxisWavefunction::from_fn(&g.p_axis(), g.dp(), |pv| {
            Complex64::from_polar((-(pv - s.p0).powi(2) / (2.0 * s.sigma_p.powi(2))).exp(), s.k_p * pv)
        })
        .normalized();
        // a single populated column with a p-profile taken from the test state
        let mut column = vec![Complex64::new(0.0, 0.0); g.len()];
        column[p.q_index * g.n_p()..(p.q_index + 1) * g.n_p()].copy_from_slice(&xi.values);
        let column = ExtendedWavefunction::new(g, column).map_err(numeric)?;

        let mut rows = Vec::new();
        let (mut worst_comm, mut worst_trip): (f64, f64) = (0.0, 0.0);
        let mut invariance_holds = true;
        for &split in &p.splits {
            let residual = commutator_residual(&p.state, split).map_err(numeric)?;
            let back =
                project_to_position(&lift(g, &psi, &chi, split).map_err(numeric)?, &chi, split).map_err(numeric)?;
            let pos = back.max_abs_diff(&psi);
            let back = project_to_momentum(&lift_momentum(g, &xi, &phi, split).map_err(numeric)?, &phi, split)
                .map_err(numeric)?;
            let mom = back.max_abs_diff(&xi);
            let report = q_invariant_subspace_check(&column, p.q_index, split).map_err(numeric)?;
            // α = 0 leaves Q acting as multiplication, so only support is required there
            let ok = report.support_preserved && (split.alpha() == 0.0 || report.nontrivial);
            invariance_holds &= ok;
            worst_comm = worst_comm.max(residual);
            worst_trip = worst_trip.max(pos).max(mom);
            rows.push(vec![
                fmt_f64(split.alpha()),
                fmt_f64(split.beta()),
                fmt_f64(residual),
                fmt_f64(pos),
                fmt_f64(mom),
                report.support_preserved.to_string(),
                report.nontrivial.to_string(),
            ]);
        }
        ctx.csv(
            "operators.csv",
            &[
                "alpha",
                "beta",
                "commutator_residual",
                "position_round_trip",
                "momentum_round_trip",
                "support_preserved",
                "nontrivial",
            ],
            rows,
        )?;
        ctx.metric("max_commutator_residual", worst_comm);
        ctx.metric("max_round_trip_deviation", worst_trip);
        ctx.metric("q_invariance_holds", invariance_holds);
        let (tc, tr) = (ctx.tolerances.commutator(), ctx.tolerances.round_trip());
        ctx.require(worst_comm < tc, format!("commutator residual {worst_comm:e} exceeds {tc:e}"));
        ctx.require(worst_trip < tr, format!("round trip deviation {worst_trip:e} exceeds {tr:e}"));
        ctx.require(invariance_holds, "Q-invariant subspace check failed");

        if p.write_state {
            let state = &p.state;
            ctx.raw("state.bin", |w| state.write_binary(w))?;
            ctx.raw("state.csv", |w| state.write_csv(w))?;
        }
        Ok(())
    }
}
