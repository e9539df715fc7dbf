use eqm_core::twoslit::{central_visibility, incoherent_intensity, phase_averaged_intensity, smoothed_visibility};
use eqm_core::{
    coherent_intensity, ensemble_histogram, negative_detection_condition, path_amplitude, slit_probabilities,
    DecoherenceModel, PhaseDistribution, Slit, SlitAmplitude, SlitGeometry,
};
use serde::{Deserialize, Serialize};

use super::Experiment;
use crate::error::{config, numeric, CliError};
use crate::output::{fmt_f64, RunContext};

/// Histogram bins further than this many standard errors from the expected
/// density count as a contract failure.
const MAX_SIGMA: f64 = 5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoSlitParams {
    /// Defaults to the standard symmetric geometry.
    #[serde(default)]
    pub geometry: Option<SlitGeometry>,
    #[serde(default = "uniform")]
    pub phase: PhaseDistribution,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Also condition on not finding the particle at this slit.
    #[serde(default)]
    pub blocked: Option<Slit>,
}

fn uniform() -> PhaseDistribution {
    PhaseDistribution::Uniform
}

fn default_runs() -> usize {
    100_000
}

pub struct Prepared {
    geometry: SlitGeometry,
    phase: PhaseDistribution,
    runs: usize,
    blocked: Option<Slit>,
}

fn curve_rows<'a>(q: &'a [f64], v: &'a [f64]) -> impl Iterator<Item = Vec<String>> + 'a {
    q.iter().zip(v).map(|(q, v)| vec![fmt_f64(*q), fmt_f64(*v)])
}

pub struct TwoSlit;

impl Experiment for TwoSlit {
    type Params = TwoSlitParams;
    type Prepared = Prepared;

    fn prepare(p: &TwoSlitParams) -> Result<Prepared, CliError> {
        let geometry = p.geometry.unwrap_or_else(SlitGeometry::standard);
        geometry.validate().map_err(config)?;
        p.phase.validate().map_err(config)?;
        if p.runs == 0 {
            return Err(CliError::Config("runs must be at least 1".into()));
        }
        Ok(Prepared { geometry, phase: p.phase, runs: p.runs, blocked: p.blocked })
    }

    fn execute(p: &Prepared, ctx: &mut RunContext) -> Result<(), CliError> {
        let amp: SlitAmplitude = path_amplitude(&p.geometry).map_err(numeric)?;
        let g = &amp.geometry;
        let coherent = coherent_intensity(&amp).map_err(numeric)?;
        let incoherent = incoherent_intensity(&amp).map_err(numeric)?;
        let expected = phase_averaged_intensity(&amp, &p.phase).map_err(numeric)?;
        let (pl, pr) = slit_probabilities(&amp).map_err(numeric)?;
        for (name, curve) in
            [("coherent.csv", &coherent), ("incoherent.csv", &incoherent), ("phase_averaged.csv", &expected)]
        {
            ctx.csv(name, &["q", "value"], curve_rows(&amp.q, curve))?;
        }
        ctx.metric("aperture_points", amp.aperture_points);
        ctx.metric("slit_probabilities", [pl, pr]);
        // analytic curves carry no sampling noise, so they are read unsmoothed
        ctx.metric("coherent_visibility", central_visibility(&coherent, g));
        ctx.metric("coherent_smoothed_visibility", smoothed_visibility(&coherent, g));
        ctx.metric("incoherent_visibility", central_visibility(&incoherent, g));
        ctx.metric("expected_visibility", central_visibility(&expected, g));

        let model = DecoherenceModel { phase: p.phase, seed: ctx.seed };
        let hist = ensemble_histogram(&amp, &model, p.runs).map_err(numeric)?;
        let freq = hist.frequencies();
        let n = p.runs as f64;
        let mut worst_sigma: f64 = 0.0;
        for i in 0..freq.len() {
            let e = expected[i];
            let se = (e * (1.0 - e) / n).sqrt();
            let dev = (freq[i] - e).abs();
            if se > 0.0 {
                worst_sigma = worst_sigma.max(dev / se);
            } else if hist.counts[i] > 0 {
                worst_sigma = f64::INFINITY;
            }
        }
        ctx.csv("histogram.csv", &["q", "value"], curve_rows(&amp.q, &freq))?;
        ctx.json("ensemble.json", &hist)?;
        ctx.metric("runs", p.runs);
        ctx.metric("histogram_visibility", hist.visibility);
        ctx.metric("histogram_max_sigma", if worst_sigma.is_finite() { Some(worst_sigma) } else { None });
        ctx.require(
            worst_sigma < MAX_SIGMA,
            format!("histogram bin {worst_sigma:.2} standard errors from the expected density"),
        );

        if let Some(blocked) = p.blocked {
            let cond = negative_detection_condition(&amp, blocked).map_err(numeric)?;
            ctx.csv("negative_detection.csv", &["q", "value"], curve_rows(&amp.q, &cond.intensity))?;
            ctx.metric("negative_detection_survival", cond.survival);
            ctx.metric("negative_detection_visibility", central_visibility(&cond.intensity, g));
        }
        Ok(())
    }
}
