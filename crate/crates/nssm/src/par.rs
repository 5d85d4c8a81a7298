//! Parallel drivers over origins, draws and bootstrap replicates.
//!
//! Every work unit draws from its own seeded stream, so results match the
//! sequential core functions for any thread count.

use nssm_core::evalharness::{
    bootstrap_replicate, paired_deltas, percentile_ci, score_origin, BootstrapConfig, DeltaSummary, EvalPlan, EvalReport,
    Forecaster, Metric, PoissonForecaster, Prediction,
};
use nssm_core::linalg::Matrix;
use nssm_core::poissonmodel::DrawPath;
use nssm_core::{stats, Error, Result};
use rayon::prelude::*;

/// Threads from the flag, then `NSSM_THREADS`, then all cores (0).
pub fn resolve_threads(flag: Option<usize>, config: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("NSSM_THREADS").ok().and_then(|v| v.parse().ok())).or(config).unwrap_or(0)
}

pub fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

pub fn rolling_eval(forecaster: &(dyn Forecaster + Sync), panel: &Matrix, plan: &EvalPlan) -> Result<EvalReport> {
    plan.validate(panel.rows())?;
    let results = plan
        .origins
        .par_iter()
        .map(|&t| score_origin(t, forecaster.forecast(t, &plan.horizons), panel, plan))
        .collect();
    Ok(EvalReport::assemble(plan.clone(), results))
}

/// Poisson forecaster that simulates draws in parallel.
pub struct ParPoisson<'a>(pub PoissonForecaster<'a>);

impl Forecaster for ParPoisson<'_> {
    fn forecast(&self, origin: usize, horizons: &[usize]) -> Result<Vec<Prediction>> {
        let ctx = self.0.context(origin, horizons.last().copied().unwrap_or(0))?;
        let paths: Vec<DrawPath> = (0..self.0.draws).into_par_iter().map(|s| ctx.draw(s)).collect();
        PoissonForecaster::predictions(horizons, ctx.assemble(&paths))
    }
}

pub fn block_bootstrap_ci(deltas: &[f64], cfg: &BootstrapConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    if deltas.is_empty() {
        return Err(Error::InvalidInput(String::from("bootstrap needs at least one delta")));
    }
    let means: Vec<f64> =
        (0..cfg.replicates).into_par_iter().map(|b| bootstrap_replicate(deltas, cfg.block_len, cfg.seed, b)).collect();
    Ok(percentile_ci(means, cfg.level))
}

pub fn compare(a: &EvalReport, b: &EvalReport, metric: Metric, cfg: &BootstrapConfig) -> Result<Vec<DeltaSummary>> {
    a.plan
        .horizons
        .iter()
        .map(|&h| {
            let d: Vec<f64> = paired_deltas(a, b, metric, h).into_iter().map(|(_, v)| v).collect();
            let (lo, hi) = block_bootstrap_ci(&d, cfg)?;
            Ok(DeltaSummary { horizon: h, metric, n: d.len(), delta: stats::mean(&d), lo, hi })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nssm_core::evalharness;

    #[test]
    fn parallel_bootstrap_matches_sequential() {
        let d: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let cfg = BootstrapConfig { block_len: 4, replicates: 300, seed: 9, level: 0.9 };
        let seq = evalharness::block_bootstrap_ci(&d, 4, 300, 9, 0.9).unwrap();
        for threads in [1, 3] {
            assert_eq!(pool(threads).install(|| block_bootstrap_ci(&d, &cfg)).unwrap(), seq);
        }
    }

    #[test]
    fn thread_resolution_order() {
        assert_eq!(resolve_threads(Some(3), Some(5)), 3);
    }
}
