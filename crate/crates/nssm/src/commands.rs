//! Subcommand implementations. Each writes its files and a manifest into
//! the output directory.

use std::path::{Path, PathBuf};

use nssm_core::design::{ColumnLabel, DesignRecipe};
use nssm_core::diagnostics::{default_thresholds, detect_breaks, hop_coefficients, irf, macro_irf, rate_threshold, stability_report};
use nssm_core::evalharness::{
    paired_deltas, stress_suite, CellScores, DeltaSummary, EvalPlan, EvalReport, Forecaster, GaussianForecaster,
    HorizonSummary, Metric, OlsForecaster, PanelData, PoissonForecaster, Prediction, ScoreKind, StressArm,
};
use nssm_core::gaussmodel::{covariates_at, fit_gaussian, forecast_gaussian, ForecastInputs, NetworkPolicy};
use nssm_core::graph::{invariant_vector, NetworkSeq, WeightMatrix, DEFAULT_TOL};
use nssm_core::lgss::{rts_smooth, Belief, FilterRun};
use nssm_core::linalg::Matrix;
use nssm_core::poissonmodel::{ensemble_stats, fit_poisson, DrawPath, ForecastEnsemble, McContext};
use nssm_core::rng::derive_seed;
use nssm_core::simulate::{
    burn_in, dynamic_networks, gen_coeff_paths, gen_dynamic_edges, gen_gaussian_panel, gen_graph, gen_poisson_panel,
    GaussianPanelSpec, GraphGen, PoissonPanelSpec,
};
use nssm_core::tensorcp::{cp_filter_alternating, cp_reconstruct, sign_fix, state_dim, CpFilterRun, Mode};
use nssm_core::{stats, Error as CoreError, Result as CoreResult};
use rayon::prelude::*;
use serde_json::json;

use crate::cli::{Cli, Command, DataArgs, EvalArgs, FitArgs, ForecastArgs, PerturbArgs};
use crate::config::{Baseline, EvalConfig, Family, ModelConfig, ModelKind, RunConfig, SimConfig};
use crate::data::{self, fmt, CsvOut};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::par;

/// Resolved settings shared by every subcommand.
pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub threads: usize,
    pub verbose: u8,
}

impl Ctx {
    fn say(&self, msg: &str) {
        if self.verbose > 0 {
            eprintln!("nssm: {msg}");
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config_path = match &cli.command {
        Command::Simulate(a) => a.config.clone(),
        Command::Fit(a) => Some(a.data.config.clone()),
        Command::Forecast(a) => Some(a.data.config.clone()),
        Command::Evaluate(a) => Some(a.data.config.clone()),
        Command::Diagnose(a) | Command::Irf(a) => Some(a.config.clone()),
        Command::Perturb(a) => Some(a.config.clone()),
    };
    let config = match &config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse("{}")?,
    };
    let ctx = Ctx {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        threads: par::resolve_threads(cli.threads, config.threads),
        verbose: cli.verbose,
        config,
    };
    let mut out = Outputs::new(cli.command.name(), &ctx, out_dir(&cli.command))?;
    if let Some(p) = &config_path {
        out.manifest.add_input(p)?;
    }
    par::pool(ctx.threads).install(|| match &cli.command {
        Command::Simulate(_) => simulate(&ctx, &mut out),
        Command::Fit(a) => fit(&ctx, a, &mut out),
        Command::Forecast(a) => forecast(&ctx, a, &mut out),
        Command::Evaluate(a) => evaluate(&ctx, a, &mut out),
        Command::Diagnose(a) => diagnose(&ctx, a, &mut out),
        Command::Irf(a) => impulse(&ctx, a, &mut out),
        Command::Perturb(a) => perturb(&ctx, a, &mut out),
    })?;
    out.finish()
}

fn out_dir(c: &Command) -> &Path {
    match c {
        Command::Simulate(a) => &a.out,
        Command::Fit(a) => &a.data.out,
        Command::Forecast(a) => &a.data.out,
        Command::Evaluate(a) => &a.data.out,
        Command::Diagnose(a) | Command::Irf(a) => &a.out,
        Command::Perturb(a) => &a.out,
    }
}

/// Output directory plus the manifest that lists every file written.
pub struct Outputs {
    dir: PathBuf,
    names: Vec<PathBuf>,
    manifest: Manifest,
}

impl Outputs {
    fn new(command: &str, ctx: &Ctx, dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let config = serde_json::to_value(&ctx.config).expect("config serializes");
        Ok(Self { dir: dir.to_path_buf(), names: Vec::new(), manifest: Manifest::new(command, config, ctx.seed, ctx.threads) })
    }

    fn csv(&mut self, name: &str, header: &[&str]) -> CliResult<CsvOut> {
        self.names.push(PathBuf::from(name));
        CsvOut::create(&self.dir.join(name), header)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(PathBuf::from(name));
        self.dir.join(name)
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("json serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    fn finish(mut self) -> CliResult<()> {
        self.manifest.add_outputs(&self.dir, &self.names)?;
        self.manifest.write(&self.dir)?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn flag(b: bool) -> String {
    String::from(if b { "1" } else { "0" })
}

/// Quotes a free-text CSV field.
fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

// ---------------------------------------------------------------- inputs

struct Loaded {
    panel: Matrix,
    networks: NetworkSeq,
    covariates: Option<Vec<Matrix>>,
}

impl Loaded {
    fn data(&self) -> PanelData<'_> {
        PanelData { panel: &self.panel, networks: &self.networks, covariates: self.covariates.as_deref() }
    }
}

fn load(args: &DataArgs, recipe: &DesignRecipe, out: &mut Outputs) -> CliResult<Loaded> {
    let panel = data::read_panel(&args.panel)?;
    out.manifest.add_input(&args.panel)?;
    let (rows, n) = (panel.rows(), panel.cols());
    let networks = match &args.network {
        Some(p) => {
            let w = data::read_network(p, Some(n), Some(rows), !args.undirected)?;
            out.manifest.add_input(p)?;
            w.validate(n, rows).map_err(|e| CliError::input(p, e.to_string()))?;
            w
        }
        None if recipe.include_network_lags => {
            return Err(CliError::config("--network", "the model has network lag columns"));
        }
        None => NetworkSeq::Static(WeightMatrix::observed(Matrix::zeros(n, n))?),
    };
    let covariates = match (&args.covariates, recipe.covariate_count) {
        (Some(p), q) if q > 0 => {
            let z = data::read_covariates(p, n, q)?;
            out.manifest.add_input(p)?;
            Some(z)
        }
        (None, q) if q > 0 => return Err(CliError::config("--covariates", format!("model.covariates is {q}"))),
        _ => None,
    };
    Ok(Loaded { panel, networks, covariates })
}

fn model_recipe(model: &ModelConfig) -> DesignRecipe {
    match model.model {
        ModelKind::CpTvpvar => DesignRecipe { include_network_lags: false, ..model.recipe() },
        _ => model.recipe(),
    }
}

// -------------------------------------------------------------- simulate

fn simulate(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    let recipe = match &ctx.config.model {
        Some(m) => {
            let r = m.recipe();
            r.validate().map_err(|e| CliError::config("model", e.to_string()))?;
            r
        }
        None => DesignRecipe::default(),
    };
    let sim: SimConfig = match &ctx.config.simulation {
        Some(s) => s.clone(),
        None => {
            let family = match ctx.config.model.as_ref().map(|m| m.model) {
                Some(ModelKind::Poisson) => "poisson",
                _ => "gaussian",
            };
            serde_json::from_value(json!({ "family": family })).expect("default simulation section")
        }
    };
    sim.validate(&recipe)?;
    let total = sim.t + sim.burn_in;
    let n = sim.n_nodes;
    ctx.say(&format!("simulating {n} nodes over {total} rows"));
    let seed = ctx.seed;
    let (networks, adjacency) = match &sim.dynamic_edges {
        Some(spec) => {
            let edges = gen_dynamic_edges(spec, total, n, derive_seed(seed, "sim-edges", 0))?;
            let w = dynamic_networks(&edges)?;
            let adj: Vec<Matrix> = edges.adjacency[sim.burn_in..].iter().map(|a| a.entries().clone()).collect();
            (w, adj)
        }
        None => {
            let g = GraphGen { kind: sim.graph.clone(), n_nodes: n, seed: derive_seed(seed, "sim-graph", 0) };
            let (w, a) = gen_graph(&g)?;
            (NetworkSeq::Static(w), vec![a.entries().clone()])
        }
    };
    let coeff_spec = sim.coefficient_spec(recipe.n_columns())?;
    let coeffs = gen_coeff_paths(&coeff_spec, total, derive_seed(seed, "sim-coefficients", 0))?;
    let panel_seed = derive_seed(seed, "sim-panel", 0);
    let y = match sim.family {
        Family::Gaussian => {
            let mut spec = GaussianPanelSpec::new(recipe.clone(), sim.sigma2);
            spec.check_stability = false;
            gen_gaussian_panel(&networks, &coeffs.paths, &spec, panel_seed)?.y
        }
        Family::Poisson => {
            let mut spec = PoissonPanelSpec::new(recipe.clone());
            if let Some(cap) = sim.eta_cap {
                spec.eta_cap = cap;
            }
            gen_poisson_panel(&networks, &coeffs.paths, &spec, panel_seed)?.y
        }
    };
    let y = burn_in(&y, sim.burn_in)?;
    let paths = burn_in(&coeffs.paths, sim.burn_in)?;
    data::write_panel(&out.path("panel.csv"), &y)?;
    data::write_edges(&out.path("network.csv"), &adjacency.iter().collect::<Vec<_>>())?;
    let labels: Vec<String> = recipe.labels().iter().map(|l| l.to_string()).collect();
    let mut header = vec!["time"];
    header.extend(labels.iter().map(String::as_str));
    let mut c = out.csv("coefficients.csv", &header)?;
    for t in 0..paths.rows() {
        let mut row = vec![t.to_string()];
        row.extend(paths.row(t).iter().map(|&v| fmt(v)));
        c.row(&row)?;
    }
    c.finish()?;
    let mut j = out.csv("jumps.csv", &["time", "coefficient", "size"])?;
    for jump in coeffs.jumps.iter().filter(|j| j.time >= sim.burn_in) {
        j.row(&[(jump.time - sim.burn_in).to_string(), labels[jump.coord].clone(), fmt(jump.size)])?;
    }
    j.finish()
}

// ------------------------------------------------------------------- fit

enum Fitted {
    Gaussian(FilterRun),
    Poisson(FilterRun),
    Cp(CpFilterRun),
}

fn fit_model(model: &ModelConfig, recipe: &DesignRecipe, d: &Loaded, seed: u64) -> CliResult<Fitted> {
    let z = d.covariates.as_deref();
    Ok(match model.model {
        ModelKind::Gaussian => Fitted::Gaussian(fit_gaussian(&d.panel, &d.networks, z, &model.gaussian_spec_with(recipe.clone())?)?),
        ModelKind::Poisson => Fitted::Poisson(fit_poisson(&d.panel, &d.networks, z, &model.poisson_spec_with(recipe.clone())?)?),
        ModelKind::CpTvpvar => Fitted::Cp(cp_filter_alternating(&d.panel, &model.cp_spec(derive_seed(seed, "cp-init", 0)))?),
    })
}

fn write_states(out: &mut Outputs, name: &str, beliefs: &[Belief], first_row: usize, labels: &[String]) -> CliResult<()> {
    let mut w = out.csv(name, &["time", "coefficient", "mean", "sd"])?;
    for (i, b) in beliefs.iter().enumerate() {
        let sd = b.variances();
        for (k, label) in labels.iter().enumerate() {
            w.row(&[(first_row + i).to_string(), label.clone(), fmt(b.mean[k]), fmt(sd[k].max(0.0).sqrt())])?;
        }
    }
    w.finish()
}

fn fit(ctx: &Ctx, args: &FitArgs, out: &mut Outputs) -> CliResult<()> {
    let model = ctx.config.model()?;
    let recipe = model_recipe(model);
    let d = load(&args.data, &recipe, out)?;
    let p = model.p;
    ctx.say("filtering");
    match fit_model(model, &recipe, &d, ctx.seed)? {
        Fitted::Gaussian(run) | Fitted::Poisson(run) => {
            let labels: Vec<String> = recipe.labels().iter().map(|l| l.to_string()).collect();
            let smoothed = rts_smooth(&run)?;
            write_states(out, "states.csv", &run.filtered, p, &labels)?;
            write_states(out, "smoothed.csv", &smoothed, p, &labels)?;
            let last = run.last();
            let activations: Option<Vec<usize>> = run
                .threshold_states
                .as_ref()
                .map(|s| (0..labels.len()).map(|k| s.iter().filter(|v| v.get(k).copied().unwrap_or(false)).count()).collect());
            out.json(
                "fit.json",
                &json!({
                    "model": model.model,
                    "rows": d.panel.rows(),
                    "nodes": d.panel.cols(),
                    "steps": run.len(),
                    "columns": labels,
                    "loglik": run.loglik,
                    "final_mean": last.mean,
                    "final_sd": last.variances().iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<_>>(),
                    "threshold_activations": activations,
                }),
            )?;
            if args.dump_states {
                let v = serde_json::to_value(&run).expect("filter run serializes");
                out.json("filter_run.json", &v)?;
            }
        }
        Fitted::Cp(run) => {
            let n = d.panel.cols();
            let mut w = out.csv("predictions.csv", &["time", "node", "prediction", "actual"])?;
            for i in 0..run.predictions.rows() {
                for node in 0..n {
                    let t = p + i;
                    w.row(&[t.to_string(), node.to_string(), fmt(run.predictions[(i, node)]), fmt(d.panel[(t, node)])])?;
                }
            }
            w.finish()?;
            let f = sign_fix(&run.last_factors(n, p));
            let mut w = out.csv("factors.csv", &["mode", "component", "index", "value"])?;
            for (m, mode) in Mode::ALL.into_iter().enumerate() {
                let vs = match mode {
                    Mode::Row => f.mode1(),
                    Mode::Column => f.mode2(),
                    Mode::Lag => f.mode3(),
                };
                for (r, v) in vs.iter().enumerate() {
                    for (i, x) in v.iter().enumerate() {
                        w.row(&[(m + 1).to_string(), r.to_string(), i.to_string(), fmt(*x)])?;
                    }
                }
            }
            w.finish()?;
            out.json(
                "fit.json",
                &json!({
                    "model": model.model,
                    "rows": d.panel.rows(),
                    "nodes": n,
                    "rank": f.rank(),
                    "state_dim": state_dim(f.rank(), n, p),
                    "loglik": run.loglik,
                    "skipped_updates": run.skipped_updates,
                }),
            )?;
        }
    }
    Ok(())
}

// ------------------------------------------------------------- forecast

/// Point forecasts from the CP factors filtered through the origin, with
/// plug-in covariances `sigma2 sum_j Psi_j Psi_j'` that treat the factors
/// as known.
struct CpForecaster<'a> {
    panel: &'a Matrix,
    run: &'a CpFilterRun,
    p: usize,
    sigma2: f64,
}

impl CpForecaster<'_> {
    fn path(&self, history: &Matrix, origin: usize, hmax: usize) -> CoreResult<Vec<(Vec<f64>, Matrix)>> {
        if origin < self.p || origin - self.p >= self.run.modes[0].len() {
            return Err(CoreError::InvalidInput(format!("origin {origin} is outside the filtered rows")));
        }
        let n = self.panel.cols();
        let slices = cp_reconstruct(&self.run.factors_at(origin - self.p, n, self.p));
        let mut ys: Vec<Vec<f64>> = (0..=origin).map(|t| history.row(t).to_vec()).collect();
        let mut psi = vec![Matrix::identity(n)];
        let mut cov = Matrix::zeros(n, n);
        let mut out = Vec::with_capacity(hmax);
        for k in 1..=hmax {
            let mut next = vec![0.0; n];
            for (l, b) in slices.iter().enumerate() {
                for (a, v) in next.iter_mut().zip(b.mul_vec(&ys[ys.len() - 1 - l])) {
                    *a += v;
                }
            }
            ys.push(next.clone());
            cov.add_assign(&psi[k - 1].mul_t(&psi[k - 1]).scale(self.sigma2));
            let mut pk = Matrix::zeros(n, n);
            for (l, b) in slices.iter().enumerate().take(k) {
                pk.add_assign(&b.mul(&psi[k - 1 - l]));
            }
            psi.push(pk);
            out.push((next, cov.clone()));
        }
        Ok(out)
    }
}

impl Forecaster for CpForecaster<'_> {
    fn forecast(&self, origin: usize, horizons: &[usize]) -> CoreResult<Vec<Prediction>> {
        let hmax = horizons.last().copied().unwrap_or(0);
        let all = self.path(self.panel, origin, hmax)?;
        Ok(horizons.iter().map(|&h| Prediction::Gaussian { mean: all[h - 1].0.clone(), cov: all[h - 1].1.clone() }).collect())
    }
}

fn forecast(ctx: &Ctx, args: &ForecastArgs, out: &mut Outputs) -> CliResult<()> {
    let model = ctx.config.model()?;
    let eval = ctx.config.evaluation.clone().unwrap_or_default();
    eval.validate()?;
    let h = args.horizon.unwrap_or_else(|| eval.horizons.last().copied().unwrap_or(1));
    if h == 0 {
        return Err(CliError::config("--horizon", "must be at least 1"));
    }
    let recipe = model_recipe(model);
    let d = load(&args.data, &recipe, out)?;
    let (rows, n) = (d.panel.rows(), d.panel.cols());
    let future: Option<Vec<WeightMatrix>> = match (&args.future_network, model.network_policy) {
        (_, NetworkPolicy::CarryForward) => None,
        (Some(p), _) => {
            let seq = data::read_network(p, Some(n), Some(h), !args.data.undirected)?;
            out.manifest.add_input(p)?;
            Some((0..h).map(|k| seq.at(k).clone()).collect())
        }
        (None, policy) => return Err(CliError::config("--future-network", format!("required by network policy {policy:?}"))),
    };
    let future_z: Option<Vec<Matrix>> = match &d.covariates {
        Some(z) => Some(
            (1..=h)
                .map(|k| {
                    covariates_at(Some(z), rows - 1 + k)
                        .cloned()
                        .ok_or_else(|| CliError::config("--covariates", format!("no covariates for row {}", rows - 1 + k)))
                })
                .collect::<CliResult<_>>()?,
        ),
        None => None,
    };
    let inputs = ForecastInputs {
        history: &d.panel,
        networks: &d.networks,
        covariates: d.covariates.as_deref(),
        future_networks: future.as_deref(),
        future_covariates: future_z.as_deref(),
        policy: model.network_policy,
    };
    let a = 1.0 - eval.coverage;
    let z = stats::normal_quantile(1.0 - a / 2.0);
    let gaussian_rows = |out: &mut Outputs, fc: &[(usize, Vec<f64>, Matrix)]| -> CliResult<()> {
        let mut w = out.csv("forecast.csv", &["horizon", "node", "mean", "sd", "lo", "hi"])?;
        for (k, mean, cov) in fc {
            for i in 0..n {
                let sd = cov[(i, i)].max(0.0).sqrt();
                let row = [k.to_string(), i.to_string(), fmt(mean[i]), fmt(sd), fmt(mean[i] - z * sd), fmt(mean[i] + z * sd)];
                w.row(&row)?;
            }
        }
        w.finish()
    };
    ctx.say(&format!("forecasting {h} steps"));
    match fit_model(model, &recipe, &d, ctx.seed)? {
        Fitted::Gaussian(run) => {
            let fc = forecast_gaussian(&run, &model.gaussian_spec_with(recipe.clone())?, &inputs, h)?;
            let rows: Vec<_> = fc.into_iter().map(|f| (f.horizon, f.mean, f.cov)).collect();
            gaussian_rows(out, &rows)?;
        }
        Fitted::Cp(run) => {
            let f = CpForecaster { panel: &d.panel, run: &run, p: model.p, sigma2: model.sigma2.unwrap_or(1.0) };
            let rows: Vec<_> = f.path(&d.panel, rows - 1, h)?.into_iter().enumerate().map(|(k, (m, c))| (k + 1, m, c)).collect();
            gaussian_rows(out, &rows)?;
        }
        Fitted::Poisson(run) => {
            let spec = model.poisson_spec_with(recipe.clone())?;
            let mc = McContext::new(&run, &spec, &inputs, h, model.stabilizer, derive_seed(ctx.seed, "forecast", 0))?;
            let paths: Vec<DrawPath> = (0..model.draws).into_par_iter().map(|s| mc.draw(s)).collect();
            let ens = mc.assemble(&paths);
            write_ensembles(out, &ens, a, args.dump_draws)?;
        }
    }
    Ok(())
}

fn write_ensembles(out: &mut Outputs, ens: &[ForecastEnsemble], a: f64, dump: bool) -> CliResult<()> {
    let mut w = out.csv("forecast.csv", &["horizon", "node", "mean", "median", "lo", "hi"])?;
    let mut summary = Vec::new();
    for e in ens {
        let s = ensemble_stats(e, &[a / 2.0, 1.0 - a / 2.0])?;
        for i in 0..e.n_nodes() {
            let row = [e.horizon.to_string(), i.to_string(), fmt(s.mean[i]), fmt(s.median[i]), fmt(s.quantiles[0][i]), fmt(s.quantiles[1][i])];
            w.row(&row)?;
        }
        summary.push(json!({"horizon": e.horizon, "explosion_prob": s.explosion_prob, "max_intensity": s.max_intensity}));
    }
    w.finish()?;
    out.json("forecast.json", &json!({ "horizons": summary }))?;
    if dump {
        let mut w = out.csv("draws.csv", &["draw", "node", "horizon", "intensity", "count"])?;
        let draws = ens.first().map_or(0, ForecastEnsemble::n_draws);
        let n = ens.first().map_or(0, ForecastEnsemble::n_nodes);
        for s in 0..draws {
            for i in 0..n {
                for e in ens {
                    w.row(&[s.to_string(), i.to_string(), e.horizon.to_string(), fmt(e.intensities[(s, i)]), e.count(s, i).to_string()])?;
                }
            }
        }
        w.finish()?;
    }
    Ok(())
}

// ------------------------------------------------------------- evaluate

fn build_plan(eval: &EvalConfig, rows: usize, seed: u64) -> CliResult<EvalPlan> {
    let mut plan = match &eval.origins {
        Some(o) => EvalPlan { horizons: eval.horizons.clone(), ..EvalPlan::new(o.clone()) },
        None => EvalPlan::expanding(eval.first_origin.unwrap_or(rows / 2), rows, eval.horizons.clone())
            .map_err(|e| CliError::config("evaluation.first_origin", e.to_string()))?,
    };
    for s in plan.scores.iter_mut() {
        if let ScoreKind::Coverage { level } = s {
            *level = eval.coverage;
        }
    }
    plan.seed = derive_seed(seed, "eval-pit", 0);
    plan.bootstrap = eval.bootstrap_config(derive_seed(seed, "bootstrap", 0));
    plan.validate(rows).map_err(|e| CliError::config("evaluation.origins", e.to_string()))?;
    Ok(plan)
}

/// Fits on the full sample and scores every origin of `plan`.
fn eval_model(model: &ModelConfig, recipe: &DesignRecipe, d: &Loaded, plan: &EvalPlan, seed: u64) -> CliResult<EvalReport> {
    let data = d.data();
    let report = match fit_model(model, recipe, d, seed)? {
        Fitted::Gaussian(run) => {
            let spec = model.gaussian_spec_with(recipe.clone())?;
            let f = GaussianForecaster { data, spec: &spec, run: &run, policy: model.network_policy };
            par::rolling_eval(&f, &d.panel, plan)?
        }
        Fitted::Poisson(run) => {
            let spec = model.poisson_spec_with(recipe.clone())?;
            let f = par::ParPoisson(PoissonForecaster {
                data,
                spec: &spec,
                run: &run,
                policy: model.network_policy,
                stabilizer: model.stabilizer,
                draws: model.draws,
                seed: derive_seed(seed, "eval-forecast", 0),
            });
            par::rolling_eval(&f, &d.panel, plan)?
        }
        Fitted::Cp(run) => {
            let f = CpForecaster { panel: &d.panel, run: &run, p: model.p, sigma2: model.sigma2.unwrap_or(1.0) };
            par::rolling_eval(&f, &d.panel, plan)?
        }
    };
    Ok(report)
}

fn eval_baseline(kind: Baseline, model: &ModelConfig, d: &Loaded, plan: &EvalPlan, seed: u64) -> CliResult<Option<EvalReport>> {
    let own = DesignRecipe { include_network_lags: false, ..model.recipe() };
    match kind {
        Baseline::None => Ok(None),
        Baseline::NoNetwork => {
            let m = if model.model == ModelKind::CpTvpvar { ModelConfig { model: ModelKind::Gaussian, ..model.clone() } } else { model.clone() };
            own.validate().map_err(|e| CliError::config("evaluation.baseline", e.to_string()))?;
            eval_model(&m, &own, d, plan, seed).map(Some)
        }
        Baseline::StaticOls => {
            if model.model == ModelKind::Poisson {
                return Err(CliError::config("evaluation.baseline", "static_ols needs a Gaussian-family model"));
            }
            let f = OlsForecaster { data: d.data(), recipe: model_recipe(model), policy: model.network_policy };
            Ok(Some(par::rolling_eval(&f, &d.panel, plan)?))
        }
    }
}

fn standardize(panel: &Matrix) -> Matrix {
    let mut out = panel.clone();
    for j in 0..panel.cols() {
        let c = panel.col(j);
        let (m, v) = (stats::mean(&c), stats::variance(&c));
        let sd = if v > 0.0 { v.sqrt() } else { 1.0 };
        out.set_col(j, &c.iter().map(|x| (x - m) / sd).collect::<Vec<_>>());
    }
    out
}

fn evaluate(ctx: &Ctx, args: &EvalArgs, out: &mut Outputs) -> CliResult<()> {
    let model = ctx.config.model()?;
    let eval = ctx.config.evaluation.clone().unwrap_or_default();
    eval.validate()?;
    let recipe = model_recipe(model);
    let mut d = load(&args.data, &recipe, out)?;
    if args.standardize {
        if model.model == ModelKind::Poisson {
            return Err(CliError::config("--standardize", "counts cannot be standardized"));
        }
        d.panel = standardize(&d.panel);
    }
    let plan = build_plan(&eval, d.panel.rows(), ctx.seed)?;
    ctx.say(&format!("evaluating {} origins", plan.origins.len()));
    let main = eval_model(model, &recipe, &d, &plan, ctx.seed)?;
    ctx.say("evaluating baseline");
    let base = eval_baseline(eval.baseline, model, &d, &plan, ctx.seed)?;
    let mut deltas = Vec::new();
    if let Some(b) = &base {
        for metric in [Metric::Mse, Metric::Mae, Metric::LogScore] {
            for &h in &plan.horizons {
                let v: Vec<f64> = paired_deltas(&main, b, metric, h).into_iter().map(|(_, x)| x).collect();
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let (lo, hi) = par::block_bootstrap_ci(&v, &plan.bootstrap)?;
                deltas.push(DeltaSummary { horizon: h, metric, n: v.len(), delta: stats::mean(&v), lo, hi });
            }
        }
    }
    let stress: Vec<StressArm> = if eval.stress.is_empty() {
        Vec::new()
    } else {
        ctx.say("running stress arms");
        let reference = base.as_ref().unwrap_or(&main);
        let mut failure = None;
        let arms = stress_suite(&d.networks, &eval.stress, derive_seed(ctx.seed, "stress", 0), &main, reference, |w| {
            let pd = Loaded { panel: d.panel.clone(), networks: w.clone(), covariates: d.covariates.clone() };
            eval_model(model, &recipe, &pd, &plan, ctx.seed).map_err(|e| {
                let msg = e.to_string();
                failure = Some(e);
                CoreError::InvalidInput(msg)
            })
        });
        match (arms, failure) {
            (Ok(a), _) => a,
            (Err(_), Some(e)) => return Err(e),
            (Err(e), None) => return Err(e.into()),
        }
    };

    write_cells(out, "cells.csv", &main.cells)?;
    if let Some(b) = &base {
        write_cells(out, "baseline_cells.csv", &b.cells)?;
    }
    let mut w = out.csv("failures.csv", &["model", "origin", "horizon", "message"])?;
    for (label, r) in std::iter::once(("model", &main)).chain(base.iter().map(|b| ("baseline", b))) {
        for f in &r.failures {
            w.row(&[label.to_owned(), f.origin.to_string(), f.horizon.to_string(), quoted(&f.message)])?;
        }
    }
    w.finish()?;
    let mut w = out.csv(
        "summary.csv",
        &["model", "horizon", "n_origins", "n_failed", "mae", "mse", "log_score", "n_zero_probability", "coverage", "explosion_prob", "median_abs_err", "trimmed_mae"],
    )?;
    for (label, r) in std::iter::once(("model", &main)).chain(base.iter().map(|b| ("baseline", b))) {
        for s in &r.summary {
            w.row(&summary_row(label, s))?;
        }
    }
    w.finish()?;
    let mut w = out.csv("deltas.csv", &["horizon", "metric", "n", "delta", "lo", "hi"])?;
    for s in &deltas {
        w.row(&[s.horizon.to_string(), s.metric.name().to_owned(), s.n.to_string(), fmt(s.delta), fmt(s.lo), fmt(s.hi)])?;
    }
    w.finish()?;
    if !stress.is_empty() {
        let mut w = out.csv(
            "stress.csv",
            &["arm", "horizon", "mae", "mse", "log_score", "d_mae_original", "d_mse_original", "d_log_score_original", "d_mae_baseline", "d_mse_baseline", "d_log_score_baseline"],
        )?;
        for arm in &stress {
            for ((s, o), b) in arm.summary.iter().zip(&arm.vs_original).zip(&arm.vs_baseline) {
                w.row(&[
                    arm.label.clone(),
                    s.horizon.to_string(),
                    fmt(s.mae),
                    fmt(s.mse),
                    opt(s.log_score),
                    fmt(o.mae),
                    fmt(o.mse),
                    opt(o.log_score),
                    fmt(b.mae),
                    fmt(b.mse),
                    opt(b.log_score),
                ])?;
            }
        }
        w.finish()?;
    }
    let bins = 10;
    let mut w = out.csv("pit.csv", &["horizon", "bin", "lo", "hi", "proportion"])?;
    let groups = std::iter::once((String::from("all"), None)).chain(plan.horizons.iter().map(|&h| (h.to_string(), Some(h))));
    for (label, h) in groups {
        if main.pit_values(h).is_empty() {
            continue;
        }
        for (b, prop) in main.pit_histogram(h, bins).iter().enumerate() {
            let (lo, hi) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
            w.row(&[label.clone(), b.to_string(), fmt(lo), fmt(hi), fmt(*prop)])?;
        }
    }
    w.finish()?;
    out.json("report.json", &json!({ "model": main, "baseline": base, "deltas": deltas, "stress": stress }))?;
    print!("{}", summary_table(&main, base.as_ref(), &deltas));
    Ok(())
}

fn write_cells(out: &mut Outputs, name: &str, cells: &[CellScores]) -> CliResult<()> {
    let mut w = out.csv(name, &["origin", "horizon", "node", "metric", "value"])?;
    for c in cells {
        let (o, h) = (c.origin.to_string(), c.horizon.to_string());
        for i in 0..c.point.len() {
            let node = i.to_string();
            let mut put = |metric: &str, v: String| w.row(&[o.clone(), h.clone(), node.clone(), metric.to_owned(), v]);
            put("point", fmt(c.point[i]))?;
            put("abs_err", fmt(c.abs_err[i]))?;
            put("sq_err", fmt(c.sq_err[i]))?;
            if let Some(cv) = &c.covered {
                put("covered", flag(cv[i]))?;
            }
            if let Some(u) = &c.pit {
                put("pit", fmt(u[i]))?;
            }
        }
        if let Some(ls) = c.log_score {
            w.row(&[o.clone(), h.clone(), String::from("all"), String::from("log_score"), fmt(ls)])?;
        }
        if let Some((k, s)) = c.exploded_draws {
            w.row(&[o.clone(), h.clone(), String::from("all"), String::from("explosion_prob"), fmt(k as f64 / s as f64)])?;
        }
    }
    w.finish()
}

fn summary_row(label: &str, s: &HorizonSummary) -> Vec<String> {
    vec![
        label.to_owned(),
        s.horizon.to_string(),
        s.n_origins.to_string(),
        s.n_failed.to_string(),
        fmt(s.mae),
        fmt(s.mse),
        opt(s.log_score),
        s.n_zero_probability.to_string(),
        opt(s.coverage),
        opt(s.tail.map(|t| t.explosion_prob)),
        opt(s.tail.map(|t| t.median_abs_err)),
        opt(s.tail.map(|t| t.trimmed_mae)),
    ]
}

/// Aligned text table: losses per horizon and the MSE delta with its
/// bootstrap interval.
pub fn summary_table(main: &EvalReport, base: Option<&EvalReport>, deltas: &[DeltaSummary]) -> String {
    let num = |v: Option<f64>| v.map_or_else(|| String::from("-"), |x| format!("{x:.6}"));
    let mut lines = vec![format!(
        "{:>3} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "h", "origins", "MSE", "MSE(base)", "dMSE", "lo", "hi", "MAE", "LS"
    )];
    for s in &main.summary {
        let b = base.and_then(|b| b.horizon(s.horizon));
        let d = deltas.iter().find(|d| d.horizon == s.horizon && d.metric == Metric::Mse);
        lines.push(format!(
            "{:>3} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
            s.horizon,
            s.n_origins,
            num(Some(s.mse)),
            num(b.map(|b| b.mse)),
            num(d.map(|d| d.delta)),
            num(d.map(|d| d.lo)),
            num(d.map(|d| d.hi)),
            num(Some(s.mae)),
            num(s.log_score),
        ));
    }
    lines.join("\n") + "\n"
}

// ------------------------------------------------- diagnose, irf, perturb

struct Paths {
    beta1: Vec<f64>,
    beta2: Vec<f64>,
    /// Smoothed means, row `i` for panel row `p + i`.
    theta: Matrix,
    labels: Vec<String>,
}

/// Smoothed coefficient paths indexed by panel row; rows before the first
/// filtered one take the initial mean.
fn coefficient_paths(model: &ModelConfig, recipe: &DesignRecipe, d: &Loaded, seed: u64) -> CliResult<Paths> {
    let run = match fit_model(model, recipe, d, seed)? {
        Fitted::Gaussian(r) | Fitted::Poisson(r) => r,
        Fitted::Cp(_) => return Err(CoreError::Unsupported(String::from("coefficient paths need a gaussian or poisson model")).into()),
    };
    let smoothed = rts_smooth(&run)?;
    let p = recipe.lag_order;
    let k = recipe.n_columns();
    let mut theta = Matrix::zeros(smoothed.len(), k);
    for (i, b) in smoothed.iter().enumerate() {
        theta.row_mut(i).copy_from_slice(&b.mean);
    }
    let rows = d.panel.rows();
    let at = |col: Option<usize>| -> Vec<f64> {
        (0..rows).map(|t| col.map_or(0.0, |c| if t < p { run.initial.mean[c] } else { smoothed[t - p].mean[c] })).collect()
    };
    Ok(Paths {
        beta1: at(recipe.column_of(ColumnLabel::NetworkLag { power: 1, lag: 1 })),
        beta2: at(recipe.column_of(ColumnLabel::OwnLag { lag: 1 })),
        theta,
        labels: recipe.labels().iter().map(|l| l.to_string()).collect(),
    })
}

fn diagnose(ctx: &Ctx, args: &DataArgs, out: &mut Outputs) -> CliResult<()> {
    let model = ctx.config.model()?;
    let recipe = model_recipe(model);
    let d = load(args, &recipe, out)?;
    let paths = coefficient_paths(model, &recipe, &d, ctx.seed)?;
    let p = recipe.lag_order;
    ctx.say("computing spillover norms");
    let report = stability_report(&paths.beta1, &paths.beta2, &d.networks)?;
    let mut w = out.csv("stability.csv", &["time", "beta1", "beta2", "op_norm", "spectral_radius", "inf_norm", "proxy"])?;
    for r in report.rows.iter().filter(|r| r.t >= p) {
        w.row(&[
            r.t.to_string(),
            fmt(paths.beta1[r.t]),
            fmt(paths.beta2[r.t]),
            fmt(r.op_norm),
            fmt(r.spectral_radius),
            fmt(r.inf_norm),
            fmt(r.proxy),
        ])?;
    }
    w.finish()?;
    let steps = paths.theta.rows();
    let thresholds = match ctx.config.diagnostics.as_ref().and_then(|c| c.break_c) {
        Some(c) if c > 0.0 && c.is_finite() => vec![rate_threshold(c, steps); paths.theta.cols()],
        Some(_) => return Err(CliError::config("diagnostics.break_c", "must be positive")),
        None => default_thresholds(&paths.theta)?,
    };
    let breaks = detect_breaks(&paths.theta, &thresholds)?;
    let mut w = out.csv("breaks.csv", &["coefficient", "time", "increment"])?;
    for (j, label) in paths.labels.iter().enumerate() {
        for idx in breaks.jump_times(j) {
            let inc = paths.theta[(idx, j)] - paths.theta[(idx - 1, j)];
            w.row(&[label.clone(), (p + idx).to_string(), fmt(inc)])?;
        }
    }
    w.finish()?;
    out.json(
        "diagnose.json",
        &json!({
            "contractive": report.contractive,
            "max_op_norm": report.max_op_norm,
            "max_spectral_radius": report.max_spectral_radius,
            "max_inf_norm": report.max_inf_norm,
            "max_proxy": report.max_proxy,
            "coefficients": paths.labels,
            "thresholds": thresholds,
            "breaks": breaks.activations.iter().map(Vec::len).collect::<Vec<_>>(),
        }),
    )
}

fn impulse(ctx: &Ctx, args: &DataArgs, out: &mut Outputs) -> CliResult<()> {
    let model = ctx.config.model()?;
    let cfg = ctx.config.irf.clone().unwrap_or_default();
    let recipe = model_recipe(model);
    let d = load(args, &recipe, out)?;
    let rows = d.panel.rows();
    let h = cfg.horizon;
    if h == 0 || h >= rows {
        return Err(CliError::config("irf.horizon", format!("must be in 1..{rows}")));
    }
    if cfg.shock >= d.panel.cols() {
        return Err(CliError::config("irf.shock", format!("node {} out of range", cfg.shock)));
    }
    let t = cfg.time.unwrap_or(rows - 1 - h);
    if t + h >= rows {
        return Err(CliError::config("irf.time", format!("time {t} plus horizon {h} runs past row {}", rows - 1)));
    }
    let paths = coefficient_paths(model, &recipe, &d, ctx.seed)?;
    let decomp = hop_coefficients(&paths.beta1, &paths.beta2, t, h)?;
    let resp = irf(&d.networks, &decomp, cfg.shock)?;
    let mut w = out.csv("hops.csv", &["hop", "coefficient"])?;
    for (r, c) in decomp.coefficients.iter().enumerate() {
        w.row(&[r.to_string(), fmt(*c)])?;
    }
    w.finish()?;
    let mut w = out.csv("irf.csv", &["node", "hop", "response"])?;
    for i in 0..resp.total.len() {
        for (r, c) in resp.contributions.iter().enumerate() {
            w.row(&[i.to_string(), r.to_string(), fmt(c[i])])?;
        }
        w.row(&[i.to_string(), String::from("total"), fmt(resp.total[i])])?;
    }
    w.finish()?;
    let aggregate = invariant_vector(d.networks.at(t), DEFAULT_TOL)
        .and_then(|pi| macro_irf(&pi, &paths.beta1, &paths.beta2, t, h, cfg.shock));
    let (macro_response, macro_error) = match aggregate {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    out.json(
        "irf.json",
        &json!({
            "anchor": t,
            "horizon": h,
            "shock": cfg.shock,
            "hop_coefficients": decomp.coefficients,
            "macro_response": macro_response,
            "macro_error": macro_error,
        }),
    )
}

fn perturb(ctx: &Ctx, args: &PerturbArgs, out: &mut Outputs) -> CliResult<()> {
    let kind = ctx.config.perturb.ok_or_else(|| CliError::config("perturb", "section is required for this command"))?;
    let w = data::read_network(&args.network, None, None, !args.undirected)?;
    out.manifest.add_input(&args.network)?;
    let pw = nssm_core::evalharness::perturb_networks(&w, &kind, derive_seed(ctx.seed, "perturb", 0))?;
    data::write_edges(&out.path("weights.csv"), &data::network_matrices(&pw))
}
