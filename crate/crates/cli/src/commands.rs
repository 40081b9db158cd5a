use std::path::{Path, PathBuf};

use declust::report::{difference_histogram, DIFFERENCE_BINS};
use declust::{
    fit_mle, log_likelihood, oracle_posteriors, simulate, smoothed_report, viterbi_decode, Catalog,
    FitConfig, GaussianModel, HiddenLabel, NuConvention, PosteriorReport, SimConfig,
};

use crate::config::{to_ini, Config};
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest, ingest_reader, parse_timestamp, IngestOptions};
use crate::output::{
    read_probabilities, sig12, write_active, write_catalog, write_histogram, write_labels,
    write_posterior, write_time_space, write_trace,
};

const FIXTURE_CATALOG: &str = include_str!("../fixtures/oracle8.csv");
const FIXTURE_CONFIG: &str = include_str!("../fixtures/oracle8.ini");
const ORACLE_TOLERANCE: f64 = 1e-8;

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Global {
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub horizon: Option<f64>,
    pub nu: Option<NuConvention>,
    pub output_dir: PathBuf,
}

impl Global {
    fn config(&self) -> CliResult<Config> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this subcommand needs --config".into()))?;
        Config::load(path)
    }

    fn nu(&self, config: &Config) -> NuConvention {
        self.nu.or(config.nu).unwrap_or_default()
    }

    fn model(&self, config: &Config) -> CliResult<GaussianModel<f64>> {
        Ok(GaussianModel::new(config.require_params()?, config.region).with_nu(self.nu(config)))
    }

    fn out(&self, name: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| CliError::io(&self.output_dir, e))?;
        Ok(self.output_dir.join(name))
    }
}

/// How to read a catalog file.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub path: PathBuf,
    pub magnitude_above: Option<f64>,
    pub depth_below: Option<f64>,
    pub origin: Option<String>,
    pub jitter_seconds: Option<f64>,
}

impl Source {
    fn load(&self, config: &Config) -> CliResult<Catalog<f64>> {
        let origin = self
            .origin
            .as_deref()
            .map(|s| parse_timestamp(s).ok_or_else(|| CliError::Usage(format!("cannot parse origin '{s}'"))))
            .transpose()?;
        let opts = IngestOptions {
            region: config.region,
            magnitude_above: self.magnitude_above,
            depth_below: self.depth_below,
            origin,
            jitter_seconds: self.jitter_seconds,
        };
        let (catalog, summary) = ingest(&self.path, &opts)?;
        eprintln!("{summary}");
        Ok(catalog)
    }
}

fn finite(value: f64, what: &str) -> CliResult<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Numerical(format!("{what} is not finite ({value})")))
    }
}

pub fn simulate_cmd(g: &Global) -> CliResult<()> {
    let config = g.config()?;
    let model = g.model(&config)?;
    let horizon = g
        .horizon
        .ok_or_else(|| CliError::Usage("simulate needs --horizon".into()))?;
    let (catalog, labels) = simulate(&SimConfig::new(model, horizon, g.seed)?)?;
    write_catalog(&g.out("catalog.csv")?, &catalog)?;
    write_labels(&g.out("labels.csv")?, &labels)?;
    let mothers = labels.labels().iter().filter(|l| **l == HiddenLabel::Mother).count();
    println!(
        "simulated {} events ({mothers} clusters) over {horizon} days with seed {}",
        catalog.len(),
        g.seed
    );
    Ok(())
}

pub fn loglik_cmd(g: &Global, src: &Source) -> CliResult<()> {
    let config = g.config()?;
    let model = g.model(&config)?;
    let catalog = src.load(&config)?;
    let ll = finite(log_likelihood(&catalog, &model, g.horizon)?, "log-likelihood")?;
    println!("events {}", catalog.len());
    println!("log_likelihood {ll}");
    Ok(())
}

pub fn fit_cmd(g: &Global, src: &Source, restarts: usize, perturbation: f64) -> CliResult<()> {
    let config = g.config()?;
    let init = config.require_params()?;
    let catalog = src.load(&config)?;
    let mut cfg = FitConfig::new(init);
    cfg.restarts = restarts;
    cfg.perturbation = perturbation;
    cfg.seed = g.seed;
    cfg.horizon = g.horizon;
    cfg.nu = g.nu(&config);
    let fit = fit_mle(&catalog, &cfg)?;
    finite(fit.loglik, "log-likelihood at the fit")?;
    let p = fit.params;
    for (k, v) in [("gamma", p.gamma), ("lambda", p.lambda), ("epsilon", p.epsilon), ("d", p.d), ("p", p.p)] {
        println!("{k} {}", sig12(v));
    }
    println!("log_likelihood {}", fit.loglik);
    println!(
        "converged {} after {} iterations, {} evaluations (best restart {})",
        fit.converged, fit.iterations, fit.evaluations, fit.restart
    );
    let ini = g.out("fit.ini")?;
    std::fs::write(&ini, to_ini(&p, &config.region, cfg.nu)).map_err(|e| CliError::io(&ini, e))?;
    write_trace(&g.out("fit_trace.csv")?, &fit.trace)?;
    if !fit.converged {
        eprintln!("warning: optimizer stopped at its iteration limit");
    }
    Ok(())
}

fn posterior_report(g: &Global, model: &GaussianModel<f64>, catalog: &Catalog<f64>) -> CliResult<PosteriorReport<f64>> {
    let post = smoothed_report(catalog, model, g.horizon)?;
    if post.membership.iter().chain(&post.active).any(|p| !p.is_finite()) {
        return Err(CliError::Numerical("posterior probabilities are not finite".into()));
    }
    let report = PosteriorReport::new(catalog, &post)?;
    write_posterior(&g.out("posterior.csv")?, &report.rows)?;
    write_active(&g.out("active.csv")?, &report.active)?;
    Ok(report)
}

fn print_summary(report: &PosteriorReport<f64>) {
    let s = report.summary;
    println!("events {}", s.n);
    println!("below_0.1 {}", sig12(s.below));
    println!("above_0.9 {}", sig12(s.above));
    println!("outside {}", sig12(s.outside()));
}

pub fn posterior_cmd(g: &Global, src: &Source) -> CliResult<()> {
    let config = g.config()?;
    let model = g.model(&config)?;
    let catalog = src.load(&config)?;
    let report = posterior_report(g, &model, &catalog)?;
    print_summary(&report);
    Ok(())
}

pub fn decode_cmd(g: &Global, src: &Source) -> CliResult<()> {
    let config = g.config()?;
    let model = g.model(&config)?;
    let catalog = src.load(&config)?;
    let (path, weight) = viterbi_decode(&catalog, &model)?;
    finite(weight, "best path weight")?;
    write_labels(&g.out("decoded_labels.csv")?, &path)?;
    let mothers = path.labels().iter().filter(|l| **l == HiddenLabel::Mother).count();
    let members = path.labels().iter().filter(|l| l.is_cluster()).count();
    println!("events {}", catalog.len());
    println!("clusters {mothers}");
    println!("cluster_events {members}");
    println!("log_weight {weight}");
    Ok(())
}

pub fn report_cmd(g: &Global, src: &Source, top_k: usize, external: Option<&Path>) -> CliResult<()> {
    let config = g.config()?;
    let model = g.model(&config)?;
    let catalog = src.load(&config)?;
    let other = external.map(read_probabilities).transpose()?;
    if let Some(other) = &other {
        if other.len() != catalog.len() {
            return Err(CliError::data(format!(
                "external probability file has {} rows but the catalog has {} events",
                other.len(),
                catalog.len()
            )));
        }
    }
    let report = posterior_report(g, &model, &catalog)?;
    write_histogram(&g.out("membership_hist.csv")?, &report.membership_histogram())?;
    write_histogram(&g.out("active_hist.csv")?, &report.active_histogram())?;
    let (top, clamped) = report.top_k(top_k);
    if clamped {
        eprintln!(
            "warning: top-K of {top_k} exceeds the catalog size; exporting all {} events",
            catalog.len()
        );
    }
    write_time_space(&g.out("top_k.csv")?, &top)?;
    if let Some(other) = other {
        let diff = difference_histogram(&report.membership(), &other)?;
        debug_assert_eq!(diff.len(), DIFFERENCE_BINS);
        write_histogram(&g.out("difference_hist.csv")?, &diff)?;
    }
    print_summary(&report);
    Ok(())
}

pub fn oracle_check_cmd(g: &Global, catalog_path: Option<&Path>) -> CliResult<()> {
    let config = match &g.config {
        Some(path) => Config::load(path)?,
        None => Config::parse(FIXTURE_CONFIG)?,
    };
    let model = g.model(&config)?;
    let catalog = match catalog_path {
        Some(path) => Source {
            path: path.to_path_buf(),
            ..Source::default()
        }
        .load(&config)?,
        None => ingest_reader(FIXTURE_CATALOG.as_bytes(), &IngestOptions::new(config.region))?.0,
    };
    let exact = oracle_posteriors(&catalog, &model, g.horizon)?;
    let ll = log_likelihood(&catalog, &model, g.horizon)?;
    let post = smoothed_report(&catalog, &model, g.horizon)?;
    let (_, weight) = viterbi_decode(&catalog, &model)?;

    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let checks = [
        ("log_likelihood_relative", ((ll - exact.log_likelihood) / exact.log_likelihood).abs()),
        ("membership", max_diff(&post.membership, &exact.membership)),
        ("active", max_diff(&post.active, &exact.active)),
        ("viterbi_weight", (weight - exact.argmax.log_weight).abs()),
    ];
    println!("events {}", catalog.len());
    for (name, d) in checks {
        println!("{name} {d:.3e}");
    }
    let worst = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    println!("max |Δ| = {worst:.3e}");
    if worst.is_finite() && worst < ORACLE_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "oracle disagreement {worst:.3e} exceeds {ORACLE_TOLERANCE:e}"
        )))
    }
}
