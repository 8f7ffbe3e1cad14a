//! `wpcra` command line: run one federated experiment or sweep a
//! sensitivity axis. Set `RUST_LOG` for log verbosity.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wpcra_core::config::{
    apply_overrides, preset, BatchField, ConfigOverrides, RawConfig, SweepAxis,
};
use wpcra_core::harness;
use wpcra_core::metrics::MetricsReport;
use wpcra_core::seeds::derive_seed;

#[derive(Parser)]
#[command(name = "wpcra", version, about = "Robust federated-learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report files.
    Run(RunArgs),
    /// Run one experiment per value of a config axis (N | R | T | sigma).
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Repeat the run with derived seeds and report mean metrics.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Axis to vary: N | R | T | sigma.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values, e.g. `0.005,0.01,0.02`.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

/// Flags shared by both subcommands; every config key has a flag, and
/// flags override file values.
#[derive(Args)]
struct CommonArgs {
    /// Flat key-value (TOML) config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named scenario preset (e.g. `table1-n20r4`, `default`).
    #[arg(long)]
    preset: Option<String>,

    #[arg(long)]
    dataset: Option<String>,
    /// CSV dataset path (with `--dataset csv`).
    #[arg(long)]
    csv: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    group_column: Option<String>,
    /// Disable min-max normalization of CSV features.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    num_samples: Option<usize>,
    #[arg(long)]
    num_features: Option<usize>,
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long)]
    class_separation: Option<f64>,

    #[arg(long)]
    num_clients: Option<usize>,
    #[arg(long)]
    num_attackers: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    adversarial_round: Option<usize>,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    dirichlet_beta: Option<f64>,
    #[arg(long)]
    attacker_selection: Option<String>,
    #[arg(long)]
    test_fraction: Option<f64>,

    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated trigger feature indices.
    #[arg(long, value_delimiter = ',')]
    trigger_features: Option<Vec<usize>>,
    #[arg(long)]
    target_label: Option<usize>,
    #[arg(long)]
    poison_fraction: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Attack every round from the adversarial round on.
    #[arg(long)]
    repeat_attack: bool,

    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tau: Option<usize>,
    /// "full" or a positive count.
    #[arg(long)]
    batch_size: Option<String>,

    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rho_scale: Option<f64>,
    /// Disable the ex-post norm clip.
    #[arg(long)]
    no_clip: bool,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    eps_alpha: Option<f64>,
    #[arg(long)]
    l_z: Option<f64>,

    #[arg(long)]
    eps_s: Option<f64>,
    #[arg(long)]
    eps_r: Option<f64>,
    #[arg(long)]
    eps_g: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Disable the pardoning pass.
    #[arg(long)]
    no_pardoning: bool,

    #[arg(long)]
    perturbing_clip: Option<f64>,
    #[arg(long)]
    perturbing_sigma: Option<f64>,

    /// wpcra | mean | krum | rfa | perturbing
    #[arg(long)]
    aggregator: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RawConfig, wpcra_core::Error> {
        if self.config.is_some() && self.preset.is_some() {
            return Err(wpcra_core::Error::InvalidConfig(
                "--config and --preset are mutually exclusive".into(),
            ));
        }
        let mut raw = if let Some(name) = &self.preset {
            preset(name)?
        } else if let Some(path) = &self.config {
            RawConfig::from_file(path)?
        } else {
            RawConfig::default()
        };
        let overrides = ConfigOverrides {
            dataset: self.dataset.clone(),
            csv_path: self.csv.clone(),
            label_column: self.label_column.clone(),
            group_column: self.group_column.clone(),
            normalize: self.no_normalize.then_some(false),
            num_samples: self.num_samples,
            num_features: self.num_features,
            num_classes: self.num_classes,
            class_separation: self.class_separation,
            num_clients: self.num_clients,
            num_attackers: self.num_attackers,
            rounds: self.rounds,
            adversarial_round: self.adversarial_round,
            partition: self.partition.clone(),
            dirichlet_beta: self.dirichlet_beta,
            attacker_selection: self.attacker_selection.clone(),
            test_fraction: self.test_fraction,
            gamma: self.gamma,
            trigger_features: self.trigger_features.clone(),
            target_label: self.target_label,
            poison_fraction: self.poison_fraction,
            alpha: self.alpha,
            repeat_attack: self.repeat_attack.then_some(true),
            eta: self.eta,
            tau: self.tau,
            batch_size: self.batch_size.as_ref().map(|b| match b.parse::<usize>() {
                Ok(n) => BatchField::Count(n),
                Err(_) => BatchField::Named(b.clone()),
            }),
            sigma: self.sigma,
            rho_scale: self.rho_scale,
            clip: self.no_clip.then_some(false),
            mc_samples: self.mc_samples,
            eps_alpha: self.eps_alpha,
            l_z: self.l_z,
            eps_s: self.eps_s,
            eps_r: self.eps_r,
            eps_g: self.eps_g,
            max_iters: self.max_iters,
            pardoning: self.no_pardoning.then_some(false),
            perturbing_clip: self.perturbing_clip,
            perturbing_sigma: self.perturbing_sigma,
            aggregator: self.aggregator.clone(),
            seed: self.seed,
            out_dir: self.out.as_ref().map(|p| p.display().to_string()),
        };
        apply_overrides(&mut raw, &overrides);
        Ok(raw)
    }
}

fn print_summary(report: &MetricsReport) {
    println!("Radius = {}", report.radius_m);
    println!("Acc = {:.4}", report.acc);
    println!("CR = {}", fmt_opt(report.cr));
    println!("CA = {}", fmt_opt(report.ca));
    println!("FNR = {}", fmt_opt(report.fnr));
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn run_command(args: &RunArgs) -> Result<(), wpcra_core::Error> {
    let raw = args.common.resolve()?;
    if args.replicates <= 1 {
        let artifacts = harness::run(&raw)?;
        println!("aggregator = {}", artifacts.report.aggregator);
        println!("seed = {}", artifacts.report.seed);
        print_summary(&artifacts.report);
        return Ok(());
    }
    let mut reports = Vec::with_capacity(args.replicates);
    for i in 0..args.replicates {
        let mut cell = raw.clone();
        cell.seed = derive_seed(raw.seed, "replicate", &[i as u64]);
        if let Some(dir) = &raw.out_dir {
            cell.out_dir = Some(format!("{dir}/replicate-{i}"));
        }
        let artifacts = harness::run(&cell)?;
        println!("replicate {i} (seed {}):", cell.seed);
        print_summary(&artifacts.report);
        reports.push(artifacts.report);
    }
    println!("mean over {} replicates:", args.replicates);
    let accs: Vec<f64> = reports.iter().map(|r| r.acc).collect();
    println!("Acc = {:.4}", mean_of(&accs));
    for (name, values) in [
        (
            "CR",
            reports.iter().filter_map(|r| r.cr).collect::<Vec<_>>(),
        ),
        (
            "CA",
            reports.iter().filter_map(|r| r.ca).collect::<Vec<_>>(),
        ),
        (
            "FNR",
            reports.iter().filter_map(|r| r.fnr).collect::<Vec<_>>(),
        ),
    ] {
        if values.len() == reports.len() {
            println!("{name} = {:.4}", mean_of(&values));
        } else {
            println!("{name} = n/a");
        }
    }
    Ok(())
}

fn sweep_command(args: &SweepArgs) -> Result<(), wpcra_core::Error> {
    let raw = args.common.resolve()?;
    let axis = SweepAxis::parse(&args.axis)?;
    let rows = harness::sweep(&raw, axis, &args.values)?;
    println!("{},Radius,Acc,CR,CA,FNR", axis.label());
    for row in rows {
        println!(
            "{},{},{:.4},{},{},{}",
            row.value,
            row.report.radius_m,
            row.report.acc,
            fmt_opt(row.report.cr),
            fmt_opt(row.report.ca),
            fmt_opt(row.report.fnr)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Sweep(args) => sweep_command(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
