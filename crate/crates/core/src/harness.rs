//! End-to-end experiment driver: dataset, partition, federation, run,
//! certification, metrics, and report files.

use std::path::Path;

use crate::attack::{inject_trigger, AttackSpec};
use crate::cert::{
    certify_test_set, draw_smoothed_models, smoothed_counts, AttackerTerm, CertConfig, RadiusReport,
};
use crate::config::{
    AttackerSelection, DatasetSource, ExperimentConfig, PartitionKind, RawConfig, SweepAxis,
};
use crate::data::{
    load_csv, partition, synth_dataset, train_test_split, Dataset, PartitionStrategy,
};
use crate::engine::{AttackSchedule, ClientState, ExperimentResult, FlExperiment};
use crate::error::{Error, Result};
use crate::metrics::{
    accuracy, certified_accuracy, certified_correct_fractions, certified_fractions, certified_rate,
    emit_report, fnr, radius_grid, CurvePoint, MetricsReport, GRID_STEPS,
};
use crate::model::param_dim;
use crate::seeds::{derive_seed, stream};

/// Everything a finished run hands back.
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub result: ExperimentResult,
    pub report: MetricsReport,
    /// Present when the run had attackers to certify against.
    pub radius: Option<RadiusReport>,
    pub attacker_ids: Vec<usize>,
    /// Training-shard size per client.
    pub client_sizes: Vec<usize>,
}

fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.source {
        DatasetSource::Synthetic {
            num_samples,
            num_features,
            num_classes,
            class_separation,
        } => Ok(synth_dataset(
            *num_samples,
            *num_features,
            *num_classes,
            *class_separation,
            derive_seed(cfg.seed, "synth", &[]),
        )),
        DatasetSource::Csv {
            path,
            label_column,
            group_column,
            normalize,
        } => load_csv(path, label_column, group_column.as_deref(), *normalize),
    }
}

fn select_attackers(
    shards: &[Dataset],
    num_attackers: usize,
    selection: AttackerSelection,
) -> Vec<usize> {
    match selection {
        AttackerSelection::FirstR => (0..num_attackers).collect(),
        AttackerSelection::LargestShards => {
            let mut order: Vec<usize> = (0..shards.len()).collect();
            // descending by size, ties to the lower id
            order.sort_by_key(|&i| (std::cmp::Reverse(shards[i].len()), i));
            let mut ids: Vec<usize> = order.into_iter().take(num_attackers).collect();
            ids.sort_unstable();
            ids
        }
    }
}

/// Runs one experiment from a raw config and returns all artifacts,
/// writing report files when an output directory is configured.
pub fn run(raw: &RawConfig) -> Result<RunArtifacts> {
    let cfg = ExperimentConfig::from_raw(raw)?;
    let data = build_dataset(&cfg)?;

    // Attack fields that depend on the dataset shape can only be checked
    // now for CSV sources.
    if let Some(attack) = &cfg.attack {
        if attack.target_label >= data.num_classes {
            return Err(Error::InvalidConfig(format!(
                "key 'target_label': class {} does not exist (dataset has {})",
                attack.target_label, data.num_classes
            )));
        }
        for &j in &attack.trigger_features {
            if j >= data.num_features {
                return Err(Error::InvalidConfig(format!(
                    "key 'trigger_features': feature {} does not exist (dataset has {})",
                    j, data.num_features
                )));
            }
        }
    }

    let (train, test) = train_test_split(
        &data,
        cfg.test_fraction,
        derive_seed(cfg.seed, "split", &[]),
    );
    if test.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "key 'test_fraction': {} of {} samples leaves an empty test set; use more data",
            cfg.test_fraction,
            data.len()
        )));
    }
    let strategy = match &cfg.partition {
        PartitionKind::Uniform => PartitionStrategy::UniformRandom {
            seed: derive_seed(cfg.seed, "partition", &[]),
        },
        PartitionKind::ByGroup => PartitionStrategy::ByGroup,
        PartitionKind::Dirichlet { beta } => PartitionStrategy::Dirichlet {
            beta: *beta,
            seed: derive_seed(cfg.seed, "partition", &[]),
        },
    };
    let shards = partition(&train, cfg.num_clients, &strategy)?;
    let client_sizes: Vec<usize> = shards.iter().map(|s| s.len()).collect();
    let attacker_ids = select_attackers(&shards, cfg.num_attackers, cfg.attacker_selection);

    let dim = param_dim(data.num_classes, data.num_features);
    let mut clients = Vec::with_capacity(cfg.num_clients);
    for (id, shard) in shards.into_iter().enumerate() {
        if attacker_ids.contains(&id) {
            let attack = cfg
                .attack
                .as_ref()
                .expect("attacker ids imply attack params");
            let spec = AttackSpec {
                trigger_features: attack.trigger_features.clone(),
                gamma: attack.gamma,
                target_label: attack.target_label,
                poison_fraction: attack.poison_fraction,
                scale_factor: attack.scale_factor,
                adversarial_round: attack.adversarial_round,
                attacker_ids: attacker_ids.clone(),
            };
            let poisoned =
                inject_trigger(&shard, &spec, derive_seed(cfg.seed, "poison", &[id as u64]))?;
            clients.push(ClientState::malicious(id, shard, poisoned, dim));
        } else {
            clients.push(ClientState::benign(id, shard, dim));
        }
    }

    let schedule = cfg.attack.as_ref().map(|a| AttackSchedule {
        scale_factor: a.scale_factor,
        adversarial_round: a.adversarial_round,
        repeat: a.repeat,
    });
    let mut experiment = FlExperiment::new(
        clients,
        cfg.aggregator.clone(),
        cfg.train,
        schedule,
        cfg.expost,
        cfg.seed,
    );
    let result = experiment.run(cfg.rounds)?;

    let labels: Vec<usize> = test.samples.iter().map(|s| s.label).collect();
    let mut smoothing_rng = stream(cfg.seed, "smoothing", &[]);
    let (radius_report, predictions) = if cfg.num_attackers > 0 {
        let attack = cfg.attack.as_ref().expect("attackers imply attack params");
        let cert_cfg = CertConfig {
            expost: cfg.expost,
            mc_samples: cfg.mc_samples,
            eps_alpha: cfg.eps_alpha,
            l_z: cfg.l_z,
            attackers: attacker_ids
                .iter()
                .map(|&i| AttackerTerm {
                    scale_factor: attack.scale_factor,
                    learning_rate: cfg.train.learning_rate,
                    local_iterations: cfg.train.local_iterations as f64,
                    poison_fraction: attack.poison_fraction,
                    weight: result.final_weights[i],
                })
                .collect(),
            adversarial_round: attack.adversarial_round,
            total_rounds: cfg.rounds,
        };
        let report = certify_test_set(&result.final_global, &test, &cert_cfg, &mut smoothing_rng)?;
        let predictions = report.predictions();
        (Some(report), predictions)
    } else {
        // No attackers: smooth for predictions only, radii are undefined.
        let models = draw_smoothed_models(
            &result.final_global,
            cfg.mc_samples,
            cfg.expost.sigma_at(cfg.rounds),
            &mut smoothing_rng,
        );
        let predictions = test
            .samples
            .iter()
            .map(|s| smoothed_counts(&models, &s.features, test.num_classes).c_a)
            .collect();
        (None, predictions)
    };

    let acc = accuracy(&predictions, &labels);
    let (cr, ca, fnr_value, radius_strings, curves) = match &radius_report {
        Some(report) => {
            let radii = report.radii();
            let grid = radius_grid(&radii, GRID_STEPS);
            let fractions = certified_fractions(&radii, &grid);
            let correct = certified_correct_fractions(&radii, &predictions, &labels, &grid);
            let curves: Vec<CurvePoint> = grid
                .iter()
                .zip(fractions.iter().zip(&correct))
                .map(|(r_j, (cf, cc))| CurvePoint {
                    r_j: *r_j,
                    certified_fraction: *cf,
                    certified_correct_fraction: *cc,
                })
                .collect();
            (
                Some(certified_rate(&radii, &grid)),
                Some(certified_accuracy(&radii, &predictions, &labels, &grid)),
                Some(fnr(&result.final_weights, &attacker_ids, cfg.num_clients)),
                MetricsReport::radius_strings(&report.model),
                curves,
            )
        }
        None => (None, None, None, ("n/a".into(), "n/a".into()), Vec::new()),
    };

    // The echo describes the experiment, not where its files landed, so
    // reports from different output directories stay byte-identical.
    let mut echo_raw = raw.clone();
    echo_raw.out_dir = None;
    let report = MetricsReport {
        aggregator: cfg.aggregator.name().to_string(),
        seed: cfg.seed,
        acc,
        cr,
        ca,
        fnr: fnr_value,
        radius_m_prime: radius_strings.0,
        radius_m: radius_strings.1,
        curves,
        config: echo_raw.echo(),
    };

    if let Some(out_dir) = &cfg.out_dir {
        emit_report(&report, &result.ledgers, out_dir)?;
        write_config_echo(&echo_raw, out_dir)?;
    }

    Ok(RunArtifacts {
        config: cfg,
        result,
        report,
        radius: radius_report,
        attacker_ids,
        client_sizes,
    })
}

fn write_config_echo(raw: &RawConfig, out_dir: &Path) -> Result<()> {
    let path = out_dir.join("config.toml");
    std::fs::write(&path, raw.to_toml()).map_err(|source| Error::Io { path, source })
}

/// One sweep cell.
pub struct SweepRow {
    pub value: f64,
    pub report: MetricsReport,
}

/// Runs the base config once per axis value; per-cell outputs land in
/// subdirectories of the base output directory, and the combined table is
/// returned (and written as `sweep.csv` when output is configured).
pub fn sweep(base: &RawConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one value".into(),
        ));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut cell = axis.apply(base, value)?;
        if let Some(dir) = &base.out_dir {
            cell.out_dir = Some(format!("{}/sweep-{}-{}", dir, axis.label(), value));
        }
        let artifacts = run(&cell)?;
        rows.push(SweepRow {
            value,
            report: artifacts.report,
        });
    }
    if let Some(dir) = &base.out_dir {
        let path = Path::new(dir).join("sweep.csv");
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: Path::new(dir).to_path_buf(),
            source,
        })?;
        let mut table = format!("{},radius,acc,cr,ca,fnr\n", axis.label());
        for row in &rows {
            table.push_str(&row_csv(row));
        }
        std::fs::write(&path, table).map_err(|source| Error::Io { path, source })?;
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x}"))
}

fn row_csv(row: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{}\n",
        row.value,
        row.report.radius_m,
        row.report.acc,
        opt(row.report.cr),
        opt(row.report.ca),
        opt(row.report.fnr)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RawConfig {
        RawConfig {
            num_samples: 400,
            num_features: 6,
            num_classes: 2,
            num_clients: 4,
            num_attackers: 1,
            rounds: 3,
            adversarial_round: 2,
            alpha: Some(10.0),
            eta: 0.1,
            mc_samples: 50,
            trigger_features: vec![0, 1],
            target_label: 1,
            ..RawConfig::default()
        }
    }

    #[test]
    fn run_produces_consistent_artifacts() {
        let artifacts = run(&small_config()).unwrap();
        assert_eq!(artifacts.attacker_ids.len(), 1);
        assert!(artifacts.report.acc >= 0.0 && artifacts.report.acc <= 1.0);
        let report = artifacts.radius.as_ref().unwrap();
        assert_eq!(report.samples.len(), 80); // 20% of 400
        assert!(artifacts.report.ca.unwrap() <= artifacts.report.cr.unwrap() + 1e-12);
    }

    #[test]
    fn no_attacker_run_skips_certification() {
        let mut raw = small_config();
        raw.num_attackers = 0;
        raw.alpha = None;
        let artifacts = run(&raw).unwrap();
        assert!(artifacts.radius.is_none());
        assert_eq!(artifacts.report.cr, None);
        assert_eq!(artifacts.report.radius_m, "n/a");
    }

    #[test]
    fn sweep_has_one_row_per_value() {
        let mut raw = small_config();
        raw.rounds = 2;
        raw.adversarial_round = 1;
        let rows = sweep(&raw, SweepAxis::Sigma, &[0.005, 0.01]).unwrap();
        assert_eq!(rows.len(), 2);
        // single-value sweep equals a plain run
        let single = sweep(&raw, SweepAxis::Sigma, &[0.01]).unwrap();
        let direct = run(&SweepAxis::Sigma.apply(&raw, 0.01).unwrap()).unwrap();
        assert_eq!(single[0].report, direct.report);
    }

    #[test]
    fn empty_test_split_is_rejected_with_a_message() {
        let mut raw = small_config();
        raw.num_samples = 8; // 20% of 4 per class rounds down to zero
        let err = run(&raw).err().expect("run must fail");
        assert!(err.to_string().contains("test_fraction"), "{err}");
    }

    #[test]
    fn largest_shard_selection_prefers_big_clients() {
        let shards: Vec<Dataset> = [30usize, 10, 50, 20]
            .iter()
            .map(|&n| synth_dataset(n, 2, 2, 1.0, n as u64))
            .collect();
        let ids = select_attackers(&shards, 2, AttackerSelection::LargestShards);
        assert_eq!(ids, vec![0, 2]);
        let ids = select_attackers(&shards, 1, AttackerSelection::FirstR);
        assert_eq!(ids, vec![0]);
    }
}
