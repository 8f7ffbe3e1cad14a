//! Evaluation metrics and report serialization.
//!
//! Covers plain accuracy, the grid-averaged certified rate and certified
//! accuracy, and the attacker false-negative rate, plus the on-disk report
//! (summary JSON, curve CSV, ledger CSV).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cert::{ModelRadius, Radius};
use crate::engine::RoundLedger;
use crate::error::{Error, Result};

/// Fraction of predictions equal to their labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    assert!(!predictions.is_empty(), "accuracy of an empty set");
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / predictions.len() as f64
}

/// Number of grid increments used for certification curves.
pub const GRID_STEPS: usize = 100;

/// Ascending attack-magnitude grid `r_0 = 0 .. r_n`, capped at the largest
/// finite per-sample radius.
///
/// Falls back to a unit span when no positive finite radius exists (all
/// samples abstained or all diverged), so CR stays well defined in the
/// degenerate cases.
pub fn radius_grid(radii: &[Radius], steps: usize) -> Vec<f64> {
    assert!(steps >= 1, "grid needs at least one increment");
    let cap = match ModelRadius::grid_cap(radii) {
        Some(c) if c > 0.0 => c,
        _ => 1.0,
    };
    (0..=steps).map(|j| cap * j as f64 / steps as f64).collect()
}

/// Fraction of samples certified at each grid point.
pub fn certified_fractions(radii: &[Radius], grid: &[f64]) -> Vec<f64> {
    assert!(!radii.is_empty());
    assert!(!grid.is_empty());
    let m = radii.len() as f64;
    grid.iter()
        .map(|r_j| radii.iter().filter(|r| r.threshold_value() >= *r_j).count() as f64 / m)
        .collect()
}

/// Certified rate: the mean certified fraction over the grid.
pub fn certified_rate(radii: &[Radius], grid: &[f64]) -> f64 {
    let fractions = certified_fractions(radii, grid);
    fractions.iter().sum::<f64>() / fractions.len() as f64
}

/// Certified-and-correct fraction at each grid point.
pub fn certified_correct_fractions(
    radii: &[Radius],
    predictions: &[usize],
    labels: &[usize],
    grid: &[f64],
) -> Vec<f64> {
    assert_eq!(radii.len(), predictions.len());
    assert_eq!(radii.len(), labels.len());
    let m = radii.len() as f64;
    grid.iter()
        .map(|r_j| {
            radii
                .iter()
                .zip(predictions.iter().zip(labels))
                .filter(|(r, (p, l))| r.threshold_value() >= *r_j && p == l)
                .count() as f64
                / m
        })
        .collect()
}

/// Certified accuracy: like the certified rate but the indicator also
/// requires a correct prediction.
pub fn certified_accuracy(
    radii: &[Radius],
    predictions: &[usize],
    labels: &[usize],
    grid: &[f64],
) -> f64 {
    let fractions = certified_correct_fractions(radii, predictions, labels, grid);
    fractions.iter().sum::<f64>() / fractions.len() as f64
}

/// False-negative rate: fraction of attackers whose final aggregation
/// weight strictly exceeds the uniform share `1/N`.
pub fn fnr(final_weights: &[f64], attacker_ids: &[usize], num_clients: usize) -> f64 {
    assert!(!attacker_ids.is_empty(), "fnr needs at least one attacker");
    let share = 1.0 / num_clients as f64;
    let undetected = attacker_ids
        .iter()
        .filter(|&&i| final_weights[i] > share)
        .count();
    undetected as f64 / attacker_ids.len() as f64
}

/// One row of the certification curve table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub r_j: f64,
    pub certified_fraction: f64,
    pub certified_correct_fraction: f64,
}

/// Machine-readable run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub aggregator: String,
    pub seed: u64,
    pub acc: f64,
    /// Certified rate; absent when the run had no attackers to certify
    /// against.
    pub cr: Option<f64>,
    pub ca: Option<f64>,
    pub fnr: Option<f64>,
    /// Raw model radius: a number, "inf", or "0" when everything abstained.
    pub radius_m_prime: String,
    /// Log10 model radius: a number, "inf", or "n/a".
    pub radius_m: String,
    pub curves: Vec<CurvePoint>,
    /// Echo of the flat configuration this run was built from.
    pub config: std::collections::BTreeMap<String, String>,
}

impl MetricsReport {
    pub fn radius_strings(model: &ModelRadius) -> (String, String) {
        let prime = match model {
            ModelRadius::AllAbstain => "0".to_string(),
            ModelRadius::Finite(r) => format!("{r}"),
            ModelRadius::Infinite => "inf".to_string(),
        };
        let log = match model.log10() {
            None => "n/a".to_string(),
            Some(v) if v.is_infinite() => "inf".to_string(),
            Some(v) => format!("{v}"),
        };
        (prime, log)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `metrics.json`, `curves.csv`, and `ledger.csv` under `out_dir`.
///
/// Output is byte-deterministic for a fixed report, so identical seeds
/// yield identical files.
pub fn emit_report(report: &MetricsReport, ledgers: &[RoundLedger], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let mut json = serde_json::to_string_pretty(report).expect("report serialization");
    json.push('\n');
    write_file(&out_dir.join("metrics.json"), &json)?;

    let mut curves = String::from("r_j,certified_fraction,certified_correct_fraction\n");
    for point in &report.curves {
        curves.push_str(&format!(
            "{},{},{}\n",
            point.r_j, point.certified_fraction, point.certified_correct_fraction
        ));
    }
    write_file(&out_dir.join("curves.csv"), &curves)?;

    let mut ledger = String::from("round,client,weight,update_norm\n");
    for entry in ledgers {
        for (client, (weight, update)) in entry.weights.iter().zip(&entry.updates).enumerate() {
            ledger.push_str(&format!(
                "{},{},{},{}\n",
                entry.round,
                client,
                weight,
                update.norm()
            ));
        }
    }
    write_file(&out_dir.join("ledger.csv"), &ledger)?;
    Ok(())
}

/// Reads back a `metrics.json` produced by [`emit_report`].
pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let raw = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|e| Error::ConfigParse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1, 2, 0], &[1, 2, 0]), 1.0);
        assert_eq!(accuracy(&[1, 2, 0], &[0, 1, 2]), 0.0);
        assert_eq!(accuracy(&[1, 2, 0, 1], &[1, 2, 0, 0]), 0.75);
    }

    #[test]
    fn all_infinite_radii_certify_everything() {
        let radii = vec![Radius::Infinite; 5];
        let grid = radius_grid(&radii, GRID_STEPS);
        assert_eq!(certified_rate(&radii, &grid), 1.0);
    }

    #[test]
    fn all_abstain_certifies_only_the_zero_point() {
        let radii = vec![Radius::Abstain; 4];
        let grid = radius_grid(&radii, GRID_STEPS);
        let cr = certified_rate(&radii, &grid);
        let expect = 1.0 / (GRID_STEPS + 1) as f64;
        assert!((cr - expect).abs() < 1e-12, "cr {cr} vs {expect}");
    }

    #[test]
    fn singleton_at_the_cap_certifies_fully() {
        let radii = vec![Radius::Finite(3.5)];
        let grid = radius_grid(&radii, GRID_STEPS);
        assert_eq!(*grid.last().unwrap(), 3.5);
        assert_eq!(certified_rate(&radii, &grid), 1.0);
    }

    #[test]
    fn certified_accuracy_requires_correctness() {
        let radii = vec![Radius::Infinite, Radius::Infinite];
        let grid = radius_grid(&radii, 10);
        // all certified, all wrong
        assert_eq!(certified_accuracy(&radii, &[0, 0], &[1, 1], &grid), 0.0);
        // equals CR when every prediction is right
        let cr = certified_rate(&radii, &grid);
        let ca = certified_accuracy(&radii, &[1, 0], &[1, 0], &grid);
        assert_eq!(ca, cr);
    }

    #[test]
    fn mixed_case_cross_checked_by_hand() {
        // 2 samples, grid {0, 1, 2}. Sample A: radius 1.5, correct.
        // Sample B: radius 0.5, wrong.
        let radii = [Radius::Finite(1.5), Radius::Finite(0.5)];
        let preds = [0, 1];
        let labels = [0, 0];
        let grid = vec![0.0, 1.0, 2.0];
        // certified fractions: r=0 -> 1.0, r=1 -> 0.5, r=2 -> 0.0
        let cr = certified_rate(&radii, &grid);
        assert!((cr - 0.5).abs() < 1e-12);
        // certified & correct: r=0 -> 0.5, r=1 -> 0.5, r=2 -> 0
        let ca = certified_accuracy(&radii, &preds, &labels, &grid);
        assert!((ca - 1.0 / 3.0).abs() < 1e-12);
        assert!(ca <= cr);
    }

    #[test]
    fn cr_is_monotone_in_threshold_shifts() {
        let radii = [
            Radius::Finite(0.5),
            Radius::Finite(1.0),
            Radius::Abstain,
            Radius::Finite(2.0),
        ];
        let grid = radius_grid(&radii, 20);
        let fractions = certified_fractions(&radii, &grid);
        for pair in fractions.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn fnr_boundary_is_strict() {
        // weight exactly 1/N counts as detected
        let weights = [0.25, 0.25, 0.3, 0.2];
        assert_eq!(fnr(&weights, &[0, 1], 4), 0.0);
        assert_eq!(fnr(&weights, &[2], 4), 1.0);
        assert_eq!(fnr(&weights, &[0, 1, 2, 3], 4), 0.25);
    }

    #[test]
    fn report_round_trips_and_is_deterministic() {
        let report = MetricsReport {
            aggregator: "wpcra".into(),
            seed: 42,
            acc: 0.9375,
            cr: Some(0.5),
            ca: Some(0.25),
            fnr: Some(0.0),
            radius_m_prime: "12.5".into(),
            radius_m: format!("{}", 12.5f64.log10()),
            curves: vec![CurvePoint {
                r_j: 0.0,
                certified_fraction: 1.0,
                certified_correct_fraction: 0.5,
            }],
            config: [("seed".to_string(), "42".to_string())]
                .into_iter()
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, &[], dir.path()).unwrap();
        let parsed = read_report(&dir.path().join("metrics.json")).unwrap();
        assert_eq!(parsed, report);

        let first = std::fs::read(dir.path().join("metrics.json")).unwrap();
        emit_report(&report, &[], dir.path()).unwrap();
        let second = std::fs::read(dir.path().join("metrics.json")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn emitted_cr_recomputes_from_curves() {
        let radii = [Radius::Finite(0.4), Radius::Finite(1.2), Radius::Abstain];
        let preds = [0, 1, 2];
        let labels = [0, 1, 0];
        let grid = radius_grid(&radii, GRID_STEPS);
        let fractions = certified_fractions(&radii, &grid);
        let correct = certified_correct_fractions(&radii, &preds, &labels, &grid);
        let cr = certified_rate(&radii, &grid);
        let recomputed: f64 = fractions.iter().sum::<f64>() / fractions.len() as f64;
        assert!((cr - recomputed).abs() < 1e-12);
        let ca = certified_accuracy(&radii, &preds, &labels, &grid);
        let recomputed_ca: f64 = correct.iter().sum::<f64>() / correct.len() as f64;
        assert!((ca - recomputed_ca).abs() < 1e-12);
    }
}
