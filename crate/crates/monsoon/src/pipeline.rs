//! Command implementations behind the `monsoon` binary.
//!
//! Each command reads its inputs, writes a manifest into the output
//! directory before anything else, then writes its outputs. Stages
//! communicate through files only, so any stage can be rerun or inspected in
//! isolation.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::anomaly::{annotate_intensities, extract_anomalies, Anomaly};
use crate::config;
use crate::data::{load_csv, RainfallDataset};
use crate::error::{Error, Result};
use crate::gibbs::{gibbs_run, GibbsConfig, PosteriorSummary};
use crate::lwa::{location_stats, lwa_assign, widespread_year_sets};
use crate::manifest::RunManifest;
use crate::mrf::{MrfConfig, MrfModel};
use crate::render::render_year;
use crate::state::{write_atomic, Sign, State, StateField};
use crate::stats::{
    aggregate_stats, case_report, gain_loss, overlap_report, size_correlations,
    year_assignment_stats,
};
use crate::sweep::{run_sweep, SweepSpec, SWEEP_CSV_HEADER};
use crate::synth::generate_synthetic;

/// Messages for the user that are not errors (degenerate thresholds, etc.).
pub type Warnings = Vec<String>;

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Generate a synthetic dataset and its ground truth.
pub fn run_synth(spec_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<()> {
    let mut spec = config::load_synthetic_spec(spec_path)?;
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }
    RunManifest::new(
        "synth",
        &[spec_path],
        out_dir,
        Some(spec.seed),
        json!({
            "rows": spec.rows,
            "cols": spec.cols,
            "years": spec.years,
            "background_mu": spec.background_mu,
            "background_sigma": spec.background_sigma,
            "blocks": spec.blocks.len(),
        }),
    )
    .write(out_dir)?;
    let (dataset, truth) = generate_synthetic(&spec)?;
    dataset.write_csv(out_dir.join("dataset.csv"))?;
    truth
        .labels
        .write_csv(dataset.years(), out_dir.join("ground_truth.csv"))?;
    Ok(())
}

/// Run the threshold baseline and write its outputs.
pub fn run_lwa(data_path: &Path, out_dir: &Path) -> Result<Warnings> {
    RunManifest::new("lwa", &[data_path], out_dir, None, json!({})).write(out_dir)?;
    let dataset = load_csv(data_path)?;
    let stats = location_stats(&dataset)?;
    let z0 = lwa_assign(&dataset, &stats);
    let year_sets = widespread_year_sets(&z0);

    z0.write_csv(dataset.years(), out_dir.join("z0.csv"))?;
    z0.write_aimr_csv(dataset.years(), out_dir.join("z0_aimr.csv"))?;
    write_json(&year_sets, &out_dir.join("year_sets.json"))?;

    let mut warnings = Vec::new();
    let degenerate = stats.degenerate_locations();
    if !degenerate.is_empty() {
        warnings.push(format!(
            "{} location(s) have zero spread and were assigned normal everywhere: {:?}",
            degenerate.len(),
            &degenerate[..degenerate.len().min(8)]
        ));
    }
    if year_sets.degenerate_n1 {
        warnings.push(
            "state-1 count series has zero spread; every year meets the HL threshold".into(),
        );
    }
    if year_sets.degenerate_n2 {
        warnings.push(
            "state-2 count series has zero spread; every year meets the LL threshold".into(),
        );
    }
    Ok(warnings)
}

/// Fit outputs beyond the files: warnings for the console.
pub struct FitOutcome {
    pub warnings: Warnings,
    pub summary: PosteriorSummary,
}

/// Fit the field by Gibbs sampling, initializing from the baseline.
pub fn run_fit(
    data_path: &Path,
    config_path: Option<&Path>,
    mrf_config: Option<MrfConfig>,
    gibbs: GibbsConfig,
    out_dir: &Path,
) -> Result<FitOutcome> {
    let mrf_config = match (mrf_config, config_path) {
        (Some(c), _) => c,
        (None, Some(path)) => config::load_mrf_config(path)?,
        (None, None) => MrfConfig::default(),
    };
    let mut inputs = vec![data_path];
    if let Some(p) = config_path {
        inputs.push(p);
    }
    RunManifest::new(
        "fit",
        &inputs,
        out_dir,
        Some(gibbs.seed),
        json!({
            "mrf": mrf_config,
            "sweeps": gibbs.sweeps,
            "burn_in": gibbs.burn_in,
            "thin": gibbs.thin,
            "reestimate_means": gibbs.reestimate_means,
            "parallel": gibbs.parallel,
        }),
    )
    .write(out_dir)?;

    let dataset = load_csv(data_path)?;
    let stats = location_stats(&dataset)?;
    let z0 = lwa_assign(&dataset, &stats);
    let year_sets = widespread_year_sets(&z0);
    let model = MrfModel::new(&dataset, mrf_config, &z0, &stats, &year_sets)?;
    let summary = gibbs_run(&model, &z0, &gibbs)?;

    write_marginals(&summary, &dataset, &out_dir.join("marginals.csv"))?;
    write_aimr_marginals(&summary, &dataset, &out_dir.join("marginals_aimr.csv"))?;
    summary
        .map_field
        .write_csv(dataset.years(), out_dir.join("map.csv"))?;
    summary
        .map_field
        .write_aimr_csv(dataset.years(), out_dir.join("map_aimr.csv"))?;
    write_trace(&summary, &out_dir.join("trace.csv"))?;

    let mut warnings = Vec::new();
    if mrf_config.is_coherence_free() {
        warnings.push(
            "all coherence factors are disabled; the model degenerates to independent emissions"
                .into(),
        );
    }
    Ok(FitOutcome { warnings, summary })
}

fn write_marginals(
    summary: &PosteriorSummary,
    dataset: &RainfallDataset,
    path: &Path,
) -> Result<()> {
    let t_total = dataset.n_years();
    let mut out = String::from("location_id,year,p1,p2,p3\n");
    for s in 0..dataset.n_locations() {
        for (t, &year) in dataset.years().iter().enumerate() {
            let m = summary.marginals[s * t_total + t];
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                s, year, m[0], m[1], m[2]
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

fn write_aimr_marginals(
    summary: &PosteriorSummary,
    dataset: &RainfallDataset,
    path: &Path,
) -> Result<()> {
    let mut out = String::from("year,p1,p2,p3\n");
    for (t, &year) in dataset.years().iter().enumerate() {
        let m = summary.aimr_marginals[t];
        out.push_str(&format!("{},{:.6},{:.6},{:.6}\n", year, m[0], m[1], m[2]));
    }
    write_atomic(path, out.as_bytes())
}

fn write_trace(summary: &PosteriorSummary, path: &Path) -> Result<()> {
    let mut out = String::from("sweep,loglik\n");
    for (i, ll) in summary.loglik_trace.iter().enumerate() {
        out.push_str(&format!("{},{:.6}\n", i + 1, ll));
    }
    write_atomic(path, out.as_bytes())
}

/// Options for anomaly detection and reporting.
#[derive(Debug, Clone)]
pub struct DetectOptions {
    /// Smallest spatio-temporal size kept in the aggregate statistics.
    pub min_size: usize,
    /// Reference assignment for gain/loss; defaults to the baseline
    /// recomputed from the data.
    pub ref_path: Option<PathBuf>,
    /// Number of case reports, largest anomalies first.
    pub top: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            min_size: 1,
            ref_path: None,
            top: 3,
        }
    }
}

fn sibling_aimr_path(field_path: &Path) -> PathBuf {
    let stem = field_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field");
    field_path.with_file_name(format!("{stem}_aimr.csv"))
}

/// Extract anomalies from a fitted state field and write every report.
pub fn run_detect(
    map_path: &Path,
    data_path: &Path,
    options: &DetectOptions,
    out_dir: &Path,
) -> Result<()> {
    let mut inputs = vec![map_path, data_path];
    if let Some(p) = options.ref_path.as_deref() {
        inputs.push(p);
    }
    RunManifest::new(
        "detect",
        &inputs,
        out_dir,
        None,
        json!({"min_size": options.min_size, "top": options.top}),
    )
    .write(out_dir)?;

    let dataset = load_csv(data_path)?;
    let stats = location_stats(&dataset)?;
    let mut field = StateField::read_csv(map_path, dataset.years())?;
    if field.n_locations() != dataset.n_locations() {
        return Err(Error::ShapeMismatch(format!(
            "state field covers {} locations, dataset has {}",
            field.n_locations(),
            dataset.n_locations()
        )));
    }
    let aimr_path = sibling_aimr_path(map_path);
    if aimr_path.exists() {
        field.read_aimr_csv(&aimr_path, dataset.years())?;
    }

    // Reference assignment: an explicit file, or the baseline.
    let z0 = match options.ref_path.as_deref() {
        Some(path) => {
            let mut z = StateField::read_csv(path, dataset.years())?;
            let ref_aimr = sibling_aimr_path(path);
            if ref_aimr.exists() {
                z.read_aimr_csv(&ref_aimr, dataset.years())?;
            }
            z
        }
        None => lwa_assign(&dataset, &stats),
    };
    let year_sets = widespread_year_sets(&z0);

    let mut anomalies = extract_anomalies(&field, dataset.grid())?;
    annotate_intensities(&mut anomalies, &dataset, &stats)?;

    write_anomaly_csv(&anomalies, dataset.years(), &out_dir.join("anomalies.csv"))?;
    write_anomaly_nodes_csv(&anomalies, dataset.years(), &out_dir.join("anomaly_nodes.csv"))?;
    write_json(&anomalies, &out_dir.join("anomalies.json"))?;
    write_json(
        &aggregate_stats(&anomalies, options.min_size),
        &out_dir.join("stats.json"),
    )?;
    write_json(&gain_loss(&field, &z0)?, &out_dir.join("gain_loss.json"))?;
    write_json(
        &overlap_report(&field, &year_sets),
        &out_dir.join("overlap.json"),
    )?;
    write_json(
        &year_assignment_stats(&field, &year_sets),
        &out_dir.join("year_stats.json"),
    )?;
    write_json(
        &size_correlations(&anomalies),
        &out_dir.join("correlations.json"),
    )?;

    // Case studies: largest anomalies first.
    let mut by_size: Vec<&Anomaly> = anomalies.iter().collect();
    by_size.sort_by_key(|a| (std::cmp::Reverse(a.st_size), a.id));
    let reports: Vec<_> = by_size
        .iter()
        .take(options.top)
        .map(|a| case_report(a, &dataset, &stats))
        .collect::<Result<_>>()?;
    write_json(&reports, &out_dir.join("case_reports.json"))?;
    Ok(())
}

fn write_anomaly_csv(anomalies: &[Anomaly], _years: &[i32], path: &Path) -> Result<()> {
    let mut out = String::from("anomaly_id,sign,spatial_size,temporal_size,st_size,intensity\n");
    for a in anomalies {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            a.id,
            a.sign,
            a.spatial_size,
            a.temporal_size,
            a.st_size,
            a.intensity.map(|i| format!("{i:.6}")).unwrap_or_default()
        ));
    }
    write_atomic(path, out.as_bytes())
}

fn write_anomaly_nodes_csv(anomalies: &[Anomaly], years: &[i32], path: &Path) -> Result<()> {
    let mut out = String::from("anomaly_id,location_id,year\n");
    for a in anomalies {
        for &(s, t) in &a.nodes {
            out.push_str(&format!("{},{},{}\n", a.id, s, years[t]));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Run a parameter sweep and write one statistics row per setting.
pub fn run_sweep_cmd(data_path: &Path, spec_path: &Path, out_dir: &Path) -> Result<()> {
    let entries = config::read_entries(spec_path)?;
    let spec: SweepSpec = crate::sweep::sweep_spec_from_entries(&entries)?;
    RunManifest::new(
        "sweep",
        &[data_path, spec_path],
        out_dir,
        Some(spec.gibbs.seed),
        json!({
            "settings": spec.settings.iter().map(|s| s.label()).collect::<Vec<_>>(),
            "sweeps": spec.gibbs.sweeps,
            "burn_in": spec.gibbs.burn_in,
            "thin": spec.gibbs.thin,
        }),
    )
    .write(out_dir)?;

    let dataset = load_csv(data_path)?;
    let rows = run_sweep(&dataset, &spec)?;
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in &rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    write_atomic(&out_dir.join("sweep.csv"), out.as_bytes())
}

/// Render one year of a state field (or of an anomaly node file) as a map.
///
/// The input format is sniffed from the header: a state CSV renders
/// directly; an anomaly membership CSV needs the anomaly list CSV for signs.
pub fn run_render(
    input_path: &Path,
    data_path: &Path,
    year: i32,
    out_path: &Path,
    anomaly_list: Option<&Path>,
) -> Result<()> {
    let dataset = load_csv(data_path)?;
    let t = dataset
        .years()
        .iter()
        .position(|&y| y == year)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "year {year} not in dataset ({}..{})",
                dataset.years().first().copied().unwrap_or_default(),
                dataset.years().last().copied().unwrap_or_default()
            ))
        })?;

    let text = std::fs::read_to_string(input_path).map_err(|e| Error::io(input_path, e))?;
    let header = text.lines().next().unwrap_or_default();
    let field = match header {
        "location_id,year,state" => StateField::read_csv(input_path, dataset.years())?,
        "anomaly_id,location_id,year" => {
            let list = anomaly_list.ok_or_else(|| {
                Error::InvalidParameter(
                    "anomaly membership input needs --anomaly-list for signs".into(),
                )
            })?;
            field_from_anomaly_files(&text, list, &dataset)?
        }
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unrecognized input header `{other}`"),
            })
        }
    };
    if field.n_locations() != dataset.n_locations() {
        return Err(Error::ShapeMismatch(format!(
            "input covers {} locations, dataset has {}",
            field.n_locations(),
            dataset.n_locations()
        )));
    }

    let manifest_path = out_path.with_extension("manifest.json");
    let manifest = RunManifest::new(
        "render",
        &[input_path, data_path],
        out_path.parent().unwrap_or(Path::new(".")),
        None,
        json!({"year": year, "out": out_path.display().to_string()}),
    );
    write_json(&manifest, &manifest_path)?;
    render_year(&field, dataset.grid(), t, out_path)
}

fn field_from_anomaly_files(
    nodes_text: &str,
    list_path: &Path,
    dataset: &RainfallDataset,
) -> Result<StateField> {
    // Signs by anomaly id from the list CSV.
    let list_text = std::fs::read_to_string(list_path).map_err(|e| Error::io(list_path, e))?;
    let mut signs: std::collections::HashMap<usize, Sign> = std::collections::HashMap::new();
    for (i, line) in list_text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("bad anomaly list row `{line}`"),
            });
        }
        let id: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad anomaly id `{}`", fields[0]),
        })?;
        let sign = Sign::parse(fields[1]).ok_or(Error::Parse {
            line: i + 1,
            msg: format!("bad sign `{}`", fields[1]),
        })?;
        signs.insert(id, sign);
    }

    let mut field = StateField::normal(dataset.n_locations(), dataset.n_years());
    for (i, line) in nodes_text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("bad membership row `{line}`"),
            });
        }
        let id: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad anomaly id `{}`", fields[0]),
        })?;
        let s: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad location id `{}`", fields[1]),
        })?;
        let year: i32 = fields[2].parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad year `{}`", fields[2]),
        })?;
        let t = dataset
            .years()
            .iter()
            .position(|&y| y == year)
            .ok_or(Error::Parse {
                line: i + 1,
                msg: format!("year {year} not in dataset"),
            })?;
        let sign = signs.get(&id).ok_or(Error::Parse {
            line: i + 1,
            msg: format!("anomaly {id} missing from the list file"),
        })?;
        if s >= dataset.n_locations() {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("location id {s} out of range"),
            });
        }
        field.set(s, t, sign.state());
    }
    Ok(field)
}

/// Node-level recovery score of a field against planted truth: both anomaly
/// states must match exactly. Used by the synthetic-recovery checks.
pub fn anomaly_state_f1(field: &StateField, truth: &StateField) -> Result<f64> {
    if !field.same_shape(truth) {
        return Err(Error::ShapeMismatch("field vs truth".into()));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for s in 0..field.n_locations() {
        for t in 0..field.n_years() {
            let predicted = field.get(s, t);
            let actual = truth.get(s, t);
            match (predicted.is_anomalous(), actual.is_anomalous()) {
                (true, true) if predicted == actual => tp += 1,
                (true, true) => {
                    // Wrong sign counts against both precision and recall.
                    fp += 1;
                    fn_ += 1;
                }
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    if 2 * tp + fp + fn_ == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_of_perfect_and_empty() {
        let mut truth = StateField::normal(2, 2);
        truth.set(0, 0, State::High);
        truth.set(1, 1, State::Low);
        assert_eq!(anomaly_state_f1(&truth, &truth).unwrap(), 1.0);
        let all_normal = StateField::normal(2, 2);
        // Missing both planted nodes: recall 0.
        assert_eq!(anomaly_state_f1(&all_normal, &truth).unwrap(), 0.0);
        // No anomalies anywhere on either side is a vacuous perfect score.
        assert_eq!(anomaly_state_f1(&all_normal, &all_normal).unwrap(), 1.0);
    }

    #[test]
    fn f1_counts_wrong_sign_twice() {
        let mut truth = StateField::normal(1, 2);
        truth.set(0, 0, State::High);
        let mut pred = StateField::normal(1, 2);
        pred.set(0, 0, State::Low);
        // tp = 0, fp = 1, fn = 1.
        assert_eq!(anomaly_state_f1(&pred, &truth).unwrap(), 0.0);
    }

    #[test]
    fn sibling_aimr_paths() {
        assert_eq!(
            sibling_aimr_path(Path::new("/x/map.csv")),
            Path::new("/x/map_aimr.csv")
        );
        assert_eq!(
            sibling_aimr_path(Path::new("z0.csv")),
            Path::new("z0_aimr.csv")
        );
    }
}
