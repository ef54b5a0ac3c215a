use std::fs;
use std::path::{Path, PathBuf};

use dpcrm::diagnostics::{
    credible_interval, family_label, mean_ks, posterior_predictive, predictive_bands, rank_points,
    BandMode, PredictiveBands,
};
use dpcrm::inference::{run_chains, AcceptanceRates, Draw, PosteriorSamples};
use dpcrm::io::{
    read_json, read_trace_csv, write_bands_csv, write_counts_csv, write_json, write_rank_csv,
    write_spectrum_csv, write_trace_csv, Provenance,
};
use dpcrm::rng::stream;
use dpcrm::sampling::{
    partition_stats, sample_partition_with_dust, sample_weights, PartitionCounts, Truncation,
};
use dpcrm::Family;
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{DataFormat, FitConfig, PredictConfig, ReportConfig, SampleConfig};
use crate::error::{CliError, CliResult};
use crate::svg::{render_loglog, Plot, Series, DATA_COLOR, MODEL_COLOR};

pub const SUMMARY: &str = "summary.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub bytes: u64,
}

/// Everything needed to repeat a run bit for bit.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: &'a [String],
    pub config: &'a C,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
}

fn input(path: &Path) -> CliResult<InputFile> {
    let meta = fs::metadata(path).map_err(|e| CliError::io(path, e))?;
    Ok(InputFile {
        path: path.to_path_buf(),
        bytes: meta.len(),
    })
}

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_manifest<C: Serialize>(
    out: &Path,
    command: &'static str,
    argv: &[String],
    config: &C,
    inputs: Vec<InputFile>,
    mut outputs: Vec<String>,
) -> CliResult<()> {
    outputs.push(MANIFEST.into());
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv,
        config,
        inputs,
        outputs,
    };
    write_json(&m, &out.join(MANIFEST))?;
    Ok(())
}

fn spectrum_points(counts: &PartitionCounts) -> Vec<(f64, f64)> {
    let s = partition_stats(counts);
    s.entries
        .iter()
        .map(|&(j, _)| (j as f64, s.proportion(j)))
        .collect()
}

fn rank_xy(counts: &PartitionCounts) -> Vec<(f64, f64)> {
    rank_points(counts)
        .into_iter()
        .map(|(r, m)| (r as f64, m))
        .collect()
}

fn spectrum_plot(title: String, data: &PartitionCounts, band: Option<&PredictiveBands>) -> Plot {
    let mut series = Vec::new();
    if let Some(b) = band {
        series.push(band_series(b));
    }
    series.push(Series::Points {
        data: spectrum_points(data),
        color: DATA_COLOR,
        label: "data".into(),
    });
    Plot {
        title,
        x_label: "cluster size j".into(),
        y_label: "proportion of clusters of size j".into(),
        series,
    }
}

fn rank_plot(title: String, data: &PartitionCounts, band: Option<&PredictiveBands>) -> Plot {
    let mut series = Vec::new();
    if let Some(b) = band {
        series.push(band_series(b));
    }
    series.push(Series::Steps {
        data: rank_xy(data),
        color: DATA_COLOR,
        label: "data".into(),
    });
    Plot {
        title,
        x_label: "rank".into(),
        y_label: "count".into(),
        series,
    }
}

fn band_series(b: &PredictiveBands) -> Series {
    Series::Band {
        x: b.axis.iter().map(|&a| a as f64).collect(),
        lower: b.lower.clone(),
        upper: b.upper.clone(),
        color: MODEL_COLOR,
        label: "95% predictive".into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSummary {
    pub config: SampleConfig,
    pub n: u64,
    pub k: usize,
    pub truncation_level: f64,
    pub jumps: usize,
    pub expected_truncated_mass: f64,
    pub total_mass: f64,
}

pub fn sample(cfg: &SampleConfig, argv: &[String]) -> CliResult<()> {
    let trunc = Truncation {
        rel_mass_tol: cfg.rel_mass_tol,
        max_jumps: cfg.max_jumps,
        fail_on_budget: true,
    };
    let mut rng = stream(cfg.seed, 0);
    let weights = sample_weights(&cfg.model, &mut rng, &trunc)?;
    info!(
        "{} jumps, truncated mass {:.3e}",
        weights.len(),
        weights.expected_truncated_mass
    );
    let counts = sample_partition_with_dust(&weights, cfg.n, &mut rng)?;
    info!("n = {}, K = {}", counts.n(), counts.k());

    let out = &cfg.out;
    create_out(out)?;
    write_counts_csv(&counts, &out.join("counts.csv"))?;
    write_spectrum_csv(&counts, &out.join("spectrum.csv"))?;
    write_rank_csv(&counts, &out.join("rank.csv"))?;
    let mut outputs: Vec<String> = ["counts.csv", "spectrum.csv", "rank.csv", SUMMARY]
        .map(String::from)
        .to_vec();
    if cfg.plots {
        let name = cfg.model.family.name();
        write_text(
            &out.join("spectrum.svg"),
            &render_loglog(&spectrum_plot(
                format!("{name}: occupancy spectrum"),
                &counts,
                None,
            )),
        )?;
        write_text(
            &out.join("rank.svg"),
            &render_loglog(&rank_plot(format!("{name}: ranked counts"), &counts, None)),
        )?;
        outputs.extend(["spectrum.svg".into(), "rank.svg".into()]);
    }
    let summary = SampleSummary {
        config: cfg.clone(),
        n: counts.n(),
        k: counts.k(),
        truncation_level: weights.truncation_level,
        jumps: weights.len(),
        expected_truncated_mass: weights.expected_truncated_mass,
        total_mass: weights.total_mass,
    };
    write_json(&summary, &out.join(SUMMARY))?;
    write_manifest(out, "sample", argv, cfg, vec![], outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataInfo {
    pub path: PathBuf,
    pub name: String,
    pub provenance: Provenance,
    pub n: u64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainInfo {
    pub chain: usize,
    /// Random stream of `config.chain.seed` that drove the chain.
    pub stream: u64,
    pub trace: String,
    pub retained: usize,
    pub acceptance: AcceptanceRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub param: String,
    pub level: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub config: FitConfig,
    pub data: DataInfo,
    pub chains: Vec<ChainInfo>,
    pub intervals: Vec<Interval>,
}

fn trace_name(chain: usize) -> String {
    format!("trace_{chain}.csv")
}

type Column = (&'static str, fn(&Draw) -> f64);

/// Trace columns with their names under `family` (`θ`, `α` for Pitman–Yor).
fn parameters(family: Family) -> Vec<Column> {
    match family {
        Family::PyBaseline => vec![("theta", |d| d.eta), ("alpha", |d| d.sigma)],
        Family::Ggp => vec![("eta", |d| d.eta), ("sigma", |d| d.sigma), ("u", |d| d.u)],
        _ => vec![
            ("eta", |d| d.eta),
            ("sigma", |d| d.sigma),
            ("tau", |d| d.tau),
            ("u", |d| d.u),
        ],
    }
}

fn intervals(family: Family, draws: &[Draw], level: f64) -> CliResult<Vec<Interval>> {
    let mut out = Vec::new();
    if draws.is_empty() {
        return Ok(out);
    }
    for (param, f) in parameters(family) {
        let xs: Vec<f64> = draws.iter().map(f).collect();
        let (lower, upper) = credible_interval(&xs, level)?;
        out.push(Interval {
            param: param.into(),
            level,
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            lower,
            upper,
        });
    }
    Ok(out)
}

pub fn fit(cfg: &FitConfig, argv: &[String]) -> CliResult<()> {
    let ds = cfg.format.load(&cfg.data)?;
    info!(
        "fitting {} to {} (n = {}, K = {})",
        cfg.model,
        ds.name,
        ds.counts.n(),
        ds.counts.k()
    );
    let chains = run_chains(&ds.counts, cfg.model, &cfg.chain, cfg.chains)?;

    let out = &cfg.out;
    create_out(out)?;
    let mut outputs = Vec::new();
    let mut infos = Vec::new();
    let mut pooled = Vec::new();
    for (i, s) in chains.iter().enumerate() {
        let name = trace_name(i);
        write_trace_csv(&s.draws, &out.join(&name))?;
        infos.push(ChainInfo {
            chain: i,
            stream: i as u64,
            trace: name.clone(),
            retained: s.draws.len(),
            acceptance: s.acceptance,
        });
        pooled.extend_from_slice(&s.draws);
        outputs.push(name);
    }
    let summary = FitSummary {
        config: cfg.clone(),
        data: DataInfo {
            path: cfg.data.clone(),
            name: ds.name,
            provenance: ds.provenance,
            n: ds.counts.n(),
            k: ds.counts.k(),
        },
        chains: infos,
        intervals: intervals(cfg.model, &pooled, 0.95)?,
    };
    write_json(&summary, &out.join(SUMMARY))?;
    outputs.push(SUMMARY.into());
    write_manifest(out, "fit", argv, cfg, vec![input(&cfg.data)?], outputs)
}

fn read_fit(dir: &Path) -> CliResult<(FitSummary, Vec<Draw>)> {
    let path = dir.join(SUMMARY);
    if !path.is_file() {
        return Err(CliError::MissingArtifact(format!(
            "{} not found; run `fit` first",
            path.display()
        )));
    }
    let summary: FitSummary = read_json(&path).map_err(|e| {
        CliError::MissingArtifact(format!("{} is not a fit summary: {e}", path.display()))
    })?;
    let mut draws = Vec::new();
    for c in &summary.chains {
        let p = dir.join(&c.trace);
        if !p.is_file() {
            return Err(CliError::MissingArtifact(format!(
                "{} not found",
                p.display()
            )));
        }
        draws.extend(read_trace_csv(&p)?);
    }
    Ok((summary, draws))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub config: PredictConfig,
    pub model: Family,
    pub data: PathBuf,
    pub n: u64,
    pub replicates: usize,
    pub ks_reweighted: Option<f64>,
    pub ks_plain: Option<f64>,
}

fn empty_bands(mode: BandMode) -> PredictiveBands {
    PredictiveBands {
        mode,
        axis: vec![],
        lower: vec![],
        median: vec![],
        upper: vec![],
    }
}

pub fn predict(cfg: &PredictConfig, argv: &[String]) -> CliResult<()> {
    if cfg.replicates == 1 {
        return Err(CliError::Usage(
            "--replicates must be 0 or at least 2 to form bands".into(),
        ));
    }
    let (fit, draws) = read_fit(&cfg.fit)?;
    let data_path = cfg.data.clone().unwrap_or_else(|| fit.data.path.clone());
    let format = match (cfg.format, &cfg.data) {
        (Some(f), _) => f,
        (None, Some(p)) => DataFormat::guess(p),
        (None, None) => fit.config.format,
    };
    let data = format.load(&data_path)?.counts;
    let n = cfg.n.unwrap_or(data.n());
    let samples = PosteriorSamples {
        family: fit.config.model,
        draws,
        burnin: fit.config.chain.burnin,
        thin: fit.config.chain.thin,
        seed: fit.config.chain.seed,
        acceptance: fit.chains.first().map(|c| c.acceptance).unwrap_or_default(),
    };
    let trunc = Truncation {
        rel_mass_tol: cfg.rel_mass_tol,
        max_jumps: cfg.max_jumps,
        fail_on_budget: false,
    };
    let reps = posterior_predictive(&samples, n, cfg.replicates, &trunc, cfg.seed)?;
    let (spectrum, rank, ks) = if reps.is_empty() {
        (
            empty_bands(BandMode::Spectrum),
            empty_bands(BandMode::Rank),
            None,
        )
    } else {
        (
            predictive_bands(&reps, BandMode::Spectrum)?,
            predictive_bands(&reps, BandMode::Rank)?,
            Some(mean_ks(&data, &reps)?),
        )
    };

    let out = &cfg.out;
    create_out(out)?;
    write_bands_csv(&spectrum, &out.join("bands_spectrum.csv"))?;
    write_bands_csv(&rank, &out.join("bands_rank.csv"))?;
    let label = family_label(fit.config.model);
    let mut w = csv_writer(&out.join("ks.csv"))?;
    w.write_record(["model", "replicates", "ks_reweighted", "ks_plain"])
        .map_err(dpcrm::Error::from)?;
    if let Some((rw, pl)) = ks {
        w.write_record([
            label.to_string(),
            reps.len().to_string(),
            rw.to_string(),
            pl.to_string(),
        ])
        .map_err(dpcrm::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(out.join("ks.csv"), e))?;
    let mut outputs: Vec<String> = ["bands_spectrum.csv", "bands_rank.csv", "ks.csv", SUMMARY]
        .map(String::from)
        .to_vec();
    if cfg.plots {
        let band = |b: &PredictiveBands| (!b.is_empty()).then_some(b).cloned();
        write_text(
            &out.join("bands_spectrum.svg"),
            &render_loglog(&spectrum_plot(
                format!("{label}: posterior predictive occupancy spectrum"),
                &data,
                band(&spectrum).as_ref(),
            )),
        )?;
        write_text(
            &out.join("bands_rank.svg"),
            &render_loglog(&rank_plot(
                format!("{label}: posterior predictive ranked counts"),
                &data,
                band(&rank).as_ref(),
            )),
        )?;
        outputs.extend(["bands_spectrum.svg".into(), "bands_rank.svg".into()]);
    }
    let summary = PredictSummary {
        config: cfg.clone(),
        model: fit.config.model,
        data: data_path.clone(),
        n,
        replicates: reps.len(),
        ks_reweighted: ks.map(|k| k.0),
        ks_plain: ks.map(|k| k.1),
    };
    write_json(&summary, &out.join(SUMMARY))?;
    let inputs = vec![input(&data_path)?, input(&cfg.fit.join(SUMMARY))?];
    write_manifest(out, "predict", argv, cfg, inputs, outputs)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Core(e.into()))
}

fn fit_label(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

pub fn report(cfg: &ReportConfig, argv: &[String]) -> CliResult<()> {
    let out = &cfg.out;
    create_out(out)?;
    let mut ks = csv_writer(&out.join("ks_table.csv"))?;
    ks.write_record([
        "fit",
        "model",
        "n",
        "replicates",
        "ks_reweighted",
        "ks_plain",
    ])
    .map_err(dpcrm::Error::from)?;
    let mut iv = csv_writer(&out.join("intervals.csv"))?;
    iv.write_record(["fit", "model", "param", "level", "mean", "lower", "upper"])
        .map_err(dpcrm::Error::from)?;
    let mut inputs = Vec::new();
    for dir in &cfg.fits {
        let (fit, draws) = read_fit(dir)?;
        inputs.push(input(&dir.join(SUMMARY))?);
        let label = fit_label(dir);
        let model = family_label(fit.config.model);
        for i in intervals(fit.config.model, &draws, cfg.level)? {
            iv.write_record([
                label.clone(),
                model.to_string(),
                i.param,
                i.level.to_string(),
                i.mean.to_string(),
                i.lower.to_string(),
                i.upper.to_string(),
            ])
            .map_err(dpcrm::Error::from)?;
        }
        let pred_path = dir.join("predict").join(SUMMARY);
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let (n, reps, rw, pl) = if pred_path.is_file() {
            let p: PredictSummary = read_json(&pred_path)?;
            inputs.push(input(&pred_path)?);
            (p.n, p.replicates, p.ks_reweighted, p.ks_plain)
        } else {
            (fit.data.n, 0, None, None)
        };
        ks.write_record([
            label,
            model.to_string(),
            n.to_string(),
            reps.to_string(),
            fmt(rw),
            fmt(pl),
        ])
        .map_err(dpcrm::Error::from)?;
    }
    ks.flush()
        .map_err(|e| CliError::io(out.join("ks_table.csv"), e))?;
    iv.flush()
        .map_err(|e| CliError::io(out.join("intervals.csv"), e))?;
    write_manifest(
        out,
        "report",
        argv,
        cfg,
        inputs,
        vec!["ks_table.csv".into(), "intervals.csv".into()],
    )
}
