//! The subcommands, callable as library functions. Each `cmd_*` function
//! reads its inputs, writes its outputs under `out` and returns what it
//! computed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sparserec::evaluation::{
    build_scoreset, generate_synthetic, predict_all, verification_metrics, Protocol, ScoreSet, SyntheticParams,
    VerificationMetrics,
};
use sparserec::features::flatten_activations;
use sparserec::pca::{feasible_components, pca_fit, pca_sweep, pca_transform};
use sparserec::{build_dictionary, Classifier, Dataset, PcaModel, PcaSelection, SacrcConfig};

use crate::bundle::ModelBundle;
use crate::config::{PcaSetting, ProtocolSetting, RunConfig, AUTO_PCA_CAP};
use crate::error::{CliError, CliResult};
use crate::formats::{fmt_f64, pairs_from_csv, roc_to_csv, scores_to_csv, FeatureFile, FeatureLayout};

pub const MODEL_FILE: &str = "model.bin";
pub const ENROLMENT_FILE: &str = "enrolment.csrc";
pub const PROBE_FILE: &str = "probes.csrc";

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

/// Reads a feature file (binary or CSV) as a dataset.
pub fn load_dataset(path: &Path) -> CliResult<Dataset> {
    FeatureFile::read(path)?
        .to_dataset()
        .map_err(|e| CliError::data(path, e))
}

pub fn cmd_flatten(input: &Path, output: &Path) -> CliResult<FeatureFile> {
    let file = FeatureFile::read(input)?;
    let tensors = file.tensors().map_err(|e| CliError::data(input, e))?;
    let records: Vec<Vec<f64>> = tensors.iter().map(flatten_activations).collect();
    let flat = FeatureFile::with_layout(
        FeatureLayout::Flat {
            dim: file.layout.record_len(),
        },
        records,
        file.labels,
        file.ids,
    )
    .map_err(|e| CliError::format(input, e))?;
    flat.write(output)?;
    Ok(flat)
}

/// The PCA selection a config asks for on this enrolment set, if any.
pub fn pca_selection(setting: PcaSetting, enrolment: &Dataset) -> sparserec::Result<Option<PcaSelection>> {
    Ok(match setting {
        PcaSetting::Off => None,
        PcaSetting::Auto => Some(PcaSelection::Fixed(feasible_components(enrolment, AUTO_PCA_CAP)?)),
        PcaSetting::Fixed(k) => Some(PcaSelection::Fixed(k)),
        PcaSetting::Retain(rho) => Some(PcaSelection::Retain(rho)),
    })
}

/// Projects the enrolment set with an already fitted PCA (if any), builds the
/// dictionary and resolves the hyperparameters.
pub fn assemble_model(enrolment: &Dataset, pca: Option<PcaModel>, cfg: &RunConfig) -> sparserec::Result<ModelBundle> {
    let projected = match &pca {
        Some(model) => enrolment.map_values(|x| pca_transform(x, model))?,
        None => enrolment.clone(),
    };
    let dictionary = build_dictionary(&projected)?;
    let config = cfg.resolve(SacrcConfig::for_atoms(dictionary.num_atoms()));
    config.validate(dictionary.num_atoms())?;
    Ok(ModelBundle {
        pca,
        dictionary,
        config,
    })
}

pub fn fit_model(enrolment: &Dataset, cfg: &RunConfig) -> sparserec::Result<ModelBundle> {
    let pca = pca_selection(cfg.pca, enrolment)?
        .map(|sel| pca_fit(enrolment, sel))
        .transpose()?;
    assemble_model(enrolment, pca, cfg)
}

fn echo_block(cfg: &RunConfig, model: &ModelBundle, resolved: &SacrcConfig) -> String {
    let mut out = String::from("config\n");
    for (k, v) in cfg.echo(resolved, model.components()) {
        writeln!(out, "  {k} = {v}").unwrap();
    }
    out
}

/// Fits and writes `model.bin` and `fit_report.txt` into `out`.
pub fn cmd_fit(enrolment_path: &Path, cfg: &RunConfig, out: &Path) -> CliResult<ModelBundle> {
    let enrolment = load_dataset(enrolment_path)?;
    let model = fit_model(&enrolment, cfg).map_err(|e| CliError::data(enrolment_path, e))?;
    ensure_dir(out)?;
    model.write(&out.join(MODEL_FILE))?;

    let mut report = String::from("Model fit\n");
    writeln!(report, "enrolment samples  {}", enrolment.len()).unwrap();
    writeln!(report, "classes            {}", model.dictionary.num_classes()).unwrap();
    writeln!(report, "input dimension    {}", enrolment.dim()).unwrap();
    writeln!(report, "dictionary         {} x {}", model.dictionary.dim(), model.dictionary.num_atoms()).unwrap();
    if let Some(p) = &model.pca {
        let retained = p.variance_fractions.last().copied().unwrap_or(0.0);
        writeln!(report, "retained variance  {}%", pct(retained)).unwrap();
    }
    report.push('\n');
    report.push_str(&echo_block(cfg, &model, &model.config));
    write_file(&out.join("fit_report.txt"), report)?;
    Ok(model)
}

/// Applies the model's PCA (if any) to the probes.
pub fn project_probes(probes: &Dataset, model: &ModelBundle) -> sparserec::Result<Dataset> {
    match &model.pca {
        Some(p) => probes.map_values(|x| pca_transform(x, p)),
        None => Ok(probes.clone()),
    }
}

pub fn resolve_protocol(setting: &ProtocolSetting) -> CliResult<Protocol> {
    Ok(match setting {
        ProtocolSetting::AllVsAll => Protocol::AllVsAll,
        ProtocolSetting::Pairs(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Protocol::Pairs(pairs_from_csv(&text).map_err(|e| CliError::format(path, e))?)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub scores: ScoreSet,
    pub metrics: VerificationMetrics,
    /// Hyperparameters actually used.
    pub config: SacrcConfig,
}

/// Scores already loaded probes against a model.
pub fn verify_dataset(
    probes: &Dataset,
    model: &ModelBundle,
    cfg: &RunConfig,
    protocol: &Protocol,
) -> sparserec::Result<Verification> {
    let config = cfg.resolve(model.config);
    let recognizer = model.recognizer(config)?;
    let projected = project_probes(probes, model)?;
    let scores = build_scoreset(&projected, &recognizer, cfg.classifier, cfg.score, protocol)?;
    let metrics = verification_metrics(&scores, &cfg.far_targets)?;
    Ok(Verification {
        scores,
        metrics,
        config,
    })
}

fn gmr_key(target: f64) -> String {
    format!("gmr_at_far_{target}")
}

/// The human report: counts, the EER and GMR panel, flags, config echo.
pub fn verification_report(v: &Verification, cfg: &RunConfig, model: &ModelBundle) -> String {
    let m = &v.metrics;
    let mut out = String::from("Verification report\n");
    writeln!(out, "genuine scores   {}", m.genuine_count).unwrap();
    writeln!(out, "impostor scores  {}", m.impostor_count).unwrap();
    out.push('\n');

    let mut header = vec!["EER (%)".to_string()];
    let mut row = vec![pct(m.eer)];
    for g in &m.gmr_at_far {
        header.push(format!("GMR@FAR={} (%)", g.far_target));
        row.push(pct(g.gmr));
    }
    let widths: Vec<usize> = header.iter().map(|h| h.len().max(8)).collect();
    for cells in [&header, &row] {
        let line: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", line.join("  ")).unwrap();
    }
    for g in &m.gmr_at_far {
        if g.insufficient_impostors {
            writeln!(out, "note: FAR={} has fewer than {} impostor scores", g.far_target, (1.0 / g.far_target).ceil()).unwrap();
        }
        if g.target_unreachable {
            writeln!(out, "note: FAR={} is not reached by any observed threshold", g.far_target).unwrap();
        }
    }
    out.push('\n');
    out.push_str(&echo_block(cfg, model, &v.config));
    out
}

/// Machine-readable `key=value` lines with full-precision values.
pub fn verification_kv(v: &Verification, cfg: &RunConfig, model: &ModelBundle) -> String {
    let m = &v.metrics;
    let mut out = String::new();
    writeln!(out, "eer={}", fmt_f64(m.eer)).unwrap();
    for g in &m.gmr_at_far {
        let key = gmr_key(g.far_target);
        writeln!(out, "{key}={}", fmt_f64(g.gmr)).unwrap();
        writeln!(out, "{key}.threshold={}", fmt_f64(g.threshold)).unwrap();
        writeln!(out, "{key}.far={}", fmt_f64(g.far)).unwrap();
        writeln!(out, "{key}.insufficient_impostors={}", g.insufficient_impostors).unwrap();
        writeln!(out, "{key}.target_unreachable={}", g.target_unreachable).unwrap();
    }
    writeln!(out, "genuine_count={}", m.genuine_count).unwrap();
    writeln!(out, "impostor_count={}", m.impostor_count).unwrap();
    for (k, val) in cfg.echo(&v.config, model.components()) {
        writeln!(out, "config.{k}={val}").unwrap();
    }
    out
}

/// Writes `scores.csv`, `roc.csv`, `report.txt` and `report.kv` into `out`.
pub fn cmd_verify(probe_path: &Path, model_path: &Path, cfg: &RunConfig, out: &Path) -> CliResult<Verification> {
    let model = ModelBundle::read(model_path)?;
    let probes = load_dataset(probe_path)?;
    let protocol = resolve_protocol(&cfg.protocol)?;
    let v = verify_dataset(&probes, &model, cfg, &protocol).map_err(|e| CliError::data(probe_path, e))?;
    ensure_dir(out)?;
    write_file(&out.join("scores.csv"), scores_to_csv(&v.scores))?;
    write_file(&out.join("roc.csv"), roc_to_csv(&v.metrics.roc))?;
    write_file(&out.join("report.txt"), verification_report(&v, cfg, &model))?;
    write_file(&out.join("report.kv"), verification_kv(&v, cfg, &model))?;
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentificationRow {
    pub classifier: Classifier,
    pub correct: usize,
    pub total: usize,
}

impl IdentificationRow {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

pub fn display_name(c: Classifier) -> &'static str {
    match c {
        Classifier::Sacrc => "SA-CRC",
        Classifier::Crc => "CRC",
        Classifier::Src => "SRC",
        Classifier::Knn1 => "KNN(Euc,1)",
    }
}

pub fn identify_dataset(
    probes: &Dataset,
    model: &ModelBundle,
    cfg: &RunConfig,
    classifiers: &[Classifier],
) -> sparserec::Result<Vec<IdentificationRow>> {
    let recognizer = model.recognizer(cfg.resolve(model.config))?;
    let c = recognizer.num_classes();
    if let Some(p) = probes.samples().iter().find(|p| p.class_label >= c) {
        return Err(sparserec::Error::UnknownClass {
            class: p.class_label,
            num_classes: c,
        });
    }
    let projected = project_probes(probes, model)?;
    classifiers
        .iter()
        .map(|&classifier| {
            let predicted = predict_all(&projected, &recognizer, classifier)?;
            let correct = predicted
                .iter()
                .zip(projected.samples())
                .filter(|(p, s)| **p == s.class_label)
                .count();
            Ok(IdentificationRow {
                classifier,
                correct,
                total: projected.len(),
            })
        })
        .collect()
}

/// Writes `identify.csv` and `identify.txt` into `out`.
pub fn cmd_identify(
    probe_path: &Path,
    model_path: &Path,
    cfg: &RunConfig,
    classifiers: &[Classifier],
    out: &Path,
) -> CliResult<Vec<IdentificationRow>> {
    let model = ModelBundle::read(model_path)?;
    let probes = load_dataset(probe_path)?;
    let rows = identify_dataset(&probes, &model, cfg, classifiers).map_err(|e| CliError::data(probe_path, e))?;
    ensure_dir(out)?;

    let mut csv = String::from("classifier,rank1_accuracy,correct,total\n");
    let mut txt = String::from("Identification (rank-1)\n");
    writeln!(txt, "{:<12}  {:>12}", "Method", "Accuracy (%)").unwrap();
    for r in &rows {
        writeln!(csv, "{},{},{},{}", r.classifier.name(), fmt_f64(r.accuracy()), r.correct, r.total).unwrap();
        writeln!(txt, "{:<12}  {:>12}", display_name(r.classifier), pct(r.accuracy())).unwrap();
    }
    txt.push('\n');
    txt.push_str(&echo_block(cfg, &model, &cfg.resolve(model.config)));
    write_file(&out.join("identify.csv"), csv)?;
    write_file(&out.join("identify.txt"), txt)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub metrics: VerificationMetrics,
}

/// One verification run per `K`, sharing a single eigendecomposition.
pub fn sweep_datasets(
    enrolment: &Dataset,
    probes: &Dataset,
    ks: &[usize],
    cfg: &RunConfig,
) -> sparserec::Result<Vec<SweepRow>> {
    let models = pca_sweep(enrolment, ks)?;
    let protocol = Protocol::AllVsAll;
    ks.iter()
        .zip(models)
        .map(|(&k, pca)| {
            let model = assemble_model(enrolment, Some(pca), cfg)?;
            let v = verify_dataset(probes, &model, cfg, &protocol)?;
            Ok(SweepRow { k, metrics: v.metrics })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow], far_targets: &[f64]) -> String {
    let mut out = String::from("k,eer");
    for t in far_targets {
        write!(out, ",{}", gmr_key(*t)).unwrap();
    }
    out.push('\n');
    for r in rows {
        write!(out, "{},{}", r.k, fmt_f64(r.metrics.eer)).unwrap();
        for g in &r.metrics.gmr_at_far {
            write!(out, ",{}", fmt_f64(g.gmr)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes `sweep.csv` and `sweep.txt` into `out`.
pub fn cmd_sweep_pcs(
    enrolment_path: &Path,
    probe_path: &Path,
    ks: &[usize],
    cfg: &RunConfig,
    out: &Path,
) -> CliResult<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(CliError::Config("sweep needs at least one K".into()));
    }
    if cfg.protocol != ProtocolSetting::AllVsAll {
        return Err(CliError::Config("sweep-pcs supports only the all-vs-all protocol".into()));
    }
    let enrolment = load_dataset(enrolment_path)?;
    let probes = load_dataset(probe_path)?;
    let rows = sweep_datasets(&enrolment, &probes, ks, cfg).map_err(|e| CliError::data(enrolment_path, e))?;
    ensure_dir(out)?;
    write_file(&out.join("sweep.csv"), sweep_csv(&rows, &cfg.far_targets))?;

    let mut txt = String::from("Verification by number of principal components\n");
    write!(txt, "{:>6}  {:>8}", "K", "EER (%)").unwrap();
    for t in &cfg.far_targets {
        write!(txt, "  {:>18}", format!("GMR@FAR={t} (%)")).unwrap();
    }
    txt.push('\n');
    for r in &rows {
        write!(txt, "{:>6}  {:>8}", r.k, pct(r.metrics.eer)).unwrap();
        for g in &r.metrics.gmr_at_far {
            write!(txt, "  {:>18}", pct(g.gmr)).unwrap();
        }
        txt.push('\n');
    }
    txt.push_str("\nconfig\n");
    let resolved = cfg.resolve(SacrcConfig::for_atoms(enrolment.len()));
    for (k, v) in cfg.echo(&resolved, None) {
        if k != "pca" && k != "pca_components" {
            writeln!(txt, "  {k} = {v}").unwrap();
        }
    }
    writeln!(txt, "  pca_components = {}", ks.iter().map(usize::to_string).collect::<Vec<_>>().join(",")).unwrap();
    write_file(&out.join("sweep.txt"), txt)?;
    Ok(rows)
}

/// Writes `enrolment.csrc` and `probes.csrc` into `out`. With a tensor shape
/// `(n1, n2, n)` the files hold activation tensors (`n1 * n2 * n` must equal
/// the dimension).
pub fn cmd_gen_synthetic(
    params: &SyntheticParams,
    tensor_shape: Option<(usize, usize, usize)>,
    out: &Path,
) -> CliResult<(PathBuf, PathBuf)> {
    let (enrolment, probes) = generate_synthetic(params)?;
    let layout = match tensor_shape {
        None => FeatureLayout::Flat { dim: params.dim },
        Some((n1, n2, channels)) => {
            if n1 * n2 * channels != params.dim {
                return Err(CliError::Config(format!(
                    "tensor shape {n1}x{n2}x{channels} has {} entries, dimension is {}",
                    n1 * n2 * channels,
                    params.dim
                )));
            }
            FeatureLayout::Tensor { n1, n2, channels }
        }
    };
    ensure_dir(out)?;
    let mut paths = Vec::with_capacity(2);
    for (ds, name) in [(&enrolment, ENROLMENT_FILE), (&probes, PROBE_FILE)] {
        let path = out.join(name);
        let flat = FeatureFile::from_dataset(ds).map_err(|e| CliError::format(&path, e))?;
        let file = FeatureFile::with_layout(layout, flat.records, flat.labels, flat.ids)
            .map_err(|e| CliError::format(&path, e))?;
        file.write(&path)?;
        paths.push(path);
    }
    let probes_path = paths.pop().unwrap();
    Ok((paths.pop().unwrap(), probes_path))
}
