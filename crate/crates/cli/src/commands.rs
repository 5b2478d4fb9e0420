use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ppg_anomaly::augment::build_pretext_dataset;
use ppg_anomaly::data::{
    load_dataset, make_synthetic_cohort, preprocess_all, thin_windows, CohortConfig, DatasetManifest,
    WindowArchive,
};
use ppg_anomaly::detectors::{fit_detector, DetectorFile, DetectorKind, DetectorParams};
use ppg_anomaly::dsp::{Activity, PipelineConfig, Window};
use ppg_anomaly::eval::{
    average_results, format_table, run_scenario, sweep_dimensionality, EncoderBank, EncoderPolicy,
    EncoderRecipe, Mode, RepresentationKind, ScenarioConfig, Task,
};
use ppg_anomaly::nn::{
    encode, load_checkpoint, save_checkpoint, train_pretext, ArchitectureSpec, Checkpoint, TrainConfig,
};
use ppg_anomaly::{Error, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::args::*;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Extract(a) => extract(a),
        Command::Fit(a) => fit(a),
        Command::Score(a) => score(a),
        Command::Scenario(a) => scenario(a),
        Command::Sweep(a) => sweep(a),
    }
}

pub fn parse_band(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::config(format!("band must be LOW:HIGH in Hz, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(Error::config(format!("invalid band {lo}:{hi} Hz")));
    }
    Ok((lo, hi))
}

/// A single value, or every value for `all`.
fn parse_choice<T: FromStr<Err = Error> + Copy>(s: &str, all: &[T]) -> Result<Vec<T>> {
    if s.eq_ignore_ascii_case("all") {
        Ok(all.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let dims = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::config(format!("invalid latent dimension {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.is_empty() {
        return Err(Error::config("no dimensions to sweep"));
    }
    Ok(dims)
}

fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn to_json_pretty(v: &serde_json::Value) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))
}

fn detector_params(a: &DetectorArgs, seed: u64) -> Result<DetectorParams> {
    if a.trees == 0 || a.subsample < 2 {
        return Err(Error::config("isolation forest needs at least one tree and a subsample of 2"));
    }
    if !(a.variance_threshold > 0.0 && a.variance_threshold <= 1.0) {
        return Err(Error::config("PCA variance threshold must be in (0, 1]"));
    }
    Ok(DetectorParams {
        n_trees: a.trees,
        subsample: a.subsample,
        variance_threshold: a.variance_threshold,
        seed,
    })
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let cfg = TrainConfig {
        learning_rate: a.lr,
        decay: a.decay,
        batch_size: a.batch,
        epochs: a.epochs,
        seed: a.seed,
        repeats: a.repeats,
    };
    cfg.validate()?;
    if a.pretext_stride == 0 {
        return Err(Error::config("pretext stride must be at least 1"));
    }
    Ok(cfg)
}

fn arch_spec(a: &TrainArgs, input_len: usize) -> Result<ArchitectureSpec> {
    let spec = ArchitectureSpec {
        input_len,
        kernel: a.kernel,
        channels: a.channels,
        blocks: a.blocks,
        latent_dim: a.latent_dim,
        ..ArchitectureSpec::default()
    };
    spec.validate()?;
    Ok(spec)
}

fn load_archive(path: &Path) -> Result<WindowArchive> {
    let archive = WindowArchive::load(path)?;
    if archive.windows.is_empty() {
        return Err(Error::ingestion(path, "archive contains no windows"));
    }
    Ok(archive)
}

fn synth(a: SynthArgs) -> Result<()> {
    let band = parse_band(&a.band)?;
    PipelineConfig {
        low_hz: band.0,
        high_hz: band.1,
        ..PipelineConfig::default()
    }
    .validate_for_fs(a.fs)?;
    let cfg = CohortConfig {
        n_subjects: a.subjects,
        seed: a.seed,
        duration_s: a.duration_s,
        fs: a.fs,
        band,
    };
    let cohort = make_synthetic_cohort(&cfg)?;
    let manifest = cohort.write(&a.out, band)?;
    println!(
        "wrote {} recordings and {}",
        manifest.records.len(),
        a.out.join("manifest.json").display()
    );
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let band = a.pipeline.band.as_deref().map(parse_band).transpose()?;
    let probe = PipelineConfig {
        low_hz: band.map_or(0.1, |b| b.0),
        high_hz: band.map_or(10.0, |b| b.1),
        window_s: a.pipeline.window_s,
        overlap_s: a.pipeline.overlap_s,
        target_len: a.pipeline.target_len,
    };
    probe.validate()?;
    let manifest = DatasetManifest::load(&a.manifest)?;
    manifest.validate()?;
    let (low_hz, high_hz) = band.unwrap_or(manifest.band);
    let cfg = PipelineConfig { low_hz, high_hz, ..probe };
    let fs = manifest
        .fs()
        .ok_or_else(|| Error::ingestion(&a.manifest, "manifest lists no records"))?;
    cfg.validate_for_fs(fs)?;

    let (series, _) = load_dataset(&manifest)?;
    let (windows, _) = preprocess_all(&series, &cfg)?;
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for w in &windows {
        *counts
            .entry((w.source_subject.clone(), w.source_activity.to_string()))
            .or_default() += 1;
    }
    let archive = WindowArchive { fs, pipeline: cfg, windows };
    archive.save(&a.out)?;
    for ((s, act), n) in &counts {
        println!("{s}\t{act}\t{n}");
    }
    println!("wrote {} windows to {}", archive.windows.len(), a.out.display());
    Ok(())
}

fn train(a: TrainCmdArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let archive = load_archive(&a.archive)?;
    let spec = arch_spec(&a.train, archive.window_len())?;

    let mut subjects: Vec<&str> = archive.windows.iter().map(|w| w.source_subject.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    if a.loso && subjects.len() < 2 {
        return Err(Error::config("leave-one-subject-out training needs at least two subjects"));
    }
    let held_out: Vec<Option<&str>> = if a.loso {
        subjects.iter().map(|s| Some(*s)).collect()
    } else {
        vec![None]
    };

    for r in 0..cfg.repeats {
        let run = TrainConfig {
            seed: cfg.seed.wrapping_add(r as u64),
            repeats: 1,
            ..cfg.clone()
        };
        let dir = if cfg.repeats == 1 {
            a.out.clone()
        } else {
            a.out.join(format!("repeat-{r}"))
        };
        let trained = held_out
            .par_iter()
            .map(|held| {
                let pool: Vec<Window> = archive
                    .windows
                    .iter()
                    .filter(|w| Some(w.source_subject.as_str()) != *held)
                    .cloned()
                    .collect();
                let dataset = build_pretext_dataset(&thin_windows(&pool, a.train.pretext_stride))?;
                let (params, trace) = train_pretext(&dataset, &spec, &run)?;
                Ok(Checkpoint {
                    params,
                    train_config: run.clone(),
                    seed: run.seed,
                    held_out_subject: held.map(str::to_string),
                    trace,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        create_dir(&dir)?;
        for ckpt in &trained {
            let name = match &ckpt.held_out_subject {
                Some(s) => format!("loso-{s}"),
                None => "shared".to_string(),
            };
            let path = dir.join(format!("{name}.ckpt"));
            save_checkpoint(&path, ckpt)?;
            let trace = serde_json::to_value(&ckpt.trace).map_err(|e| Error::Format(e.to_string()))?;
            write_text(&dir.join(format!("{name}.trace.json")), &to_json_pretty(&trace)?)?;
            let last = ckpt.trace.epochs.last();
            println!(
                "{}\tloss {:.5}\tpretext AUC {:.4}",
                path.display(),
                last.map_or(f64::NAN, |e| e.loss),
                last.map_or(f64::NAN, |e| e.auc)
            );
        }
    }
    Ok(())
}

/// A checkpoint file becomes a shared encoder; a directory contributes every
/// `*.ckpt` inside it, keyed by held-out subject.
fn load_bank(path: &Path, input_len: usize) -> Result<EncoderBank> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::ingestion(path, "no checkpoints found"));
    }
    let mut bank = EncoderBank::default();
    for f in files {
        let ckpt = load_checkpoint(&f)?;
        if ckpt.params.spec().input_len != input_len {
            return Err(Error::config(format!(
                "{} expects windows of {} samples, archive has {input_len}",
                f.display(),
                ckpt.params.spec().input_len
            )));
        }
        match ckpt.held_out_subject {
            Some(s) => {
                bank.per_subject.insert(s, ckpt.params);
            }
            None if bank.shared.is_some() => {
                return Err(Error::config(format!(
                    "{} holds more than one shared encoder",
                    path.display()
                )));
            }
            None => bank.shared = Some(ckpt.params),
        }
    }
    Ok(bank)
}

fn load_single(path: &Path, input_len: usize) -> Result<ppg_anomaly::nn::ModelParams> {
    if path.is_dir() {
        return Err(Error::config(format!("{} is a directory, expected a checkpoint file", path.display())));
    }
    let bank = load_bank(path, input_len)?;
    Ok(bank
        .shared
        .or_else(|| bank.per_subject.into_values().next())
        .expect("load_bank returns at least one encoder"))
}

fn extract(a: ExtractArgs) -> Result<()> {
    let archive = load_archive(&a.archive)?;
    let params = load_single(&a.checkpoint, archive.window_len())?;
    let reps = encode(&params, &archive.windows)?;
    let rows: Vec<serde_json::Value> = archive
        .windows
        .iter()
        .zip(&reps)
        .map(|(w, r)| {
            json!({
                "subject": w.source_subject,
                "activity": w.source_activity.to_string(),
                "index": w.index,
                "values": r.values,
            })
        })
        .collect();
    let doc = json!({ "latent_dim": params.spec().latent_dim, "rows": rows });
    write_text(&a.out, &to_json_pretty(&doc)?)?;
    println!("encoded {} windows to {} dimensions", rows.len(), params.spec().latent_dim);
    Ok(())
}

/// Selected windows and the detector input for each.
fn select(archive: &WindowArchive, s: &SelectArgs) -> Result<(Vec<Window>, Vec<Vec<f64>>)> {
    let activities = s
        .activities
        .iter()
        .map(|a| a.parse::<Activity>())
        .collect::<Result<Vec<_>>>()?;
    let windows: Vec<Window> = archive
        .windows
        .iter()
        .filter(|w| s.subjects.is_empty() || s.subjects.contains(&w.source_subject))
        .filter(|w| activities.is_empty() || activities.contains(&w.source_activity))
        .cloned()
        .collect();
    if windows.is_empty() {
        return Err(Error::config("no windows match the subject/activity selection"));
    }
    let features = match &s.checkpoint {
        Some(p) => {
            let params = load_single(p, archive.window_len())?;
            encode(&params, &windows)?.into_iter().map(|r| r.values).collect()
        }
        None => windows.iter().map(|w| w.values.clone()).collect(),
    };
    Ok((windows, features))
}

fn fit(a: FitArgs) -> Result<()> {
    let kind: DetectorKind = a.detector.parse()?;
    let params = detector_params(&a.params, a.seed)?;
    let archive = load_archive(&a.archive)?;
    let (windows, features) = select(&archive, &a.select)?;
    let model = fit_detector(kind, &features, &params)?;
    DetectorFile::new(model, a.seed).save(&a.out)?;
    println!("fitted {} on {} windows", kind.name(), windows.len());
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let file = DetectorFile::load(&a.model)?;
    let archive = load_archive(&a.archive)?;
    let (windows, features) = select(&archive, &a.select)?;
    let scores = file.model.score_many(&features)?;
    let rows: Vec<serde_json::Value> = windows
        .iter()
        .zip(&scores)
        .map(|(w, s)| {
            json!({
                "subject": w.source_subject,
                "activity": w.source_activity.to_string(),
                "index": w.index,
                "score": s,
            })
        })
        .collect();
    write_text(&a.out, &to_json_pretty(&json!({ "detector": file.model.kind().name(), "rows": rows }))?)?;
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    println!("scored {} windows, mean score {mean:.6}", scores.len());
    Ok(())
}

/// One config per task × mode × detector combination, all validated.
fn scenario_configs(a: &ScenarioArgs, reps: &[RepresentationKind], seed: u64) -> Result<Vec<ScenarioConfig>> {
    let tasks = parse_choice(&a.task, &Task::ALL)?;
    let modes = parse_choice(&a.mode, &Mode::ALL)?;
    let detectors = parse_choice(&a.detector, &DetectorKind::ALL)?;
    let params = detector_params(&a.params, seed)?;
    let normal: Activity = a.normal.parse()?;
    let anomalous: Activity = a.anomalous.parse()?;
    let mut out = Vec::new();
    for &task in &tasks {
        for &mode in &modes {
            for &detector in &detectors {
                for &representation in reps {
                    let cfg = ScenarioConfig {
                        task,
                        mode,
                        normal_activity: normal.clone(),
                        anomalous_activity: anomalous.clone(),
                        detector,
                        detector_params: params.clone(),
                        representation,
                        folds: a.folds,
                        seed,
                    };
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
    }
    Ok(out)
}

fn scenario(a: ScenarioCmdArgs) -> Result<()> {
    let reps = parse_choice(&a.representation, &RepresentationKind::ALL)?;
    if reps.contains(&RepresentationKind::Learned) && a.checkpoint.is_empty() {
        return Err(Error::config("the learned representation needs --checkpoint"));
    }
    let configs = scenario_configs(&a.scenario, &reps, a.seed)?;
    let archive = load_archive(&a.archive)?;
    let banks = if reps.contains(&RepresentationKind::Learned) {
        a.checkpoint
            .iter()
            .map(|p| load_bank(p, archive.window_len()))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut results = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let r = match cfg.representation {
            RepresentationKind::Original => run_scenario(&archive.windows, cfg, None)?,
            RepresentationKind::Learned => {
                let runs = banks
                    .iter()
                    .map(|b| run_scenario(&archive.windows, cfg, Some(b)))
                    .collect::<Result<Vec<_>>>()?;
                average_results(&runs)?
            }
        };
        log::info!("{}: {:.4}", cfg.label(), r.mean);
        results.push(r);
    }

    let table = format_table(&results);
    print!("{table}");
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_text(&dir.join("report.txt"), &table)?;
        let json = serde_json::to_string_pretty(&results).map_err(|e| Error::Format(e.to_string()))?;
        write_text(&dir.join("report.json"), &json)?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let dims = parse_dims(&a.dims)?;
    let train = train_config(&a.train)?;
    let configs = scenario_configs(&a.scenario, &[RepresentationKind::Learned], a.train.seed)?;
    let [cfg] = configs.as_slice() else {
        return Err(Error::config("a sweep runs a single task, mode and detector"));
    };
    let archive = load_archive(&a.archive)?;
    let recipe = EncoderRecipe {
        spec: arch_spec(&a.train, archive.window_len())?,
        train,
        pretext_stride: a.train.pretext_stride,
    };
    log::info!("encoder policy {:?}", EncoderPolicy::for_task(cfg.task));
    let result = sweep_dimensionality(&archive.windows, &dims, cfg, &recipe)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let csv = result.to_csv();
    print!("{csv}");
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_text(&dir.join("sweep.csv"), &csv)?;
        write_text(&dir.join("sweep.json"), &result.to_json()?)?;
    }
    match result.failures() {
        0 => Ok(()),
        n => Err(Error::Eval(format!("{n} sweep entries failed"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_parsing() {
        assert_eq!(parse_band("0.5:8").unwrap(), (0.5, 8.0));
        assert!(parse_band("8:0.5").is_err());
        assert!(parse_band("0:4").is_err());
        assert!(parse_band("1-4").is_err());
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("2, 8,64").unwrap(), vec![2, 8, 64]);
        assert!(parse_dims("").is_err());
        assert!(parse_dims("2,x").is_err());
    }

    #[test]
    fn choices() {
        assert_eq!(parse_choice("all", &Task::ALL).unwrap().len(), 2);
        assert_eq!(parse_choice("pca", &DetectorKind::ALL).unwrap(), vec![DetectorKind::Pca]);
        assert!(parse_choice("nope", &Mode::ALL).is_err());
    }
}
