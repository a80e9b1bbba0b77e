use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use avdiar_core::audio::{energy_vad, read_wav};
use avdiar_core::diarization::group_by_file;
use avdiar_core::features::io::{read_corpus, write_corpus};
use avdiar_core::features::{make_synthetic_corpus, Corpus, CorpusSpec, SpectrogramStatExtractor};
use avdiar_core::pipeline::{
    cluster_windows, default_missing_rates, evaluate_corpus, missing_rate_sweep, vad_windows,
    window_features, FaceDistanceScorer, FusedScorer,
};
use avdiar_core::relation::{masks_csv, read_checkpoint, train, write_checkpoint};
use avdiar_core::scoring::{format_report, report_csv, FileScore};
use avdiar_core::{
    build_similarity_matrix, compute_der, parse_rttm, serialize_rttm, Config, Diarization, PairScorer,
    RelationModel,
};

use crate::{Cli, Command, DiarizeArgs, FusionArgs, GenerateArgs, ScoreArgs, SweepArgs, TrainArgs, Vad};

#[derive(Debug)]
pub enum CliError {
    /// Bad flag combination or value: exit 1.
    Usage(String),
    /// Unreadable, invalid or inconsistent data: exit 2.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn data(context: impl fmt::Display) -> impl FnOnce(avdiar_core::Error) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_config(cli: &Cli) -> CliResult<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(&read_text(path)?).map_err(data(path.display()))?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Generate(a) => generate(a, &cfg),
        Command::Train(a) => train_cmd(a, &cfg),
        Command::Diarize(a) => diarize(a, &cfg),
        Command::Score(a) => score(a, &cfg),
        Command::Sweep(a) => sweep(a, &cfg),
    }
}

/// Train / val / test video counts: 60 / 20 / 20 percent, each at least one.
fn split_sizes(n: usize) -> CliResult<(usize, usize, usize)> {
    if n < 3 {
        return Err(CliError::Usage(format!("--videos {n}: need at least 3 for a three-way split")));
    }
    let val = ((n as f64 * 0.2).round() as usize).max(1);
    let test = val;
    let train = n - val - test;
    if train == 0 {
        return Err(CliError::Usage(format!("--videos {n} leaves no training videos")));
    }
    Ok((train, val, test))
}

fn generate(a: &GenerateArgs, cfg: &Config) -> CliResult<()> {
    let (n_train, n_val, _) = split_sizes(a.videos)?;
    let spec = CorpusSpec {
        n_videos: a.videos,
        min_speakers: a.min_speakers,
        max_speakers: a.speakers,
        off_screen_fraction: a.off_screen,
        segs_per_speaker: a.segs,
        noise_sigma: a.noise,
        seed: cfg.seed,
        c_audio: cfg.c_audio,
        c_face: cfg.c_face,
        h: cfg.h,
        w: cfg.w,
        ..CorpusSpec::default()
    };
    let corpus = make_synthetic_corpus(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let splits = [
        ("train", corpus.subset(0..n_train)),
        ("val", corpus.subset(n_train..n_train + n_val)),
        ("test", corpus.subset(n_train + n_val..a.videos)),
    ];
    for (name, part) in &splits {
        let dir = a.out.join(name);
        write_corpus(part, &dir).map_err(data(dir.display()))?;
        println!("{name}: {} videos, {} segments -> {}", part.videos.len(), part.num_pairs(), dir.display());
    }
    Ok(())
}

fn load_corpus(dir: &Path) -> CliResult<Corpus> {
    read_corpus(dir).map_err(data(dir.display()))
}

fn train_cmd(a: &TrainArgs, cfg: &Config) -> CliResult<()> {
    let tr = load_corpus(&a.corpus.join("train"))?;
    let va = load_corpus(&a.corpus.join("val"))?;
    let scorer = train(&tr, &va, cfg).map_err(data("training"))?;
    create_dir(&a.out)?;
    write_file(&a.out.join("model.ckpt"), write_checkpoint(&scorer.model, scorer.threshold))?;
    write_file(&a.out.join("threshold.txt"), format!("{}\n", scorer.threshold))?;
    write_file(&a.out.join("training_log.csv"), scorer.training_log_csv())?;
    write_file(&a.out.join("validation_log.csv"), scorer.validation_log_csv())?;
    write_file(&a.out.join("masks.csv"), masks_csv(&scorer.model))?;
    let final_loss = scorer.training_log.last().map_or(f64::NAN, |x| x.1);
    println!(
        "trained {} iterations, final loss {final_loss:.6}; selected iteration {} threshold {:.2}",
        scorer.training_log.len(),
        scorer.iteration,
        scorer.threshold
    );
    Ok(())
}

fn load_model(path: &Path) -> CliResult<(RelationModel, f64)> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    read_checkpoint(&bytes).map_err(data(path.display()))
}

fn check_model_dims(model: &RelationModel, corpus: &Corpus, dir: &Path) -> CliResult<()> {
    let d = model.dims();
    match corpus.dims() {
        Some((ca, cf, _, _)) if ca == d.c_audio && (cf == d.c_face || cf == 0) => Ok(()),
        Some(found) => Err(CliError::Data(format!(
            "{}: corpus dims (c_audio, c_face, h, w) = {found:?} do not match the model's {:?}",
            dir.display(),
            (d.c_audio, d.c_face, d.h, d.w)
        ))),
        None => Err(CliError::Data(format!("{}: corpus is empty", dir.display()))),
    }
}

/// Runs `f` with the relation model, fused with the face scorer when
/// `--alpha` is given.
fn with_scorer<T>(
    model: &RelationModel,
    fusion: &FusionArgs,
    f: impl FnOnce(&dyn PairScorer) -> CliResult<T>,
) -> CliResult<T> {
    match fusion.alpha {
        None => f(model),
        Some(alpha) => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(CliError::Usage(format!("--alpha {alpha} outside [0, 1]")));
            }
            if !(fusion.face_tau > 0.0) {
                return Err(CliError::Usage("--face-tau must be positive".into()));
            }
            let face = FaceDistanceScorer { tau: fusion.face_tau };
            f(&FusedScorer { avr: model, face: &face, alpha })
        }
    }
}

fn check_rate(rate: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--missing-rate {rate} outside [0, 1]")))
    }
}

fn diarize(a: &DiarizeArgs, cfg: &Config) -> CliResult<()> {
    check_rate(a.missing_rate)?;
    let (model, threshold) = load_model(&a.checkpoint)?;
    let hyps = match (&a.corpus, &a.wav) {
        (Some(dir), None) => {
            if a.vad == Vad::Energy {
                return Err(CliError::Data(format!(
                    "{}: synthetic corpora carry no audio; energy VAD needs --wav",
                    dir.display()
                )));
            }
            let corpus = load_corpus(dir)?;
            check_model_dims(&model, &corpus, dir)?;
            with_scorer(&model, &a.fusion, |scorer| {
                evaluate_corpus(&corpus, scorer, threshold, cfg, a.missing_rate, cfg.seed)
                    .map(|e| e.hypotheses)
                    .map_err(data("diarization"))
            })?
        }
        (None, Some(wav)) => vec![diarize_wav(a, wav, &model, threshold, cfg)?],
        _ => return Err(CliError::Usage("give exactly one of --corpus or --wav".into())),
    };
    create_dir(&a.out)?;
    for h in &hyps {
        let path = a.out.join(format!("{}.rttm", h.file_id));
        write_file(&path, serialize_rttm(&h.to_records()))?;
    }
    println!("wrote {} hypothesis file(s) to {}", hyps.len(), a.out.display());
    Ok(())
}

fn diarize_wav(a: &DiarizeArgs, wav: &Path, model: &RelationModel, threshold: f64, cfg: &Config) -> CliResult<Diarization> {
    let file_id = wav
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::Usage(format!("{}: no usable file name", wav.display())))?
        .to_string();
    let bytes = fs::read(wav).map_err(|e| CliError::Data(format!("{}: {e}", wav.display())))?;
    let signal = read_wav(&bytes, cfg.sample_rate).map_err(data(wav.display()))?;
    let regions = match a.vad {
        Vad::Energy => energy_vad(&signal, cfg),
        Vad::Oracle => {
            let path = a
                .reference
                .as_ref()
                .ok_or_else(|| CliError::Usage("--vad oracle with --wav needs --ref".into()))?;
            let records = parse_rttm(&read_text(path)?).map_err(data(path.display()))?;
            let files = group_by_file(&records);
            let reference = match files.iter().find(|d| d.file_id == file_id) {
                Some(d) => d,
                None if files.len() == 1 => &files[0],
                None => {
                    return Err(CliError::Data(format!("{}: no reference for {file_id}", path.display())))
                }
            };
            reference.speech_regions()
        }
    };
    let dims = model.dims();
    let ext_cfg = Config {
        c_audio: dims.c_audio,
        h: dims.h,
        w: dims.w,
        ..cfg.clone()
    };
    let extractor = SpectrogramStatExtractor {
        audio: &signal,
        faces: &[],
        cfg: &ext_cfg,
        video_id: &file_id,
    };
    let windows = vad_windows(&regions, cfg);
    let pairs = window_features(&windows, &extractor, a.missing_rate, cfg.seed, &file_id)
        .map_err(data(wav.display()))?;
    with_scorer(model, &a.fusion, |scorer| {
        let s = build_similarity_matrix(&pairs, scorer).map_err(data("scoring"))?;
        cluster_windows(&pairs, &s, threshold, cfg.linkage, &file_id).map_err(data("clustering"))
    })
}

/// All diarizations in an RTTM file or a directory of `.rttm` files, by file id.
fn load_rttms(path: &Path) -> CliResult<BTreeMap<String, Diarization>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "rttm"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let mut records = Vec::new();
    for f in &files {
        records.extend(parse_rttm(&read_text(f)?).map_err(data(f.display()))?);
    }
    Ok(group_by_file(&records).into_iter().map(|d| (d.file_id.clone(), d)).collect())
}

fn score(a: &ScoreArgs, cfg: &Config) -> CliResult<()> {
    let collar = a.collar.unwrap_or(cfg.collar_s);
    let refs = load_rttms(&a.reference)?;
    let hyps = load_rttms(&a.hyp)?;
    if refs.is_empty() {
        return Err(CliError::Data(format!("{}: no reference segments", a.reference.display())));
    }
    for id in hyps.keys().filter(|id| !refs.contains_key(*id)) {
        log::warn!("hypothesis file {id} has no reference; ignored");
    }
    let mut scores = Vec::new();
    for (id, r) in &refs {
        let h = hyps.get(id).cloned().unwrap_or_else(|| Diarization::empty(id.clone()));
        let der = compute_der(r, &h, collar, true).map_err(data(id))?;
        scores.push(FileScore { file_id: id.clone(), der });
    }
    print!("{}", format_report(&scores));
    if let Some(out) = &a.out {
        write_file(out, report_csv(&scores))?;
    }
    Ok(())
}

fn sweep(a: &SweepArgs, cfg: &Config) -> CliResult<()> {
    let (model, threshold) = load_model(&a.checkpoint)?;
    let corpus = load_corpus(&a.corpus)?;
    check_model_dims(&model, &corpus, &a.corpus)?;
    let result = with_scorer(&model, &a.fusion, |scorer| {
        missing_rate_sweep(&corpus, scorer, threshold, cfg, &default_missing_rates(), cfg.seed)
            .map_err(data("sweep"))
    })?;
    let csv = result.to_csv();
    print!("{csv}");
    if let Some(out) = &a.out {
        write_file(out, csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_cover_all_videos() {
        assert_eq!(split_sizes(20).unwrap(), (12, 4, 4));
        assert_eq!(split_sizes(10).unwrap(), (6, 2, 2));
        assert_eq!(split_sizes(3).unwrap(), (1, 1, 1));
        assert!(split_sizes(2).is_err());
        for n in 3..50 {
            let (a, b, c) = split_sizes(n).unwrap();
            assert_eq!(a + b + c, n);
        }
    }
}
