//! The five subcommands, callable in-process.

use std::fs;
use std::io::Write;
use std::path::Path;

use collabtrack_core::linalg::Matrix;
use collabtrack_core::network::{self, pretrain_stack, TrainBatch};
use collabtrack_core::sampling::{harvest_offline, AnnotatedSequence, Label};
use collabtrack_core::{evaluate, tracker, GrayFrame, Rect, TrackRng, ARCHITECTURE, PATCH_SIDE};
use rand::SeedableRng;

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};
use crate::{formats, pgm, synth, GROUND_TRUTH_FILE};

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainSummary {
    pub positives: usize,
    pub negatives: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSummary {
    pub frames: usize,
    pub finetunes: usize,
    pub mean_occlusion_rate: f64,
}

fn say(out: &mut dyn Write, msg: std::fmt::Arguments<'_>) -> AppResult<()> {
    out.write_fmt(msg)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| AppError::io("<stdout>", e))
}

fn annotated(dir: &Path) -> AppResult<(Vec<GrayFrame>, Vec<Rect>)> {
    let frames = pgm::load_sequence(dir)?;
    let boxes = formats::read_ground_truth(&dir.join(GROUND_TRUTH_FILE))?;
    if frames.len() != boxes.len() {
        return Err(AppError::Format(format!(
            "{}: {} frames but {} ground-truth rows",
            dir.display(),
            frames.len(),
            boxes.len()
        )));
    }
    Ok((frames, boxes))
}

/// Harvests the training sequences, pretrains and trains the network, and
/// writes the model file.
pub fn pretrain(cfg: &RunConfig, out: &mut dyn Write) -> AppResult<PretrainSummary> {
    let dirs = cfg.paths("train_sequences");
    if dirs.is_empty() {
        return Err(AppError::Usage("config key train_sequences must list at least one directory".into()));
    }
    let rbm_cfg = cfg.pretrain_config()?;
    let train_cfg = cfg.train_config()?;
    let model_path = cfg.path("model")?;
    let per_pos = cfg.usize("harvest_positives")?;
    let per_neg = cfg.usize("harvest_negatives")?;
    let mut rng = TrackRng::seed_from_u64(cfg.u64("seed")?);

    let data: Vec<(Vec<GrayFrame>, Vec<Rect>)> = dirs.iter().map(|d| annotated(d)).collect::<AppResult<_>>()?;
    let sequences: Vec<AnnotatedSequence<'_>> = data
        .iter()
        .map(|(frames, boxes)| AnnotatedSequence { frames, boxes })
        .collect();
    let harvest = harvest_offline(&sequences, per_pos, per_neg, &mut rng)?;
    if harvest.is_empty() {
        return Err(AppError::Format("harvest produced no training patches".into()));
    }
    let positives = harvest.iter().filter(|p| p.label == Label::Positive).count();
    let negatives = harvest.len() - positives;
    let inputs = Matrix::from_rows(&harvest.iter().map(|p| p.patch.values()).collect::<Vec<_>>())?;
    let labels = harvest.iter().map(|p| p.label.value()).collect();
    let batch = TrainBatch::new(inputs, labels)?;

    let mut net = pretrain_stack(&batch.inputs, &ARCHITECTURE, &rbm_cfg, &mut rng)?;
    network::train(&mut net, &batch, &train_cfg, &mut rng)?;
    let loss = network::loss(&net, &batch, &train_cfg.loss)?.objective();
    let accuracy = network::accuracy(&net, &batch)?;
    if !loss.is_finite() {
        return Err(AppError::Numeric("training loss is not finite".into()));
    }
    formats::write_model(&model_path, &net)?;
    say(
        out,
        format_args!(
            "trained on {} patches ({positives} positive, {negatives} negative): loss {loss:.6}, accuracy {accuracy:.4}",
            harvest.len()
        ),
    )?;
    say(out, format_args!("wrote {}", model_path.display()))?;
    Ok(PretrainSummary {
        positives,
        negatives,
        loss,
        accuracy,
    })
}

/// Runs the tracker over `sequence` and writes the trajectory.
pub fn track(cfg: &RunConfig, out: &mut dyn Write) -> AppResult<TrackSummary> {
    let tracker_cfg = cfg.tracker_config()?;
    let model = formats::read_model(&cfg.path("model")?)?;
    let frames = pgm::load_sequence(&cfg.path("sequence")?)?;
    let init = match cfg.init_box()? {
        Some(b) => b,
        None => {
            let path = cfg.ground_truth_path()?;
            *formats::read_ground_truth(&path)?
                .first()
                .ok_or_else(|| AppError::Format(format!("{}: no ground-truth rows for the initial box", path.display())))?
        }
    };
    let results = tracker::run(&frames, &init, model, tracker_cfg)?;
    let trajectory = cfg.path("trajectory")?;
    formats::write_trajectory(&trajectory, &results)?;
    let summary = TrackSummary {
        frames: results.len(),
        finetunes: results.iter().filter(|r| r.finetuned).count(),
        mean_occlusion_rate: results.iter().map(|r| r.occlusion_rate).sum::<f64>() / results.len() as f64,
    };
    say(
        out,
        format_args!(
            "tracked {} frames: {} fine-tunes, mean occlusion rate {:.4}",
            summary.frames, summary.finetunes, summary.mean_occlusion_rate
        ),
    )?;
    say(out, format_args!("wrote {}", trajectory.display()))?;
    Ok(summary)
}

/// Scores a trajectory against ground truth and writes the report.
pub fn eval(cfg: &RunConfig, out: &mut dyn Write) -> AppResult<collabtrack_core::SequenceReport> {
    let predicted = formats::read_trajectory(&cfg.path("trajectory")?)?;
    let truth = formats::read_ground_truth(&cfg.ground_truth_path()?)?;
    if predicted.len() != truth.len() {
        return Err(AppError::Format(format!(
            "trajectory has {} rows but ground truth has {}",
            predicted.len(),
            truth.len()
        )));
    }
    let report = evaluate(&predicted, &truth)?;
    let path = cfg.path("report")?;
    formats::write_report(&path, &report)?;
    say(
        out,
        format_args!(
            "{} frames: mean center error {:.4} px, mean overlap {:.4}",
            report.frame_count(),
            report.mean_center_error,
            report.mean_overlap
        ),
    )?;
    Ok(report)
}

/// Writes a synthetic sequence into `sequence`.
pub fn synth(cfg: &RunConfig, out: &mut dyn Write) -> AppResult<()> {
    let params = cfg.synth_params()?;
    let dir = cfg.path("sequence")?;
    let seq = synth::generate(&params, cfg.u64("seed")?);
    synth::write_sequence(&dir, &seq)?;
    say(out, format_args!("wrote {} frames to {}", seq.frames.len(), dir.display()))
}

/// First-layer weight columns as min-max normalized 32×32 images.
pub fn filter_images(weights: &Matrix) -> AppResult<Vec<Vec<u8>>> {
    if weights.rows() != PATCH_SIDE * PATCH_SIDE {
        return Err(AppError::Format(format!(
            "first layer has {} inputs, expected {}",
            weights.rows(),
            PATCH_SIDE * PATCH_SIDE
        )));
    }
    Ok((0..weights.cols())
        .map(|j| {
            let col = weights.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= 0.0 {
                return vec![128; col.len()];
            }
            col.iter().map(|w| ((w - lo) / (hi - lo) * 255.0).round() as u8).collect()
        })
        .collect())
}

pub fn dump_filters(cfg: &RunConfig, out: &mut dyn Write) -> AppResult<usize> {
    let model = formats::read_model(&cfg.path("model")?)?;
    let images = filter_images(&model.layers()[0].weights)?;
    let dir = cfg.path("out_dir")?;
    fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
    for (j, img) in images.iter().enumerate() {
        pgm::write(&dir.join(format!("filter_{j:03}.pgm")), PATCH_SIDE, PATCH_SIDE, img)?;
    }
    say(out, format_args!("wrote {} filters to {}", images.len(), dir.display()))?;
    Ok(images.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_normalization() {
        let mut w = Matrix::zeros(1024, 2);
        for i in 0..1024 {
            w.set(i, 0, i as f64 * 0.001 - 0.3);
            w.set(i, 1, 0.25);
        }
        let imgs = filter_images(&w).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!(imgs[0].iter().max(), Some(&255));
        assert_eq!(imgs[0].iter().min(), Some(&0));
        assert!(imgs[1].iter().all(|&p| p == 128));
        assert!(filter_images(&Matrix::zeros(10, 2)).is_err());
    }
}
