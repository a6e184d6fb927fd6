//! Text and binary files exchanged between the commands.

use std::fs;
use std::path::Path;

use collabtrack_core::{model_format, NetworkParams, Rect, SequenceReport, TrackResult};

use crate::error::{AppError, AppResult};

pub const TRAJECTORY_HEADER: [&str; 8] = ["frame", "x", "y", "w", "h", "score", "occlusion_rate", "finetuned"];
pub const REPORT_HEADER: [&str; 3] = ["frame", "center_error", "overlap"];

fn format_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> AppError {
    AppError::Format(format!("{}: line {line}: {msg}", path.display()))
}

fn parse_boxes(path: &Path, text: &str, has_header: bool, first_col: usize) -> AppResult<Vec<Rect>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut boxes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format_err(path, line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() < first_col + 4 {
            return Err(format_err(
                path,
                line,
                format_args!("expected at least {} fields, found {}", first_col + 4, record.len()),
            ));
        }
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            let field = &record[first_col + k];
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format_err(path, line, format_args!("not a number: {field:?}")))?;
        }
        boxes.push(Rect::new(v[0], v[1], v[2], v[3]));
    }
    Ok(boxes)
}

fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

/// Ground truth: one `x,y,w,h` line per frame, no header.
pub fn read_ground_truth(path: &Path) -> AppResult<Vec<Rect>> {
    parse_ground_truth(path, &read_text(path)?)
}

pub fn parse_ground_truth(path: &Path, text: &str) -> AppResult<Vec<Rect>> {
    parse_boxes(path, text, false, 0)
}

pub fn write_ground_truth(path: &Path, boxes: &[Rect]) -> AppResult<()> {
    let text: String = boxes.iter().map(|b| format!("{},{},{},{}\n", b.x, b.y, b.w, b.h)).collect();
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(header).unwrap();
    for row in rows {
        w.write_record(&row).unwrap();
    }
    w.into_inner().unwrap()
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn trajectory_csv(results: &[TrackResult]) -> Vec<u8> {
    csv_bytes(
        &TRAJECTORY_HEADER,
        results.iter().map(|r| {
            vec![
                r.frame.to_string(),
                f6(r.bbox.x),
                f6(r.bbox.y),
                f6(r.bbox.w),
                f6(r.bbox.h),
                f6(r.score),
                f6(r.occlusion_rate),
                u8::from(r.finetuned).to_string(),
            ]
        }),
    )
}

pub fn write_trajectory(path: &Path, results: &[TrackResult]) -> AppResult<()> {
    fs::write(path, trajectory_csv(results)).map_err(|e| AppError::io(path, e))
}

/// Boxes of a trajectory file written by [`write_trajectory`].
pub fn read_trajectory(path: &Path) -> AppResult<Vec<Rect>> {
    let text = read_text(path)?;
    let header = text.lines().next().unwrap_or_default();
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.get(1..5) != Some(&TRAJECTORY_HEADER[1..5]) {
        return Err(format_err(path, 1, "expected a trajectory header frame,x,y,w,h,..."));
    }
    parse_boxes(path, &text, true, 1)
}

pub fn report_csv(report: &SequenceReport) -> Vec<u8> {
    let rows = report
        .center_errors
        .iter()
        .zip(&report.overlaps)
        .enumerate()
        .map(|(i, (c, o))| vec![i.to_string(), f6(*c), f6(*o)])
        .chain([vec![
            "average".to_string(),
            f6(report.mean_center_error),
            f6(report.mean_overlap),
        ]]);
    csv_bytes(&REPORT_HEADER, rows)
}

pub fn write_report(path: &Path, report: &SequenceReport) -> AppResult<()> {
    fs::write(path, report_csv(report)).map_err(|e| AppError::io(path, e))
}

pub fn write_model(path: &Path, params: &NetworkParams) -> AppResult<()> {
    fs::write(path, model_format::encode(params)).map_err(|e| AppError::io(path, e))
}

pub fn read_model(path: &Path) -> AppResult<NetworkParams> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    model_format::decode(&bytes).map_err(|e| AppError::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use collabtrack_core::AffineState;

    fn p() -> &'static Path {
        Path::new("gt.txt")
    }

    #[test]
    fn ground_truth_parsing() {
        let boxes = parse_ground_truth(p(), "1,2,3,4\n 5.5 , 6 ,7,8\n\n").unwrap();
        assert_eq!(boxes, vec![Rect::new(1.0, 2.0, 3.0, 4.0), Rect::new(5.5, 6.0, 7.0, 8.0)]);
    }

    #[test]
    fn ground_truth_errors_cite_the_line() {
        let text = "0,0,1,1\n".repeat(6) + "0,0,x,1\n";
        let err = parse_ground_truth(p(), &text).unwrap_err().to_string();
        assert!(err.contains("line 7"), "{err}");
        let err = parse_ground_truth(p(), "0,0,1,1\n0,0,1\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("expected"), "{err}");
        assert!(parse_ground_truth(p(), "0,0,1,NaN\n").is_err());
    }

    fn result(frame: usize, x: f64) -> TrackResult {
        let bbox = Rect::new(x, 2.0, 3.0, 4.0);
        TrackResult {
            frame,
            state: AffineState::at(0.0, 0.0),
            bbox,
            score: 1.0 / 3.0,
            max_discriminative: 0.5,
            occlusion_rate: 0.75,
            finetuned: frame == 1,
            subspace_updated: false,
        }
    }

    #[test]
    fn trajectory_layout() {
        let text = String::from_utf8(trajectory_csv(&[result(0, 1.0), result(1, -1.25)])).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "frame,x,y,w,h,score,occlusion_rate,finetuned");
        assert_eq!(lines[1], "0,1.000000,2.000000,3.000000,4.000000,0.333333,0.750000,0");
        assert_eq!(lines[2], "1,-1.250000,2.000000,3.000000,4.000000,0.333333,0.750000,1");
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trajectory(&path, &[result(0, 1.0), result(1, 7.5)]).unwrap();
        let boxes = read_trajectory(&path).unwrap();
        assert_eq!(boxes, vec![Rect::new(1.0, 2.0, 3.0, 4.0), Rect::new(7.5, 2.0, 3.0, 4.0)]);
        fs::write(&path, "1,2,3,4\n").unwrap();
        assert!(read_trajectory(&path).is_err());
    }

    #[test]
    fn report_layout() {
        let report = collabtrack_core::evaluate(
            &[Rect::new(0.0, 0.0, 10.0, 10.0), Rect::new(0.0, 0.0, 10.0, 10.0)],
            &[Rect::new(0.0, 0.0, 10.0, 10.0), Rect::new(5.0, 0.0, 10.0, 10.0)],
        )
        .unwrap();
        let text = String::from_utf8(report_csv(&report)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            vec![
                "frame,center_error,overlap",
                "0,0.000000,1.000000",
                "1,5.000000,0.333333",
                "average,2.500000,0.666667",
            ]
        );
    }

    #[test]
    fn model_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let net = NetworkParams::zeros(&[4, 3, 1]).unwrap();
        write_model(&path, &net).unwrap();
        assert_eq!(read_model(&path).unwrap(), net);
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, bytes).unwrap();
        let err = read_model(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
