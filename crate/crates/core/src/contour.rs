//! F0 contour ingestion: parsing, resampling onto the frame grid,
//! normalization, zero padding and k-fold partitioning.

use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{Rng, Stream};

/// Frame period of the model input, in seconds (12.5 ms).
pub const FRAME_STEP: f64 = 0.0125;

/// Fixed model input length in frames.
pub const PADDED_LEN: usize = 1024;

/// Slack used when deciding whether a point sits on a frame time.
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Statement,
    WhQuestion,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Statement, ClassLabel::WhQuestion];

    pub fn index(self) -> usize {
        match self {
            ClassLabel::Statement => 0,
            ClassLabel::WhQuestion => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(ClassLabel::Statement),
            1 => Some(ClassLabel::WhQuestion),
            _ => None,
        }
    }

    /// Manifest token.
    pub fn token(self) -> &'static str {
        match self {
            ClassLabel::Statement => "statement",
            ClassLabel::WhQuestion => "wh_question",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "statement" => Some(ClassLabel::Statement),
            "wh_question" => Some(ClassLabel::WhQuestion),
            _ => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourPoint {
    /// Seconds from utterance onset.
    pub time: f64,
    /// Hz; zero marks an unvoiced frame.
    pub f0: f64,
}

impl ContourPoint {
    pub fn new(time: f64, f0: f64) -> Self {
        ContourPoint { time, f0 }
    }
}

/// Time-stamped F0 samples of one utterance.
///
/// Construction enforces: finite values, times `>= 0` and strictly
/// increasing, `f0 >= 0`, and at least one voiced point.
#[derive(Clone, Debug, PartialEq)]
pub struct F0Contour {
    points: Vec<ContourPoint>,
    label: ClassLabel,
    speaker_id: String,
}

impl F0Contour {
    pub fn new(
        points: Vec<ContourPoint>,
        label: ClassLabel,
        speaker_id: impl Into<String>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidContour("no points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.time.is_finite() || !p.f0.is_finite() {
                return Err(Error::InvalidContour(format!("point {i} is not finite")));
            }
            if p.time < 0.0 {
                return Err(Error::InvalidContour(format!("point {i} has negative time")));
            }
            if p.f0 < 0.0 {
                return Err(Error::InvalidContour(format!("point {i} has negative f0")));
            }
            if i > 0 && p.time <= points[i - 1].time {
                return Err(Error::InvalidContour(format!(
                    "point {i}: non-increasing time {}",
                    p.time
                )));
            }
        }
        if !points.iter().any(|p| p.f0 > 0.0) {
            return Err(Error::InvalidContour("no voiced points".into()));
        }
        Ok(F0Contour {
            points,
            label,
            speaker_id: speaker_id.into(),
        })
    }

    pub fn points(&self) -> &[ContourPoint] {
        &self.points
    }

    pub fn label(&self) -> ClassLabel {
        self.label
    }

    pub fn speaker_id(&self) -> &str {
        &self.speaker_id
    }

    pub fn duration(&self) -> f64 {
        self.points[self.points.len() - 1].time
    }

    /// Serializes in the `time_s,f0_hz` CSV format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,f0_hz\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.time, p.f0));
        }
        out
    }
}

fn csv_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
}

fn parse_number(source: &str, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(source, line, format!("malformed {what} {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(source, line, format!("non-finite {what}")));
    }
    Ok(v)
}

fn check_point(source: &str, line: usize, prev: Option<f64>, time: f64, f0: f64) -> Result<()> {
    if time < 0.0 {
        return Err(Error::parse(source, line, "negative time"));
    }
    if f0 < 0.0 {
        return Err(Error::parse(source, line, format!("negative f0 {f0}")));
    }
    if let Some(prev) = prev {
        if time <= prev {
            return Err(Error::parse(
                source,
                line,
                format!("non-increasing time {time} after {prev}"),
            ));
        }
    }
    Ok(())
}

/// Parses a `time_s,f0_hz` CSV document. Label and speaker come from the caller.
pub fn parse_contour_csv(text: &str, label: ClassLabel, speaker_id: &str) -> Result<F0Contour> {
    parse_contour_csv_named(text, "contour csv", label, speaker_id)
}

fn parse_contour_csv_named(
    text: &str,
    source: &str,
    label: ClassLabel,
    speaker_id: &str,
) -> Result<F0Contour> {
    let mut lines = csv_lines(text);
    match lines.next() {
        Some((_, header)) if header.trim() == "time_s,f0_hz" => {}
        Some((n, header)) => {
            return Err(Error::parse(
                source,
                n,
                format!("expected header time_s,f0_hz, found {header:?}"),
            ))
        }
        None => return Err(Error::parse(source, 1, "empty document")),
    }
    let mut points: Vec<ContourPoint> = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                source,
                n,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        let time = parse_number(source, n, fields[0], "time")?;
        let f0 = parse_number(source, n, fields[1], "f0")?;
        check_point(source, n, points.last().map(|p| p.time), time, f0)?;
        points.push(ContourPoint::new(time, f0));
    }
    if points.is_empty() {
        return Err(Error::parse(source, 2, "empty body"));
    }
    F0Contour::new(points, label, speaker_id)
}

/// Strips a `key = value` prefix, returning the value part.
fn praat_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.trim().strip_prefix(key)?;
    Some(rest.trim_start().strip_prefix('=')?.trim())
}

/// Parses a Praat PitchTier in short text format.
///
/// Accepted header spellings are `File type = "ooTextFile"` (or
/// `"ooTextFile short"`) followed by either `Object class = "PitchTier"` or the
/// bare `"PitchTier"` line Praat writes. The body is xmin, xmax, point count,
/// then alternating time and value lines.
pub fn parse_pitchtier(text: &str, label: ClassLabel, speaker_id: &str) -> Result<F0Contour> {
    parse_pitchtier_named(text, "PitchTier", label, speaker_id)
}

fn parse_pitchtier_named(
    text: &str,
    source: &str,
    label: ClassLabel,
    speaker_id: &str,
) -> Result<F0Contour> {
    let mut lines = csv_lines(text).filter(|(_, l)| !l.trim().is_empty());

    let (n, first) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty document"))?;
    match praat_value(first, "File type") {
        Some("\"ooTextFile\"") | Some("\"ooTextFile short\"") => {}
        _ => return Err(Error::parse(source, n, "expected File type = \"ooTextFile\"")),
    }

    let (n, second) = lines
        .next()
        .ok_or_else(|| Error::parse(source, n + 1, "missing object class"))?;
    let class = praat_value(second, "Object class").unwrap_or(second.trim());
    if class != "\"PitchTier\"" {
        return Err(Error::parse(
            source,
            n,
            format!("wrong object class {class}, expected \"PitchTier\""),
        ));
    }

    let mut next_number = |what: &str| -> Result<(usize, f64)> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 0, format!("unexpected end of file, expected {what}")))?;
        Ok((n, parse_number(source, n, line, what)?))
    };

    let (_, xmin) = next_number("xmin")?;
    let (n, xmax) = next_number("xmax")?;
    if xmax < xmin {
        return Err(Error::parse(source, n, "xmax < xmin"));
    }
    let (n, count) = next_number("point count")?;
    if count < 0.0 || count.fract() != 0.0 {
        return Err(Error::parse(source, n, format!("invalid point count {count}")));
    }
    let count = count as usize;

    let mut points: Vec<ContourPoint> = Vec::with_capacity(count);
    for k in 0..count {
        let (n, time) = next_number("time").map_err(|e| count_mismatch(e, source, count, k))?;
        let (_, f0) = next_number("value").map_err(|e| count_mismatch(e, source, count, k))?;
        if time < xmin || time > xmax {
            return Err(Error::parse(
                source,
                n,
                format!("time {time} outside [{xmin}, {xmax}]"),
            ));
        }
        check_point(source, n, points.last().map(|p| p.time), time, f0)?;
        points.push(ContourPoint::new(time, f0));
    }
    if let Some((n, _)) = lines.next() {
        return Err(Error::parse(
            source,
            n,
            format!("declared {count} points but more data follows"),
        ));
    }
    F0Contour::new(points, label, speaker_id)
}

fn count_mismatch(err: Error, source: &str, declared: usize, found: usize) -> Error {
    match err {
        Error::Parse { line: 0, .. } => Error::parse(
            source,
            0,
            format!("declared {declared} points but only {found} present"),
        ),
        other => other,
    }
}

/// Linear resampling onto the grid `0, step, 2*step, ...`.
///
/// Only frames inside `[first point, last point]` are emitted. A frame that
/// falls between a voiced point and an unvoiced (`f0 == 0`) point is 0.
pub fn resample_contour(contour: &F0Contour, frame_step: f64) -> Result<Vec<f64>> {
    if !frame_step.is_finite() || frame_step <= 0.0 {
        return Err(Error::Config(format!("frame step must be > 0, got {frame_step}")));
    }
    let pts = contour.points();
    let first = pts[0].time;
    let last = pts[pts.len() - 1].time;
    let n_grid = ((last + GRID_TOLERANCE) / frame_step).floor() as usize + 1;

    let mut frames = Vec::with_capacity(n_grid);
    let mut j = 0;
    for i in 0..n_grid {
        let t = i as f64 * frame_step;
        if t < first - GRID_TOLERANCE {
            continue;
        }
        while j + 1 < pts.len() && pts[j + 1].time <= t + GRID_TOLERANCE {
            j += 1;
        }
        let left = pts[j];
        if (t - left.time).abs() <= GRID_TOLERANCE || j + 1 == pts.len() {
            frames.push(left.f0);
            continue;
        }
        let right = pts[j + 1];
        if left.f0 == 0.0 || right.f0 == 0.0 {
            frames.push(0.0);
        } else {
            let w = (t - left.time) / (right.time - left.time);
            frames.push(left.f0 + w * (right.f0 - left.f0));
        }
    }
    Ok(frames)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    None,
    /// Divide Hz by 500.
    #[default]
    Scale500,
}

impl Normalization {
    pub fn token(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Scale500 => "scale500",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "scale500" => Ok(Normalization::Scale500),
            other => Err(Error::Config(format!("unknown normalization {other:?}"))),
        }
    }
}

pub fn normalize_frames(frames: &[f64], scheme: Normalization) -> Vec<f64> {
    match scheme {
        Normalization::None => frames.to_vec(),
        Normalization::Scale500 => frames.iter().map(|v| v / 500.0).collect(),
    }
}

/// A zero-padded frame vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedFrames {
    pub values: Vec<f64>,
    pub valid_len: usize,
}

/// Appends trailing zeros up to `target`. Longer input is an error unless
/// `truncate` is set, in which case it is cut to `target`.
pub fn pad_to_fixed(frames: &[f64], target: usize, truncate: bool) -> Result<PaddedFrames> {
    if frames.is_empty() {
        return Err(Error::InvalidContour("no frames to pad".into()));
    }
    if frames.len() > target && !truncate {
        return Err(Error::TooLong {
            required: frames.len(),
            available: target,
        });
    }
    let valid_len = frames.len().min(target);
    let mut values = vec![0.0; target];
    values[..valid_len].copy_from_slice(&frames[..valid_len]);
    Ok(PaddedFrames { values, valid_len })
}

/// Fixed-length model input with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedSample {
    values: Vec<f64>,
    valid_len: usize,
    label: ClassLabel,
    speaker_id: String,
}

impl PaddedSample {
    pub fn new(
        values: Vec<f64>,
        valid_len: usize,
        label: ClassLabel,
        speaker_id: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != PADDED_LEN {
            return Err(Error::Shape(format!(
                "sample has {} values, expected {PADDED_LEN}",
                values.len()
            )));
        }
        if valid_len == 0 || valid_len > PADDED_LEN {
            return Err(Error::InvalidContour(format!("valid_len {valid_len} out of range")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidContour("non-finite frame value".into()));
        }
        if values[valid_len..].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidContour("non-zero padding".into()));
        }
        Ok(PaddedSample {
            values,
            valid_len,
            label,
            speaker_id: speaker_id.into(),
        })
    }

    pub fn from_contour(contour: &F0Contour, options: &PipelineOptions) -> Result<Self> {
        let frames = resample_contour(contour, options.frame_step)?;
        let frames = normalize_frames(&frames, options.normalization);
        let padded = pad_to_fixed(&frames, PADDED_LEN, options.truncate)?;
        PaddedSample::new(
            padded.values,
            padded.valid_len,
            contour.label(),
            contour.speaker_id(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_len(&self) -> usize {
        self.valid_len
    }

    pub fn label(&self) -> ClassLabel {
        self.label
    }

    pub fn speaker_id(&self) -> &str {
        &self.speaker_id
    }
}

/// Settings of the resample → normalize → pad pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub frame_step: f64,
    pub normalization: Normalization,
    pub truncate: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            frame_step: FRAME_STEP,
            normalization: Normalization::Scale500,
            truncate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<PaddedSample>,
    provenance: String,
}

impl Dataset {
    pub fn new(samples: Vec<PaddedSample>, provenance: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Dataset("dataset is empty".into()));
        }
        Ok(Dataset {
            samples,
            provenance: provenance.into(),
        })
    }

    pub fn samples(&self) -> &[PaddedSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Per-class sample counts, indexed by [`ClassLabel::index`].
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in &self.samples {
            counts[s.label().index()] += 1;
        }
        counts
    }

    pub fn has_both_classes(&self) -> bool {
        self.class_counts().iter().all(|&c| c > 0)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Dataset(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples, format!("{} [subset of {}]", self.provenance, indices.len()))
    }

    /// SHA-256 over labels, valid lengths and frame bits, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for s in &self.samples {
            hasher.update([s.label().index() as u8]);
            hasher.update((s.valid_len() as u64).to_le_bytes());
            for v in s.values() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex_string(&hasher.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One manifest row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: ClassLabel,
    pub speaker_id: String,
}

/// Parses a `path,label,speaker_id` manifest.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    const SOURCE: &str = "manifest";
    let mut lines = csv_lines(text);
    match lines.next() {
        Some((_, h)) if h.trim() == "path,label,speaker_id" => {}
        Some((n, h)) => {
            return Err(Error::parse(
                SOURCE,
                n,
                format!("expected header path,label,speaker_id, found {h:?}"),
            ))
        }
        None => return Err(Error::parse(SOURCE, 1, "empty manifest")),
    }
    let mut entries = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                SOURCE,
                n,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let label = ClassLabel::from_token(fields[1]).ok_or_else(|| {
            Error::parse(SOURCE, n, format!("unknown label {:?}", fields[1]))
        })?;
        entries.push(ManifestEntry {
            path: fields[0].to_string(),
            label,
            speaker_id: fields[2].to_string(),
        });
    }
    if entries.is_empty() {
        return Err(Error::parse(SOURCE, 2, "manifest has no rows"));
    }
    Ok(entries)
}

pub fn render_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::from("path,label,speaker_id\n");
    for e in entries {
        out.push_str(&format!("{},{},{}\n", e.path, e.label.token(), e.speaker_id));
    }
    out
}

/// Reads one contour file, choosing the parser by extension
/// (`.PitchTier` / `.pitchtier`, otherwise CSV).
pub fn read_contour_file(path: &Path, label: ClassLabel, speaker_id: &str) -> Result<F0Contour> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let is_pitchtier = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pitchtier"));
    if is_pitchtier {
        parse_pitchtier_named(&text, &name, label, speaker_id)
    } else {
        parse_contour_csv_named(&text, &name, label, speaker_id)
    }
}

/// Loads every manifest row through resample → normalize → pad, in row order.
/// Relative paths resolve against `base_dir`.
pub fn load_dataset(manifest: &str, base_dir: &Path, options: &PipelineOptions) -> Result<Dataset> {
    let entries = parse_manifest(manifest)?;
    let mut samples = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let row = i + 2;
        let wrap = |e: Error| Error::ManifestRow {
            row,
            path: entry.path.clone(),
            source: Box::new(e),
        };
        let contour =
            read_contour_file(&base_dir.join(&entry.path), entry.label, &entry.speaker_id)
                .map_err(wrap)?;
        samples.push(PaddedSample::from_contour(&contour, options).map_err(wrap)?);
    }
    Dataset::new(samples, format!("manifest:{}", base_dir.display()))
}

/// Convenience wrapper reading the manifest from disk; contour paths resolve
/// against the manifest's directory.
pub fn load_manifest_file(path: &Path, options: &PipelineOptions) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut ds = load_dataset(&text, base, options)?;
    ds.provenance = format!("manifest:{}", path.display());
    Ok(ds)
}

/// k disjoint test folds covering `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.folds.iter().map(Vec::len).collect()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// All indices outside `fold`, in fold order.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }
}

/// Shuffles `0..n` with the fold stream of `seed` and deals contiguous
/// chunks; the first `n % k` folds get one extra element.
pub fn split_kfold(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("k = {k} exceeds sample count {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::stream(seed, Stream::Folds, 0).shuffle(&mut order);

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldSplit { folds })
}
