//! Score collections and their on-disk formats.
//!
//! Two input formats are supported:
//! - plain: UTF-8, one decimal score per line;
//! - csv: header `score` or `score,label`, label values `tgt` / `non`.
//!
//! Files are either fully labeled or fully unlabeled; mixed files are
//! rejected. Scores are stored at full double precision and serialized with
//! the shortest round-trip representation, so write-then-load is bit-exact.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::math;
use crate::{Error, Result};

/// Trial class: target (same speaker) or non-target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Target,
    NonTarget,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Target => "tgt",
            Label::NonTarget => "non",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "tgt" => Some(Label::Target),
            "non" => Some(Label::NonTarget),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single trial: finite score, optional label, optional opaque id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub score: f64,
    pub label: Option<Label>,
    pub trial_id: Option<String>,
}

impl TrialRecord {
    pub fn new(score: f64, label: Option<Label>, trial_id: Option<String>) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score {score}")));
        }
        Ok(Self {
            score,
            label,
            trial_id,
        })
    }
}

/// An ordered, non-empty collection of finite scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    scores: Vec<f64>,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidInput("empty score collection".into()));
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite score {} at index {pos}",
                scores[pos]
            )));
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    /// min / max / mean / population variance.
    pub fn summary_stats(&self) -> SummaryStats {
        let min = self.scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self
            .scores
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        SummaryStats {
            min,
            max,
            mean: math::mean(&self.scores),
            variance: math::population_variance(&self.scores),
        }
    }
}

/// Scores with a class tag per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScoreSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
}

impl LabeledScoreSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        let set = ScoreSet::new(scores)?;
        Ok(Self {
            scores: set.scores,
            labels,
        })
    }

    pub fn from_records(records: &[TrialRecord]) -> Result<Self> {
        let scores = records.iter().map(|r| r.score).collect();
        let labels = records
            .iter()
            .map(|r| {
                r.label
                    .ok_or_else(|| Error::InvalidInput("record without label".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(scores, labels)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn target_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Target).count()
    }

    /// Forget the labels, keeping scores in order.
    pub fn drop_labels(&self) -> ScoreSet {
        ScoreSet {
            scores: self.scores.clone(),
        }
    }

    /// Scores of one class, in input order.
    pub fn class_scores(&self, label: Label) -> Vec<f64> {
        self.scores
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == label)
            .map(|(s, _)| *s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Result of loading a file that may or may not carry labels.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedScores {
    Unlabeled(ScoreSet),
    Labeled(LabeledScoreSet),
}

impl LoadedScores {
    pub fn score_set(&self) -> ScoreSet {
        match self {
            LoadedScores::Unlabeled(s) => s.clone(),
            LoadedScores::Labeled(l) => l.drop_labels(),
        }
    }

    pub fn labeled(&self) -> Option<&LabeledScoreSet> {
        match self {
            LoadedScores::Labeled(l) => Some(l),
            LoadedScores::Unlabeled(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LoadedScores::Unlabeled(s) => s.len(),
            LoadedScores::Labeled(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// On-disk format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Plain,
    Csv,
}

fn parse_score(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse score {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite score {field:?}"),
        });
    }
    Ok(v)
}

/// Load a score file in the declared format.
pub fn load_scores(path: &Path, format: FileFormat) -> Result<LoadedScores> {
    let text = fs::read_to_string(path)?;
    parse_scores(&text, format)
}

/// Parse file content in the declared format. Line numbers in errors are
/// 1-based and count the header for csv.
pub fn parse_scores(text: &str, format: FileFormat) -> Result<LoadedScores> {
    match format {
        FileFormat::Plain => {
            let mut scores = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                scores.push(parse_score(line, idx + 1)?);
            }
            if scores.is_empty() {
                return Err(Error::InvalidInput("empty score file".into()));
            }
            Ok(LoadedScores::Unlabeled(ScoreSet::new(scores)?))
        }
        FileFormat::Csv => parse_csv(text),
    }
}

fn parse_csv(text: &str) -> Result<LoadedScores> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::InvalidInput("empty score file".into()))?;
    let labeled = match header.trim() {
        "score" => false,
        "score,label" => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("unrecognized header {other:?}; expected `score` or `score,label`"),
            })
        }
    };

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut fields = line.split(',');
        let score_field = fields.next().unwrap_or("");
        let label_field = fields.next();
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: "too many fields".into(),
            });
        }
        scores.push(parse_score(score_field, lineno)?);
        match (labeled, label_field) {
            (true, Some(l)) => {
                let l = l.trim();
                labels.push(Label::parse(l).ok_or(Error::Parse {
                    line: lineno,
                    message: format!("unrecognized label {l:?}; expected `tgt` or `non`"),
                })?);
            }
            (true, None) => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "missing label in labeled file".into(),
                })
            }
            (false, Some(_)) => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "unexpected label field in unlabeled file".into(),
                })
            }
            (false, None) => {}
        }
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput("empty score file".into()));
    }
    if labeled {
        Ok(LoadedScores::Labeled(LabeledScoreSet::new(scores, labels)?))
    } else {
        Ok(LoadedScores::Unlabeled(ScoreSet::new(scores)?))
    }
}

/// Write one score per line. `{}` formatting gives the shortest
/// representation that parses back to the identical double.
pub fn write_plain(path: &Path, scores: &ScoreSet) -> Result<()> {
    let mut out = String::new();
    for s in scores.scores() {
        out.push_str(&format!("{s}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write csv with header `score`.
pub fn write_csv_unlabeled(path: &Path, scores: &ScoreSet) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "score")?;
    for s in scores.scores() {
        writeln!(f, "{s}")?;
    }
    Ok(())
}

/// Write csv with header `score,label`.
pub fn write_csv_labeled(path: &Path, scores: &LabeledScoreSet) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "score,label")?;
    for (s, l) in scores.scores().iter().zip(scores.labels()) {
        writeln!(f, "{s},{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_parse_preserves_order() {
        let loaded = parse_scores("1.5\n-0.2\n", FileFormat::Plain).unwrap();
        match loaded {
            LoadedScores::Unlabeled(s) => assert_eq!(s.scores(), &[1.5, -0.2]),
            _ => panic!("expected unlabeled"),
        }
    }

    #[test]
    fn csv_labeled_parse() {
        let loaded = parse_scores("score,label\n3.0,tgt\n-3.0,non\n", FileFormat::Csv).unwrap();
        let l = loaded.labeled().unwrap();
        assert_eq!(l.scores(), &[3.0, -3.0]);
        assert_eq!(l.labels(), &[Label::Target, Label::NonTarget]);
    }

    #[test]
    fn csv_unlabeled_parse() {
        let loaded = parse_scores("score\n0.25\n", FileFormat::Csv).unwrap();
        assert!(matches!(loaded, LoadedScores::Unlabeled(_)));
    }

    #[test]
    fn nan_score_is_an_error_with_line_number() {
        let err = parse_scores("score,label\n3.0,tgt\nNaN,non\n", FileFormat::Csv).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn plain_rejects_garbage_with_line_number() {
        let err = parse_scores("1.0\nxyz\n", FileFormat::Plain).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(parse_scores("", FileFormat::Plain).is_err());
        assert!(parse_scores("score\n", FileFormat::Csv).is_err());
    }

    #[test]
    fn partially_labeled_file_rejected() {
        // Labeled header but a row without the label field.
        let err = parse_scores("score,label\n1.0,tgt\n2.0\n", FileFormat::Csv).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
        // Unlabeled header but a stray label field.
        assert!(parse_scores("score\n1.0\n2.0,tgt\n", FileFormat::Csv).is_err());
    }

    #[test]
    fn summary_stats_hand_cases() {
        let s = ScoreSet::new(vec![1.0, 3.0]).unwrap();
        let st = s.summary_stats();
        assert_eq!(st.min, 1.0);
        assert_eq!(st.max, 3.0);
        assert!((st.mean - 2.0).abs() < 1e-15);
        assert!((st.variance - 1.0).abs() < 1e-15);

        let one = ScoreSet::new(vec![5.0]).unwrap();
        let st1 = one.summary_stats();
        assert_eq!(st1.mean, 5.0);
        assert_eq!(st1.variance, 0.0);
    }

    #[test]
    fn summary_stats_standard_normal_draws() {
        // Synthetic oracle: 10^5 standard-normal draws.
        let spec = crate::synth::SynthSpec::new(0.0, 0.0, 1.0, 1.0, 100_000, 11).unwrap();
        let data = crate::synth::generate(&spec).drop_labels();
        let st = data.summary_stats();
        assert!(st.mean.abs() < 0.02, "mean {}", st.mean);
        assert!((st.variance - 1.0).abs() < 0.02, "var {}", st.variance);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("gmcal_scores_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.csv");
        let scores = vec![
            0.1 + 0.2,
            -1.0 / 3.0,
            1e-300,
            -170.25,
            5.551115123125783e-17,
        ];
        let labels = vec![
            Label::Target,
            Label::NonTarget,
            Label::NonTarget,
            Label::Target,
            Label::NonTarget,
        ];
        let set = LabeledScoreSet::new(scores.clone(), labels.clone()).unwrap();
        write_csv_labeled(&path, &set).unwrap();
        let loaded = load_scores(&path, FileFormat::Csv).unwrap();
        let l = loaded.labeled().unwrap();
        assert_eq!(l.scores(), scores.as_slice());
        assert_eq!(l.labels(), labels.as_slice());
        for (a, b) in l.scores().iter().zip(&scores) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn trial_record_rejects_non_finite() {
        assert!(TrialRecord::new(f64::NAN, None, None).is_err());
        assert!(TrialRecord::new(0.0, Some(Label::Target), Some("t1".into())).is_ok());
    }

    #[test]
    fn mismatched_label_length_rejected() {
        assert!(LabeledScoreSet::new(vec![1.0, 2.0], vec![Label::Target]).is_err());
    }
}
