//! The per-run report: every computed invariant of one verification run plus
//! the full configuration that produced it, so a run is reproducible from its
//! report alone. Two interchangeable encodings: a line-oriented text document
//! with a versioned header, and a JSON twin. Both round-trip exactly; floats
//! are printed in shortest form, which `f64` parsing restores bit for bit.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const REPORT_FORMAT: &str = "quadriclab-report/1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report parse error: {0}")]
    Parse(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Base/harmonic split of the ideal at one 2-torsion point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsionReport {
    /// Torsion point label: x1, x2 or x3.
    pub point: String,
    /// Central involution class observed for this point.
    pub involution: String,
    pub k_base: usize,
    pub k_harmonic: usize,
    /// The two families spanning the base space of this involution.
    pub base_families: String,
    /// Worst modulus of base quadrics along the joined lines, when any exist.
    pub scroll_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub gap_ratio: f64,
    pub kept_min: f64,
    pub dropped_max: f64,
    pub eval_residual: f64,
    pub sample_count: usize,
    pub degenerate_redraws: u32,
    pub retries: u32,
    pub possible_k: Vec<u32>,
    /// Whether the measured isotypic tuple is among the enumerated ones;
    /// absent for levels outside the enumeration range.
    pub matches_enumeration: Option<bool>,
}

/// The computed invariants of one verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealReport {
    pub format: String,
    pub n: u32,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub target_tail: f64,
    pub precision: String,
    /// `sampled` or `file`.
    pub omega_source: String,
    pub omega_seed: Option<u64>,
    /// Four complex entries as re/im pairs, row-major.
    pub omega: Vec<[f64; 2]>,
    pub k: usize,
    pub isotypic: Vec<usize>,
    pub per_torsion: Vec<TorsionReport>,
    pub diagnostics: Diagnostics,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

impl IdealReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.format);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "samples = {}", self.samples);
        let _ = writeln!(out, "tolerance = {}", fmt_f64(self.tolerance));
        let _ = writeln!(out, "target_tail = {}", fmt_f64(self.target_tail));
        let _ = writeln!(out, "precision = {}", self.precision);
        let _ = writeln!(out, "omega_source = {}", self.omega_source);
        match self.omega_seed {
            Some(s) => {
                let _ = writeln!(out, "omega_seed = {s}");
            }
            None => {
                let _ = writeln!(out, "omega_seed = none");
            }
        }
        let omega_words: Vec<String> = self
            .omega
            .iter()
            .flat_map(|p| [fmt_f64(p[0]), fmt_f64(p[1])])
            .collect();
        let _ = writeln!(out, "omega = {}", omega_words.join(" "));
        let _ = writeln!(out, "k = {}", self.k);
        let isotypic: Vec<String> = self.isotypic.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "isotypic = {}", isotypic.join(" "));
        for t in &self.per_torsion {
            let _ = writeln!(out, "[torsion {}]", t.point);
            let _ = writeln!(out, "involution = {}", t.involution);
            let _ = writeln!(out, "k_base = {}", t.k_base);
            let _ = writeln!(out, "k_harmonic = {}", t.k_harmonic);
            let _ = writeln!(out, "base_families = {}", t.base_families);
            match t.scroll_residual {
                Some(r) => {
                    let _ = writeln!(out, "scroll_residual = {}", fmt_f64(r));
                }
                None => {
                    let _ = writeln!(out, "scroll_residual = none");
                }
            }
        }
        let d = &self.diagnostics;
        let _ = writeln!(out, "[diagnostics]");
        let _ = writeln!(out, "gap_ratio = {}", fmt_f64(d.gap_ratio));
        let _ = writeln!(out, "kept_min = {}", fmt_f64(d.kept_min));
        let _ = writeln!(out, "dropped_max = {}", fmt_f64(d.dropped_max));
        let _ = writeln!(out, "eval_residual = {}", fmt_f64(d.eval_residual));
        let _ = writeln!(out, "sample_count = {}", d.sample_count);
        let _ = writeln!(out, "degenerate_redraws = {}", d.degenerate_redraws);
        let _ = writeln!(out, "retries = {}", d.retries);
        let pk: Vec<String> = d.possible_k.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "possible_k = {}", pk.join(" "));
        let me = match d.matches_enumeration {
            Some(true) => "true",
            Some(false) => "false",
            None => "none",
        };
        let _ = writeln!(out, "matches_enumeration = {me}");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ReportError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| ReportError::Parse("empty report".into()))?;
        if header != REPORT_FORMAT {
            return Err(ReportError::Parse(format!(
                "unsupported format line: {header}"
            )));
        }

        #[derive(Default)]
        struct TorsionAcc {
            point: String,
            fields: std::collections::HashMap<String, String>,
        }
        let mut top: std::collections::HashMap<String, String> = Default::default();
        let mut torsions: Vec<TorsionAcc> = vec![];
        let mut in_diag = false;
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("[torsion ") {
                let point = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ReportError::Parse(format!("bad section: {line}")))?;
                torsions.push(TorsionAcc {
                    point: point.to_string(),
                    fields: Default::default(),
                });
                in_diag = false;
                continue;
            }
            if line == "[diagnostics]" {
                in_diag = true;
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ReportError::Parse(format!("expected key = value: {line}")))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if in_diag {
                top.insert(format!("diag.{key}"), value);
            } else if let Some(t) = torsions.last_mut() {
                t.fields.insert(key, value);
            } else {
                top.insert(key, value);
            }
        }

        fn get<'a>(
            map: &'a std::collections::HashMap<String, String>,
            key: &str,
        ) -> Result<&'a str, ReportError> {
            map.get(key)
                .map(String::as_str)
                .ok_or_else(|| ReportError::Parse(format!("missing field: {key}")))
        }
        fn parse<T: std::str::FromStr>(s: &str, key: &str) -> Result<T, ReportError> {
            s.parse()
                .map_err(|_| ReportError::Parse(format!("bad value for {key}: {s}")))
        }

        let omega_nums: Vec<f64> = get(&top, "omega")?
            .split_whitespace()
            .map(|w| parse::<f64>(w, "omega"))
            .collect::<Result<_, _>>()?;
        if omega_nums.len() != 8 {
            return Err(ReportError::Parse("omega needs 8 numbers".into()));
        }
        let omega = omega_nums
            .chunks(2)
            .map(|c| [c[0], c[1]])
            .collect::<Vec<_>>();
        let omega_seed = match get(&top, "omega_seed")? {
            "none" => None,
            s => Some(parse::<u64>(s, "omega_seed")?),
        };
        let isotypic = get(&top, "isotypic")?
            .split_whitespace()
            .map(|w| parse::<usize>(w, "isotypic"))
            .collect::<Result<_, _>>()?;

        let per_torsion = torsions
            .into_iter()
            .map(|t| -> Result<TorsionReport, ReportError> {
                let scroll = match get(&t.fields, "scroll_residual")? {
                    "none" => None,
                    s => Some(parse::<f64>(s, "scroll_residual")?),
                };
                Ok(TorsionReport {
                    point: t.point,
                    involution: get(&t.fields, "involution")?.to_string(),
                    k_base: parse(get(&t.fields, "k_base")?, "k_base")?,
                    k_harmonic: parse(get(&t.fields, "k_harmonic")?, "k_harmonic")?,
                    base_families: get(&t.fields, "base_families")?.to_string(),
                    scroll_residual: scroll,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let possible_k = get(&top, "diag.possible_k")?
            .split_whitespace()
            .map(|w| parse::<u32>(w, "possible_k"))
            .collect::<Result<_, _>>()?;
        let matches_enumeration = match get(&top, "diag.matches_enumeration")? {
            "none" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => {
                return Err(ReportError::Parse(format!(
                    "bad matches_enumeration: {other}"
                )))
            }
        };

        Ok(IdealReport {
            format: header.to_string(),
            n: parse(get(&top, "n")?, "n")?,
            seed: parse(get(&top, "seed")?, "seed")?,
            samples: parse(get(&top, "samples")?, "samples")?,
            tolerance: parse(get(&top, "tolerance")?, "tolerance")?,
            target_tail: parse(get(&top, "target_tail")?, "target_tail")?,
            precision: get(&top, "precision")?.to_string(),
            omega_source: get(&top, "omega_source")?.to_string(),
            omega_seed,
            omega,
            k: parse(get(&top, "k")?, "k")?,
            isotypic,
            per_torsion,
            diagnostics: Diagnostics {
                gap_ratio: parse(get(&top, "diag.gap_ratio")?, "gap_ratio")?,
                kept_min: parse(get(&top, "diag.kept_min")?, "kept_min")?,
                dropped_max: parse(get(&top, "diag.dropped_max")?, "dropped_max")?,
                eval_residual: parse(get(&top, "diag.eval_residual")?, "eval_residual")?,
                sample_count: parse(get(&top, "diag.sample_count")?, "sample_count")?,
                degenerate_redraws: parse(
                    get(&top, "diag.degenerate_redraws")?,
                    "degenerate_redraws",
                )?,
                retries: parse(get(&top, "diag.retries")?, "retries")?,
                possible_k,
                matches_enumeration,
            },
        })
    }

    /// Write the text report at `path` and the JSON twin next to it with the
    /// extension replaced by `json`. Returns both paths.
    pub fn write_files(&self, path: &Path) -> Result<(PathBuf, PathBuf), ReportError> {
        let text_path = path.to_path_buf();
        let json_path = path.with_extension("json");
        std::fs::write(&text_path, self.to_text())?;
        std::fs::write(&json_path, self.to_json())?;
        Ok((text_path, json_path))
    }
}
