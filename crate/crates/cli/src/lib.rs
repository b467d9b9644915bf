//! Rendering and orchestration behind the `quadriclab` command line tool:
//! the decomposition and bounds tables, the verification runs with their
//! PASS/FAIL expectation checks, and the acceptance matrix.

use quadriclab_core::bounds::{self, IdealDimTuple};
use quadriclab_core::heisenberg::{central_signature, Sign};
use quadriclab_core::quadrics::{
    run_pipeline, KernelConfig, PipelineConfig, QuadricError, REQUIRED_GAP_RATIO,
};
use quadriclab_core::report::IdealReport;
use quadriclab_core::sym2::{self, TorsionLabel};
use quadriclab_core::theta::{PeriodMatrix, Precision, ThetaError};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Process exit classes: success, expectation failure, indeterminate
/// numerics, usage error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Ok,
    ExpectationFailed,
    Indeterminate,
    Usage,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        match self {
            ExitClass::Ok => 0,
            ExitClass::ExpectationFailed => 1,
            ExitClass::Indeterminate => 2,
            ExitClass::Usage => 64,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Indeterminate(String),
}

impl CliError {
    pub fn exit_class(&self) -> ExitClass {
        match self {
            CliError::Usage(_) => ExitClass::Usage,
            CliError::Indeterminate(_) => ExitClass::Indeterminate,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Indeterminate(m) => m,
        }
    }
}

fn classify_quadric_error(e: QuadricError) -> CliError {
    match &e {
        QuadricError::IndeterminateRank { .. }
        | QuadricError::VerificationFailed { .. }
        | QuadricError::AnomalousKernel { .. }
        | QuadricError::DegenerateSampling(_)
        | QuadricError::Theta(ThetaError::TailNotCertified { .. })
        | QuadricError::Theta(ThetaError::DetectionFailed { .. }) => {
            CliError::Indeterminate(e.to_string())
        }
        _ => CliError::Usage(e.to_string()),
    }
}

/// Inventory table of the decomposition of Sym^2 V at one level.
pub fn render_decompose(n: u32) -> Result<String, CliError> {
    let comps = sym2::decompose(n).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = String::new();
    let dim_w = n * (n + 1) / 2;
    let _ = writeln!(out, "Sym^2 V decomposition at level n = {n} (dim {dim_w})");
    if n % 2 == 1 {
        let _ = writeln!(out, "{:<8} {:>4}", "family", "dim");
        for c in &comps {
            let _ = writeln!(out, "{:<8} {:>4}", c.tag.name(), c.dim());
        }
        let _ = writeln!(
            out,
            "{} isomorphic irreducible modules of dimension {n}",
            n.div_ceil(2)
        );
    } else {
        let d = n / 2;
        let dims = sym2::family_dimensions(n).map_err(|e| CliError::Usage(e.to_string()))?;
        let mults = sym2::family_multiplicities(n).map_err(|e| CliError::Usage(e.to_string()))?;
        let _ = writeln!(
            out,
            "{:<8} {:>4} {:>6} {:>5}  signature(sigma^d, tau^d)",
            "family", "mult", "module", "dim"
        );
        for (f, (l, sign)) in [
            (0u32, Sign::Plus),
            (0, Sign::Minus),
            (1, Sign::Plus),
            (1, Sign::Minus),
        ]
        .into_iter()
        .enumerate()
        {
            let sig = match central_signature(n, l, sign) {
                Ok((s, t)) => format!("({s:+}, {t:+})"),
                Err(_) => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<8} {:>4} {:>6} {:>5}  {}",
                sym2::family_name(n, f),
                mults[f],
                d,
                dims[f],
                sig
            );
        }
    }
    Ok(out)
}

/// One row of the bounds table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundsRow {
    pub n: u32,
    pub possible_k: Vec<u32>,
    /// Admissible base-quadric counts at d = n/2; empty marker for odd n.
    pub kb: Option<Vec<u32>>,
    /// Enumerated ideal tuples for even n in 6..=12.
    pub tuples: Option<Vec<IdealDimTuple>>,
    pub expected_k: u32,
}

pub fn bounds_rows(from: u32, to: u32) -> Result<Vec<BoundsRow>, CliError> {
    if from < 5 || to < from {
        return Err(CliError::Usage(format!(
            "bounds need 5 <= from <= to, got {from}..{to}"
        )));
    }
    let mut rows = vec![];
    for n in from..=to {
        let possible_k = bounds::possible_k(n).map_err(|e| CliError::Usage(e.to_string()))?;
        let kb = if n % 2 == 0 && n >= 6 {
            Some(bounds::kb_bounds(n / 2).map_err(|e| CliError::Usage(e.to_string()))?)
        } else {
            None
        };
        let tuples = if n % 2 == 0 && (6..=12).contains(&n) {
            Some(
                bounds::resolve_ideal_dimensions(n)
                    .map_err(|e| CliError::Usage(e.to_string()))?,
            )
        } else {
            None
        };
        let expected_k = bounds::expected_k(n).map_err(|e| CliError::Usage(e.to_string()))?;
        rows.push(BoundsRow {
            n,
            possible_k,
            kb,
            tuples,
            expected_k,
        });
    }
    Ok(rows)
}

fn set_string(values: &[u32]) -> String {
    let body: Vec<String> = values.iter().map(u32::to_string).collect();
    format!("{{{}}}", body.join(","))
}

pub fn render_bounds(from: u32, to: u32) -> Result<String, CliError> {
    let rows = bounds_rows(from, to)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:<12} {:<10} {:<24} k resolved",
        "type", "k", "k_b", "ideal tuples"
    );
    for row in rows {
        let kb = row.kb.map_or("-".to_string(), |v| set_string(&v));
        let tuples = row.tuples.map_or("-".to_string(), |ts| {
            ts.iter()
                .map(|t| format!("({},{},{},{})", t.0[0], t.0[1], t.0[2], t.0[3]))
                .collect::<Vec<_>>()
                .join(" ")
        });
        let _ = writeln!(
            out,
            "{:<8} {:<12} {:<10} {:<24} {}",
            format!("(1,{})", row.n),
            set_string(&row.possible_k),
            kb,
            tuples,
            row.expected_k
        );
    }
    Ok(out)
}

/// Configuration of one verification run, defaults applied deterministically.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: u32,
    pub seed: u64,
    pub samples: Option<usize>,
    pub tolerance: f64,
    pub target_tail: f64,
    pub precision: Precision,
    pub omega_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(n: u32) -> Self {
        RunConfig {
            n,
            seed: 1,
            samples: None,
            tolerance: 1e-9,
            target_tail: 1e-13,
            precision: Precision::Standard,
            omega_file: None,
            out: None,
        }
    }
}

/// One expectation line of the verification summary.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct VerifyOutcome {
    pub report: IdealReport,
    pub checks: Vec<Check>,
    pub written: Option<(PathBuf, PathBuf)>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_class(&self) -> ExitClass {
        if self.passed() {
            ExitClass::Ok
        } else {
            ExitClass::ExpectationFailed
        }
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "verify n = {} seed = {} samples = {}",
            self.report.n, self.report.seed, self.report.samples
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "  {:<4} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        if let Some((text, json)) = &self.written {
            let _ = writeln!(out, "report: {} {}", text.display(), json.display());
        }
        out
    }
}

/// Expected per-torsion split for the unique enumerated tuple under a given
/// involution class.
fn expected_split(n: u32, tuple: &IdealDimTuple, label: TorsionLabel) -> (u32, u32) {
    let split = sym2::involution_split(n, label).expect("even level");
    let k_b: u32 = split.base_families.iter().map(|&f| tuple.0[f]).sum();
    (k_b, tuple.total() - k_b)
}

/// Run the full pipeline for one level and evaluate the expectations.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyOutcome, CliError> {
    if cfg.n < 5 {
        return Err(CliError::Usage(format!(
            "verification runs need n >= 5, got {}",
            cfg.n
        )));
    }
    let omega = match &cfg.omega_file {
        Some(path) => Some(
            PeriodMatrix::read_file(path).map_err(|e| CliError::Usage(e.to_string()))?,
        ),
        None => None,
    };
    if let Some(pm) = &omega {
        if pm.n() != cfg.n {
            return Err(CliError::Usage(format!(
                "period matrix file is for n = {}, run asked for n = {}",
                pm.n(),
                cfg.n
            )));
        }
    }
    let kernel = KernelConfig {
        samples: cfg
            .samples
            .unwrap_or((2 * cfg.n * (cfg.n + 1)) as usize),
        tolerance: cfg.tolerance,
        target_tail: cfg.target_tail,
        seed: cfg.seed,
        precision: cfg.precision,
    };
    let pipeline = PipelineConfig {
        n: cfg.n,
        kernel,
        omega,
        max_retries: 3,
    };
    let report = run_pipeline(&pipeline).map_err(classify_quadric_error)?;
    let checks = expectation_checks(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    let written = match &cfg.out {
        Some(path) => Some(
            report
                .write_files(path)
                .map_err(|e| CliError::Usage(e.to_string()))?,
        ),
        None => None,
    };
    Ok(VerifyOutcome {
        report,
        checks,
        written,
    })
}

/// The PASS/FAIL expectations for one report: kernel dimension, isotypic
/// tuple and per-torsion splits where the enumeration pins them, scroll
/// residuals, and the certified gap.
pub fn expectation_checks(report: &IdealReport) -> Result<Vec<Check>, bounds::BoundsError> {
    let n = report.n;
    let mut checks = vec![];
    let expected_k = bounds::expected_k(n)?;
    checks.push(Check {
        name: "k".to_string(),
        passed: report.k == expected_k as usize,
        detail: format!("measured {} expected {}", report.k, expected_k),
    });

    let resolved = if n.is_multiple_of(2) && (6..=12).contains(&n) {
        let tuples = bounds::resolve_ideal_dimensions(n)?;
        assert_eq!(tuples.len(), 1, "enumeration is unique in 6..=12");
        Some(tuples[0])
    } else {
        None
    };

    if let Some(tuple) = resolved {
        let expected: Vec<usize> = tuple.0.iter().map(|&v| v as usize).collect();
        checks.push(Check {
            name: "isotypic".to_string(),
            passed: report.isotypic == expected,
            detail: format!("measured {:?} expected {:?}", report.isotypic, expected),
        });
        for t in &report.per_torsion {
            let label = TorsionLabel::ALL
                .into_iter()
                .find(|l| l.name() == t.involution)
                .expect("report carries a valid involution name");
            let (kb, kh) = expected_split(n, &tuple, label);
            checks.push(Check {
                name: format!("split {}", t.point),
                passed: t.k_base == kb as usize && t.k_harmonic == kh as usize,
                detail: format!(
                    "{} measured ({}, {}) expected ({}, {})",
                    t.involution, t.k_base, t.k_harmonic, kb, kh
                ),
            });
        }
        checks.push(Check {
            name: "enumeration".to_string(),
            passed: report.diagnostics.matches_enumeration == Some(true),
            detail: format!("tuple match {:?}", report.diagnostics.matches_enumeration),
        });
    }

    let worst_scroll = report
        .per_torsion
        .iter()
        .filter_map(|t| t.scroll_residual)
        .fold(0.0f64, f64::max);
    if report.per_torsion.iter().any(|t| t.scroll_residual.is_some()) {
        checks.push(Check {
            name: "scroll".to_string(),
            passed: worst_scroll < 1e-8,
            detail: format!("max residual {worst_scroll:.3e} limit 1e-8"),
        });
    }

    checks.push(Check {
        name: "gap".to_string(),
        passed: report.diagnostics.gap_ratio >= REQUIRED_GAP_RATIO,
        detail: format!(
            "ratio {:.3e} required {:.0e}",
            report.diagnostics.gap_ratio, REQUIRED_GAP_RATIO
        ),
    });
    Ok(checks)
}

/// The full verification matrix n = 5..13: three seeds for the even levels
/// the enumeration pins, one seed elsewhere.
pub fn run_suite(
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<(String, ExitClass), CliError> {
    let mut out = String::new();
    let mut worst = ExitClass::Ok;
    for n in 5..=13u32 {
        let seeds: Vec<u64> = if n % 2 == 0 && (6..=12).contains(&n) {
            vec![seed, seed + 1, seed + 2]
        } else {
            vec![seed]
        };
        for s in seeds {
            let mut cfg = RunConfig::new(n);
            cfg.seed = s;
            if let Some(dir) = out_dir {
                cfg.out = Some(dir.join(format!("report-n{n}-seed{s}.txt")));
            }
            match run_verify(&cfg) {
                Ok(outcome) => {
                    let _ = writeln!(
                        out,
                        "n = {:<2} seed = {:<3} k = {:<3} {}",
                        n,
                        s,
                        outcome.report.k,
                        if outcome.passed() { "PASS" } else { "FAIL" }
                    );
                    if !outcome.passed() {
                        for c in outcome.checks.iter().filter(|c| !c.passed) {
                            let _ = writeln!(out, "    FAIL {}: {}", c.name, c.detail);
                        }
                        if worst == ExitClass::Ok {
                            worst = ExitClass::ExpectationFailed;
                        }
                    }
                }
                Err(e) => {
                    let _ = writeln!(out, "n = {n:<2} seed = {s:<3} ERROR {}", e.message());
                    worst = match e.exit_class() {
                        ExitClass::Indeterminate => ExitClass::Indeterminate,
                        other => other,
                    };
                }
            }
        }
    }
    let _ = writeln!(
        out,
        "suite: {}",
        match worst {
            ExitClass::Ok => "PASS",
            ExitClass::ExpectationFailed => "FAIL",
            ExitClass::Indeterminate => "INDETERMINATE",
            ExitClass::Usage => "USAGE",
        }
    );
    Ok((out, worst))
}
