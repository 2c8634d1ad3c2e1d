//! Experiment suites, sharpness studies and machine-readable reports.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anisotropy::{Norm, NormSpec};
use crate::bounds::{
    rectangle_sandwich, torsion_rectangle_sandwich, BoundsOptions, BoundsReport,
    FLAG_WEB_NOT_CONVERGED,
};
use crate::error::{Error, Result};
use crate::fem::solver::{FLAG_ITERATION_CAP, FLAG_NONPOSITIVE, FLAG_NOT_MONOTONE, FLAG_STAGNATED};
use crate::fem::{
    estimate_discretization_error, solve_eigen, solve_torsion, triangulate, SolverOptions,
};
use crate::fmt::sig12;
use crate::geometry::{ConvexPolygon, ShapeSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteCase {
    pub shape: ShapeSpec,
    pub norm: NormSpec,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOutput {
    /// Report file; nothing is written when absent.
    pub path: Option<String>,
    pub format: OutputFormat,
}

/// A named list of `(shape, norm, p)` cases with shared solver options.
///
/// ```json
/// {"name": "demo",
///  "cases": [{"shape": {"kind": "rectangle", "a": 1, "b": 2},
///             "norm": {"kind": "lr", "r": 3}, "p": 2}],
///  "options": {"h": 0.1, "solver": {"tol": 1e-7}},
///  "output": {"path": "demo.csv", "format": "csv"}}
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSuite {
    pub name: String,
    #[serde(default)]
    pub cases: Vec<SuiteCase>,
    #[serde(default)]
    pub options: BoundsOptions,
    #[serde(default)]
    pub output: SuiteOutput,
}

fn config_error(kind: &str, line: usize, column: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{kind} line {line}, column {column}: {msg}"))
}

impl ExperimentSuite {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error("json", e.line(), e.column(), e))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unwrap_or((0, 0));
            config_error("toml", line, column, e.message())
        })
    }

    /// Parses by extension (`.toml`) or, failing that, by content.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let is_toml =
            path.extension().is_some_and(|e| e == "toml") || !text.trim_start().starts_with('{');
        let suite = if is_toml {
            Self::from_toml(&text)
        } else {
            Self::from_json(&text)
        }?;
        suite.validate()?;
        Ok(suite)
    }

    /// Every case must resolve to a valid polygon and norm.
    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.cases.iter().enumerate() {
            resolve(c).map_err(|e| Error::Config(format!("case {i}: {e}")))?;
        }
        Ok(())
    }

    /// Squares, 2:1 and 4:1 rectangles and regular 6/8/12-gons crossed with
    /// the Euclidean, ℓ³ and ℓ^{1.5} norms and `p ∈ {1.5, 2, 3}`.
    pub fn paper_core() -> Self {
        let rect = |a, b| ShapeSpec::Rectangle { a, b };
        let ngon = |n| ShapeSpec::RegularNgon {
            n,
            circumradius: 1.0,
        };
        let eu = NormSpec::Euclidean;
        let l3 = NormSpec::Lr { r: 3.0 };
        let l15 = NormSpec::Lr { r: 1.5 };
        let cases = [
            (rect(1.0, 1.0), eu.clone(), 2.0),
            (rect(1.0, 1.0), l3.clone(), 3.0),
            (rect(1.0, 1.0), l15.clone(), 1.5),
            (rect(1.0, 2.0), eu.clone(), 1.5),
            (rect(1.0, 2.0), l3.clone(), 2.0),
            (rect(1.0, 4.0), l15.clone(), 3.0),
            (rect(1.0, 4.0), eu.clone(), 2.0),
            (ngon(6), l3.clone(), 1.5),
            (ngon(6), l15.clone(), 3.0),
            (ngon(8), l15, 2.0),
            (ngon(8), l3, 3.0),
            (ngon(12), eu, 1.5),
        ]
        .into_iter()
        .map(|(shape, norm, p)| SuiteCase { shape, norm, p })
        .collect();
        ExperimentSuite {
            name: "paper-core".to_string(),
            cases,
            options: BoundsOptions::default(),
            output: SuiteOutput::default(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "paper-core" => Some(Self::paper_core()),
            _ => None,
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let head = &text[..offset.min(text.len())];
    let line = head.matches('\n').count() + 1;
    let column = head.len() - head.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn resolve(case: &SuiteCase) -> Result<(ConvexPolygon, Norm)> {
    let poly = case.shape.build()?;
    let norm = Norm::new(case.norm.clone())?;
    if !(case.p > 1.0 && case.p.is_finite()) {
        return Err(Error::Domain(format!("p must be > 1, got {}", case.p)));
    }
    Ok((poly, norm))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    /// Numerics did not settle, or the case could not be evaluated.
    Warning,
    /// Some inequality fails beyond its slack.
    Violation,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Warning => "warning",
            RowStatus::Violation => "violation",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteRow {
    pub case: usize,
    pub shape_id: String,
    pub norm_id: String,
    pub p: f64,
    pub status: RowStatus,
    pub violations: Vec<String>,
    /// Set when the case could not be evaluated at all.
    pub error: Option<String>,
    pub report: Option<BoundsReport>,
}

/// Test hook: negates one bound of one case before margins are evaluated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultInjection {
    pub case: usize,
    pub bound: String,
}

impl std::str::FromStr for FaultInjection {
    type Err = Error;

    /// `CASE:BOUND`, e.g. `0:polya_upper`.
    fn from_str(s: &str) -> Result<Self> {
        let (c, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("fault must be CASE:BOUND, got {s:?}")))?;
        let case = c
            .parse()
            .map_err(|_| Error::Config(format!("bad case index {c:?}")))?;
        Ok(FaultInjection {
            case,
            bound: b.to_string(),
        })
    }
}

fn inject(report: &mut BoundsReport, bound: &str) -> Result<()> {
    let field = match bound {
        "polya_upper" => &mut report.polya_upper,
        "web_upper" => &mut report.web_upper,
        "faber_krahn_lower" => &mut report.faber_krahn_lower,
        "torsion_lower_closed" => &mut report.torsion_lower_closed,
        "torsion_lower_web" => &mut report.torsion_lower_web,
        "torsion_upper" => &mut report.torsion_upper,
        "stability_rhs" => &mut report.stability_rhs,
        _ => return Err(Error::Config(format!("unknown bound {bound:?}"))),
    };
    *field = -*field;
    report.refresh_margins();
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub fault: Option<FaultInjection>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub rows: Vec<SuiteRow>,
}

pub const MARGIN_KEYS: [&str; 8] = [
    "polya",
    "faber_krahn",
    "web_upper",
    "web_le_polya",
    "torsion_closed_le_web",
    "torsion_web_le_fem",
    "torsion_upper",
    "stability",
];

const CSV_VALUES: [&str; 22] = [
    "area",
    "perimeter_h",
    "kappa2",
    "inradius",
    "h",
    "polya_upper",
    "web_upper",
    "faber_krahn_lower",
    "solver_lambda",
    "eps_lambda",
    "torsion_lower_closed",
    "torsion_lower_web",
    "solver_tau",
    "eps_tau",
    "torsion_upper",
    "deficit_normalized",
    "c_omega",
    "stability_rhs",
    "stability_lhs",
    "lambda_tilde",
    "min_margin",
    "margin_count",
];

fn report_value(r: &BoundsReport, key: &str) -> Option<f64> {
    Some(match key {
        "area" => r.area,
        "perimeter_h" => r.perimeter_h,
        "kappa2" => r.kappa2,
        "inradius" => r.inradius,
        "h" => r.h?,
        "polya_upper" => r.polya_upper,
        "web_upper" => r.web_upper,
        "faber_krahn_lower" => r.faber_krahn_lower,
        "solver_lambda" => r.solver_lambda?,
        "eps_lambda" => r.eps_lambda,
        "torsion_lower_closed" => r.torsion_lower_closed,
        "torsion_lower_web" => r.torsion_lower_web,
        "solver_tau" => r.solver_tau?,
        "eps_tau" => r.eps_tau,
        "torsion_upper" => r.torsion_upper,
        "deficit_normalized" => r.deficit_normalized,
        "c_omega" => r.c_omega,
        "stability_rhs" => r.stability_rhs,
        "stability_lhs" => r.stability_lhs?,
        "lambda_tilde" => r.lambda_tilde,
        "min_margin" => r.margins.values().copied().reduce(f64::min)?,
        "margin_count" => r.margins.len() as f64,
        _ => r.margins.get(key.strip_prefix("margin_")?).copied()?,
    })
}

impl SuiteOutcome {
    /// Nonzero iff some row violates a bound.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.rows.iter().any(|r| r.status == RowStatus::Violation))
    }

    pub fn csv_columns() -> Vec<String> {
        let mut cols: Vec<String> = ["case", "shape", "norm", "p", "status"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cols.extend(CSV_VALUES.iter().map(|s| s.to_string()));
        cols.extend(MARGIN_KEYS.iter().map(|k| format!("margin_{k}")));
        cols.extend(
            ["violations", "flags", "error"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols
    }

    pub fn to_csv(&self) -> Result<String> {
        let cols = Self::csv_columns();
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&cols).map_err(io)?;
        for row in &self.rows {
            let mut rec = vec![
                row.case.to_string(),
                row.shape_id.clone(),
                row.norm_id.clone(),
                sig12(row.p),
                row.status.as_str().to_string(),
            ];
            for key in cols[5..cols.len() - 3].iter() {
                let v = row.report.as_ref().and_then(|r| report_value(r, key));
                rec.push(v.map(sig12).unwrap_or_default());
            }
            rec.push(row.violations.join(";"));
            rec.push(
                row.report
                    .as_ref()
                    .map(|r| r.flags.join(";"))
                    .unwrap_or_default(),
            );
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        to_json_rounded(self)
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let text = match format {
            OutputFormat::Csv => self.to_csv()?,
            OutputFormat::Json => self.to_json(),
        };
        std::fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fixed-width table for terminals.
    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "{:>4}  {:<14} {:<10} {:>5} {:>12} {:>12} {:>12} {:>12} {:>12}  {}\n",
            "case",
            "shape",
            "norm",
            "p",
            "lambda",
            "polya",
            "tau",
            "min_margin",
            "eps_lambda",
            "status"
        );
        let num = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
        for row in &self.rows {
            let r = row.report.as_ref();
            s.push_str(&format!(
                "{:>4}  {:<14} {:<10} {:>5} {:>12} {:>12} {:>12} {:>12} {:>12}  {}{}\n",
                row.case,
                row.shape_id,
                row.norm_id,
                row.p,
                num(r.and_then(|r| r.solver_lambda)),
                num(r.map(|r| r.polya_upper)),
                num(r.and_then(|r| r.solver_tau)),
                num(r.and_then(|r| report_value(r, "min_margin"))),
                num(r.map(|r| r.eps_lambda)),
                row.status.as_str(),
                if row.violations.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", row.violations.join(","))
                }
            ));
        }
        let bad = self
            .rows
            .iter()
            .filter(|r| r.status == RowStatus::Violation)
            .count();
        let warn = self
            .rows
            .iter()
            .filter(|r| r.status == RowStatus::Warning)
            .count();
        s.push_str(&format!(
            "{}: {} cases, {} violations, {} warnings\n",
            self.name,
            self.rows.len(),
            bad,
            warn
        ));
        s
    }
}

/// Serializes with every float rounded to 12 significant digits.
pub fn to_json_rounded<T: Serialize>(value: &T) -> String {
    fn round(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Number(n) if !n.is_i64() && !n.is_u64() => {
                if let Some(x) = n.as_f64() {
                    let r: f64 = sig12(x).parse().unwrap_or(x);
                    if let Some(m) = serde_json::Number::from_f64(r) {
                        *n = m;
                    }
                }
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(round),
            serde_json::Value::Object(o) => o.values_mut().for_each(round),
            _ => {}
        }
    }
    let mut v = serde_json::to_value(value).expect("report types serialize");
    round(&mut v);
    serde_json::to_string_pretty(&v).expect("json value serializes") + "\n"
}

fn run_case(
    index: usize,
    case: &SuiteCase,
    opts: &BoundsOptions,
    fault: Option<&FaultInjection>,
) -> SuiteRow {
    let shape_id = case.shape.id();
    let mut row = SuiteRow {
        case: index,
        shape_id: shape_id.clone(),
        norm_id: case.norm.id(),
        p: case.p,
        status: RowStatus::Ok,
        violations: Vec::new(),
        error: None,
        report: None,
    };
    let result = resolve(case).and_then(|(poly, norm)| {
        let mut r = BoundsReport::compute(&shape_id, &poly, &norm, case.p, opts)?;
        if let Some(f) = fault.filter(|f| f.case == index) {
            inject(&mut r, &f.bound)?;
        }
        Ok(r)
    });
    match result {
        Ok(r) => {
            row.violations = r.violations();
            row.status = if !row.violations.is_empty() {
                RowStatus::Violation
            } else if r.flags.iter().any(|f| is_warning(f)) {
                RowStatus::Warning
            } else {
                RowStatus::Ok
            };
            row.report = Some(r);
        }
        Err(e) => {
            row.status = RowStatus::Warning;
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Flags that mean the numbers may not have settled; informational flags
/// (regularized gauge, vacuous stability) leave the row `ok`.
fn is_warning(flag: &str) -> bool {
    [
        FLAG_WEB_NOT_CONVERGED,
        FLAG_ITERATION_CAP,
        FLAG_STAGNATED,
        FLAG_NOT_MONOTONE,
        FLAG_NONPOSITIVE,
    ]
    .contains(&flag)
}

/// Runs every case (in parallel) and gathers rows in input order.
pub fn run_suite(suite: &ExperimentSuite, config: &RunConfig) -> Result<SuiteOutcome> {
    suite.validate()?;
    let work = || -> Vec<SuiteRow> {
        suite
            .cases
            .par_iter()
            .enumerate()
            .map(|(i, c)| run_case(i, c, &suite.options, config.fault.as_ref()))
            .collect()
    };
    let rows = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(SuiteOutcome {
        name: suite.name.clone(),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpnessKind {
    PolyaRectangle,
    TorsionRectangle,
}

impl std::str::FromStr for SharpnessKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polya_rectangle" => Ok(SharpnessKind::PolyaRectangle),
            "torsion_rectangle" => Ok(SharpnessKind::TorsionRectangle),
            _ => Err(Error::Config(format!("unknown sharpness kind {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpnessRow {
    pub a: f64,
    pub b: f64,
    pub lower: f64,
    pub upper: f64,
    pub fem: f64,
    pub eps_h: f64,
    /// `λ_FEM / upper` for eigenvalues, `lower / τ_FEM` for torsion.
    pub ratio: f64,
    /// `lower / upper`; equals `(b/(a+b))^{p'}` for torsion.
    pub sandwich_ratio: f64,
    pub sandwich_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpnessReport {
    pub kind: SharpnessKind,
    pub p: f64,
    pub rows: Vec<SharpnessRow>,
    /// Ratios strictly increase with `b`.
    pub monotone: bool,
}

impl SharpnessReport {
    pub fn exit_code(&self) -> i32 {
        i32::from(!(self.monotone && self.rows.iter().all(|r| r.sandwich_holds)))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("a,b,lower,upper,fem,eps_h,ratio,sandwich_ratio,sandwich_holds\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                sig12(r.a),
                sig12(r.b),
                sig12(r.lower),
                sig12(r.upper),
                sig12(r.fem),
                sig12(r.eps_h),
                sig12(r.ratio),
                sig12(r.sandwich_ratio),
                r.sandwich_holds
            ));
        }
        s
    }
}

/// Rectangles `[0,1]×[0,b]` under the ℓ^p gauge: sandwich endpoints, the
/// Richardson-extrapolated FEM value at `h = 1/8, 1/16` and the ratio.
pub fn sharpness_study(kind: SharpnessKind, p: f64, b_values: &[f64]) -> Result<SharpnessReport> {
    sharpness_study_with(kind, p, b_values, 0.125, &SolverOptions::default())
}

pub fn sharpness_study_with(
    kind: SharpnessKind,
    p: f64,
    b_values: &[f64],
    h: f64,
    solver: &SolverOptions,
) -> Result<SharpnessReport> {
    let a = 1.0;
    let norm = Norm::lr(p)?;
    let rows = b_values
        .par_iter()
        .map(|&b| -> Result<SharpnessRow> {
            let poly = ConvexPolygon::rectangle(a, b)?;
            let coarse = triangulate(&poly, h)?;
            let fine = coarse.refine_uniform();
            let (s, est) = match kind {
                SharpnessKind::PolyaRectangle => {
                    let s = rectangle_sandwich(a, b, p)?;
                    let e0 = solve_eigen(&coarse, &norm, p, solver)?;
                    let e1 = solve_eigen(&fine, &norm, p, solver)?;
                    (s, estimate_discretization_error(e0.lambda, e1.lambda))
                }
                SharpnessKind::TorsionRectangle => {
                    let s = torsion_rectangle_sandwich(a, b, p)?;
                    let t0 = solve_torsion(&coarse, &norm, p, solver)?;
                    let t1 = solve_torsion(&fine, &norm, p, solver)?;
                    (s, estimate_discretization_error(t0.tau, t1.tau))
                }
            };
            let fem = est.extrapolated;
            let ratio = match kind {
                SharpnessKind::PolyaRectangle => fem / s.upper,
                SharpnessKind::TorsionRectangle => s.lower / fem,
            };
            Ok(SharpnessRow {
                a,
                b,
                lower: s.lower,
                upper: s.upper,
                fem,
                eps_h: est.eps_h,
                ratio,
                sandwich_ratio: s.lower / s.upper,
                sandwich_holds: s.lower - est.eps_h <= fem && fem <= s.upper + est.eps_h,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].b <= w[0].b || w[1].ratio > w[0].ratio);
    Ok(SharpnessReport {
        kind,
        p,
        rows,
        monotone,
    })
}

/// Column set of the suite CSV, as a map from name to position.
pub fn csv_schema() -> BTreeMap<String, usize> {
    SuiteOutcome::csv_columns()
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_suite() -> ExperimentSuite {
        ExperimentSuite::from_json(
            r#"{"name": "tiny",
                "cases": [{"shape": {"kind": "rectangle", "a": 1, "b": 1},
                           "norm": {"kind": "euclidean"}, "p": 2},
                          {"shape": {"kind": "regular_ngon", "n": 6, "circumradius": 1},
                           "norm": {"kind": "lr", "r": 3}, "p": 3}],
                "options": {"h": 0.25}}"#,
        )
        .unwrap()
    }

    #[test]
    fn json_errors_carry_position() {
        let e = ExperimentSuite::from_json("{\"name\": \"x\",\n \"casez\": []}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        let e = ExperimentSuite::from_json("{\"name\": \"x\",\n\n  \"cases\": [1,}").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn toml_suite_and_errors() {
        let text = "name = \"t\"\n\n[[cases]]\np = 2.0\nshape = { kind = \"rectangle\", a = 1.0, b = 2.0 }\nnorm = { kind = \"euclidean\" }\n";
        let s = ExperimentSuite::from_toml(text).unwrap();
        assert_eq!(s.cases.len(), 1);
        assert_eq!(s.output.format, OutputFormat::Csv);
        let bad = "name = \"t\"\n[[cases]]\np = 2.0\nshape = { kind = \"blob\" }\nnorm = { kind = \"euclidean\" }\n";
        let e = ExperimentSuite::from_toml(bad).unwrap_err().to_string();
        assert!(e.contains("line 4"), "{e}");
    }

    #[test]
    fn invalid_cases_are_rejected() {
        let mut s = tiny_suite();
        s.cases[1].p = 0.5;
        assert!(matches!(s.validate(), Err(Error::Config(m)) if m.starts_with("case 1")));
        let mut s = tiny_suite();
        s.cases[0].shape = ShapeSpec::Polygon {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn empty_suite() {
        let s = ExperimentSuite::from_json(r#"{"name": "empty"}"#).unwrap();
        let out = run_suite(&s, &RunConfig::default()).unwrap();
        assert_eq!(out.exit_code(), 0);
        assert!(out.rows.is_empty());
        assert_eq!(out.to_csv().unwrap().lines().count(), 1);
    }

    #[test]
    fn fault_injection_flips_exit_code() {
        let mut s = tiny_suite();
        s.options.solve = false;
        let clean = run_suite(&s, &RunConfig::default()).unwrap();
        assert_eq!(clean.exit_code(), 0, "{}", clean.summary_table());
        let cfg = RunConfig {
            threads: Some(2),
            fault: Some("1:polya_upper".parse().unwrap()),
        };
        let bad = run_suite(&s, &cfg).unwrap();
        assert_eq!(bad.exit_code(), 1);
        assert_eq!(bad.rows[0].status, RowStatus::Ok);
        assert_eq!(bad.rows[1].violations, vec!["web_le_polya".to_string()]);
        assert!("x".parse::<FaultInjection>().is_err());
    }

    #[test]
    fn csv_is_deterministic_and_rounded() {
        let s = tiny_suite();
        let a = run_suite(
            &s,
            &RunConfig {
                threads: Some(1),
                fault: None,
            },
        )
        .unwrap();
        let b = run_suite(
            &s,
            &RunConfig {
                threads: Some(3),
                fault: None,
            },
        )
        .unwrap();
        let (ca, cb) = (a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(ca, cb);
        assert_eq!(a.exit_code(), 0, "{}", a.summary_table());
        let header = ca.lines().next().unwrap();
        assert_eq!(header.split(',').count(), SuiteOutcome::csv_columns().len());
        let lam_col = csv_schema()["solver_lambda"];
        let lam = ca.lines().nth(1).unwrap().split(',').nth(lam_col).unwrap();
        assert_eq!(
            lam.split('e').next().unwrap().replace(['.', '-'], "").len(),
            12,
            "{lam}"
        );
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn line_column_positions() {
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
        assert_eq!(line_column("ab", 0), (1, 1));
    }

    #[test]
    fn symmetric_rectangle_has_widest_polya_gap() {
        let b = [1.0, 2.0, 4.0];
        let s: Vec<f64> = b
            .iter()
            .map(|&b| {
                let s = rectangle_sandwich(1.0, b, 2.0).unwrap();
                s.lower / s.upper
            })
            .collect();
        assert!(s[0] < s[1] && s[1] < s[2]);
        assert!((s[0] - 0.25).abs() < 1e-15);
    }
}
