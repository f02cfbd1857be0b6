//! On-disk formats: the JSON problem file and the JSON report.
//!
//! A problem file looks like
//!
//! ```json
//! {
//!   "schema_version": "1",
//!   "dims": { "m": 2, "n": 2, "d": 1 },
//!   "a0": [[2.0, 0.0], [0.0, 3.0]],
//!   "terms": [{ "u": [1.0, 0.0], "v": [0.5, 0.0] }],
//!   "b": [1.0, 0.0],
//!   "objective": { "qmat": [[1.0, 0.0], [0.0, 1.0]], "qvec": [0.0, 0.0], "r": 0.0 },
//!   "domain": "interval"
//! }
//! ```
//!
//! `a0` may also be `{"triplets": [[i, j, value], ...]}` (zero-based), and a
//! term may be a dense `{"a": [[...]]}` that is factored on load. A flat array
//! stands for a single column. Any number may be written as a string holding a
//! C99 hex float (`"0x1.8p+1"`), `"inf"`, `"-inf"` or `"nan"`; with
//! `"hexfloat": true` every number is written that way.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::dual::QuadraticObjective;
use crate::error::{Error, Result};
use crate::factorization::factor_term;
use crate::generate::{generate, InstanceKind};
use crate::model::{Domain, FactoredTerm, PhysicsProblem};

pub const SCHEMA_VERSION: &str = "1";
/// Relative rank threshold for dense `{"a": ...}` terms.
pub const FACTOR_TOL: f64 = 1e-10;

/// Exact hexadecimal rendering of `x`, e.g. `0x1.8p+1` for 3.
pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let digits = format!("{mant:013x}");
    let digits = digits.trim_end_matches('0');
    let frac = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    format!("{sign}0x{lead}{frac}p{e:+}")
}

/// Parses a hex float, `inf`, `-inf`, `nan` or a decimal literal.
pub fn parse_real(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        "nan" => return Ok(f64::NAN),
        _ => {}
    }
    let unsigned = t.trim_start_matches(['+', '-']);
    if unsigned.starts_with("0x") || unsigned.starts_with("0X") {
        let normalized = t.replacen("0X", "0x", 1).replacen('P', "p", 1);
        // The parser wants an explicit binary exponent.
        let with_exp = if normalized.contains('p') { normalized } else { format!("{normalized}p0") };
        return hexf_parse::parse_hexf64(with_exp.trim_start_matches('+'), false)
            .map_err(|e| Error::Parse(format!("bad hex float {s:?}: {e}")));
    }
    t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

/// A number as it appeared in the file: a JSON number or a string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Real {
    Dec(f64),
    Hex(f64),
}

impl Real {
    pub fn value(self) -> f64 {
        match self {
            Real::Dec(x) | Real::Hex(x) => x,
        }
    }

    fn new(x: f64, hex: bool) -> Self {
        if hex {
            Real::Hex(x)
        } else {
            Real::Dec(x)
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Real::Dec(x) if x.is_finite() => s.serialize_f64(x),
            Real::Dec(x) | Real::Hex(x) => s.serialize_str(&format_hex(x)),
        }
    }
}

struct RealVisitor;

impl<'de> Visitor<'de> for RealVisitor {
    type Value = Real;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or a hex-float string")
    }
    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Real, E> {
        Ok(Real::Dec(v))
    }
    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Real, E> {
        Ok(Real::Dec(v as f64))
    }
    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Real, E> {
        Ok(Real::Dec(v as f64))
    }
    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Real, E> {
        parse_real(v).map(Real::Hex).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        d.deserialize_any(RealVisitor)
    }
}

/// Dense matrix as nested rows, or a flat array for a single column.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: Vec<Vec<Real>>,
    pub column: bool,
}

impl Mat {
    pub fn from_matrix(a: &DMatrix<f64>, hex: bool) -> Self {
        let rows = (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| Real::new(a[(i, j)], hex)).collect()).collect();
        Self { rows, column: a.ncols() == 1 }
    }

    pub fn to_matrix(&self, field: &str) -> Result<DMatrix<f64>> {
        let nrows = self.rows.len();
        let ncols = self.rows.first().map_or(0, Vec::len);
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::Parse(format!("{field}[{i}]: row has {} entries, expected {ncols}", r.len())));
            }
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| self.rows[i][j].value()))
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.column {
            let flat: Vec<Real> = self.rows.iter().map(|r| r[0]).collect();
            flat.serialize(s)
        } else {
            self.rows.serialize(s)
        }
    }
}

enum Entry {
    Num(Real),
    Row(Vec<Real>),
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entry;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or an array of numbers")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Entry, E> {
                RealVisitor.visit_f64(v).map(Entry::Num)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Entry, E> {
                RealVisitor.visit_i64(v).map(Entry::Num)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Entry, E> {
                RealVisitor.visit_u64(v).map(Entry::Num)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Entry, E> {
                RealVisitor.visit_str(v).map(Entry::Num)
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Entry, A::Error> {
                let mut row = Vec::new();
                while let Some(x) = seq.next_element::<Real>()? {
                    row.push(x);
                }
                Ok(Entry::Row(row))
            }
        }
        d.deserialize_any(V)
    }
}

struct MatVisitor;

impl<'de> Visitor<'de> for MatVisitor {
    type Value = Mat;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an array of rows or a flat array (one column)")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Mat, A::Error> {
        let mut rows = Vec::new();
        let mut column = None;
        while let Some(e) = seq.next_element::<Entry>()? {
            match (e, column) {
                (Entry::Num(x), None | Some(true)) => {
                    column = Some(true);
                    rows.push(vec![x]);
                }
                (Entry::Row(r), None | Some(false)) => {
                    column = Some(false);
                    rows.push(r);
                }
                _ => return Err(de::Error::custom("mixes numbers and rows")),
            }
        }
        Ok(Mat { rows, column: column.unwrap_or(false) })
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        d.deserialize_seq(MatVisitor)
    }
}

/// `a0` as dense rows or zero-based `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub enum A0Spec {
    Dense(Mat),
    Triplets(Vec<(usize, usize, Real)>),
}

impl Serialize for A0Spec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            A0Spec::Dense(m) => m.serialize(s),
            A0Spec::Triplets(t) => {
                let mut map = BTreeMap::new();
                map.insert("triplets", t);
                map.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for A0Spec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = A0Spec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of rows or {\"triplets\": [[i, j, value], ...]}")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, seq: A) -> std::result::Result<A0Spec, A::Error> {
                MatVisitor.visit_seq(seq).map(A0Spec::Dense)
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<A0Spec, A::Error> {
                let mut triplets = None;
                while let Some(key) = map.next_key::<String>()? {
                    if key != "triplets" {
                        return Err(de::Error::unknown_field(&key, &["triplets"]));
                    }
                    triplets = Some(map.next_value::<Vec<(usize, usize, Real)>>()?);
                }
                triplets.map(A0Spec::Triplets).ok_or_else(|| de::Error::missing_field("triplets"))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub d: usize,
}

/// Either `{u, v}` or a dense `{a}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Mat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub qmat: Mat,
    pub qvec: Vec<Real>,
    pub r: Real,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: String,
    pub dims: Dims,
    #[serde(default, skip_serializing_if = "is_false")]
    pub hexfloat: bool,
    pub a0: A0Spec,
    pub terms: Vec<TermSpec>,
    pub b: Vec<Real>,
    pub objective: ObjectiveSpec,
    pub domain: Domain,
}

/// A loaded problem. `factorization_residuals[i]` is `||U V^T - A_i||_2 / ||A_i||_2`
/// for terms given densely.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedProblem {
    pub problem: PhysicsProblem,
    pub objective: QuadraticObjective,
    pub factorization_residuals: Vec<Option<f64>>,
}

fn reals(v: &[Real]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|x| x.value()))
}

fn check_shape(field: &str, a: &DMatrix<f64>, rows: (usize, &str), cols: Option<(usize, &str)>) -> Result<()> {
    if a.nrows() != rows.0 {
        return Err(Error::Parse(format!("{field}: has {} rows, expected {} ({})", a.nrows(), rows.0, rows.1)));
    }
    if let Some((c, name)) = cols {
        if a.ncols() != c {
            return Err(Error::Parse(format!("{field}: has {} columns, expected {c} ({name})", a.ncols())));
        }
    }
    Ok(())
}

impl ProblemFile {
    /// Parses JSON text. Errors name the offending field and, for syntax
    /// errors, the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                Error::Parse(e.inner().to_string())
            } else {
                Error::Parse(format!("{path}: {}", e.inner()))
            }
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "schema_version: unsupported version {:?}, expected {SCHEMA_VERSION:?}",
                file.schema_version
            )));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    /// Builds the in-memory problem, checking every shape against `dims`.
    pub fn to_problem(&self) -> Result<ParsedProblem> {
        let Dims { m, n, d } = self.dims;
        let a0 = match &self.a0 {
            A0Spec::Dense(mat) => {
                let a = mat.to_matrix("a0")?;
                check_shape("a0", &a, (m, "dims.m"), Some((n, "dims.n")))?;
                a
            }
            A0Spec::Triplets(t) => {
                let mut a = DMatrix::zeros(m, n);
                for (k, &(i, j, v)) in t.iter().enumerate() {
                    if i >= m || j >= n {
                        return Err(Error::Parse(format!("a0.triplets[{k}]: index ({i}, {j}) outside {m}x{n}")));
                    }
                    a[(i, j)] += v.value();
                }
                a
            }
        };
        if self.terms.len() != d {
            return Err(Error::Parse(format!("terms: has {} entries, expected {d} (dims.d)", self.terms.len())));
        }
        let mut terms = Vec::with_capacity(d);
        let mut residuals = Vec::with_capacity(d);
        for (i, t) in self.terms.iter().enumerate() {
            match (&t.u, &t.v, &t.a) {
                (Some(u), Some(v), None) => {
                    let (uf, vf) = (format!("terms[{i}].u"), format!("terms[{i}].v"));
                    let u = u.to_matrix(&uf)?;
                    let v = v.to_matrix(&vf)?;
                    check_shape(&uf, &u, (m, "dims.m"), None)?;
                    check_shape(&vf, &v, (n, "dims.n"), Some((u.ncols(), "columns of u")))?;
                    terms.push(FactoredTerm::new(u, v));
                    residuals.push(None);
                }
                (None, None, Some(a)) => {
                    let af = format!("terms[{i}].a");
                    let a = a.to_matrix(&af)?;
                    check_shape(&af, &a, (m, "dims.m"), Some((n, "dims.n")))?;
                    let term = factor_term(&a, FACTOR_TOL).map_err(|e| Error::Parse(format!("{af}: {e}")))?;
                    let norm = crate::linalg::spectral_norm(&a);
                    residuals.push(Some(crate::linalg::spectral_norm(&(term.dense() - &a)) / norm));
                    terms.push(term);
                }
                _ => return Err(Error::Parse(format!("terms[{i}]: expected either {{u, v}} or {{a}}"))),
            }
        }
        if self.b.len() != m {
            return Err(Error::Parse(format!("b: has {} entries, expected {m} (dims.m)", self.b.len())));
        }
        let qmat = self.objective.qmat.to_matrix("objective.qmat")?;
        check_shape("objective.qmat", &qmat, (n, "dims.n"), Some((n, "dims.n")))?;
        if self.objective.qvec.len() != n {
            return Err(Error::Parse(format!(
                "objective.qvec: has {} entries, expected {n} (dims.n)",
                self.objective.qvec.len()
            )));
        }
        if (&qmat - qmat.transpose()).amax() > 1e-12 * (1.0 + qmat.amax()) {
            return Err(Error::Parse("objective.qmat: not symmetric".into()));
        }
        let objective = QuadraticObjective::new(qmat, reals(&self.objective.qvec), self.objective.r.value());
        let problem = PhysicsProblem::new(a0, terms, reals(&self.b), self.domain);
        Ok(ParsedProblem { problem, objective, factorization_residuals: residuals })
    }

    pub fn from_problem(problem: &PhysicsProblem, obj: &QuadraticObjective, hexfloat: bool) -> Self {
        let vec = |v: &DVector<f64>| v.iter().map(|&x| Real::new(x, hexfloat)).collect();
        Self {
            schema_version: SCHEMA_VERSION.into(),
            dims: Dims { m: problem.m(), n: problem.n(), d: problem.d() },
            hexfloat,
            a0: A0Spec::Dense(Mat::from_matrix(&problem.a0, hexfloat)),
            terms: problem
                .terms
                .iter()
                .map(|t| TermSpec {
                    u: Some(Mat::from_matrix(&t.u, hexfloat)),
                    v: Some(Mat::from_matrix(&t.v, hexfloat)),
                    a: None,
                })
                .collect(),
            b: vec(&problem.b),
            objective: ObjectiveSpec {
                qmat: Mat { column: false, ..Mat::from_matrix(&obj.qmat, hexfloat) },
                qvec: vec(&obj.qvec),
                r: Real::new(obj.r, hexfloat),
            },
            domain: problem.domain,
        }
    }
}

pub fn parse_problem(text: &str) -> Result<ParsedProblem> {
    ProblemFile::parse(text)?.to_problem()
}

/// A generated instance in file form.
pub fn generate_instance(
    kind: InstanceKind,
    m: usize,
    d: usize,
    seed: u64,
    domain: Domain,
    hexfloat: bool,
) -> Result<ProblemFile> {
    let inst = generate(kind, m, d, seed, domain)?;
    Ok(ProblemFile::from_problem(&inst.problem, &inst.objective, hexfloat))
}

/// Lowercase hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON numbers for finite values, `"inf"`, `"-inf"` or `"nan"` otherwise.
pub mod lenient_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&format_hex(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Real::deserialize(d).map(Real::value)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
            Option::<Real>::deserialize(d).map(|o| o.map(Real::value))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    /// Smallest eigenvalue of the Schur block at the returned point.
    pub schur_slack: f64,
    /// `eval_dual` at the returned dual point.
    #[serde(with = "lenient_f64")]
    pub certified: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    /// `boolean-enumeration` or `grid`.
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    pub argmin_theta: Vec<f64>,
    pub evaluated_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicSummary {
    pub iterations: usize,
    pub seed: u64,
    #[serde(with = "lenient_f64")]
    pub best_objective: f64,
    #[serde(with = "lenient_f64")]
    pub best_violation: f64,
    /// `eval_dual` at the last dual iterate; a valid lower bound when finite.
    #[serde(with = "lenient_f64")]
    pub dual_bound: f64,
    #[serde(with = "lenient_f64")]
    pub final_lagrangian: f64,
    pub diverged: bool,
}

/// Output of every command except `gen`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportFile {
    pub command: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    /// SHA-256 of the input file bytes.
    pub input_digest: String,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factorization_residuals: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projector_method: Option<crate::projectors::ProjectorMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<crate::projectors::ConditionResiduals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projectors_verified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<crate::dual::DualMode>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "lenient_f64::option")]
    pub d_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "lenient_f64::option")]
    pub p_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "lenient_f64::option")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_status: Option<crate::dual::BoundStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_duality: Option<crate::oracle::WeakDualityCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heuristic: Option<HeuristicSummary>,
    /// Wall-clock milliseconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl ReportFile {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), tool_version: env!("CARGO_PKG_VERSION").into(), ..Self::default() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Copy with timings cleared, for comparing runs.
    pub fn without_timings(&self) -> Self {
        Self { timings: BTreeMap::new(), ..self.clone() }
    }
}
