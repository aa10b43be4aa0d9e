//! JSON file formats.
//!
//! Matrices are `{"rows": r, "cols": c, "data": [[re, im], ...]}` in
//! row-major order; every other format nests them. Permutation images,
//! outcome-tuple keys and product orders are one-based in files. Writers
//! emit floats with 17 significant digits, so output round-trips exactly.
//!
//! Parse errors carry the JSON path of the offending field, e.g.
//! `grid[1][0].data`.

use std::io;

use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::dnt::{AffineDecomposition, DecompositionVerdict, Dnt, DntExtremality, PermutationDecomposition, PseudoMother};
use crate::hermat::{ComplexMatrix, HermitianMatrix, LinalgError, C64, MAX_EIG_DIM};
use crate::jointmeas::{JmInstance, JmVerdict};
use crate::povm::{ExtremalityReport, MotherMeasurement, PostProcessingMap, Povm};
use crate::sdp::{BlockKind, BlockSpec, Residuals, SdpProblem, SdpSolution};
use crate::stochastic::{BvnDecomposition, DoublyStochasticMatrix};

/// Largest grid side or outcome count accepted from files.
pub const MAX_FILE_N: usize = 720;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    /// Malformed JSON or a field of the wrong type.
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    /// Well-formed JSON violating a format or domain rule.
    #[error("{path}: {message}")]
    Field { path: String, message: String },
}

impl FormatError {
    fn field(path: impl Into<String>, message: impl ToString) -> Self {
        Self::Field {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn path(&self) -> &str {
        match self {
            Self::Syntax { path, .. } | Self::Field { path, .. } => path,
        }
    }
}

fn parse_raw<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T, FormatError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        FormatError::Syntax {
            path: if path == "." { "$".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    Ok(value)
}

fn join(base: &str, field: &str) -> String {
    if base.is_empty() {
        field.to_string()
    } else if field.starts_with('[') {
        format!("{base}{field}")
    } else {
        format!("{base}.{field}")
    }
}

// ---------------------------------------------------------------- raw shapes

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPovm {
    dim: usize,
    elements: Vec<RawMatrix>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    m: usize,
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    probs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoublyStochastic {
    n: usize,
    data: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDnt {
    n: usize,
    dim: usize,
    grid: Vec<Vec<RawMatrix>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJmInstance {
    povms: Vec<RawPovm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    block: usize,
    matrix: RawMatrix,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    dim: usize,
    kind: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    terms: Vec<RawTerm>,
    rhs: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSdp {
    blocks: Vec<RawBlock>,
    #[serde(default)]
    objective: Vec<RawTerm>,
    constraints: Vec<RawConstraint>,
}

/// `{"n", "dim", "grid"}` or `{"dim", "elements"}`; trivial-pair mothers come in either.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawMother {
    Grid(RawDnt),
    Povm(RawPovm),
}

// ---------------------------------------------------------------- conversion

fn matrix_from_raw(raw: &RawMatrix, path: &str) -> Result<ComplexMatrix, FormatError> {
    if raw.rows > MAX_EIG_DIM || raw.cols > MAX_EIG_DIM {
        return Err(FormatError::field(
            path,
            format!("{}x{} exceeds the limit {MAX_EIG_DIM}", raw.rows, raw.cols),
        ));
    }
    let data = raw.data.iter().map(|&[re, im]| C64::new(re, im)).collect();
    ComplexMatrix::new(raw.rows, raw.cols, data).map_err(|e| {
        let at = match e {
            LinalgError::BadShape { .. } | LinalgError::NonFinite { .. } => join(path, "data"),
            _ => path.to_string(),
        };
        FormatError::field(at, e)
    })
}

fn hermitian_from_raw(raw: &RawMatrix, dim: usize, path: &str) -> Result<HermitianMatrix, FormatError> {
    let m = matrix_from_raw(raw, path)?;
    if m.rows() != dim || m.cols() != dim {
        return Err(FormatError::field(
            path,
            format!("expected {dim}x{dim}, found {}x{}", m.rows(), m.cols()),
        ));
    }
    HermitianMatrix::new(m).map_err(|e| FormatError::field(path, e))
}

fn povm_from_raw(raw: &RawPovm, path: &str) -> Result<Povm, FormatError> {
    if raw.elements.is_empty() {
        return Err(FormatError::field(join(path, "elements"), "no elements"));
    }
    if raw.elements.len() > MAX_FILE_N {
        return Err(FormatError::field(join(path, "elements"), "too many elements"));
    }
    let elements = raw
        .elements
        .iter()
        .enumerate()
        .map(|(k, m)| hermitian_from_raw(m, raw.dim, &join(path, &format!("elements[{k}]"))))
        .collect::<Result<Vec<_>, _>>()?;
    Povm::new(elements).map_err(|e| {
        let at = match e {
            crate::povm::PovmError::NotPsd { index, .. } => join(path, &format!("elements[{index}]")),
            _ => join(path, "elements"),
        };
        FormatError::field(at, e)
    })
}

fn map_from_raw(raw: &RawMap) -> Result<PostProcessingMap, FormatError> {
    let expected = (raw.m, raw.n, raw.k);
    if raw.probs.len() != raw.m {
        return Err(FormatError::field("probs", format!("expected {} measurements", raw.m)));
    }
    for (i, per_i) in raw.probs.iter().enumerate() {
        if per_i.len() != raw.n {
            return Err(FormatError::field(format!("probs[{i}]"), format!("expected {} outcomes", raw.n)));
        }
        for (j, per_j) in per_i.iter().enumerate() {
            if per_j.len() != raw.k {
                return Err(FormatError::field(
                    format!("probs[{i}][{j}]"),
                    format!("expected {} mother outcomes", raw.k),
                ));
            }
        }
    }
    let map = PostProcessingMap::new(raw.probs.clone()).map_err(|e| FormatError::field("probs", e))?;
    debug_assert_eq!(
        (map.num_measurements(), map.num_outcomes(), map.num_mother_outcomes()),
        expected
    );
    Ok(map)
}

fn grid_from_raw(raw: &RawDnt) -> Result<Vec<HermitianMatrix>, FormatError> {
    if raw.n == 0 || raw.n > MAX_FILE_N {
        return Err(FormatError::field("n", format!("must be in 1..={MAX_FILE_N}")));
    }
    if raw.grid.len() != raw.n {
        return Err(FormatError::field("grid", format!("expected {} rows, found {}", raw.n, raw.grid.len())));
    }
    let mut out = Vec::with_capacity(raw.n * raw.n);
    for (i, row) in raw.grid.iter().enumerate() {
        if row.len() != raw.n {
            return Err(FormatError::field(
                format!("grid[{i}]"),
                format!("expected {} entries, found {}", raw.n, row.len()),
            ));
        }
        for (j, m) in row.iter().enumerate() {
            out.push(hermitian_from_raw(m, raw.dim, &format!("grid[{i}][{j}]"))?);
        }
    }
    Ok(out)
}

fn dnt_error_path(e: &crate::dnt::DntError) -> String {
    use crate::dnt::DntError::*;
    match e {
        EntryNotPsd { i, j, .. } | DimensionMismatch { i, j, .. } => format!("grid[{i}][{j}]"),
        RowNotNormalized { i, .. } => format!("grid[{i}]"),
        NotSquare { row, .. } => format!("grid[{row}]"),
        _ => "grid".into(),
    }
}

// ---------------------------------------------------------------- parsers

pub fn parse_matrix(text: &str) -> Result<ComplexMatrix, FormatError> {
    matrix_from_raw(&parse_raw::<RawMatrix>(text)?, "")
}

pub fn parse_povm(text: &str) -> Result<Povm, FormatError> {
    povm_from_raw(&parse_raw::<RawPovm>(text)?, "")
}

pub fn parse_post_processing_map(text: &str) -> Result<PostProcessingMap, FormatError> {
    map_from_raw(&parse_raw::<RawMap>(text)?)
}

pub fn parse_doubly_stochastic(text: &str) -> Result<DoublyStochasticMatrix, FormatError> {
    let raw: RawDoublyStochastic = parse_raw(text)?;
    if raw.n == 0 || raw.n > MAX_FILE_N {
        return Err(FormatError::field("n", format!("must be in 1..={MAX_FILE_N}")));
    }
    if raw.data.len() != raw.n {
        return Err(FormatError::field("data", format!("expected {} rows", raw.n)));
    }
    for (i, row) in raw.data.iter().enumerate() {
        if row.len() != raw.n {
            return Err(FormatError::field(format!("data[{i}]"), format!("expected {} entries", raw.n)));
        }
    }
    DoublyStochasticMatrix::from_rows(&raw.data).map_err(|e| {
        use crate::stochastic::StochasticError::*;
        let at = match &e {
            RowSum { row, .. } => format!("data[{row}]"),
            NegativeEntry { index, .. } | NonFinite { index } => {
                format!("data[{}][{}]", index / raw.n, index % raw.n)
            }
            _ => "data".into(),
        };
        FormatError::field(at, e)
    })
}

/// A DNT file, validated.
pub fn parse_dnt(text: &str) -> Result<Dnt, FormatError> {
    let (n, grid) = parse_dnt_grid(text)?;
    Dnt::from_flat(n, grid).map_err(|e| FormatError::field(dnt_error_path(&e), e))
}

/// A DNT file checked for shape and Hermiticity only: `(n, row-major entries)`.
pub fn parse_dnt_grid(text: &str) -> Result<(usize, Vec<HermitianMatrix>), FormatError> {
    let raw: RawDnt = parse_raw(text)?;
    Ok((raw.n, grid_from_raw(&raw)?))
}

/// Mother of a trivial pair: a DNT-shaped grid (not row-normalized) or a POVM
/// with `n^2` elements, row-major.
pub fn parse_trivial_mother(text: &str) -> Result<Povm, FormatError> {
    match parse_raw::<RawMother>(text).map_err(|_| FormatError::Syntax {
        path: "$".into(),
        message: "expected a grid {\"n\", \"dim\", \"grid\"} or a POVM {\"dim\", \"elements\"}".into(),
    })? {
        RawMother::Grid(raw) => {
            let grid = grid_from_raw(&raw)?;
            Povm::new(grid).map_err(|e| FormatError::field("grid", e))
        }
        RawMother::Povm(raw) => povm_from_raw(&raw, ""),
    }
}

pub fn parse_jm_instance(text: &str) -> Result<JmInstance, FormatError> {
    let raw: RawJmInstance = parse_raw(text)?;
    let povms = raw
        .povms
        .iter()
        .enumerate()
        .map(|(i, p)| povm_from_raw(p, &format!("povms[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    JmInstance::new(povms).map_err(|e| FormatError::field("povms", e))
}

pub fn parse_sdp_problem(text: &str) -> Result<SdpProblem, FormatError> {
    let raw: RawSdp = parse_raw(text)?;
    let mut blocks = Vec::with_capacity(raw.blocks.len());
    for (b, blk) in raw.blocks.iter().enumerate() {
        let kind = match blk.kind.as_str() {
            "real" => BlockKind::Real,
            "complex" => BlockKind::Complex,
            other => {
                return Err(FormatError::field(
                    format!("blocks[{b}].kind"),
                    format!("unknown kind {other:?}, expected \"real\" or \"complex\""),
                ))
            }
        };
        if blk.dim == 0 || blk.dim > MAX_EIG_DIM {
            return Err(FormatError::field(format!("blocks[{b}].dim"), "out of range"));
        }
        blocks.push(BlockSpec { dim: blk.dim, kind });
    }
    let term = |t: &RawTerm, path: String| -> Result<(usize, HermitianMatrix), FormatError> {
        let dim = blocks
            .get(t.block)
            .ok_or_else(|| FormatError::field(join(&path, "block"), "no such block"))?
            .dim;
        Ok((t.block, hermitian_from_raw(&t.matrix, dim, &join(&path, "matrix"))?))
    };
    let mut problem = SdpProblem::new(blocks.clone());
    for (k, t) in raw.objective.iter().enumerate() {
        problem.objective.push(term(t, format!("objective[{k}]"))?);
    }
    for (c, con) in raw.constraints.iter().enumerate() {
        let terms = con
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| term(t, format!("constraints[{c}].terms[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        problem.add_constraint(terms, con.rhs);
    }
    problem.validate().map_err(|e| FormatError::field("$", e))?;
    Ok(problem)
}

// ---------------------------------------------------------------- writers

pub fn matrix_value(m: &ComplexMatrix) -> Value {
    json!({
        "rows": m.rows(),
        "cols": m.cols(),
        "data": m.data().iter().map(|z| json!([z.re, z.im])).collect::<Vec<_>>(),
    })
}

fn hermitian_value(h: &HermitianMatrix) -> Value {
    matrix_value(h.matrix())
}

fn hermitian_list(hs: &[HermitianMatrix]) -> Value {
    Value::Array(hs.iter().map(hermitian_value).collect())
}

pub fn povm_value(p: &Povm) -> Value {
    json!({ "dim": p.dim(), "elements": hermitian_list(p.elements()) })
}

pub fn map_value(m: &PostProcessingMap) -> Value {
    json!({
        "m": m.num_measurements(),
        "n": m.num_outcomes(),
        "K": m.num_mother_outcomes(),
        "probs": m.to_nested(),
    })
}

pub fn mother_value(m: &MotherMeasurement) -> Value {
    json!({ "povm": povm_value(&m.mother), "map": map_value(&m.map) })
}

pub fn doubly_stochastic_value(d: &DoublyStochasticMatrix) -> Value {
    json!({ "n": d.n(), "data": d.rows() })
}

pub fn bvn_value(b: &BvnDecomposition) -> Value {
    json!({
        "terms": b.terms.iter().map(|t| json!({
            "weight": t.weight,
            "perm": t.perm.one_based(),
        })).collect::<Vec<_>>(),
    })
}

fn grid_value(n: usize, dim: usize, entries: &[HermitianMatrix]) -> Value {
    json!({
        "n": n,
        "dim": dim,
        "grid": entries.chunks(n).map(hermitian_list).collect::<Vec<_>>(),
    })
}

pub fn dnt_value(d: &Dnt) -> Value {
    grid_value(d.n(), d.dim(), d.entries())
}

/// Mother of a trivial pair as a row-major grid, readable by [`parse_trivial_mother`].
pub fn trivial_mother_value(m: &MotherMeasurement) -> Value {
    let el = m.mother.elements();
    let n = m.map.num_outcomes();
    grid_value(n, m.mother.dim(), el)
}

pub fn permutation_decomposition_value(p: &PermutationDecomposition) -> Value {
    json!({ "n": p.n(), "coefficients": hermitian_list(p.coefficients().elements()) })
}

pub fn affine_decomposition_value(a: &AffineDecomposition) -> Value {
    json!({
        "n": a.n,
        "coefficients": hermitian_list(&a.coefficients),
        "residual": a.residual,
        "psd_flags": a.psd_flags,
    })
}

fn tuple_key(t: &[usize]) -> String {
    t.iter().map(|b| (b + 1).to_string()).collect::<Vec<_>>().join("-")
}

pub fn pseudo_mother_value(p: &PseudoMother) -> Value {
    let mut elements = Map::new();
    let mut report = Map::new();
    for (idx, (e, r)) in p.elements.iter().zip(&p.report).enumerate() {
        let key = tuple_key(&p.tuple(idx));
        elements.insert(key.clone(), matrix_value(e));
        report.insert(
            key,
            json!({
                "hermitian": r.hermitian,
                "hermitian_defect": r.hermitian_defect,
                "psd": r.psd,
                "min_eigenvalue": r.min_eigenvalue,
            }),
        );
    }
    json!({
        "order": p.order.iter().map(|o| o + 1).collect::<Vec<_>>(),
        "elements": elements,
        "report": report,
        "normalization_defect": p.normalization_defect(),
        "all_psd": p.all_psd(),
    })
}

pub fn residuals_value(r: &Residuals) -> Value {
    json!({ "primal_eq": r.primal_eq, "dual_eq": r.dual_eq, "gap": r.gap })
}

pub fn jm_instance_value(j: &JmInstance) -> Value {
    json!({ "povms": j.povms().iter().map(povm_value).collect::<Vec<_>>() })
}

pub fn jm_verdict_value(v: &JmVerdict) -> Value {
    json!({
        "compatible": v.compatible,
        "eta": v.robustness,
        "mother": v.mother.as_ref().map_or(Value::Null, mother_value),
        "solver_residuals": residuals_value(&v.solver_residuals),
    })
}

pub fn decomposition_verdict_value(v: &DecompositionVerdict) -> Value {
    json!({
        "decomposable": v.decomposable,
        "eta": v.eta,
        "decomposition": v
            .decomposition
            .as_ref()
            .map_or(Value::Null, permutation_decomposition_value),
        "solver_residuals": residuals_value(&v.solver_residuals),
    })
}

pub fn povm_extremality_value(r: &ExtremalityReport) -> Value {
    json!({ "extremal": r.extremal, "kernel_dimension": r.kernel_dimension })
}

pub fn dnt_extremality_value(r: &DntExtremality) -> Value {
    json!({
        "extremal": r.extremal,
        "kernel_dimension": r.kernel_dimension,
        "rows_columns_extremal": r.rows_columns_extremal,
    })
}

fn block_kind_str(k: BlockKind) -> &'static str {
    match k {
        BlockKind::Real => "real",
        BlockKind::Complex => "complex",
    }
}

fn terms_value(terms: &[(usize, HermitianMatrix)]) -> Value {
    Value::Array(
        terms
            .iter()
            .map(|(b, m)| json!({ "block": b, "matrix": hermitian_value(m) }))
            .collect(),
    )
}

/// Debug dump of a problem; not a stability promise.
pub fn sdp_problem_value(p: &SdpProblem) -> Value {
    json!({
        "blocks": p.blocks.iter().map(|b| json!({ "dim": b.dim, "kind": block_kind_str(b.kind) })).collect::<Vec<_>>(),
        "objective": terms_value(&p.objective),
        "constraints": p.constraints.iter().map(|c| json!({ "terms": terms_value(&c.terms), "rhs": c.rhs })).collect::<Vec<_>>(),
    })
}

/// Debug dump of a solution; not a stability promise.
pub fn sdp_solution_value(s: &SdpSolution) -> Value {
    json!({
        "status": s.status.as_str(),
        "primal_objective": s.primal_objective,
        "dual_objective": s.dual_objective,
        "primal_blocks": hermitian_list(&s.primal_blocks),
        "dual_vector": s.dual_vector,
        "residuals": residuals_value(&s.residuals),
        "iterations": s.iterations,
    })
}

// ---------------------------------------------------------------- output

/// Compact JSON with every float as `{:.16e}` (17 significant digits).
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes a document on one line followed by a newline.
pub fn to_json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    serde::Serialize::serialize(value, &mut ser).expect("serializing a Value cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Keys of a JSON object; maps are ordered, so this is sorted.
pub fn sorted_keys(value: &Value) -> Vec<String> {
    value
        .as_object()
        .map(|o| o.keys().cloned().collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnt::{build_trine_dnt, pseudo_mother, rows};
    use crate::hermat::pauli_y;
    use crate::povm::random_povm;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = pauli_y().axpby(0.1, &HermitianMatrix::identity(2), 1.0 / 3.0);
        let text = to_json_string(&matrix_value(m.matrix()));
        assert_eq!(&parse_matrix(&text).unwrap(), m.matrix());
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let text = to_json_string(&json!({ "x": 0.1, "n": 3 }));
        assert_eq!(text, "{\"n\":3,\"x\":1.0000000000000001e-1}\n");
    }

    #[test]
    fn povm_and_dnt_round_trip() {
        let p = random_povm(3, 2, 4).unwrap();
        assert_eq!(parse_povm(&to_json_string(&povm_value(&p))).unwrap(), p);
        let t = build_trine_dnt();
        assert_eq!(parse_dnt(&to_json_string(&dnt_value(&t))).unwrap(), t);
    }

    #[test]
    fn errors_name_path_and_field() {
        let e = parse_dnt(r#"{"n": 1, "dim": 1, "grid": [[{"rows": 1, "cols": 1, "data": [[1, "x"]]}]]}"#).unwrap_err();
        assert!(e.path().starts_with("grid[0][0].data"), "{e}");

        let e = parse_dnt(r#"{"n": 2, "dim": 1, "grid": [[{"rows": 1, "cols": 1, "data": [[1, 0]]}]]}"#).unwrap_err();
        assert_eq!(e.path(), "grid");

        let bad_entry = r#"{"n": 1, "dim": 1, "grid": [[{"rows": 1, "cols": 1, "data": [[-1, 0]]}]]}"#;
        assert_eq!(parse_dnt(bad_entry).unwrap_err().path(), "grid[0][0]");

        let e = parse_povm(r#"{"dim": 1, "elements": [{"rows": 1, "cols": 1, "data": [[1, 0]], "extra": 1}]}"#).unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");

        let e = parse_povm(r#"{"dim": 2, "elements": [{"rows": 2, "cols": 2, "data": [[1, 0]]}]}"#).unwrap_err();
        assert_eq!(e.path(), "elements[0].data");
    }

    #[test]
    fn doubly_stochastic_and_map_parsers() {
        let d = parse_doubly_stochastic(r#"{"n": 2, "data": [[0.7, 0.3], [0.3, 0.7]]}"#).unwrap();
        assert_eq!(d.get(0, 1), 0.3);
        let e = parse_doubly_stochastic(r#"{"n": 2, "data": [[0.7, 0.4], [0.3, 0.7]]}"#).unwrap_err();
        assert_eq!(e.path(), "data[0]");
        let m = parse_post_processing_map(r#"{"m": 1, "n": 2, "K": 1, "probs": [[[0.5], [0.5]]]}"#).unwrap();
        assert_eq!(m.get(0, 1, 0), 0.5);
        assert_eq!(parse_post_processing_map(&to_json_string(&map_value(&m))).unwrap(), m);
    }

    #[test]
    fn pseudo_mother_keys_are_one_based() {
        let pm = pseudo_mother(&rows(&build_trine_dnt()), None).unwrap();
        let v = pseudo_mother_value(&pm);
        let keys = sorted_keys(&v["elements"]);
        assert_eq!(keys.len(), 27);
        assert_eq!(keys[0], "1-1-1");
        assert_eq!(keys[26], "3-3-3");
        assert_eq!(v["order"], json!([1, 2, 3]));
    }

    #[test]
    fn sdp_problem_round_trip() {
        let mut p = SdpProblem::new(vec![BlockSpec::complex(2), BlockSpec::real(1)]);
        p.objective.push((1, HermitianMatrix::identity(1)));
        p.add_constraint(
            vec![(0, HermitianMatrix::identity(2)), (1, HermitianMatrix::identity(1))],
            1.0,
        );
        let back = parse_sdp_problem(&to_json_string(&sdp_problem_value(&p))).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn trivial_mother_accepts_both_shapes() {
        let grid = r#"{"n": 2, "dim": 1, "grid": [[{"rows":1,"cols":1,"data":[[0.25,0]]},{"rows":1,"cols":1,"data":[[0.25,0]]}],[{"rows":1,"cols":1,"data":[[0.25,0]]},{"rows":1,"cols":1,"data":[[0.25,0]]}]]}"#;
        assert_eq!(parse_trivial_mother(grid).unwrap().len(), 4);
        let povm = r#"{"dim": 1, "elements": [{"rows":1,"cols":1,"data":[[0.5,0]]},{"rows":1,"cols":1,"data":[[0.5,0]]}]}"#;
        assert_eq!(parse_trivial_mother(povm).unwrap().len(), 2);
    }
}
