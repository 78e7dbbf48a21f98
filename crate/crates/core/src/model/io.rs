//! JSON file formats.
//!
//! Matrices are row-major arrays of arrays. Writers emit every float with 17
//! significant digits so a load after a save reproduces the bits exactly,
//! except that negative zero comes back as positive zero.
//!
//! ```text
//! system        {"a": [[..]], "b": [[..]]}
//! gain          {"l": [[..]]}
//! state space   {"a": .., "b": .., "c": .., "d": ..}
//! weights       {"q": .., "r": ..}
//! blocks        {"blocks": [{"a": .., "b": ..}, ..]}
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{validate_system, CostWeights, GainMatrix, LtiSystem, StateSpace, Tolerances};
use crate::error::{Error, Result};

type Rows = Vec<Vec<f64>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    a: Rows,
    b: Rows,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GainFile {
    l: Rows,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateSpaceFile {
    a: Rows,
    b: Rows,
    c: Rows,
    d: Rows,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    q: Rows,
    r: Rows,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlocksFile {
    blocks: Vec<SystemFile>,
}

/// Format a float with 17 significant digits (always round-trips). Negative
/// zero is written as `0`.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v + 0.0)
}

pub(crate) fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    if text.trim().is_empty() {
        return Err(Error::Parse {
            message: "empty input".into(),
            line: Some(1),
            field: None,
        });
    }
    serde_json::from_str(text).map_err(|e| Error::Parse {
        message: e.to_string(),
        line: Some(e.line()),
        field: None,
    })
}

pub(crate) fn rows_to_matrix(field: &str, rows: &Rows) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::parse_field(
                field,
                format!("row {i} has {} entries, row 0 has {ncols}", r.len()),
            ));
        }
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>, indent: &str) {
    let _ = write!(out, "{indent}\"{name}\": [");
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
        let sep = if i + 1 < m.nrows() { "," } else { "" };
        let _ = write!(out, "\n{indent}  [{}]{sep}", row.join(", "));
    }
    if m.nrows() > 0 {
        let _ = write!(out, "\n{indent}");
    }
    out.push(']');
}

/// Render named matrices as one JSON object.
pub fn matrices_to_json(fields: &[(&str, &DMatrix<f64>)]) -> String {
    let mut out = String::from("{\n");
    for (k, (name, m)) in fields.iter().enumerate() {
        write_matrix(&mut out, name, m, "  ");
        out.push_str(if k + 1 < fields.len() { ",\n" } else { "\n" });
    }
    out.push_str("}\n");
    out
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn parse_system(text: &str, sym_tol: f64, stab_margin: f64) -> Result<LtiSystem> {
    let f: SystemFile = parse_json(text)?;
    let a = rows_to_matrix("a", &f.a)?;
    let b = rows_to_matrix("b", &f.b)?;
    // an n x 0 input matrix serializes as n empty rows
    let b = if f.b.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        b
    };
    validate_system(a, b, sym_tol, stab_margin)
}

pub fn load_system(path: impl AsRef<Path>) -> Result<LtiSystem> {
    let t = Tolerances::default();
    load_system_with(path, t.sym_tol, t.stab_margin)
}

pub fn load_system_with(
    path: impl AsRef<Path>,
    sym_tol: f64,
    stab_margin: f64,
) -> Result<LtiSystem> {
    parse_system(&read(path.as_ref())?, sym_tol, stab_margin)
}

pub fn system_to_json(sys: &LtiSystem) -> String {
    matrices_to_json(&[("a", sys.a()), ("b", sys.b())])
}

pub fn save_system(path: impl AsRef<Path>, sys: &LtiSystem) -> Result<()> {
    write(path.as_ref(), &system_to_json(sys))
}

pub fn parse_gain(text: &str) -> Result<GainMatrix> {
    let f: GainFile = parse_json(text)?;
    Ok(GainMatrix::new(rows_to_matrix("l", &f.l)?))
}

pub fn load_gain(path: impl AsRef<Path>) -> Result<GainMatrix> {
    parse_gain(&read(path.as_ref())?)
}

pub fn gain_to_json(g: &GainMatrix) -> String {
    matrices_to_json(&[("l", &g.l)])
}

pub fn save_gain(path: impl AsRef<Path>, g: &GainMatrix) -> Result<()> {
    write(path.as_ref(), &gain_to_json(g))
}

pub fn parse_state_space(text: &str) -> Result<StateSpace> {
    let f: StateSpaceFile = parse_json(text)?;
    StateSpace::new(
        rows_to_matrix("a", &f.a)?,
        rows_to_matrix("b", &f.b)?,
        rows_to_matrix("c", &f.c)?,
        rows_to_matrix("d", &f.d)?,
    )
}

pub fn load_state_space(path: impl AsRef<Path>) -> Result<StateSpace> {
    parse_state_space(&read(path.as_ref())?)
}

pub fn state_space_to_json(ss: &StateSpace) -> String {
    matrices_to_json(&[("a", &ss.a), ("b", &ss.b), ("c", &ss.c), ("d", &ss.d)])
}

pub fn save_state_space(path: impl AsRef<Path>, ss: &StateSpace) -> Result<()> {
    write(path.as_ref(), &state_space_to_json(ss))
}

pub fn parse_weights(text: &str, pd_tol: f64) -> Result<CostWeights> {
    let f: WeightsFile = parse_json(text)?;
    CostWeights::new(
        rows_to_matrix("q", &f.q)?,
        rows_to_matrix("r", &f.r)?,
        pd_tol,
    )
}

pub fn load_weights(path: impl AsRef<Path>, pd_tol: f64) -> Result<CostWeights> {
    parse_weights(&read(path.as_ref())?, pd_tol)
}

/// Raw `(a_i, b_i)` pairs of a blocks file, unvalidated.
pub fn parse_blocks(text: &str) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    let f: BlocksFile = parse_json(text)?;
    f.blocks
        .iter()
        .enumerate()
        .map(|(i, blk)| {
            Ok((
                rows_to_matrix(&format!("blocks[{i}].a"), &blk.a)?,
                rows_to_matrix(&format!("blocks[{i}].b"), &blk.b)?,
            ))
        })
        .collect()
}

pub fn load_blocks(path: impl AsRef<Path>) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    parse_blocks(&read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    #[test]
    fn system_file_round_trip() {
        let sys = fixtures::buffer_network();
        let text = system_to_json(&sys);
        let back = parse_system(&text, 1e-9, 1e-9).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(
            parse_system("", 1e-9, 1e-9),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse_gain("  \n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn non_square_a_is_dimension_mismatch() {
        let text = r#"{"a": [[-1, 0]], "b": [[1]]}"#;
        assert!(matches!(
            parse_system(text, 1e-9, 1e-9),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ragged_rows_name_the_field() {
        let text = "{\"a\": [[-1, 0], [0]],\n \"b\": [[1], [1]]}";
        match parse_system(text, 1e-9, 1e-9) {
            Err(Error::Parse { field, .. }) => assert_eq!(field.as_deref(), Some("a")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "{\n\"a\": [[-1]],\n\"b\": [[1]\n}";
        match parse_system(text, 1e-9, 1e-9) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, Some(4)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_f64(-0.5), "-5.0000000000000000e-1");
    }
}
