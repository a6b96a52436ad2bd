//! JSON encoding of matrices, measurements, states, channels and frames.
//!
//! A matrix is an array of rows; each entry is `[re, im]` or a bare real number.
//! Decoding walks a `serde_json::Value` and reports the path of the first offending
//! field.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mppp::InferentialFrame;
use crate::numerics::{ComplexMatrix, Tolerance, C64};
use crate::quantum::{Channel, DensityMatrix, Povm};

/// Parses text, turning syntax errors into schema errors with line and column.
pub fn parse_document(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::schema("$", format!("line {} column {}: {e}", e.line(), e.column())))
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::schema(path, "expected an object"))?;
    obj.get(key)
        .ok_or_else(|| Error::schema(format!("{path}.{key}"), "missing field"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::schema(path, "expected an array"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| Error::schema(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(Error::schema(path, "number is not finite"));
    }
    Ok(x)
}

fn usize_field(v: &Value, key: &str, path: &str) -> Result<usize> {
    let p = format!("{path}.{key}");
    field(v, key, path)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::schema(p, "expected a nonnegative integer"))
}

pub fn complex_to_json(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn complex_from_json(v: &Value, path: &str) -> Result<C64> {
    match v {
        Value::Number(_) => Ok(C64::new(number(v, path)?, 0.0)),
        Value::Array(pair) if pair.len() == 2 => Ok(C64::new(
            number(&pair[0], &format!("{path}[0]"))?,
            number(&pair[1], &format!("{path}[1]"))?,
        )),
        _ => Err(Error::schema(path, "expected [re, im] or a real number")),
    }
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn matrix_from_json(v: &Value, path: &str) -> Result<ComplexMatrix> {
    let rows = array(v, path)?;
    if rows.is_empty() {
        return Err(Error::schema(path, "matrix has no rows"));
    }
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let entries = array(row, &rp)?;
        match ncols {
            None => ncols = Some(entries.len()),
            Some(n) if n != entries.len() => {
                return Err(Error::schema(rp, format!("row has {} entries, expected {n}", entries.len())));
            }
            _ => {}
        }
        for (j, e) in entries.iter().enumerate() {
            data.push(complex_from_json(e, &format!("{rp}[{j}]"))?);
        }
    }
    let ncols = ncols.unwrap_or(0);
    if ncols == 0 {
        return Err(Error::schema(path, "matrix has no columns"));
    }
    Ok(ComplexMatrix::from_row_slice(rows.len(), ncols, &data))
}

pub fn povm_to_json(p: &Povm) -> Value {
    json!({
        "labels": p.labels(),
        "elements": p.elements().iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

pub fn povm_from_json(v: &Value, path: &str) -> Result<Povm> {
    let ep = format!("{path}.elements");
    let elements: Vec<ComplexMatrix> = array(field(v, "elements", path)?, &ep)?
        .iter()
        .enumerate()
        .map(|(i, e)| matrix_from_json(e, &format!("{ep}[{i}]")))
        .collect::<Result<_>>()?;
    let labels = match v.get("labels") {
        None | Some(Value::Null) => (0..elements.len()).map(|i| i.to_string()).collect(),
        Some(l) => {
            let lp = format!("{path}.labels");
            let items = array(l, &lp)?;
            if items.len() != elements.len() {
                return Err(Error::schema(
                    lp,
                    format!("{} labels for {} elements", items.len(), elements.len()),
                ));
            }
            items
                .iter()
                .enumerate()
                .map(|(i, x)| match x {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(Error::schema(format!("{lp}[{i}]"), "expected a string or number")),
                })
                .collect::<Result<_>>()?
        }
    };
    Povm::with_labels(labels, elements, &Tolerance::default())
}

pub fn state_to_json(rho: &DensityMatrix) -> Value {
    json!({ "matrix": matrix_to_json(rho.matrix()) })
}

pub fn state_from_json(v: &Value, path: &str) -> Result<DensityMatrix> {
    let m = matrix_from_json(field(v, "matrix", path)?, &format!("{path}.matrix"))?;
    DensityMatrix::new(m)
}

/// A square matrix wrapped as `{"matrix": ...}`; Hermiticity is left to the consumer.
pub fn operator_from_json(v: &Value, path: &str) -> Result<ComplexMatrix> {
    let m = matrix_from_json(field(v, "matrix", path)?, &format!("{path}.matrix"))?;
    if m.nrows() != m.ncols() {
        return Err(Error::schema(format!("{path}.matrix"), "matrix is not square"));
    }
    Ok(m)
}

pub fn channel_to_json(e: &Channel) -> Value {
    json!({
        "dim_in": e.dim_in(),
        "dim_out": e.dim_out(),
        "kraus": e.kraus().iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

pub fn channel_from_json(v: &Value, path: &str) -> Result<Channel> {
    let din = usize_field(v, "dim_in", path)?;
    let dout = usize_field(v, "dim_out", path)?;
    match (v.get("kraus"), v.get("choi")) {
        (Some(k), None) => {
            let kp = format!("{path}.kraus");
            let ops: Vec<ComplexMatrix> = array(k, &kp)?
                .iter()
                .enumerate()
                .map(|(i, m)| matrix_from_json(m, &format!("{kp}[{i}]")))
                .collect::<Result<_>>()?;
            Channel::from_kraus(din, dout, &ops)
        }
        (None, Some(c)) => Channel::from_choi(din, dout, &matrix_from_json(c, &format!("{path}.choi"))?),
        (Some(_), Some(_)) => Err(Error::schema(path, "give either kraus or choi, not both")),
        (None, None) => Err(Error::schema(format!("{path}.kraus"), "missing field (or choi)")),
    }
}

/// `{"unitaries": [matrix, ...]}`.
pub fn representation_from_json(v: &Value, path: &str) -> Result<Vec<ComplexMatrix>> {
    let up = format!("{path}.unitaries");
    array(field(v, "unitaries", path)?, &up)?
        .iter()
        .enumerate()
        .map(|(i, m)| matrix_from_json(m, &format!("{up}[{i}]")))
        .collect()
}

/// Frame dump: inputs, partition by label, MPPP and the Choi matrix of `Δ`.
pub fn frame_to_json(frame: &InferentialFrame) -> Value {
    json!({
        "povm": povm_to_json(frame.povm()),
        "prior": state_to_json(frame.prior()),
        "partition": frame.partition().labels(frame.povm()),
        "mppp": povm_to_json(frame.mppp()),
        "rdm_choi": matrix_to_json(frame.rdm().choi_matrix()),
    })
}

/// Decoded frame dump.
#[derive(Debug, Clone)]
pub struct FrameDump {
    pub povm: Povm,
    pub prior: DensityMatrix,
    pub partition: Vec<Vec<String>>,
    pub mppp: Povm,
    pub rdm_choi: ComplexMatrix,
}

pub fn frame_dump_from_json(v: &Value, path: &str) -> Result<FrameDump> {
    let pp = format!("{path}.partition");
    let partition = array(field(v, "partition", path)?, &pp)?
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let bp = format!("{pp}[{i}]");
            array(b, &bp)?
                .iter()
                .enumerate()
                .map(|(j, l)| match l {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(Error::schema(format!("{bp}[{j}]"), "expected a label")),
                })
                .collect::<Result<Vec<String>>>()
        })
        .collect::<Result<_>>()?;
    Ok(FrameDump {
        povm: povm_from_json(field(v, "povm", path)?, &format!("{path}.povm"))?,
        prior: state_from_json(field(v, "prior", path)?, &format!("{path}.prior"))?,
        partition,
        mppp: povm_from_json(field(v, "mppp", path)?, &format!("{path}.mppp"))?,
        rdm_choi: matrix_from_json(field(v, "rdm_choi", path)?, &format!("{path}.rdm_choi"))?,
    })
}

/// The `"povm"` and `"prior"` fields of a frame dump or of a bare input pair.
pub fn frame_inputs_from_json(v: &Value, path: &str) -> Result<(Povm, DensityMatrix)> {
    Ok((
        povm_from_json(field(v, "povm", path)?, &format!("{path}.povm"))?,
        state_from_json(field(v, "prior", path)?, &format!("{path}.prior"))?,
    ))
}

/// Accepts either a frame dump or a bare `{"povm", "prior"}` pair and rebuilds the frame.
pub fn frame_from_json(v: &Value, path: &str) -> Result<InferentialFrame> {
    let (povm, prior) = frame_inputs_from_json(v, path)?;
    crate::mppp::compute_mppp(&povm, &prior)
}

/// Pretty-printed text; object keys come out sorted, so output is byte-stable.
pub fn to_pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mppp::compute_mppp;
    use crate::numerics::diag;
    use crate::random::{random_channel, random_density_matrix, random_frame_inputs, random_frame_kind, seeded};
    use crate::ErrorKind;

    fn schema_path(e: Error) -> String {
        match e {
            Error::Schema { path, .. } => path,
            other => panic!("not a schema error: {other}"),
        }
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let mut rng = seeded(41);
        let m = random_density_matrix(3, &mut rng).into_matrix();
        let text = to_pretty(&matrix_to_json(&m));
        let back = matrix_from_json(&parse_document(&text).unwrap(), "$").unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn real_entries_are_accepted() {
        let v = parse_document("[[1, 0], [0, [2.5, -1]]]").unwrap();
        let m = matrix_from_json(&v, "$").unwrap();
        assert_eq!(m[(1, 1)], C64::new(2.5, -1.0));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let e = parse_document("{\"matrix\": [[1, 0], [0").unwrap_err();
        assert_eq!(e.kind(), ErrorKind::Schema);
        assert!(e.to_string().contains("line 1"));

        let v = parse_document(r#"{"matrix": [[1, 0], [0, "x"]]}"#).unwrap();
        assert_eq!(schema_path(state_from_json(&v, "$").unwrap_err()), "$.matrix[1][1]");

        let v = parse_document(r#"{"matrix": [[1, 0], [0]]}"#).unwrap();
        assert_eq!(schema_path(state_from_json(&v, "$").unwrap_err()), "$.matrix[1]");

        let v = parse_document(r#"{"labels": ["a"], "elements": [[[1]], [[0]]]}"#).unwrap();
        assert_eq!(schema_path(povm_from_json(&v, "$").unwrap_err()), "$.labels");

        let v = parse_document(r#"{"dim_in": 2}"#).unwrap();
        assert_eq!(schema_path(channel_from_json(&v, "$").unwrap_err()), "$.dim_out");
    }

    #[test]
    fn invalid_content_is_a_precondition_error() {
        let v = parse_document(r#"{"matrix": [[2, 0], [0, -1]]}"#).unwrap();
        assert_eq!(state_from_json(&v, "$").unwrap_err().kind(), ErrorKind::Precondition);
    }

    #[test]
    fn povm_and_channel_round_trip() {
        let mut rng = seeded(42);
        let p = Povm::with_labels(
            vec!["up".into(), "down".into()],
            vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])],
            &Tolerance::default(),
        )
        .unwrap();
        let back = povm_from_json(&parse_document(&to_pretty(&povm_to_json(&p))).unwrap(), "$").unwrap();
        assert_eq!(back.labels(), p.labels());
        assert_eq!(back.elements(), p.elements());

        let e = random_channel(2, 3, 2, &mut rng);
        let back = channel_from_json(&channel_to_json(&e), "$").unwrap();
        assert!(back.distance(&e) < 1e-12);
        let choi = json!({"dim_in": 2, "dim_out": 3, "choi": matrix_to_json(e.choi_matrix())});
        assert!(channel_from_json(&choi, "$").unwrap().distance(&e) < 1e-12);
    }

    #[test]
    fn frame_dump_round_trip() {
        let mut rng = seeded(43);
        for _ in 0..10 {
            let kind = random_frame_kind(&mut rng);
            let (p, g) = random_frame_inputs(3, 4, kind, &mut rng);
            let frame = compute_mppp(&p, &g).unwrap();
            let text = to_pretty(&frame_to_json(&frame));
            let v = parse_document(&text).unwrap();
            let dump = frame_dump_from_json(&v, "$").unwrap();
            assert_eq!(dump.partition, frame.partition().labels(frame.povm()));
            assert!((dump.rdm_choi - frame.rdm().choi_matrix()).norm() < 1e-12);
            assert_eq!(dump.mppp.elements(), frame.mppp().elements());
            let rebuilt = frame_from_json(&v, "$").unwrap();
            assert_eq!(rebuilt.partition(), frame.partition());
            assert!(rebuilt.rdm().distance(frame.rdm()) < 1e-12);
        }
    }
}
