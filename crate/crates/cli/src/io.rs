//! Input documents: parsing with field-precise errors, and canonical output.
//!
//! A document is a JSON object with a `schema` tag and exactly one payload:
//!
//! ```json
//! { "schema": "ftn/1",
//!   "tuple": { "items": [[[[1, 0]]]], "unit_index": 0 },
//!   "config": { "seed": 3, "restarts": 16 } }
//! ```
//!
//! Complex scalars are `[re, im]` pairs and matrices are row-major nested
//! arrays of them. `element` (`{"terms": [[c, d], ...]}`) and `extension`
//! (`{"unitaries": [...], "include_unit": true, "images": [...]}`) are the
//! other payloads.

use std::fmt;

use ftn_core::dilation::{SpanSpec, UnitalMapSpec};
use ftn_core::norms::{HTensorElement, OperatorTuple};
use ftn_core::{CMatrix, C64};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "ftn/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    /// Not valid JSON.
    Parse,
    /// A matrix entry is not a finite `[re, im]` pair.
    Complex,
    /// Ragged rows, non-square or mismatched matrices.
    Dim,
    /// Unknown schema tag, unknown field or wrong payload.
    Schema,
    /// Index out of range.
    Index,
    /// Required field absent.
    Missing,
    /// Well-formed data that violates a mathematical precondition.
    Value,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Parse => "E_PARSE",
            ErrorCode::Complex => "E_COMPLEX",
            ErrorCode::Dim => "E_DIM",
            ErrorCode::Schema => "E_SCHEMA",
            ErrorCode::Index => "E_INDEX",
            ErrorCode::Missing => "E_MISSING",
            ErrorCode::Value => "E_VALUE",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{code} at {location}: {message}")]
pub struct InputError {
    pub code: ErrorCode,
    /// JSON pointer to the offending field, or `line L column C` for syntax errors.
    pub location: String,
    pub message: String,
}

fn err<T>(code: ErrorCode, location: &str, message: impl Into<String>) -> Result<T, InputError> {
    Err(InputError { code, location: if location.is_empty() { "/".into() } else { location.into() }, message: message.into() })
}

/// Optional per-document settings; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Tuple(OperatorTuple),
    Element(HTensorElement),
    Extension { span: SpanSpec, map: UnitalMapSpec },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Tuple(_) => "tuple",
            Payload::Element(_) => "element",
            Payload::Extension { .. } => "extension",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputDocument {
    pub schema: String,
    pub payload: Payload,
    pub config: ConfigOverrides,
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, InputError> {
    match obj.get(key) {
        Some(v) => Ok(v),
        None => err(ErrorCode::Missing, path, format!("missing field `{key}`")),
    }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, InputError> {
    v.as_object().map_or_else(|| err(ErrorCode::Schema, path, "expected an object"), Ok)
}

fn array<'a>(v: &'a Value, path: &str, what: &str) -> Result<&'a Vec<Value>, InputError> {
    v.as_array().map_or_else(|| err(ErrorCode::Dim, path, format!("expected an array of {what}")), Ok)
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<(), InputError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return err(ErrorCode::Schema, &format!("{path}/{key}"), format!("unknown field `{key}`"));
        }
    }
    Ok(())
}

fn complex(v: &Value, path: &str) -> Result<C64, InputError> {
    let pair = match v.as_array() {
        Some(p) if p.len() == 2 => p,
        _ => return err(ErrorCode::Complex, path, format!("expected a [re, im] pair, found {v}")),
    };
    let part = |x: &Value| x.as_f64().filter(|f| f.is_finite());
    match (part(&pair[0]), part(&pair[1])) {
        (Some(re), Some(im)) => Ok(C64::new(re, im)),
        _ => err(ErrorCode::Complex, path, format!("entries of a complex pair must be finite numbers, found {v}")),
    }
}

/// Row-major nested array of `[re, im]` pairs.
pub fn parse_matrix(v: &Value, path: &str) -> Result<CMatrix, InputError> {
    let rows = array(v, path, "rows")?;
    if rows.is_empty() {
        return err(ErrorCode::Dim, path, "matrix has no rows");
    }
    let mut cols = None;
    let mut data = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let rpath = format!("{path}/{r}");
        let entries = array(row, &rpath, "[re, im] pairs")?;
        if *cols.get_or_insert(entries.len()) != entries.len() {
            return err(ErrorCode::Dim, &rpath, format!("row has {} entries, expected {}", entries.len(), cols.unwrap()));
        }
        for (c, e) in entries.iter().enumerate() {
            data.push(complex(e, &format!("{rpath}/{c}"))?);
        }
    }
    let cols = cols.unwrap_or(0);
    if cols == 0 {
        return err(ErrorCode::Dim, path, "matrix has no columns");
    }
    CMatrix::new(rows.len(), cols, data).map_err(|e| InputError { code: ErrorCode::Dim, location: path.into(), message: e.to_string() })
}

fn square_family(v: &Value, path: &str) -> Result<Vec<CMatrix>, InputError> {
    let list = array(v, path, "matrices")?;
    if list.is_empty() {
        return err(ErrorCode::Dim, path, "list is empty");
    }
    let mut out: Vec<CMatrix> = Vec::with_capacity(list.len());
    for (i, m) in list.iter().enumerate() {
        let p = format!("{path}/{i}");
        let x = parse_matrix(m, &p)?;
        if !x.is_square() {
            return err(ErrorCode::Dim, &p, format!("matrix is {}×{}, expected square", x.rows(), x.cols()));
        }
        if let Some(first) = out.first() {
            if first.shape() != x.shape() {
                return err(ErrorCode::Dim, &p, format!("matrix is {}×{} but the first is {}×{}", x.rows(), x.cols(), first.rows(), first.cols()));
            }
        }
        out.push(x);
    }
    Ok(out)
}

fn value_error(path: &str, e: ftn_core::Error) -> InputError {
    let code = match e {
        ftn_core::Error::Dimension(_) => ErrorCode::Dim,
        _ => ErrorCode::Value,
    };
    InputError { code, location: path.into(), message: e.to_string() }
}

fn parse_tuple(v: &Value, path: &str) -> Result<OperatorTuple, InputError> {
    let obj = object(v, path)?;
    reject_unknown(obj, &["items", "unit_index"], path)?;
    let items = square_family(field(obj, "items", path)?, &format!("{path}/items"))?;
    let unit_index = match obj.get("unit_index") {
        None | Some(Value::Null) => None,
        Some(u) => {
            let upath = format!("{path}/unit_index");
            match u.as_u64() {
                Some(i) if (i as usize) < items.len() => Some(i as usize),
                Some(i) => return err(ErrorCode::Index, &upath, format!("unit_index {i} out of range for {} items", items.len())),
                None => return err(ErrorCode::Index, &upath, format!("unit_index must be a non-negative integer, found {u}")),
            }
        }
    };
    OperatorTuple::new(items, unit_index).map_err(|e| value_error(path, e))
}

fn parse_element(v: &Value, path: &str) -> Result<HTensorElement, InputError> {
    let obj = object(v, path)?;
    reject_unknown(obj, &["terms"], path)?;
    let tpath = format!("{path}/terms");
    let terms = array(field(obj, "terms", path)?, &tpath, "[c, d] pairs")?;
    if terms.is_empty() {
        return err(ErrorCode::Dim, &tpath, "element has no terms");
    }
    let mut out = Vec::with_capacity(terms.len());
    for (l, t) in terms.iter().enumerate() {
        let p = format!("{tpath}/{l}");
        let pair = match t.as_array() {
            Some(pair) if pair.len() == 2 => pair,
            _ => return err(ErrorCode::Dim, &p, "expected a [c, d] pair of matrices"),
        };
        out.push((parse_matrix(&pair[0], &format!("{p}/0"))?, parse_matrix(&pair[1], &format!("{p}/1"))?));
    }
    HTensorElement::new(out).map_err(|e| value_error(&tpath, e))
}

fn parse_extension(v: &Value, path: &str) -> Result<(SpanSpec, UnitalMapSpec), InputError> {
    let obj = object(v, path)?;
    reject_unknown(obj, &["unitaries", "include_unit", "images"], path)?;
    let unitaries = square_family(field(obj, "unitaries", path)?, &format!("{path}/unitaries"))?;
    let images = square_family(field(obj, "images", path)?, &format!("{path}/images"))?;
    if images.len() != unitaries.len() {
        return err(ErrorCode::Dim, &format!("{path}/images"), format!("{} images for {} unitaries", images.len(), unitaries.len()));
    }
    let include_unit = match obj.get("include_unit") {
        None => true,
        Some(Value::Bool(b)) => *b,
        Some(other) => return err(ErrorCode::Schema, &format!("{path}/include_unit"), format!("expected a boolean, found {other}")),
    };
    let span = SpanSpec::new(unitaries, include_unit).map_err(|e| value_error(&format!("{path}/unitaries"), e))?;
    let map = UnitalMapSpec::new(images).map_err(|e| value_error(&format!("{path}/images"), e))?;
    Ok((span, map))
}

/// Parses and validates a document.
pub fn parse_input(text: &str) -> Result<InputDocument, InputError> {
    let root: Value = serde_json::from_str(text).map_err(|e| InputError {
        code: ErrorCode::Parse,
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = object(&root, "")?;
    let schema = match field(obj, "schema", "")? {
        Value::String(s) if s == SCHEMA => s.clone(),
        other => return err(ErrorCode::Schema, "/schema", format!("unsupported schema {other}, expected \"{SCHEMA}\"")),
    };
    reject_unknown(obj, &["schema", "tuple", "element", "extension", "config"], "")?;
    let present: Vec<&str> = ["tuple", "element", "extension"].into_iter().filter(|k| obj.contains_key(*k)).collect();
    let payload = match present.as_slice() {
        ["tuple"] => Payload::Tuple(parse_tuple(&obj["tuple"], "/tuple")?),
        ["element"] => Payload::Element(parse_element(&obj["element"], "/element")?),
        ["extension"] => {
            let (span, map) = parse_extension(&obj["extension"], "/extension")?;
            Payload::Extension { span, map }
        }
        [] => return err(ErrorCode::Missing, "", "document needs one of `tuple`, `element`, `extension`"),
        _ => return err(ErrorCode::Schema, "", format!("document has several payloads: {}", present.join(", "))),
    };
    let config = match obj.get("config") {
        None => ConfigOverrides::default(),
        Some(c) => serde_json::from_value(c.clone())
            .map_err(|e| InputError { code: ErrorCode::Schema, location: "/config".into(), message: e.to_string() })?,
    };
    Ok(InputDocument { schema, payload, config })
}

fn matrix_value(m: &CMatrix) -> Value {
    serde_json::to_value(m).expect("matrices serialize")
}

fn family_value(ms: &[CMatrix]) -> Value {
    Value::Array(ms.iter().map(matrix_value).collect())
}

/// Canonical JSON text of a document.
pub fn serialize_input(doc: &InputDocument) -> String {
    let mut root = Map::new();
    root.insert("schema".into(), json!(doc.schema));
    let payload = match &doc.payload {
        Payload::Tuple(t) => {
            let mut p = Map::new();
            p.insert("items".into(), family_value(t.items()));
            if let Some(u) = t.unit_index() {
                p.insert("unit_index".into(), json!(u));
            }
            Value::Object(p)
        }
        Payload::Element(x) => json!({
            "terms": x.terms().iter().map(|(c, d)| json!([matrix_value(c), matrix_value(d)])).collect::<Vec<_>>()
        }),
        Payload::Extension { span, map } => json!({
            "unitaries": family_value(span.unitaries()),
            "include_unit": span.include_unit(),
            "images": family_value(map.images()),
        }),
    };
    root.insert(doc.payload.kind().into(), payload);
    if doc.config != ConfigOverrides::default() {
        root.insert("config".into(), serde_json::to_value(&doc.config).expect("config serializes"));
    }
    serde_json::to_string(&Value::Object(root)).expect("documents serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_identity() {
        let doc = parse_input(r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0]]]]}}"#).unwrap();
        match doc.payload {
            Payload::Tuple(t) => {
                assert_eq!((t.k(), t.len()), (1, 1));
                assert_eq!(t.unit_index(), None);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_codes() {
        let code = |s: &str| parse_input(s).unwrap_err().code;
        assert_eq!(code("{"), ErrorCode::Parse);
        assert_eq!(code(r#"{"schema":"ftn/2","tuple":{"items":[]}}"#), ErrorCode::Schema);
        assert_eq!(code(r#"{"tuple":{"items":[]}}"#), ErrorCode::Missing);
        assert_eq!(code(r#"{"schema":"ftn/1"}"#), ErrorCode::Missing);
        assert_eq!(code(r#"{"schema":"ftn/1","tuple":{"items":[[[[1]]]]}}"#), ErrorCode::Complex);
        assert_eq!(code(r#"{"schema":"ftn/1","tuple":{"items":[[[[1,"a"]]]]}}"#), ErrorCode::Complex);
        assert_eq!(code(r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0],[0,0]]]]}}"#), ErrorCode::Dim);
        assert_eq!(code(r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0]]]],"unit_index":1}}"#), ErrorCode::Index);
        assert_eq!(code(r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0]]]],"extra":1}}"#), ErrorCode::Schema);
    }

    #[test]
    fn locations_point_at_the_field() {
        let e = parse_input(r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0]]],[[[1,0],[2]]]]}}"#).unwrap_err();
        assert_eq!(e.location, "/tuple/items/1/0/1");
        let e = parse_input("{\n  \"schema\": \"ftn/1\",\n  oops\n}").unwrap_err();
        assert_eq!(e.location, "line 3 column 3");
    }

    #[test]
    fn round_trip_is_normalizing() {
        let text = r#"{ "config": {"restarts": 4}, "tuple": {"unit_index": 0, "items": [[[[1, 0], [0.5, -1e-3]], [[0, 0], [2, 0]]], [[[0,1],[0,0]],[[0,0],[0,-1]]]]}, "schema": "ftn/1" }"#;
        let doc = parse_input(text).unwrap();
        let canon = serialize_input(&doc);
        assert_eq!(parse_input(&canon).unwrap(), doc);
        assert_eq!(serialize_input(&parse_input(&canon).unwrap()), canon);
    }

    #[test]
    fn extension_and_element_payloads() {
        let doc = parse_input(
            r#"{"schema":"ftn/1","extension":{"unitaries":[[[[1,0],[0,0]],[[0,0],[-1,0]]]],"images":[[[[0,0],[1,0]],[[1,0],[0,0]]]]}}"#,
        )
        .unwrap();
        assert!(matches!(doc.payload, Payload::Extension { .. }));
        let doc2 = parse_input(&serialize_input(&doc)).unwrap();
        assert_eq!(doc, doc2);
        let e = parse_input(r#"{"schema":"ftn/1","extension":{"unitaries":[[[[2,0]]]],"images":[[[[1,0]]]]}}"#).unwrap_err();
        assert_eq!(e.code, ErrorCode::Value);
        let doc = parse_input(r#"{"schema":"ftn/1","element":{"terms":[[[[[1,0]]],[[[0,0],[1,0]],[[1,0],[0,0]]]]]}}"#).unwrap();
        match &doc.payload {
            Payload::Element(x) => assert_eq!((x.k(), x.m()), (1, 2)),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_input(&serialize_input(&doc)).unwrap(), doc);
    }
}
