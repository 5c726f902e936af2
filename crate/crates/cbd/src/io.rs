//! Reading and writing system files.
//!
//! A system file is a JSON document in one of two conventions, selected by
//! the optional `convention` key:
//!
//! * `"01"` (the default) lists the system explicitly:
//!
//!   ```json
//!   {
//!     "contents": ["q1", "q2"],
//!     "contexts": [
//!       {"id": "c1", "contents": ["q1", "q2"],
//!        "distribution": {"00": "1/2", "11": "1/2"}}
//!     ]
//!   }
//!   ```
//!
//!   Distribution keys are outcome bitstrings whose k-th character is the
//!   value of the k-th content in the context's list; missing patterns mean
//!   probability zero.  Probabilities may be JSON numbers, decimal strings,
//!   or exact fraction strings such as `"1/3"`; fractions and decimals are
//!   parsed exactly in rational mode.
//!
//! * `"pm1"` describes a cyclic system by its expectations in the +-1
//!   encoding: keys `n`, `correlations` (length n, one per context) and
//!   `marginals` (length 2n, the two single-variable expectations of each
//!   context in order).  The system is built by [`make_cyclic`].
//!
//! Emission writes the `"01"` form with exact fraction strings in rational
//! mode and shortest-round-trip decimals in float mode, so emit-then-parse
//! is the identity on systems.

use std::path::Path;

use num::{BigInt, BigRational, Zero};
use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::cyclic::{make_cyclic, CyclicError, CyclicSpec};
use crate::scalar::Scalar;
use crate::system::{pattern_string, System, SystemError, SystemFormat};

/// Failure to turn a file into a validated [`System`].
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("cannot read system file: {0}")]
    Io(#[from] std::io::Error),
    /// The document is not well-formed JSON; the message carries the line
    /// and column reported by the JSON parser.
    #[error("system file is not valid JSON: {0}")]
    Syntax(String),
    /// The document is well-formed but some key holds the wrong shape or
    /// an unparseable value.
    #[error("invalid system file at {key}: {message}")]
    Value { key: String, message: String },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Cyclic(#[from] CyclicError),
}

fn value_error(key: impl Into<String>, message: impl Into<String>) -> ParseError {
    ParseError::Value { key: key.into(), message: message.into() }
}

/// Parses and validates the system file at `path`.
pub fn parse_system_file<S: Scalar>(path: &Path) -> Result<System<S>, ParseError> {
    parse_system_str(&std::fs::read_to_string(path)?)
}

/// Parses and validates a system file given as a string.
pub fn parse_system_str<S: Scalar>(text: &str) -> Result<System<S>, ParseError> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    let root = as_object(&doc, "$")?;
    let convention = match root.get("convention") {
        None => "01",
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(value_error("convention", "expected a string")),
    };
    match convention {
        "01" => parse_01(root),
        "pm1" => parse_pm1(root),
        other => Err(value_error(
            "convention",
            format!("unknown convention {other:?}; expected \"01\" or \"pm1\""),
        )),
    }
}

fn parse_01<S: Scalar>(root: &Map<String, Value>) -> Result<System<S>, ParseError> {
    reject_unknown_keys(root, "$", &["contents", "contexts", "convention"])?;
    let contents = string_list(required(root, "contents")?, "contents")?;
    let contexts = as_array(required(root, "contexts")?, "contexts")?;

    let mut ids = Vec::with_capacity(contexts.len());
    let mut members: Vec<Vec<String>> = Vec::with_capacity(contexts.len());
    let mut distributions = Vec::with_capacity(contexts.len());
    for (i, ctx) in contexts.iter().enumerate() {
        let key = format!("contexts[{i}]");
        let record = as_object(ctx, &key)?;
        reject_unknown_keys(record, &key, &["id", "contents", "distribution"])?;
        ids.push(as_string(required(record, "id")?, &format!("{key}.id"))?.to_owned());
        members.push(string_list(
            required(record, "contents")?,
            &format!("{key}.contents"),
        )?);
        distributions.push(as_object(
            required(record, "distribution")?,
            &format!("{key}.distribution"),
        )?);
    }

    let content_refs: Vec<&str> = contents.iter().map(String::as_str).collect();
    let context_refs: Vec<(&str, Vec<&str>)> = ids
        .iter()
        .zip(&members)
        .map(|(id, m)| (id.as_str(), m.iter().map(String::as_str).collect()))
        .collect();
    let context_slices: Vec<(&str, &[&str])> =
        context_refs.iter().map(|(id, m)| (*id, m.as_slice())).collect();
    let format = SystemFormat::new(&content_refs, &context_slices)?;

    let mut bunches = Vec::with_capacity(distributions.len());
    for (i, dist) in distributions.iter().enumerate() {
        let n_c = members[i].len();
        let mut pmf = vec![S::zero(); 1usize << n_c];
        for (bits, value) in dist.iter() {
            let key = format!("contexts[{i}].distribution[{bits:?}]");
            if bits.len() != n_c || !bits.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(value_error(
                    key,
                    format!("expected a bitstring of length {n_c} over 0/1"),
                ));
            }
            let pattern = usize::from_str_radix(bits, 2).expect("validated bitstring");
            pmf[pattern] = parse_scalar(value, &key)?;
        }
        bunches.push(pmf);
    }
    Ok(System::new(format, bunches)?)
}

fn parse_pm1<S: Scalar>(root: &Map<String, Value>) -> Result<System<S>, ParseError> {
    reject_unknown_keys(root, "$", &["convention", "n", "correlations", "marginals"])?;
    let n = match required(root, "n")? {
        Value::Number(num) => num
            .as_u64()
            .and_then(|v| usize::try_from(v).ok())
            .ok_or_else(|| value_error("n", "expected a positive integer"))?,
        _ => return Err(value_error("n", "expected a positive integer")),
    };
    let correlations = number_list(required(root, "correlations")?, "correlations")?;
    let flat = number_list(required(root, "marginals")?, "marginals")?;
    if correlations.len() != n {
        return Err(value_error(
            "correlations",
            format!("expected {n} entries, got {}", correlations.len()),
        ));
    }
    if flat.len() != 2 * n {
        return Err(value_error(
            "marginals",
            format!("expected {} entries (two per context), got {}", 2 * n, flat.len()),
        ));
    }
    let marginals: Vec<(S, S)> = flat
        .chunks_exact(2)
        .map(|pair: &[S]| (pair[0].clone(), pair[1].clone()))
        .collect();
    let spec = CyclicSpec::new(correlations, marginals)?;
    Ok(make_cyclic(&spec)?)
}

/// Serializes a system in the `"01"` convention.  Rational-mode values are
/// written as exact fraction strings; float-mode values as decimals.
pub fn emit_system_string<S: Scalar>(system: &System<S>) -> String {
    let doc = if S::EXACT {
        system_document(&system.to_exact(), &|q: &BigRational| {
            Value::String(q.to_string())
        })
    } else {
        system_document(&system.to_f64(), &|x: &f64| {
            Value::Number(Number::from_f64(*x).expect("probabilities are finite"))
        })
    };
    serde_json::to_string_pretty(&doc).expect("document maps have string keys")
}

/// Writes [`emit_system_string`] output to `path` with a trailing newline.
pub fn write_system_file<S: Scalar>(system: &System<S>, path: &Path) -> Result<(), ParseError> {
    Ok(std::fs::write(path, emit_system_string(system) + "\n")?)
}

fn system_document<T: Scalar>(system: &System<T>, render: &dyn Fn(&T) -> Value) -> Value {
    let format = system.format();
    let contents: Vec<Value> = (0..format.n_contents())
        .map(|q| Value::String(format.content_name(q).to_owned()))
        .collect();
    let contexts: Vec<Value> = (0..format.n_contexts())
        .map(|c| {
            let names: Vec<Value> = format
                .contents_of(c)
                .iter()
                .map(|&q| Value::String(format.content_name(q).to_owned()))
                .collect();
            let width = format.contents_of(c).len();
            let mut dist = Map::new();
            for (pattern, mass) in system.bunch(c).iter().enumerate() {
                if !mass.is_zero() {
                    dist.insert(pattern_string(pattern, width), render(mass));
                }
            }
            let mut record = Map::new();
            record.insert("id".into(), Value::String(format.context_id(c).to_owned()));
            record.insert("contents".into(), Value::Array(names));
            record.insert("distribution".into(), Value::Object(dist));
            Value::Object(record)
        })
        .collect();
    let mut root = Map::new();
    root.insert("contents".into(), Value::Array(contents));
    root.insert("contexts".into(), Value::Array(contexts));
    Value::Object(root)
}

fn required<'a>(map: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ParseError> {
    map.get(key).ok_or_else(|| value_error(key, "missing required key"))
}

fn reject_unknown_keys(
    map: &Map<String, Value>,
    at: &str,
    allowed: &[&str],
) -> Result<(), ParseError> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(value_error(
                format!("{at}.{key}"),
                format!("unknown key; expected one of {allowed:?}"),
            ));
        }
    }
    Ok(())
}

fn as_object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| value_error(key, "expected an object"))
}

fn as_array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>, ParseError> {
    v.as_array().ok_or_else(|| value_error(key, "expected an array"))
}

fn as_string<'a>(v: &'a Value, key: &str) -> Result<&'a str, ParseError> {
    v.as_str().ok_or_else(|| value_error(key, "expected a string"))
}

fn string_list(v: &Value, key: &str) -> Result<Vec<String>, ParseError> {
    as_array(v, key)?
        .iter()
        .enumerate()
        .map(|(i, item)| Ok(as_string(item, &format!("{key}[{i}]"))?.to_owned()))
        .collect()
}

fn number_list<S: Scalar>(v: &Value, key: &str) -> Result<Vec<S>, ParseError> {
    as_array(v, key)?
        .iter()
        .enumerate()
        .map(|(i, item)| parse_scalar(item, &format!("{key}[{i}]")))
        .collect()
}

/// Accepts a JSON number, a decimal string, or a fraction string `"a/b"`;
/// parses exactly (the JSON parser keeps number literals verbatim).
fn parse_scalar<S: Scalar>(v: &Value, key: &str) -> Result<S, ParseError> {
    let literal = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(value_error(key, "expected a number or a numeric string")),
    };
    match parse_number_literal(&literal) {
        Some(q) => Ok(S::from_exact(&q)),
        None => Err(value_error(
            key,
            format!("cannot parse {literal:?} as a decimal or fraction"),
        )),
    }
}

/// Exact rational value of a decimal (`"0.25"`, `"2.5e-3"`), integer
/// (`"1"`), or fraction (`"-1/3"`) literal; `None` when the text fits no
/// such grammar.
pub fn parse_number_literal(text: &str) -> Option<BigRational> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let numer: BigInt = n.trim().parse().ok()?;
        let denom: BigInt = d.trim().parse().ok()?;
        if denom.is_zero() {
            return None;
        }
        return Some(BigRational::new(numer, denom));
    }
    let (mantissa, exp) = match t.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = match digits.as_str() {
        "" | "+" | "-" => return None,
        d => d.parse().ok()?,
    };
    let scale = i32::try_from(frac_part.len()).ok()?;
    let ten = BigInt::from(10);
    Some(if exp >= scale {
        BigRational::from_integer(numer * ten.pow((exp - scale) as u32))
    } else {
        BigRational::new(numer, ten.pow((scale - exp) as u32))
    })
}
