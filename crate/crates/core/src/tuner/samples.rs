//! Sample input files: one `name = value` or `name = [v, v, ...]` binding
//! per line, samples separated by `---`, `#` comments.

use super::interp::{InputBinding, InputValue};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SampleError {
    pub line: usize,
    pub message: String,
}

fn number(s: &str, line: usize) -> Result<f64, SampleError> {
    let s = s.trim();
    let parsed = match s {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse::<f64>().ok(),
    };
    parsed.ok_or_else(|| SampleError { line, message: format!("bad number `{s}`") })
}

pub fn parse_samples(text: &str) -> Result<Vec<InputBinding>, SampleError> {
    let mut samples = Vec::new();
    let mut cur = InputBinding::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body == "---" {
            if !cur.values.is_empty() {
                samples.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let Some((name, value)) = body.split_once('=') else {
            return Err(SampleError { line, message: "expected `name = value`".into() });
        };
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            return Err(SampleError { line, message: format!("bad name `{name}`") });
        }
        let value = value.trim();
        let parsed = if let Some(inner) = value.strip_prefix('[') {
            let Some(inner) = inner.strip_suffix(']') else {
                return Err(SampleError { line, message: "unterminated array".into() });
            };
            let items = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(|x| number(x, line)).collect::<Result<_, _>>()?
            };
            InputValue::Array(items)
        } else {
            InputValue::Scalar(number(value, line)?)
        };
        if cur.values.insert(name.to_string(), parsed).is_some() {
            return Err(SampleError { line, message: format!("`{name}` bound twice") });
        }
    }
    if !cur.values.is_empty() {
        samples.push(cur);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_samples() {
        let s = parse_samples("a = 1.5\nxs = [1, 2]\n---\n# second\na = -2\nxs = []\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].values["a"], InputValue::Scalar(1.5));
        assert_eq!(s[1].values["xs"], InputValue::Array(vec![]));
    }

    #[test]
    fn errors_carry_lines() {
        let e = parse_samples("a = 1\nb 2\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_samples("a = [1, 2\n").is_err());
        assert!(parse_samples("a = 1\na = 2\n").is_err());
    }
}
