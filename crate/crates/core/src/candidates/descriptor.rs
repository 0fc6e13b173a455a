//! Text descriptors for candidates, as used on the command line.
//!
//! ```text
//! prop1:A=2[,rho=0.5]      clairaut:A=1.5        prop2-singular
//! affine:slope=1,intercept=0                      zero
//! grid:path/to/values.csv  min(clairaut:A=2, affine:slope=1.25,intercept=0)
//! ```

use std::collections::BTreeMap;

use super::{min_combine, CandidateValueFn, GridFn};
use crate::{Error, Result};

fn err(desc: &str, message: impl Into<String>) -> Error {
    Error::Descriptor { desc: desc.to_string(), message: message.into() }
}

fn params<'a>(desc: &str, body: &'a str, allowed: &[&str]) -> Result<BTreeMap<&'a str, f64>> {
    let mut out = BTreeMap::new();
    for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) =
            item.split_once('=').ok_or_else(|| err(desc, format!("expected key=value, got `{item}`")))?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(err(desc, format!("unknown parameter `{key}` (expected one of {})", allowed.join(", "))));
        }
        let value: f64 = value.trim().parse().map_err(|_| err(desc, format!("`{}` is not a number", value.trim())))?;
        if out.insert(key, value).is_some() {
            return Err(err(desc, format!("parameter `{key}` given twice")));
        }
    }
    Ok(out)
}

/// Splits `a, b(c, d), e=1` at top-level commas, gluing bare `key=value`
/// pieces back onto the member they belong to.
fn split_members(body: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, ch) in body.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                pieces.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    pieces.push(&body[start..]);
    let mut members: Vec<String> = Vec::new();
    for p in pieces.into_iter().map(str::trim) {
        let is_param = p.contains('=') && !p.contains(':') && !p.contains('(');
        match members.last_mut() {
            Some(last) if is_param => {
                last.push(',');
                last.push_str(p);
            }
            _ => members.push(p.to_string()),
        }
    }
    members
}

pub fn parse_candidate(desc: &str) -> Result<CandidateValueFn> {
    let d = desc.trim();
    if let Some(inner) = d.strip_prefix("min(") {
        let body = inner.strip_suffix(')').ok_or_else(|| err(desc, "unbalanced parentheses"))?;
        let members = split_members(body).iter().map(|m| parse_candidate(m)).collect::<Result<Vec<_>>>()?;
        if members.len() < 2 {
            return Err(err(desc, "min(...) needs at least two members"));
        }
        return min_combine(members);
    }
    let (kind, body) = d.split_once(':').unwrap_or((d, ""));
    let wrap = |r: Result<CandidateValueFn>| r.map_err(|e| err(desc, e.to_string()));
    match kind.trim() {
        "prop1" => {
            let p = params(desc, body, &["A", "rho"])?;
            let a = *p.get("A").ok_or_else(|| err(desc, "missing A"))?;
            wrap(CandidateValueFn::prop1_family(a, p.get("rho").copied().unwrap_or(1.0)))
        }
        "clairaut" => {
            let p = params(desc, body, &["A"])?;
            wrap(CandidateValueFn::clairaut(*p.get("A").ok_or_else(|| err(desc, "missing A"))?))
        }
        "affine" => {
            let p = params(desc, body, &["slope", "intercept"])?;
            let slope = *p.get("slope").ok_or_else(|| err(desc, "missing slope"))?;
            Ok(CandidateValueFn::affine(slope, p.get("intercept").copied().unwrap_or(0.0)))
        }
        "prop2-singular" if body.is_empty() => Ok(CandidateValueFn::Prop2Singular),
        "zero" if body.is_empty() => Ok(CandidateValueFn::zero()),
        "grid" if !body.is_empty() => {
            let file = std::fs::File::open(body.trim()).map_err(|e| err(desc, format!("{}: {e}", body.trim())))?;
            Ok(CandidateValueFn::Grid(GridFn::read_csv(file)?))
        }
        other => Err(err(desc, format!("unknown candidate `{other}`"))),
    }
}
