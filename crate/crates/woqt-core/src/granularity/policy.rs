//! Tag predicates for choosing which tensors of a bundle to quantize.
//!
//! Tensors carry free-form tags; keyed tags follow a `key:value` convention
//! (`part:ffn1`, `layer:3`). A policy is a conjunction of terms:
//!
//! ```text
//! all
//! part == ffn1
//! layer % 2 == 0 and part == ffn1
//! expert and layer % 2 == 0
//! ```
//!
//! `key == value` matches tensors tagged `key:value`, `key % m == r` parses
//! the numeric tag `key:<n>` and tests `n % m == r`, a bare word matches the
//! literal tag. Terms referencing a tag namespace absent from the whole
//! bundle produce a warning; an empty match is allowed.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tensor::TensorBundle;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Term {
    /// `key == value` (negated for `!=`).
    KeyEquals {
        key: String,
        value: String,
        negated: bool,
    },
    /// `key % modulus == remainder`
    KeyModEquals {
        key: String,
        modulus: u64,
        remainder: u64,
    },
    /// bare tag
    HasTag(String),
}

/// A parsed selection policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectPolicy {
    terms: Vec<Term>, // empty means "all"
    source: String,
}

/// Result of applying a policy to a bundle: matching tensor names in bundle
/// order plus any namespace warnings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub names: Vec<String>,
    pub warnings: Vec<String>,
}

impl SelectPolicy {
    /// Parse a policy expression. `"all"` (or an empty string) selects
    /// everything.
    pub fn parse(expr: &str) -> Result<Self> {
        let trimmed = expr.trim();
        if trimmed.is_empty() || trimmed == "all" {
            return Ok(Self {
                terms: Vec::new(),
                source: "all".into(),
            });
        }
        let mut terms = Vec::new();
        for clause in split_on_and(trimmed) {
            terms.push(parse_term(clause.trim())?);
        }
        Ok(Self {
            terms,
            source: trimmed.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn matches(&self, tags: &BTreeSet<String>) -> bool {
        self.terms.iter().all(|t| match t {
            Term::KeyEquals {
                key,
                value,
                negated,
            } => {
                let hit = tags.contains(&format!("{key}:{value}"));
                hit != *negated
            }
            Term::KeyModEquals {
                key,
                modulus,
                remainder,
            } => tags.iter().any(|tag| {
                tag.strip_prefix(&format!("{key}:"))
                    .and_then(|v| v.parse::<u64>().ok())
                    .is_some_and(|n| n % modulus == *remainder)
            }),
            Term::HasTag(tag) => tags.contains(tag),
        })
    }

    /// Namespaces (tag keys or bare tags) this policy references.
    fn referenced(&self) -> Vec<(String, bool)> {
        self.terms
            .iter()
            .map(|t| match t {
                Term::KeyEquals { key, .. } | Term::KeyModEquals { key, .. } => (key.clone(), true),
                Term::HasTag(tag) => (tag.clone(), false),
            })
            .collect()
    }
}

fn split_on_and(expr: &str) -> Vec<&str> {
    // "and" as a word boundary separator; "&&" also accepted.
    let mut out = Vec::new();
    let mut rest = expr;
    loop {
        let mut split_at = None;
        for (idx, _) in rest.match_indices("and") {
            let before_ok = idx == 0 || rest.as_bytes()[idx - 1].is_ascii_whitespace();
            let after = idx + 3;
            let after_ok = after >= rest.len() || rest.as_bytes()[after].is_ascii_whitespace();
            if before_ok && after_ok && idx > 0 {
                split_at = Some((idx, 3));
                break;
            }
        }
        if split_at.is_none() {
            if let Some(idx) = rest.find("&&") {
                split_at = Some((idx, 2));
            }
        }
        match split_at {
            Some((idx, len)) => {
                out.push(&rest[..idx]);
                rest = &rest[idx + len..];
            }
            None => {
                out.push(rest);
                return out;
            }
        }
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

fn parse_term(clause: &str) -> Result<Term> {
    if clause.is_empty() {
        return Err(Error::InvalidPolicy("empty clause".into()));
    }
    if let Some(pos) = clause.find("!=") {
        let key = clause[..pos].trim();
        let value = clause[pos + 2..].trim();
        if !is_ident(key) || !is_ident(value) {
            return Err(Error::InvalidPolicy(format!("bad term '{clause}'")));
        }
        return Ok(Term::KeyEquals {
            key: key.into(),
            value: value.into(),
            negated: true,
        });
    }
    if let Some(pos) = clause.find("==") {
        let lhs = clause[..pos].trim();
        let rhs = clause[pos + 2..].trim();
        if let Some(mod_pos) = lhs.find('%') {
            let key = lhs[..mod_pos].trim();
            let modulus: u64 = lhs[mod_pos + 1..]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidPolicy(format!("bad modulus in '{clause}'")))?;
            let remainder: u64 = rhs
                .parse()
                .map_err(|_| Error::InvalidPolicy(format!("bad remainder in '{clause}'")))?;
            if modulus == 0 || !is_ident(key) {
                return Err(Error::InvalidPolicy(format!("bad term '{clause}'")));
            }
            return Ok(Term::KeyModEquals {
                key: key.into(),
                modulus,
                remainder,
            });
        }
        if !is_ident(lhs) || !is_ident(rhs) {
            return Err(Error::InvalidPolicy(format!("bad term '{clause}'")));
        }
        return Ok(Term::KeyEquals {
            key: lhs.into(),
            value: rhs.into(),
            negated: false,
        });
    }
    if is_ident(clause) {
        return Ok(Term::HasTag(clause.into()));
    }
    Err(Error::InvalidPolicy(format!("bad term '{clause}'")))
}

/// Apply a policy to a bundle: deterministic subset of tensor names in
/// bundle order. Unknown tag namespaces are reported as warnings.
pub fn select_tensors(bundle: &TensorBundle, policy: &SelectPolicy) -> Selection {
    let names = bundle
        .items()
        .iter()
        .filter(|it| policy.matches(it.tags()))
        .map(|it| it.name().to_string())
        .collect();

    let mut warnings = Vec::new();
    for (name, keyed) in policy.referenced() {
        let present = bundle.items().iter().any(|it| {
            it.tags().iter().any(|tag| {
                if keyed {
                    tag.starts_with(&format!("{name}:"))
                } else {
                    tag == &name
                }
            })
        });
        if !present {
            warnings.push(format!("tag namespace '{name}' not present in bundle"));
        }
    }
    Selection { names, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn toy_bundle() -> TensorBundle {
        let mut b = TensorBundle::new();
        for layer in 0..4 {
            for part in ["ffn", "attention"] {
                let name = format!("layer{layer}.{part}");
                b.push_tensor(
                    Tensor::new(&name, 2, 2, vec![1.0; 4])
                        .unwrap()
                        .with_tags([format!("layer:{layer}"), format!("part:{part}")]),
                )
                .unwrap();
            }
        }
        b
    }

    #[test]
    fn even_layer_ffns() {
        let b = toy_bundle();
        let p = SelectPolicy::parse("layer % 2 == 0 and part == ffn").unwrap();
        let sel = select_tensors(&b, &p);
        assert_eq!(sel.names, vec!["layer0.ffn", "layer2.ffn"]);
        assert!(sel.warnings.is_empty());
    }

    #[test]
    fn missing_part_is_empty_with_no_namespace_warning() {
        let b = toy_bundle();
        let p = SelectPolicy::parse("part == expert_ffn").unwrap();
        let sel = select_tensors(&b, &p);
        assert!(sel.names.is_empty());
        // namespace "part" exists, so no warning
        assert!(sel.warnings.is_empty());
    }

    #[test]
    fn unknown_namespace_warns() {
        let b = toy_bundle();
        let p = SelectPolicy::parse("expert == 3").unwrap();
        let sel = select_tensors(&b, &p);
        assert!(sel.names.is_empty());
        assert_eq!(sel.warnings.len(), 1);
    }

    #[test]
    fn all_selects_everything() {
        let b = toy_bundle();
        let p = SelectPolicy::parse("all").unwrap();
        assert_eq!(select_tensors(&b, &p).names.len(), 8);
    }

    #[test]
    fn bare_tag_and_negation() {
        let mut b = toy_bundle();
        b.push_tensor(
            Tensor::new("emb", 2, 2, vec![0.5; 4])
                .unwrap()
                .with_tags(["embedding"]),
        )
        .unwrap();
        let p = SelectPolicy::parse("embedding").unwrap();
        assert_eq!(select_tensors(&b, &p).names, vec!["emb"]);
        let p = SelectPolicy::parse("part != ffn and layer % 2 == 1").unwrap();
        assert_eq!(
            select_tensors(&b, &p).names,
            vec!["layer1.attention", "layer3.attention"]
        );
    }

    #[test]
    fn rejects_malformed_expressions() {
        assert!(SelectPolicy::parse("layer %% 2 == 0").is_err());
        assert!(SelectPolicy::parse("part ==").is_err());
        assert!(SelectPolicy::parse("a == b == c").is_err());
        assert!(SelectPolicy::parse("layer % 0 == 1").is_err());
    }
}
