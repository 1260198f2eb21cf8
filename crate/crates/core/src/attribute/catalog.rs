use super::{
    AttributeDefinition, Category, Degree, RiskWeight, Target, TrustTemplate, ValueDomain, ValueSource, WeightMapping,
    DEFAULT_BASE_RATE,
};
use crate::engine::Algorithm;
use serde::Deserialize;
use rustc_hash::FxHashMap;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;
use toml::Spanned;

/// The catalog shipped with the crate. All weights are placeholders.
pub const DEFAULT_CATALOG_TOML: &str = include_str!("../../catalog/default_catalog.toml");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog line {line}, column {column}: {message}")]
    FileInvalid { line: usize, column: usize, message: String },
    #[error("cannot read catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Line and column (both 1-based) of a byte offset.
pub(crate) fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let prefix = &src[..offset.min(src.len())];
    let line = prefix.matches('\n').count() + 1;
    let column = prefix.rfind('\n').map_or(prefix.len(), |nl| prefix.len() - nl - 1) + 1;
    (line, column)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default)]
    attribute: Vec<Spanned<AttributeRepr>>,
}

fn default_base_rate() -> f64 {
    DEFAULT_BASE_RATE
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeRepr {
    id: String,
    name: String,
    category: Category,
    domain: ValueDomain,
    #[serde(default)]
    source: ValueSource,
    #[serde(default)]
    secret: bool,
    #[serde(default)]
    monotone: bool,
    #[serde(default = "default_base_rate")]
    base_rate: f64,
    additive: Vec<AdditiveRepr>,
    opinion: Vec<OpinionRepr>,
    unmet: Option<TrustTemplate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdditiveRepr {
    target: Target,
    weight: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpinionRepr {
    target: Target,
    b: f64,
    d: f64,
    u: Option<f64>,
}

impl AttributeRepr {
    fn into_definitions(self) -> Result<(AttributeDefinition, AttributeDefinition), String> {
        let opinion = if self.category.is_trust() {
            let unmet = self.unmet.ok_or("trust attributes need an `unmet` opinion template")?;
            let degrees = self
                .opinion
                .into_iter()
                .map(|o| {
                    let u = o.u.ok_or("trust opinion degrees need `u`")?;
                    Ok(Degree::new(o.target, TrustTemplate { b: o.b, d: o.d, u }))
                })
                .collect::<Result<Vec<_>, String>>()?;
            WeightMapping::TrustUncertainty { degrees, unmet }
        } else {
            if self.unmet.is_some() {
                return Err("risk attributes take no `unmet` template".into());
            }
            let degrees = self
                .opinion
                .into_iter()
                .map(|o| {
                    if let Some(u) = o.u {
                        if (u - (1.0 - o.b - o.d)).abs() > 1e-9 {
                            return Err(format!("risk degree u = {u} must equal 1 - b - d"));
                        }
                    }
                    Ok(Degree::new(o.target, RiskWeight { b: o.b, d: o.d }))
                })
                .collect::<Result<Vec<_>, String>>()?;
            WeightMapping::RiskEvidence(degrees)
        };
        let additive = WeightMapping::Additive(
            self.additive.into_iter().map(|a| Degree::new(a.target, a.weight)).collect(),
        );
        let id: Arc<str> = self.id.into();
        let build = |weights| {
            let def = AttributeDefinition {
                id: id.clone(),
                display_name: self.name.clone(),
                category: self.category,
                domain: self.domain.clone(),
                source: self.source,
                secret: self.secret,
                monotone: self.monotone,
                base_rate: self.base_rate,
                weights,
            };
            def.validate().map(|_| def).map_err(|e| e.to_string())
        };
        Ok((build(additive)?, build(opinion)?))
    }
}

/// The active set of attribute definitions, one profile per engine.
///
/// Both profiles hold the same ids in the same order; they differ only in
/// the weight codomain.
#[derive(Debug, Clone)]
pub struct Catalog {
    additive: Vec<AttributeDefinition>,
    subjective: Vec<AttributeDefinition>,
    index: FxHashMap<Arc<str>, usize>,
}

impl Catalog {
    pub fn from_toml_str(src: &str) -> Result<Self, CatalogError> {
        let invalid_at = |offset: usize, message: String| {
            let (line, column) = line_col(src, offset);
            CatalogError::FileInvalid { line, column, message }
        };
        let file: CatalogFile = toml::from_str(src).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            invalid_at(offset, e.message().to_owned())
        })?;
        let mut additive = Vec::with_capacity(file.attribute.len());
        let mut subjective = Vec::with_capacity(file.attribute.len());
        let mut index = FxHashMap::default();
        for entry in file.attribute {
            let start = entry.span().start;
            let (a, s) = entry.into_inner().into_definitions().map_err(|m| invalid_at(start, m))?;
            if index.insert(a.id.clone(), additive.len()).is_some() {
                return Err(invalid_at(start, format!("duplicate attribute id `{}`", a.id)));
            }
            additive.push(a);
            subjective.push(s);
        }
        Ok(Self { additive, subjective, index })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path)
            .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&src)
    }

    /// Builds a catalog from explicit definition pairs (additive, opinion).
    pub fn from_definitions(
        pairs: impl IntoIterator<Item = (AttributeDefinition, AttributeDefinition)>,
    ) -> Result<Self, String> {
        let mut cat = Self { additive: Vec::new(), subjective: Vec::new(), index: FxHashMap::default() };
        for (a, s) in pairs {
            if a.id != s.id || a.category != s.category {
                return Err(format!("profile mismatch for `{}`", a.id));
            }
            if a.codomain_kind() != super::CodomainKind::AdditiveReal
                || s.codomain_kind() == super::CodomainKind::AdditiveReal
            {
                return Err(format!("`{}`: expected additive and opinion weights", a.id));
            }
            if cat.index.insert(a.id.clone(), cat.additive.len()).is_some() {
                return Err(format!("duplicate attribute id `{}`", a.id));
            }
            cat.additive.push(a);
            cat.subjective.push(s);
        }
        Ok(cat)
    }

    pub fn definitions(&self, algorithm: Algorithm) -> &[AttributeDefinition] {
        match algorithm {
            Algorithm::Additive => &self.additive,
            Algorithm::SubjectiveLogic => &self.subjective,
        }
    }

    pub fn get(&self, algorithm: Algorithm, id: &str) -> Option<&AttributeDefinition> {
        self.index.get(id).map(|&i| &self.definitions(algorithm)[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.additive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.additive.is_empty()
    }

    /// Ids in catalog order.
    pub fn ids(&self) -> impl Iterator<Item = &Arc<str>> {
        self.additive.iter().map(|d| &d.id)
    }

    pub fn trust_ids(&self) -> Vec<String> {
        self.additive.iter().filter(|d| d.category.is_trust()).map(|d| d.id.to_string()).collect()
    }

    pub fn risk_ids(&self) -> Vec<String> {
        self.additive.iter().filter(|d| !d.category.is_trust()).map(|d| d.id.to_string()).collect()
    }

    pub fn count(&self, category: Category) -> usize {
        self.additive.iter().filter(|d| d.category == category).count()
    }
}

/// Parses the shipped default catalog.
pub fn default_catalog() -> Result<Catalog, CatalogError> {
    Catalog::from_toml_str(DEFAULT_CATALOG_TOML)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribute::CodomainKind;

    #[test]
    fn default_catalog_counts() {
        let cat = default_catalog().unwrap();
        assert_eq!(cat.count(Category::User), 10);
        assert_eq!(cat.count(Category::Device), 16);
        assert_eq!(cat.count(Category::Channel), 3);
        assert_eq!(cat.count(Category::Risk), 9);
        assert_eq!(cat.trust_ids().len(), 29);
        for def in cat.definitions(Algorithm::Additive) {
            assert_eq!(def.codomain_kind(), CodomainKind::AdditiveReal);
        }
        for def in cat.definitions(Algorithm::SubjectiveLogic) {
            let expected = if def.category.is_trust() { CodomainKind::TrustUncertainty } else { CodomainKind::RiskEvidencePair };
            assert_eq!(def.codomain_kind(), expected);
        }
    }

    #[test]
    fn channel_attributes_are_the_three_protections() {
        let cat = default_catalog().unwrap();
        let mut names: Vec<_> = cat
            .definitions(Algorithm::Additive)
            .iter()
            .filter(|d| d.category == Category::Channel)
            .map(|d| d.display_name.as_str())
            .collect();
        names.sort_unstable();
        assert_eq!(names, ["Authentication", "Confidentiality", "Integrity"]);
    }

    #[test]
    fn syntax_error_reports_line() {
        let src = "[[attribute]]\nid = \"x\"\nname = \n";
        match Catalog::from_toml_str(src).unwrap_err() {
            CatalogError::FileInvalid { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn semantic_error_reports_entry_line() {
        let src = r#"
[[attribute]]
id = "user.ok"
name = "ok"
category = "user"
domain = { kind = "text" }
additive = [{ target = "a", weight = 1 }]
opinion = [{ target = "a", b = 0.5, d = 0.1, u = 0.4 }]
unmet = { b = 0.0, d = 0.5, u = 0.5 }

[[attribute]]
id = "user.bad"
name = "bad"
category = "user"
domain = { kind = "text" }
additive = [{ target = "a", weight = 1 }]
opinion = [{ target = "a", b = 0.5, d = 0.6, u = 0.4 }]
unmet = { b = 0.0, d = 0.5, u = 0.5 }
"#;
        match Catalog::from_toml_str(src).unwrap_err() {
            CatalogError::FileInvalid { line, message, .. } => {
                assert!((11..=18).contains(&line), "line {line}");
                assert!(message.contains("user.bad"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let entry = r#"
[[attribute]]
id = "risk.a"
name = "a"
category = "risk"
domain = { kind = "text" }
additive = [{ target = "x", weight = 1 }]
opinion = [{ target = "x", b = 0.5, d = 0.1 }]
"#;
        let src = format!("{entry}{entry}");
        assert!(matches!(Catalog::from_toml_str(&src), Err(CatalogError::FileInvalid { line: 10, .. })));
    }

    #[test]
    fn unknown_field_rejected() {
        let src = "[[attribute]]\nid = \"x\"\nwieght = 3\n";
        assert!(matches!(Catalog::from_toml_str(src), Err(CatalogError::FileInvalid { .. })));
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
