//! Relation-tag → question template registry.
//!
//! Templates are plain strings with three placeholders:
//!
//! * `{head}`: the triple head, trimmed, with one trailing period removed;
//! * `{subject}`: the first word of the head (the event's agent in
//!   ATOMIC-style heads such as "Flynn is cleaning out Flynn's garage");
//! * `{a}`: the indefinite article ("a" or "an") for the head.
//!
//! The built-in defaults are reconstructed from question surface forms seen in
//! published examples of knowledge-base-derived QA sets; they are not an
//! official template set. Load a TOML file to replace or extend them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::data::KnowledgeTriple;

const PLACEHOLDERS: [&str; 3] = ["head", "subject", "a"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRegistry {
    pub version: String,
    pub templates: BTreeMap<String, String>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let templates = [
            ("xReact", "{head}. As a result, {subject} felt"),
            ("oReact", "{head}. As a result, others felt"),
            ("xWant", "{head}. As a result, {subject} wanted to"),
            ("oWant", "{head}. As a result, others wanted to"),
            ("xAttr", "{head}. {subject} is seen as"),
            ("xIntent", "{head}. Because {subject} wanted"),
            ("xNeed", "{head}. Before, {subject} needed to"),
            ("xEffect", "{head}. As a result, {subject}"),
            ("AtLocation", "You are likely to find {a} {head} in"),
            ("Causes", "Something that might happen as a consequence of {head} is"),
            ("UsedFor", "{a} {head} is for"),
            ("CapableOf", "{a} {head} can"),
            ("HasSubevent", "Something you might do while {head} is"),
        ]
        .into_iter()
        .map(|(r, t)| (r.to_owned(), t.to_owned()))
        .collect();
        TemplateRegistry {
            version: "builtin-1".to_owned(),
            templates,
        }
    }
}

impl TemplateRegistry {
    pub fn new(version: impl Into<String>, templates: BTreeMap<String, String>) -> Result<Self, SynthesisError> {
        let reg = TemplateRegistry {
            version: version.into(),
            templates,
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SynthesisError> {
        let reg: TemplateRegistry =
            toml::from_str(text).map_err(|e| SynthesisError::Config(e.to_string()))?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthesisError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthesisError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("registry serializes")
    }

    /// Every template must be non-empty and use only known placeholders.
    pub fn validate(&self) -> Result<(), SynthesisError> {
        for (relation, template) in &self.templates {
            if template.trim().is_empty() {
                return Err(SynthesisError::Config(format!("template for '{relation}' is empty")));
            }
            let mut rest = template.as_str();
            while let Some(open) = rest.find('{') {
                let after = &rest[open + 1..];
                let close = after.find('}').ok_or_else(|| {
                    SynthesisError::Config(format!("template for '{relation}' has an unclosed '{{'"))
                })?;
                let name = &after[..close];
                if !PLACEHOLDERS.contains(&name) {
                    return Err(SynthesisError::Config(format!(
                        "template for '{relation}' uses unknown placeholder '{{{name}}}'"
                    )));
                }
                rest = &after[close + 1..];
            }
        }
        Ok(())
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.templates.contains_key(relation)
    }

    /// Renders the question for a triple. Same triple, same text.
    pub fn render(&self, triple: &KnowledgeTriple) -> Result<String, SynthesisError> {
        let template = self
            .templates
            .get(&triple.relation)
            .ok_or_else(|| SynthesisError::MissingTemplate(triple.relation.clone()))?;
        let head = normalize_head(&triple.head);
        let subject = head.split_whitespace().next().unwrap_or("");
        let question = template
            .replace("{head}", head)
            .replace("{subject}", subject)
            .replace("{a}", indefinite_article(head));
        Ok(question.trim().to_owned())
    }
}

/// Free-function form of [`TemplateRegistry::render`].
pub fn render_question(triple: &KnowledgeTriple, registry: &TemplateRegistry) -> Result<String, SynthesisError> {
    registry.render(triple)
}

fn normalize_head(head: &str) -> &str {
    let head = head.trim();
    head.strip_suffix('.').map(str::trim_end).unwrap_or(head)
}

fn indefinite_article(head: &str) -> &'static str {
    match head.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(head: &str, rel: &str) -> KnowledgeTriple {
        KnowledgeTriple::new(head, rel, "x", "s")
    }

    #[test]
    fn reconstructed_surface_forms() {
        let reg = TemplateRegistry::default();
        let cases = [
            (
                "Flynn is cleaning out Flynn's garage",
                "xReact",
                "Flynn is cleaning out Flynn's garage. As a result, Flynn felt",
            ),
            (
                "watching a movie",
                "Causes",
                "Something that might happen as a consequence of watching a movie is",
            ),
            ("Jamie decides to make some.", "xAttr", "Jamie decides to make some. Jamie is seen as"),
            (
                "Tracy can not wait to use it",
                "xWant",
                "Tracy can not wait to use it. As a result, Tracy wanted to",
            ),
            ("Pat opens the windows", "oReact", "Pat opens the windows. As a result, others felt"),
            ("marker", "AtLocation", "You are likely to find a marker in"),
            ("office building", "UsedFor", "an office building is for"),
        ];
        for (head, rel, want) in cases {
            assert_eq!(reg.render(&t(head, rel)).unwrap(), want);
        }
    }

    #[test]
    fn head_only_template_inlines_head() {
        let mut templates = BTreeMap::new();
        templates.insert("Stem".to_owned(), "{head}".to_owned());
        let reg = TemplateRegistry::new("t", templates).unwrap();
        let stem = "Something that might happen as a consequence of watching a movie is";
        assert_eq!(reg.render(&t(stem, "Stem")).unwrap(), stem);
    }

    #[test]
    fn missing_template_is_config_error() {
        let reg = TemplateRegistry::default();
        assert!(matches!(
            reg.render(&t("x", "NoSuchRelation")),
            Err(SynthesisError::MissingTemplate(r)) if r == "NoSuchRelation"
        ));
    }

    #[test]
    fn rejects_bad_templates() {
        for bad in ["", "   ", "{head} {object}", "{head"] {
            let mut templates = BTreeMap::new();
            templates.insert("R".to_owned(), bad.to_owned());
            assert!(TemplateRegistry::new("t", templates).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let reg = TemplateRegistry::default();
        let back = TemplateRegistry::from_toml_str(&reg.to_toml_string()).unwrap();
        assert_eq!(reg, back);
    }
}
