//! Named factor breakdowns shared by the link budget and stellar chains.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Factor {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Ordered list of multiplicative factors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorLog(pub Vec<Factor>);

impl FactorLog {
    pub fn push(&mut self, factor: Factor) {
        self.0.push(factor);
    }

    pub fn product(&self) -> f64 {
        self.0.iter().map(|f| f.value).product()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|f| f.name == name).map(|f| f.value)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Factor> {
        self.0.iter()
    }

    /// Plain-text table, one factor per line.
    pub fn table(&self) -> String {
        let width = self.0.iter().map(|f| f.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for f in &self.0 {
            out.push_str(&format!("{:<width$}  {:>14.6e}", f.name, f.value));
            if let Some(note) = &f.note {
                out.push_str("  (");
                out.push_str(note);
                out.push(')');
            }
            out.push('\n');
        }
        out
    }
}
