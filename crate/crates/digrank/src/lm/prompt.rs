//! Fixed prompt templates shared by scoring and generation.
//!
//! The templates are versioned strings so a scored artifact can be tied to
//! the exact prompt layout that produced it.

use serde::{Deserialize, Serialize};

pub const TEMPLATE_VERSION: &str = "v1";

/// Where retrieved documents sit relative to the question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DocPlacement {
    /// Documents first, then the question.
    #[default]
    BeforeQuery,
    /// Question first, then the documents.
    AfterQuery,
}

pub fn query_only(question: &str) -> String {
    format!("Answer the question.\nQuestion: {question}\nAnswer:")
}

pub fn with_documents(question: &str, docs: &[&str], placement: DocPlacement) -> String {
    let doc_block: String = docs
        .iter()
        .map(|d| format!("Document: {d}\n"))
        .collect();
    match placement {
        DocPlacement::BeforeQuery => {
            format!("Answer the question using the documents.\n{doc_block}Question: {question}\nAnswer:")
        }
        DocPlacement::AfterQuery => {
            format!("Answer the question using the documents.\nQuestion: {question}\n{doc_block}Answer:")
        }
    }
}

/// Question text embedded in a prompt built by this module, if any.
pub fn extract_question(prompt: &str) -> Option<&str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("Question: "))
}

/// Document texts embedded in a prompt built by this module, in order.
pub fn extract_documents(prompt: &str) -> Vec<&str> {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix("Document: "))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_question_and_documents() {
        let p = with_documents("who wrote it", &["alpha beta", "gamma"], DocPlacement::BeforeQuery);
        assert_eq!(extract_question(&p), Some("who wrote it"));
        assert_eq!(extract_documents(&p), vec!["alpha beta", "gamma"]);
        let q = query_only("who wrote it");
        assert_eq!(extract_question(&q), Some("who wrote it"));
        assert!(extract_documents(&q).is_empty());
    }

    #[test]
    fn placement_changes_order() {
        let before = with_documents("q", &["d"], DocPlacement::BeforeQuery);
        let after = with_documents("q", &["d"], DocPlacement::AfterQuery);
        assert!(before.find("Document:").unwrap() < before.find("Question:").unwrap());
        assert!(after.find("Question:").unwrap() < after.find("Document:").unwrap());
    }
}
