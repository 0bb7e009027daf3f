//! Per-episode notepad. Notes persist across months and never count
//! against the tool budget.

use serde::{Deserialize, Serialize};

pub const DEFAULT_RECALL_LIMIT: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub id: u64,
    pub month_created: u32,
    pub content: String,
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "operation", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemoryOp {
    SaveNote {
        content: String,
        #[serde(default)]
        tags: Vec<String>,
    },
    RecallNotes {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        query: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tags: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum MemoryResult {
    Saved { note_id: u64 },
    Notes { notes: Vec<Note> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Notepad {
    notes: Vec<Note>,
}

impl Notepad {
    pub fn save_note(&mut self, month: u32, content: String, tags: Vec<String>) -> u64 {
        let id = self.notes.len() as u64 + 1;
        self.notes.push(Note {
            id,
            month_created: month,
            content,
            tags,
        });
        id
    }

    /// Newest first. A note matches when its content contains `query`
    /// (case-insensitive) or one of its tags equals one of `tags`. With no
    /// filters every note matches.
    pub fn recall_notes(
        &self,
        query: Option<&str>,
        tags: Option<&[String]>,
        limit: Option<usize>,
    ) -> Vec<Note> {
        let query = query.filter(|q| !q.is_empty()).map(str::to_lowercase);
        let tags = tags.filter(|t| !t.is_empty());
        let unfiltered = query.is_none() && tags.is_none();
        self.notes
            .iter()
            .rev()
            .filter(|n| {
                unfiltered
                    || query
                        .as_ref()
                        .is_some_and(|q| n.content.to_lowercase().contains(q))
                    || tags.is_some_and(|ts| n.tags.iter().any(|t| ts.contains(t)))
            })
            .take(limit.unwrap_or(DEFAULT_RECALL_LIMIT))
            .cloned()
            .collect()
    }

    pub fn recent(&self, n: usize) -> Vec<Note> {
        self.recall_notes(None, None, Some(n))
    }

    pub fn apply(&mut self, month: u32, op: &MemoryOp) -> MemoryResult {
        match op {
            MemoryOp::SaveNote { content, tags } => MemoryResult::Saved {
                note_id: self.save_note(month, content.clone(), tags.clone()),
            },
            MemoryOp::RecallNotes { query, tags, limit } => MemoryResult::Notes {
                notes: self.recall_notes(query.as_deref(), tags.as_deref(), *limit),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }
}
