//! Exhaustive cosine retrieval over max-pooled screen representations.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::model::ScreenTransformer;
use crate::embed::text::cosine;
use crate::embed::tokens::ScreenInputs;
use crate::error::{ModelError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    pub entries: Vec<(String, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub screen_id: String,
    pub cosine: f64,
}

impl RetrievalIndex {
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (id, v) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(ModelError::DuplicateId(id.clone()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::InvalidConfig(format!("non-finite representation for `{id}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.iter().find(|(i, _)| i == id).map(|(_, v)| v.as_slice())
    }

    /// Top `k` entries by cosine to `query`, descending; ties by id. `k` is
    /// clamped to the index size.
    pub fn retrieve(&self, query: &[f64], k: usize) -> Result<Vec<Hit>> {
        if self.entries.is_empty() {
            return Err(ModelError::EmptyIndex);
        }
        let mut hits: Vec<Hit> = self
            .entries
            .iter()
            .map(|(id, v)| Hit {
                screen_id: id.clone(),
                cosine: cosine(query, v),
            })
            .collect();
        hits.sort_by(|a, b| b.cosine.total_cmp(&a.cosine).then_with(|| a.screen_id.cmp(&b.screen_id)));
        hits.truncate(k.max(1));
        Ok(hits)
    }
}

/// Representations of every screen under `model`.
pub fn build_index(model: &ScreenTransformer, screens: &[ScreenInputs]) -> Result<RetrievalIndex> {
    let entries = screens
        .iter()
        .map(|s| Ok((s.screen_id.clone(), model.screen_repr(s)?)))
        .collect::<Result<Vec<_>>>()?;
    RetrievalIndex::new(entries)
}

pub fn retrieve(model: &ScreenTransformer, query: &ScreenInputs, index: &RetrievalIndex, k: usize) -> Result<Vec<Hit>> {
    index.retrieve(&model.screen_repr(query)?, k)
}
