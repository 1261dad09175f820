use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Turns a possibly defective order into a permutation of `expected_ids`.
///
/// Keeps the first occurrence of each identifier, drops identifiers outside the
/// expected set, then appends whatever is missing in `fallback_order`.
pub fn repair_order(order: &[usize], expected_ids: &[usize], fallback_order: &[usize]) -> Vec<usize> {
    let expected: BTreeSet<usize> = expected_ids.iter().copied().collect();
    let mut placed = BTreeSet::new();
    let mut out: Vec<usize> = order
        .iter()
        .copied()
        .filter(|id| expected.contains(id) && placed.insert(*id))
        .collect();
    out.extend(
        fallback_order
            .iter()
            .copied()
            .filter(|id| expected.contains(id) && placed.insert(*id)),
    );
    // Any expected id the fallback forgot still has to appear.
    out.extend(expected.iter().copied().filter(|id| placed.insert(*id)));
    out
}

/// A teacher's verdict on one window: the documents it was shown, in shown
/// order, and the repaired 1-based permutation it returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRanking {
    pub start: usize,
    pub presented: Vec<String>,
    pub order: Vec<usize>,
}

impl WindowRanking {
    fn reordered(&self) -> Result<Vec<String>> {
        let n = self.presented.len();
        let ids: BTreeSet<usize> = self.order.iter().copied().collect();
        if self.order.len() != n || ids.len() != n || ids.iter().any(|&i| i == 0 || i > n) {
            return Err(Error::InvalidArgument(alloc::format!(
                "window order {:?} is not a permutation of 1..={n}",
                self.order
            )));
        }
        Ok(self
            .order
            .iter()
            .map(|&i| self.presented[i - 1].clone())
            .collect())
    }
}

/// Applies window permutations to the first-stage list in emission order.
///
/// Each window must show documents currently occupying its slice of the
/// working list, which is what a back-to-front pass produces when every window
/// is built from the list as left by its predecessors.
pub fn merge_windows(windows: &[WindowRanking], first_stage: &[String]) -> Result<Vec<String>> {
    let mut working: Vec<String> = first_stage.to_vec();
    for w in windows {
        let end = w.start + w.presented.len();
        if end > working.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "window {}..{end} exceeds list of {}",
                w.start,
                working.len()
            )));
        }
        let slice = &working[w.start..end];
        let current: BTreeSet<&str> = slice.iter().map(String::as_str).collect();
        let shown: BTreeSet<&str> = w.presented.iter().map(String::as_str).collect();
        if let Some(unknown) = w.presented.iter().find(|d| !current.contains(d.as_str())) {
            return Err(Error::UnknownDoc(unknown.clone()));
        }
        if shown.len() != slice.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "window at {} shows {} distinct docs for a slice of {}",
                w.start,
                shown.len(),
                slice.len()
            )));
        }
        let reordered = w.reordered()?;
        working[w.start..end].clone_from_slice(&reordered);
    }
    Ok(working)
}
