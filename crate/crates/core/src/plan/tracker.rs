use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::basis::BasisRegistry;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Sliding-window length `S`; `Full` keeps every step of the task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Window {
    Steps(usize),
    Full,
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Steps(s) => write!(f, "{s}"),
            Window::Full => f.write_str("full"),
        }
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "full" {
            return Ok(Window::Full);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("window must be a positive integer or \"full\", got `{s}`")),
            Ok(n) => Ok(Window::Steps(n)),
        }
    }
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Window::Steps(n) => s.serialize_u64(*n as u64),
            Window::Full => s.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => i.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Ring buffer of per-step "least perturbed" index sets.
///
/// Each record holds the `r_next` registry indices whose perturbation
/// columns had the smallest 2-norms at that step.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationTracker {
    window: Window,
    r_next: usize,
    buffer: VecDeque<Vec<usize>>,
    pushes: usize,
}

impl PerturbationTracker {
    pub fn new(window: Window, r_next: usize) -> Self {
        PerturbationTracker {
            window,
            r_next,
            buffer: VecDeque::new(),
            pushes: 0,
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn r_next(&self) -> usize {
        self.r_next
    }

    pub fn set_r_next(&mut self, r: usize) {
        self.r_next = r;
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Total records pushed since the last clear (including evicted ones).
    pub fn pushes(&self) -> usize {
        self.pushes
    }

    pub fn records(&self) -> impl Iterator<Item = &[usize]> {
        self.buffer.iter().map(Vec::as_slice)
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
        self.pushes = 0;
    }

    /// Records the winner set for one step. Column `j` of `eps` corresponds
    /// to registry index `available[j]`; ties go to the lower index.
    pub fn record_winners(&mut self, eps: &Matrix, available: &[usize]) -> Result<()> {
        if eps.cols() != available.len() {
            return Err(Error::Shape {
                op: "record_winners",
                lhs: eps.shape(),
                rhs: (eps.rows(), available.len()),
            });
        }
        let norms = eps.col_norms();
        let mut order: Vec<usize> = (0..available.len()).collect();
        order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(available[a].cmp(&available[b])));
        let mut winners: Vec<usize> = order
            .into_iter()
            .take(self.r_next.min(available.len()))
            .map(|j| available[j])
            .collect();
        winners.sort_unstable();
        self.buffer.push_back(winners);
        self.pushes += 1;
        if let Window::Steps(s) = self.window {
            while self.buffer.len() > s {
                self.buffer.pop_front();
            }
        }
        Ok(())
    }

    /// `h(i)`: how often each index appears in the buffered winner sets.
    pub fn frequencies(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for rec in &self.buffer {
            for &i in rec {
                *h.entry(i).or_insert(0) += 1;
            }
        }
        h
    }

    /// Picks the `r_next` still-available indices with the highest frequency
    /// (ties to the lower index), without touching the registry.
    pub fn rank_candidates(&self, reg: &BasisRegistry, r_next: usize) -> Result<Vec<usize>> {
        if self.buffer.is_empty() {
            return Err(Error::InvalidState(
                "no perturbation statistics recorded; cannot select next basis".into(),
            ));
        }
        if reg.available().len() < r_next {
            return Err(Error::BasisExhausted {
                requested: r_next,
                available: reg.available().len(),
            });
        }
        let h = self.frequencies();
        let mut cand: Vec<(usize, usize)> = reg
            .available()
            .iter()
            .map(|&i| (i, h.get(&i).copied().unwrap_or(0)))
            .collect();
        cand.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut picked: Vec<usize> = cand.into_iter().take(r_next).map(|(i, _)| i).collect();
        picked.sort_unstable();
        Ok(picked)
    }

    /// Selects the next task's indices and allocates them in `reg`.
    pub fn select_next(&self, reg: &mut BasisRegistry, r_next: usize) -> Result<Vec<usize>> {
        let picked = self.rank_candidates(reg, r_next)?;
        reg.allocate(&picked)?;
        Ok(picked)
    }
}
