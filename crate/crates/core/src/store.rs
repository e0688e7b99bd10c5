//! Per-entity trust state: the Direct Trust Table, the Recommended List Table
//! and their JSON snapshot format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trust::{
    direct_trust, DecayParams, InteractionRecord, ReputationFactor, TrustDegree, TrustError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("{0} cannot hold a trust entry about itself")]
    SelfReference(String),
    #[error("interaction at t={time} for ({trustee}, {service}) precedes last recorded t={last}")]
    OutOfOrder {
        trustee: String,
        service: String,
        time: f64,
        last: f64,
    },
    #[error("history cap must be at least 1")]
    ZeroHistoryCap,
    #[error("duplicate snapshot entry for {0}")]
    DuplicateEntry(String),
    #[error("empty history for ({trustee}, {service})")]
    EmptyEntry { trustee: String, service: String },
    #[error("snapshot parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Trust(#[from] TrustError),
}

pub type Result<T> = std::result::Result<T, StoreError>;

#[derive(Debug, Clone, Copy, PartialEq)]
struct CachedTrust {
    td: TrustDegree,
    at: f64,
    params: DecayParams,
    bonus: f64,
}

/// Interaction history with one trustee for one service.
#[derive(Debug, Clone, Default)]
pub struct DirectEntry {
    history: Vec<InteractionRecord>,
    cache: Option<CachedTrust>,
}

impl PartialEq for DirectEntry {
    fn eq(&self, other: &Self) -> bool {
        self.history == other.history
    }
}

impl DirectEntry {
    pub fn history(&self) -> &[InteractionRecord] {
        &self.history
    }

    pub fn last_time(&self) -> Option<f64> {
        self.history.last().map(|r| r.time)
    }

    pub fn n_total(&self) -> u64 {
        self.history.len() as u64
    }

    pub fn n_positive(&self) -> u64 {
        self.history.iter().filter(|r| r.positive).count() as u64
    }

    pub fn n_negative(&self) -> u64 {
        self.n_total() - self.n_positive()
    }

    /// Undecayed mean interaction score, used as the edge satisfaction level.
    pub fn mean_score(&self) -> Option<f64> {
        if self.history.is_empty() {
            return None;
        }
        let sum: f64 = self.history.iter().map(|r| r.score).sum();
        Some((sum / self.history.len() as f64).clamp(0.0, 1.0))
    }

    /// Last computed direct trust and the time it was computed for, if the
    /// cache has not been invalidated since.
    pub fn cached_td(&self) -> Option<(TrustDegree, f64)> {
        self.cache.map(|c| (c.td, c.at))
    }
}

/// An entity's record of its own interactions, keyed by (trustee, service).
#[derive(Debug, Clone)]
pub struct DirectTrustTable {
    owner: String,
    entries: BTreeMap<(String, String), DirectEntry>,
    history_cap: Option<usize>,
}

impl PartialEq for DirectTrustTable {
    fn eq(&self, other: &Self) -> bool {
        self.owner == other.owner && self.entries == other.entries
    }
}

impl DirectTrustTable {
    pub fn new(owner: impl Into<String>) -> Self {
        DirectTrustTable {
            owner: owner.into(),
            entries: BTreeMap::new(),
            history_cap: None,
        }
    }

    /// Keeps at most `cap` records per entry, evicting the oldest first.
    pub fn with_history_cap(mut self, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(StoreError::ZeroHistoryCap);
        }
        self.history_cap = Some(cap);
        for entry in self.entries.values_mut() {
            truncate_front(&mut entry.history, cap);
        }
        Ok(self)
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, trustee: &str, service: &str) -> Option<&DirectEntry> {
        self.entries.get(&(trustee.to_owned(), service.to_owned()))
    }

    /// `((trustee, service), entry)` in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&(String, String), &DirectEntry)> {
        self.entries.iter()
    }

    pub fn record_interaction(
        &mut self,
        trustee: &str,
        service: &str,
        record: InteractionRecord,
    ) -> Result<()> {
        if trustee == self.owner {
            return Err(StoreError::SelfReference(self.owner.clone()));
        }
        record.validate()?;
        let entry = self
            .entries
            .entry((trustee.to_owned(), service.to_owned()))
            .or_default();
        if let Some(last) = entry.last_time() {
            if record.time < last {
                return Err(StoreError::OutOfOrder {
                    trustee: trustee.to_owned(),
                    service: service.to_owned(),
                    time: record.time,
                    last,
                });
            }
        }
        entry.history.push(record);
        if let Some(cap) = self.history_cap {
            truncate_front(&mut entry.history, cap);
        }
        entry.cache = None;
        Ok(())
    }

    /// Direct trust toward `trustee` for `service` at `t_now`, refreshing the
    /// entry's cache. `None` when there is no history.
    pub fn lookup_direct(
        &mut self,
        trustee: &str,
        service: &str,
        t_now: f64,
        params: DecayParams,
        rf: ReputationFactor,
    ) -> Result<Option<TrustDegree>> {
        let Some(entry) = self
            .entries
            .get_mut(&(trustee.to_owned(), service.to_owned()))
        else {
            return Ok(None);
        };
        if let Some(c) = entry.cache {
            if c.at == t_now && c.params == params && c.bonus == rf.bonus {
                return Ok(Some(c.td));
            }
        }
        let td = direct_trust(&entry.history, t_now, params, rf)?;
        entry.cache = Some(CachedTrust {
            td,
            at: t_now,
            params,
            bonus: rf.bonus,
        });
        Ok(Some(td))
    }

    /// Same value as [`lookup_direct`](Self::lookup_direct) without touching
    /// the cache.
    pub fn direct_trust_at(
        &self,
        trustee: &str,
        service: &str,
        t_now: f64,
        params: DecayParams,
        rf: ReputationFactor,
    ) -> Result<Option<TrustDegree>> {
        match self.entry(trustee, service) {
            None => Ok(None),
            Some(entry) => Ok(Some(direct_trust(&entry.history, t_now, params, rf)?)),
        }
    }
}

fn truncate_front<T>(v: &mut Vec<T>, cap: usize) {
    if v.len() > cap {
        v.drain(..v.len() - cap);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendedEntry {
    pub td: Option<TrustDegree>,
    pub updated_at: f64,
}

/// Peers known to offer or rate each service, with the most recent
/// recommended trust computed for them.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendedListTable {
    owner: String,
    entries: BTreeMap<String, BTreeMap<String, RecommendedEntry>>,
}

impl RecommendedListTable {
    pub fn new(owner: impl Into<String>) -> Self {
        RecommendedListTable {
            owner: owner.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, service: &str, peer: &str) -> Option<&RecommendedEntry> {
        self.entries.get(service)?.get(peer)
    }

    /// Peers listed for `service`, in id order.
    pub fn peers<'a>(&'a self, service: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .get(service)
            .into_iter()
            .flat_map(|m| m.keys().map(String::as_str))
    }

    /// `(service, peer, entry)` in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &RecommendedEntry)> {
        self.entries
            .iter()
            .flat_map(|(s, peers)| peers.iter().map(move |(p, e)| (s.as_str(), p.as_str(), e)))
    }

    pub fn update_recommended(
        &mut self,
        service: &str,
        peer: &str,
        td: TrustDegree,
        t_now: f64,
    ) -> Result<()> {
        self.upsert(service, peer, Some(td), t_now)
    }

    /// Lists `peer` under `service` without a trust value. Existing entries
    /// are left alone.
    pub fn register_peer(&mut self, service: &str, peer: &str, t_now: f64) -> Result<()> {
        if self.get(service, peer).is_some() {
            return Ok(());
        }
        self.upsert(service, peer, None, t_now)
    }

    fn upsert(
        &mut self,
        service: &str,
        peer: &str,
        td: Option<TrustDegree>,
        t_now: f64,
    ) -> Result<()> {
        if peer == self.owner {
            return Err(StoreError::SelfReference(self.owner.clone()));
        }
        if !(t_now.is_finite() && t_now >= 0.0) {
            return Err(TrustError::BadTimestamp(t_now).into());
        }
        self.entries.entry(service.to_owned()).or_default().insert(
            peer.to_owned(),
            RecommendedEntry {
                td,
                updated_at: t_now,
            },
        );
        Ok(())
    }
}

/// Both tables of one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustTables {
    pub direct: DirectTrustTable,
    pub recommended: RecommendedListTable,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    owner: String,
    direct: Vec<DirectDoc>,
    recommended: Vec<RecommendedDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectDoc {
    trustee: String,
    service: String,
    history: Vec<InteractionRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendedDoc {
    service: String,
    peer: String,
    td: Option<TrustDegree>,
    updated_at: f64,
}

impl TrustTables {
    pub fn new(owner: impl Into<String>) -> Self {
        let owner = owner.into();
        TrustTables {
            direct: DirectTrustTable::new(owner.clone()),
            recommended: RecommendedListTable::new(owner),
        }
    }

    pub fn owner(&self) -> &str {
        self.direct.owner()
    }

    /// Pretty-printed JSON document. Caches and the history cap are not part
    /// of the document.
    pub fn snapshot(&self) -> String {
        let doc = SnapshotDoc {
            owner: self.owner().to_owned(),
            direct: self
                .direct
                .entries()
                .map(|((trustee, service), e)| DirectDoc {
                    trustee: trustee.clone(),
                    service: service.clone(),
                    history: e.history.clone(),
                })
                .collect(),
            recommended: self
                .recommended
                .entries()
                .map(|(service, peer, e)| RecommendedDoc {
                    service: service.to_owned(),
                    peer: peer.to_owned(),
                    td: e.td,
                    updated_at: e.updated_at,
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("snapshot serialises");
        out.push('\n');
        out
    }

    pub fn restore(document: &str) -> Result<Self> {
        let doc: SnapshotDoc = serde_json::from_str(document).map_err(|e| StoreError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut tables = TrustTables::new(doc.owner);
        for d in doc.direct {
            if d.history.is_empty() {
                return Err(StoreError::EmptyEntry {
                    trustee: d.trustee,
                    service: d.service,
                });
            }
            if tables.direct.entry(&d.trustee, &d.service).is_some() {
                return Err(StoreError::DuplicateEntry(format!(
                    "({}, {})",
                    d.trustee, d.service
                )));
            }
            for record in d.history {
                tables
                    .direct
                    .record_interaction(&d.trustee, &d.service, record)?;
            }
        }
        for r in doc.recommended {
            if tables.recommended.get(&r.service, &r.peer).is_some() {
                return Err(StoreError::DuplicateEntry(format!(
                    "({}, {})",
                    r.service, r.peer
                )));
            }
            tables
                .recommended
                .upsert(&r.service, &r.peer, r.td, r.updated_at)?;
        }
        Ok(tables)
    }
}
