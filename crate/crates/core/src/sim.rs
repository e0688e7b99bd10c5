//! Deterministic simulation of a trust-gated file-sharing network.
//!
//! Each request runs the lookup protocol for every candidate provider:
//!
//! 1. the requester's Direct Trust Table;
//! 2. on a miss, chains through the peers listed in the requester's
//!    Recommended List Table for the service;
//! 3. on a miss, a broadcast: chains over every entity's direct table;
//! 4. otherwise the ignorance value 0.
//!
//! The best candidate (highest trust degree, then smallest id) is gated
//! against the service's required trust level. Granted requests sample an
//! SLA outcome from the provider's true profile and record the interaction.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{evaluate_recommendation, ChainError, TrustGraph, MAX_CHAIN_LENGTH_LIMIT};
use crate::render::decimal4;
use crate::store::{StoreError, TrustTables};
use crate::trust::{
    classify_level, resolve_trust_degree, satisfaction_level, DecayParams, InteractionRecord,
    ReputationBonuses, ReputationFactor, ReputationGrade, Resolution, ResolutionPath, SlaMetrics,
    SlaWeights, TrustDegree, TrustError, TrustLevel, DEFAULT_MAX_CHAIN_LENGTH,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("trace output: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SimError::Config(msg.into()))
}

/// True quality of a provider. Each metric is drawn from a beta distribution
/// with the given mean and `concentration` (alpha + beta); means of exactly
/// 0 or 1 always yield that value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlaProfile {
    pub availability: f64,
    pub processing_capacity: f64,
    pub recovery_time: f64,
    pub connectivity: f64,
    pub peak_load_performance: f64,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
}

fn default_concentration() -> f64 {
    20.0
}

impl SlaProfile {
    pub fn uniform(quality: f64) -> Self {
        SlaProfile {
            availability: quality,
            processing_capacity: quality,
            recovery_time: quality,
            connectivity: quality,
            peak_load_performance: quality,
            concentration: default_concentration(),
        }
    }

    fn means(&self) -> [f64; 5] {
        [
            self.availability,
            self.processing_capacity,
            self.recovery_time,
            self.connectivity,
            self.peak_load_performance,
        ]
    }

    fn validate(&self) -> Result<()> {
        for (name, q) in SlaMetrics::NAMES.iter().zip(self.means()) {
            if !(0.0..=1.0).contains(&q) {
                return invalid(format!("SLA quality {name} = {q} is outside [0, 1]"));
            }
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return invalid(format!(
                "SLA concentration {} must be positive",
                self.concentration
            ));
        }
        Ok(())
    }
}

/// Draws one SLA observation around the profile's means.
pub fn sample_sla<R: Rng + ?Sized>(profile: &SlaProfile, rng: &mut R) -> SlaMetrics {
    let mut out = [0.0; 5];
    for (slot, mean) in out.iter_mut().zip(profile.means()) {
        *slot = if mean <= 0.0 {
            0.0
        } else if mean >= 1.0 {
            1.0
        } else {
            let k = profile.concentration;
            Beta::new(mean * k, (1.0 - mean) * k)
                .expect("validated profile")
                .sample(rng)
                .clamp(0.0, 1.0)
        };
    }
    SlaMetrics::from_array(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityConfig {
    pub id: String,
    pub reputation: ReputationGrade,
    pub sla: SlaProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub id: String,
    pub required_level: TrustLevel,
    /// Entities offering the service. Seeds every entity's Recommended List
    /// Table.
    pub providers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub tick: u64,
    pub requester: String,
    pub service: String,
    /// Pins the provider instead of picking the most trusted candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
}

/// Random workload: for each tick in `0..ticks` a Poisson(`rate`) number of
/// requests, each from a uniformly chosen (requester, service) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrivals {
    pub ticks: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Scripted(Vec<Request>),
    Arrivals(Arrivals),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub entities: Vec<EntityConfig>,
    pub services: Vec<ServiceConfig>,
    pub schedule: Schedule,
    #[serde(default)]
    pub decay: DecayParams,
    #[serde(default)]
    pub rf: ReputationBonuses,
    #[serde(default)]
    pub sl_weights: SlaWeights,
    #[serde(default = "default_max_chain_length")]
    pub max_chain_length: usize,
    /// Interactions scoring at least this much count as positive.
    #[serde(default = "default_positive_threshold")]
    pub positive_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_cap: Option<usize>,
    /// List every service's providers in each Recommended List Table before
    /// tick 0. When off, entities only learn providers they have used.
    #[serde(default = "default_true")]
    pub seed_recommended_lists: bool,
}

fn default_true() -> bool {
    true
}

fn default_max_chain_length() -> usize {
    DEFAULT_MAX_CHAIN_LENGTH
}

fn default_positive_threshold() -> f64 {
    0.5
}

impl ScenarioConfig {
    pub fn from_json(document: &str) -> Result<Self> {
        serde_json::from_str(document).map_err(|e| SimError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.entities {
            if e.id.is_empty() {
                return invalid("entity id is empty");
            }
            if !ids.insert(e.id.as_str()) {
                return invalid(format!("duplicate entity id {}", e.id));
            }
            e.sla.validate()?;
        }
        let mut services = BTreeSet::new();
        for s in &self.services {
            if !services.insert(s.id.as_str()) {
                return invalid(format!("duplicate service id {}", s.id));
            }
            if s.providers.is_empty() {
                return invalid(format!("service {} has no providers", s.id));
            }
            for p in &s.providers {
                if !ids.contains(p.as_str()) {
                    return invalid(format!("service {} lists unknown provider {p}", s.id));
                }
            }
        }
        if !(2..=MAX_CHAIN_LENGTH_LIMIT).contains(&self.max_chain_length) {
            return invalid(format!(
                "max_chain_length {} is outside 2..=8",
                self.max_chain_length
            ));
        }
        if !(0.0..=1.0).contains(&self.positive_threshold) {
            return invalid(format!(
                "positive_threshold {} is outside [0, 1]",
                self.positive_threshold
            ));
        }
        if self.history_cap == Some(0) {
            return invalid("history_cap must be at least 1");
        }
        match &self.schedule {
            Schedule::Scripted(requests) => {
                for r in requests {
                    self.validate_request(r)?;
                }
            }
            Schedule::Arrivals(a) => {
                if !(a.rate.is_finite() && a.rate >= 0.0) {
                    return invalid(format!("arrival rate {} must be non-negative", a.rate));
                }
                if a.rate > 0.0 && self.eligible_pairs().is_empty() {
                    return invalid("no entity can request any service from another entity");
                }
            }
        }
        Ok(())
    }

    fn validate_request(&self, r: &Request) -> Result<()> {
        if self.entity(&r.requester).is_none() {
            return invalid(format!(
                "request at tick {} from unknown entity {}",
                r.tick, r.requester
            ));
        }
        let Some(service) = self.service(&r.service) else {
            return invalid(format!(
                "request at tick {} for unknown service {}",
                r.tick, r.service
            ));
        };
        match &r.provider {
            Some(p) if p == &r.requester => invalid(format!(
                "request at tick {}: {p} cannot serve itself",
                r.tick
            )),
            Some(p) if !service.providers.contains(p) => invalid(format!(
                "request at tick {}: {p} does not offer {}",
                r.tick, r.service
            )),
            Some(_) => Ok(()),
            None if service.providers.iter().all(|p| p == &r.requester) => invalid(format!(
                "request at tick {}: nobody but {} offers {}",
                r.tick, r.requester, r.service
            )),
            None => Ok(()),
        }
    }

    fn entity(&self, id: &str) -> Option<&EntityConfig> {
        self.entities.iter().find(|e| e.id == id)
    }

    fn service(&self, id: &str) -> Option<&ServiceConfig> {
        self.services.iter().find(|s| s.id == id)
    }

    /// (requester, service) pairs with at least one other provider.
    fn eligible_pairs(&self) -> Vec<(&str, &str)> {
        let mut pairs = Vec::new();
        for e in &self.entities {
            for s in &self.services {
                if s.providers.iter().any(|p| p != &e.id) {
                    pairs.push((e.id.as_str(), s.id.as_str()));
                }
            }
        }
        pairs
    }

    /// Scripted requests in tick order, or the generated workload.
    pub fn requests(&self) -> Vec<Request> {
        match &self.schedule {
            Schedule::Scripted(requests) => {
                let mut requests = requests.clone();
                requests.sort_by_key(|r| r.tick);
                requests
            }
            Schedule::Arrivals(a) => self.generate_arrivals(a),
        }
    }

    fn generate_arrivals(&self, a: &Arrivals) -> Vec<Request> {
        if a.rate == 0.0 {
            return Vec::new();
        }
        let pairs = self.eligible_pairs();
        let poisson = Poisson::new(a.rate).expect("validated rate");
        let mut rng = stream_rng(self.seed, ARRIVAL_STREAM);
        let mut out = Vec::new();
        for tick in 0..a.ticks {
            let n = poisson.sample(&mut rng) as u64;
            for _ in 0..n {
                let (requester, service) = pairs[rng.random_range(0..pairs.len())];
                out.push(Request {
                    tick,
                    requester: requester.to_owned(),
                    service: service.to_owned(),
                    provider: None,
                });
            }
        }
        out
    }
}

const ARRIVAL_STREAM: u64 = u64::MAX;

/// Independent generator per stream; the SLA draw of event `i` uses stream
/// `i`, so it depends only on the seed and the event's position.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Granted,
    Denied,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Granted => "granted",
            Decision::Denied => "denied",
        }
    }
}

/// Granted iff the trust degree's level is at least `required`.
pub fn gate_access(td: TrustDegree, required: TrustLevel) -> Decision {
    if classify_level(td) >= required {
        Decision::Granted
    } else {
        Decision::Denied
    }
}

/// Which step of the lookup protocol produced a recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommendationSource {
    /// Peers listed in the requester's Recommended List Table.
    List,
    /// Every entity, after a recommendation request broadcast.
    Broadcast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub tick: u64,
    pub requester: String,
    pub provider: String,
    pub service: String,
    pub path: ResolutionPath,
    pub source: Option<RecommendationSource>,
    pub td: TrustDegree,
    pub level: TrustLevel,
    pub required: TrustLevel,
    pub decision: Decision,
    pub sla: Option<SlaMetrics>,
    pub score: Option<f64>,
}

pub const TRACE_HEADER: [&str; 9] = [
    "tick",
    "requester",
    "provider",
    "service",
    "path",
    "td",
    "level",
    "decision",
    "score",
];

/// CSV rendering of a trace; numbers use [`decimal4`], `score` is empty for
/// denied requests.
pub fn trace_to_csv(trace: &[TraceRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record([
            r.tick.to_string(),
            r.requester.clone(),
            r.provider.clone(),
            r.service.clone(),
            r.path.as_str().to_owned(),
            decimal4(r.td.value()),
            r.level.numeral().to_owned(),
            r.decision.as_str().to_owned(),
            r.score.map(decimal4).unwrap_or_default(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep the graph each request was resolved against.
    pub record_graphs: bool,
}

/// The graph the chosen provider's trust was resolved against.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    /// Index into the trace.
    pub event: usize,
    pub tick: u64,
    pub graph: TrustGraph,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Vec<TraceRecord>,
    pub tables: BTreeMap<String, TrustTables>,
    pub graphs: Vec<GraphSnapshot>,
}

pub fn run(config: &ScenarioConfig) -> Result<SimOutput> {
    run_with(config, RunOptions::default())
}

pub fn run_with(config: &ScenarioConfig, options: RunOptions) -> Result<SimOutput> {
    config.validate()?;
    let mut sim = Simulation::new(config)?;
    let mut trace = Vec::new();
    let mut graphs = Vec::new();
    for (event, request) in config.requests().iter().enumerate() {
        let (record, graph) = sim.handle(event, request, options.record_graphs)?;
        if let Some(graph) = graph {
            graphs.push(GraphSnapshot {
                event,
                tick: record.tick,
                graph,
            });
        }
        trace.push(record);
    }
    Ok(SimOutput {
        trace,
        tables: sim.tables,
        graphs,
    })
}

struct Simulation<'a> {
    config: &'a ScenarioConfig,
    tables: BTreeMap<String, TrustTables>,
}

struct Candidate {
    provider: String,
    resolution: Resolution,
    source: Option<RecommendationSource>,
}

impl<'a> Simulation<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Self> {
        let mut tables = BTreeMap::new();
        for e in &config.entities {
            let mut t = TrustTables::new(e.id.clone());
            if let Some(cap) = config.history_cap {
                t.direct = t.direct.with_history_cap(cap)?;
            }
            if config.seed_recommended_lists {
                for s in &config.services {
                    for p in s.providers.iter().filter(|p| *p != &e.id) {
                        t.recommended.register_peer(&s.id, p, 0.0)?;
                    }
                }
            }
            tables.insert(e.id.clone(), t);
        }
        Ok(Simulation { config, tables })
    }

    fn reputation(&self, id: &str) -> ReputationFactor {
        let grade = self
            .config
            .entity(id)
            .map_or(ReputationGrade::Low, |e| e.reputation);
        self.config.rf.factor(grade)
    }

    fn graph_of<'t>(
        &self,
        owners: impl IntoIterator<Item = &'t str>,
        t_now: f64,
    ) -> Result<TrustGraph> {
        let tables = owners
            .into_iter()
            .filter_map(|id| self.tables.get(id))
            .map(|t| &t.direct);
        Ok(TrustGraph::from_tables(
            tables,
            t_now,
            self.config.decay,
            |id| self.reputation(id),
        )?)
    }

    fn handle(
        &mut self,
        event: usize,
        request: &Request,
        record_graph: bool,
    ) -> Result<(TraceRecord, Option<TrustGraph>)> {
        let cfg = self.config;
        let t_now = request.tick as f64;
        let service = cfg.service(&request.service).expect("validated");
        let candidates: Vec<String> = match &request.provider {
            Some(p) => vec![p.clone()],
            None => {
                let set: BTreeSet<&String> = service
                    .providers
                    .iter()
                    .filter(|p| *p != &request.requester)
                    .collect();
                set.into_iter().cloned().collect()
            }
        };

        let listed: Vec<String> = self.tables[&request.requester]
            .recommended
            .peers(&service.id)
            .map(str::to_owned)
            .collect();
        let mut list_graph: Option<TrustGraph> = None;
        let mut broadcast_graph: Option<TrustGraph> = None;

        let mut best: Option<Candidate> = None;
        for provider in candidates {
            let rf = self.reputation(&provider);
            let requester = self.tables.get_mut(&request.requester).expect("validated");
            let direct =
                requester
                    .direct
                    .lookup_direct(&provider, &service.id, t_now, cfg.decay, rf)?;
            let candidate = if let Some(td) = direct {
                let n_d = requester
                    .direct
                    .entry(&provider, &service.id)
                    .map_or(0, |e| e.n_total());
                Candidate {
                    resolution: resolve_trust_degree(n_d, 0, Some(td), None)?,
                    provider,
                    source: None,
                }
            } else {
                let graph = match list_graph.take() {
                    Some(g) => g,
                    None => self.graph_of(
                        std::iter::once(request.requester.as_str())
                            .chain(listed.iter().map(String::as_str)),
                        t_now,
                    )?,
                };
                let mut found = evaluate_recommendation(
                    &graph,
                    &request.requester,
                    &provider,
                    &service.id,
                    cfg.max_chain_length,
                )?
                .map(|r| (r, RecommendationSource::List));
                list_graph = Some(graph);
                if found.is_none() {
                    let graph = match broadcast_graph.take() {
                        Some(g) => g,
                        None => self.graph_of(cfg.entities.iter().map(|e| e.id.as_str()), t_now)?,
                    };
                    found = evaluate_recommendation(
                        &graph,
                        &request.requester,
                        &provider,
                        &service.id,
                        cfg.max_chain_length,
                    )?
                    .map(|r| (r, RecommendationSource::Broadcast));
                    broadcast_graph = Some(graph);
                }
                let requester = self.tables.get_mut(&request.requester).expect("validated");
                if let Some((rec, _)) = &found {
                    requester.recommended.update_recommended(
                        &service.id,
                        &provider,
                        rec.td,
                        t_now,
                    )?;
                }
                let n_r = found.as_ref().map_or(0, |(r, _)| r.chain_count as u64);
                Candidate {
                    resolution: resolve_trust_degree(0, n_r, None, found.map(|(r, _)| r.td))?,
                    provider,
                    source: found.map(|(_, s)| s),
                }
            };
            // Candidates arrive in id order, so a strict comparison keeps the
            // smallest id among equals.
            if best
                .as_ref()
                .is_none_or(|b| candidate.resolution.td > b.resolution.td)
            {
                best = Some(candidate);
            }
        }
        let chosen = best.expect("validated: at least one candidate");

        // Snapshot the evidence before this request's own interaction lands.
        let graph = if !record_graph {
            None
        } else if chosen.source == Some(RecommendationSource::List) {
            list_graph
        } else {
            match broadcast_graph {
                Some(g) => Some(g),
                None => Some(self.graph_of(cfg.entities.iter().map(|e| e.id.as_str()), t_now)?),
            }
        };

        let level = classify_level(chosen.resolution.td);
        let decision = gate_access(chosen.resolution.td, service.required_level);
        let (mut sla, mut score) = (None, None);
        if decision == Decision::Granted {
            let profile = &cfg.entity(&chosen.provider).expect("validated").sla;
            let metrics = sample_sla(profile, &mut stream_rng(cfg.seed, event as u64));
            let s = satisfaction_level(&metrics, &cfg.sl_weights)?;
            let record = InteractionRecord::new(t_now, s, s >= cfg.positive_threshold)?;
            let requester = self.tables.get_mut(&request.requester).expect("validated");
            requester
                .direct
                .record_interaction(&chosen.provider, &service.id, record)?;
            requester
                .recommended
                .register_peer(&service.id, &chosen.provider, t_now)?;
            sla = Some(metrics);
            score = Some(s);
        }

        let record = TraceRecord {
            tick: request.tick,
            requester: request.requester.clone(),
            provider: chosen.provider,
            service: service.id.clone(),
            path: chosen.resolution.path,
            source: chosen.source,
            td: chosen.resolution.td,
            level,
            required: service.required_level,
            decision,
            sla,
            score,
        };
        Ok((record, graph))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn td(v: f64) -> TrustDegree {
        TrustDegree::new(v).unwrap()
    }

    fn entity(id: &str, grade: ReputationGrade, quality: f64) -> EntityConfig {
        EntityConfig {
            id: id.into(),
            reputation: grade,
            sla: SlaProfile::uniform(quality),
        }
    }

    fn req(tick: u64, requester: &str, service: &str, provider: Option<&str>) -> Request {
        Request {
            tick,
            requester: requester.into(),
            service: service.into(),
            provider: provider.map(Into::into),
        }
    }

    fn config(requests: Vec<Request>) -> ScenarioConfig {
        ScenarioConfig {
            seed: 11,
            entities: vec![
                entity("a", ReputationGrade::Low, 0.9),
                entity("b", ReputationGrade::Low, 0.9),
                entity("c", ReputationGrade::Low, 0.9),
            ],
            services: vec![
                ServiceConfig {
                    id: "open".into(),
                    required_level: TrustLevel::NoOpinion,
                    providers: vec!["b".into(), "c".into()],
                },
                ServiceConfig {
                    id: "vault".into(),
                    required_level: TrustLevel::LowDistrust,
                    providers: vec!["b".into()],
                },
            ],
            schedule: Schedule::Scripted(requests),
            decay: DecayParams::new(1, 5.0).unwrap(),
            rf: ReputationBonuses::default(),
            sl_weights: SlaWeights::default(),
            max_chain_length: 4,
            positive_threshold: 0.5,
            history_cap: None,
            seed_recommended_lists: true,
        }
    }

    #[test]
    fn gate_examples() {
        assert_eq!(
            gate_access(td(0.5), TrustLevel::MediumTrust),
            Decision::Granted
        );
        assert_eq!(
            gate_access(td(0.4), TrustLevel::MediumTrust),
            Decision::Denied
        );
        assert_eq!(
            gate_access(td(1.0), TrustLevel::CompleteTrust),
            Decision::Granted
        );
        assert_eq!(
            gate_access(td(0.0), TrustLevel::NoOpinion),
            Decision::Granted
        );
        assert_eq!(
            gate_access(td(0.0), TrustLevel::LowDistrust),
            Decision::Denied
        );
    }

    #[test]
    fn pinned_profiles_sample_exactly() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..20 {
            assert_eq!(
                sample_sla(&SlaProfile::uniform(1.0), &mut rng),
                SlaMetrics::uniform(1.0)
            );
            assert_eq!(
                sample_sla(&SlaProfile::uniform(0.0), &mut rng),
                SlaMetrics::uniform(0.0)
            );
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let profile = SlaProfile::uniform(0.7);
        let draw = |seed, stream| {
            let mut rng = stream_rng(seed, stream);
            (0..5)
                .map(|_| sample_sla(&profile, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3, 9), draw(3, 9));
        assert_ne!(draw(3, 9), draw(3, 10));
        assert_ne!(draw(3, 9), draw(4, 9));
        for m in draw(3, 9) {
            m.validate().unwrap();
        }
    }

    #[test]
    fn first_request_is_ignorance() {
        let out = run(&config(vec![
            req(0, "a", "vault", None),
            req(0, "a", "open", None),
        ]))
        .unwrap();
        let denied = &out.trace[0];
        assert_eq!(denied.path, ResolutionPath::Ignorance);
        assert_eq!(
            (denied.td, denied.level),
            (TrustDegree::ZERO, TrustLevel::NoOpinion)
        );
        assert_eq!(denied.decision, Decision::Denied);
        assert_eq!(denied.score, None);

        // All candidates tie at 0; the smallest id wins.
        let open = &out.trace[1];
        assert_eq!(open.provider, "b");
        assert_eq!(open.decision, Decision::Granted);
        assert!(open.score.is_some());
    }

    #[test]
    fn second_request_uses_direct_history() {
        let cfg = config(vec![
            req(0, "a", "open", Some("b")),
            req(3, "a", "open", Some("b")),
        ]);
        let out = run(&cfg).unwrap();
        let second = &out.trace[1];
        assert_eq!(second.path, ResolutionPath::Direct);

        let mut table = crate::store::DirectTrustTable::new("a");
        table
            .record_interaction(
                "b",
                "open",
                out.tables["a"].direct.entry("b", "open").unwrap().history()[0],
            )
            .unwrap();
        let expect = table
            .lookup_direct("b", "open", 3.0, cfg.decay, ReputationFactor::NONE)
            .unwrap();
        assert_eq!(Some(second.td), expect);
    }

    #[test]
    fn chains_answer_when_direct_is_missing() {
        let cfg = config(vec![
            req(0, "a", "open", Some("b")),
            req(1, "b", "open", Some("c")),
            req(2, "a", "open", Some("c")),
        ]);
        let out = run_with(
            &cfg,
            RunOptions {
                record_graphs: true,
            },
        )
        .unwrap();
        let third = &out.trace[2];
        assert_eq!(third.path, ResolutionPath::Recommended);
        assert_eq!(third.source, Some(RecommendationSource::List));
        let rec = evaluate_recommendation(&out.graphs[2].graph, "a", "c", "open", 4)
            .unwrap()
            .unwrap();
        assert_eq!(rec.td, third.td);
        assert_eq!(rec.chain_count, 1);
        let listed = out.tables["a"].recommended.get("open", "c").unwrap();
        assert_eq!(listed.td, Some(third.td));
    }

    #[test]
    fn providers_are_learned_by_use() {
        let mut cfg = config(vec![
            req(0, "a", "open", Some("b")),
            req(1, "b", "open", Some("c")),
            req(2, "a", "open", Some("c")),
        ]);
        cfg.seed_recommended_lists = false;
        let out = run(&cfg).unwrap();
        // a only knows b from using it; b answers from the list.
        assert_eq!(out.trace[2].source, Some(RecommendationSource::List));
        let peers: Vec<&str> = out.tables["a"].recommended.peers("open").collect();
        assert_eq!(peers, vec!["b", "c"]);
    }

    #[test]
    fn broadcast_when_list_is_empty() {
        let mut cfg = config(vec![]);
        cfg.seed_recommended_lists = false;
        cfg.services[0].providers = vec!["a".into(), "b".into(), "c".into()];
        cfg.schedule = Schedule::Scripted(vec![
            req(0, "a", "open", Some("b")),
            req(1, "c", "open", Some("a")),
            // c lists a (used at tick 1) so this one resolves from the list.
            req(2, "c", "open", Some("b")),
        ]);
        let out = run(&cfg).unwrap();
        assert_eq!(out.trace[2].source, Some(RecommendationSource::List));

        // Without having used a, c knows no peers and must broadcast.
        let mut cfg2 = cfg.clone();
        cfg2.entities.push(entity("d", ReputationGrade::Low, 0.9));
        cfg2.services[0].providers.push("d".into());
        cfg2.schedule = Schedule::Scripted(vec![
            req(0, "a", "open", Some("b")),
            req(1, "d", "open", Some("a")),
            req(2, "c", "open", Some("d")),
            req(3, "c", "open", Some("b")),
        ]);
        let out = run_with(
            &cfg2,
            RunOptions {
                record_graphs: true,
            },
        )
        .unwrap();
        // c -> d was recorded at tick 2, c lists d but not a: chain c>d>a>b
        // needs a's table.
        let last = &out.trace[3];
        assert_eq!(last.path, ResolutionPath::Recommended);
        assert_eq!(last.source, Some(RecommendationSource::Broadcast));
        let rec = evaluate_recommendation(&out.graphs[3].graph, "c", "b", "open", 4)
            .unwrap()
            .unwrap();
        assert_eq!(rec.td, last.td);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut dup = config(vec![]);
        dup.entities.push(entity("a", ReputationGrade::High, 0.5));
        assert!(matches!(run(&dup), Err(SimError::Config(_))));

        let unknown = config(vec![req(0, "zed", "open", None)]);
        assert!(matches!(run(&unknown), Err(SimError::Config(_))));

        let self_serve = config(vec![req(0, "b", "vault", None)]);
        assert!(matches!(run(&self_serve), Err(SimError::Config(_))));

        let not_offered = config(vec![req(0, "a", "vault", Some("c"))]);
        assert!(matches!(run(&not_offered), Err(SimError::Config(_))));

        let mut bad_len = config(vec![]);
        bad_len.max_chain_length = 9;
        assert!(matches!(run(&bad_len), Err(SimError::Config(_))));

        let mut bad_sla = config(vec![]);
        bad_sla.entities[0].sla.connectivity = 1.2;
        assert!(matches!(run(&bad_sla), Err(SimError::Config(_))));

        assert!(matches!(
            ScenarioConfig::from_json("{\"seed\": 1,"),
            Err(SimError::Parse { .. })
        ));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = config(vec![
            req(2, "a", "open", None),
            req(1, "c", "vault", Some("b")),
        ]);
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let ticks: Vec<u64> = back.requests().iter().map(|r| r.tick).collect();
        assert_eq!(ticks, vec![1, 2]);

        let arrivals =
            r#"{"seed":1,"entities":[],"services":[],"schedule":{"ticks":5,"rate":0.0}}"#;
        let cfg = ScenarioConfig::from_json(arrivals).unwrap();
        assert_eq!(
            cfg.schedule,
            Schedule::Arrivals(Arrivals {
                ticks: 5,
                rate: 0.0
            })
        );
        assert_eq!(cfg.decay, DecayParams::default());
        assert!(run(&cfg).unwrap().trace.is_empty());
    }

    #[test]
    fn csv_layout() {
        let out = run(&config(vec![
            req(0, "a", "vault", None),
            req(1, "a", "open", Some("c")),
        ]))
        .unwrap();
        let csv = trace_to_csv(&out.trace).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("tick,requester,provider,service,path,td,level,decision,score")
        );
        assert_eq!(lines.next(), Some("0,a,b,vault,ignorance,0.0,I,denied,"));
        let granted = lines.next().unwrap();
        assert!(
            granted.starts_with("1,a,c,open,ignorance,0.0,I,granted,0."),
            "{granted}"
        );
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn granted_requests_record_exactly_once() {
        let mut cfg = config(vec![]);
        cfg.schedule = Schedule::Arrivals(Arrivals {
            ticks: 200,
            rate: 1.5,
        });
        let out = run(&cfg).unwrap();
        let granted = out
            .trace
            .iter()
            .filter(|r| r.decision == Decision::Granted)
            .count();
        let recorded: usize = out
            .tables
            .values()
            .flat_map(|t| t.direct.entries())
            .map(|(_, e)| e.history().len())
            .sum();
        assert_eq!(granted, recorded);
        assert!(out.trace.iter().any(|r| r.decision == Decision::Denied));
    }
}
