//! The town tick loop: perceive, plan (policy first), act, and talk.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::wander::{mix_seed, wander_inject};
use super::{ActivityLedger, PolicyStats, SimError, SimulationConfig, Toggles};
use crate::gateway::{Category, Gateway, PromptRequest, UsageReport};
use crate::household::pipeline::strip_list_marker;
use crate::household::{ActionCommand, EnvironmentSnapshot, ExecError};
use crate::memory::AgentMemory;
use crate::policy::{decompose, derive_condition, CommitOutcome, Planner, PolicyStore};
use crate::scenario::{parse_lifestyle, AgentProfile, TownScenario};
use crate::social::{
    absorb_events, build_dialogue_prompt, quantize, render_transcript, update_after_conversation,
    DyadTable, RelationshipScale, Turn,
};

pub const END_TOKEN: &str = "<END>";
/// Key prefix of the relationship-summary request made per turn when social
/// memory is off.
pub const RELATION_KEY_PREFIX: &str = "relation|";
const ACTIVITY_IMPORTANCE: u8 = 3;
const DIALOGUE_IMPORTANCE: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Policy,
    Generated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub tick: u64,
    pub time: String,
    pub agent: String,
    pub intent: String,
    pub activity: String,
    pub source: PlanSource,
    pub actions: Vec<ActionCommand>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub tick: u64,
    pub time: String,
    pub a: String,
    pub b: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadSummary {
    pub a: String,
    pub b: String,
    pub relationship: String,
    pub feeling: String,
    pub score: u8,
    pub summary_events: Vec<String>,
    pub last_updated: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub name: String,
    pub initials: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySummary {
    pub new: usize,
    pub cumulative: usize,
    /// Activities per agent in the order they happened.
    pub per_agent: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub seed: u64,
    pub days: u32,
    pub toggles: Toggles,
    pub tokens: UsageReport,
    pub policy: PolicyStats,
    pub agents: Vec<AgentSummary>,
    pub dyads: Vec<DyadSummary>,
    pub activities: ActivitySummary,
    pub schedule: Vec<ScheduleEntry>,
    pub dialogues: Vec<DialogueRecord>,
    pub errors: Vec<String>,
}

impl SimulationReport {
    /// Canonical JSON; identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

struct Town<'a> {
    scenario: &'a TownScenario,
    config: &'a SimulationConfig,
    gateway: &'a Gateway,
    policy: &'a mut PolicyStore,
    start: NaiveDate,
    world: EnvironmentSnapshot,
    memories: BTreeMap<u32, AgentMemory>,
    dyads: DyadTable,
    stats: PolicyStats,
    schedule: Vec<ScheduleEntry>,
    dialogues: Vec<DialogueRecord>,
    errors: Vec<String>,
}

/// Runs the town for `config.days` days.
///
/// The policy store is consulted and extended only when the lifestyle
/// toggle is on; persisting it is up to the caller. Activities are tracked
/// in `ledger`.
pub fn run_town(
    scenario: &TownScenario,
    config: &SimulationConfig,
    gateway: &Gateway,
    policy: &mut PolicyStore,
    ledger: &mut ActivityLedger,
) -> Result<SimulationReport, SimError> {
    config.validate()?;
    scenario.validate()?;
    let embedder = policy.embedder().clone();
    let mut memories = BTreeMap::new();
    for agent in &scenario.agents {
        let mut memory = AgentMemory::new(embedder.clone(), config.memory.clone());
        for seed in &agent.memories {
            memory.add_event(seed.text.clone(), 0, seed.importance)?;
        }
        memories.insert(agent.id, memory);
    }
    let mut dyads = DyadTable::default();
    for r in &scenario.relationships {
        let dyad = dyads.get_or_init(&r.a, &r.b)?;
        dyad.relationship = r.relationship.clone();
        dyad.feeling = r.feeling.clone();
    }
    let start = NaiveDate::parse_from_str(&scenario.start_date, "%Y-%m-%d")
        .map_err(|e| crate::scenario::ConfigError::Invalid(e.to_string()))?;
    let mut town = Town {
        scenario,
        config,
        gateway,
        policy,
        start,
        world: scenario.world()?,
        memories,
        dyads,
        stats: PolicyStats::default(),
        schedule: Vec::new(),
        dialogues: Vec::new(),
        errors: Vec::new(),
    };
    town.run()?;

    let mut per_agent: BTreeMap<String, Vec<String>> = scenario
        .agents
        .iter()
        .map(|a| (a.name.clone(), Vec::new()))
        .collect();
    for entry in &town.schedule {
        if entry.source != PlanSource::Failed {
            per_agent
                .entry(entry.agent.clone())
                .or_default()
                .push(entry.activity.clone());
        }
    }
    let new = ledger.track(&per_agent)?;
    let scale = RelationshipScale::default();
    let dyads = town
        .dyads
        .iter()
        .map(|d| DyadSummary {
            a: d.pair.0.clone(),
            b: d.pair.1.clone(),
            relationship: d.relationship.clone(),
            feeling: d.feeling.clone(),
            score: quantize(&d.relationship, &scale, &embedder),
            summary_events: d.summary_events.iter().map(|e| e.text.clone()).collect(),
            last_updated: d.last_updated,
        })
        .collect();
    Ok(SimulationReport {
        scenario: scenario.name.clone(),
        seed: config.seed,
        days: config.days,
        toggles: config.toggles,
        tokens: gateway.usage_report(),
        policy: town.stats,
        agents: scenario
            .agents
            .iter()
            .map(|a| AgentSummary {
                name: a.name.clone(),
                initials: a.initials(),
            })
            .collect(),
        dyads,
        activities: ActivitySummary {
            new,
            cumulative: ledger.cumulative(),
            per_agent,
        },
        schedule: town.schedule,
        dialogues: town.dialogues,
        errors: town.errors,
    })
}

impl Town<'_> {
    fn time_of(&self, tick: u64) -> String {
        let minutes = tick as i64 * i64::from(self.scenario.minutes_per_tick());
        let at =
            self.start.and_hms_opt(0, 0, 0).expect("midnight exists") + Duration::minutes(minutes);
        at.format("%Y-%m-%d %H:%M:%S").to_string()
    }

    fn run(&mut self) -> Result<(), SimError> {
        let scenario = self.scenario;
        let mpt = scenario.minutes_per_tick();
        let mut agents: Vec<&AgentProfile> = scenario.agents.iter().collect();
        agents.sort_by_key(|a| a.id);
        let mut plans: BTreeMap<u32, BTreeMap<u32, String>> = BTreeMap::new();
        for agent in &agents {
            plans.insert(
                agent.id,
                parse_lifestyle(&agent.lifestyle, mpt)?
                    .into_iter()
                    .collect(),
            );
        }
        let mut encounters: BTreeMap<u32, Vec<(&str, &str)>> = BTreeMap::new();
        for e in &scenario.encounters {
            encounters
                .entry(scenario.slot(&e.time)?)
                .or_default()
                .push((&e.a, &e.b));
        }
        let tpd = scenario.ticks_per_day;
        for day in 0..self.config.days {
            for slot in 0..tpd {
                let tick = u64::from(day * tpd + slot);
                for agent in &agents {
                    if let Some(intent) = plans[&agent.id].get(&slot) {
                        self.step(agent, intent, tick)?;
                    }
                }
                for &(a, b) in encounters.get(&slot).into_iter().flatten() {
                    // Encounter names are checked by validate().
                    let pa = scenario.agent(a).expect("validated agent");
                    let pb = scenario.agent(b).expect("validated agent");
                    if self.world.agent_positions.get(&pa.id)
                        == self.world.agent_positions.get(&pb.id)
                    {
                        self.dialogue(pa, pb, tick)?;
                    } else {
                        log::debug!("{a} and {b} are apart at tick {tick}; no conversation");
                    }
                }
            }
        }
        Ok(())
    }

    /// What `agent` can perceive: its own rooms and their items.
    fn observe(&self, agent: &AgentProfile) -> EnvironmentSnapshot {
        let mut rooms: BTreeSet<&str> = agent.rooms.iter().map(String::as_str).collect();
        let here = self.world.agent_positions.get(&agent.id).cloned();
        if let Some(room) = &here {
            rooms.insert(room);
        }
        EnvironmentSnapshot {
            rooms: rooms.iter().map(|r| r.to_string()).collect(),
            catalog: self.world.catalog.clone(),
            items: self
                .world
                .items
                .iter()
                .filter(|i| rooms.contains(i.room.as_str()))
                .cloned()
                .collect(),
            agent_positions: here.map(|r| (agent.id, r)).into_iter().collect(),
            held_items: self
                .world
                .held_items
                .get(&agent.id)
                .map(|h| (agent.id, h.clone()))
                .into_iter()
                .collect(),
            postures: self
                .world
                .postures
                .get(&agent.id)
                .map(|p| (agent.id, *p))
                .into_iter()
                .collect(),
        }
    }

    fn execute_all(&mut self, actions: &[ActionCommand]) -> Result<(), (usize, ExecError)> {
        for (i, cmd) in actions.iter().enumerate() {
            self.world.execute(cmd).map_err(|e| (i, e))?;
        }
        Ok(())
    }

    /// Logs a step failure, or ends the run if the backend itself failed.
    fn note(&mut self, error: SimError, context: String) -> Result<(), SimError> {
        if error.is_backend_failure() {
            return Err(error);
        }
        self.errors.push(format!("{context}: {error}"));
        Ok(())
    }

    fn remember(
        &mut self,
        agent: &AgentProfile,
        text: String,
        tick: u64,
        importance: u8,
    ) -> Result<(), SimError> {
        self.memories
            .get_mut(&agent.id)
            .expect("memory per agent")
            .add_event(text, tick, importance)?;
        Ok(())
    }

    fn step(&mut self, agent: &AgentProfile, intent: &str, tick: u64) -> Result<(), SimError> {
        let obs = self.observe(agent);
        if self.config.toggles.lifestyle_policy {
            if let Some(hit) = self.policy.lookup(intent, &obs)? {
                match hit.condition.bind(&obs, agent.id) {
                    Some(actions) => match self.execute_all(&actions) {
                        Ok(()) => {
                            self.stats.hits += 1;
                            self.record(
                                agent,
                                intent,
                                hit.plan_text,
                                PlanSource::Policy,
                                actions,
                                tick,
                            )?;
                            return Ok(());
                        }
                        Err((i, e)) => self.errors.push(format!(
                            "tick {tick} {}: reused action {} failed: {e}",
                            agent.name, actions[i]
                        )),
                    },
                    None => log::warn!(
                        "cannot bind cached plan {:?} for {}",
                        hit.plan_text,
                        agent.name
                    ),
                }
            }
            self.stats.misses += 1;
        }
        let plan = match self.generate_plan(agent, intent, tick, &obs) {
            Ok(plan) => plan,
            Err(e) => {
                self.note(
                    e,
                    format!("tick {tick} {}: plan generation failed", agent.name),
                )?;
                return self.record(
                    agent,
                    intent,
                    String::new(),
                    PlanSource::Failed,
                    vec![],
                    tick,
                );
            }
        };
        let planner = Planner {
            agent: agent.id,
            label: &agent.name,
        };
        let actions = match decompose(&plan, &obs, self.gateway, planner) {
            Ok((_, actions)) => actions,
            Err(e) => {
                self.note(e.into(), format!("tick {tick} {}", agent.name))?;
                return self.record(agent, intent, plan, PlanSource::Failed, vec![], tick);
            }
        };
        let condition = derive_condition(&actions, &obs)?;
        if let Err((i, e)) = self.execute_all(&actions) {
            self.errors.push(format!(
                "tick {tick} {}: action {} failed: {e}",
                agent.name, actions[i]
            ));
            return self.record(agent, intent, plan, PlanSource::Failed, actions, tick);
        }
        if self.config.toggles.lifestyle_policy
            && self.policy.commit(intent, condition, tick)? != CommitOutcome::Duplicate
        {
            self.stats.commits += 1;
        }
        self.record(agent, intent, plan, PlanSource::Generated, actions, tick)
    }

    fn record(
        &mut self,
        agent: &AgentProfile,
        intent: &str,
        activity: String,
        source: PlanSource,
        actions: Vec<ActionCommand>,
        tick: u64,
    ) -> Result<(), SimError> {
        if source != PlanSource::Failed {
            self.remember(agent, activity.clone(), tick, ACTIVITY_IMPORTANCE)?;
        }
        self.schedule.push(ScheduleEntry {
            tick,
            time: self.time_of(tick),
            agent: agent.name.clone(),
            intent: intent.to_string(),
            activity,
            source,
            actions,
        });
        Ok(())
    }

    fn generate_plan(
        &self,
        agent: &AgentProfile,
        intent: &str,
        tick: u64,
        obs: &EnvironmentSnapshot,
    ) -> Result<String, SimError> {
        let memory = &self.memories[&agent.id];
        let mut prompt = format!(
            "{}\nIt is {}. You are in {}.\nYour routine says: {intent}.\nRelevant memories:\n",
            agent.profile_line(),
            self.time_of(tick),
            obs.agent_positions
                .get(&agent.id)
                .map_or("an unknown place", String::as_str),
        );
        for event in memory.retrieve(intent, self.config.plan_memories, tick)? {
            prompt.push_str("- ");
            prompt.push_str(&event.text);
            prompt.push('\n');
        }
        if self.config.toggles.mind_wandering {
            prompt = wander_inject(memory, &prompt, mix_seed(self.config.seed, agent.id, tick));
        }
        prompt.push_str("Describe in one short sentence what you will do now.");
        let reply = self.gateway.complete(
            &PromptRequest::new(Category::PlanGeneration, prompt)
                .key(format!("{}|{intent}", agent.name))
                .agent(&agent.name),
        )?;
        let plan = reply
            .text
            .lines()
            .map(strip_list_marker)
            .find(|l| !l.is_empty())
            .unwrap_or(intent)
            .to_string();
        Ok(plan)
    }

    fn dialogue_prompt(
        &mut self,
        speaker: &AgentProfile,
        listener: &AgentProfile,
        transcript: &[Turn],
        tick: u64,
    ) -> Result<PromptRequest, SimError> {
        let last = transcript
            .last()
            .map(|t| format!("{}: {}", t.speaker, t.text))
            .unwrap_or_default();
        let memory = &self.memories[&speaker.id];
        if self.config.toggles.social_memory {
            let query = transcript
                .last()
                .map_or(listener.name.as_str(), |t| t.text.as_str());
            let dyad = self.dyads.get_or_init(&speaker.name, &listener.name)?;
            absorb_events(dyad, query, memory, tick, self.gateway, &self.config.social)?;
            return Ok(build_dialogue_prompt(
                dyad,
                &speaker.name,
                &speaker.profile_line(),
                &last,
            ));
        }
        // Without social memory each turn first asks for a relationship
        // summary from memories about the listener, then retrieves again
        // with that summary and the last turn.
        let k = self.config.raw_dialogue_memories;
        let bullets = |events: &[&crate::memory::MemoryEvent]| -> String {
            if events.is_empty() {
                return "- none\n".to_string();
            }
            events.iter().map(|e| format!("- {}\n", e.text)).collect()
        };
        let about = memory.retrieve(&listener.name, k, tick)?;
        let relation = self
            .gateway
            .complete(
                &PromptRequest::new(
                    Category::DialogueTurn,
                    format!(
                        "{}\nWhat you remember about {}:\n{}\
                         Summarize your relationship with {} in one or two sentences.",
                        speaker.profile_line(),
                        listener.name,
                        bullets(&about),
                        listener.name,
                    ),
                )
                .key(format!(
                    "{RELATION_KEY_PREFIX}{}|{}",
                    speaker.name, listener.name
                ))
                .agent(&speaker.name),
            )?
            .text;
        let query = transcript
            .last()
            .map_or(listener.name.as_str(), |t| t.text.as_str());
        let context = memory.retrieve(&format!("{relation} {query}"), k, tick)?;
        let prompt = format!(
            "{}\nYou are talking with {}.\nWhat you think of them: {}\nMemories that may matter:\n{}\
             Conversation so far:\n{}Reply with your next line, or {END_TOKEN} to finish.",
            speaker.profile_line(),
            listener.name,
            relation.trim(),
            bullets(&context),
            if transcript.is_empty() { "(you speak first)\n".to_string() } else { render_transcript(transcript) },
        );
        Ok(PromptRequest::new(Category::DialogueTurn, prompt))
    }

    fn dialogue(&mut self, a: &AgentProfile, b: &AgentProfile, tick: u64) -> Result<(), SimError> {
        let key = self.dyads.get_or_init(&a.name, &b.name)?.key();
        let mut transcript: Vec<Turn> = Vec::new();
        let mut complete = true;
        for turn in 0..self.config.max_dialogue_turns {
            let (speaker, listener) = if turn % 2 == 0 { (a, b) } else { (b, a) };
            let request = match self.dialogue_prompt(speaker, listener, &transcript, tick) {
                Ok(r) => r,
                Err(e) => {
                    self.note(e, format!("tick {tick} {key}"))?;
                    complete = false;
                    break;
                }
            };
            let request = request.key(format!("{key}|t{turn}")).agent(&speaker.name);
            match self.gateway.complete(&request) {
                Ok(reply) => {
                    let ended = reply.text.contains(END_TOKEN);
                    let text = reply.text.replace(END_TOKEN, "").trim().to_string();
                    transcript.push(Turn::new(&speaker.name, text));
                    if ended {
                        break;
                    }
                }
                Err(e) => {
                    self.note(e.into(), format!("tick {tick} {key} turn {turn}"))?;
                    complete = false;
                    break;
                }
            }
        }
        if transcript.is_empty() {
            return Ok(());
        }
        if self.config.toggles.social_memory && complete {
            let dyad = self.dyads.get_or_init(&a.name, &b.name)?;
            if let Err(e) = update_after_conversation(dyad, &transcript, tick, self.gateway) {
                self.note(e.into(), format!("tick {tick} {key}"))?;
            }
        }
        for (me, other) in [(a, b), (b, a)] {
            let opening = &transcript[0].text;
            self.remember(
                me,
                format!("talked with {}: {opening}", other.name),
                tick,
                DIALOGUE_IMPORTANCE,
            )?;
        }
        self.dialogues.push(DialogueRecord {
            tick,
            time: self.time_of(tick),
            a: a.name.clone(),
            b: b.name.clone(),
            turns: transcript,
        });
        Ok(())
    }
}
