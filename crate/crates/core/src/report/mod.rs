//! Ablation matrix and analysis exports.

pub mod curve;
pub mod evaluator;
pub mod relmap;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curve::ActivityCurve;
pub use evaluator::{build_evaluator_prompt, EvaluatorInput, EvaluatorKind, EvaluatorPrompt};
pub use relmap::RelationshipMap;

use crate::embedding::Embedder;
use crate::gateway::{Category, Gateway};
use crate::policy::PolicyStore;
use crate::scenario::{ConfigError, TownScenario};
use crate::sim::{run_town, ActivityLedger, SimError, SimulationConfig, SimulationReport, Toggles};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed export: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationArm {
    Baseline,
    LifestyleOnly,
    SocialOnly,
    Full,
}

impl AblationArm {
    pub const ALL: [AblationArm; 4] = [
        AblationArm::Baseline,
        AblationArm::LifestyleOnly,
        AblationArm::SocialOnly,
        AblationArm::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationArm::Baseline => "baseline",
            AblationArm::LifestyleOnly => "lifestyle-only",
            AblationArm::SocialOnly => "social-only",
            AblationArm::Full => "full",
        }
    }

    /// The arm's toggles; mind wandering is not part of the matrix.
    pub fn toggles(self, mind_wandering: bool) -> Toggles {
        let (lifestyle_policy, social_memory) = match self {
            AblationArm::Baseline => (false, false),
            AblationArm::LifestyleOnly => (true, false),
            AblationArm::SocialOnly => (false, true),
            AblationArm::Full => (true, true),
        };
        Toggles {
            lifestyle_policy,
            social_memory,
            mind_wandering,
        }
    }
}

impl fmt::Display for AblationArm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationArm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AblationArm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown arm {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: AblationArm,
    pub toggles: Toggles,
    pub total: u64,
    /// `total` over the baseline total.
    pub ratio: f64,
    pub by_category: BTreeMap<Category, u64>,
    /// Per-category ratio; `None` where the baseline spent nothing.
    pub category_ratio: BTreeMap<Category, Option<f64>>,
    pub report: SimulationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub scenario: String,
    pub seed: u64,
    pub days: u32,
    /// Whether a warm-up pass had to build the policy store.
    pub warmed_up: bool,
    pub arms: Vec<ArmResult>,
}

impl AblationTable {
    pub fn arm(&self, arm: AblationArm) -> &ArmResult {
        self.arms
            .iter()
            .find(|r| r.arm == arm)
            .expect("every arm is run")
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["arm".to_string(), "total".into(), "ratio".into()];
        header.extend(Category::ALL.iter().map(|c| c.to_string()));
        header.extend(Category::ALL.iter().map(|c| format!("{c}_ratio")));
        w.write_record(&header)?;
        for row in &self.arms {
            let mut rec = vec![
                row.arm.to_string(),
                row.total.to_string(),
                format!("{:.4}", row.ratio),
            ];
            rec.extend(Category::ALL.iter().map(|c| row.by_category[c].to_string()));
            rec.extend(Category::ALL.iter().map(|c| {
                row.category_ratio[c]
                    .map(|r| format!("{r:.4}"))
                    .unwrap_or_default()
            }));
            w.write_record(&rec)?;
        }
        relmap::finish(w)
    }
}

/// Fills a policy store by running the scenario with every module on.
pub fn warm_up(
    scenario: &TownScenario,
    config: &SimulationConfig,
    gateway: &Gateway,
) -> Result<PolicyStore, SimError> {
    let mut store = PolicyStore::new(config.policy.clone(), Embedder::default())?;
    let config = SimulationConfig {
        toggles: Toggles {
            lifestyle_policy: true,
            social_memory: true,
            mind_wandering: config.toggles.mind_wandering,
        },
        ..config.clone()
    };
    run_town(
        scenario,
        &config,
        gateway,
        &mut store,
        &mut ActivityLedger::new(Embedder::default()),
    )?;
    Ok(store)
}

type GatewayFactory<'a> = dyn Fn() -> Result<Gateway, ConfigError> + Sync + 'a;

fn run_arm(
    arm: AblationArm,
    scenario: &TownScenario,
    config: &SimulationConfig,
    make_gateway: &GatewayFactory<'_>,
    warmed: &PolicyStore,
) -> Result<SimulationReport, SimError> {
    let gateway = make_gateway()?;
    let mut store = if arm.toggles(false).lifestyle_policy {
        warmed.clone()
    } else {
        PolicyStore::new(config.policy.clone(), Embedder::default())?
    };
    let config = SimulationConfig {
        toggles: arm.toggles(config.toggles.mind_wandering),
        ..config.clone()
    };
    run_town(
        scenario,
        &config,
        &gateway,
        &mut store,
        &mut ActivityLedger::new(Embedder::default()),
    )
}

/// Runs the four arms, each on a fresh gateway from `make_gateway`.
///
/// Arms with the lifestyle policy start from a copy of `warmed`; without
/// one, a warm-up pass on its own gateway builds it first.
pub fn run_ablation(
    scenario: &TownScenario,
    config: &SimulationConfig,
    make_gateway: &GatewayFactory<'_>,
    warmed: Option<&PolicyStore>,
    parallel: bool,
) -> Result<AblationTable, SimError> {
    let built;
    let warmed_up = warmed.is_none();
    let warmed = match warmed {
        Some(store) => store,
        None => {
            log::info!("no policy store given; running a warm-up pass");
            built = warm_up(scenario, config, &make_gateway()?)?;
            &built
        }
    };
    let reports: Vec<SimulationReport> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = AblationArm::ALL
                .iter()
                .map(|&arm| s.spawn(move || run_arm(arm, scenario, config, make_gateway, warmed)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("arm thread panicked"))
                .collect::<Result<_, _>>()
        })?
    } else {
        AblationArm::ALL
            .iter()
            .map(|&arm| run_arm(arm, scenario, config, make_gateway, warmed))
            .collect::<Result<_, _>>()?
    };

    let base = &reports[0].tokens;
    let ratio = |x: u64, b: u64| {
        if b == 0 {
            None
        } else {
            Some(x as f64 / b as f64)
        }
    };
    let arms = AblationArm::ALL
        .iter()
        .zip(reports.iter())
        .map(|(&arm, report)| {
            let by_category: BTreeMap<Category, u64> = Category::ALL
                .iter()
                .map(|&c| (c, report.tokens.category(c).total))
                .collect();
            let category_ratio = Category::ALL
                .iter()
                .map(|&c| (c, ratio(by_category[&c], base.category(c).total)))
                .collect();
            ArmResult {
                arm,
                toggles: report.toggles,
                total: report.tokens.total.total,
                ratio: ratio(report.tokens.total.total, base.total.total).unwrap_or(0.0),
                by_category,
                category_ratio,
                report: report.clone(),
            }
        })
        .collect();
    Ok(AblationTable {
        scenario: scenario.name.clone(),
        seed: config.seed,
        days: config.days,
        warmed_up,
        arms,
    })
}
