//! Per-class resource-block budgets chosen by Q-Learning.
//!
//! The N resource blocks of the carrier are quantized into Σ budget levels;
//! level i caps a traffic class at ⌈N·i/Σ⌉ RBs. Each traffic class owns one
//! [`ClassAgent`] whose states and actions are both level indices: choosing
//! action `a` moves the agent to state `a` for the next decision epoch. All
//! agents learn from one shared system-wide reward (see [`compute_reward`]).

use rand::Rng;

use crate::error::{Error, Result};
use crate::rl::{select_action, LearnerConfig, QTable};
use crate::traffic::Qci;

/// Quantization of `total_rbs` into `num_levels` budget levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetStateSpace {
    total_rbs: usize,
    num_levels: usize,
}

impl BudgetStateSpace {
    pub fn new(total_rbs: usize, num_levels: usize) -> Result<Self> {
        if num_levels == 0 {
            return Err(Error::param("sigma", "need at least one budget level"));
        }
        if total_rbs <= num_levels {
            return Err(Error::param(
                "sigma",
                format!("N = {total_rbs} RBs must exceed sigma = {num_levels}"),
            ));
        }
        Ok(Self {
            total_rbs,
            num_levels,
        })
    }

    pub fn total_rbs(&self) -> usize {
        self.total_rbs
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// RB cap for level `i` in `1..=Σ`: ⌈N·i/Σ⌉.
    pub fn budget_for_state(&self, i: usize) -> Result<usize> {
        if i == 0 || i > self.num_levels {
            return Err(Error::OutOfRange {
                what: "budget level",
                index: i,
                limit: self.num_levels,
            });
        }
        Ok((self.total_rbs * i).div_ceil(self.num_levels))
    }
}

/// Windowed system averages feeding the reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    /// Kbps.
    pub avg_throughput: f64,
    /// ms.
    pub avg_delay: f64,
    /// Fraction in [0, 1].
    pub avg_plr: f64,
}

pub const DELAY_FLOOR_MS: f64 = 1.0;
pub const PLR_FLOOR: f64 = 1e-4;
pub const REWARD_CLAMP: f64 = 12.0;

/// log10(R / (max(δ, 1 ms) · max(ρ, 1e-4))), clamped to ±12.
pub fn compute_reward(inputs: &RewardInputs) -> Result<f64> {
    let RewardInputs {
        avg_throughput,
        avg_delay,
        avg_plr,
    } = *inputs;
    for (name, v) in [
        ("avg_throughput", avg_throughput),
        ("avg_delay", avg_delay),
        ("avg_plr", avg_plr),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
        if v < 0.0 {
            return Err(Error::param(name, format!("{v} is negative")));
        }
    }
    if avg_plr > 1.0 {
        return Err(Error::param("avg_plr", format!("{avg_plr} exceeds 1")));
    }
    if avg_throughput == 0.0 {
        return Ok(-REWARD_CLAMP);
    }
    let denom = avg_delay.max(DELAY_FLOOR_MS) * avg_plr.max(PLR_FLOOR);
    Ok((avg_throughput / denom)
        .log10()
        .clamp(-REWARD_CLAMP, REWARD_CLAMP))
}

/// Learning agent for one traffic class.
#[derive(Debug, Clone)]
pub struct ClassAgent {
    qci: Qci,
    table: QTable,
    /// Current level, 1-based.
    state: usize,
    /// (state, action) of the last decision awaiting its reward, 0-based.
    pending: Option<(usize, usize)>,
}

impl ClassAgent {
    /// New agent starting at level 1 with every Q entry at `cfg.initial_q`.
    pub fn new(qci: Qci, space: &BudgetStateSpace, cfg: &LearnerConfig) -> Result<Self> {
        let n = space.num_levels();
        Ok(Self {
            qci,
            table: QTable::new(n, n, cfg.initial_q)?,
            state: 1,
            pending: None,
        })
    }

    pub fn qci(&self) -> Qci {
        self.qci
    }

    /// Current level index in `1..=Σ`.
    pub fn level(&self) -> usize {
        self.state
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut QTable {
        &mut self.table
    }
}

/// Chosen cap for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassBudget {
    pub qci: Qci,
    pub level: usize,
    pub rbs: usize,
}

/// One decision epoch: every agent picks its next level ε-greedily, in the
/// order given (QCI priority order), drawing from `rng` in that order.
pub fn decide_budgets<R: Rng + ?Sized>(
    agents: &mut [ClassAgent],
    space: &BudgetStateSpace,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<ClassBudget>> {
    if agents.is_empty() {
        return Err(Error::param("agents", "no class agents"));
    }
    agents
        .iter_mut()
        .map(|agent| {
            let s = agent.state - 1;
            let a = select_action(&agent.table, s, epsilon, rng)?;
            agent.pending = Some((s, a));
            agent.state = a + 1;
            Ok(ClassBudget {
                qci: agent.qci,
                level: agent.state,
                rbs: space.budget_for_state(agent.state)?,
            })
        })
        .collect()
}

/// Credit the shared `reward` to each agent's pending decision.
/// Agents with no pending decision are left untouched.
pub fn feedback(agents: &mut [ClassAgent], reward: f64, cfg: &LearnerConfig) -> Result<()> {
    if !reward.is_finite() {
        return Err(Error::NonFinite("reward"));
    }
    for agent in agents.iter_mut() {
        if let Some((s, a)) = agent.pending.take() {
            agent.table.update(s, a, reward, a, cfg)?;
        }
    }
    Ok(())
}
