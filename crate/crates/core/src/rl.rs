//! Tabular Q-Learning.
//!
//! [`QTable`] stores Q(s, a) densely. [`select_action`] implements ε-greedy
//! selection with lowest-index tie-breaking and [`QTable::update`] applies the
//! one-step Q-Learning rule
//!
//! ```text
//! Q(s,a) <- Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))
//! ```
//!
//! The [`oracle`] submodule holds a deterministic-MDP value-iteration solver
//! used as an independent reference for the learner.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

/// Dense action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
    num_states: usize,
    num_actions: usize,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize, initial_q: f64) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Dimensions(format!(
                "q-table needs at least one state and one action, got {num_states}x{num_actions}"
            )));
        }
        if !initial_q.is_finite() {
            return Err(Error::NonFinite("initial_q"));
        }
        Ok(Self {
            values: vec![initial_q; num_states * num_actions],
            num_states,
            num_actions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::OutOfRange {
                what: "state",
                index: s,
                limit: self.num_states,
            });
        }
        Ok(())
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.num_actions {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                limit: self.num_actions,
            });
        }
        Ok(())
    }

    pub fn get(&self, s: usize, a: usize) -> Result<f64> {
        self.check_state(s)?;
        self.check_action(a)?;
        Ok(self.values[s * self.num_actions + a])
    }

    pub fn set(&mut self, s: usize, a: usize, q: f64) -> Result<()> {
        self.check_state(s)?;
        self.check_action(a)?;
        if !q.is_finite() {
            return Err(Error::NonFinite("q"));
        }
        self.values[s * self.num_actions + a] = q;
        Ok(())
    }

    pub fn row(&self, s: usize) -> Result<&[f64]> {
        self.check_state(s)?;
        let start = s * self.num_actions;
        Ok(&self.values[start..start + self.num_actions])
    }

    /// Greedy action for `s`; ties go to the lowest action index.
    pub fn greedy(&self, s: usize) -> Result<usize> {
        Ok(argmax(self.row(s)?))
    }

    pub fn max_value(&self, s: usize) -> Result<f64> {
        let row = self.row(s)?;
        Ok(row[argmax(row)])
    }

    /// Greedy policy over every state.
    pub fn policy(&self) -> Vec<usize> {
        (0..self.num_states)
            .map(|s| argmax(&self.values[s * self.num_actions..(s + 1) * self.num_actions]))
            .collect()
    }

    /// Apply one Q-Learning step and return the new Q(s, a).
    pub fn update(
        &mut self,
        s: usize,
        a: usize,
        r: f64,
        s_next: usize,
        cfg: &LearnerConfig,
    ) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        self.check_state(s)?;
        self.check_action(a)?;
        let target = r + cfg.gamma * self.max_value(s_next)?;
        let idx = s * self.num_actions + a;
        let q = self.values[idx] + cfg.alpha * (target - self.values[idx]);
        self.values[idx] = q;
        Ok(q)
    }

    /// Largest absolute entrywise difference to `other`.
    pub fn sup_distance(&self, other: &QTable) -> Result<f64> {
        if self.num_states != other.num_states || self.num_actions != other.num_actions {
            return Err(Error::Dimensions("q-table shapes differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV dump with header `state,action,q`, values to 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * self.values.len() + 16);
        out.push_str("state,action,q\n");
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let q = self.values[s * self.num_actions + a];
                let _ = writeln!(out, "{s},{a},{q:.8e}");
            }
        }
        out
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Q-Learning hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub initial_q: f64,
}

impl LearnerConfig {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64, initial_q: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param("alpha", format!("{alpha} not in (0, 1]")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("{gamma} not in [0, 1)")));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::param("epsilon", format!("{epsilon} not in [0, 1]")));
        }
        if !initial_q.is_finite() {
            return Err(Error::NonFinite("initial_q"));
        }
        Ok(Self {
            alpha,
            gamma,
            epsilon,
            initial_q,
        })
    }
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            gamma: 0.75,
            epsilon: 0.1,
            initial_q: 0.0,
        }
    }
}

/// ε-greedy action selection.
///
/// Draw order is fixed: one uniform real, then one uniform integer only when
/// exploring.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    s: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let row = q.row(s)?;
    let u: f64 = rng.random();
    if u < epsilon {
        Ok(rng.random_range(0..q.num_actions))
    } else {
        Ok(argmax(row))
    }
}

pub mod oracle {
    //! Reference solver for deterministic finite MDPs.

    use super::*;

    /// Deterministic MDP over `num_states × num_actions`.
    #[derive(Debug, Clone, PartialEq)]
    pub struct MdpSpec {
        num_states: usize,
        num_actions: usize,
        transition: Vec<usize>,
        reward: Vec<f64>,
    }

    impl MdpSpec {
        /// `transition[s][a]` is the successor, `reward[s][a]` the reward.
        pub fn new(transition: Vec<Vec<usize>>, reward: Vec<Vec<f64>>) -> Result<Self> {
            let num_states = transition.len();
            if num_states == 0 || reward.len() != num_states {
                return Err(Error::Dimensions("transition/reward row count".into()));
            }
            let num_actions = transition[0].len();
            if num_actions == 0 {
                return Err(Error::Dimensions("no actions".into()));
            }
            for (t, r) in transition.iter().zip(&reward) {
                if t.len() != num_actions || r.len() != num_actions {
                    return Err(Error::Dimensions("ragged transition/reward grid".into()));
                }
                if let Some(&bad) = t.iter().find(|&&s| s >= num_states) {
                    return Err(Error::OutOfRange {
                        what: "successor state",
                        index: bad,
                        limit: num_states,
                    });
                }
                if r.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("reward"));
                }
            }
            Ok(Self {
                num_states,
                num_actions,
                transition: transition.into_iter().flatten().collect(),
                reward: reward.into_iter().flatten().collect(),
            })
        }

        pub fn num_states(&self) -> usize {
            self.num_states
        }

        pub fn num_actions(&self) -> usize {
            self.num_actions
        }

        pub fn next(&self, s: usize, a: usize) -> usize {
            self.transition[s * self.num_actions + a]
        }

        pub fn reward(&self, s: usize, a: usize) -> f64 {
            self.reward[s * self.num_actions + a]
        }

        /// Same dynamics, every reward shifted by `c`.
        pub fn offset_rewards(&self, c: f64) -> Self {
            let mut m = self.clone();
            m.reward.iter_mut().for_each(|r| *r += c);
            m
        }
    }

    /// Value iteration to the Bellman-optimality fixed point.
    ///
    /// Stops once a full sweep changes no entry by `tol * (1 - gamma)` or
    /// more, which bounds the distance to Q* (and the Bellman residual)
    /// below `tol`.
    pub fn value_iteration(m: &MdpSpec, gamma: f64, tol: f64) -> Result<QTable> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("{gamma} not in [0, 1)")));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::param("tol", "must be positive"));
        }
        let mut q = QTable::new(m.num_states, m.num_actions, 0.0)?;
        let stop = tol * (1.0 - gamma);
        loop {
            let v: Vec<f64> = (0..m.num_states)
                .map(|s| q.max_value(s).expect("state in range"))
                .collect();
            let mut delta: f64 = 0.0;
            for s in 0..m.num_states {
                for a in 0..m.num_actions {
                    let backup = m.reward(s, a) + gamma * v[m.next(s, a)];
                    let idx = s * m.num_actions + a;
                    delta = delta.max((backup - q.values[idx]).abs());
                    q.values[idx] = backup;
                }
            }
            if delta < stop {
                return Ok(q);
            }
        }
    }

    /// Sup-norm Bellman residual of `q` on `m`.
    pub fn bellman_residual(m: &MdpSpec, q: &QTable, gamma: f64) -> f64 {
        let mut res: f64 = 0.0;
        for s in 0..m.num_states {
            for a in 0..m.num_actions {
                let backup = m.reward(s, a) + gamma * q.max_value(m.next(s, a)).unwrap();
                res = res.max((backup - q.get(s, a).unwrap()).abs());
            }
        }
        res
    }

    /// Q-Learning on a deterministic MDP: each step samples a state uniformly,
    /// picks an action ε-greedily and applies the update with the observed
    /// reward and successor.
    pub fn learn<R: Rng + ?Sized>(
        m: &MdpSpec,
        cfg: &LearnerConfig,
        steps: usize,
        rng: &mut R,
    ) -> Result<QTable> {
        let mut q = QTable::new(m.num_states, m.num_actions, cfg.initial_q)?;
        for _ in 0..steps {
            let s = rng.random_range(0..m.num_states);
            let a = select_action(&q, s, cfg.epsilon, rng)?;
            q.update(s, a, m.reward(s, a), m.next(s, a), cfg)?;
        }
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    fn cfg() -> LearnerConfig {
        LearnerConfig::default()
    }

    fn table_with_row(row: &[f64]) -> QTable {
        let mut q = QTable::new(1, row.len(), 0.0).unwrap();
        for (a, &v) in row.iter().enumerate() {
            q.set(0, a, v).unwrap();
        }
        q
    }

    #[test]
    fn new_table_shapes() {
        let q = QTable::new(3, 2, 0.0).unwrap();
        assert_eq!((q.num_states(), q.num_actions()), (3, 2));
        assert!(q.values.iter().all(|&v| v == 0.0));

        let q = QTable::new(20, 20, 0.0).unwrap();
        assert_eq!(q.values.len(), 400);

        let q = QTable::new(1, 1, 5.0).unwrap();
        assert_eq!(q.get(0, 0).unwrap(), 5.0);
    }

    #[test]
    fn new_table_rejects_zero_dims() {
        assert!(matches!(QTable::new(0, 2, 0.0), Err(Error::Dimensions(_))));
        assert!(matches!(QTable::new(2, 0, 0.0), Err(Error::Dimensions(_))));
        assert!(QTable::new(2, 2, f64::NAN).is_err());
    }

    #[test]
    fn greedy_selection_and_tie_break() {
        let mut rng = stream(1, Stream::Exploration);
        let q = table_with_row(&[1.0, 3.0, 2.0]);
        assert_eq!(select_action(&q, 0, 0.0, &mut rng).unwrap(), 1);
        let q = table_with_row(&[2.0, 2.0, 0.0]);
        assert_eq!(select_action(&q, 0, 0.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn select_rejects_bad_state() {
        let mut rng = stream(1, Stream::Exploration);
        let q = QTable::new(2, 2, 0.0).unwrap();
        assert!(matches!(
            select_action(&q, 2, 0.0, &mut rng),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = stream(7, Stream::Exploration);
        let q = table_with_row(&[9.0, 0.0, 0.0, 0.0]);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_action(&q, 0, 1.0, &mut rng).unwrap()] += 1;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 3 dof, p = 0.001 critical value
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
        for &c in &counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn update_examples() {
        let mut q = QTable::new(2, 2, 0.0).unwrap();
        let v = q.update(0, 1, 1.0, 1, &cfg()).unwrap();
        assert!((v - 0.2).abs() < 1e-12);

        let mut q = QTable::new(2, 2, 0.0).unwrap();
        q.set(0, 0, 1.0).unwrap();
        q.set(1, 1, 2.0).unwrap();
        let v = q.update(0, 0, 0.0, 1, &cfg()).unwrap();
        assert!((v - 1.1).abs() < 1e-12);
    }

    #[test]
    fn update_rejects_non_finite_reward() {
        let mut q = QTable::new(2, 2, 0.0).unwrap();
        assert_eq!(
            q.update(0, 0, f64::INFINITY, 1, &cfg()),
            Err(Error::NonFinite("reward"))
        );
        assert!(q.update(0, 0, f64::NAN, 1, &cfg()).is_err());
        assert!(q.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn learner_config_bounds() {
        assert!(LearnerConfig::new(0.0, 0.5, 0.1, 0.0).is_err());
        assert!(LearnerConfig::new(1.0, 0.5, 0.1, 0.0).is_ok());
        assert!(LearnerConfig::new(0.2, 1.0, 0.1, 0.0).is_err());
        assert!(LearnerConfig::new(0.2, 0.0, 1.0, 0.0).is_ok());
        assert!(LearnerConfig::new(0.2, 0.5, 1.5, 0.0).is_err());
        assert!(LearnerConfig::new(0.2, 0.5, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn value_iteration_geometric_series() {
        let m = MdpSpec::new(vec![vec![0]], vec![vec![1.0]]).unwrap();
        let q = value_iteration(&m, 0.75, 1e-12).unwrap();
        assert!((q.get(0, 0).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn value_iteration_rejects_undiscounted() {
        let m = MdpSpec::new(vec![vec![0]], vec![vec![1.0]]).unwrap();
        assert!(value_iteration(&m, 1.0, 1e-9).is_err());
        assert!(value_iteration(&m, 0.5, 0.0).is_err());
    }

    fn chain() -> MdpSpec {
        // action 0 stays, action 1 advances; state 2 absorbs on both
        MdpSpec::new(
            vec![vec![0, 1], vec![1, 2], vec![2, 2]],
            vec![vec![0.0, 0.0], vec![0.0, 10.0], vec![0.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn value_iteration_three_state_chain() {
        // Hand iteration: state 2 is worth 0 forever, so Q*(1,1)=10, Q*(1,0)=0.75*10,
        // Q*(0,1)=0.75*10, Q*(0,0)=0.75*7.5.
        let q = value_iteration(&chain(), 0.75, 1e-9).unwrap();
        let expected = [[5.625, 7.5], [7.5, 10.0], [0.0, 0.0]];
        for (s, row) in expected.iter().enumerate() {
            for (a, &e) in row.iter().enumerate() {
                assert!((q.get(s, a).unwrap() - e).abs() < 1e-9, "({s},{a})");
            }
        }
        assert_eq!(q.policy(), vec![1, 1, 0]);
        assert!(bellman_residual(&chain(), &q, 0.75) < 1e-9);
    }

    #[test]
    fn value_iteration_offset_shift() {
        let m = chain();
        let base = value_iteration(&m, 0.75, 1e-12).unwrap();
        let shifted = value_iteration(&m.offset_rewards(2.0), 0.75, 1e-12).unwrap();
        assert_eq!(base.policy(), shifted.policy());
        for s in 0..3 {
            for a in 0..2 {
                let d = shifted.get(s, a).unwrap() - base.get(s, a).unwrap();
                assert!((d - 8.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn residual_shrinks_monotonically() {
        let m = chain();
        let mut q = QTable::new(3, 2, 0.0).unwrap();
        let mut last = f64::INFINITY;
        for sweep in 0..40 {
            let v: Vec<f64> = (0..3).map(|s| q.max_value(s).unwrap()).collect();
            for s in 0..3 {
                for a in 0..2 {
                    q.set(s, a, m.reward(s, a) + 0.75 * v[m.next(s, a)])
                        .unwrap();
                }
            }
            let r = bellman_residual(&m, &q, 0.75);
            if sweep > 0 {
                assert!(r <= last + 1e-15);
            }
            last = r;
        }
    }

    #[test]
    fn two_state_learning_matches_oracle() {
        let m = MdpSpec::new(
            vec![vec![0, 1], vec![0, 1]],
            vec![vec![1.0, 0.0], vec![5.0, 2.0]],
        )
        .unwrap();
        let star = value_iteration(&m, 0.75, 1e-10).unwrap();
        let cfg = LearnerConfig {
            epsilon: 0.1,
            ..LearnerConfig::default()
        };
        let mut rng = stream(3, Stream::Exploration);
        let learned = learn(&m, &cfg, 100_000, &mut rng).unwrap();
        assert_eq!(learned.policy(), star.policy());
    }

    #[test]
    fn csv_dump_format() {
        let mut q = QTable::new(2, 1, 0.0).unwrap();
        q.set(1, 0, 1.0 / 3.0).unwrap();
        let csv = q.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "state,action,q");
        assert_eq!(lines[1], "0,0,0.00000000e0");
        assert_eq!(lines[2], "1,0,3.33333333e-1");
    }

    proptest! {
        #[test]
        fn update_touches_one_entry(
            s in 0usize..4, a in 0usize..3, sn in 0usize..4,
            r in -100.0f64..100.0,
            init in proptest::collection::vec(-50.0f64..50.0, 12),
        ) {
            let mut q = QTable::new(4, 3, 0.0).unwrap();
            q.values.copy_from_slice(&init);
            let before = q.clone();
            q.update(s, a, r, sn, &LearnerConfig::default()).unwrap();
            for i in 0..12 {
                if i != s * 3 + a {
                    prop_assert_eq!(q.values[i], before.values[i]);
                }
            }
            prop_assert!(q.values.iter().all(|v| v.is_finite()));
        }

        #[test]
        fn greedy_is_pure(row in proptest::collection::vec(-10.0f64..10.0, 1..8), seed in 0u64..1000) {
            let q = table_with_row(&row);
            let mut r1 = stream(seed, Stream::Exploration);
            let mut r2 = stream(seed + 1, Stream::Exploration);
            prop_assert_eq!(
                select_action(&q, 0, 0.0, &mut r1).unwrap(),
                select_action(&q, 0, 0.0, &mut r2).unwrap()
            );
        }
    }
}
