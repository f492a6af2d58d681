//! Shrink/expand controllers: `fix`, `slope` and `slopek`, with warm-up
//! gating of the first shrink.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("slope needs {needed} residuals, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    None,
    Fix,
    Slope,
    Slopek,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] =
        [StrategyKind::None, StrategyKind::Fix, StrategyKind::Slope, StrategyKind::Slopek];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::Fix => "fix",
            StrategyKind::Slope => "slope",
            StrategyKind::Slopek => "slopek",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| StrategyError::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig<T> {
    pub kind: StrategyKind,
    /// Expansion period.
    pub j_e: usize,
    /// Iterations from an expansion to the next shrink.
    pub j_s: usize,
    /// Expansion threshold on `c_max / c`.
    pub mu: T,
    /// Averaging window of `slopek`.
    pub j_p: usize,
    /// Earliest iteration for the first shrink.
    pub j_warm: usize,
    /// Largest residual allowed at the first shrink.
    pub r_warm: T,
}

impl<T: Real> StrategyConfig<T> {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            j_e: 12,
            j_s: 2,
            mu: T::lit(1.1),
            j_p: 10,
            j_warm: 5,
            r_warm: T::lit(1e-4),
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: String| Err(StrategyError::InvalidConfig(m));
        if self.j_e == 0 {
            return bad("j_e must be positive".into());
        }
        if self.j_s >= self.j_e {
            return bad(format!("j_s ({}) must be smaller than j_e ({})", self.j_s, self.j_e));
        }
        if !(self.mu > T::one()) {
            return bad(format!("mu ({}) must exceed 1", self.mu));
        }
        if self.j_p == 0 {
            return bad("j_p must be at least 1".into());
        }
        if !(self.r_warm > T::zero()) {
            return bad(format!("r_warm ({}) must be positive", self.r_warm));
        }
        Ok(())
    }
}

impl<T: Real> Default for StrategyConfig<T> {
    fn default() -> Self {
        Self::new(StrategyKind::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Hold,
    Shrink,
    Expand,
}

/// `log10 r^(j−1) − log10 r^(j)` from a history of `log10 r`.
pub fn slope<T: Real>(history: &[T]) -> Result<T, StrategyError> {
    match history {
        [.., prev, cur] => Ok(*prev - *cur),
        _ => Err(StrategyError::InsufficientHistory { needed: 2, have: history.len() }),
    }
}

/// `(log10 r^(j−j_p) − log10 r^(j)) / j_p`.
pub fn slope_avg<T: Real>(history: &[T], j_p: usize) -> Result<T, StrategyError> {
    let len = history.len();
    if j_p == 0 || len < j_p + 1 {
        return Err(StrategyError::InsufficientHistory { needed: j_p + 1, have: len });
    }
    Ok((history[len - 1 - j_p] - history[len - 1]) / T::from_count(j_p))
}

/// Per-run controller state. The solver calls [`StrategyState::advance`] once
/// per iteration and reports the actions it actually applied through
/// [`StrategyState::on_expand`] and [`StrategyState::on_shrink`].
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyState<T> {
    j: usize,
    j_l: usize,
    n_now: usize,
    n_es: usize,
    n_ex: usize,
    warm: bool,
    log_r_history: Vec<T>,
    c_max: Option<T>,
}

impl<T: Real> StrategyState<T> {
    /// Fresh state with the block at its expanded size.
    pub fn new(n_es: usize, n_ex: usize) -> Self {
        Self {
            j: 0,
            j_l: 0,
            n_now: n_ex,
            n_es,
            n_ex,
            warm: false,
            log_r_history: Vec::new(),
            c_max: None,
        }
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn j_l(&self) -> usize {
        self.j_l
    }

    pub fn n_now(&self) -> usize {
        self.n_now
    }

    pub fn warm(&self) -> bool {
        self.warm
    }

    pub fn c_max(&self) -> Option<T> {
        self.c_max
    }

    pub fn log_r_history(&self) -> &[T] {
        &self.log_r_history
    }

    /// Records iteration `j + 1` with residual `r_now` and returns the action
    /// to take. State changes tied to the action wait for `on_expand` /
    /// `on_shrink`.
    pub fn advance(&mut self, cfg: &StrategyConfig<T>, r_now: T) -> Decision {
        self.j += 1;
        self.j_l += 1;
        self.log_r_history.push(r_now.max(T::min_positive_value()).log10());

        if cfg.kind == StrategyKind::None {
            return Decision::Hold;
        }
        if !self.warm {
            let ready = self.j >= cfg.j_warm && r_now <= cfg.r_warm && self.n_now == self.n_ex;
            return if ready { Decision::Shrink } else { Decision::Hold };
        }

        if self.n_now == self.n_es {
            match cfg.kind {
                StrategyKind::Fix => {
                    if self.j.is_multiple_of(cfg.j_e) {
                        Decision::Expand
                    } else {
                        Decision::Hold
                    }
                }
                StrategyKind::Slope | StrategyKind::Slopek => {
                    let c = if cfg.kind == StrategyKind::Slope {
                        slope(&self.log_r_history)
                    } else {
                        slope_avg(&self.log_r_history, cfg.j_p)
                    };
                    let Ok(c) = c else {
                        return Decision::Hold;
                    };
                    let c_max = self.c_max.map_or(c, |m| m.max(c));
                    self.c_max = Some(c_max);
                    if c <= T::zero() || c_max > cfg.mu * c {
                        Decision::Expand
                    } else {
                        Decision::Hold
                    }
                }
                StrategyKind::None => Decision::Hold,
            }
        } else {
            let due = match cfg.kind {
                StrategyKind::Fix => (self.j as i64 - cfg.j_s as i64).rem_euclid(cfg.j_e as i64) == 0,
                _ => self.j_l == cfg.j_s,
            };
            if due {
                Decision::Shrink
            } else {
                Decision::Hold
            }
        }
    }

    pub fn on_expand(&mut self) {
        self.n_now = self.n_ex;
        self.j_l = 0;
    }

    pub fn on_shrink(&mut self) {
        self.n_now = self.n_es;
        self.warm = true;
        self.c_max = None;
    }

    /// Applies `decision` as if the solver carried it out.
    pub fn apply(&mut self, decision: Decision) {
        match decision {
            Decision::Expand => self.on_expand(),
            Decision::Shrink => self.on_shrink(),
            Decision::Hold => {}
        }
    }
}

/// Side-effect free variant of [`StrategyState::advance`].
pub fn decide<T: Real>(state: &StrategyState<T>, cfg: &StrategyConfig<T>, r_now: T) -> Decision {
    state.clone().advance(cfg, r_now)
}
