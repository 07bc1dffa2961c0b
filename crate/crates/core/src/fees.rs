//! Directional fee policies.
//!
//! Every policy owns a [`FeeSchedule`] holding one rate per swap direction
//! in integer basis points. The simulation engine calls
//! [`FeePolicy::on_block_start`] once per block and [`FeePolicy::on_trade`]
//! after every executed swap; each policy reacts to the events it cares
//! about and ignores the rest.
//!
//! | policy | reacts to | rule |
//! |---|---|---|
//! | fixed | nothing | same rate both ways |
//! | block-adaptive | block start | move `step` bps toward the direction the pool rate moved last block |
//! | deal-adaptive | each trade | move `step` bps toward the direction just traded |
//! | oracle-based | block start | `f_ad` on the arbitrage direction, `f_nad` on the other |
//!
//! The two adaptive policies move fee from one direction to the other, so
//! the sum of the two rates never changes.

use serde::{Deserialize, Serialize};

use crate::amm::Direction;
use crate::error::{Error, Result};

pub const BPS_DENOMINATOR: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeeSchedule {
    pub a_to_b: u32,
    pub b_to_a: u32,
}

impl FeeSchedule {
    pub fn symmetric(bps: u32) -> Self {
        FeeSchedule {
            a_to_b: bps,
            b_to_a: bps,
        }
    }

    pub fn bps(&self, direction: Direction) -> u32 {
        match direction {
            Direction::AtoB => self.a_to_b,
            Direction::BtoA => self.b_to_a,
        }
    }

    /// Fee for `direction` as a fraction, ready for [`crate::amm::PoolState::swap`].
    pub fn rate(&self, direction: Direction) -> f64 {
        self.bps(direction) as f64 / BPS_DENOMINATOR
    }

    pub fn total_bps(&self) -> u32 {
        self.a_to_b + self.b_to_a
    }

    /// Moves `step` bps from the opposite direction onto `toward`. Skipped
    /// entirely when the opposite side holds less than `step`.
    fn shift_toward(&mut self, toward: Direction, step: u32) {
        let (up, down) = match toward {
            Direction::AtoB => (&mut self.a_to_b, &mut self.b_to_a),
            Direction::BtoA => (&mut self.b_to_a, &mut self.a_to_b),
        };
        if *down >= step {
            *down -= step;
            *up += step;
        }
    }
}

/// Which reserve-ratio movement the block-adaptive policy follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSignal {
    /// `q = y / x` of the pool at the previous block's start and end.
    #[default]
    PoolRate,
    /// `q = p_a / p_b` of the oracle, previous block versus this one. Only
    /// meant for sensitivity runs; a real pool has no such input.
    OracleRate,
}

/// What the engine knows at the start of a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockObservation {
    /// Pool rate `y / x` when the previous block started.
    pub pool_rate_start: f64,
    /// Pool rate `y / x` when the previous block ended, i.e. now.
    pub pool_rate_end: f64,
    /// Oracle rate `m = p_b / p_a` of the block about to run.
    pub oracle_rate: Option<f64>,
}

impl BlockObservation {
    /// Observation for the first block: no movement yet.
    pub fn initial(pool_rate: f64, oracle_rate: Option<f64>) -> Self {
        BlockObservation {
            pool_rate_start: pool_rate,
            pool_rate_end: pool_rate,
            oracle_rate,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.pool_rate_start) || !ok(self.pool_rate_end) || !self.oracle_rate.is_none_or(ok) {
            return Err(Error::InvalidArgument(format!(
                "block observation rates must be finite and positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// A fee policy and its state. One instance per simulated path.
#[derive(Debug, Clone, PartialEq)]
pub enum FeePolicy {
    Fixed {
        schedule: FeeSchedule,
    },
    BlockAdaptive {
        schedule: FeeSchedule,
        step: u32,
        signal: BlockSignal,
        last_oracle_q: Option<f64>,
    },
    DealAdaptive {
        schedule: FeeSchedule,
        step: u32,
    },
    OracleBased {
        schedule: FeeSchedule,
        f_ad: u32,
        f_nad: u32,
    },
}

impl FeePolicy {
    pub fn fixed(f_fx: u32) -> Self {
        FeePolicy::Fixed {
            schedule: FeeSchedule::symmetric(f_fx),
        }
    }

    pub fn block_adaptive(f_init: u32, f_step: u32, signal: BlockSignal) -> Self {
        FeePolicy::BlockAdaptive {
            schedule: FeeSchedule::symmetric(f_init),
            step: f_step,
            signal,
            last_oracle_q: None,
        }
    }

    pub fn deal_adaptive(f_init: u32, f_step: u32) -> Self {
        FeePolicy::DealAdaptive {
            schedule: FeeSchedule::symmetric(f_init),
            step: f_step,
        }
    }

    /// Starts at the midpoint of `f_ad` and `f_nad` (rounded down) until
    /// the first block reveals a direction.
    pub fn oracle_based(f_ad: u32, f_nad: u32) -> Self {
        FeePolicy::OracleBased {
            schedule: FeeSchedule::symmetric((f_ad + f_nad) / 2),
            f_ad,
            f_nad,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FeePolicy::Fixed { .. } => "FX",
            FeePolicy::BlockAdaptive { .. } => "BA",
            FeePolicy::DealAdaptive { .. } => "DA",
            FeePolicy::OracleBased { .. } => "OB",
        }
    }

    pub fn schedule(&self) -> FeeSchedule {
        match self {
            FeePolicy::Fixed { schedule }
            | FeePolicy::BlockAdaptive { schedule, .. }
            | FeePolicy::DealAdaptive { schedule, .. }
            | FeePolicy::OracleBased { schedule, .. } => *schedule,
        }
    }

    pub fn fee_for(&self, direction: Direction) -> u32 {
        self.schedule().bps(direction)
    }

    pub fn on_block_start(&mut self, obs: &BlockObservation) -> Result<FeeSchedule> {
        obs.validate()?;
        match self {
            FeePolicy::Fixed { schedule } | FeePolicy::DealAdaptive { schedule, .. } => Ok(*schedule),
            FeePolicy::BlockAdaptive {
                schedule,
                step,
                signal,
                last_oracle_q,
            } => {
                let (before, after) = match signal {
                    BlockSignal::PoolRate => (obs.pool_rate_start, obs.pool_rate_end),
                    BlockSignal::OracleRate => {
                        let m = obs.oracle_rate.ok_or_else(|| {
                            Error::config(
                                "fee_policy.signal",
                                "oracle_rate signal needs the block's oracle rate",
                            )
                        })?;
                        let q = 1.0 / m;
                        let prev = last_oracle_q.replace(q).unwrap_or(q);
                        (prev, q)
                    }
                };
                if after < before {
                    schedule.shift_toward(Direction::AtoB, *step);
                } else if after > before {
                    schedule.shift_toward(Direction::BtoA, *step);
                }
                Ok(*schedule)
            }
            FeePolicy::OracleBased {
                schedule,
                f_ad,
                f_nad,
            } => {
                let m = obs.oracle_rate.ok_or_else(|| {
                    Error::config("fee_policy", "oracle-based policy needs the block's oracle rate")
                })?;
                // Pool price of B in A is x / y = 1 / q.
                let spot = 1.0 / obs.pool_rate_end;
                if spot < m {
                    *schedule = FeeSchedule {
                        a_to_b: *f_ad,
                        b_to_a: *f_nad,
                    };
                } else if spot > m {
                    *schedule = FeeSchedule {
                        a_to_b: *f_nad,
                        b_to_a: *f_ad,
                    };
                }
                Ok(*schedule)
            }
        }
    }

    pub fn on_trade(&mut self, direction: Direction) -> FeeSchedule {
        if let FeePolicy::DealAdaptive { schedule, step } = self {
            schedule.shift_toward(direction, *step);
        }
        self.schedule()
    }
}
