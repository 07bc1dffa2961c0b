//! Constant-product pool state and swap math.
//!
//! Token A and token B are valued in a common base currency (e.g. USDT) at
//! oracle prices `p_a` and `p_b`. The pool keeps reserves `(x, y)` and
//! executes swaps on the invariant
//!
//! ```text
//! (x + in·(1 − f)) · (y − out) = x · y
//! ```
//!
//! The full input, fee included, is credited to the reserves, so the reserve
//! product grows by the fee on every swap. The fee part is also tracked in
//! `fees_accrued_*` so impermanent loss can be split from fee income.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Swap direction from the trader's point of view. `AtoB` means the trader
/// pays token A into the pool and receives token B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    AtoB,
    BtoA,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::AtoB => Direction::BtoA,
            Direction::BtoA => Direction::AtoB,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::AtoB => "a_to_b",
            Direction::BtoA => "b_to_a",
        }
    }
}

/// Oracle prices of one block, in base currency per token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTick {
    pub block_index: u64,
    pub p_a: f64,
    pub p_b: f64,
}

impl PriceTick {
    pub fn new(block_index: u64, p_a: f64, p_b: f64) -> Result<Self> {
        let tick = PriceTick {
            block_index,
            p_a,
            p_b,
        };
        tick.validate()?;
        Ok(tick)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_a.is_finite() && self.p_a > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "block {}: p_a must be finite and positive, got {}",
                self.block_index, self.p_a
            )));
        }
        if !(self.p_b.is_finite() && self.p_b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "block {}: p_b must be finite and positive, got {}",
                self.block_index, self.p_b
            )));
        }
        let m = self.rate();
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "block {}: CEX rate p_b/p_a is not finite and positive",
                self.block_index
            )));
        }
        Ok(())
    }

    /// CEX rate `m = p_b / p_a`: token-A units per token-B unit. Compare
    /// with [`PoolState::spot_rate`].
    pub fn rate(&self) -> f64 {
        self.p_b / self.p_a
    }

    /// Price of the token paid in when trading in `direction`.
    pub fn input_price(&self, direction: Direction) -> f64 {
        match direction {
            Direction::AtoB => self.p_a,
            Direction::BtoA => self.p_b,
        }
    }

    pub fn output_price(&self, direction: Direction) -> f64 {
        self.input_price(direction.opposite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub reserve_a: f64,
    pub reserve_b: f64,
    pub fees_accrued_a: f64,
    pub fees_accrued_b: f64,
}

/// One executed swap. Amounts are positive magnitudes; `direction` gives
/// the sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapResult {
    pub direction: Direction,
    pub amount_in: f64,
    pub amount_out: f64,
    /// Part of `amount_in` kept as fee, in input-token units.
    pub fee_amount: f64,
    pub pool_after: PoolState,
}

impl SwapResult {
    /// Signed `(Δx, Δy)` from the trader's side: positive is received from
    /// the pool, negative is paid to it.
    pub fn trader_deltas(&self) -> (f64, f64) {
        match self.direction {
            Direction::AtoB => (-self.amount_in, self.amount_out),
            Direction::BtoA => (self.amount_out, -self.amount_in),
        }
    }

    /// Signed reserve changes from the pool's side.
    pub fn pool_deltas(&self) -> (f64, f64) {
        let (dx, dy) = self.trader_deltas();
        (-dx, -dy)
    }
}

/// Seeds a pool holding `total_value` of base currency, split evenly
/// between the two tokens at the prices of `tick`.
pub fn init_pool(total_value: f64, tick: &PriceTick) -> Result<PoolState> {
    if !(total_value.is_finite() && total_value > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "initial pool value must be finite and positive, got {total_value}"
        )));
    }
    tick.validate()?;
    let half = total_value / 2.0;
    Ok(PoolState {
        reserve_a: half / tick.p_a,
        reserve_b: half / tick.p_b,
        fees_accrued_a: 0.0,
        fees_accrued_b: 0.0,
    })
}

impl PoolState {
    pub fn new(reserve_a: f64, reserve_b: f64) -> Result<Self> {
        let pool = PoolState {
            reserve_a,
            reserve_b,
            fees_accrued_a: 0.0,
            fees_accrued_b: 0.0,
        };
        if !(reserve_a.is_finite() && reserve_a > 0.0 && reserve_b.is_finite() && reserve_b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "reserves must be finite and positive, got ({reserve_a}, {reserve_b})"
            )));
        }
        Ok(pool)
    }

    /// Marginal price of token B in token-A units, `x / y`.
    pub fn spot_rate(&self) -> f64 {
        self.reserve_a / self.reserve_b
    }

    /// Reserve ratio `y / x` (token B per token A). This is the signal the
    /// block-adaptive fee policy watches.
    pub fn pool_rate(&self) -> f64 {
        self.reserve_b / self.reserve_a
    }

    pub fn product(&self) -> f64 {
        self.reserve_a * self.reserve_b
    }

    /// Reserves on the (input, output) side of a swap in `direction`.
    pub fn reserves_for(&self, direction: Direction) -> (f64, f64) {
        match direction {
            Direction::AtoB => (self.reserve_a, self.reserve_b),
            Direction::BtoA => (self.reserve_b, self.reserve_a),
        }
    }

    /// Output amount for `amount_in` without executing. Returns 0 for a
    /// zero input.
    pub fn quote(&self, direction: Direction, amount_in: f64, fee_rate: f64) -> f64 {
        let (r_in, r_out) = self.reserves_for(direction);
        let effective = amount_in * (1.0 - fee_rate);
        // y − x·y/(x + e) rewritten to avoid cancellation for small e.
        r_out * effective / (r_in + effective)
    }

    /// Executes a swap of `amount_in` input tokens with fee fraction
    /// `fee_rate`, returning the new state and the amounts exchanged.
    pub fn swap(&self, direction: Direction, amount_in: f64, fee_rate: f64) -> Result<SwapResult> {
        if !(amount_in.is_finite() && amount_in > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "swap amount must be finite and positive, got {amount_in}"
            )));
        }
        if !(0.0..1.0).contains(&fee_rate) {
            return Err(Error::InvalidArgument(format!(
                "fee rate must lie in [0, 1), got {fee_rate}"
            )));
        }
        let (r_in, r_out) = self.reserves_for(direction);
        let fee_amount = amount_in * fee_rate;
        let amount_out = self.quote(direction, amount_in, fee_rate);
        if !amount_out.is_finite() || !(r_in + amount_in).is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite swap result for amount_in={amount_in} against reserves ({r_in}, {r_out})"
            )));
        }
        assert!(
            amount_out < r_out,
            "swap output {amount_out} would drain reserve {r_out}"
        );

        let mut after = *self;
        match direction {
            Direction::AtoB => {
                after.reserve_a += amount_in;
                after.reserve_b -= amount_out;
                after.fees_accrued_a += fee_amount;
            }
            Direction::BtoA => {
                after.reserve_b += amount_in;
                after.reserve_a -= amount_out;
                after.fees_accrued_b += fee_amount;
            }
        }
        if !(after.reserve_a > 0.0 && after.reserve_b > 0.0) {
            return Err(Error::Numeric(format!(
                "swap left non-positive reserves ({}, {})",
                after.reserve_a, after.reserve_b
            )));
        }
        Ok(SwapResult {
            direction,
            amount_in,
            amount_out,
            fee_amount,
            pool_after: after,
        })
    }
}

/// Value of holding `a` token A and `b` token B at the tick's prices.
pub fn capital(a: f64, b: f64, tick: &PriceTick) -> f64 {
    a * tick.p_a + b * tick.p_b
}

/// Change of a trader's capital for the signed trade `(Δx, Δy)`, less an
/// explicitly charged fee value and the network fee `alpha`.
pub fn delta_p(dx: f64, dy: f64, fee_value: f64, alpha: f64, tick: &PriceTick) -> f64 {
    capital(dx, dy, tick) - fee_value - alpha
}
