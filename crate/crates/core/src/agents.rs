//! Trader models.
//!
//! The informed user (IU) is an arbitrageur who knows the block's oracle
//! prices and sends the single swap that maximizes its capital change, if
//! that change is positive. The uninformed user (UU) trades a random
//! direction and size and goes through with it with probability
//! `exp(−|r|)`, where `r` is the trade's loss relative to its volume.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::amm::{capital, delta_p, Direction, PoolState, PriceTick, SwapResult};
use crate::error::{Error, Result};
use crate::fees::FeeSchedule;

/// Candidate trades smaller than this fraction of the input reserve are
/// treated as no trade. Re-solving right after an arbitrage lands within a
/// few ulps of the band edge, and those residues are not real opportunities.
pub const MIN_TRADE_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentClass {
    Informed,
    Uninformed,
}

impl AgentClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentClass::Informed => "iu",
            AgentClass::Uninformed => "uu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeIntent {
    pub direction: Direction,
    pub amount_in: f64,
    pub agent_class: AgentClass,
}

/// Uninformed-user arrival and size distribution. Sizes are fractions of
/// the input-side reserve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UuParams {
    pub prob_trade_per_block: f64,
    pub size_mean: f64,
    pub size_std: f64,
    pub max_fraction: f64,
}

impl Default for UuParams {
    fn default() -> Self {
        UuParams {
            prob_trade_per_block: 0.5,
            size_mean: 0.001,
            size_std: 0.0005,
            max_fraction: 0.05,
        }
    }
}

impl UuParams {
    /// Checks the parameters; `prefix` is the config key path used in errors.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}.{k}");
        if !(0.0..=1.0).contains(&self.prob_trade_per_block) {
            return Err(Error::config(key("prob_trade_per_block"), "must lie in [0, 1]"));
        }
        if !(self.max_fraction > 0.0 && self.max_fraction < 1.0) {
            return Err(Error::config(key("max_fraction"), "must lie in (0, 1)"));
        }
        if !(self.size_mean > 0.0 && self.size_mean <= self.max_fraction) {
            return Err(Error::config(key("size_mean"), "must lie in (0, max_fraction]"));
        }
        if !(self.size_std.is_finite() && self.size_std >= 0.0) {
            return Err(Error::config(key("size_std"), "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// How the fee enters a trader's capital change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeeAccounting {
    /// The fee is already inside the smaller swap output; nothing extra is
    /// charged.
    #[default]
    Embedded,
    /// The fee value is subtracted once more on top of the swap output.
    Literal,
}

/// Denominator of the relative loss `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossDenominator {
    /// Gross traded value `P(|Δx|, |Δy|)`.
    #[default]
    GrossVolume,
    /// `δP(|Δx|, |Δy|)`, which charges fee value and `alpha` again.
    Literal,
}

/// Unit `r` is expressed in before it enters `exp(−|r|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossUnits {
    Fraction,
    #[default]
    Percent,
}

impl LossUnits {
    pub fn scale(self) -> f64 {
        match self {
            LossUnits::Fraction => 1.0,
            LossUnits::Percent => 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelativeLossModel {
    pub fee_accounting: FeeAccounting,
    pub denominator: LossDenominator,
    pub units: LossUnits,
}

/// Capital change of swapping `amount_in` in `direction`, valued at the
/// tick, with the fee embedded in the output and `alpha` charged.
pub fn trade_profit(
    pool: &PoolState,
    tick: &PriceTick,
    direction: Direction,
    amount_in: f64,
    fee_rate: f64,
    alpha: f64,
) -> f64 {
    let out = pool.quote(direction, amount_in, fee_rate);
    out * tick.output_price(direction) - amount_in * tick.input_price(direction) - alpha
}

/// Profit-maximizing input amounts `(Δx*, Δy*)` for the two directions.
///
/// With `m = p_b / p_a` and `g = 1 − f`, maximizing
/// `out(Δx)·m − Δx` for an A→B swap gives `(x + gΔx)² = g·m·x·y`, hence
/// `Δx* = (√(g·m·x·y) − x) / g`; B→A mirrors with `1/m`. At most one of
/// the two is positive.
pub fn iu_candidates(pool: &PoolState, tick: &PriceTick, fees: &FeeSchedule) -> (f64, f64) {
    let (x, y) = (pool.reserve_a, pool.reserve_b);
    let m = tick.rate();
    let g_ab = 1.0 - fees.rate(Direction::AtoB);
    let g_ba = 1.0 - fees.rate(Direction::BtoA);
    let dx = (x.sqrt() * (y * g_ab * m).sqrt() - x) / g_ab;
    let dy = (y.sqrt() * (x * g_ba / m).sqrt() - y) / g_ba;
    (dx, dy)
}

/// The informed user's trade for this block, or `None` when no swap has a
/// strictly positive capital change after `alpha`.
pub fn iu_optimal_trade(
    pool: &PoolState,
    tick: &PriceTick,
    fees: &FeeSchedule,
    alpha: f64,
) -> Option<TradeIntent> {
    let (dx, dy) = iu_candidates(pool, tick, fees);
    let (direction, amount) = if dx > MIN_TRADE_FRACTION * pool.reserve_a {
        (Direction::AtoB, dx)
    } else if dy > MIN_TRADE_FRACTION * pool.reserve_b {
        (Direction::BtoA, dy)
    } else {
        return None;
    };
    let profit = trade_profit(pool, tick, direction, amount, fees.rate(direction), alpha);
    (profit > 0.0).then_some(TradeIntent {
        direction,
        amount_in: amount,
        agent_class: AgentClass::Informed,
    })
}

/// Derivative-free reference solver for the informed user's problem.
///
/// Scans `grid_resolution` evenly spaced amounts in `(0, reserve]` for each
/// direction, then refines around the best point by golden-section search
/// on the capital change itself. It shares no algebra with the closed form
/// and is slow; use it to check [`iu_optimal_trade`], not in a simulation.
pub mod oracle {
    use super::*;

    const INV_PHI: f64 = 0.618_033_988_749_894_9;

    pub fn iu_brute_force_oracle(
        pool: &PoolState,
        tick: &PriceTick,
        fees: &FeeSchedule,
        alpha: f64,
        grid_resolution: usize,
    ) -> Option<TradeIntent> {
        let grid = grid_resolution.max(1000);
        let mut best: Option<(Direction, f64, f64)> = None;
        for direction in [Direction::AtoB, Direction::BtoA] {
            let fee = fees.rate(direction);
            let (r_in, _) = pool.reserves_for(direction);
            let objective = |amount: f64| trade_profit(pool, tick, direction, amount, fee, alpha);
            let (amount, value) = maximize(objective, r_in, grid);
            if value > 0.0
                && amount > MIN_TRADE_FRACTION * r_in
                && best.is_none_or(|(_, _, v)| value > v)
            {
                best = Some((direction, amount, value));
            }
        }
        best.map(|(direction, amount_in, _)| TradeIntent {
            direction,
            amount_in,
            agent_class: AgentClass::Informed,
        })
    }

    /// Maximizes a unimodal `f` over `(0, ∞)`, starting from the window
    /// `(0, upper]` and doubling it while the best grid point is the last.
    fn maximize(f: impl Fn(f64) -> f64, upper: f64, n: usize) -> (f64, f64) {
        let mut upper = upper;
        let (mut lo, mut hi);
        let mut doublings = 0;
        loop {
            let step = upper / n as f64;
            let (mut best_i, mut best_v) = (1, f(step));
            for i in 2..=n {
                let v = f(step * i as f64);
                if v > best_v {
                    best_i = i;
                    best_v = v;
                }
            }
            if best_i < n || doublings >= 60 {
                lo = step * (best_i - 1) as f64;
                hi = step * (best_i + 1) as f64;
                break;
            }
            upper *= 2.0;
            doublings += 1;
        }

        let mut a = hi - INV_PHI * (hi - lo);
        let mut b = lo + INV_PHI * (hi - lo);
        let (mut fa, mut fb) = (f(a), f(b));
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi {
                break;
            }
            if fa < fb {
                lo = a;
                a = b;
                fa = fb;
                b = lo + INV_PHI * (hi - lo);
                fb = f(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - INV_PHI * (hi - lo);
                fa = f(a);
            }
        }
        if fa >= fb {
            (a, fa)
        } else {
            (b, fb)
        }
    }
}

/// Draws the uninformed user's proposal for one block.
///
/// Draw order on `rng`: arrival `u < p`, then direction (`u < 0.5` is
/// A→B), then the size fraction from `Normal(size_mean, size_std²)`,
/// redrawn until it lies in `(0, max_fraction]`. Nothing after the arrival
/// draw is consumed when the user does not arrive.
pub fn uu_propose_trade<R: Rng + ?Sized>(
    pool: &PoolState,
    params: &UuParams,
    rng: &mut R,
) -> Result<Option<TradeIntent>> {
    let arrival: f64 = rng.random();
    if arrival >= params.prob_trade_per_block {
        return Ok(None);
    }
    let direction = if rng.random::<f64>() < 0.5 {
        Direction::AtoB
    } else {
        Direction::BtoA
    };
    let size = Normal::new(params.size_mean, params.size_std)
        .map_err(|e| Error::InvalidArgument(format!("uu size distribution: {e}")))?;
    let mut fraction = None;
    for _ in 0..1_000_000 {
        let f = size.sample(rng);
        if f > 0.0 && f <= params.max_fraction {
            fraction = Some(f);
            break;
        }
    }
    let fraction = fraction.ok_or_else(|| {
        Error::InvalidArgument("uu size draw rejected 10^6 times in a row".to_string())
    })?;
    let (r_in, _) = pool.reserves_for(direction);
    Ok(Some(TradeIntent {
        direction,
        amount_in: fraction * r_in,
        agent_class: AgentClass::Uninformed,
    }))
}

/// Relative loss `r = δP(Δx, Δy) / D` of a signed trade, where `D` is the
/// denominator chosen by `denominator`.
pub fn uu_relative_loss(
    dx: f64,
    dy: f64,
    fee_value: f64,
    alpha: f64,
    tick: &PriceTick,
    denominator: LossDenominator,
) -> Result<f64> {
    if dx.abs() + dy.abs() == 0.0 {
        return Err(Error::InvalidArgument("relative loss of an empty trade".to_string()));
    }
    let numerator = delta_p(dx, dy, fee_value, alpha, tick);
    let denom = match denominator {
        LossDenominator::GrossVolume => capital(dx.abs(), dy.abs(), tick),
        LossDenominator::Literal => delta_p(dx.abs(), dy.abs(), fee_value, alpha, tick),
    };
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "relative loss denominator is {denom}"
        )));
    }
    Ok(numerator / denom)
}

pub fn acceptance_probability(r: f64) -> f64 {
    (-r.abs()).exp()
}

/// Bernoulli draw with success probability `exp(−|r|)`; consumes one
/// uniform from `rng`.
pub fn uu_accepts<R: Rng + ?Sized>(r: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u < acceptance_probability(r)
}

/// A priced uninformed-user proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UuQuote {
    pub swap: SwapResult,
    /// Relative loss in the model's units, ready for `exp(−|r|)`.
    pub r: f64,
    pub accept_probability: f64,
}

pub fn uu_quote(
    pool: &PoolState,
    intent: &TradeIntent,
    fees: &FeeSchedule,
    tick: &PriceTick,
    alpha: f64,
    model: &RelativeLossModel,
) -> Result<UuQuote> {
    uu_quote_at_rate(pool, intent, fees.rate(intent.direction), tick, alpha, model)
}

/// [`uu_quote`] with the fee given as a plain rate instead of a schedule.
pub fn uu_quote_at_rate(
    pool: &PoolState,
    intent: &TradeIntent,
    fee_rate: f64,
    tick: &PriceTick,
    alpha: f64,
    model: &RelativeLossModel,
) -> Result<UuQuote> {
    let swap = pool.swap(intent.direction, intent.amount_in, fee_rate)?;
    let (dx, dy) = swap.trader_deltas();
    let fee_value = match model.fee_accounting {
        FeeAccounting::Embedded => 0.0,
        FeeAccounting::Literal => swap.fee_amount * tick.input_price(intent.direction),
    };
    let r = model.units.scale() * uu_relative_loss(dx, dy, fee_value, alpha, tick, model.denominator)?;
    Ok(UuQuote {
        swap,
        r,
        accept_probability: acceptance_probability(r),
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::oracle::iu_brute_force_oracle;
    use super::*;

    fn tick_with_rate(m: f64) -> PriceTick {
        PriceTick::new(0, 1.0, m).unwrap()
    }

    #[test]
    fn closed_form_worked_example() {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        let tick = tick_with_rate(1.21);
        let trade = iu_optimal_trade(&pool, &tick, &FeeSchedule::symmetric(0), 0.0).unwrap();
        assert_eq!(trade.direction, Direction::AtoB);
        assert_relative_eq!(trade.amount_in, 10.0, max_relative = 1e-12);
        let after = pool.swap(trade.direction, trade.amount_in, 0.0).unwrap().pool_after;
        assert_relative_eq!(after.spot_rate(), 1.21, max_relative = 1e-12);

        let oracle = iu_brute_force_oracle(&pool, &tick, &FeeSchedule::symmetric(0), 0.0, 1000).unwrap();
        assert_eq!(oracle.direction, Direction::AtoB);
        assert_relative_eq!(oracle.amount_in, 10.0, max_relative = 1e-6);
    }

    #[test]
    fn no_trade_at_fair_price() {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        for bps in [0, 30, 60] {
            let fees = FeeSchedule::symmetric(bps);
            assert!(iu_optimal_trade(&pool, &tick_with_rate(1.0), &fees, 0.0).is_none());
        }
    }

    #[test]
    fn no_trade_inside_the_fee_band() {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        let fees = FeeSchedule::symmetric(30);
        // Band is [(1−f)·x/y, x/(y·(1−f))] = [0.997, 1.003009...].
        for m in [0.997, 0.998, 1.0, 1.002, 1.003, 1.0 / 0.997] {
            let tick = tick_with_rate(m);
            let (dx, dy) = iu_candidates(&pool, &tick, &fees);
            assert!(dx <= 1e-12 && dy <= 1e-12, "m={m}: ({dx}, {dy})");
            assert!(iu_optimal_trade(&pool, &tick, &fees, 0.0).is_none(), "m={m}");
            assert!(iu_brute_force_oracle(&pool, &tick, &fees, 0.0, 1000).is_none(), "m={m}");
        }
        assert!(iu_optimal_trade(&pool, &tick_with_rate(1.004), &fees, 0.0).is_some());
        assert!(iu_optimal_trade(&pool, &tick_with_rate(0.996), &fees, 0.0).is_some());
    }

    #[test]
    fn b_to_a_direction() {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        let tick = tick_with_rate(1.0 / 1.21);
        let trade = iu_optimal_trade(&pool, &tick, &FeeSchedule::symmetric(0), 0.0).unwrap();
        assert_eq!(trade.direction, Direction::BtoA);
        assert_relative_eq!(trade.amount_in, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn alpha_can_swamp_a_small_gap() {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        let tick = tick_with_rate(1.21);
        let fees = FeeSchedule::symmetric(0);
        let profit = trade_profit(&pool, &tick, Direction::AtoB, 10.0, 0.0, 0.0);
        // out = 100 − 10000/110 = 9.0909..; 9.0909·1.21 − 10 = 1.0
        assert_relative_eq!(profit, 1.0, max_relative = 1e-12);

        assert!(iu_optimal_trade(&pool, &tick, &fees, 0.5).is_some());
        assert!(iu_optimal_trade(&pool, &tick, &fees, 1.5).is_none());
        assert!(iu_brute_force_oracle(&pool, &tick, &fees, 1.5, 1000).is_none());

        let small = tick_with_rate(1.2);
        let (dx, _) = iu_candidates(&pool, &small, &fees);
        let gap_profit = trade_profit(&pool, &small, Direction::AtoB, dx, 0.0, 0.0);
        assert!(gap_profit > 0.9 && gap_profit < 1.0);
        assert!(iu_optimal_trade(&pool, &small, &fees, 1.0).is_none());
    }

    #[test]
    fn proposal_respects_probability_and_size() {
        let pool = PoolState::new(12_500_000.0, 12_500_000.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let never = UuParams {
            prob_trade_per_block: 0.0,
            ..UuParams::default()
        };
        for _ in 0..1000 {
            assert!(uu_propose_trade(&pool, &never, &mut rng).unwrap().is_none());
        }

        let fixed = UuParams {
            prob_trade_per_block: 1.0,
            size_mean: 0.001,
            size_std: 0.0,
            max_fraction: 0.05,
        };
        for _ in 0..100 {
            let t = uu_propose_trade(&pool, &fixed, &mut rng).unwrap().unwrap();
            assert_eq!(t.agent_class, AgentClass::Uninformed);
            assert_relative_eq!(t.amount_in, 12_500.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn proposal_count_is_binomial() {
        let pool = PoolState::new(1e6, 1e6).unwrap();
        let params = UuParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut count = 0u32;
        let mut a_to_b = 0u32;
        for _ in 0..n {
            if let Some(t) = uu_propose_trade(&pool, &params, &mut rng).unwrap() {
                count += 1;
                if t.direction == Direction::AtoB {
                    a_to_b += 1;
                }
                let frac = t.amount_in / 1e6;
                assert!(frac > 0.0 && frac <= params.max_fraction);
            }
        }
        let bound = 3.0 * (n as f64 * 0.25).sqrt();
        assert!((count as f64 - 50_000.0).abs() < bound, "count {count}");
        let half = count as f64 / 2.0;
        assert!((a_to_b as f64 - half).abs() < 3.0 * (count as f64 * 0.25).sqrt());
    }

    #[test]
    fn relative_loss_examples() {
        let tick = tick_with_rate(1.0);
        assert_eq!(
            uu_relative_loss(-10.0, 10.0, 0.0, 0.0, &tick, LossDenominator::GrossVolume).unwrap(),
            0.0
        );
        let r = uu_relative_loss(-10.0, 9.066109, 0.0, 0.0, &tick, LossDenominator::GrossVolume).unwrap();
        assert_relative_eq!(r, -0.933891 / 19.066109, max_relative = 1e-12);
        assert_relative_eq!(r, -0.048982, epsilon = 1e-6);
        let r2 = uu_relative_loss(-20.0, 18.132218, 0.0, 0.0, &tick, LossDenominator::GrossVolume).unwrap();
        assert_relative_eq!(r, r2, max_relative = 1e-12);

        let lit = uu_relative_loss(-10.0, 9.066109, 0.03, 0.0, &tick, LossDenominator::Literal).unwrap();
        assert_relative_eq!(lit, (-0.933891 - 0.03) / (19.066109 - 0.03), max_relative = 1e-12);

        assert!(uu_relative_loss(0.0, 0.0, 0.0, 0.0, &tick, LossDenominator::GrossVolume).is_err());
    }

    #[test]
    fn acceptance_probability_examples() {
        assert_eq!(acceptance_probability(0.0), 1.0);
        assert_relative_eq!(acceptance_probability(-0.048982), 0.952198, epsilon = 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| uu_accepts(0.0, &mut rng)));
    }

    #[test]
    fn empirical_acceptance_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let r = -0.048982;
        let n = 1_000_000;
        let hits = (0..n).filter(|_| uu_accepts(r, &mut rng)).count() as f64;
        let p = acceptance_probability(r);
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn quote_uses_model_units() {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        let tick = tick_with_rate(1.0);
        let intent = TradeIntent {
            direction: Direction::AtoB,
            amount_in: 10.0,
            agent_class: AgentClass::Uninformed,
        };
        let fees = FeeSchedule::symmetric(30);
        let frac = RelativeLossModel {
            units: LossUnits::Fraction,
            ..RelativeLossModel::default()
        };
        let q = uu_quote(&pool, &intent, &fees, &tick, 0.0, &frac).unwrap();
        assert_relative_eq!(q.r, -0.048982, epsilon = 1e-6);
        let pct = uu_quote(&pool, &intent, &fees, &tick, 0.0, &RelativeLossModel::default()).unwrap();
        assert_relative_eq!(pct.r, 100.0 * q.r, max_relative = 1e-12);
        assert_relative_eq!(pct.accept_probability, (-100.0 * q.r.abs()).exp(), max_relative = 1e-12);
    }

    #[test]
    fn uu_params_validation_names_the_key() {
        let bad = UuParams {
            size_mean: 0.5,
            ..UuParams::default()
        };
        match bad.validate("simulation.uu") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "simulation.uu.size_mean"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(UuParams::default().validate("uu").is_ok());
    }
}
