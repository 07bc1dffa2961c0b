//! Block loop, path runner, seeded batches and the fee sweep.
//!
//! Within a block the order is fixed:
//!
//! 1. the fee policy sees the previous block's observation;
//! 2. the uninformed user may propose a trade, which passes the
//!    `exp(−|r|)` gate before it executes;
//! 3. the informed user closes whatever gap is left, if profitable;
//! 4. every executed trade is recorded with its markouts.
//!
//! Steps 2 and 3 swap under [`BlockOrder::IuFirst`]. All agent randomness
//! of a path comes from one stream, drawn in the order arrival, direction,
//! size, acceptance.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::agents::{iu_optimal_trade, uu_propose_trade, uu_quote, uu_quote_at_rate, AgentClass, TradeIntent};
use crate::amm::{init_pool, Direction, PoolState, PriceTick, SwapResult};
use crate::config::{BlockOrder, PathSource, SimConfig, SweepConfig};
use crate::error::{Error, Result};
use crate::fees::{BlockObservation, FeePolicy};
use crate::metrics::{aggregate, AggregateRow, MetricLedger, PathResult};
use crate::price_feed::{
    estimate_path_params, load_historical, load_historical_pair, synthetic_path, GbmParams, PricePath,
};
use crate::rng::{substream, Stream};

/// Mutable state of one path between blocks.
#[derive(Debug, Clone)]
pub struct PathState {
    pub pool: PoolState,
    pub policy: FeePolicy,
    /// Pool rate `y / x` at the start of the previous block; `None` before
    /// the first block.
    prev_block_start_q: Option<f64>,
}

impl PathState {
    pub fn new(pool: PoolState, policy: FeePolicy) -> Self {
        PathState {
            pool,
            policy,
            prev_block_start_q: None,
        }
    }
}

/// Runs one block at `tick`, appending executed trades to `ledger`.
pub fn run_block<R: Rng + ?Sized>(
    state: &mut PathState,
    tick: &PriceTick,
    config: &SimConfig,
    rng: &mut R,
    ledger: &mut MetricLedger,
) -> Result<()> {
    let q_now = state.pool.pool_rate();
    let obs = match state.prev_block_start_q {
        Some(q_start) => BlockObservation {
            pool_rate_start: q_start,
            pool_rate_end: q_now,
            oracle_rate: Some(tick.rate()),
        },
        None => BlockObservation::initial(q_now, Some(tick.rate())),
    };
    state.policy.on_block_start(&obs)?;
    state.prev_block_start_q = Some(q_now);

    let mut seq = 0u32;
    match config.block_order {
        BlockOrder::UuFirst => {
            uninformed_step(state, tick, config, rng, ledger, &mut seq)?;
            informed_step(state, tick, config, ledger, &mut seq)?;
        }
        BlockOrder::IuFirst => {
            informed_step(state, tick, config, ledger, &mut seq)?;
            uninformed_step(state, tick, config, rng, ledger, &mut seq)?;
        }
    }
    Ok(())
}

fn uninformed_step<R: Rng + ?Sized>(
    state: &mut PathState,
    tick: &PriceTick,
    config: &SimConfig,
    rng: &mut R,
    ledger: &mut MetricLedger,
    seq: &mut u32,
) -> Result<()> {
    let Some(intent) = uu_propose_trade(&state.pool, &config.uu, rng)? else {
        return Ok(());
    };
    let fees = state.policy.schedule();
    let quote = uu_quote(&state.pool, &intent, &fees, tick, config.alpha, &config.loss_model)?;
    ledger.note_uu_proposal(quote.accept_probability);
    let u: f64 = rng.random();
    if u < quote.accept_probability {
        execute(state, tick, &intent, ledger, seq, Some(quote.swap))?;
    }
    Ok(())
}

fn informed_step(
    state: &mut PathState,
    tick: &PriceTick,
    config: &SimConfig,
    ledger: &mut MetricLedger,
    seq: &mut u32,
) -> Result<()> {
    let fees = state.policy.schedule();
    if let Some(intent) = iu_optimal_trade(&state.pool, tick, &fees, config.alpha) {
        execute(state, tick, &intent, ledger, seq, None)?;
    }
    Ok(())
}

fn execute(
    state: &mut PathState,
    tick: &PriceTick,
    intent: &TradeIntent,
    ledger: &mut MetricLedger,
    seq: &mut u32,
    priced: Option<SwapResult>,
) -> Result<()> {
    let swap = match priced {
        Some(swap) => swap,
        None => {
            let fee = state.policy.schedule().rate(intent.direction);
            state.pool.swap(intent.direction, intent.amount_in, fee)?
        }
    };
    state.pool = swap.pool_after;
    ledger.record(tick.block_index, *seq, intent.agent_class, &swap, tick);
    *seq += 1;
    state.policy.on_trade(intent.direction);
    Ok(())
}

/// Result of one path together with its full trade log.
#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub result: PathResult,
    pub ledger: MetricLedger,
}

/// Simulates `path` from its first tick to its last. Agent draws come from
/// the `(master_seed, path_index)` agent substream.
pub fn run_path(config: &SimConfig, path: &PricePath, path_index: usize) -> Result<PathOutcome> {
    let first = *path
        .ticks
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot simulate an empty price path".to_string()))?;
    let pool = init_pool(config.initial_pool_value, &first)?;
    let mut state = PathState::new(pool, config.fee_policy.build());
    let mut ledger = MetricLedger::new(pool, first, config.alpha);
    let mut rng = substream(config.master_seed, path_index as u64, Stream::Agents);
    for tick in &path.ticks {
        run_block(&mut state, tick, config, &mut rng, &mut ledger)?;
    }
    let last = *path.ticks.last().expect("path checked non-empty");
    ledger.finish(state.pool, last);
    Ok(PathOutcome {
        result: ledger.path_result(path_index),
        ledger,
    })
}

/// Where a batch's prices come from, resolved once per batch.
#[derive(Debug, Clone)]
pub enum PathPlan {
    Synthetic {
        label: String,
        asset_a: GbmParams,
        asset_b: GbmParams,
        n_paths: usize,
        n_blocks: usize,
    },
    Fixed(PricePath),
}

impl PathPlan {
    pub fn resolve(config: &SimConfig) -> Result<Self> {
        match &config.path_source {
            PathSource::Synthetic {
                regime,
                n_paths,
                n_blocks,
                asset_a,
                asset_b,
                estimate_from,
            } => {
                let (a, b, label) = if let Some(file) = estimate_from {
                    let (a, b) = estimate_path_params(&load_historical(file)?)?;
                    (a, b, format!("{}_estimated", regime.label()))
                } else {
                    let preset = regime.preset();
                    let pick = |over: &Option<GbmParams>, def: Option<GbmParams>, key: &str| {
                        over.or(def).ok_or_else(|| {
                            Error::config(
                                format!("simulation.path_source.{key}"),
                                "required when regime = \"custom\"",
                            )
                        })
                    };
                    let a = pick(asset_a, preset.map(|p| p.0), "asset_a")?;
                    let b = pick(asset_b, preset.map(|p| p.1), "asset_b")?;
                    (a, b, regime.label().to_string())
                };
                Ok(PathPlan::Synthetic {
                    label,
                    asset_a: a,
                    asset_b: b,
                    n_paths: *n_paths,
                    n_blocks: *n_blocks,
                })
            }
            PathSource::Historical { file, file_b } => {
                let path = match file_b {
                    Some(fb) => load_historical_pair(file, fb)?,
                    None => load_historical(file)?,
                };
                Ok(PathPlan::Fixed(path))
            }
        }
    }

    pub fn n_paths(&self) -> usize {
        match self {
            PathPlan::Synthetic { n_paths, .. } => *n_paths,
            PathPlan::Fixed(_) => 1,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            PathPlan::Synthetic { label, .. } => label,
            PathPlan::Fixed(path) => &path.source_label,
        }
    }

    /// Price path number `index`. Synthetic paths are drawn from the
    /// `(master_seed, index)` price substream, so every policy sees the
    /// same prices.
    pub fn path(&self, master_seed: u64, index: usize) -> Result<PricePath> {
        match self {
            PathPlan::Synthetic {
                label,
                asset_a,
                asset_b,
                n_blocks,
                ..
            } => {
                let mut rng = substream(master_seed, index as u64, Stream::Prices);
                synthetic_path(asset_a, asset_b, *n_blocks, label, &mut rng)
            }
            PathPlan::Fixed(path) => Ok(path.clone()),
        }
    }
}

/// Per-path results (in path order) and their aggregate.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub label: String,
    pub paths: Vec<PathResult>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs every path of the configured source. `threads` caps parallelism
/// (`None` uses rayon's default); results do not depend on it.
pub fn run_batch(config: &SimConfig, threads: Option<usize>) -> Result<BatchOutcome> {
    let plan = PathPlan::resolve(config)?;
    run_plan(config, &plan, threads)
}

/// [`run_batch`] against an already resolved plan, so several policies can
/// share one historical load.
pub fn run_plan(config: &SimConfig, plan: &PathPlan, threads: Option<usize>) -> Result<BatchOutcome> {
    let n = plan.n_paths();
    if n == 0 {
        return Err(Error::InvalidArgument("batch needs at least one path".to_string()));
    }
    let one = |i: usize| -> Result<PathResult> {
        let path = plan.path(config.master_seed, i)?;
        Ok(run_path(config, &path, i)?.result)
    };
    let results: Result<Vec<PathResult>> = match threads {
        Some(1) => (0..n).map(one).collect(),
        _ => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                builder = builder.num_threads(t);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| (0..n).into_par_iter().map(one).collect())
        }
    };
    let paths = results?;
    Ok(BatchOutcome {
        label: plan.label().to_string(),
        aggregate: aggregate(&paths),
        paths,
    })
}

/// Writes the synthetic paths of `config` as `path_XXXX.csv` files into
/// `dir` and returns their file names in order.
pub fn write_paths(config: &SimConfig, dir: &Path) -> Result<Vec<String>> {
    let plan = PathPlan::resolve(config)?;
    if let PathPlan::Fixed(_) = plan {
        return Err(Error::config("simulation.path_source.kind", "generate needs a synthetic path source"));
    }
    let mut names = Vec::with_capacity(plan.n_paths());
    for i in 0..plan.n_paths() {
        let name = format!("path_{i:04}.csv");
        plan.path(config.master_seed, i)?.save(&dir.join(&name))?;
        names.push(name);
    }
    Ok(names)
}

/// One fee level of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub fee_pct: f64,
    pub accept_probability: f64,
    /// Fee value of one executed trade, in base currency.
    pub fee_value: f64,
    /// `accept_probability · fee_value`.
    pub expected: f64,
    /// Mean LP revenue over the Bernoulli trials.
    pub mc_mean: f64,
    /// Standard error of `mc_mean`.
    pub mc_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    /// Point with the largest expected revenue (first one on ties).
    pub argmax: SweepPoint,
}

/// Expected LP fee revenue from a single A→B trade of `amount_in` against
/// a fixed pool, across the configured fee grid.
///
/// The Monte-Carlo column reuses one set of `n_trials` uniforms (from the
/// sweep substream of `seed`) for every fee level, so neighbouring points
/// differ only through the acceptance probability.
pub fn fee_sweep(config: &SweepConfig) -> Result<SweepCurve> {
    config.validate()?;
    let pool = PoolState::new(config.reserve_a, config.reserve_b)?;
    let tick = PriceTick::new(0, config.p_a, config.p_b)?;
    let intent = TradeIntent {
        direction: Direction::AtoB,
        amount_in: config.amount_in,
        agent_class: AgentClass::Uninformed,
    };
    let mut rng = substream(config.seed, 0, Stream::Sweep);
    let uniforms: Vec<f64> = (0..config.n_trials).map(|_| rng.random()).collect();
    let n = config.n_trials as f64;

    let mut points = Vec::new();
    for fee_pct in config.grid_pct() {
        // One bps is 0.01%, so the percent grid maps to a plain rate.
        let rate = fee_pct / 100.0;
        let quote = uu_quote_at_rate(&pool, &intent, rate, &tick, config.alpha, &config.loss_model)?;
        let fee_value = quote.swap.fee_amount * tick.input_price(intent.direction);
        let p = quote.accept_probability;
        let hits = uniforms.iter().filter(|&&u| u < p).count() as f64;
        let mc_mean = fee_value * hits / n;
        let mc_std = if config.n_trials > 1 {
            fee_value * (hits * (n - hits) / (n * (n - 1.0))).sqrt() / n.sqrt()
        } else {
            0.0
        };
        points.push(SweepPoint {
            fee_pct,
            accept_probability: p,
            fee_value,
            expected: p * fee_value,
            mc_mean,
            mc_std,
        });
    }
    let argmax = *points
        .iter()
        .fold(None::<&SweepPoint>, |best, pt| match best {
            Some(b) if b.expected >= pt.expected => Some(b),
            _ => Some(pt),
        })
        .expect("validated grid is non-empty");
    Ok(SweepCurve { points, argmax })
}
