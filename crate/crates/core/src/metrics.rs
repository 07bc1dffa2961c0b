//! Markouts, impermanent loss, aggregation and result emission.
//!
//! Trader markouts are valued at the executing block's oracle prices. LP
//! figures compare the final pool against the initial reserves at the
//! path's last prices:
//!
//! * `lp_mo = P_T(x_T, y_T) − P_T(x₀, y₀)` (hold-adjusted LP markout)
//! * `il_hold = −lp_mo`
//! * `il_divergence = P_T(x₀, y₀) − P_T(x_T − fees_a, y_T − fees_b)`, the
//!   loss versus holding with fee income removed (positive = loss)

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::agents::AgentClass;
use crate::amm::{capital, Direction, PoolState, PriceTick, SwapResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRecord {
    pub block_index: u64,
    /// Position of the trade inside its block, from 0.
    pub seq_in_block: u32,
    pub agent_class: AgentClass,
    pub direction: Direction,
    /// Reserve change of token A (pool perspective, fee included).
    pub delta_a: f64,
    pub delta_b: f64,
    /// Fee in input-token units; the input token is given by `direction`.
    pub fee_amount: f64,
    pub trader_markout: f64,
    pub pool_markout: f64,
}

/// `(trader, pool)` markouts of a swap at the block's prices. The trader's
/// side is what it received minus what it paid (fee included in the
/// payment) minus `alpha`; the pool's side is its inflow minus outflow, so
/// `trader + pool = −alpha`.
pub fn trade_markout(swap: &SwapResult, tick: &PriceTick, alpha: f64) -> (f64, f64) {
    let (da, db) = swap.pool_deltas();
    let pool = capital(da, db, tick);
    (-pool - alpha, pool)
}

/// Per-path trade log with running totals.
#[derive(Debug, Clone)]
pub struct MetricLedger {
    records: Vec<TradeRecord>,
    alpha: f64,
    initial_pool: PoolState,
    initial_tick: PriceTick,
    final_state: Option<(PoolState, PriceTick)>,
    pub iu_mo: f64,
    pub uu_mo: f64,
    pub pool_mo: f64,
    pub iu_trades: u64,
    pub uu_trades: u64,
    pub uu_proposals: u64,
    /// Sum of acceptance probabilities over all uninformed proposals.
    pub uu_accept_prob_sum: f64,
}

impl MetricLedger {
    pub fn new(initial_pool: PoolState, initial_tick: PriceTick, alpha: f64) -> Self {
        MetricLedger {
            records: Vec::new(),
            alpha,
            initial_pool,
            initial_tick,
            final_state: None,
            iu_mo: 0.0,
            uu_mo: 0.0,
            pool_mo: 0.0,
            iu_trades: 0,
            uu_trades: 0,
            uu_proposals: 0,
            uu_accept_prob_sum: 0.0,
        }
    }

    pub fn records(&self) -> &[TradeRecord] {
        &self.records
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn initial_pool(&self) -> &PoolState {
        &self.initial_pool
    }

    pub fn initial_tick(&self) -> &PriceTick {
        &self.initial_tick
    }

    pub fn note_uu_proposal(&mut self, accept_probability: f64) {
        self.uu_proposals += 1;
        self.uu_accept_prob_sum += accept_probability;
    }

    pub fn record(
        &mut self,
        block_index: u64,
        seq_in_block: u32,
        agent_class: AgentClass,
        swap: &SwapResult,
        tick: &PriceTick,
    ) -> TradeRecord {
        let (trader_markout, pool_markout) = trade_markout(swap, tick, self.alpha);
        let (delta_a, delta_b) = swap.pool_deltas();
        let rec = TradeRecord {
            block_index,
            seq_in_block,
            agent_class,
            direction: swap.direction,
            delta_a,
            delta_b,
            fee_amount: swap.fee_amount,
            trader_markout,
            pool_markout,
        };
        match agent_class {
            AgentClass::Informed => {
                self.iu_mo += trader_markout;
                self.iu_trades += 1;
            }
            AgentClass::Uninformed => {
                self.uu_mo += trader_markout;
                self.uu_trades += 1;
            }
        }
        self.pool_mo += pool_markout;
        self.records.push(rec);
        rec
    }

    pub fn finish(&mut self, final_pool: PoolState, final_tick: PriceTick) {
        self.final_state = Some((final_pool, final_tick));
    }

    fn final_state(&self) -> (PoolState, PriceTick) {
        self.final_state.unwrap_or((self.initial_pool, self.initial_tick))
    }

    /// `P_T(x_T, y_T) − P_T(x₀, y₀)`.
    pub fn lp_hold_markout(&self) -> f64 {
        let (pool, tick) = self.final_state();
        capital(pool.reserve_a, pool.reserve_b, &tick)
            - capital(self.initial_pool.reserve_a, self.initial_pool.reserve_b, &tick)
    }

    /// `P_T(x₀, y₀) − P_T(x_T − fees_a, y_T − fees_b)`.
    pub fn il_divergence(&self) -> f64 {
        let (pool, tick) = self.final_state();
        let fees_a = pool.fees_accrued_a - self.initial_pool.fees_accrued_a;
        let fees_b = pool.fees_accrued_b - self.initial_pool.fees_accrued_b;
        capital(self.initial_pool.reserve_a, self.initial_pool.reserve_b, &tick)
            - capital(pool.reserve_a - fees_a, pool.reserve_b - fees_b, &tick)
    }

    /// LP markout rebuilt from the trade log: every reserve change valued at
    /// final prices. Equals [`Self::lp_hold_markout`] up to rounding.
    pub fn telescoped_lp_markout(&self) -> f64 {
        let (_, tick) = self.final_state();
        self.records.iter().map(|r| capital(r.delta_a, r.delta_b, &tick)).sum()
    }

    /// `(iu_mo, uu_mo, pool_mo, iu_trades, uu_trades)` recomputed from the
    /// records.
    pub fn fold_totals(&self) -> (f64, f64, f64, u64, u64) {
        self.records.iter().fold((0.0, 0.0, 0.0, 0, 0), |mut acc, r| {
            match r.agent_class {
                AgentClass::Informed => {
                    acc.0 += r.trader_markout;
                    acc.3 += 1;
                }
                AgentClass::Uninformed => {
                    acc.1 += r.trader_markout;
                    acc.4 += 1;
                }
            }
            acc.2 += r.pool_markout;
            acc
        })
    }

    pub fn path_result(&self, path_index: usize) -> PathResult {
        PathResult {
            path_index,
            iu_mo: self.iu_mo,
            uu_mo: self.uu_mo,
            lp_mo: self.lp_hold_markout(),
            il_divergence: self.il_divergence(),
            il_hold: -self.lp_hold_markout(),
            iu_trades: self.iu_trades,
            uu_trades: self.uu_trades,
            final_pool: self.final_state().0,
        }
    }
}

/// Totals of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub path_index: usize,
    pub iu_mo: f64,
    pub uu_mo: f64,
    pub lp_mo: f64,
    pub il_divergence: f64,
    pub il_hold: f64,
    pub iu_trades: u64,
    pub uu_trades: u64,
    pub final_pool: PoolState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    IuMo,
    UuMo,
    LpMo,
    IlDivergence,
    IlHold,
    IuTrades,
    UuTrades,
}

impl Metric {
    /// Table order.
    pub const ALL: [Metric; 7] = [
        Metric::IuMo,
        Metric::UuMo,
        Metric::LpMo,
        Metric::IlDivergence,
        Metric::IlHold,
        Metric::IuTrades,
        Metric::UuTrades,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Metric::IuMo => "iu_mo",
            Metric::UuMo => "uu_mo",
            Metric::LpMo => "lp_mo",
            Metric::IlDivergence => "il_divergence",
            Metric::IlHold => "il_hold",
            Metric::IuTrades => "iu_trades",
            Metric::UuTrades => "uu_trades",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::IuMo => "IU MO",
            Metric::UuMo => "UU MO",
            Metric::LpMo => "LP MO",
            Metric::IlDivergence => "IL (divergence)",
            Metric::IlHold => "IL (hold)",
            Metric::IuTrades => "IU trades",
            Metric::UuTrades => "UU trades",
        }
    }

    /// Whether a larger value is better. Arbitrage profit and impermanent
    /// loss are costs to the pool; the others are gains.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::IuMo | Metric::IlDivergence | Metric::IlHold)
    }

    pub fn of(self, r: &PathResult) -> f64 {
        match self {
            Metric::IuMo => r.iu_mo,
            Metric::UuMo => r.uu_mo,
            Metric::LpMo => r.lp_mo,
            Metric::IlDivergence => r.il_divergence,
            Metric::IlHold => r.il_hold,
            Metric::IuTrades => r.iu_trades as f64,
            Metric::UuTrades => r.uu_trades as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
}

/// Arithmetic mean and sample standard deviation (0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per metric, in [`Metric::ALL`] order. Results are folded in the
/// order given, so callers sort by path index first.
pub fn aggregate(results: &[PathResult]) -> Vec<AggregateRow> {
    Metric::ALL
        .iter()
        .map(|&metric| {
            let values: Vec<f64> = results.iter().map(|r| metric.of(r)).collect();
            let (mean, std) = mean_std(&values);
            AggregateRow { metric, mean, std }
        })
        .collect()
}

/// One-sided exact sign test. Returns `(wins, n, p)` where `wins` counts
/// strictly positive differences, `n` the non-zero ones, and `p` is
/// `P(X ≥ wins)` for `X ~ Binomial(n, 1/2)`.
pub fn sign_test(diffs: &[f64]) -> (usize, usize, f64) {
    let wins = diffs.iter().filter(|d| **d > 0.0).count();
    let n = diffs.iter().filter(|d| **d != 0.0).count();
    // log C(n, k) accumulated in f64; n is at most a few thousand here.
    let mut log_c = 0.0f64;
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut p = 0.0;
    for k in 0..=n {
        if k > 0 {
            log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= wins {
            p += (log_c + ln_half_n).exp();
        }
    }
    (wins, n, p.min(1.0))
}

/// Results of one (regime, policy) run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub run_id: String,
    pub regime: String,
    pub policy: String,
    pub paths: Vec<PathResult>,
}

pub const RESULTS_HEADER: &str =
    "run_id,path_index,regime,policy,iu_mo,uu_mo,lp_mo,il_divergence,il_hold,iu_trades,uu_trades";

pub const AGGREGATE_ROW: &str = "aggregate";
pub const AGGREGATE_STD_ROW: &str = "aggregate_std";

/// Results CSV: one row per path, then an `aggregate` row of means and an
/// `aggregate_std` row of sample standard deviations, per result set.
pub fn emit_results_csv(sets: &[ResultSet]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for set in sets {
        let mut paths = set.paths.clone();
        paths.sort_by_key(|p| p.path_index);
        for p in &paths {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                set.run_id,
                p.path_index,
                set.regime,
                set.policy,
                p.iu_mo,
                p.uu_mo,
                p.lp_mo,
                p.il_divergence,
                p.il_hold,
                p.iu_trades,
                p.uu_trades
            );
        }
        if paths.is_empty() {
            continue;
        }
        let rows = aggregate(&paths);
        for (label, pick) in [
            (AGGREGATE_ROW, (|r: &AggregateRow| r.mean) as fn(&AggregateRow) -> f64),
            (AGGREGATE_STD_ROW, |r: &AggregateRow| r.std),
        ] {
            let values: Vec<String> = rows.iter().map(|r| pick(r).to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                set.run_id,
                label,
                set.regime,
                set.policy,
                values.join(",")
            );
        }
    }
    out
}

pub const TRADES_HEADER: &str =
    "block_index,seq_in_block,agent_class,direction,delta_a,delta_b,fee_amount,trader_markout,pool_markout";

pub fn emit_trades_csv(records: &[TradeRecord]) -> String {
    let mut out = String::from(TRADES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.block_index,
            r.seq_in_block,
            r.agent_class.as_str(),
            r.direction.as_str(),
            r.delta_a,
            r.delta_b,
            r.fee_amount,
            r.trader_markout,
            r.pool_markout
        );
    }
    out
}

/// Mean ± std of the headline metrics for one (regime, policy) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub regime: String,
    pub policy: String,
    pub values: Vec<(Metric, f64, f64)>,
}

impl SummaryRow {
    pub fn from_set(set: &ResultSet) -> Self {
        let values = aggregate(&set.paths)
            .into_iter()
            .map(|r| (r.metric, r.mean, r.std))
            .collect();
        SummaryRow {
            regime: set.regime.clone(),
            policy: set.policy.clone(),
            values,
        }
    }

    pub fn get(&self, metric: Metric) -> Option<(f64, f64)> {
        self.values.iter().find(|v| v.0 == metric).map(|v| (v.1, v.2))
    }
}

/// Columns of the markdown comparison table.
pub const TABLE_METRICS: [Metric; 5] = [
    Metric::IuMo,
    Metric::UuMo,
    Metric::LpMo,
    Metric::IlDivergence,
    Metric::IlHold,
];

/// The oracle-based policy is a benchmark and never competes for bold.
fn competes(policy: &str) -> bool {
    !policy.eq_ignore_ascii_case("OB")
}

/// Markdown table, one block of rows per regime in first-seen order. In
/// each block and column the best non-oracle policy is bold (all of them on
/// a tie), when at least two compete.
pub fn emit_markdown(rows: &[SummaryRow]) -> String {
    let mut regimes: Vec<&str> = Vec::new();
    for r in rows {
        if !regimes.contains(&r.regime.as_str()) {
            regimes.push(&r.regime);
        }
    }
    let mut out = String::from("| Market | Alg. |");
    for m in TABLE_METRICS {
        let _ = write!(out, " {} |", m.title());
    }
    out.push_str("\n|---|---|");
    for _ in TABLE_METRICS {
        out.push_str("---|");
    }
    out.push('\n');

    for regime in regimes {
        let block: Vec<&SummaryRow> = rows.iter().filter(|r| r.regime == regime).collect();
        let contenders: Vec<&&SummaryRow> = block.iter().filter(|r| competes(&r.policy)).collect();
        let best: Vec<Option<f64>> = TABLE_METRICS
            .iter()
            .map(|&m| {
                if contenders.len() < 2 {
                    return None;
                }
                let means = contenders.iter().filter_map(|r| r.get(m).map(|v| v.0));
                if m.higher_is_better() {
                    means.reduce(f64::max)
                } else {
                    means.reduce(f64::min)
                }
            })
            .collect();
        for row in &block {
            let _ = write!(out, "| {} | {} |", regime, row.policy);
            for (i, &m) in TABLE_METRICS.iter().enumerate() {
                let cell = match row.get(m) {
                    Some((mean, std)) => {
                        let text = format!("{mean:.2} ± {std:.2}");
                        if competes(&row.policy) && best[i] == Some(mean) {
                            format!("**{text}**")
                        } else {
                            text
                        }
                    }
                    None => "n/a".to_string(),
                };
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
    }
    out
}
