use ammfeelab_core::agents::{AgentClass, UuParams};
use ammfeelab_core::amm::{PoolState, PriceTick};
use ammfeelab_core::config::{BlockOrder, FeePolicyConfig, PathSource, SimConfig};
use ammfeelab_core::fees::FeePolicy;
use ammfeelab_core::metrics::{Metric, MetricLedger};
use ammfeelab_core::price_feed::{make_path, PricePath, Regime};
use ammfeelab_core::rng::{substream, Stream};
use ammfeelab_core::sim::{run_batch, run_block, run_path, PathState};

fn constant_path(n: usize) -> PricePath {
    make_path(&vec![1.0; n], &vec![1.0; n], "flat").unwrap()
}

fn no_uu() -> UuParams {
    UuParams {
        prob_trade_per_block: 0.0,
        ..UuParams::default()
    }
}

fn synthetic(regime: Regime, n_paths: usize, n_blocks: usize) -> PathSource {
    PathSource::Synthetic {
        regime,
        n_paths,
        n_blocks,
        asset_a: None,
        asset_b: None,
        estimate_from: None,
    }
}

#[test]
fn quiescent_block_changes_nothing() {
    let config = SimConfig {
        uu: no_uu(),
        ..SimConfig::default()
    };
    let pool = PoolState::new(500.0, 500.0).unwrap();
    let tick = PriceTick::new(0, 2.0, 2.0).unwrap();
    let mut state = PathState::new(pool, FeePolicy::fixed(30));
    let mut ledger = MetricLedger::new(pool, tick, 0.0);
    let mut rng = substream(1, 0, Stream::Agents);
    for _ in 0..10 {
        run_block(&mut state, &tick, &config, &mut rng, &mut ledger).unwrap();
    }
    assert_eq!(state.pool, pool);
    assert!(ledger.records().is_empty());
}

#[test]
fn zero_fee_block_closes_the_gap_in_one_trade() {
    let config = SimConfig {
        uu: no_uu(),
        fee_policy: FeePolicyConfig::Fx { f_fx: 0 },
        ..SimConfig::default()
    };
    let pool = PoolState::new(100.0, 100.0).unwrap();
    let tick = PriceTick::new(0, 1.0, 1.21).unwrap();
    let mut state = PathState::new(pool, config.fee_policy.build());
    let mut ledger = MetricLedger::new(pool, tick, 0.0);
    let mut rng = substream(1, 0, Stream::Agents);
    run_block(&mut state, &tick, &config, &mut rng, &mut ledger).unwrap();
    assert_eq!(ledger.records().len(), 1);
    assert_eq!(ledger.records()[0].agent_class, AgentClass::Informed);
    assert!((state.pool.spot_rate() - 1.21).abs() < 1e-12);
    run_block(&mut state, &tick, &config, &mut rng, &mut ledger).unwrap();
    assert_eq!(ledger.records().len(), 1);
}

#[test]
fn acceptance_rate_matches_the_analytic_mean() {
    let config = SimConfig {
        uu: UuParams {
            prob_trade_per_block: 1.0,
            size_mean: 0.001,
            size_std: 0.0,
            max_fraction: 0.05,
        },
        ..SimConfig::default()
    };
    let out = run_path(&config, &constant_path(10_000), 0).unwrap().ledger;
    assert_eq!(out.uu_proposals, 10_000);
    let expected = out.uu_accept_prob_sum;
    // Bernoulli variance bound n/4 for the tolerance
    let tol = 4.0 * (10_000f64 / 4.0).sqrt();
    assert!((out.uu_trades as f64 - expected).abs() < tol, "{} vs {expected}", out.uu_trades);
    assert!(out.uu_trades > 0);
}

#[test]
fn constant_prices_with_uninformed_flow_pay_the_pool() {
    let config = SimConfig {
        uu: UuParams {
            prob_trade_per_block: 0.8,
            size_mean: 1e-4,
            size_std: 5e-5,
            max_fraction: 1e-3,
        },
        fee_policy: FeePolicyConfig::Fx { f_fx: 500 },
        ..SimConfig::default()
    };
    let outcome = run_path(&config, &constant_path(500), 0).unwrap();
    let r = outcome.result;
    assert_eq!(r.iu_trades, 0);
    assert_eq!(r.iu_mo, 0.0);
    assert!(r.uu_trades > 0);
    let fee_value: f64 = outcome.ledger.records().iter().map(|t| t.fee_amount).sum();
    assert!(fee_value > 0.0);
    // The pool earns the fees plus the curvature the traders paid.
    assert!(r.lp_mo >= fee_value * (1.0 - 1e-12));
    assert!((r.lp_mo + r.uu_mo).abs() <= 1e-9 * r.lp_mo);
}

#[test]
fn empty_and_single_block_paths() {
    let config = SimConfig::default();
    let empty = PricePath {
        ticks: vec![],
        source_label: "empty".into(),
        gbm_params: None,
        timestamps: None,
    };
    assert!(run_path(&config, &empty, 0).is_err());

    let quiet = SimConfig {
        uu: no_uu(),
        ..SimConfig::default()
    };
    let r = run_path(&quiet, &constant_path(1), 0).unwrap().result;
    for m in Metric::ALL {
        assert_eq!(m.of(&r), 0.0, "{}", m.column());
    }
}

#[test]
fn block_order_is_visible_in_sequence_numbers() {
    for (order, first) in [
        (BlockOrder::UuFirst, AgentClass::Uninformed),
        (BlockOrder::IuFirst, AgentClass::Informed),
    ] {
        let config = SimConfig {
            block_order: order,
            uu: UuParams {
                prob_trade_per_block: 1.0,
                ..UuParams::default()
            },
            path_source: synthetic(Regime::HighVol, 1, 300),
            ..SimConfig::default()
        };
        let ledger = run_batch_ledger(&config);
        let mut both = 0;
        for block in ledger.records().chunk_by(|a, b| a.block_index == b.block_index) {
            for (i, rec) in block.iter().enumerate() {
                assert_eq!(rec.seq_in_block as usize, i);
            }
            if block.len() == 2 {
                assert_eq!(block[0].agent_class, first);
                assert_ne!(block[1].agent_class, first);
                both += 1;
            }
        }
        assert!(both > 0);
    }
}

fn run_batch_ledger(config: &SimConfig) -> MetricLedger {
    let plan = ammfeelab_core::sim::PathPlan::resolve(config).unwrap();
    let path = plan.path(config.master_seed, 0).unwrap();
    run_path(config, &path, 0).unwrap().ledger
}

#[test]
fn long_soak_keeps_accounting_identities() {
    let config = SimConfig {
        alpha: 1.5,
        fee_policy: FeePolicyConfig::Da { f_init: 30, f_step: 1 },
        path_source: synthetic(Regime::HighVol, 1, 20_000),
        ..SimConfig::default()
    };
    let ledger = run_batch_ledger(&config);
    assert!(ledger.records().len() > 1000);
    for rec in ledger.records() {
        let scale = rec.trader_markout.abs().max(rec.pool_markout.abs()).max(1.0);
        assert!((rec.trader_markout + rec.pool_markout + config.alpha).abs() <= 1e-9 * scale);
    }
    let lp = ledger.lp_hold_markout();
    let tele = ledger.telescoped_lp_markout();
    assert!((lp - tele).abs() <= 1e-6 * lp.abs().max(1.0), "{lp} vs {tele}");

    let (iu, uu, pool, n_iu, n_uu) = ledger.fold_totals();
    assert_eq!((n_iu, n_uu), (ledger.iu_trades, ledger.uu_trades));
    for (a, b) in [(iu, ledger.iu_mo), (uu, ledger.uu_mo), (pool, ledger.pool_mo)] {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn batches_are_deterministic_across_thread_counts() {
    let config = SimConfig {
        fee_policy: FeePolicyConfig::Ob { f_ad: 45, f_nad: 15 },
        path_source: synthetic(Regime::Bull, 12, 200),
        ..SimConfig::default()
    };
    let serial = run_batch(&config, Some(1)).unwrap();
    let parallel = run_batch(&config, Some(4)).unwrap();
    let again = run_batch(&config, None).unwrap();
    assert_eq!(serial.paths, parallel.paths);
    assert_eq!(serial.paths, again.paths);
    assert_eq!(serial.aggregate, parallel.aggregate);
    for (i, p) in serial.paths.iter().enumerate() {
        assert_eq!(p.path_index, i);
    }

    let other_seed = SimConfig {
        master_seed: 43,
        ..config.clone()
    };
    assert_ne!(run_batch(&other_seed, Some(1)).unwrap().paths, serial.paths);
}

#[test]
fn single_path_batch_has_zero_spread() {
    let config = SimConfig {
        path_source: synthetic(Regime::LowVol, 1, 100),
        ..SimConfig::default()
    };
    let batch = run_batch(&config, Some(1)).unwrap();
    for row in &batch.aggregate {
        assert_eq!(row.mean, row.metric.of(&batch.paths[0]));
        assert_eq!(row.std, 0.0);
    }
}

#[test]
fn aggregate_mean_is_the_plain_average() {
    let config = SimConfig {
        path_source: synthetic(Regime::HighVol, 9, 150),
        ..SimConfig::default()
    };
    let batch = run_batch(&config, Some(3)).unwrap();
    for row in &batch.aggregate {
        let values: Vec<f64> = batch.paths.iter().map(|p| row.metric.of(p)).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((row.mean - mean).abs() <= 1e-12 * mean.abs().max(1e-300));
    }
}

#[test]
fn policies_share_prices_and_proposals() {
    let base = SimConfig {
        path_source: synthetic(Regime::HighVol, 3, 400),
        ..SimConfig::default()
    };
    let plan = ammfeelab_core::sim::PathPlan::resolve(&base).unwrap();
    for i in 0..3 {
        let path = plan.path(base.master_seed, i).unwrap();
        let proposals: Vec<u64> = ["fx", "ba", "da", "ob"]
            .iter()
            .map(|name| {
                let cfg = base.with_policy(FeePolicyConfig::from_short_name(name).unwrap());
                run_path(&cfg, &path, i).unwrap().ledger.uu_proposals
            })
            .collect();
        assert!(proposals.windows(2).all(|w| w[0] == w[1]), "{proposals:?}");
    }
}
