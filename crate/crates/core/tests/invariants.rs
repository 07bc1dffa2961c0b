use ammfeelab_core::amm::{capital, Direction, PoolState, PriceTick};
use ammfeelab_core::fees::{BlockObservation, BlockSignal, FeePolicy};
use ammfeelab_core::metrics::trade_markout;
use proptest::prelude::*;

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::AtoB), Just(Direction::BtoA)]
}

proptest! {
    #[test]
    fn swap_conserves_tokens_and_grows_k(
        x in 1e-3f64..1e9,
        y in 1e-3f64..1e9,
        frac in 1e-9f64..10.0,
        fee in 0.0f64..0.5,
        dir in direction(),
    ) {
        let pool = PoolState::new(x, y).unwrap();
        let (r_in, _) = pool.reserves_for(dir);
        let amount = frac * r_in;
        let s = pool.swap(dir, amount, fee).unwrap();
        let after = s.pool_after;
        let (d_in, d_out) = match dir {
            Direction::AtoB => (after.reserve_a - x, y - after.reserve_b),
            Direction::BtoA => (after.reserve_b - y, x - after.reserve_a),
        };
        prop_assert!((d_in - amount).abs() <= 1e-12 * (r_in + amount));
        prop_assert!((d_out - s.amount_out).abs() <= 1e-12 * x.max(y));
        prop_assert!((s.fee_amount - amount * fee).abs() <= 1e-15 * amount);
        // k never shrinks, and is preserved exactly (up to rounding) at zero fee
        let rel = (after.product() - pool.product()) / pool.product();
        prop_assert!(rel >= -1e-12);
        if fee == 0.0 {
            prop_assert!(rel.abs() < 1e-12);
        }
    }

    #[test]
    fn markouts_cancel_against_alpha(
        x in 1.0f64..1e8,
        y in 1.0f64..1e8,
        p_a in 1e-4f64..1e4,
        p_b in 1e-4f64..1e4,
        frac in 1e-6f64..0.5,
        fee in 0.0f64..0.05,
        alpha in 0.0f64..100.0,
        dir in direction(),
    ) {
        let pool = PoolState::new(x, y).unwrap();
        let tick = PriceTick::new(3, p_a, p_b).unwrap();
        let (r_in, _) = pool.reserves_for(dir);
        let s = pool.swap(dir, frac * r_in, fee).unwrap();
        let (trader, lp) = trade_markout(&s, &tick, alpha);
        let scale = capital(s.amount_in, s.amount_out, &tick) + alpha;
        prop_assert!((trader + lp + alpha).abs() <= 1e-12 * scale);
    }

    #[test]
    fn capital_is_linear(
        a1 in -1e6f64..1e6, b1 in -1e6f64..1e6,
        a2 in -1e6f64..1e6, b2 in -1e6f64..1e6,
        k in -10.0f64..10.0,
        p_a in 1e-3f64..1e3, p_b in 1e-3f64..1e3,
    ) {
        let t = PriceTick::new(0, p_a, p_b).unwrap();
        let lhs = capital(a1 + k * a2, b1 + k * b2, &t);
        let rhs = capital(a1, b1, &t) + k * capital(a2, b2, &t);
        let scale = (a1.abs() + k.abs() * a2.abs()) * p_a + (b1.abs() + k.abs() * b2.abs()) * p_b;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn adaptive_fees_keep_their_sum(
        start in 0u32..=30,
        step in 1u32..=7,
        events in prop::collection::vec((0u8..3, direction(), 0.5f64..2.0), 1..400),
    ) {
        let mut ba = FeePolicy::block_adaptive(30, step, BlockSignal::PoolRate);
        let mut da = FeePolicy::deal_adaptive(30, step);
        // Move both policies away from the symmetric start first.
        for _ in 0..start {
            da.on_trade(Direction::AtoB);
        }
        for (kind, dir, q) in events {
            match kind {
                0 => { ba.on_block_start(&BlockObservation::initial(q, None)).unwrap(); }
                1 => {
                    let obs = BlockObservation { pool_rate_start: 1.0, pool_rate_end: q, oracle_rate: None };
                    ba.on_block_start(&obs).unwrap();
                }
                _ => { da.on_trade(dir); }
            }
            for p in [&ba, &da] {
                let s = p.schedule();
                prop_assert_eq!(s.a_to_b + s.b_to_a, 60);
                prop_assert!(s.a_to_b <= 60 && s.b_to_a <= 60);
            }
        }
    }

    #[test]
    fn oracle_fee_follows_gap_sign(
        spot in 0.1f64..10.0,
        ln_gap in prop_oneof![-1.0f64..-1e-9, 1e-9f64..1.0],
        f_ad in 0u32..200,
        f_nad in 0u32..200,
    ) {
        let mut ob = FeePolicy::oracle_based(f_ad, f_nad);
        let m = spot * ln_gap.exp();
        let obs = BlockObservation::initial(1.0 / spot, Some(m));
        let s = ob.on_block_start(&obs).unwrap();
        // m above spot: arbitrage sells A into the pool, so A→B is the
        // arbitrage direction.
        let (ad, nad) = if m > spot { (s.a_to_b, s.b_to_a) } else { (s.b_to_a, s.a_to_b) };
        prop_assert_eq!((ad, nad), (f_ad, f_nad));
    }
}
