use std::collections::BTreeSet;

use geobench::metrics::histogram::GROWTH;
use geobench::metrics::{cost_per_txn, CostInputs, LatencyHistogram};
use geobench::model::{
    classify, HomeSpan, Key, LogicTag, PartitionId, PartitionSpan, PlacementMap, RegionId,
    ReplicationScope, Transaction, Value,
};
use geobench::scenarios::{point_seed, AxisValue, Preset, ScenarioKind};
use geobench::workload::{build_stream, Arrival, Spacing, WorkloadConfig};
use proptest::prelude::*;

fn txn_and_placement() -> impl Strategy<Value = (Transaction, Vec<RegionId>, u16)> {
    (1u16..=8, 1u32..=24).prop_flat_map(|(regions, partitions)| {
        let homes = prop::collection::vec((0..regions).prop_map(RegionId), partitions as usize);
        let keys = prop::collection::vec((0..partitions, 0u64..50, any::<bool>()), 1..8);
        (homes, keys, 0..regions).prop_map(move |(homes, keys, origin)| {
            let mut t = Transaction::new(1, RegionId(origin), LogicTag::Custom);
            for (p, r, write) in keys {
                if write {
                    t.write_set
                        .insert(Key::new(p, r), Value { seed: r, len: 4 });
                } else {
                    t.read_set.insert(Key::new(p, r));
                }
            }
            (t, homes, regions)
        })
    })
}

proptest! {
    #[test]
    fn classifier_matches_home_enumeration((t, homes, regions) in txn_and_placement()) {
        let pm = PlacementMap::from_homes(regions, homes.clone(), ReplicationScope::Partial(0)).unwrap();
        let c = classify(&t, &pm).unwrap();
        let parts: BTreeSet<u32> = t.keys().iter().map(|k| k.partition.0).collect();
        let touched: BTreeSet<u16> = parts.iter().map(|&p| homes[p as usize].0).collect();
        let expect_home = match touched.len() {
            1 if touched.contains(&t.origin.0) => HomeSpan::LSH,
            1 => HomeSpan::FSH,
            _ => HomeSpan::MH,
        };
        let expect_part = if parts.len() == 1 { PartitionSpan::SP } else { PartitionSpan::MP };
        prop_assert_eq!(c.home_span, expect_home);
        prop_assert_eq!(c.partition_span, expect_part);
    }

    #[test]
    fn class_ignores_replica_placement(
        (t, homes, regions) in txn_and_placement(),
        picks in prop::collection::vec(prop::collection::vec(0u16..8, 0..4), 24),
    ) {
        let base = PlacementMap::from_homes(regions, homes.clone(), ReplicationScope::Partial(0)).unwrap();
        let mut moved = base.clone();
        for (p, pick) in picks.iter().enumerate().take(homes.len()) {
            let home = homes[p];
            let reps: BTreeSet<u16> = pick.iter().map(|r| r % regions).filter(|&r| r != home.0).collect();
            moved
                .set_replicas(PartitionId(p as u32), reps.into_iter().map(RegionId).collect())
                .unwrap();
        }
        prop_assert_eq!(classify(&t, &base).unwrap(), classify(&t, &moved).unwrap());
    }

    #[test]
    fn cost_is_monotone(
        servers in 1.0f64..64.0,
        price in 0.1f64..4.0,
        gb in 0.0f64..500.0,
        gb_price in 0.0f64..0.1,
        stored in 0.0f64..1e3,
        tps in 1.0f64..1e5,
        bump in 1.0f64..3.0,
    ) {
        let i = CostInputs {
            servers,
            server_price_per_hour: price,
            transfer_gb_per_hour: gb,
            transfer_price_per_gb: gb_price,
            stored_gb: stored,
            storage_price_per_gb_hour: 1e-4,
            throughput: tps,
        };
        let c = |i: CostInputs| cost_per_txn(&i).unwrap().finite().unwrap().per_txn;
        let base = c(i);
        let more_servers = c(CostInputs { servers: servers + bump, ..i });
        let more_transfer = c(CostInputs {
            transfer_gb_per_hour: gb + bump,
            transfer_price_per_gb: gb_price + 0.01,
            ..i
        });
        let more_storage = c(CostInputs { stored_gb: stored + bump, ..i });
        let more_tps = c(CostInputs { throughput: tps * (1.0 + bump), ..i });
        prop_assert!(more_servers > base);
        prop_assert!(more_transfer > base);
        prop_assert!(more_storage > base);
        prop_assert!(more_tps < base);
    }

    #[test]
    fn histogram_percentile_brackets_exact(
        mut values in prop::collection::vec(1_000u64..1_000_000_000_000, 1..400),
        q in 0.01f64..0.99,
    ) {
        let mut h = LatencyHistogram::new();
        for &v in &values {
            h.record(v);
        }
        values.sort_unstable();
        let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
        let exact = values[rank - 1] as f64;
        let got = h.percentile(q).unwrap().unwrap();
        prop_assert!(got >= exact, "{got} below {exact}");
        prop_assert!(got <= exact * GROWTH * (1.0 + 1e-12), "{got} above {exact} by more than a bucket");
    }

    #[test]
    fn histogram_merge_is_order_free(
        a in prop::collection::vec(1_000u64..1_000_000_000, 0..100),
        b in prop::collection::vec(1_000u64..1_000_000_000, 0..100),
    ) {
        let fill = |v: &[u64]| {
            let mut h = LatencyHistogram::new();
            v.iter().for_each(|&x| h.record(x));
            h
        };
        let (mut ab, mut ba) = (fill(&a), fill(&b));
        ab.merge(&fill(&b));
        ba.merge(&fill(&a));
        let all: Vec<u64> = a.iter().chain(&b).copied().collect();
        prop_assert_eq!(&ab, &ba);
        prop_assert_eq!(ab, fill(&all));
    }

    #[test]
    fn point_config_does_not_depend_on_other_points(
        kind_idx in 0usize..8,
        pick in 0usize..20,
        desk in any::<bool>(),
    ) {
        let kind = ScenarioKind::ALL[kind_idx];
        let preset = if desk { Preset::Desk } else { Preset::Full };
        let full = preset.scenario(kind);
        let i = pick % full.axis.len();
        let points = full.points().unwrap();
        let mut alone = full.clone();
        alone.axis = vec![full.axis[i].clone()];
        let single = &alone.points().unwrap()[0];
        prop_assert_eq!(&single.config, &points[i].config);
        prop_assert_eq!(&single.label, &points[i].label);
        if let AxisValue::Number(v) = full.axis[i] {
            prop_assert_eq!(single.param, v);
        }
        let seeds: BTreeSet<u64> = (0..full.axis.len()).map(|j| point_seed(full.seed, kind, j, 0)).collect();
        prop_assert_eq!(seeds.len(), full.axis.len());
    }

    #[test]
    fn stream_is_a_function_of_its_seed(seed in any::<u64>(), rate in 10.0f64..200.0, exp in any::<bool>()) {
        let pm = PlacementMap::balanced(32, 4, ReplicationScope::Partial(0)).unwrap();
        let arrival = Arrival::Open {
            rate,
            spacing: if exp { Spacing::Exponential } else { Spacing::Fixed },
        };
        let make = || {
            build_stream(&WorkloadConfig::default(), &pm, &arrival, None, 1_000_000_000, seed)
                .unwrap()
                .collect::<Vec<_>>()
        };
        let (a, b) = (make(), make());
        prop_assert!(a.windows(2).all(|w| w[0].submit_time <= w[1].submit_time));
        prop_assert_eq!(a, b);
    }
}
