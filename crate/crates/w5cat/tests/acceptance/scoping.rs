use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use w5cat_core::{CatalogConfig, Endpoint, ItemRef, MemoryCatalog, Partition, SearchScope, Value};

use crate::Outcome;

pub fn examined_counts() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let mut comparisons = 0;
    for population in 0..100 {
        let mut cat = MemoryCatalog::in_memory(CatalogConfig { audit_reads: rng.random_bool(0.5) });
        let assets: Vec<_> = (0..rng.random_range(1..5))
            .map(|i| cat.register_asset("loader", &format!("s3://bucket/{population}/{i}"), "table").unwrap())
            .collect();

        // Non-superseded item count per partition, kept independently. A
        // supersede adds one version and retires one, so it nets zero.
        let mut live = [0usize; 7];
        for p in Partition::PROFILES {
            if rng.random_bool(0.25) {
                continue;
            }
            for n in 0..rng.random_range(1..12) {
                let asset = &assets[rng.random_range(0..assets.len())];
                let key = format!("k{n}");
                let r = cat.set_mi("loader", asset, p, &key, Value::text(format!("v{n}"))).unwrap();
                live[p.ordinal()] += 1;
                if rng.random_bool(0.2) {
                    let target = ItemRef { asset: asset.clone(), partition: p, key, version: r.version };
                    cat.supersede("loader", &target, Value::Int(0), "fix").unwrap();
                }
            }
        }
        if assets.len() > 1 && rng.random_bool(0.5) {
            let endpoints = vec![
                Endpoint::new(assets[0].clone(), Partition::What),
                Endpoint::new(assets[1].clone(), Partition::Who),
            ];
            cat.create_relationship("loader", endpoints, "joins", Value::Null).unwrap();
            live[Partition::Relationship.ordinal()] += 1;
        }

        let global = cat.search("auditor", "v", SearchScope::Global, false).unwrap().examined_count;
        let total: usize = live.iter().sum();
        ensure!(global == total, "population {population}: global examined {global}, expected {total}");
        for p in Partition::ALL {
            let scoped = cat.search("auditor", "v", SearchScope::Partition(p), false).unwrap().examined_count;
            let expected = live[p.ordinal()];
            ensure!(scoped == expected, "population {population}: {p} examined {scoped}, expected {expected}");
            let others = total - expected;
            if others > 0 {
                ensure!(scoped < global, "population {population}: {p} scoped {scoped} not below global {global}");
            }
            comparisons += 1;
        }
    }
    Ok(format!("100 populations, {comparisons} scoped searches"))
}
