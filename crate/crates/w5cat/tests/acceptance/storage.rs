use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use w5cat::store::{Store, StoreConfig, LOG_FILE};
use w5cat_core::{
    replay, AssetId, CatalogConfig, CatalogError, CatalogState, Endpoint, ItemRef, MemoryCatalog, Partition,
    SearchScope, Value, VersionSelector,
};

use crate::Outcome;

const KEYS: [&str; 4] = ["owner", "rows", "purpose", "format"];

fn random_value(rng: &mut StdRng) -> Value {
    match rng.random_range(0..4) {
        0 => Value::Int(rng.random_range(-1000..1000)),
        1 => Value::text(format!("text {}", rng.random_range(0..100))),
        2 => Value::Bool(rng.random_bool(0.5)),
        _ => {
            let mut m = BTreeMap::new();
            m.insert("n".to_owned(), Value::Int(rng.random_range(0..10)));
            m.insert("tags".to_owned(), Value::List(vec![Value::text("a"), Value::Null]));
            Value::Map(m)
        }
    }
}

struct Sequence {
    catalog: MemoryCatalog,
    writes: usize,
    reads: usize,
    written: Vec<(ItemRef, Value)>,
    /// Log length and state just before the most recent appended record.
    before_last: Option<(usize, CatalogState)>,
}

fn run_sequence(rng: &mut StdRng, audit_reads: bool, ops: usize) -> Result<Sequence, String> {
    let mut s = Sequence {
        catalog: MemoryCatalog::in_memory(CatalogConfig { audit_reads }),
        writes: 0,
        reads: 0,
        written: Vec::new(),
        before_last: None,
    };
    let assets: Vec<AssetId> =
        (0..3).map(|i| s.catalog.register_asset("setup", &format!("file:///data/{i}.csv"), "csv").unwrap()).collect();
    s.writes += assets.len();

    for _ in 0..ops {
        let len_before = s.catalog.log_bytes().len();
        let state_before = s.catalog.state().clone();
        let actor = ["alice", "bob"][rng.random_range(0..2)];
        let asset = &assets[rng.random_range(0..assets.len())];
        let partition = Partition::PROFILES[rng.random_range(0..6)];
        let key = KEYS[rng.random_range(0..KEYS.len())];
        match rng.random_range(0..10) {
            0..=3 => {
                let value = random_value(rng);
                let r = s.catalog.set_mi(actor, asset, partition, key, value.clone()).map_err(|e| e.to_string())?;
                s.written.push((
                    ItemRef { asset: asset.clone(), partition, key: key.to_owned(), version: r.version },
                    value,
                ));
                s.writes += 1;
            }
            4 | 5 if !s.written.is_empty() => {
                let (target, _) = s.written[rng.random_range(0..s.written.len())].clone();
                let value = random_value(rng);
                match s.catalog.supersede(actor, &target, value.clone(), "correction") {
                    Ok(r) => {
                        s.written.push((ItemRef { version: r.version, ..target }, value));
                        s.writes += 1;
                    }
                    Err(CatalogError::AlreadySuperseded { .. }) => {}
                    Err(e) => return Err(format!("supersede failed: {e}")),
                }
            }
            6 => {
                let selector =
                    [VersionSelector::Latest, VersionSelector::All, VersionSelector::Exact(1)][rng.random_range(0..3)];
                match s.catalog.get_mi(actor, asset, partition, key, selector) {
                    Ok(_) => s.reads += 1,
                    Err(CatalogError::NotFound { .. }) => {}
                    Err(e) => return Err(format!("get failed: {e}")),
                }
            }
            7 => {
                let other = &assets[rng.random_range(0..assets.len())];
                let endpoints = vec![
                    Endpoint::new(asset.clone(), partition),
                    Endpoint::new(other.clone(), Partition::PROFILES[rng.random_range(0..6)]),
                ];
                s.catalog
                    .create_relationship(actor, endpoints, "derived_from", random_value(rng))
                    .map_err(|e| e.to_string())?;
                s.writes += 1;
            }
            _ => {
                let scope = if rng.random_bool(0.5) { SearchScope::Global } else { SearchScope::Partition(partition) };
                s.catalog.search(actor, key, scope, rng.random_bool(0.3)).map_err(|e| e.to_string())?;
                s.reads += 1;
            }
        }
        if s.catalog.log_bytes().len() > len_before {
            s.before_last = Some((len_before, state_before));
        }
    }
    Ok(s)
}

fn check_sequence(rng: &mut StdRng, s: &Sequence, audit_reads: bool) -> Result<(), String> {
    let state = s.catalog.state();
    let log = s.catalog.log_bytes();

    let replayed = replay(log).map_err(|e| e.to_string())?;
    ensure!(&replayed.state == state, "(a) replayed state differs from live state");

    for item in state.items() {
        let versions = state.versions(&item.asset, item.partition, &item.key).unwrap();
        for (i, v) in versions.iter().enumerate() {
            ensure!(
                v.version as usize == i + 1,
                "(b) {} {} {} has gap at {}",
                item.asset,
                item.partition,
                item.key,
                i + 1
            );
        }
    }

    for (r, value) in &s.written {
        let got = state
            .select(&r.asset, r.partition, &r.key, VersionSelector::Exact(r.version))
            .map_err(|e| format!("(c) {r:?} unreadable: {e}"))?;
        ensure!(&got[0].value == value, "(c) {r:?} changed value");
    }

    let expected = s.writes + if audit_reads { s.reads } else { 0 };
    ensure!(state.audit().len() == expected, "(d) {} audit records, expected {expected}", state.audit().len());

    if let Some((start, before)) = &s.before_last {
        let cut = rng.random_range(start + 1..log.len());
        let recovered = replay(&log[..cut]).map_err(|e| format!("(e) {e}"))?;
        ensure!(recovered.torn_tail.is_some(), "(e) truncated tail not reported");
        ensure!(&recovered.state == before, "(e) truncated log did not recover state N-1");
    }
    Ok(())
}

/// The same truncation check through the on-disk store.
fn check_on_disk(rng: &mut StdRng, s: &Sequence) -> Result<(), String> {
    let Some((start, before)) = &s.before_last else { return Ok(()) };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = s.catalog.log_bytes();
    let cut = rng.random_range(start + 1..log.len());
    std::fs::write(dir.path().join(LOG_FILE), &log[..cut]).map_err(|e| e.to_string())?;
    let store = Store::open(&StoreConfig::new(dir.path())).map_err(|e| e.to_string())?;
    ensure!(store.state() == before, "(e) on-disk recovery did not yield state N-1");
    let len = std::fs::metadata(dir.path().join(LOG_FILE)).map_err(|e| e.to_string())?.len();
    ensure!(len as usize == *start, "(e) log not truncated to last intact record");
    Ok(())
}

pub fn properties() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let mut ops_total = 0;
    for i in 0..1000 {
        let audit_reads = i % 4 != 0;
        let ops = rng.random_range(1..60);
        let s = run_sequence(&mut rng, audit_reads, ops).map_err(|e| format!("sequence {i}: {e}"))?;
        check_sequence(&mut rng, &s, audit_reads).map_err(|e| format!("sequence {i}: {e}"))?;
        if i % 20 == 0 {
            check_on_disk(&mut rng, &s).map_err(|e| format!("sequence {i}: {e}"))?;
        }
        ops_total += ops;
    }
    Ok(format!("1000 sequences, {ops_total} operations, 50 on-disk recoveries"))
}
