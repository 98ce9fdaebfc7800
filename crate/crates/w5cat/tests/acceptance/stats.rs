use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use w5cat_core::metrics::{entropy, mann_whitney_u, normalized_entropy, Distribution, MentalModelSpec, PMethod};

use crate::Outcome;

/// Two-sided p by listing every assignment of pooled positions to the first
/// sample and counting those at least as extreme as the observed one.
fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total = pooled.len();
    let u_of = |mask: u32| -> f64 {
        let mut u = 0.0;
        for i in (0..total).filter(|i| mask & (1 << i) != 0) {
            for j in (0..total).filter(|j| mask & (1 << j) == 0) {
                u += pairwise(pooled[i], pooled[j]);
            }
        }
        u
    };
    let nm = (a.len() * b.len()) as f64;
    let observed = u_of((1u32 << a.len()) - 1);
    let observed = observed.min(nm - observed);
    let (mut extreme, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize == a.len() {
            all += 1;
            if u_of(mask) <= observed + 1e-9 {
                extreme += 1;
            }
        }
    }
    (2.0 * extreme as f64 / all as f64).min(1.0)
}

fn pairwise(x: f64, y: f64) -> f64 {
    if x > y {
        1.0
    } else if x == y {
        0.5
    } else {
        0.0
    }
}

/// U for the first sample counted pair by pair.
fn pairwise_u(a: &[f64], b: &[f64]) -> f64 {
    a.iter().map(|&x| b.iter().map(|&y| pairwise(x, y)).sum::<f64>()).sum()
}

pub fn properties() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0004);

    for n in [1u64, 2, 28, 1000] {
        let h = entropy(&Distribution::from_slice(&[n])).map_err(|e| e.to_string())?;
        ensure!(h == 0.0, "point mass of {n} has entropy {h}");
    }
    for k in 2..=32usize {
        let h = entropy(&Distribution::from_slice(&vec![4; k])).map_err(|e| e.to_string())?;
        ensure!((h - (k as f64).log2()).abs() <= 1e-12, "uniform over {k}: {h}");
    }

    let model = MentalModelSpec::five_w1h_r();
    for _ in 0..1000 {
        let len = rng.random_range(1..=12);
        let mut counts: Vec<u64> = (0..len).map(|_| rng.random_range(0..50)).collect();
        counts[0] += 1;
        let h = entropy(&Distribution::from_slice(&counts)).unwrap();
        let mut shuffled = counts.clone();
        shuffled.shuffle(&mut rng);
        let hs = entropy(&Distribution::from_slice(&shuffled)).unwrap();
        ensure!((h - hs).abs() <= 1e-12, "permutation changed entropy: {counts:?} {h} vs {shuffled:?} {hs}");

        let c = rng.random_range(2..=20);
        let scaled: Vec<u64> = counts.iter().map(|x| x * c).collect();
        let hn = normalized_entropy(&Distribution::from_slice(&counts), &model).unwrap();
        let hn_scaled = normalized_entropy(&Distribution::from_slice(&scaled), &model).unwrap();
        ensure!((hn - hn_scaled).abs() <= 1e-12, "scaling by {c} changed normalized entropy of {counts:?}");
        let distinct = counts.iter().filter(|&&x| x > 0).count() as f64;
        ensure!(h >= 0.0 && h <= distinct.log2() + 1e-12, "entropy {h} outside [0, log2 {distinct}]");
    }

    let mut exact_cases = 0;
    for n in 1..=6usize {
        for m in 1..=6usize {
            for _ in 0..6 {
                let mut grid: Vec<u32> = (0..40).collect();
                grid.shuffle(&mut rng);
                let a: Vec<f64> = grid[..n].iter().map(|&v| v as f64).collect();
                let b: Vec<f64> = grid[n..n + m].iter().map(|&v| v as f64).collect();
                let r = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                ensure!(r.method == PMethod::Exact, "n={n} m={m} used {:?}", r.method);
                let oracle = enumerated_p(&a, &b);
                ensure!(
                    (r.p_two_sided - oracle).abs() <= 1e-12,
                    "n={n} m={m}: p {} vs enumeration {oracle}",
                    r.p_two_sided
                );
                let swapped = mann_whitney_u(&b, &a).unwrap();
                ensure!(
                    swapped.u == r.u && swapped.p_two_sided == r.p_two_sided,
                    "swap changed result for {a:?} {b:?}"
                );
                exact_cases += 1;
            }
        }
    }

    for _ in 0..1000 {
        let n = rng.random_range(1..=15);
        let m = rng.random_range(1..=15);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(1..=5) as f64).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(1..=5) as f64).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        let ua = pairwise_u(&a, &b);
        ensure!(r.u_a == ua, "rank U {} vs pairwise {ua} for {a:?} {b:?}", r.u_a);
        ensure!(r.u == ua.min((n * m) as f64 - ua), "reported U is not the minimum");
        ensure!((0.0..=1.0).contains(&r.p_two_sided), "p out of range");
    }

    Ok(format!("{exact_cases} exact-p cases, 1000 permutation/scaling draws, 1000 tied samples"))
}
