use w5cat_core::classify::{evaluate_ruleset, fixtures, suggest};
use w5cat_core::metrics::{builtin_models, none_stats, normalize_bits, ResponseDataset, NONE_CHOICE};
use w5cat_core::Partition;

use crate::Outcome;

/// Published per-question entropies, in the column order of the entropy table.
const ENTROPY_ORDER: [u32; 27] =
    [1, 2, 3, 4, 8, 9, 10, 13, 15, 17, 18, 19, 22, 23, 27, 5, 6, 7, 11, 12, 14, 16, 20, 21, 24, 25, 26];
const ENTROPY: [(&str, usize, [f64; 27]); 3] = [
    (
        "5W1H+R",
        7,
        [
            1.06, 1.34, 0.81, 0.93, 0.99, 1.83, 1.73, 1.9, 1.94, 1.83, 2.0, 2.37, 1.6, 0.61, 1.58, 1.52, 2.42, 1.97,
            1.81, 2.25, 2.06, 2.09, 1.46, 1.13, 1.84, 2.07, 2.72,
        ],
    ),
    (
        "GCS",
        7,
        [
            2.4, 2.72, 2.6, 2.52, 2.66, 2.68, 2.48, 2.67, 2.32, 2.4, 2.49, 2.61, 2.05, 1.01, 2.28, 2.12, 2.44, 1.78,
            2.35, 2.36, 2.49, 2.48, 1.44, 0.68, 2.02, 1.81, 1.88,
        ],
    ),
    (
        "Datahub",
        6,
        [
            2.27, 2.15, 1.65, 1.34, 1.8, 2.36, 2.18, 2.52, 2.01, 2.25, 2.37, 2.38, 1.91, 1.23, 1.66, 1.41, 2.02, 1.92,
            1.73, 2.03, 1.63, 1.87, 2.06, 1.64, 1.65, 1.67, 1.81,
        ],
    ),
];

/// Published normalized entropies; this table lists the questions in a
/// different order.
const NORMALIZED_ORDER: [u32; 27] =
    [1, 2, 3, 4, 8, 9, 10, 11, 13, 15, 17, 18, 19, 22, 23, 27, 5, 6, 7, 12, 14, 16, 20, 21, 24, 25, 26];
const NORMALIZED: [[f64; 27]; 3] = [
    [
        0.37, 0.47, 0.29, 0.33, 0.35, 0.65, 0.62, 0.64, 0.67, 0.69, 0.65, 0.71, 0.84, 0.57, 0.22, 0.56, 0.54, 0.86,
        0.7, 0.8, 0.73, 0.74, 0.52, 0.4, 0.65, 0.73, 0.96,
    ],
    [
        0.85, 0.97, 0.92, 0.89, 0.95, 0.95, 0.88, 0.83, 0.95, 0.82, 0.85, 0.88, 0.93, 0.73, 0.36, 0.81, 0.75, 0.87,
        0.63, 0.84, 0.88, 0.88, 0.51, 0.24, 0.72, 0.64, 0.67,
    ],
    [
        0.86, 0.82, 0.63, 0.51, 0.68, 0.9, 0.83, 0.66, 0.96, 0.77, 0.86, 0.9, 0.91, 0.73, 0.47, 0.63, 0.54, 0.77, 0.73,
        0.77, 0.62, 0.71, 0.78, 0.63, 0.63, 0.64, 0.69,
    ],
];

fn published_normalized(model: usize, question: u32) -> f64 {
    let col = NORMALIZED_ORDER.iter().position(|&q| q == question).expect("question in both tables");
    NORMALIZED[model][col]
}

pub fn normalization() -> Outcome {
    let mut worst_overall: f64 = 0.0;
    let mut worst_per_model = Vec::new();
    for (m, (name, k, row)) in ENTROPY.iter().enumerate() {
        let spec = builtin_models().into_iter().find(|s| s.name() == *name).expect("built-in model");
        ensure!(spec.k() == *k, "{name}: k is {}, expected {k}", spec.k());
        let mut worst: f64 = 0.0;
        for (col, &q) in ENTROPY_ORDER.iter().enumerate() {
            let got = normalize_bits(row[col], spec.k());
            let diff = (got - published_normalized(m, q)).abs();
            ensure!(diff <= 0.03, "{name} Q{q}: {got:.4} vs published {}", published_normalized(m, q));
            worst = worst.max(diff);
        }
        if m < 2 {
            ensure!(worst <= 0.01, "{name}: max deviation {worst:.4} exceeds 0.01");
        }
        worst_overall = worst_overall.max(worst);
        worst_per_model.push(format!("{name} {worst:.4}"));
    }
    Ok(format!("max |diff| {}", worst_per_model.join(", ")))
}

/// Spread `nones` None answers and `total` answers over 27 questions, the
/// remainder going to real partitions.
fn synthetic(ds: &mut ResponseDataset, mm: &str, nones: usize, total: usize) {
    let spec = ds.model(mm).expect("model").clone();
    let mut line = ds.len() + 1;
    for q in 0..27 {
        let share = |n: usize| n / 27 + usize::from(q < n % 27);
        let (qn, qt) = (share(nones), share(total));
        for i in 0..qt {
            line += 1;
            let choice = if i < qn { NONE_CHOICE } else { spec.partitions()[i % spec.k()].as_str() };
            ds.push_row(line, &format!("p{i}"), mm, &format!("Q{}", q + 1), choice, "3").expect("valid row");
        }
    }
}

pub fn none_proportions() -> Outcome {
    let published = [("5W1H+R", 165, 832, "0.199"), ("GCS", 340, 1033, "0.329"), ("Datahub", 331, 1109, "0.298")];
    let mut ds = ResponseDataset::default();
    for (mm, nones, total, _) in published {
        synthetic(&mut ds, mm, nones, total);
    }
    let mut lines = Vec::new();
    let mut mismatches = Vec::new();
    for (mm, nones, total, expected) in published {
        let stats = none_stats(&ds, mm).map_err(|e| e.to_string())?;
        ensure!(
            stats.nones == nones as u64 && stats.responses == total as u64,
            "{mm}: dataset holds {}/{}, expected {nones}/{total}",
            stats.nones,
            stats.responses
        );
        let shown = format!("{:.3}", stats.proportion);
        lines.push(format!("{mm} {nones}/{total}={shown}"));
        if shown != expected {
            mismatches.push(format!(
                "{mm}: {nones}/{total} = {:.5} rounds to {shown}, published {expected}",
                stats.proportion
            ));
        }
    }
    if mismatches.is_empty() {
        Ok(lines.join(", "))
    } else {
        Err(mismatches.join("; "))
    }
}

pub fn fixture_corpus() -> Outcome {
    let eval = evaluate_ruleset();
    ensure!(eval.total == 27, "corpus has {} questions", eval.total);
    ensure!(eval.accuracy == 1.0, "accuracy {} failures {:?}", eval.accuracy, eval.failures);
    let corpus = fixtures();
    for (id, gold) in [("Q10", Partition::What), ("Q14", Partition::How), ("Q22", Partition::When)] {
        let q = corpus.iter().find(|f| f.id == id).ok_or(format!("{id} missing"))?;
        ensure!(q.gold == gold, "{id} gold label is {}", q.gold);
        let top = suggest(&q.text).top();
        ensure!(top == Some(gold), "{id} classified as {top:?}, expected {gold}");
    }
    Ok("accuracy 1.0 over 27; Q10 What, Q14 How, Q22 When".into())
}
