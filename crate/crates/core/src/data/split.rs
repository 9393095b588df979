use super::dataset::{Dataset, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::linalg::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_count: usize,
    pub valid_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// 100k / 15.8k / 15.8k with seed 1.
    pub fn emnist_default() -> Self {
        SplitSpec {
            train_count: 100_000,
            valid_count: 15_800,
            test_count: 15_800,
            seed: 1,
        }
    }
}

/// Per-class allocation of `target` samples proportional to `sizes`, never
/// exceeding `capacity`. Starts from the floor of every quota and hands out
/// the remainder one sample at a time to the class furthest below its quota
/// (lowest class index on ties).
fn allocate(target: usize, sizes: &[usize], total: usize, capacity: &[usize]) -> Vec<usize> {
    let quota: Vec<f64> = sizes
        .iter()
        .map(|&s| target as f64 * s as f64 / total as f64)
        .collect();
    let mut alloc: Vec<usize> = quota
        .iter()
        .zip(capacity)
        .map(|(&q, &cap)| (q.floor() as usize).min(cap))
        .collect();
    let mut remaining = target - alloc.iter().sum::<usize>();
    while remaining > 0 {
        let mut best: Option<usize> = None;
        for c in 0..sizes.len() {
            if alloc[c] >= capacity[c] {
                continue;
            }
            let deficit = quota[c] - alloc[c] as f64;
            if best.is_none_or(|b| deficit > quota[b] - alloc[b] as f64) {
                best = Some(c);
            }
        }
        let c = best.expect("total capacity covers the target");
        alloc[c] += 1;
        remaining -= 1;
    }
    alloc
}

/// Stratified train/validation/test split. Every class is shuffled with the
/// seeded generator and cut into proportional shares; each resulting split
/// is shuffled again so classes are interleaved.
pub fn stratified_split(full: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let n = full.len();
    let wanted = spec.train_count + spec.valid_count + spec.test_count;
    if wanted > n {
        return Err(Error::param(format!(
            "split asks for {wanted} samples but only {n} are available"
        )));
    }
    if n == 0 {
        return Err(Error::param("cannot split an empty dataset"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in full.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();

    let mut capacity = sizes.clone();
    let mut shares = Vec::with_capacity(3);
    for target in [spec.train_count, spec.valid_count, spec.test_count] {
        let alloc = allocate(target, &sizes, n, &capacity);
        for (cap, a) in capacity.iter_mut().zip(&alloc) {
            *cap -= a;
        }
        shares.push(alloc);
    }

    let mut rng = RngState::new(spec.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (c, members) in by_class.iter_mut().enumerate() {
        rng.shuffle(members);
        let mut offset = 0;
        for (part, share) in parts.iter_mut().zip(&shares) {
            part.extend_from_slice(&members[offset..offset + share[c]]);
            offset += share[c];
        }
    }
    let [train, valid, test] = parts.map(|mut idx| {
        rng.shuffle(&mut idx);
        idx
    });
    Ok((
        full.subset(&train, format!("{}-train", full.name)),
        full.subset(&valid, format!("{}-valid", full.name)),
        full.subset(&test, format!("{}-test", full.name)),
    ))
}
