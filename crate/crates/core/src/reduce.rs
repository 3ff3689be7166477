//! Deterministic parallel reductions.
//!
//! Work is split into fixed-size chunks whose partial sums are combined in
//! chunk order, so results do not depend on the number of worker threads.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Sums `f(i)` for `i` in `0..len`, component-wise.
pub fn sum_indexed<const N: usize>(len: usize, f: impl Fn(usize) -> [f64; N] + Sync) -> [f64; N] {
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<[f64; N]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [0.0; N];
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                let v = f(i);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; N];
    for p in partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

pub fn sum<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    sum_indexed(items.len(), |i| [f(&items[i])])[0]
}

/// Maximum of `f` over `items`, floored at 0 (so 0 for an empty slice).
pub fn max<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    items.par_iter().map(|x| f(x)).reduce(|| 0.0, f64::max)
}
