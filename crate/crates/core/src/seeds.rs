//! Independent per-task seeds derived from one run seed.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one `(split, run, stream)` task of a run seeded with `seed`.
pub fn task_seed(seed: u64, split_id: u32, run_id: u32, stream: u32) -> u64 {
    let mut s = mix(seed);
    for part in [split_id, run_id, stream] {
        s = mix(s ^ u64::from(part));
    }
    s
}
