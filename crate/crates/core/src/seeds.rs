//! Seed derivation: every random stream in a run is a pure function of the
//! master seed, an index and a component tag.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64, tag: &str) -> u64 {
    let tag_hash = crate::sim::stable_hash(tag.as_bytes());
    splitmix64(splitmix64(master ^ tag_hash).wrapping_add(index))
}
