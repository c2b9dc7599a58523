//! Seeding scheme.
//!
//! Every random object is a pure function of an explicit `u64` seed. Child
//! seeds are obtained with [`derive_seed`], so replicate `k` of an experiment
//! always sees `derive_seed(root, k)` regardless of execution order.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SketchRng = ChaCha8Rng;

/// Named sub-streams used by the generators.
pub(crate) mod stream {
    pub const SCALES: u64 = 0x005c_a1e5;
    pub const DATA: u64 = 0xda7a;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed number `index` of `root`.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn seeded(seed: u64) -> SketchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `nrows × ncols` iid standard normals, drawn in row-major order.
pub fn standard_normal_matrix(rng: &mut SketchRng, nrows: usize, ncols: usize) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(nrows, ncols);
    for i in 0..nrows {
        for j in 0..ncols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

pub fn standard_normal_vec(rng: &mut SketchRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}
